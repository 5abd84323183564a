//! Gain/loss operators, their truncation at the live range, and the defect
//! coupling `η·w·μ`, evaluated cellwise.
//!
//! Conventions: the gain carries the ½ of unordered pairs, the loss counts
//! ordered pairs (no ½, and the self-pair `i = j` enters with full weight
//! `κ_i K(i,i) κ_i`). Products heavier than the live range `M` are routed by
//! mass into the defect classes `M+1..=2M`; defect weight `η = ⟨w, λ⟩`
//! converts live particles into defect particles at rate `w_i·η`.

use crate::par::map_indexed;
use crate::state::{DefectState, StateMeasure};
use crate::typespace::Model;

/// Cellwise coagulation rate densities: signed for the live classes, a
/// nonnegative source for the defect classes.
#[derive(Debug, Clone)]
pub struct CoagFlux {
    /// `dκ[class 1..=M][cell]`, class-major.
    pub dkappa: Vec<f64>,
    /// `dλ[class 1..=2M][cell]`, class-major, nonnegative.
    pub dlambda: Vec<f64>,
}

/// Gain rates at one cell: `g_k = ½ Σ_{i+j=k, i,j≤M} K(i,j) κ_i κ_j` for
/// `k` up to `2M`. `kappa_cell` holds the live per-class densities.
pub fn gain(kappa_cell: &[f64], model: &Model) -> Vec<f64> {
    let m = model.num_classes;
    let mut g = vec![0.0; 2 * m];
    for i in 0..m {
        let ki = kappa_cell[i];
        if ki == 0.0 {
            continue;
        }
        for j in 0..m {
            g[i + j + 1] += 0.5 * model.kernel(i, j) * ki * kappa_cell[j];
        }
    }
    g
}

/// Loss rates at one cell: `l_i = κ_i Σ_{j≤M} K(i,j) κ_j`.
pub fn loss(kappa_cell: &[f64], model: &Model) -> Vec<f64> {
    let m = model.num_classes;
    (0..m)
        .map(|i| {
            let mut s = 0.0;
            for j in 0..m {
                s += model.kernel(i, j) * kappa_cell[j];
            }
            kappa_cell[i] * s
        })
        .collect()
}

/// Per-cell flux of the truncated system at one cell, written into the
/// provided slices. `eta` is `⟨w, λ⟩` at the cell.
fn flux_at_cell(
    kappa_cell: &[f64],
    eta: f64,
    model: &Model,
    dkappa: &mut [f64],
    dlambda: &mut [f64],
) {
    let m = model.num_classes;
    let g = gain(kappa_cell, model);
    let l = loss(kappa_cell, model);
    for k in 0..m {
        let convert = model.weights[k] * eta * kappa_cell[k];
        dkappa[k] = g[k] - l[k] - convert;
        dlambda[k] = convert;
    }
    dlambda[m..2 * m].copy_from_slice(&g[m..2 * m]);
}

/// Evaluates the truncated coagulation flux over all cells.
///
/// Live classes receive `gain − loss − w·η·κ`; overflow products (mass above
/// the live range) and converted particles feed the defect classes. The
/// per-cell mass balance `Σ m·dκ + Σ m·dλ = 0` is structural.
pub fn truncated_flux(kappa: &StateMeasure, lambda: &DefectState, model: &Model) -> CoagFlux {
    let m = model.num_classes;
    let nc = kappa.grid.cell_count();
    let per_cell: Vec<(Vec<f64>, Vec<f64>)> = map_indexed(nc, |cell| {
        let kappa_cell: Vec<f64> = (0..m).map(|i| kappa.density[i * nc + cell]).collect();
        let mut dk = vec![0.0; m];
        let mut dl = vec![0.0; 2 * m];
        flux_at_cell(&kappa_cell, lambda.eta[cell], model, &mut dk, &mut dl);
        (dk, dl)
    });
    let mut dkappa = vec![0.0; m * nc];
    let mut dlambda = vec![0.0; 2 * m * nc];
    for (cell, (dk, dl)) in per_cell.into_iter().enumerate() {
        for i in 0..m {
            dkappa[i * nc + cell] = dk[i];
        }
        for i in 0..2 * m {
            dlambda[i * nc + cell] = dl[i];
        }
    }
    CoagFlux { dkappa, dlambda }
}

/// Total coagulation loss rate per live class and cell:
/// `c_i(x) = Σ_{j≤M} K(i,j) κ_j(x) + w_i·η(x)`.
pub fn c_field(kappa: &StateMeasure, lambda: &DefectState, model: &Model) -> Vec<f64> {
    let m = model.num_classes;
    let nc = kappa.grid.cell_count();
    let mut c = vec![0.0; m * nc];
    for i in 0..m {
        for cell in 0..nc {
            let mut s = 0.0;
            for j in 0..m {
                s += model.kernel(i, j) * kappa.density[j * nc + cell];
            }
            c[i * nc + cell] = s + model.weights[i] * lambda.eta[cell];
        }
    }
    c
}
