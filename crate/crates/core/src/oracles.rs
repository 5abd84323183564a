//! Independent reference solutions: RK4 on the spatially homogeneous
//! coagulation system over classes `1..=2M` (no truncation below `2M`, no
//! defect bookkeeping) and closed-form Gaussian diffusion profiles.

use crate::error::CoagError;
use crate::state::SpatialGrid;
use crate::typespace::Model;

const BLOWUP_GUARD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    OdeRk4,
    ClosedForm,
}

/// A reference trajectory: per-class concentrations (homogeneous oracle) or a
/// per-cell profile (diffusion oracle) at each sample time.
#[derive(Debug, Clone)]
pub struct Reference {
    pub times: Vec<f64>,
    pub data: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

fn smoluchowski_rhs(n: &[f64], model: &Model) -> Vec<f64> {
    let nc = n.len(); // 2M
    let mut dn = vec![0.0; nc];
    // gain: pairs from all of 1..=2M whose product stays within the table
    for i in 0..nc {
        if n[i] == 0.0 {
            continue;
        }
        for j in 0..nc {
            let k = i + j + 1;
            if k < nc {
                dn[k] += 0.5 * model.kernel(i, j) * n[i] * n[j];
            }
        }
    }
    // loss: full ordered-pair sum
    for k in 0..nc {
        let mut s = 0.0;
        for j in 0..nc {
            s += model.kernel(k, j) * n[j];
        }
        dn[k] -= n[k] * s;
    }
    dn
}

/// Classic fixed-step RK4 on the untruncated homogeneous system, sampled at
/// `sample_times` (each must be an integer multiple of `dt_ref`).
pub fn homogeneous_ode(
    model: &Model,
    n0: &[f64],
    sample_times: &[f64],
    dt_ref: f64,
) -> Result<Reference, CoagError> {
    assert!(dt_ref > 0.0);
    let nc = model.total_classes();
    if n0.len() != nc {
        return Err(CoagError::ShapeMismatch {
            what: format!("oracle initial state has {} classes, model 2M = {}", n0.len(), nc),
        });
    }
    let mut n = n0.to_vec();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(sample_times.len());
    let mut next = 0;
    let eps = dt_ref * 1e-6;
    while next < sample_times.len() {
        if (t - sample_times[next]).abs() < eps {
            out.push(n.clone());
            next += 1;
            continue;
        }
        if t > sample_times[next] {
            return Err(CoagError::GridMismatch {
                what: format!("sample time {} is not a multiple of dt_ref", sample_times[next]),
            });
        }
        let k1 = smoluchowski_rhs(&n, model);
        let n2: Vec<f64> = n.iter().zip(&k1).map(|(x, k)| x + 0.5 * dt_ref * k).collect();
        let k2 = smoluchowski_rhs(&n2, model);
        let n3: Vec<f64> = n.iter().zip(&k2).map(|(x, k)| x + 0.5 * dt_ref * k).collect();
        let k3 = smoluchowski_rhs(&n3, model);
        let n4: Vec<f64> = n.iter().zip(&k3).map(|(x, k)| x + dt_ref * k).collect();
        let k4 = smoluchowski_rhs(&n4, model);
        for i in 0..nc {
            n[i] += dt_ref / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if n[i].abs() > BLOWUP_GUARD {
                return Err(CoagError::OracleBlowUp { value: n[i], t });
            }
        }
        t += dt_ref;
    }
    Ok(Reference {
        times: sample_times.to_vec(),
        data: out,
        provenance: Provenance::OdeRk4,
    })
}

/// Wrapped-Gaussian profile with variance `σ0² + a·t` per axis, evaluated at
/// cell midpoints, for a unit-mass bump centered at `center` (per axis).
/// Requires `√(σ0² + a·t) < L/6` so boundary wrap is negligible.
pub fn diffusion_reference(
    grid: &SpatialGrid,
    a: f64,
    sigma0_sq: f64,
    t: f64,
    center: f64,
) -> Result<Reference, CoagError> {
    let var = sigma0_sq + a * t;
    if var.sqrt() >= grid.length / 6.0 {
        return Err(CoagError::Scenario(format!(
            "diffusion reference: spread {} not small against L = {}",
            var.sqrt(),
            grid.length
        )));
    }
    let nc = grid.cell_count();
    let norm = (2.0 * std::f64::consts::PI * var).sqrt();
    let profile: Vec<f64> = (0..nc)
        .map(|cell| {
            let idx = grid.decompose(cell);
            let mut p = 1.0;
            for axis in 0..grid.dim as usize {
                let mut axis_val = 0.0;
                let x = grid.center(idx[axis]);
                // wrap over a few images; spread < L/6 makes this converge fast
                for img in -3i64..=3 {
                    let d = x - center + img as f64 * grid.length;
                    axis_val += (-(d * d) / (2.0 * var)).exp() / norm;
                }
                p *= axis_val;
            }
            p
        })
        .collect();
    Ok(Reference {
        times: vec![t],
        data: vec![profile],
        provenance: Provenance::ClosedForm,
    })
}

/// Normwise errors per matched sample time.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub times: Vec<f64>,
    pub l1: Vec<f64>,
    pub linf: Vec<f64>,
    /// Per-entry absolute errors at the final time.
    pub final_per_entry: Vec<f64>,
}

/// Compares two references on identical time grids; interpolation forbidden.
pub fn compare(run: &Reference, reference: &Reference) -> Result<ErrorReport, CoagError> {
    if run.times.len() != reference.times.len()
        || run
            .times
            .iter()
            .zip(&reference.times)
            .any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + b.abs()))
    {
        return Err(CoagError::GridMismatch {
            what: "sample time grids differ".into(),
        });
    }
    let mut l1 = Vec::new();
    let mut linf = Vec::new();
    for (a, b) in run.data.iter().zip(&reference.data) {
        if a.len() != b.len() {
            return Err(CoagError::GridMismatch {
                what: "entry counts differ".into(),
            });
        }
        let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
        l1.push(diffs.iter().sum());
        linf.push(diffs.iter().fold(0.0_f64, |m, &x| m.max(x)));
    }
    let final_per_entry = run
        .data
        .last()
        .unwrap()
        .iter()
        .zip(reference.data.last().unwrap())
        .map(|(x, y)| (x - y).abs())
        .collect();
    Ok(ErrorReport {
        times: run.times.clone(),
        l1,
        linf,
        final_per_entry,
    })
}

/// Closed form for the constant-kernel (`K ≡ 1`) monodisperse problem with
/// the full ordered-pair loss sum: `n_k(t) = (t/2)^{k-1} (1 + t/2)^{-k-1}`.
pub fn constant_kernel_closed_form(k: usize, t: f64) -> f64 {
    let h = t / 2.0;
    h.powi(k as i32 - 1) * (1.0 + h).powi(-(k as i32) - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::typespace::{build_constant_model, build_es_model};

    #[test]
    fn zero_kernel_constant() {
        let model = build_constant_model(4, 1.0, 0.0, 1.0, 1);
        let mut n0 = vec![0.0; 8];
        n0[0] = 1.0;
        n0[2] = 0.5;
        let r = homogeneous_ode(&model, &n0, &[0.0, 0.5, 1.0], 1e-2).unwrap();
        for snap in &r.data {
            for (a, b) in snap.iter().zip(&n0) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn closed_form_satisfies_ode() {
        // verify n_k(t) = (t/2)^{k-1}(1+t/2)^{-k-1} by substitution: compare
        // d/dt (finite differences) against the RHS at a few (k, t)
        let model = build_constant_model(8, 1.0, 1.0, 1.0, 1);
        let t = 0.7;
        let h = 1e-5;
        let n_at = |t: f64| -> Vec<f64> {
            (1..=16).map(|k| constant_kernel_closed_form(k, t)).collect()
        };
        let n = n_at(t);
        let rhs = smoluchowski_rhs(&n, &model);
        let nm = n_at(t - h);
        let np = n_at(t + h);
        for k in 0..6 {
            let deriv = (np[k] - nm[k]) / (2.0 * h);
            assert!(
                (deriv - rhs[k]).abs() < 1e-6,
                "class {}: {} vs {}",
                k + 1,
                deriv,
                rhs[k]
            );
        }
    }

    #[test]
    fn constant_kernel_monodisperse_values() {
        let model = build_constant_model(32, 1.0, 1.0, 1.0, 1);
        let mut n0 = vec![0.0; 64];
        n0[0] = 1.0;
        let r = homogeneous_ode(&model, &n0, &[0.0, 2.0], 1e-4).unwrap();
        let end = &r.data[1];
        // n_1(2) = (1 + 1)^{-2} = 0.25; total N(2) = (1 + 1)^{-1} = 0.5
        assert!((end[0] - 0.25).abs() < 1e-8);
        let total: f64 = end.iter().sum();
        assert!((total - 0.5).abs() < 1e-8);
        for (k, &v) in end.iter().enumerate().take(16) {
            let exact = constant_kernel_closed_form(k + 1, 2.0);
            assert!((v - exact).abs() < 1e-8, "class {}", k + 1);
        }
    }

    #[test]
    fn es_kernel_mass_conserved() {
        let model = build_es_model(32, 1.0);
        let mut n0 = vec![0.0; 64];
        n0[0] = 1.0;
        let r = homogeneous_ode(&model, &n0, &[0.0, 0.5], 1e-3).unwrap();
        let mass = |n: &[f64]| -> f64 { n.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).sum() };
        let m0 = mass(&r.data[0]);
        let m1 = mass(&r.data[1]);
        // conservation is structural until mass reaches the 2M edge
        assert!((m1 - m0).abs() < 1e-8, "drift {}", m1 - m0);
    }

    #[test]
    fn diffusion_reference_cases() {
        let grid = SpatialGrid::new(1, 64, 1.0);
        let r0 = diffusion_reference(&grid, 1.0, 0.001, 0.0, 0.5).unwrap();
        let rt = diffusion_reference(&grid, 1.0, 0.001, 0.004, 0.5).unwrap();
        // variance additivity: 0.001 + 0.004 = 0.005; spreads stay well below
        // L/6 so the wrapped tail does not bias the variance
        let var = crate::heatflow::profile_variance_1d(&rt.data[0], &grid, 0.5);
        assert!((var - 0.005).abs() / 0.005 < 1e-3);
        let var0 = crate::heatflow::profile_variance_1d(&r0.data[0], &grid, 0.5);
        assert!((var0 - 0.001).abs() / 0.001 < 1e-3);
        // semigroup: reference at t1+t2 equals reference of the same spread
        let r_ab = diffusion_reference(&grid, 1.0, 0.001 + 0.002, 0.002, 0.5).unwrap();
        let r_sum = diffusion_reference(&grid, 1.0, 0.001, 0.004, 0.5).unwrap();
        for (a, b) in r_ab.data[0].iter().zip(&r_sum.data[0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn diffusion_reference_wrap_guard() {
        let grid = SpatialGrid::new(1, 16, 1.0);
        assert!(diffusion_reference(&grid, 1.0, 0.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn compare_cases() {
        let a = Reference {
            times: vec![0.0, 1.0],
            data: vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            provenance: Provenance::OdeRk4,
        };
        let same = compare(&a, &a).unwrap();
        assert!(same.l1.iter().all(|&x| x == 0.0));

        let mut b = a.clone();
        b.data[1][0] += 1e-3;
        let rep = compare(&a, &b).unwrap();
        assert!((rep.linf[1] - 1e-3).abs() < 1e-15);

        let mut c = a.clone();
        c.times[1] = 2.0;
        assert!(compare(&a, &c).is_err());
    }
}
