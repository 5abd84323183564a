//! Measure states on the spatial-grid x mass-class product space.
//!
//! A `StateMeasure` stores the density kernel `κ[class][cell]` of the measure
//! with respect to Lebesgue measure: number per unit volume, per class.
//! Integrals over space therefore always carry a factor `Δx^d`, which keeps
//! L¹ quantities grid-independent under refinement.

use crate::error::CoagError;
use crate::typespace::Model;

/// Periodic spatial grid: `N` cells per axis on a torus of side `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    /// Spatial dimension of the grid (1, 2 or 3).
    pub dim: u8,
    /// Cells per axis.
    pub cells_per_axis: usize,
    /// Axis length.
    pub length: f64,
}

impl SpatialGrid {
    pub fn new(dim: u8, cells_per_axis: usize, length: f64) -> Self {
        assert!((1..=3).contains(&dim));
        assert!(cells_per_axis >= 1);
        assert!(length > 0.0);
        SpatialGrid {
            dim,
            cells_per_axis,
            length,
        }
    }

    pub fn dx(&self) -> f64 {
        self.length / self.cells_per_axis as f64
    }

    /// Cell volume `Δx^d`.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_axis.pow(self.dim as u32)
    }

    /// Midpoint coordinate of 1D index `i` along one axis.
    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    /// Minimal-image (wrapped) distance between two coordinates on the torus.
    pub fn wrapped_dist(&self, x: f64, y: f64) -> f64 {
        let mut d = (x - y).rem_euclid(self.length);
        if d > 0.5 * self.length {
            d = self.length - d;
        }
        d
    }

    /// Decomposes a flat cell index into per-axis indices (x fastest).
    pub fn decompose(&self, mut cell: usize) -> [usize; 3] {
        let n = self.cells_per_axis;
        let mut out = [0usize; 3];
        for axis in 0..self.dim as usize {
            out[axis] = cell % n;
            cell /= n;
        }
        out
    }
}

/// Nonnegative density `κ[class][cell]`, class-major, classes `1..=M`.
#[derive(Debug, Clone)]
pub struct StateMeasure {
    pub grid: SpatialGrid,
    pub classes: usize,
    pub density: Vec<f64>,
}

impl StateMeasure {
    pub fn zeros(grid: SpatialGrid, classes: usize) -> Self {
        let n = classes * grid.cell_count();
        StateMeasure {
            grid,
            classes,
            density: vec![0.0; n],
        }
    }

    #[inline]
    pub fn at(&self, class: usize, cell: usize) -> f64 {
        self.density[class * self.grid.cell_count() + cell]
    }

    #[inline]
    pub fn at_mut(&mut self, class: usize, cell: usize) -> &mut f64 {
        let idx = class * self.grid.cell_count() + cell;
        &mut self.density[idx]
    }

    /// Contiguous per-class slice.
    pub fn class_slice(&self, class: usize) -> &[f64] {
        let nc = self.grid.cell_count();
        &self.density[class * nc..(class + 1) * nc]
    }
}

/// Defect (λ-particle) population over classes `1..=2M`, with the cached
/// weight field `η(x) = Σ_i w_i λ_i(x)`.
#[derive(Debug, Clone)]
pub struct DefectState {
    pub grid: SpatialGrid,
    pub classes: usize,
    pub density: Vec<f64>,
    /// Cached `⟨w, λ⟩` per cell; refresh after every mutation of `density`.
    pub eta: Vec<f64>,
}

impl DefectState {
    pub fn zeros(grid: SpatialGrid, classes: usize) -> Self {
        let nc = grid.cell_count();
        DefectState {
            grid,
            classes,
            density: vec![0.0; classes * nc],
            eta: vec![0.0; nc],
        }
    }

    /// Recomputes `η = ⟨w, λ⟩` from the density.
    pub fn refresh_eta(&mut self, weights: &[f64]) {
        let nc = self.grid.cell_count();
        for c in 0..nc {
            let mut s = 0.0;
            for i in 0..self.classes {
                s += weights[i] * self.density[i * nc + c];
            }
            self.eta[c] = s;
        }
    }

    pub fn class_slice(&self, class: usize) -> &[f64] {
        let nc = self.grid.cell_count();
        &self.density[class * nc..(class + 1) * nc]
    }
}

/// Spatially constant per-class dominating profile `μ*` with
/// `κ0[i][cell] ≤ μ*_i` everywhere.
#[derive(Debug, Clone)]
pub struct DominatingMeasure(pub Vec<f64>);

/// Integrates a per-class vector against the measure:
/// `field(cell) = Σ_i f_i · κ[i][cell]`.
pub fn bracket(f: &[f64], kappa: &StateMeasure) -> Result<Vec<f64>, CoagError> {
    if f.len() < kappa.classes {
        return Err(CoagError::ShapeMismatch {
            what: format!(
                "bracket: vector covers {} classes, state has {}",
                f.len(),
                kappa.classes
            ),
        });
    }
    let nc = kappa.grid.cell_count();
    let mut field = vec![0.0; nc];
    for i in 0..kappa.classes {
        let slice = kappa.class_slice(i);
        for c in 0..nc {
            field[c] += f[i] * slice[c];
        }
    }
    Ok(field)
}

/// L¹ norm of a per-cell field: `Σ |field| · Δx^d`.
pub fn norm_l1(field: &[f64], grid: &SpatialGrid) -> f64 {
    field.iter().map(|x| x.abs()).sum::<f64>() * grid.cell_volume()
}

/// L∞ norm of a per-cell field.
pub fn norm_inf(field: &[f64]) -> f64 {
    field.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Total mass `Σ_i m_i Σ_cells κ[i][cell] · Δx^d` of a live state.
pub fn total_mass(kappa: &StateMeasure, mass_unit: f64) -> f64 {
    let vol = kappa.grid.cell_volume();
    let mut s = 0.0;
    for i in 0..kappa.classes {
        let m = (i + 1) as f64 * mass_unit;
        s += m * kappa.class_slice(i).iter().sum::<f64>();
    }
    s * vol
}

/// Total mass of the defect population.
pub fn total_defect_mass(lambda: &DefectState, mass_unit: f64) -> f64 {
    let vol = lambda.grid.cell_volume();
    let mut s = 0.0;
    for i in 0..lambda.classes {
        let m = (i + 1) as f64 * mass_unit;
        s += m * lambda.class_slice(i).iter().sum::<f64>();
    }
    s * vol
}

/// Tightest constant-in-x dominating measure on the grid: the per-class
/// spatial maximum of the initial density.
pub fn dominating_measure(kappa0: &StateMeasure) -> DominatingMeasure {
    DominatingMeasure(
        (0..kappa0.classes)
            .map(|i| kappa0.class_slice(i).iter().fold(0.0_f64, |m, &x| m.max(x)))
            .collect(),
    )
}

/// `α = ⟨w², μ*⟩ = Σ_i w_i² μ*_i` and the guaranteed horizon `ζ_lower = 1/α`
/// (infinite when `α = 0`).
pub fn alpha_and_horizon(model: &Model, dom: &DominatingMeasure) -> (f64, f64) {
    let alpha: f64 = dom
        .0
        .iter()
        .enumerate()
        .map(|(i, &mu)| model.weights[i] * model.weights[i] * mu)
        .sum();
    let zeta = if alpha > 0.0 { 1.0 / alpha } else { f64::INFINITY };
    (alpha, zeta)
}
