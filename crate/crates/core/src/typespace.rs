//! Discrete type space: mass classes, kernel table, diffusivity and weights.
//!
//! Particle types are integer multiples of a mass unit `δm`. Live particles
//! occupy classes `1..=M`, defect particles `1..=2M` (the largest mass a
//! single coagulation of two live particles can produce). All per-class
//! vectors therefore have length `2M` and the kernel table is `2M x 2M`.
//! Internally classes are indexed `0..2M` with class `i` carrying mass
//! `(i+1)·δm`.

use serde::{Deserialize, Serialize};

/// Relative tolerance used by the structural checkers.
pub const CHECK_TOL: f64 = 1e-12;

/// The sublinear weight profile `φ`, available as built-in families.
///
/// `φ` must satisfy `φ(λm) ≤ λ·φ(m)` for all `λ ≥ 1`. Custom table kernels
/// carry no `φ` (the sublinearity check is then vacuous).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phi {
    /// `φ(m) = m^{1/6} + m^{5/6}`, the Einstein–Smoluchowski choice.
    EinsteinSmoluchowski,
    /// `φ(m) = max(floor, m)`, used for constant kernels.
    FlooredLinear { floor: f64 },
}

impl Phi {
    pub fn eval(&self, m: f64) -> f64 {
        match self {
            Phi::EinsteinSmoluchowski => m.powf(1.0 / 6.0) + m.powf(5.0 / 6.0),
            Phi::FlooredLinear { floor } => floor.max(m),
        }
    }
}

/// How the kernel table was generated. Retained for serialization and so the
/// refinement driver can rebuild the model at a different class count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelKind {
    /// `K(y,y') = (y^{-1/3} + y'^{-1/3})(y^{1/3} + y'^{1/3})`
    Es,
    /// `K ≡ rate` with constant diffusivity `a_const`.
    Constant { rate: f64, a_const: f64 },
    /// Explicit dense table, row-major, `2M x 2M`.
    Table { table: Vec<Vec<f64>> },
}

/// All coefficients of the kinetic model: masses, diffusivity `a`, weights
/// `w = a^{d/2}·φ(m)`, optional `v` weights, and the symmetric kernel table.
///
/// Immutable after construction; safe to share read-only among workers.
#[derive(Debug, Clone)]
pub struct Model {
    /// Mass unit `δm`; class `i` (0-based) has mass `(i+1)·δm`.
    pub mass_unit: f64,
    /// Number of live classes `M`.
    pub num_classes: usize,
    /// Dimension `d` entering the weight `w = a^{d/2}·φ(m)`.
    pub dim: u8,
    /// Per-class diffusivity, length `2M`.
    pub diffusivity: Vec<f64>,
    /// Sublinear weight function, when the model was built from a family.
    pub phi: Option<Phi>,
    /// Per-class weights `w_i`, length `2M`.
    pub weights: Vec<f64>,
    /// Optional per-class `v` weights for condition (VW), length `2M`.
    pub v_weights: Option<Vec<f64>>,
    /// Symmetric kernel table, row-major `2M x 2M`.
    pub kernel_table: Vec<f64>,
    /// Provenance of the kernel table.
    pub kernel_kind: KernelKind,
}

impl Model {
    /// Total class count `2M` (live plus defect range).
    pub fn total_classes(&self) -> usize {
        2 * self.num_classes
    }

    /// Mass of 0-based class `i`.
    pub fn mass(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.mass_unit
    }

    /// Kernel entry for 0-based classes `i`, `j`.
    #[inline]
    pub fn kernel(&self, i: usize, j: usize) -> f64 {
        self.kernel_table[i * self.total_classes() + j]
    }
}

/// Outcome of the exhaustive structural checks. Every `false` flag carries at
/// least one witness in `violations`.
#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub symmetric: bool,
    pub kernel_dominated: bool,
    /// Worst ratio `K(i,j) / (w_i·w_j)` observed.
    pub worst_domination_ratio: f64,
    pub diffusivity_k_decreasing: bool,
    pub phi_sublinear_sampled: bool,
    pub vw_bound: bool,
    /// Worst ratio `K(i,j) / (w_i·v_j + v_i·w_j)`, when `v` is present.
    pub worst_vw_ratio: f64,
    pub avw_subadditive: bool,
    /// Witness pairs, 1-based class indices, with the failed check's name.
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub check: String,
    pub i: usize,
    pub j: usize,
}

impl AdmissibilityReport {
    /// The mandatory gate: condition (A). The (VW) checks are informational.
    pub fn mandatory_pass(&self) -> bool {
        self.symmetric
            && self.kernel_dominated
            && self.diffusivity_k_decreasing
            && self.phi_sublinear_sampled
    }
}

/// Builds the Einstein–Smoluchowski model: `d = 3`, `a(y) = y^{-1/3}`,
/// `K(y,y') = (y^{-1/3} + y'^{-1/3})(y^{1/3} + y'^{1/3})`,
/// `φ(m) = m^{1/6} + m^{5/6}` so `w(y) = y^{-1/3} + y^{1/3}`, and
/// `v(y) = 2·y^{-1/3}`.
pub fn build_es_model(num_classes: usize, mass_unit: f64) -> Model {
    assert!(num_classes >= 1, "need at least one mass class");
    assert!(mass_unit > 0.0, "mass unit must be positive");
    let n = 2 * num_classes;
    let masses: Vec<f64> = (0..n).map(|i| (i + 1) as f64 * mass_unit).collect();
    let diffusivity: Vec<f64> = masses.iter().map(|m| m.powf(-1.0 / 3.0)).collect();
    let weights: Vec<f64> = masses
        .iter()
        .map(|m| m.powf(-1.0 / 3.0) + m.powf(1.0 / 3.0))
        .collect();
    let v_weights: Vec<f64> = masses.iter().map(|m| 2.0 * m.powf(-1.0 / 3.0)).collect();
    let mut kernel_table = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (mi, mj) = (masses[i], masses[j]);
            kernel_table[i * n + j] = (mi.powf(-1.0 / 3.0) + mj.powf(-1.0 / 3.0))
                * (mi.powf(1.0 / 3.0) + mj.powf(1.0 / 3.0));
        }
    }
    // Enforce bitwise symmetry: the formula is symmetric but powf rounding
    // need not commute across the two orderings.
    for i in 0..n {
        for j in 0..i {
            let v = kernel_table[j * n + i];
            kernel_table[i * n + j] = v;
        }
    }
    Model {
        mass_unit,
        num_classes,
        dim: 3,
        diffusivity,
        phi: Some(Phi::EinsteinSmoluchowski),
        weights,
        v_weights: Some(v_weights),
        kernel_table,
        kernel_kind: KernelKind::Es,
    }
}

/// Builds a constant-kernel model `K ≡ rate` with constant diffusivity.
///
/// The weight is `w(m) = a^{d/2}·φ(m)` with `φ(m) = max(√rate·a^{-d/2}, m)`,
/// so `w(m) = max(√rate, a^{d/2} m)` dominates the kernel. `v = w/2` is set,
/// which satisfies the v-w domination with ratio 1; note `a^{-d/2}·v·w` grows
/// quadratically above the floor, so its (informational) subadditivity check
/// fails by design.
pub fn build_constant_model(
    num_classes: usize,
    mass_unit: f64,
    rate: f64,
    a_const: f64,
    dim: u8,
) -> Model {
    assert!(num_classes >= 1);
    assert!(mass_unit > 0.0);
    assert!(rate >= 0.0, "kernel rate must be nonnegative");
    assert!(a_const > 0.0, "diffusivity must be positive");
    let n = 2 * num_classes;
    let ad2 = a_const.powf(dim as f64 / 2.0);
    let floor = rate.sqrt() / ad2;
    // Degenerate rate=0 still needs w > 0: keep a strictly positive floor
    // below the smallest mass so φ stays the identity there.
    let floor = if floor > 0.0 { floor } else { mass_unit * 1e-9 };
    let phi = Phi::FlooredLinear { floor };
    let weights: Vec<f64> = (0..n)
        .map(|i| ad2 * phi.eval((i + 1) as f64 * mass_unit))
        .collect();
    let v_weights: Vec<f64> = weights.iter().map(|w| 0.5 * w).collect();
    Model {
        mass_unit,
        num_classes,
        dim,
        diffusivity: vec![a_const; n],
        phi: Some(phi),
        weights,
        v_weights: Some(v_weights),
        kernel_table: vec![rate; n * n],
        kernel_kind: KernelKind::Constant { rate, a_const },
    }
}

/// Exhaustively verifies the structural hypotheses on the model.
///
/// Checks, over 1-based `i, j ≤ M`: kernel domination `K(i,j) ≤ w_i·w_j`,
/// K-decrease of the diffusivity `a_{i+j} ≤ min(a_i, a_j)`, the (VW) bound
/// and subadditivity of `a^{-d/2}·v·w` when `v` is present. Symmetry is
/// checked bitwise over the full `2M` table and `φ`-sublinearity on a
/// logarithmic `λ` sample grid. Failures are reported, never thrown.
pub fn check_admissible(model: &Model) -> AdmissibilityReport {
    let n = model.total_classes();
    let m = model.num_classes;
    let mut violations = Vec::new();

    let mut symmetric = true;
    for i in 0..n {
        for j in 0..i {
            if model.kernel(i, j) != model.kernel(j, i) {
                symmetric = false;
                violations.push(Violation {
                    check: "symmetric".into(),
                    i: i + 1,
                    j: j + 1,
                });
            }
        }
    }

    let mut kernel_dominated = true;
    let mut worst_domination_ratio: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            let bound = model.weights[i] * model.weights[j];
            let ratio = model.kernel(i, j) / bound;
            worst_domination_ratio = worst_domination_ratio.max(ratio);
            if ratio > 1.0 + CHECK_TOL {
                if kernel_dominated {
                    violations.push(Violation {
                        check: "kernel_dominated".into(),
                        i: i + 1,
                        j: j + 1,
                    });
                }
                kernel_dominated = false;
            }
        }
    }

    let mut diffusivity_k_decreasing = true;
    for i in 0..m {
        for j in 0..m {
            let prod = i + j + 1; // 0-based index of class i+j (1-based masses add)
            let lim = model.diffusivity[i].min(model.diffusivity[j]);
            if model.diffusivity[prod] > lim * (1.0 + CHECK_TOL) {
                if diffusivity_k_decreasing {
                    violations.push(Violation {
                        check: "diffusivity_k_decreasing".into(),
                        i: i + 1,
                        j: j + 1,
                    });
                }
                diffusivity_k_decreasing = false;
            }
        }
    }

    // φ(λm) ≤ λφ(m) sampled on a log grid λ ∈ [1, 1e4].
    let mut phi_sublinear_sampled = true;
    if let Some(phi) = &model.phi {
        'outer: for i in 0..n {
            let mass = model.mass(i);
            for k in 0..=40 {
                let lambda = 10f64.powf(k as f64 * 0.1); // 1 .. 1e4
                if phi.eval(lambda * mass) > lambda * phi.eval(mass) * (1.0 + CHECK_TOL) {
                    phi_sublinear_sampled = false;
                    violations.push(Violation {
                        check: "phi_sublinear_sampled".into(),
                        i: i + 1,
                        j: k,
                    });
                    break 'outer;
                }
            }
        }
    }

    let mut vw_bound = true;
    let mut worst_vw_ratio: f64 = 0.0;
    let mut avw_subadditive = true;
    if let Some(v) = &model.v_weights {
        for i in 0..m {
            for j in 0..m {
                let bound = model.weights[i] * v[j] + v[i] * model.weights[j];
                let ratio = model.kernel(i, j) / bound;
                worst_vw_ratio = worst_vw_ratio.max(ratio);
                if ratio > 1.0 + CHECK_TOL {
                    if vw_bound {
                        violations.push(Violation {
                            check: "vw_bound".into(),
                            i: i + 1,
                            j: j + 1,
                        });
                    }
                    vw_bound = false;
                }
            }
        }
        let d2 = model.dim as f64 / 2.0;
        let g: Vec<f64> = (0..n)
            .map(|i| model.diffusivity[i].powf(-d2) * v[i] * model.weights[i])
            .collect();
        let (ok, witness) = check_subadditive(&g, m);
        avw_subadditive = ok;
        if let Some((i, j)) = witness {
            violations.push(Violation {
                check: "avw_subadditive".into(),
                i,
                j,
            });
        }
    }

    AdmissibilityReport {
        symmetric,
        kernel_dominated,
        worst_domination_ratio,
        diffusivity_k_decreasing,
        phi_sublinear_sampled,
        vw_bound,
        worst_vw_ratio,
        avw_subadditive,
        violations,
    }
}

/// K-subadditivity of a per-class vector over `1..=2M`: true iff
/// `f_{i+j} ≤ f_i + f_j + 1e-12` for all 1-based `i, j ≤ M`.
/// Returns the first witness pair (1-based) on failure.
pub fn check_subadditive(f: &[f64], num_classes: usize) -> (bool, Option<(usize, usize)>) {
    assert!(f.len() >= 2 * num_classes, "f must cover classes 1..=2M");
    for i in 0..num_classes {
        for j in 0..num_classes {
            if f[i + j + 1] > f[i] + f[j] + 1e-12 {
                return (false, Some((i + 1, j + 1)));
            }
        }
    }
    (true, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn es_kernel_values() {
        let model = build_es_model(2, 1.0);
        // K(1,1) = (1+1)(1+1) = 4
        assert_eq!(model.kernel(0, 0), 4.0);
        // w_1 = 1 + 1 = 2
        assert_eq!(model.weights[0], 2.0);
    }

    #[test]
    fn es_diagonal_collapses_to_four() {
        let model = build_es_model(8, 1.0);
        for i in 0..16 {
            // (2 m^{-1/3})(2 m^{1/3}) = 4 identically on the diagonal
            assert!((model.kernel(i, i) - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn es_off_diagonal_entry() {
        let model = build_es_model(8, 1.0);
        // K(1,8) = (1 + 8^{-1/3})(1 + 8^{1/3}) = (1 + 0.5)(1 + 2) = 4.5
        assert!((model.kernel(0, 7) - 4.5).abs() < 1e-12);
    }

    #[test]
    fn es_weights_at_least_one() {
        let model = build_es_model(64, 1.0);
        for &w in &model.weights {
            assert!(w >= 1.0);
        }
    }

    #[test]
    fn constant_model_zero_rate_is_pure_diffusion() {
        let model = build_constant_model(4, 1.0, 0.0, 1.0, 1);
        assert!(model.kernel_table.iter().all(|&k| k == 0.0));
    }

    #[test]
    fn constant_model_entries_and_admissibility() {
        let model = build_constant_model(4, 1.0, 1.0, 1.0, 1);
        assert_eq!(model.kernel(1, 2), 1.0);
        assert!(model.weights.iter().all(|&w| w >= 1.0));
        let report = check_admissible(&model);
        assert!(report.mandatory_pass(), "{:?}", report.violations);
        assert!(report.vw_bound);
        // a^{-d/2}vw = max(1, m)²/2 is quadratic above the floor, so the
        // informational subadditivity check fails with witness (1, 1)
        assert!(!report.avw_subadditive);
        assert!(report
            .violations
            .iter()
            .any(|v| v.check == "avw_subadditive" && v.i == 1 && v.j == 1));
        // w ≡ 1 on class 1 with rate 1: equality case
        assert!((report.worst_domination_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn es_admissible_at_64() {
        let report = check_admissible(&build_es_model(64, 1.0));
        assert!(report.mandatory_pass(), "{:?}", report.violations);
        assert!(report.vw_bound, "{:?}", report.violations);
        assert!(report.avw_subadditive, "{:?}", report.violations);
    }

    #[test]
    fn es_admissible_at_512() {
        let report = check_admissible(&build_es_model(512, 1.0));
        assert!(report.mandatory_pass());
        assert!(report.vw_bound && report.avw_subadditive);
    }

    #[test]
    fn increasing_diffusivity_flagged() {
        let mut model = build_constant_model(4, 1.0, 1.0, 1.0, 1);
        let n = model.total_classes();
        model.diffusivity = (0..n).map(|i| (i + 1) as f64).collect();
        let report = check_admissible(&model);
        assert!(!report.diffusivity_k_decreasing);
        let w = report
            .violations
            .iter()
            .find(|v| v.check == "diffusivity_k_decreasing")
            .unwrap();
        assert_eq!((w.i, w.j), (1, 1));
    }

    #[test]
    fn asymmetric_table_flagged_with_witness() {
        let mut model = build_constant_model(2, 1.0, 1.0, 1.0, 1);
        model.kernel_table[1] = 2.0; // K(1,2) != K(2,1)
        let report = check_admissible(&model);
        assert!(!report.symmetric);
        assert!(report.violations.iter().any(|v| v.check == "symmetric"));
    }

    #[test]
    fn subadditivity_of_mass_and_square() {
        let m = 4;
        let masses: Vec<f64> = (1..=2 * m).map(|i| i as f64).collect();
        assert!(check_subadditive(&masses, m).0);
        let squares: Vec<f64> = masses.iter().map(|x| x * x).collect();
        let (ok, witness) = check_subadditive(&squares, m);
        assert!(!ok);
        assert_eq!(witness, Some((1, 1)));
    }

    #[test]
    fn es_weights_subadditive() {
        let model = build_es_model(32, 1.0);
        assert!(check_subadditive(&model.weights, 32).0);
    }

    #[test]
    fn kernel_table_bitwise_symmetric() {
        let model = build_es_model(17, 0.5);
        let n = model.total_classes();
        for i in 0..n {
            for j in 0..n {
                assert!(model.kernel(i, j).to_bits() == model.kernel(j, i).to_bits());
            }
        }
    }
}
