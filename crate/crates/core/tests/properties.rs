//! Cross-module invariants, exercised on randomized states.

use proptest::prelude::*;

use coagdiff::coagulation::{gain, truncated_flux};
use coagdiff::heatflow::{build_propagator, diffuse};
use coagdiff::solver::{run, Integrator, Scenario};
use coagdiff::state::{
    alpha_and_horizon, bracket, DefectState, DominatingMeasure, SpatialGrid, StateMeasure,
};
use coagdiff::typespace::{build_es_model, check_subadditive};

fn small_density() -> impl Strategy<Value = f64> {
    (0.0..2.0f64).prop_map(|x| (x * 1000.0).round() / 1000.0)
}

/// Unordered-pair enumeration of the gain, independent of the production
/// code's loop order.
fn gain_oracle(kappa_cell: &[f64], model: &coagdiff::typespace::Model) -> Vec<f64> {
    let n = model.total_classes();
    let m = model.num_classes;
    let mut g = vec![0.0; n];
    for i in 0..m {
        for j in i..m {
            let k = i + j + 1;
            let sym = if i == j { 0.5 } else { 1.0 };
            g[k] += sym * model.kernel(i, j) * kappa_cell[i] * kappa_cell[j];
        }
    }
    g
}

proptest! {
    #[test]
    fn gain_matches_pair_enumeration(cells in prop::collection::vec(small_density(), 6)) {
        let model = build_es_model(6, 1.0);
        let g = gain(&cells, &model);
        let oracle = gain_oracle(&cells, &model);
        for (a, b) in g.iter().zip(oracle.iter()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn flux_conserves_mass_pointwise(
        kappa_cells in prop::collection::vec(small_density(), 4),
        lambda_cells in prop::collection::vec(small_density(), 8),
    ) {
        let model = build_es_model(4, 1.0);
        let grid = SpatialGrid::new(1, 1, 1.0);
        let mut kappa = StateMeasure::zeros(grid.clone(), 4);
        kappa.density.copy_from_slice(&kappa_cells);
        let mut lambda = DefectState::zeros(grid, 8);
        lambda.density.copy_from_slice(&lambda_cells);
        lambda.refresh_eta(&model.weights);
        let flux = truncated_flux(&kappa, &lambda, &model);
        let mut mass = 0.0;
        let mut gross = 0.0;
        for (i, &d) in flux.dkappa.iter().enumerate() {
            mass += (i + 1) as f64 * d;
            gross += (i + 1) as f64 * d.abs();
        }
        for (i, &d) in flux.dlambda.iter().enumerate() {
            mass += (i + 1) as f64 * d;
            gross += (i + 1) as f64 * d.abs();
        }
        prop_assert!(mass.abs() <= 1e-12 * gross.max(1.0));
    }

    #[test]
    fn bracket_is_linear(
        cells in prop::collection::vec(small_density(), 8),
        scale in 0.1..5.0f64,
    ) {
        let grid = SpatialGrid::new(1, 4, 1.0);
        let mut kappa = StateMeasure::zeros(grid, 2);
        kappa.density.copy_from_slice(&cells);
        let f = vec![1.0, 3.0];
        let g = vec![2.0, 0.5];
        let fg: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
        let sf: Vec<f64> = f.iter().map(|a| a * scale).collect();
        let bf = bracket(&f, &kappa).unwrap();
        let bg = bracket(&g, &kappa).unwrap();
        let bfg = bracket(&fg, &kappa).unwrap();
        let bsf = bracket(&sf, &kappa).unwrap();
        for c in 0..4 {
            prop_assert!((bfg[c] - (bf[c] + bg[c])).abs() <= 1e-12);
            prop_assert!((bsf[c] - scale * bf[c]).abs() <= 1e-12 * bf[c].abs().max(1.0));
        }
    }

    #[test]
    fn power_weights_below_one_are_subadditive(p in 0.0..1.0f64) {
        let m = 16usize;
        let f: Vec<f64> = (0..2 * m).map(|i| ((i + 1) as f64).powf(p)).collect();
        let (ok, witness) = check_subadditive(&f, m);
        prop_assert!(ok, "witness {witness:?} for p = {p}");
    }

    #[test]
    fn diffusion_monotone_and_conservative(
        cells in prop::collection::vec(small_density(), 16),
        bump in prop::collection::vec(0.0..0.5f64, 16),
    ) {
        let grid = SpatialGrid::new(1, 16, 1.0);
        let table = build_propagator(&grid, &[0.8], 2e-3).unwrap();
        let mut lo = StateMeasure::zeros(grid.clone(), 1);
        lo.density.copy_from_slice(&cells);
        let mut hi = lo.clone();
        for (h, b) in hi.density.iter_mut().zip(bump.iter()) {
            *h += b;
        }
        let lo2 = diffuse(&lo, &table).unwrap();
        let hi2 = diffuse(&hi, &table).unwrap();
        for (a, b) in lo2.density.iter().zip(hi2.density.iter()) {
            prop_assert!(*a <= *b + 1e-13);
        }
        let sum_before: f64 = lo.density.iter().sum();
        let sum_after: f64 = lo2.density.iter().sum();
        prop_assert!((sum_before - sum_after).abs() <= 1e-12 * sum_before.max(1.0));
    }

    #[test]
    fn alpha_is_linear_in_the_dominating_measure(
        dom in prop::collection::vec(small_density(), 8),
        scale in 0.1..4.0f64,
    ) {
        let model = build_es_model(4, 1.0);
        let scaled: Vec<f64> = dom.iter().map(|x| x * scale).collect();
        let (a1, _) = alpha_and_horizon(&model, &DominatingMeasure(dom));
        let (a2, _) = alpha_and_horizon(&model, &DominatingMeasure(scaled));
        prop_assert!((a2 - scale * a1).abs() <= 1e-12 * a2.abs().max(1.0));
    }
}

fn tiny_scenario(integrator: Integrator, density: f64) -> Scenario {
    let model = build_es_model(4, 1.0);
    let grid = SpatialGrid::new(1, 8, 1.0);
    let mut kappa0 = StateMeasure::zeros(grid.clone(), 4);
    for c in 0..8 {
        kappa0.density[c] = density;
    }
    let lambda0 = DefectState::zeros(grid.clone(), 8);
    Scenario {
        model,
        grid,
        kappa0,
        lambda0,
        dt: 1e-3,
        t_end: 0.05,
        integrator,
        picard_tol: 1e-13,
        picard_kmax: 100,
        cadence: 10,
        force: false,
        store_history: false,
    }
}

#[test]
fn runs_are_bitwise_reproducible() {
    for integrator in [Integrator::Strang, Integrator::Duhamel] {
        let a = run(&tiny_scenario(integrator, 1.0)).unwrap();
        let b = run(&tiny_scenario(integrator, 1.0)).unwrap();
        for (sa, sb) in a.snapshots.iter().zip(b.snapshots.iter()) {
            assert_eq!(sa.0.density, sb.0.density);
            assert_eq!(sa.1.density, sb.1.density);
        }
    }
}

#[test]
fn integrators_agree_on_short_runs() {
    let a = run(&tiny_scenario(Integrator::Strang, 1.0)).unwrap();
    let b = run(&tiny_scenario(Integrator::Duhamel, 1.0)).unwrap();
    let (ka, _) = a.snapshots.last().unwrap();
    let (kb, _) = b.snapshots.last().unwrap();
    let dist: f64 = ka
        .density
        .iter()
        .zip(kb.density.iter())
        .map(|(x, y)| (x - y).abs())
        .sum();
    // both schemes are second order; they differ by a splitting-vs-quadrature
    // term of size O(dt^2) accumulated over the run
    assert!(dist < 1e-4, "integrator distance {dist}");
}
