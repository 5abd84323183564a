//! Time integration of the truncated coagulation-diffusion system, with two
//! interchangeable integrators, monotone refinement in the live range `M`,
//! the minimal-solution iteration, and diagnostics with moment-bound
//! monitors.
//!
//! The Strang mode is half-diffusion / explicit coagulation (sub-cycled under
//! the stability precheck `c_max·Δt ≤ 0.5`) / half-diffusion. The Duhamel
//! mode iterates the one-step mild map with trapezoidal quadrature at the
//! step endpoints; it mirrors the fixed-point construction that defines the
//! truncated system, while the splitting mode serves as an independent
//! consistency oracle.

use crate::coagulation::{c_field, gain, loss, truncated_flux, CoagFlux};
use crate::error::CoagError;
use crate::heatflow::{build_propagator, diffuse_raw, PropagatorTable};
use crate::state::{
    alpha_and_horizon, bracket, dominating_measure, norm_inf, norm_l1, total_defect_mass,
    total_mass, DefectState, SpatialGrid, StateMeasure,
};
use crate::typespace::{check_admissible, Model};

/// Slack on the continuum moment bounds: discretization error may transiently
/// violate them near the horizon, so they are monitored, not asserted.
pub const BOUND_SLACK: f64 = 1.05;

/// Fraction of the guaranteed horizon over which the `(ζ − t)⁻¹` monitor is
/// evaluated.
pub const HORIZON_MONITOR_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Strang,
    Duhamel,
}

/// A fully resolved run description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: Model,
    pub grid: SpatialGrid,
    pub kappa0: StateMeasure,
    pub lambda0: DefectState,
    pub dt: f64,
    pub t_end: f64,
    pub integrator: Integrator,
    pub picard_tol: f64,
    pub picard_kmax: usize,
    /// Steps between diagnostic rows / snapshots.
    pub cadence: usize,
    /// Skip the admissibility gate.
    pub force: bool,
    /// Keep the per-step state and c-field history (needed by the minimal
    /// iteration and the weak-residual driver).
    pub store_history: bool,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), CoagError> {
        if !(self.dt > 0.0) {
            return Err(CoagError::Scenario("dt must be positive".into()));
        }
        if self.t_end < 0.0 {
            return Err(CoagError::Scenario("t_end must be nonnegative".into()));
        }
        if self.kappa0.density.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(CoagError::Scenario("initial state must be nonnegative and finite".into()));
        }
        if self.cadence == 0 {
            return Err(CoagError::Scenario("cadence must be at least 1".into()));
        }
        let steps = self.t_end / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(CoagError::Scenario("t_end must be a multiple of dt".into()));
        }
        Ok(())
    }

    pub fn num_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// One diagnostics row, emitted on cadence.
#[derive(Debug, Clone)]
pub struct DiagRow {
    pub t: f64,
    pub mass_mu: f64,
    pub mass_lambda: f64,
    pub eta_l1: f64,
    pub wmom_l1: f64,
    pub wmom_inf: f64,
    /// `sup_x ⟨w², μ_t⟩`, the h-monitor of the moment bounds.
    pub w2_sup: f64,
    pub bound_horizon_ok: bool,
    pub bound_global_ok: bool,
    /// Cumulative mass added by clipping negative undershoots.
    pub clip_mass: f64,
}

/// Per-step state and c-field history of a run.
#[derive(Debug, Clone)]
pub struct History {
    pub times: Vec<f64>,
    pub kappas: Vec<StateMeasure>,
    pub lambdas: Vec<DefectState>,
    /// `c_i(x)` per step time, class-major over the live classes.
    pub c_fields: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub alpha: f64,
    pub zeta_lower: f64,
    pub diagnostics: Vec<DiagRow>,
    pub snapshot_times: Vec<f64>,
    pub snapshots: Vec<(StateMeasure, DefectState)>,
    pub history: Option<History>,
    pub clip_total: f64,
    /// Whether `t_end` exceeds the guaranteed horizon `ζ_lower`.
    pub beyond_horizon: bool,
}

/// Propagator tables shared by the step functions: half-step tables for the
/// Strang halves, full-step tables for the mild map. Both cover all `2M`
/// classes, so the live state uses the first `M` stencils. The full table is
/// the exact square of the half table, so both integrators see the same
/// discrete diffusion semigroup.
#[derive(Debug)]
pub struct Tables {
    pub half: PropagatorTable,
    pub full: PropagatorTable,
}

impl Tables {
    pub fn build(grid: &SpatialGrid, model: &Model, dt: f64) -> Result<Self, CoagError> {
        let half = build_propagator(grid, &model.diffusivity, dt / 2.0)?;
        let full = half.squared();
        Ok(Tables { half, full })
    }
}

fn max_c(c: &[f64]) -> f64 {
    c.iter().fold(0.0_f64, |m, &x| m.max(x))
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += a * xi;
    }
}

/// Strang step: half diffusion, explicit coagulation sub-cycled under the
/// `c_max·Δt ≤ 0.5` precheck, half diffusion.
///
/// The coagulation sub-step is a two-stage explicit trapezoid (Heun) rather
/// than a plain Euler update: the reaction flow must be resolved to second
/// order or the splitting as a whole drops to first order. A sub-step whose
/// corrector undershoots zero is retried at half length, so positivity is
/// preserved without clipping and mass balance stays exact.
pub fn step_strang(
    kappa: &mut StateMeasure,
    lambda: &mut DefectState,
    model: &Model,
    tables: &Tables,
    dt: f64,
) -> Result<(), CoagError> {
    diffuse_raw(&mut kappa.density, kappa.classes, &kappa.grid, &tables.half)?;
    diffuse_raw(&mut lambda.density, lambda.classes, &lambda.grid, &tables.half)?;
    lambda.refresh_eta(&model.weights);

    let mut remaining = dt;
    let mut guard = 0;
    while remaining > 0.0 {
        let c = c_field(kappa, lambda, model);
        let cmax = max_c(&c);
        let mut dt_sub = if cmax * remaining <= 0.5 {
            remaining
        } else {
            0.5 / cmax
        };
        if !dt_sub.is_finite() || dt_sub <= 0.0 {
            return Err(CoagError::Stability {
                c_max: cmax,
                product: cmax * dt,
                dt_suggest: 0.5 / cmax,
            });
        }
        let flux = truncated_flux(kappa, lambda, model);
        loop {
            let mut pred_k = kappa.clone();
            let mut pred_l = lambda.clone();
            axpy(&mut pred_k.density, dt_sub, &flux.dkappa);
            axpy(&mut pred_l.density, dt_sub, &flux.dlambda);
            pred_l.refresh_eta(&model.weights);
            let flux2 = truncated_flux(&pred_k, &pred_l, model);
            let mut next_k = kappa.clone();
            let mut next_l = lambda.clone();
            axpy(&mut next_k.density, dt_sub / 2.0, &flux.dkappa);
            axpy(&mut next_k.density, dt_sub / 2.0, &flux2.dkappa);
            axpy(&mut next_l.density, dt_sub / 2.0, &flux.dlambda);
            axpy(&mut next_l.density, dt_sub / 2.0, &flux2.dlambda);
            let ok = next_k.density.iter().all(|&x| x >= 0.0)
                && next_l.density.iter().all(|&x| x >= 0.0);
            if ok {
                *kappa = next_k;
                *lambda = next_l;
                lambda.refresh_eta(&model.weights);
                remaining -= dt_sub;
                break;
            }
            dt_sub /= 2.0;
            guard += 1;
            if guard > 100_000 || dt_sub < dt * 1e-12 {
                return Err(CoagError::Stability {
                    c_max: cmax,
                    product: cmax * dt,
                    dt_suggest: dt_sub,
                });
            }
        }
        guard += 1;
        if guard > 100_000 {
            return Err(CoagError::Stability {
                c_max: cmax,
                product: cmax * dt,
                dt_suggest: 0.5 / cmax,
            });
        }
    }

    diffuse_raw(&mut kappa.density, kappa.classes, &kappa.grid, &tables.half)?;
    diffuse_raw(&mut lambda.density, lambda.classes, &lambda.grid, &tables.half)?;
    lambda.refresh_eta(&model.weights);
    Ok(())
}

/// Duhamel–Picard step: fixed-point iteration on the one-step mild map with
/// trapezoidal quadrature at the step endpoints. Negative undershoots are
/// clipped to zero with the clipped mass returned for the diagnostics.
pub fn step_duhamel(
    kappa: &mut StateMeasure,
    lambda: &mut DefectState,
    model: &Model,
    tables: &Tables,
    dt: f64,
    tol: f64,
    kmax: usize,
) -> Result<f64, CoagError> {
    let c0 = c_field(kappa, lambda, model);
    let cmax = max_c(&c0);
    if cmax * dt > 0.5 {
        return Err(CoagError::Stability {
            c_max: cmax,
            product: cmax * dt,
            dt_suggest: 0.5 / cmax,
        });
    }

    let mut p_kappa = kappa.clone();
    diffuse_raw(&mut p_kappa.density, p_kappa.classes, &p_kappa.grid, &tables.full)?;
    let mut p_lambda = lambda.clone();
    diffuse_raw(&mut p_lambda.density, p_lambda.classes, &p_lambda.grid, &tables.full)?;

    let flux0 = truncated_flux(kappa, lambda, model);
    let mut pf_kappa = flux0.dkappa.clone();
    diffuse_raw(&mut pf_kappa, kappa.classes, &kappa.grid, &tables.full)?;
    let mut pf_lambda = flux0.dlambda.clone();
    diffuse_raw(&mut pf_lambda, lambda.classes, &lambda.grid, &tables.full)?;

    let mut cur_k = p_kappa.clone();
    let mut cur_l = p_lambda.clone();
    cur_l.refresh_eta(&model.weights);
    let mut converged = false;
    let mut last_change = f64::INFINITY;
    for _ in 0..kmax {
        let flux: CoagFlux = truncated_flux(&cur_k, &cur_l, model);
        let mut new_k = p_kappa.clone();
        axpy(&mut new_k.density, dt / 2.0, &pf_kappa);
        axpy(&mut new_k.density, dt / 2.0, &flux.dkappa);
        let mut new_l = p_lambda.clone();
        axpy(&mut new_l.density, dt / 2.0, &pf_lambda);
        axpy(&mut new_l.density, dt / 2.0, &flux.dlambda);

        let mut change = 0.0_f64;
        for (a, b) in new_k.density.iter().zip(cur_k.density.iter()) {
            change = change.max((a - b).abs());
        }
        for (a, b) in new_l.density.iter().zip(cur_l.density.iter()) {
            change = change.max((a - b).abs());
        }
        cur_k = new_k;
        cur_l = new_l;
        cur_l.refresh_eta(&model.weights);
        last_change = change;
        if change < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(CoagError::NonConvergence {
            kmax,
            last_change,
            tol,
        });
    }

    let vol = kappa.grid.cell_volume();
    let nc = kappa.grid.cell_count();
    let mut clip = 0.0;
    for i in 0..cur_k.classes {
        let m = model.mass(i);
        for c in 0..nc {
            let x = &mut cur_k.density[i * nc + c];
            if *x < 0.0 {
                clip += m * (-*x) * vol;
                *x = 0.0;
            }
        }
    }
    for i in 0..cur_l.classes {
        let m = model.mass(i);
        for c in 0..nc {
            let x = &mut cur_l.density[i * nc + c];
            if *x < 0.0 {
                clip += m * (-*x) * vol;
                *x = 0.0;
            }
        }
    }
    cur_l.refresh_eta(&model.weights);
    *kappa = cur_k;
    *lambda = cur_l;
    Ok(clip)
}

fn diag_row(
    t: f64,
    kappa: &StateMeasure,
    lambda: &DefectState,
    model: &Model,
    alpha: f64,
    zeta_lower: f64,
    clip_total: f64,
) -> DiagRow {
    let wmom = bracket(&model.weights, kappa).expect("weight vector covers live classes");
    let w2: Vec<f64> = model.weights.iter().map(|w| w * w).collect();
    let w2_field = bracket(&w2, kappa).expect("weight vector covers live classes");
    let w2_sup = norm_inf(&w2_field);

    let bound_horizon_ok = if zeta_lower.is_finite() && t <= HORIZON_MONITOR_FRACTION * zeta_lower {
        w2_sup <= BOUND_SLACK / (zeta_lower - t)
    } else {
        true
    };
    let bound_global_ok = match &model.v_weights {
        Some(v) => {
            let c: f64 = v
                .iter()
                .zip(&model.weights)
                .fold(0.0_f64, |m, (vi, wi)| m.max(vi / wi));
            w2_sup <= BOUND_SLACK * alpha * (2.0 * c * alpha * t).exp()
        }
        None => true,
    };

    DiagRow {
        t,
        mass_mu: total_mass(kappa, model.mass_unit),
        mass_lambda: total_defect_mass(lambda, model.mass_unit),
        eta_l1: norm_l1(&lambda.eta, &lambda.grid),
        wmom_l1: norm_l1(&wmom, &kappa.grid),
        wmom_inf: norm_inf(&wmom),
        w2_sup,
        bound_horizon_ok,
        bound_global_ok,
        clip_mass: clip_total,
    }
}

/// Runs a scenario to `t_end`, emitting diagnostics on cadence and checking
/// the moment-bound monitors along the way.
pub fn run(scenario: &Scenario) -> Result<RunResult, CoagError> {
    scenario.validate()?;
    if !scenario.force {
        let report = check_admissible(&scenario.model);
        if !report.mandatory_pass() {
            let failed: Vec<&str> = [
                (!report.symmetric, "symmetry"),
                (!report.kernel_dominated, "kernel domination"),
                (!report.diffusivity_k_decreasing, "K-decreasing diffusivity"),
                (!report.phi_sublinear_sampled, "phi sublinearity"),
            ]
            .iter()
            .filter(|(bad, _)| *bad)
            .map(|(_, name)| *name)
            .collect();
            return Err(CoagError::Inadmissible {
                summary: failed.join(", "),
            });
        }
    }

    let model = &scenario.model;
    let dom = dominating_measure(&scenario.kappa0);
    let (alpha, zeta_lower) = alpha_and_horizon(model, &dom);
    let tables = Tables::build(&scenario.grid, model, scenario.dt)?;

    let mut kappa = scenario.kappa0.clone();
    let mut lambda = scenario.lambda0.clone();
    lambda.refresh_eta(&model.weights);

    let nsteps = scenario.num_steps();
    let mut clip_total = 0.0;
    let mut diagnostics = Vec::new();
    let mut snapshot_times = Vec::new();
    let mut snapshots = Vec::new();
    let mut history = scenario.store_history.then(|| History {
        times: Vec::with_capacity(nsteps + 1),
        kappas: Vec::with_capacity(nsteps + 1),
        lambdas: Vec::with_capacity(nsteps + 1),
        c_fields: Vec::with_capacity(nsteps + 1),
    });

    let record = |step: usize,
                      kappa: &StateMeasure,
                      lambda: &DefectState,
                      clip_total: f64,
                      diagnostics: &mut Vec<DiagRow>,
                      snapshot_times: &mut Vec<f64>,
                      snapshots: &mut Vec<(StateMeasure, DefectState)>| {
        let t = step as f64 * scenario.dt;
        if step.is_multiple_of(scenario.cadence) || step == nsteps {
            diagnostics.push(diag_row(t, kappa, lambda, model, alpha, zeta_lower, clip_total));
            snapshot_times.push(t);
            snapshots.push((kappa.clone(), lambda.clone()));
        }
    };

    record(0, &kappa, &lambda, clip_total, &mut diagnostics, &mut snapshot_times, &mut snapshots);
    if let Some(h) = history.as_mut() {
        h.times.push(0.0);
        h.kappas.push(kappa.clone());
        h.lambdas.push(lambda.clone());
        h.c_fields.push(c_field(&kappa, &lambda, model));
    }

    for step in 1..=nsteps {
        match scenario.integrator {
            Integrator::Strang => {
                step_strang(&mut kappa, &mut lambda, model, &tables, scenario.dt)?;
            }
            Integrator::Duhamel => {
                clip_total += step_duhamel(
                    &mut kappa,
                    &mut lambda,
                    model,
                    &tables,
                    scenario.dt,
                    scenario.picard_tol,
                    scenario.picard_kmax,
                )?;
            }
        }
        record(step, &kappa, &lambda, clip_total, &mut diagnostics, &mut snapshot_times, &mut snapshots);
        if let Some(h) = history.as_mut() {
            h.times.push(step as f64 * scenario.dt);
            h.kappas.push(kappa.clone());
            h.lambdas.push(lambda.clone());
            h.c_fields.push(c_field(&kappa, &lambda, model));
        }
    }

    Ok(RunResult {
        alpha,
        zeta_lower,
        diagnostics,
        snapshot_times,
        snapshots,
        history,
        clip_total,
        beyond_horizon: scenario.t_end > zeta_lower,
    })
}

/// Result of the monotone refinement in the live range `M`.
#[derive(Debug, Clone)]
pub struct RefineReport {
    pub m_levels: Vec<usize>,
    /// Worst positive violation of `κ^M ≤ κ^{M'}` per consecutive pair.
    pub kappa_violations: Vec<f64>,
    /// Worst positive violation of `⟨w,μ^M⟩+η^M ≥ ⟨w,μ^{M'}⟩+η^{M'}`.
    pub wmom_violations: Vec<f64>,
    /// η L¹ time series per level.
    pub eta_l1: Vec<Vec<f64>>,
    pub eps_used: f64,
    pub clean: bool,
}

/// Runs the same scenario at each `M` in ascending `m_levels` (matched `Δt`
/// and cadence) and checks the two monotonicity inequalities at every
/// matched output time, within `ε = 1e-8·scale`.
pub fn refine_in_m<F>(build: F, m_levels: &[usize]) -> Result<RefineReport, CoagError>
where
    F: Fn(usize) -> Result<Scenario, CoagError>,
{
    if m_levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CoagError::Scenario("M levels must be strictly ascending".into()));
    }
    let mut results = Vec::new();
    let mut scenarios = Vec::new();
    for &m in m_levels {
        let sc = build(m)?;
        results.push(run(&sc)?);
        scenarios.push(sc);
    }
    let mut scale = 0.0_f64;
    for r in &results {
        for (k, _) in &r.snapshots {
            scale = scale.max(norm_inf(&k.density));
        }
    }
    let eps = 1e-8 * scale.max(1.0);

    let mut kappa_violations = Vec::new();
    let mut wmom_violations = Vec::new();
    for pair in 0..results.len().saturating_sub(1) {
        let (lo, hi) = (&results[pair], &results[pair + 1]);
        if lo.snapshot_times.len() != hi.snapshot_times.len() {
            return Err(CoagError::GridMismatch {
                what: "refinement levels have different output cadences".into(),
            });
        }
        let m_lo = m_levels[pair];
        let w_lo = &scenarios[pair].model.weights;
        let w_hi = &scenarios[pair + 1].model.weights;
        let nc = scenarios[pair].grid.cell_count();
        let mut worst_kappa = 0.0_f64;
        let mut worst_wmom = 0.0_f64;
        for (snap_lo, snap_hi) in lo.snapshots.iter().zip(hi.snapshots.iter()) {
            for i in 0..m_lo {
                for c in 0..nc {
                    let diff = snap_lo.0.at(i, c) - snap_hi.0.at(i, c);
                    worst_kappa = worst_kappa.max(diff);
                }
            }
            let wm_lo = bracket(w_lo, &snap_lo.0)?;
            let wm_hi = bracket(w_hi, &snap_hi.0)?;
            for c in 0..nc {
                let lo_val = wm_lo[c] + snap_lo.1.eta[c];
                let hi_val = wm_hi[c] + snap_hi.1.eta[c];
                worst_wmom = worst_wmom.max(hi_val - lo_val);
            }
        }
        kappa_violations.push(worst_kappa);
        wmom_violations.push(worst_wmom);
    }

    let eta_l1 = results
        .iter()
        .map(|r| {
            r.snapshots
                .iter()
                .map(|(_, l)| norm_l1(&l.eta, &l.grid))
                .collect()
        })
        .collect();

    let clean = kappa_violations.iter().all(|&v| v <= eps)
        && wmom_violations.iter().all(|&v| v <= eps);
    Ok(RefineReport {
        m_levels: m_levels.to_vec(),
        kappa_violations,
        wmom_violations,
        eta_l1,
        eps_used: eps,
        clean,
    })
}

/// Result of the minimal-solution iteration.
#[derive(Debug, Clone)]
pub struct MinimalReport {
    /// Sup-over-times L¹ gap `‖ν^k − μ‖₁` per iterate.
    pub gaps: Vec<f64>,
    /// `ν^k ≤ μ` entrywise for all k (up to fp slack).
    pub below: bool,
    /// Gaps shrink monotonically.
    pub monotone: bool,
}

fn gain_live(kappa: &StateMeasure, model: &Model) -> Vec<f64> {
    let m = model.num_classes;
    let nc = kappa.grid.cell_count();
    let per_cell: Vec<Vec<f64>> = crate::par::map_indexed(nc, |cell| {
        let kcell: Vec<f64> = (0..m).map(|i| kappa.density[i * nc + cell]).collect();
        let g = gain(&kcell, model);
        g[..m].to_vec()
    });
    let mut out = vec![0.0; m * nc];
    for (cell, g) in per_cell.into_iter().enumerate() {
        for i in 0..m {
            out[i * nc + cell] = g[i];
        }
    }
    out
}

/// Minimal-solution iteration against a completed Duhamel run.
///
/// Uses the run's frozen c-field history to build the killed one-step
/// propagator in the same trapezoidal algebra as the mild step, so the run
/// itself is the exact fixed point: `ν⁰` applies just the killed propagator
/// to the initial data and each iterate adds the live-range gain integral.
/// Returns the per-iterate sup-over-time L¹ gaps to the run.
pub fn minimal_iteration(
    scenario: &Scenario,
    result: &RunResult,
    kmax: usize,
) -> Result<MinimalReport, CoagError> {
    let history = result.history.as_ref().ok_or_else(|| {
        CoagError::Scenario("minimal_iteration needs a run with store_history".into())
    })?;
    let model = &scenario.model;
    let tables = Tables::build(&scenario.grid, model, scenario.dt)?;
    let n = history.times.len();
    let dt = scenario.dt;
    let nc = scenario.grid.cell_count();
    let m = model.num_classes;

    // One Picard sweep over the whole time grid:
    //   ν_{j+1} = D⁻¹_{j+1} [ P( D̃_j ν_j + (Δt/2)·g_j ) + (Δt/2)·g_{j+1} ]
    // with D̃_j = 1 − (Δt/2)c_j and D_{j+1} = 1 + (Δt/2)c_{j+1}.
    let sweep = |gains: Option<&Vec<Vec<f64>>>| -> Result<Vec<StateMeasure>, CoagError> {
        let mut nus = Vec::with_capacity(n);
        nus.push(scenario.kappa0.clone());
        for j in 0..n - 1 {
            let cj = &history.c_fields[j];
            let cj1 = &history.c_fields[j + 1];
            let mut work = nus[j].clone();
            for idx in 0..m * nc {
                work.density[idx] *= 1.0 - dt / 2.0 * cj[idx];
            }
            if let Some(g) = gains {
                axpy(&mut work.density, dt / 2.0, &g[j]);
            }
            diffuse_raw(&mut work.density, m, &scenario.grid, &tables.full)?;
            if let Some(g) = gains {
                axpy(&mut work.density, dt / 2.0, &g[j + 1]);
            }
            for idx in 0..m * nc {
                work.density[idx] /= 1.0 + dt / 2.0 * cj1[idx];
            }
            nus.push(work);
        }
        Ok(nus)
    };

    let gap_of = |nus: &[StateMeasure]| -> f64 {
        let mut gap = 0.0_f64;
        for (nu, mu) in nus.iter().zip(history.kappas.iter()) {
            let l1: f64 = nu
                .density
                .iter()
                .zip(mu.density.iter())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                * scenario.grid.cell_volume();
            gap = gap.max(l1);
        }
        gap
    };

    let scale = history
        .kappas
        .iter()
        .fold(0.0_f64, |s, k| s.max(norm_inf(&k.density)));
    let below_tol = 1e-9 * scale.max(1.0);

    let mut nus = sweep(None)?;
    let mut gaps = vec![gap_of(&nus)];
    let mut below = true;
    let mut monotone = true;
    let check_below = |nus: &[StateMeasure], below: &mut bool| {
        for (nu, mu) in nus.iter().zip(history.kappas.iter()) {
            for (a, b) in nu.density.iter().zip(mu.density.iter()) {
                if *a > *b + below_tol {
                    *below = false;
                }
            }
        }
    };
    check_below(&nus, &mut below);

    for _ in 0..kmax {
        let gains: Vec<Vec<f64>> = nus.iter().map(|nu| gain_live(nu, model)).collect();
        nus = sweep(Some(&gains))?;
        let g = gap_of(&nus);
        if g > gaps.last().unwrap() + below_tol {
            monotone = false;
        }
        gaps.push(g);
        check_below(&nus, &mut below);
    }

    Ok(MinimalReport { gaps, below, monotone })
}

/// Weak-form residual of a stored trajectory against a test function `f`
/// on grid x classes (class-major over the live classes):
/// `r(t) = (f,μ_t) − (f,μ_0) − ∫(½aΔ_h f, μ_s)ds − ∫(f, K(μ_s))ds`,
/// trapezoidal in time, centered-difference Laplacian in space. The kernel
/// pairing evaluates `f` at the product class; products above the live range
/// fall outside f's support and contribute zero.
pub fn weak_residual(
    times: &[f64],
    states: &[StateMeasure],
    model: &Model,
    grid: &SpatialGrid,
    f: &[f64],
) -> Result<Vec<(f64, f64)>, CoagError> {
    let m = model.num_classes;
    let nc = grid.cell_count();
    if f.len() != m * nc {
        return Err(CoagError::ShapeMismatch {
            what: format!(
                "test function must be supported on the {} live classes x {} cells",
                m, nc
            ),
        });
    }
    if times.len() != states.len() || times.is_empty() {
        return Err(CoagError::GridMismatch {
            what: "times and states must align".into(),
        });
    }

    // ½ a Δ_h f, precomputed per class and cell
    let dx2 = grid.dx() * grid.dx();
    let n = grid.cells_per_axis;
    let mut lap_f = vec![0.0; m * nc];
    for i in 0..m {
        for cell in 0..nc {
            let idx = grid.decompose(cell);
            let mut lap = 0.0;
            let mut stride = 1usize;
            for axis in 0..grid.dim as usize {
                let here = f[i * nc + cell];
                let up = cell - idx[axis] * stride + ((idx[axis] + 1) % n) * stride;
                let down = cell - idx[axis] * stride + ((idx[axis] + n - 1) % n) * stride;
                lap += (f[i * nc + up] - 2.0 * here + f[i * nc + down]) / dx2;
                stride *= n;
            }
            lap_f[i * nc + cell] = 0.5 * model.diffusivity[i] * lap;
        }
    }

    let vol = grid.cell_volume();
    let pair = |state: &StateMeasure, g: &[f64]| -> f64 {
        state
            .density
            .iter()
            .zip(g.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * vol
    };
    // (f, K(μ)) with f evaluated at the product class (zero above the range)
    let k_pairing = |state: &StateMeasure| -> f64 {
        let mut total = 0.0;
        for cell in 0..nc {
            let kcell: Vec<f64> = (0..m).map(|i| state.density[i * nc + cell]).collect();
            let g = gain(&kcell, model);
            let l = loss(&kcell, model);
            let mut s = 0.0;
            for k in 0..m {
                s += f[k * nc + cell] * g[k];
            }
            for (i, li) in l.iter().enumerate() {
                s -= f[i * nc + cell] * li;
            }
            total += s;
        }
        total * vol
    };

    let f_mu0 = pair(&states[0], f);
    let mut residuals = Vec::with_capacity(times.len());
    let mut integral = 0.0;
    let mut prev_integrand = pair(&states[0], &lap_f) + k_pairing(&states[0]);
    residuals.push((times[0], 0.0));
    for j in 1..times.len() {
        let integrand = pair(&states[j], &lap_f) + k_pairing(&states[j]);
        integral += 0.5 * (times[j] - times[j - 1]) * (prev_integrand + integrand);
        prev_integrand = integrand;
        let r = pair(&states[j], f) - f_mu0 - integral;
        residuals.push((times[j], r));
    }
    Ok(residuals)
}
