//! Subcommand implementations behind the `coagdiff` binary.
//!
//! Each command returns a process exit code: 0 ok, 1 check/validation
//! failure, 2 usage/schema/parse error, 3 runtime solver error. Keeping the
//! logic in a library crate lets the acceptance suite drive the commands
//! in-process where convenient and through the binary where byte-level
//! output matters.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use coagdiff::error::CoagError;
use coagdiff::oracles::{self, Provenance, Reference};
use coagdiff::scenario::{
    diagnostics_csv, manifest_json, snapshots_csv_with, InitSpec, ScenarioFile,
};
use coagdiff::solver::{self, Scenario};
use coagdiff::state::{alpha_and_horizon, dominating_measure, norm_l1};
use coagdiff::typespace::{build_constant_model, build_es_model, check_admissible, KernelKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

fn exit_code_for(err: &CoagError) -> i32 {
    match err {
        CoagError::Scenario(_) | CoagError::Json(_) | CoagError::Io(_) => EXIT_PARSE,
        CoagError::Inadmissible { .. } => EXIT_CHECK_FAILED,
        _ => EXIT_RUNTIME,
    }
}

fn fail(err: CoagError) -> i32 {
    eprintln!("error: {err}");
    exit_code_for(&err)
}

fn base_dir(scenario_path: &Path) -> PathBuf {
    scenario_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// `check`: structural admissibility report as JSON on stdout.
pub fn cmd_check(scenario_path: &Path) -> i32 {
    let file = match ScenarioFile::load(scenario_path) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    let model = match file.model.to_model() {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    let report = check_admissible(&model);
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    if report.mandatory_pass() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

/// `run`: diagnostics CSV, optional snapshots, and a manifest in the output
/// directory.
pub fn cmd_run(
    scenario_path: &Path,
    force: bool,
    cadence: Option<usize>,
    out_dir: Option<&Path>,
) -> i32 {
    let file = match ScenarioFile::load(scenario_path) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    let mut scenario = match file.build(&base_dir(scenario_path)) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    scenario.force = force;
    if let Some(c) = cadence {
        scenario.cadence = c;
    }
    let result = match solver::run(&scenario) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };

    let dir = out_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| base_dir(scenario_path).join(&file.outputs.dir));
    if let Err(e) = std::fs::create_dir_all(&dir) {
        return fail(e.into());
    }
    let write = |name: &str, contents: &str| -> Result<(), CoagError> {
        std::fs::write(dir.join(name), contents)?;
        Ok(())
    };
    if let Err(e) = write("diagnostics.csv", &diagnostics_csv(&result.diagnostics)) {
        return fail(e);
    }
    if file.outputs.snapshots {
        let nc = scenario.grid.cell_count();
        let mu_fields: Vec<&[f64]> = result
            .snapshots
            .iter()
            .map(|(k, _)| k.density.as_slice())
            .collect();
        let lam_fields: Vec<&[f64]> = result
            .snapshots
            .iter()
            .map(|(_, l)| l.density.as_slice())
            .collect();
        let mu_csv = snapshots_csv_with(
            &result.snapshot_times,
            &mu_fields,
            scenario.model.num_classes,
            nc,
        );
        let lam_csv = snapshots_csv_with(
            &result.snapshot_times,
            &lam_fields,
            scenario.model.total_classes(),
            nc,
        );
        if let Err(e) = write("snapshots_mu.csv", &mu_csv) {
            return fail(e);
        }
        if let Err(e) = write("snapshots_lambda.csv", &lam_csv) {
            return fail(e);
        }
    }
    if let Err(e) = write(
        "manifest.json",
        &manifest_json(&file, &result, force, scenario.cadence),
    ) {
        return fail(e);
    }
    println!("wrote {}", dir.display());
    EXIT_OK
}

/// `horizon`: α and the guaranteed existence horizon ζ_lower as JSON.
pub fn cmd_horizon(scenario_path: &Path) -> i32 {
    let file = match ScenarioFile::load(scenario_path) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    let scenario = match file.build(&base_dir(scenario_path)) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let dom = dominating_measure(&scenario.kappa0);
    let (alpha, zeta_lower) = alpha_and_horizon(&scenario.model, &dom);
    let out = serde_json::json!({
        "alpha": alpha,
        "zeta_lower": if zeta_lower.is_finite() {
            serde_json::json!(zeta_lower)
        } else {
            serde_json::json!("inf")
        },
        "dominating_measure": dom.0,
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("serializes"));
    EXIT_OK
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefineAxis {
    Dt,
    Dx,
    M,
}

impl std::str::FromStr for RefineAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dt" => Ok(RefineAxis::Dt),
            "dx" => Ok(RefineAxis::Dx),
            "M" | "m" => Ok(RefineAxis::M),
            other => Err(format!("unknown refinement axis '{other}' (dt, dx or M)")),
        }
    }
}

fn final_kappa(scenario: &Scenario) -> Result<(Vec<f64>, f64), CoagError> {
    let result = solver::run(scenario)?;
    let (kappa, _) = result.snapshots.last().expect("at least the initial row");
    Ok((kappa.density.clone(), scenario.grid.cell_volume()))
}

/// Averages factor-2 blocks of a fine field (per axis) down to the coarse
/// grid, class by class.
#[allow(clippy::needless_range_loop)]
fn coarsen(
    field: &[f64],
    classes: usize,
    fine: &coagdiff::state::SpatialGrid,
) -> (Vec<f64>, coagdiff::state::SpatialGrid) {
    let coarse = coagdiff::state::SpatialGrid::new(fine.dim, fine.cells_per_axis / 2, fine.length);
    let ncf = fine.cell_count();
    let ncc = coarse.cell_count();
    let mut out = vec![0.0; classes * ncc];
    let subcells = 1usize << fine.dim;
    for i in 0..classes {
        for cc in 0..ncc {
            let idx = coarse.decompose(cc);
            let mut sum = 0.0;
            for corner in 0..subcells {
                let mut fine_cell = 0usize;
                let mut stride = 1usize;
                for axis in 0..fine.dim as usize {
                    let off = (corner >> axis) & 1;
                    fine_cell += (2 * idx[axis] + off) * stride;
                    stride *= fine.cells_per_axis;
                }
                sum += field[i * ncf + fine_cell];
            }
            out[i * ncc + cc] = sum / subcells as f64;
        }
    }
    (out, coarse)
}

/// `converge`: refinement study along one axis; table CSV on stdout and,
/// with `--out-dir`, written to `converge_<axis>.csv`.
pub fn cmd_converge(scenario_path: &Path, axis: RefineAxis, out_dir: Option<&Path>) -> i32 {
    let file = match ScenarioFile::load(scenario_path) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    let base = base_dir(scenario_path);
    let csv = match converge_csv(&file, &base, axis) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    print!("{csv}");
    if let Some(dir) = out_dir {
        let name = match axis {
            RefineAxis::Dt => "converge_dt.csv",
            RefineAxis::Dx => "converge_dx.csv",
            RefineAxis::M => "converge_m.csv",
        };
        if let Err(e) = std::fs::create_dir_all(dir)
            .map_err(CoagError::from)
            .and_then(|_| std::fs::write(dir.join(name), &csv).map_err(CoagError::from))
        {
            return fail(e);
        }
    }
    EXIT_OK
}

pub fn converge_csv(
    file: &ScenarioFile,
    base: &Path,
    axis: RefineAxis,
) -> Result<String, CoagError> {
    match axis {
        RefineAxis::Dt => {
            let dts = [file.time.dt, file.time.dt / 2.0, file.time.dt / 4.0];
            let mut finals = Vec::new();
            for &dt in &dts {
                let mut f = file.clone();
                f.time.dt = dt;
                let sc = f.build(base)?;
                finals.push(final_kappa(&sc)?);
            }
            let errors: Vec<f64> = finals
                .windows(2)
                .map(|w| {
                    w[0].0
                        .iter()
                        .zip(w[1].0.iter())
                        .map(|(a, b)| (a - b).abs())
                        .sum::<f64>()
                        * w[0].1
                })
                .collect();
            let mut out = String::from("dt,error_vs_half,order\n");
            for (i, &dt) in dts.iter().enumerate().take(errors.len()) {
                let order = if i > 0 {
                    format!("{}", (errors[i - 1] / errors[i]).log2())
                } else {
                    String::new()
                };
                let _ = writeln!(out, "{},{},{}", dt, errors[i], order);
            }
            Ok(out)
        }
        RefineAxis::Dx => {
            if matches!(file.init, InitSpec::File { .. }) {
                return Err(CoagError::Scenario(
                    "dx refinement needs a grid-independent init".into(),
                ));
            }
            let base_n = file.grid.cells_per_axis;
            let ns = [base_n, base_n * 2, base_n * 4];
            let mut finals = Vec::new();
            for &n in &ns {
                let mut f = file.clone();
                f.grid.cells_per_axis = n;
                let sc = f.build(base)?;
                let result = solver::run(&sc)?;
                let (kappa, _) = result.snapshots.last().unwrap();
                finals.push((kappa.density.clone(), sc.grid, sc.model.num_classes));
            }
            // error between consecutive levels, finer coarsened onto coarser
            let mut errors = Vec::new();
            for w in finals.windows(2) {
                let (fine_field, fine_grid, classes) = (&w[1].0, &w[1].1, w[1].2);
                let (coarsened, cgrid) = coarsen(fine_field, classes, fine_grid);
                let err: f64 = coarsened
                    .iter()
                    .zip(w[0].0.iter())
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
                    * cgrid.cell_volume();
                errors.push(err);
            }
            let mut out = String::from("cells_per_axis,error_vs_double,order\n");
            for (i, &n) in ns.iter().enumerate().take(errors.len()) {
                let order = if i > 0 {
                    format!("{}", (errors[i - 1] / errors[i]).log2())
                } else {
                    String::new()
                };
                let _ = writeln!(out, "{},{},{}", n, errors[i], order);
            }
            Ok(out)
        }
        RefineAxis::M => {
            let report = refine_report(file, base)?;
            let mut out = String::from("m_lo,m_hi,kappa_violation,wmom_violation,within_eps\n");
            for (i, pair) in report.kappa_violations.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    report.m_levels[i],
                    report.m_levels[i + 1],
                    pair,
                    report.wmom_violations[i],
                    *pair <= report.eps_used && report.wmom_violations[i] <= report.eps_used
                );
            }
            let _ = writeln!(out, "# eps={} clean={}", report.eps_used, report.clean);
            Ok(out)
        }
    }
}

/// Runs the monotone refinement in `M` at levels `{M, 2M, 4M}`, rebuilding
/// the model from its kernel family at each level.
pub fn refine_report(
    file: &ScenarioFile,
    base: &Path,
) -> Result<coagdiff::solver::RefineReport, CoagError> {
    let m0 = file.model.num_classes;
    let levels = [m0, 2 * m0, 4 * m0];
    let file = file.clone();
    let base = base.to_path_buf();
    let build = move |m: usize| -> Result<Scenario, CoagError> {
        let model = match &file.model.kernel {
            KernelKind::Es => build_es_model(m, file.model.mass_unit),
            KernelKind::Constant { rate, a_const } => {
                build_constant_model(m, file.model.mass_unit, *rate, *a_const, file.model.dim)
            }
            KernelKind::Table { .. } => {
                return Err(CoagError::Scenario(
                    "table kernels cannot be refined in M; use an es or constant kernel".into(),
                ))
            }
        };
        let mut f = file.clone();
        f.model = coagdiff::scenario::ModelSpec::from_model(&model);
        f.build(&base)
    };
    solver::refine_in_m(build, &levels)
}

fn kernel_is_zero(kind: &KernelKind) -> bool {
    match kind {
        KernelKind::Es => false,
        KernelKind::Constant { rate, .. } => *rate == 0.0,
        KernelKind::Table { table } => table.iter().flatten().all(|&x| x == 0.0),
    }
}

/// `oracle`: compares a reducible scenario against an independent reference.
/// Homogeneous (single-cell) scenarios go against the RK4 system oracle,
/// zero-kernel Gaussian-profile scenarios against the closed-form heat
/// kernel; anything else exits 1.
pub fn cmd_oracle(scenario_path: &Path, out_dir: Option<&Path>) -> i32 {
    let file = match ScenarioFile::load(scenario_path) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    let base = base_dir(scenario_path);
    let outcome = if file.grid.cells_per_axis == 1 {
        homogeneous_oracle(&file, &base)
    } else if kernel_is_zero(&file.model.kernel) {
        diffusion_oracle(&file, &base)
    } else {
        eprintln!(
            "error: scenario is neither homogeneous (cells_per_axis = 1) nor pure-diffusion (zero kernel); no oracle applies"
        );
        return EXIT_CHECK_FAILED;
    };
    let (csv, json) = match outcome {
        Ok(pair) => pair,
        Err(e) => return fail(e),
    };
    print!("{csv}");
    println!("{json}");
    if let Some(dir) = out_dir {
        if let Err(e) = std::fs::create_dir_all(dir)
            .map_err(CoagError::from)
            .and_then(|_| {
                std::fs::write(dir.join("oracle.csv"), &csv)?;
                std::fs::write(dir.join("oracle.json"), &json)?;
                Ok(())
            })
        {
            return fail(e);
        }
    }
    EXIT_OK
}

pub fn homogeneous_oracle(
    file: &ScenarioFile,
    base: &Path,
) -> Result<(String, String), CoagError> {
    let scenario = file.build(base)?;
    if scenario.grid.cell_count() != 1 {
        return Err(CoagError::Scenario("homogeneous oracle needs a single cell".into()));
    }
    let result = solver::run(&scenario)?;
    let model = &scenario.model;
    let m = model.num_classes;
    let n_total = model.total_classes();

    let mut n0 = vec![0.0; n_total];
    n0[..m].copy_from_slice(&scenario.kappa0.density[..m]);
    let dt_ref = scenario.dt / 10.0;
    let reference = oracles::homogeneous_ode(model, &n0, &result.snapshot_times, dt_ref)?;
    let ref_live = Reference {
        times: reference.times.clone(),
        data: reference.data.iter().map(|row| row[..m].to_vec()).collect(),
        provenance: Provenance::OdeRk4,
    };
    let run_ref = Reference {
        times: result.snapshot_times.clone(),
        data: result
            .snapshots
            .iter()
            .map(|(k, _)| k.density.clone())
            .collect(),
        provenance: Provenance::OdeRk4,
    };
    let report = oracles::compare(&run_ref, &ref_live)?;

    let mut csv = String::from("time,l1_error,linf_error\n");
    for (i, t) in report.times.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{}", t, report.l1[i], report.linf[i]);
    }
    let closed_form = match (&model.kernel_kind, &file.init) {
        (KernelKind::Constant { rate, .. }, InitSpec::Monodisperse { class: 1, density })
            if (*rate - 1.0).abs() < 1e-15 && (*density - 1.0).abs() < 1e-15 =>
        {
            let t_end = *result.snapshot_times.last().unwrap();
            let expected = oracles::constant_kernel_closed_form(1, t_end);
            let got = result.snapshots.last().unwrap().0.density[0];
            Some(serde_json::json!({
                "t": t_end,
                "n1_expected": expected,
                "n1_run": got,
                "abs_error": (got - expected).abs(),
            }))
        }
        _ => None,
    };
    let json = serde_json::to_string_pretty(&serde_json::json!({
        "oracle": "homogeneous_rk4",
        "dt_ref": dt_ref,
        "times": report.times,
        "l1": report.l1,
        "linf": report.linf,
        "final_per_class": report.final_per_entry,
        "closed_form_n1": closed_form,
    }))
    .expect("serializes");
    Ok((csv, json))
}

pub fn diffusion_oracle(file: &ScenarioFile, base: &Path) -> Result<(String, String), CoagError> {
    let (class, weight, center, sigma) = match &file.init {
        InitSpec::Profile {
            class,
            weight,
            center,
            sigma,
        } => (*class, *weight, *center, *sigma),
        _ => {
            return Err(CoagError::Scenario(
                "diffusion oracle needs a gaussian profile init".into(),
            ))
        }
    };
    if file.grid.dim != 1 {
        return Err(CoagError::Scenario("diffusion oracle supports 1-d grids".into()));
    }
    let scenario = file.build(base)?;
    let result = solver::run(&scenario)?;
    let a = scenario.model.diffusivity[class - 1];
    let sigma0_sq = sigma * sigma;

    let mut csv = String::from("time,variance,variance_expected,variance_rel_error,profile_linf\n");
    let mut worst_var = 0.0_f64;
    let mut worst_linf = 0.0_f64;
    for (t, (kappa, _)) in result.snapshot_times.iter().zip(result.snapshots.iter()) {
        let field = kappa.class_slice(class - 1);
        let var =
            coagdiff::heatflow::profile_variance_1d(field, &scenario.grid, center);
        let expected = sigma0_sq + a * t;
        let rel = (var - expected).abs() / expected;
        let reference =
            oracles::diffusion_reference(&scenario.grid, a, sigma0_sq, *t, center)?;
        let linf = field
            .iter()
            .zip(reference.data[0].iter())
            .map(|(x, r)| (x - weight * r).abs())
            .fold(0.0_f64, f64::max);
        worst_var = worst_var.max(rel);
        worst_linf = worst_linf.max(linf);
        let _ = writeln!(csv, "{},{},{},{},{}", t, var, expected, rel, linf);
    }
    let json = serde_json::to_string_pretty(&serde_json::json!({
        "oracle": "closed_form_heat_kernel",
        "worst_variance_rel_error": worst_var,
        "worst_profile_linf": worst_linf,
    }))
    .expect("serializes");
    Ok((csv, json))
}

/// L¹ norm helper re-exported for the acceptance suite's convenience.
pub fn eta_l1(lambda: &coagdiff::state::DefectState) -> f64 {
    norm_l1(&lambda.eta, &lambda.grid)
}
