//! Scenario files, model (de)serialization, and deterministic CSV/manifest
//! output.
//!
//! Scenarios are JSON with five sections (`model`, `grid`, `init`, `time`,
//! `outputs`); unknown keys are rejected everywhere. Numeric output uses
//! Rust's shortest round-trip float formatting, so identical runs produce
//! byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CoagError;
use crate::solver::{DiagRow, Integrator, RunResult, Scenario, BOUND_SLACK, HORIZON_MONITOR_FRACTION};
use crate::state::{DefectState, SpatialGrid, StateMeasure};
use crate::typespace::{KernelKind, Model, Phi};

/// The `model` section; mirrors the solver's `Model` minus derived data.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub dim: u8,
    pub mass_unit: f64,
    pub num_classes: usize,
    /// Per-class, length `2·num_classes`.
    pub diffusivity: Vec<f64>,
    pub weights: Vec<f64>,
    pub v_weights: Option<Vec<f64>>,
    pub kernel: KernelKind,
}

impl ModelSpec {
    pub fn to_model(&self) -> Result<Model, CoagError> {
        if self.num_classes == 0 {
            return Err(CoagError::Scenario("num_classes must be at least 1".into()));
        }
        if !(self.mass_unit > 0.0) {
            return Err(CoagError::Scenario("mass_unit must be positive".into()));
        }
        let n = 2 * self.num_classes;
        for (name, len) in [
            ("diffusivity", self.diffusivity.len()),
            ("weights", self.weights.len()),
        ] {
            if len != n {
                return Err(CoagError::Scenario(format!(
                    "{name} must have length 2*num_classes = {n}, got {len}"
                )));
            }
        }
        if let Some(v) = &self.v_weights {
            if v.len() != n {
                return Err(CoagError::Scenario(format!(
                    "v_weights must have length 2*num_classes = {n}, got {}",
                    v.len()
                )));
            }
        }
        let kernel_table = match &self.kernel {
            KernelKind::Es => {
                let mut table = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..=i {
                        let mi = (i + 1) as f64 * self.mass_unit;
                        let mj = (j + 1) as f64 * self.mass_unit;
                        let v = (mi.powf(-1.0 / 3.0) + mj.powf(-1.0 / 3.0))
                            * (mi.powf(1.0 / 3.0) + mj.powf(1.0 / 3.0));
                        table[i * n + j] = v;
                        table[j * n + i] = v;
                    }
                }
                table
            }
            KernelKind::Constant { rate, .. } => {
                if *rate < 0.0 {
                    return Err(CoagError::Scenario("kernel rate must be nonnegative".into()));
                }
                vec![*rate; n * n]
            }
            KernelKind::Table { table } => {
                if table.len() != n || table.iter().any(|row| row.len() != n) {
                    return Err(CoagError::Scenario(format!(
                        "kernel table must be {n}x{n}"
                    )));
                }
                table.iter().flatten().copied().collect()
            }
        };
        let phi = match &self.kernel {
            KernelKind::Es => Some(Phi::EinsteinSmoluchowski),
            KernelKind::Constant { rate, a_const } => {
                let ad2 = a_const.powf(self.dim as f64 / 2.0);
                let floor = rate.sqrt() / ad2;
                Some(Phi::FlooredLinear {
                    floor: if floor > 0.0 { floor } else { self.mass_unit * 1e-9 },
                })
            }
            KernelKind::Table { .. } => None,
        };
        Ok(Model {
            mass_unit: self.mass_unit,
            num_classes: self.num_classes,
            dim: self.dim,
            diffusivity: self.diffusivity.clone(),
            phi,
            weights: self.weights.clone(),
            v_weights: self.v_weights.clone(),
            kernel_table,
            kernel_kind: self.kernel.clone(),
        })
    }

    pub fn from_model(model: &Model) -> Self {
        ModelSpec {
            dim: model.dim,
            mass_unit: model.mass_unit,
            num_classes: model.num_classes,
            diffusivity: model.diffusivity.clone(),
            weights: model.weights.clone(),
            v_weights: model.v_weights.clone(),
            kernel: model.kernel_kind.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: u8,
    pub cells_per_axis: usize,
    pub length: f64,
}

impl GridSpec {
    pub fn to_grid(&self) -> Result<SpatialGrid, CoagError> {
        if !(1..=3).contains(&self.dim) {
            return Err(CoagError::Scenario("grid dim must be 1, 2 or 3".into()));
        }
        if self.cells_per_axis == 0 {
            return Err(CoagError::Scenario("cells_per_axis must be at least 1".into()));
        }
        if !(self.length > 0.0) {
            return Err(CoagError::Scenario("grid length must be positive".into()));
        }
        Ok(SpatialGrid::new(self.dim, self.cells_per_axis, self.length))
    }
}

/// Initial live state. The defect state always starts empty.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitSpec {
    /// Uniform number density in one class (1-based).
    Monodisperse { class: usize, density: f64 },
    /// Wrapped-Gaussian bump in one class (product over axes), with the
    /// given spatial integral `weight`, center and standard deviation.
    Profile {
        class: usize,
        weight: f64,
        center: f64,
        sigma: f64,
    },
    /// Class-major flat density array loaded from a JSON file.
    File { path: String },
}

impl InitSpec {
    pub fn to_state(
        &self,
        grid: &SpatialGrid,
        num_classes: usize,
        base: &Path,
    ) -> Result<StateMeasure, CoagError> {
        let mut kappa = StateMeasure::zeros(grid.clone(), num_classes);
        let nc = grid.cell_count();
        match self {
            InitSpec::Monodisperse { class, density } => {
                if *class == 0 || *class > num_classes {
                    return Err(CoagError::Scenario(format!(
                        "init class {class} outside live range 1..={num_classes}"
                    )));
                }
                if *density < 0.0 {
                    return Err(CoagError::Scenario("init density must be nonnegative".into()));
                }
                for c in 0..nc {
                    *kappa.at_mut(class - 1, c) = *density;
                }
            }
            InitSpec::Profile {
                class,
                weight,
                center,
                sigma,
            } => {
                if *class == 0 || *class > num_classes {
                    return Err(CoagError::Scenario(format!(
                        "init class {class} outside live range 1..={num_classes}"
                    )));
                }
                if !(*sigma > 0.0) || *weight < 0.0 {
                    return Err(CoagError::Scenario(
                        "profile init needs sigma > 0 and weight >= 0".into(),
                    ));
                }
                let l = grid.length;
                let pdf_1d = |x: f64| -> f64 {
                    let mut s = 0.0;
                    for k in -3..=3 {
                        let d = x - center - k as f64 * l;
                        s += (-d * d / (2.0 * sigma * sigma)).exp();
                    }
                    s / (sigma * (2.0 * std::f64::consts::PI).sqrt())
                };
                for c in 0..nc {
                    let idx = grid.decompose(c);
                    let mut val = *weight;
                    for axis in 0..grid.dim as usize {
                        let x = (idx[axis] as f64 + 0.5) * grid.dx();
                        val *= pdf_1d(x);
                    }
                    *kappa.at_mut(class - 1, c) = val;
                }
            }
            InitSpec::File { path } => {
                let resolved = base.join(path);
                let text = std::fs::read_to_string(&resolved)?;
                let data: Vec<f64> = serde_json::from_str(&text)?;
                if data.len() != num_classes * nc {
                    return Err(CoagError::Scenario(format!(
                        "init file {} must hold {} values (classes x cells), got {}",
                        resolved.display(),
                        num_classes * nc,
                        data.len()
                    )));
                }
                if data.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                    return Err(CoagError::Scenario(
                        "init file values must be nonnegative and finite".into(),
                    ));
                }
                kappa.density = data;
            }
        }
        Ok(kappa)
    }
}

fn default_picard_tol() -> f64 {
    1e-12
}
fn default_picard_kmax() -> usize {
    60
}
fn default_cadence() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub dt: f64,
    pub t_end: f64,
    /// "strang" or "duhamel".
    pub integrator: String,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_kmax")]
    pub picard_kmax: usize,
    #[serde(default = "default_cadence")]
    pub cadence: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: String,
    pub snapshots: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub model: ModelSpec,
    pub grid: GridSpec,
    pub init: InitSpec,
    pub time: TimeSpec,
    pub outputs: OutputSpec,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self, CoagError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Resolves the file into a runnable scenario. `base` anchors relative
    /// init-file paths (usually the scenario file's directory).
    pub fn build(&self, base: &Path) -> Result<Scenario, CoagError> {
        let model = self.model.to_model()?;
        let grid = self.grid.to_grid()?;
        let integrator = match self.time.integrator.as_str() {
            "strang" => Integrator::Strang,
            "duhamel" => Integrator::Duhamel,
            other => {
                return Err(CoagError::Scenario(format!(
                    "unknown integrator '{other}' (expected strang or duhamel)"
                )))
            }
        };
        let kappa0 = self.init.to_state(&grid, model.num_classes, base)?;
        let lambda0 = DefectState::zeros(grid.clone(), model.total_classes());
        let scenario = Scenario {
            model,
            grid,
            kappa0,
            lambda0,
            dt: self.time.dt,
            t_end: self.time.t_end,
            integrator,
            picard_tol: self.time.picard_tol,
            picard_kmax: self.time.picard_kmax,
            cadence: self.time.cadence,
            force: false,
            store_history: false,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Shortest round-trip decimal formatting; `{}` on f64 is locale-independent
/// and reproducible, which keeps outputs byte-identical across runs.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub fn diagnostics_csv(rows: &[DiagRow]) -> String {
    let mut out = String::from(
        "t,mass_mu,mass_lambda,eta_l1,wmom_l1,wmom_inf,w2_sup,bound_horizon_ok,bound_global_ok,clip_mass\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.mass_mu,
            r.mass_lambda,
            r.eta_l1,
            r.wmom_l1,
            r.wmom_inf,
            r.w2_sup,
            r.bound_horizon_ok,
            r.bound_global_ok,
            r.clip_mass
        );
    }
    out
}

/// Rows `(time, class, cell_index, density)` for a class-major flat field of
/// `classes` classes over `cells` cells, at each time.
pub fn snapshots_csv_with(times: &[f64], fields: &[&[f64]], classes: usize, cells: usize) -> String {
    let mut out = String::from("time,class,cell_index,density\n");
    for (t, field) in times.iter().zip(fields.iter()) {
        debug_assert_eq!(field.len(), classes * cells);
        for i in 0..classes {
            for c in 0..cells {
                let _ = writeln!(out, "{},{},{},{}", t, i + 1, c, field[i * cells + c]);
            }
        }
    }
    out
}

/// Run manifest: scenario echo, package version, horizon data, and every
/// tolerance or hard-coded default that shaped the run, so a run is
/// reconstructible from the manifest alone.
pub fn manifest_json(
    file: &ScenarioFile,
    result: &RunResult,
    force: bool,
    cadence: usize,
) -> String {
    let manifest = serde_json::json!({
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "scenario": file,
        "overrides": { "force": force, "cadence": cadence },
        "results": {
            "alpha": result.alpha,
            "zeta_lower": result.zeta_lower,
            "beyond_horizon": result.beyond_horizon,
            "clip_mass_total": result.clip_total,
        },
        "tolerances": {
            "stability_cmax_dt": 0.5,
            "picard_tol": file.time.picard_tol,
            "picard_kmax": file.time.picard_kmax,
            "propagator_tail_cutoff": 1e-16,
            "bound_monitor_slack": BOUND_SLACK,
            "horizon_monitor_fraction": HORIZON_MONITOR_FRACTION,
            "admissibility_check_tol": crate::typespace::CHECK_TOL,
            "negative_clip": "duhamel iterates clipped to 0 after convergence, clipped mass logged",
        },
    });
    serde_json::to_string_pretty(&manifest).expect("manifest serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::typespace::build_es_model;

    fn es_file(m: usize) -> ScenarioFile {
        let model = build_es_model(m, 1.0);
        ScenarioFile {
            model: ModelSpec::from_model(&model),
            grid: GridSpec {
                dim: 1,
                cells_per_axis: 8,
                length: 1.0,
            },
            init: InitSpec::Monodisperse {
                class: 1,
                density: 1.0,
            },
            time: TimeSpec {
                dt: 1e-3,
                t_end: 0.01,
                integrator: "strang".into(),
                picard_tol: default_picard_tol(),
                picard_kmax: default_picard_kmax(),
                cadence: default_cadence(),
            },
            outputs: OutputSpec {
                dir: "out".into(),
                snapshots: false,
            },
        }
    }

    #[test]
    fn model_spec_round_trip() {
        let model = build_es_model(4, 1.0);
        let spec = ModelSpec::from_model(&model);
        let json = serde_json::to_string(&spec).unwrap();
        let back: ModelSpec = serde_json::from_str(&json).unwrap();
        let rebuilt = back.to_model().unwrap();
        assert_eq!(rebuilt.kernel_table, model.kernel_table);
        assert_eq!(rebuilt.weights, model.weights);
        assert_eq!(rebuilt.diffusivity, model.diffusivity);
    }

    #[test]
    fn unknown_keys_rejected() {
        let file = es_file(2);
        let mut value = serde_json::to_value(&file).unwrap();
        value["extra_section"] = serde_json::json!(1);
        assert!(serde_json::from_value::<ScenarioFile>(value.clone()).is_err());
        let mut value = serde_json::to_value(&file).unwrap();
        value["time"]["dt_max"] = serde_json::json!(0.1);
        assert!(serde_json::from_value::<ScenarioFile>(value).is_err());
    }

    #[test]
    fn wrong_vector_length_rejected() {
        let mut file = es_file(2);
        file.model.weights.pop();
        assert!(file.model.to_model().is_err());
    }

    #[test]
    fn builds_runnable_scenario() {
        let file = es_file(4);
        let sc = file.build(Path::new(".")).unwrap();
        assert_eq!(sc.model.num_classes, 4);
        assert_eq!(sc.kappa0.density[0], 1.0);
        assert!(sc.lambda0.density.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn profile_init_integrates_to_weight() {
        let file = {
            let mut f = es_file(4);
            f.init = InitSpec::Profile {
                class: 2,
                weight: 3.0,
                center: 0.5,
                sigma: 0.05,
            };
            f.grid.cells_per_axis = 64;
            f
        };
        let sc = file.build(Path::new(".")).unwrap();
        let total: f64 = sc.kappa0.class_slice(1).iter().sum::<f64>() * sc.grid.cell_volume();
        assert!((total - 3.0).abs() < 1e-6, "integral {total}");
    }

    #[test]
    fn bad_integrator_rejected() {
        let mut file = es_file(2);
        file.time.integrator = "euler".into();
        assert!(file.build(Path::new(".")).is_err());
    }

    #[test]
    fn table_kernel_dimension_checked() {
        let mut file = es_file(2);
        file.model.kernel = KernelKind::Table {
            table: vec![vec![1.0; 3]; 3],
        };
        assert!(file.model.to_model().is_err());
    }

    #[test]
    fn diagnostics_csv_shape() {
        let file = es_file(4);
        let sc = file.build(Path::new(".")).unwrap();
        let result = crate::solver::run(&sc).unwrap();
        let csv = diagnostics_csv(&result.diagnostics);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0].split(',').count(), 10);
        assert_eq!(lines.len(), result.diagnostics.len() + 1);
        assert!(lines[1].starts_with("0,"));
    }

    #[test]
    fn csv_is_deterministic() {
        let file = es_file(4);
        let r1 = crate::solver::run(&file.build(Path::new(".")).unwrap()).unwrap();
        let r2 = crate::solver::run(&file.build(Path::new(".")).unwrap()).unwrap();
        assert_eq!(diagnostics_csv(&r1.diagnostics), diagnostics_csv(&r2.diagnostics));
    }
}
