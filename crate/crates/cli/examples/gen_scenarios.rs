//! Regenerates the shipped scenario files under `scenarios/`.
//!
//!     cargo run -p coagdiff-cli --example gen_scenarios
//!
//! Kept as a program rather than checked-in JSON editing because the model
//! sections carry full per-class coefficient vectors.

use std::path::Path;

use coagdiff::scenario::{
    GridSpec, InitSpec, ModelSpec, OutputSpec, ScenarioFile, TimeSpec,
};
use coagdiff::typespace::{build_constant_model, build_es_model, Model};

fn time(dt: f64, t_end: f64, integrator: &str, cadence: usize) -> TimeSpec {
    TimeSpec {
        dt,
        t_end,
        integrator: integrator.into(),
        picard_tol: 1e-13,
        picard_kmax: 200,
        cadence,
    }
}

fn grid1(n: usize) -> GridSpec {
    GridSpec {
        dim: 1,
        cells_per_axis: n,
        length: 1.0,
    }
}

fn mono1() -> InitSpec {
    InitSpec::Monodisperse {
        class: 1,
        density: 1.0,
    }
}

fn scenario(
    model: &Model,
    grid: GridSpec,
    init: InitSpec,
    time: TimeSpec,
    dir: &str,
) -> ScenarioFile {
    ScenarioFile {
        model: ModelSpec::from_model(model),
        grid,
        init,
        time,
        outputs: OutputSpec {
            dir: dir.into(),
            snapshots: false,
        },
    }
}

fn main() {
    let out = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    std::fs::create_dir_all(&out).expect("create scenarios dir");
    let write = |name: &str, file: &ScenarioFile| {
        let json = serde_json::to_string_pretty(file).expect("serialize");
        std::fs::write(out.join(name), json + "\n").expect("write scenario");
        println!("wrote {name}");
    };

    // dense aggregation-diffusion run: the standard stress scenario
    write(
        "es_default.json",
        &scenario(
            &build_es_model(64, 1.0),
            grid1(32),
            mono1(),
            time(1e-3, 1.0, "strang", 100),
            "out/es_default",
        ),
    );

    // smooth spatial profile for order studies; the grid is fine enough that
    // even the smallest refined Δt keeps the step stencils well resolved
    // (σ ≳ 1.4Δx), so the measured error is the time discretization's
    write(
        "es_smooth.json",
        &scenario(
            &build_es_model(16, 1.0),
            grid1(64),
            InitSpec::Profile {
                class: 1,
                weight: 0.5,
                center: 0.5,
                sigma: 0.1,
            },
            time(4e-3, 0.04, "strang", 10),
            "out/es_smooth",
        ),
    );

    // homogeneous constant kernel: closed form and the ODE oracle apply
    write(
        "constant_kernel_homogeneous.json",
        &scenario(
            &build_constant_model(32, 1.0, 1.0, 1.0, 1),
            grid1(1),
            mono1(),
            time(1e-3, 2.0, "strang", 100),
            "out/constant_kernel_homogeneous",
        ),
    );

    // small constant-kernel run used for the monotone refinement in M
    write(
        "constant_kernel_refine.json",
        &scenario(
            &build_constant_model(4, 1.0, 1.0, 1.0, 1),
            grid1(8),
            mono1(),
            time(1e-3, 0.1, "strang", 25),
            "out/constant_kernel_refine",
        ),
    );

    // mild-map run with stored history for the minimal-solution iteration
    write(
        "constant_kernel_minimal.json",
        &scenario(
            &build_constant_model(8, 1.0, 1.0, 1.0, 1),
            grid1(1),
            mono1(),
            time(1e-3, 0.5, "duhamel", 100),
            "out/constant_kernel_minimal",
        ),
    );

    // pure diffusion of a Gaussian bump; fine grid for the variance check
    write(
        "diffusion_gaussian.json",
        &scenario(
            &build_constant_model(1, 1.0, 0.0, 1.0, 1),
            grid1(64),
            InitSpec::Profile {
                class: 1,
                weight: 1.0,
                center: 0.5,
                sigma: 0.05,
            },
            time(4e-3, 0.012, "strang", 1),
            "out/diffusion_gaussian",
        ),
    );

    // same bump on a deliberately coarse grid, where the spatial error is
    // large enough to measure a refinement order
    write(
        "diffusion_gaussian_coarse.json",
        &scenario(
            &build_constant_model(1, 1.0, 0.0, 1.0, 1),
            grid1(10),
            InitSpec::Profile {
                class: 1,
                weight: 1.0,
                center: 0.5,
                sigma: 0.05,
            },
            time(4e-3, 0.012, "strang", 1),
            "out/diffusion_gaussian_coarse",
        ),
    );

    // weight-heavy model (w grows linearly in mass): second-moment monitor
    // runs against the reciprocal horizon bound up to 0.8/α
    write(
        "w_heavy.json",
        &scenario(
            &build_constant_model(32, 1.0, 1.0, 1.0, 1),
            grid1(1),
            mono1(),
            time(1e-3, 0.8, "strang", 80),
            "out/w_heavy",
        ),
    );
}
