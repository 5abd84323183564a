//! Deterministic solver for the spatially inhomogeneous Smoluchowski
//! coagulation-diffusion system on a periodic grid, in truncated sectional
//! form with explicit defect-mass bookkeeping.
//!
//! Mass classes are integer multiples of a unit mass; classes above the live
//! range `M` are tracked as a defect measure instead of being discarded, so
//! total mass is conserved exactly (up to floating point). Two integrators
//! are provided — Strang splitting and a Picard iteration on the one-step
//! mild (Duhamel) map — together with independent oracles, admissibility
//! checks, an existence-horizon estimate, moment-bound monitors, and the
//! minimal-solution iteration.
//!
//! The `parallel` feature (default on) parallelizes over cells and classes
//! with rayon; outputs are bit-identical with and without it.

// index loops are kept explicit in the stencil/flux kernels, and `!(x > 0)`
// guards are deliberate: they reject NaN where `x <= 0` would not
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod coagulation;
pub mod error;
pub mod heatflow;
pub mod oracles;
mod par;
pub mod scenario;
pub mod solver;
pub mod state;
pub mod typespace;

pub use error::CoagError;
