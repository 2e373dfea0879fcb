//! High-precision evaluation of the Angelesco hard-edge scaling kernel.
//!
//! The library computes one limiting kernel three independent ways and the
//! finite-n multiple-orthogonal-polynomial kernel it arises from:
//!
//! * `kernel::kernel_pairing` pairs two special functions q0, r0 through a
//!   bilinear concomitant,
//! * `kernel::kernel_double` evaluates a double contour integral,
//! * `kernel::kernel_psi` sandwiches a 3x3 matrix parametrix built from
//!   solutions of `z q''' - beta q'' - tau q' + q = 0` and its adjoint,
//! * `finite` builds the exact kernel for two touching modified Jacobi
//!   weights at finite n and rescales it onto the limiting one.
//!
//! All arithmetic is MPFR-backed (`rug`) with explicit precision contexts;
//! every contour integral goes through the adaptive nested rule in
//! `precision`.

pub mod checks;
pub mod contours;
pub mod error;
pub mod finite;
pub mod jacobi;
pub mod kernel;
pub mod ode;
pub mod precision;
pub mod psi;

pub use checks::{log_log_slope, run_suite, CheckResult, SUITE_NAMES};
pub use error::{Error, Result};
pub use finite::{
    converge_to_angelesco, correlation, gap_endpoint, kernel_finite, moments, mop_polynomial,
    projection_integral, trace_interval, ConvergenceRecord, Factor, MomentSystem, ScalingPoint,
    WeightSpec, WeightTemplate,
};
pub use jacobi::{jacobi_rule, JacobiRule};
pub use kernel::{kernel_double, kernel_pairing, kernel_psi, q0, r0, KernelEvaluation, KernelMethod};
pub use ode::{KernelParams, SolutionTriple};
pub use precision::PrecisionContext;
pub use psi::{PsiValue, Ray, Sector, Side};
