//! Named verification suites over the library's public evaluators.
//!
//! Each suite re-evaluates one family of identities behind the kernel
//! constructions on a fixed grid and reports one [`CheckResult`] per named
//! check: the worst error observed, the tolerance the check is held to, and
//! the verdict.  The grids are small enough for command-line use yet cross
//! every code path: both solution families, every jump ray, both signs of x
//! and tau, both weight intervals.
//!
//! Error measures, per suite:
//!
//! * `ode`: residual of `z q''' - beta q'' - tau q' + q` (and the adjoint
//!   `z r''' + (beta+3) r'' - tau r' - r`), relative to the largest term.
//! * `concomitant`: absolute deviation of `B[q_j, r_k](z, z)` from
//!   `delta_{jk}`.
//! * `jumps`: relative boundary defect `max |Psi_+ - Psi_- J| / max |Psi_-|`
//!   on each ray.
//! * `asymptotics`: log-log decay slope of the normalized large-z deviation
//!   against the predicted -1/3, plus the deviation at the smallest radius.
//! * `consistency`: pairwise relative spread of the three kernel routes and
//!   their imaginary residuals.
//! * `traces`: deviation of the diagonal kernel integral from the particle
//!   count on each interval.
//! * `projection`: relative defect of the reproducing identity
//!   `int K(x,z) K(z,y) dz = K(x,y)`.
//! * `symmetry`: reflection identity of the limit kernel under
//!   `(x, y, tau) -> (-x, -y, -tau)` and of the finite kernel for a mirror
//!   symmetric weight pair.

use crate::error::{Error, Result};
use crate::finite::{kernel_finite, moments, projection_integral, trace_interval, Factor, WeightSpec};
use crate::kernel::{kernel_double, kernel_pairing, kernel_psi, KernelEvaluation};
use crate::ode::{self, KernelParams};
use crate::precision::PrecisionContext;
use crate::psi::{check_asymptotics, jump_defect, Ray};
use rug::{Complex, Float};
use serde::Serialize;
use std::f64::consts::FRAC_PI_8;

/// Outcome of one named check inside a suite.
#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    fn new(name: impl Into<String>, max_error: f64, tolerance: f64) -> CheckResult {
        CheckResult {
            name: name.into(),
            max_error,
            tolerance,
            pass: max_error.is_finite() && max_error <= tolerance,
        }
    }
}

/// Suite names accepted by [`run_suite`], in canonical order.
pub const SUITE_NAMES: [&str; 8] = [
    "ode",
    "concomitant",
    "jumps",
    "asymptotics",
    "consistency",
    "traces",
    "projection",
    "symmetry",
];

/// Dispatch a suite by name.  `n` is consumed only by `traces`, which builds
/// an (n, n) ensemble.
pub fn run_suite(name: &str, n: usize, ctx: &PrecisionContext) -> Result<Vec<CheckResult>> {
    match name {
        "ode" => suite_ode(ctx),
        "concomitant" => suite_concomitant(ctx),
        "jumps" => suite_jumps(ctx),
        "asymptotics" => suite_asymptotics(ctx),
        "consistency" => suite_consistency(ctx),
        "traces" => suite_traces(n, ctx),
        "projection" => suite_projection(ctx),
        "symmetry" => suite_symmetry(ctx),
        other => Err(Error::InvalidInput(format!(
            "unknown suite \"{other}\"; expected one of {SUITE_NAMES:?} or \"all\""
        ))),
    }
}

// Shared evaluation grid: exponents across the sign change and a stiff value,
// deformations of both signs, and points in both half planes.  All arguments
// stay inside |arg z| < 1.3 where every q_j and r_k is computable.
const PARAM_GRID: [(f64, f64); 3] = [(0.0, 0.0), (0.5, 0.5), (2.5, -1.0)];
const Z_GRID: [(f64, f64); 3] = [(1.2, 0.4), (0.7, -0.8), (2.0, 0.1)];

fn mag(c: &Complex) -> f64 {
    Float::with_val(64, c.abs_ref()).to_f64()
}

/// |sum of terms| / max |term|; the terms are the individually evaluated
/// pieces of a linear equation, so this is a relative residual.
fn relative_residual(terms: &[Complex]) -> f64 {
    let prec = terms[0].prec().0;
    let mut sum = Complex::with_val(prec, 0);
    let mut scale = 0.0f64;
    for t in terms {
        sum += t;
        scale = scale.max(mag(t));
    }
    mag(&sum) / scale.max(f64::MIN_POSITIVE)
}

/// Least-squares slope of ln(y) against ln(x).
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert!(xs.len() == ys.len() && xs.len() >= 2, "need two samples for a slope");
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let sx: f64 = lx.iter().sum();
    let sy: f64 = ly.iter().sum();
    let sxx: f64 = lx.iter().map(|x| x * x).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| x * y).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Residuals of the defining third-order equation for q_1..q_3 and of the
/// adjoint equation for r_1..r_3, each maximized over the shared grid.
pub fn suite_ode(ctx: &PrecisionContext) -> Result<Vec<CheckResult>> {
    let prec = ctx.bits;
    let mut worst = [0.0f64; 6];
    for &(beta, tau) in &PARAM_GRID {
        let params = KernelParams::new(beta, tau)?;
        for &(re, im) in &Z_GRID {
            let z = Complex::with_val(prec, (re, im));
            for j in 1..=3u8 {
                let d = ode::q_j_all(j, &z, &params, ctx)?;
                let mut t3 = d[3].clone();
                t3 *= &z;
                let mut t2 = d[2].clone();
                t2 *= -beta;
                let mut t1 = d[1].clone();
                t1 *= -tau;
                let r = relative_residual(&[t3, t2, t1, d[0].clone()]);
                worst[(j - 1) as usize] = worst[(j - 1) as usize].max(r);
            }
            for k in 1..=3u8 {
                let d = ode::r_k_all(k, &z, &params, ctx)?;
                let mut t3 = d[3].clone();
                t3 *= &z;
                let mut t2 = d[2].clone();
                t2 *= beta + 3.0;
                let mut t1 = d[1].clone();
                t1 *= -tau;
                let mut t0 = d[0].clone();
                t0 *= -1.0;
                let r = relative_residual(&[t3, t2, t1, t0]);
                worst[2 + k as usize] = worst[2 + k as usize].max(r);
            }
        }
    }
    let names = ["q1", "q2", "q3", "r1", "r2", "r3"];
    Ok(names
        .iter()
        .zip(worst)
        .map(|(n, e)| CheckResult::new(format!("ode residual {n}"), e, 1e-10))
        .collect())
}

/// The nine concomitant pairings `B[q_j, r_k](z, z) = delta_{jk}`, each
/// maximized over the shared grid.
pub fn suite_concomitant(ctx: &PrecisionContext) -> Result<Vec<CheckResult>> {
    let prec = ctx.bits;
    let mut worst = [[0.0f64; 3]; 3];
    for &(beta, tau) in &PARAM_GRID {
        let params = KernelParams::new(beta, tau)?;
        for &(re, im) in &Z_GRID {
            let z = Complex::with_val(prec, (re, im));
            let qs = [
                ode::q_j(1, &z, &params, ctx)?,
                ode::q_j(2, &z, &params, ctx)?,
                ode::q_j(3, &z, &params, ctx)?,
            ];
            let rs = [
                ode::r_k(1, &z, &params, ctx)?,
                ode::r_k(2, &z, &params, ctx)?,
                ode::r_k(3, &z, &params, ctx)?,
            ];
            for (j, q) in qs.iter().enumerate() {
                for (k, r) in rs.iter().enumerate() {
                    let mut dev = ode::concomitant(q, r, &z, &z, &params);
                    if j == k {
                        dev -= &Complex::with_val(prec, 1);
                    }
                    worst[j][k] = worst[j][k].max(mag(&dev));
                }
            }
        }
    }
    let mut out = Vec::with_capacity(9);
    for j in 0..3 {
        for k in 0..3 {
            out.push(CheckResult::new(
                format!("concomitant q{} r{}", j + 1, k + 1),
                worst[j][k],
                1e-10,
            ));
        }
    }
    Ok(out)
}

fn ray_label(ray: Ray) -> &'static str {
    match ray {
        Ray::Zero => "arg 0",
        Ray::QuarterPi => "arg pi/4",
        Ray::ThreeQuarterPi => "arg 3pi/4",
        Ray::Pi => "arg pi",
        Ray::MinusThreeQuarterPi => "arg -3pi/4",
        Ray::MinusQuarterPi => "arg -pi/4",
    }
}

/// Relative jump defect of the parametrix on all six rays at three radii.
pub fn suite_jumps(ctx: &PrecisionContext) -> Result<Vec<CheckResult>> {
    let params = KernelParams::new(0.5, 0.5)?;
    let mut out = Vec::with_capacity(18);
    for ray in Ray::ALL {
        for rho in [0.5, 1.0, 2.0] {
            let defect = jump_defect(ray, rho, &params, ctx)?;
            out.push(CheckResult::new(
                format!("jump {} radius {rho}", ray_label(ray)),
                defect,
                1e-9,
            ));
        }
    }
    Ok(out)
}

/// Large-z behaviour of the parametrix in one direction per half plane: the
/// normalized deviation must decay like the inverse cube root (slope check)
/// and already be small at the innermost radius (prefactor check).
pub fn suite_asymptotics(ctx: &PrecisionContext) -> Result<Vec<CheckResult>> {
    let params = KernelParams::new(0.5, 0.5)?;
    // Radii of a few hundred burn mantissa in the oscillatory phases.
    let local = PrecisionContext::new(ctx.bits.max(512), ctx.quad_tol.min(1e-20), ctx.max_subdiv)?;
    let radii = [10.0, 30.0, 100.0, 300.0];
    let mut out = Vec::with_capacity(4);
    for (dir, label) in [(3.0 * FRAC_PI_8, "upper"), (-5.0 * FRAC_PI_8, "lower")] {
        let dev = check_asymptotics(&radii, dir, &params, &local)?;
        let slope = log_log_slope(&radii, &dev);
        out.push(CheckResult::new(
            format!("asymptotic decay slope, {label} direction"),
            (slope + 1.0 / 3.0).abs(),
            0.1,
        ));
        out.push(CheckResult::new(
            format!("asymptotic prefactor, {label} direction"),
            dev[0],
            0.5,
        ));
    }
    Ok(out)
}

fn rel_diff(a: &Float, b: &Float) -> f64 {
    let d = Float::with_val(64, a - b).to_f64().abs();
    let s = a.to_f64().abs().max(b.to_f64().abs());
    d / s.max(f64::MIN_POSITIVE)
}

fn rel_imag(v: &KernelEvaluation) -> f64 {
    v.imag_residual.to_f64() / v.value.to_f64().abs().max(f64::MIN_POSITIVE)
}

/// Pairwise agreement of the three kernel routes at points covering both
/// orderings and both sign patterns, plus their imaginary residuals.
pub fn suite_consistency(ctx: &PrecisionContext) -> Result<Vec<CheckResult>> {
    let params = KernelParams::new(0.5, 0.5)?;
    let points = [(0.8, 1.3), (-0.6, -1.4), (0.7, -1.1)];
    let mut spread = [0.0f64; 3];
    let mut imag_worst = 0.0f64;
    for &(x, y) in &points {
        let kp = kernel_pairing(x, y, &params, ctx)?;
        let kd = kernel_double(x, y, &params, ctx)?;
        let ks = kernel_psi(x, y, &params, ctx)?;
        for v in [&kp, &kd, &ks] {
            imag_worst = imag_worst.max(rel_imag(v));
        }
        spread[0] = spread[0].max(rel_diff(&kp.value, &kd.value));
        spread[1] = spread[1].max(rel_diff(&kd.value, &ks.value));
        spread[2] = spread[2].max(rel_diff(&ks.value, &kp.value));
    }
    Ok(vec![
        CheckResult::new("consistency pairing vs double", spread[0], 1e-8),
        CheckResult::new("consistency double vs psi", spread[1], 1e-8),
        CheckResult::new("consistency psi vs pairing", spread[2], 1e-8),
        CheckResult::new("imaginary residual", imag_worst, 1e-8),
    ])
}

/// Diagonal kernel integrals against the particle counts of an (n, n)
/// ensemble, for three weight shapes.
pub fn suite_traces(n: usize, ctx: &PrecisionContext) -> Result<Vec<CheckResult>> {
    if n == 0 {
        return Err(Error::InvalidInput("trace suite needs n >= 1".into()));
    }
    let specs = [
        ("uniform weights", WeightSpec::new(-1.0, 0.0, 0.0, 0.0, Factor::One, Factor::One)?),
        ("mixed exponents", WeightSpec::new(-0.8, 0.5, -0.3, 1.2, Factor::One, Factor::One)?),
        ("negative exponents", WeightSpec::new(-1.0, -0.5, 0.5, -0.5, Factor::One, Factor::One)?),
    ];
    let mut out = Vec::with_capacity(6);
    for (label, spec) in &specs {
        let sys = moments(spec, n, n, ctx)?;
        for which in [1u8, 2u8] {
            let mut dev = trace_interval(&sys, spec, which)?;
            dev -= n as f64;
            dev.abs_mut();
            out.push(CheckResult::new(
                format!("trace interval {which}, {label}"),
                dev.to_f64(),
                1e-10,
            ));
        }
    }
    Ok(out)
}

/// The reproducing identity of the finite kernel at three point pairs.
pub fn suite_projection(ctx: &PrecisionContext) -> Result<Vec<CheckResult>> {
    let spec = WeightSpec::new(-0.8, 0.5, -0.3, 1.2, Factor::One, Factor::One)?;
    let sys = moments(&spec, 3, 3, ctx)?;
    let mut out = Vec::with_capacity(3);
    for (x, y) in [(-0.5, -0.2), (0.3, 0.7), (-0.4, 0.3)] {
        let proj = projection_integral(&sys, &spec, x, y)?;
        let k = kernel_finite(&sys, &spec, x, y)?;
        let mut dev = proj;
        dev -= &k;
        dev.abs_mut();
        let scale = k.to_f64().abs().max(1.0);
        out.push(CheckResult::new(
            format!("projection at ({x}, {y})"),
            dev.to_f64() / scale,
            1e-8,
        ));
    }
    Ok(out)
}

/// Reflection identities: the limit kernel under `(x, y, tau) -> (-x, -y,
/// -tau)` and the finite kernel of a mirror symmetric pair (a = -1, equal
/// outer exponents, equal counts) under `(x, y) -> (-x, -y)`.
pub fn suite_symmetry(ctx: &PrecisionContext) -> Result<Vec<CheckResult>> {
    let mut limit_worst = 0.0f64;
    for &(x, y, tau) in &[(1.0, 2.0, 0.5), (0.5, -1.5, -0.3)] {
        let here = KernelParams::new(0.5, tau)?;
        let there = KernelParams::new(0.5, -tau)?;
        let a = kernel_pairing(x, y, &here, ctx)?;
        let b = kernel_pairing(-x, -y, &there, ctx)?;
        let mut dev = a.value.clone();
        dev -= &b.value;
        dev.abs_mut();
        let scale = a.value.to_f64().abs().max(1.0);
        limit_worst = limit_worst.max(dev.to_f64() / scale);
    }
    let spec = WeightSpec::new(-1.0, 0.3, 0.1, 0.3, Factor::One, Factor::One)?;
    let sys = moments(&spec, 3, 3, ctx)?;
    let mut finite_worst = 0.0f64;
    for &(x, y) in &[(0.4, 0.7), (-0.6, 0.25)] {
        let a = kernel_finite(&sys, &spec, x, y)?;
        let b = kernel_finite(&sys, &spec, -x, -y)?;
        let mut dev = a;
        dev -= &b;
        dev.abs_mut();
        finite_worst = finite_worst.max(dev.to_f64());
    }
    Ok(vec![
        CheckResult::new("limit kernel reflection", limit_worst, 1e-10),
        CheckResult::new("finite kernel reflection", finite_worst, 1e-20),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(192, 1e-25, 20_000).unwrap()
    }

    #[test]
    fn residual_is_relative_to_the_largest_term() {
        let prec = 128;
        let big = Complex::with_val(prec, 100);
        let mut opp = Complex::with_val(prec, -100);
        opp += &Complex::with_val(prec, (0, 1e-10));
        let zero = Complex::with_val(prec, 0);
        let r = relative_residual(&[big, opp, zero]);
        assert!((r - 1e-12).abs() < 1e-18, "residual {r}");
    }

    #[test]
    fn slope_fit_recovers_an_exact_power() {
        let xs: [f64; 4] = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|&x| x.powf(-1.0 / 3.0)).collect();
        let slope = log_log_slope(&xs, &ys);
        assert!((slope + 1.0 / 3.0).abs() < 1e-12, "slope {slope}");
    }

    #[test]
    fn trace_suite_counts_particles() {
        let results = suite_traces(3, &ctx()).unwrap();
        assert_eq!(results.len(), 6);
        for r in &results {
            assert!(r.pass, "{} failed: {:e} > {:e}", r.name, r.max_error, r.tolerance);
        }
    }

    #[test]
    fn projection_suite_confirms_the_reproducing_identity() {
        let results = suite_projection(&ctx()).unwrap();
        assert_eq!(results.len(), 3);
        for r in &results {
            assert!(r.pass, "{} failed: {:e} > {:e}", r.name, r.max_error, r.tolerance);
        }
    }

    #[test]
    fn symmetry_suite_sees_both_reflections() {
        let results = suite_symmetry(&ctx()).unwrap();
        assert_eq!(results.len(), 2);
        for r in &results {
            assert!(r.pass, "{} failed: {:e} > {:e}", r.name, r.max_error, r.tolerance);
        }
    }

    #[test]
    fn unknown_suite_is_rejected() {
        let err = run_suite("spectra", 4, &ctx()).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }
}
