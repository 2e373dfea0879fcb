//! Contour-integral solutions of the third-order equation
//!
//! ```text
//! z q'''(z) - beta q''(z) - tau q'(z) + q(z) = 0
//! ```
//!
//! and of its adjoint
//!
//! ```text
//! z r'''(z) + (beta + 3) r''(z) - tau r'(z) - r(z) = 0.
//! ```
//!
//! The direct solutions are
//!
//! ```text
//! q_j(z) = Int_{Gamma_j} t^{-beta-3} exp(tau/t - 1/(2 t^2) + z t) dt,
//! ```
//!
//! with `t^{-beta-3}` cut along the positive real axis (argument in (0, 2 pi)),
//! and the adjoint solutions are
//!
//! ```text
//! r_k(z) = (1/(2 pi i)) Int_{GammaHat_k} s^beta exp(-tau/s + 1/(2 s^2) - z s) ds,
//! ```
//!
//! same cut convention.  Differentiation in z inserts a factor `t^n` (resp.
//! `(-s)^n`) into the integrand, so every derivative is computed from its own
//! absolutely convergent integral rather than by numerical differencing.
//!
//! The bilinear concomitant of the pair of equations,
//!
//! ```text
//! B[q, r](x, y) = y r(y) q''(x) - [(beta+1) r(y) + y r'(y)] q'(x)
//!                 + [y r''(y) + (beta+2) r'(y) - tau r(y)] q(x),
//! ```
//!
//! is constant in z on the diagonal x = y = z and pairs the two families as
//! `B[q_j, r_k](z, z) = delta_{jk}`.
//!
//! Contour deformation: the canonical shapes from [`crate::contours`] converge
//! for z near the positive real axis.  Elsewhere the outgoing tails are rotated
//! to the direction of steepest decay of `exp(z t)`: direction `pi - arg z` for
//! the q-side (so `cos(arg z + phi) = -1`) and `-arg z` for the r-side.  The
//! rotation is restricted to directions reachable from the canonical tail by a
//! sweep through convergent directions that never crosses the integrand cut;
//! sweeps that leave that class would pick up a cut-jump integral and compute a
//! different solution.  Consequences:
//!
//! * `q_1`, `q_2`, `q_3` extend to the whole cut plane `C \ (-inf, 0]`.  For
//!   `arg z` beyond about `pi/2` the rotated tail of `Gamma_1` must leave from
//!   above the integrand cut, so the path first wraps around the origin on the
//!   left (crossing the negative real axis, where the integrand is continuous
//!   and tiny) before running out to the right; mirror image for `Gamma_2`.
//! * `r_1` is computable only for `arg z` in `(-1.3, pi)` and `r_2` only for
//!   `arg z` in `(-pi, 1.3)`; outside these sectors no single-tail contour in
//!   the cut plane reaches the analytic continuation and [`Error::DomainError`]
//!   is returned.  `r_3` uses a compact loop and is entire.
//!
//! For `|z| > 30` the whole contour geometry is scaled by
//! `sigma = (30/|z|)^(1/3)`, tracking the saddle scale `|t| ~ |z|^(-1/3)` so
//! that the intrinsic cancellation stays within a fixed number of digits.

use crate::contours::{zero_c, BranchCut, ContourPath, Segment, TruncationPolicy};
use crate::error::{Error, Result};
use crate::precision::{integrate_path, integrate_path_multi, pi, PrecisionContext};
use rug::ops::NegAssign;
use rug::{Complex, Float};

/// Parameters shared by the equation pair: exponent `beta > -1` and the
/// deformation parameter `tau` (both real).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams {
    pub beta: f64,
    pub tau: f64,
}

impl KernelParams {
    pub fn new(beta: f64, tau: f64) -> Result<Self> {
        if !beta.is_finite() || !tau.is_finite() {
            return Err(Error::InvalidInput("parameters must be finite".into()));
        }
        if beta <= -1.0 {
            return Err(Error::InvalidInput(format!(
                "beta must exceed -1, got {beta}"
            )));
        }
        Ok(Self { beta, tau })
    }
}

/// A solution value together with its first two derivatives at one point.
#[derive(Clone, Debug)]
pub struct SolutionTriple {
    pub value: Complex,
    pub d1: Complex,
    pub d2: Complex,
}

impl SolutionTriple {
    pub fn is_finite(&self) -> bool {
        for c in [&self.value, &self.d1, &self.d2] {
            if !(c.real().is_finite() && c.imag().is_finite()) {
                return false;
            }
        }
        true
    }

    /// Entries as a column in derivative order (value, d1, d2).
    pub fn column(&self) -> [Complex; 3] {
        [self.value.clone(), self.d1.clone(), self.d2.clone()]
    }
}

/// Geometry scale tracking the saddle radius `|z|^(-1/3)` beyond `|z| = 30`.
fn sigma(az: f64) -> f64 {
    if az <= 30.0 {
        1.0
    } else {
        (30.0 / az).cbrt()
    }
}

/// Largest `arg z` for which the rotated `Gamma_1` tail may leave directly
/// from the arc end below the axis; beyond it the exit direction
/// `pi - arg z` would cross the integrand cut and the wrap construction is
/// used instead.  Mirror threshold for `Gamma_2`.
const WRAP_THRESHOLD: f64 = 1.471;

/// Validity floors for the adjoint tails: decay margin `cos(arg z - 0.05)`
/// (resp. mirror) stays above 0.21.
pub(crate) const R_SECTOR_LIMIT: f64 = 1.3;

/// Finiteness and origin checks only; admits the negative real axis, where
/// `atan2` resolves the sign of the zero imaginary part into the boundary
/// argument `+pi` or `-pi` and the contours degenerate continuously to the
/// matching boundary germ.
fn check_z_basic(z: &Complex) -> Result<(f64, f64)> {
    let re = z.real().to_f64();
    let im = z.imag().to_f64();
    if !(re.is_finite() && im.is_finite()) {
        return Err(Error::InvalidInput("evaluation point must be finite".into()));
    }
    let az = re.hypot(im);
    if az < 1e-6 {
        return Err(Error::DomainError(
            "evaluation point too close to the irregular singular point 0".into(),
        ));
    }
    Ok((az, im.atan2(re)))
}

fn check_z(z: &Complex) -> Result<(f64, f64)> {
    let re = z.real().to_f64();
    let im = z.imag().to_f64();
    if im == 0.0 && re <= 0.0 {
        return Err(Error::DomainError(
            "evaluation point lies on the branch cut (-inf, 0]".into(),
        ));
    }
    check_z_basic(z)
}

/// Direct-side contour for `q_j` at a point with modulus `az`, argument `a`.
/// `force_wrap` overrides the threshold so tests can compare both
/// constructions where their validity sectors overlap.
fn q_path(j: u8, az: f64, a: f64, tau: f64, ctx: &PrecisionContext, force_wrap: bool) -> Result<ContourPath> {
    let prec = ctx.bits;
    let policy = TruncationPolicy::for_quad_tol(ctx.quad_tol);
    let sig = sigma(az);
    let head = 1.3 * sig * az + tau.abs() / (0.3 * sig) + 2.0;
    let phi = std::f64::consts::PI - a; // steepest-decay exit direction, in (0, 2 pi)
    let rate = az; // decay margin |cos(arg z + phi)| = 1
    let rx = 0.5 * sig;
    let ry = 0.3 * sig;
    let segments = match j {
        1 => {
            let arc = Segment::arc_pi(prec, 0.0, -ry, rx, ry, 0.5, -0.5);
            let py = -2.0 * ry;
            if a <= WRAP_THRESHOLD && !force_wrap {
                let len = policy.tail_length(rate, head);
                vec![
                    arc,
                    Segment::line(prec, 0.0, py, len * phi.cos(), py + len * phi.sin()),
                ]
            } else {
                // Wrap left of the origin and exit above the cut.
                let eps = 0.1 * sig;
                let len = policy.tail_length(rate, head + 0.6 * sig * az * a.sin().abs() + eps * az);
                vec![
                    arc,
                    Segment::line(prec, 0.0, py, -eps, py),
                    Segment::line(prec, -eps, py, -eps, -py),
                    Segment::line(prec, -eps, -py, -eps + len * phi.cos(), -py + len * phi.sin()),
                ]
            }
        }
        2 => {
            let arc = Segment::arc_pi(prec, 0.0, ry, rx, ry, 0.5, -0.5);
            let py = 2.0 * ry;
            if a >= -WRAP_THRESHOLD && !force_wrap {
                let len = policy.tail_length(rate, head);
                vec![
                    Segment::line(prec, len * phi.cos(), py + len * phi.sin(), 0.0, py),
                    arc,
                ]
            } else {
                let eps = 0.1 * sig;
                let len = policy.tail_length(rate, head + 0.6 * sig * az * a.sin().abs() + eps * az);
                vec![
                    Segment::line(prec, -eps + len * phi.cos(), -py + len * phi.sin(), -eps, -py),
                    Segment::line(prec, -eps, -py, -eps, py),
                    Segment::line(prec, -eps, py, 0.0, py),
                    arc,
                ]
            }
        }
        3 => {
            let x0 = -0.5 * sig;
            let len = policy.tail_length(rate, head);
            // A shallow exit ray from the axis junction would pass the origin
            // inside the wedge where exp(-1/(2 t^2)) grows without bound, so
            // lift the junction to +-0.6 sigma first; the swept region stays
            // clear of both the origin and the cut.
            let lift = 0.6 * sig;
            if phi < 0.9 {
                vec![
                    Segment::line(prec, 0.0, 0.0, x0, 0.0),
                    Segment::line(prec, x0, 0.0, x0, lift),
                    Segment::line(prec, x0, lift, x0 + len * phi.cos(), lift + len * phi.sin()),
                ]
            } else if phi > 2.0 * std::f64::consts::PI - 0.9 {
                vec![
                    Segment::line(prec, 0.0, 0.0, x0, 0.0),
                    Segment::line(prec, x0, 0.0, x0, -lift),
                    Segment::line(prec, x0, -lift, x0 + len * phi.cos(), -lift + len * phi.sin()),
                ]
            } else {
                vec![
                    Segment::line(prec, 0.0, 0.0, x0, 0.0),
                    Segment::line(prec, x0, 0.0, x0 + len * phi.cos(), len * phi.sin()),
                ]
            }
        }
        _ => return Err(Error::InvalidInput(format!("contour index must be 1..=3, got {j}"))),
    };
    Ok(ContourPath::new(segments, BranchCut::PositiveAxis))
}

/// Adjoint-side contour for `r_k`.
fn r_path(k: u8, az: f64, a: f64, tau: f64, ctx: &PrecisionContext) -> Result<ContourPath> {
    let prec = ctx.bits;
    let policy = TruncationPolicy::for_quad_tol(ctx.quad_tol);
    let sig = sigma(az);
    let head = 1.3 * sig * az + tau.abs() / (0.3 * sig) + 1.0 / (0.18 * sig * sig) + 2.0;
    let rx = 0.6 * sig;
    let ry = 0.4 * sig;
    let segments = match k {
        1 => {
            if a <= -R_SECTOR_LIMIT {
                return Err(Error::DomainError(
                    "first adjoint solution is only computed for arg z in (-1.3, pi)".into(),
                ));
            }
            // Exit just below the cut for arg z <= 0.05, else at -arg z.
            let psi = 2.0 * std::f64::consts::PI - a.max(0.05);
            let margin = (a + psi).cos();
            let len = policy.tail_length(az * margin, head);
            vec![
                Segment::line(prec, rx + len * psi.cos(), -ry + len * psi.sin(), rx, -ry),
                Segment::arc_pi(prec, rx, 0.0, rx, ry, -0.5, -1.0),
            ]
        }
        2 => {
            if a >= R_SECTOR_LIMIT {
                return Err(Error::DomainError(
                    "second adjoint solution is only computed for arg z in (-pi, 1.3)".into(),
                ));
            }
            let psi = (-a).max(0.05);
            let margin = (a + psi).cos();
            let len = policy.tail_length(az * margin, head);
            vec![
                Segment::line(prec, rx + len * psi.cos(), ry + len * psi.sin(), rx, ry),
                Segment::arc_pi(prec, rx, 0.0, rx, ry, 0.5, 1.0),
            ]
        }
        3 => vec![Segment::arc_pi(prec, -0.3 * sig, 0.0, 0.3 * sig, 0.5 * sig, 0.0, -2.0)],
        _ => return Err(Error::InvalidInput(format!("contour index must be 1..=3, got {k}"))),
    };
    Ok(ContourPath::new(segments, BranchCut::PositiveAxis))
}

/// `t^expo` with the argument taken in `(0, 2 pi]` (cut along the positive
/// real axis, boundary value from below).
fn pow_cut_plus(t: &Complex, expo: &Float, prec: u32) -> Complex {
    let mut arg = Float::with_val(prec, t.arg_ref());
    if arg <= 0u32 {
        let mut two_pi = pi(prec);
        two_pi *= 2u32;
        arg += &two_pi;
    }
    arg *= expo;
    let mut lnm = Float::with_val(prec, t.abs_ref()).ln();
    lnm *= expo;
    let mag = lnm.exp();
    let (s, c) = arg.sin_cos(Float::new(prec));
    let mut re = c;
    re *= &mag;
    let mut im = s;
    im *= &mag;
    Complex::with_val(prec, (re, im))
}

/// `e^{i pi m}` at working precision.
pub(crate) fn unit_phase(prec: u32, m: f64) -> Complex {
    unit_phase_scaled(prec, m, 1)
}

/// `e^{i pi m / den}` with the division done at working precision, so
/// rational multiples of pi like 2/3 carry no f64 rounding.
pub(crate) fn unit_phase_scaled(prec: u32, m: f64, den: u32) -> Complex {
    let mut th = pi(prec);
    th *= Float::with_val(prec, m);
    th /= den;
    let (s, c) = th.sin_cos(Float::new(prec));
    Complex::with_val(prec, (c, s))
}

/// Integrand `t^{-beta-3+n} exp(tau/t - 1/(2 t^2) + z t)`.  The full exponent
/// is assembled before a single `exp` so opposite overflows cannot meet as
/// `inf * 0`; an exact node at `t = 0` returns exact zero (the contours reach
/// 0 only tangentially, where the integrand decays to 0).
fn q_integrand(t: &Complex, zc: &Complex, expo: &Float, tau: &Float, prec: u32) -> Complex {
    if t.is_zero() {
        return zero_c(prec);
    }
    let mut tinv = t.clone();
    tinv.recip_mut();
    let mut e = tinv.clone();
    e *= tau;
    let mut h = tinv.clone();
    h *= &tinv;
    h *= 0.5f64;
    e -= &h;
    let mut zt = zc.clone();
    zt *= t;
    e += &zt;
    let mut out = pow_cut_plus(t, expo, prec);
    out *= &e.exp();
    out
}

/// Integrand `s^{beta+n} exp(-tau/s + 1/(2 s^2) - z s)`; the outer factor
/// `(-1)^n / (2 pi i)` is applied by the caller.
fn r_integrand(s: &Complex, zc: &Complex, expo: &Float, tau: &Float, prec: u32) -> Complex {
    if s.is_zero() {
        return zero_c(prec);
    }
    let mut sinv = s.clone();
    sinv.recip_mut();
    let mut e = sinv.clone();
    e *= tau;
    e = -e;
    let mut h = sinv.clone();
    h *= &sinv;
    h *= 0.5f64;
    e += &h;
    let mut zs = zc.clone();
    zs *= s;
    e -= &zs;
    let mut out = pow_cut_plus(s, expo, prec);
    out *= &e.exp();
    out
}

/// Orders `0..N` of the q-integrand in one evaluation: the exponential and
/// the cut-plane power are shared, each further order multiplies by `t`.
fn q_integrand_n<const N: usize>(t: &Complex, zc: &Complex, expo0: &Float, tau: &Float, prec: u32) -> [Complex; N] {
    let mut out: [Complex; N] = std::array::from_fn(|_| zero_c(prec));
    if t.is_zero() {
        return out;
    }
    out[0] = q_integrand(t, zc, expo0, tau, prec);
    for n in 1..N {
        let mut next = out[n - 1].clone();
        next *= t;
        out[n] = next;
    }
    out
}

/// Orders `0..N` of the r-integrand in one evaluation; the caller applies the
/// per-order factor `(-1)^n / (2 pi i)`.
fn r_integrand_n<const N: usize>(s: &Complex, zc: &Complex, expo0: &Float, tau: &Float, prec: u32) -> [Complex; N] {
    let mut out: [Complex; N] = std::array::from_fn(|_| zero_c(prec));
    if s.is_zero() {
        return out;
    }
    out[0] = r_integrand(s, zc, expo0, tau, prec);
    for n in 1..N {
        let mut next = out[n - 1].clone();
        next *= s;
        out[n] = next;
    }
    out
}

/// Orders `0..N` of `q_j` with per-order error estimates, admitting boundary
/// points on the negative real axis (the sign of the zero imaginary part
/// selects the germ).
pub(crate) fn q_orders_err<const N: usize>(
    j: u8,
    z: &Complex,
    params: &KernelParams,
    ctx: &PrecisionContext,
) -> Result<([Complex; N], [Float; N])> {
    KernelParams::new(params.beta, params.tau)?;
    let (az, a) = check_z_basic(z)?;
    let prec = ctx.bits;
    let zc = Complex::with_val(prec, z);
    let path = q_path(j, az, a, params.tau, ctx, false)?;
    let mut expo0 = Float::with_val(prec, params.beta);
    expo0 = -expo0 - 3u32;
    let tau = Float::with_val(prec, params.tau);
    let m = integrate_path_multi(|t| q_integrand_n(t, &zc, &expo0, &tau, prec), &path, ctx)?;
    Ok((m.values, m.abs_error_estimates))
}

fn q_orders<const N: usize>(j: u8, z: &Complex, params: &KernelParams, ctx: &PrecisionContext) -> Result<[Complex; N]> {
    check_z(z)?;
    Ok(q_orders_err(j, z, params, ctx)?.0)
}

/// Orders `0..N` of `r_k` with per-order error estimates; boundary points as
/// in [`q_orders_err`].
pub(crate) fn r_orders_err<const N: usize>(
    k: u8,
    z: &Complex,
    params: &KernelParams,
    ctx: &PrecisionContext,
) -> Result<([Complex; N], [Float; N])> {
    KernelParams::new(params.beta, params.tau)?;
    let (az, a) = check_z_basic(z)?;
    let prec = ctx.bits;
    let zc = Complex::with_val(prec, z);
    let path = r_path(k, az, a, params.tau, ctx)?;
    let expo0 = Float::with_val(prec, params.beta);
    let tau = Float::with_val(prec, params.tau);
    let m = integrate_path_multi(|s| r_integrand_n(s, &zc, &expo0, &tau, prec), &path, ctx)?;
    let mut values = m.values;
    let mut errors = m.abs_error_estimates;
    // (-1)^n / (2 pi i) = (-1)^n * (-i) / (2 pi)
    let mut factor = Complex::with_val(prec, (0, -1));
    let mut two_pi = pi(prec);
    two_pi *= 2u32;
    factor /= &two_pi;
    for (n, v) in values.iter_mut().enumerate() {
        *v *= &factor;
        if n % 2 == 1 {
            v.neg_assign();
        }
    }
    for e in errors.iter_mut() {
        *e /= &two_pi;
    }
    Ok((values, errors))
}

fn r_orders<const N: usize>(k: u8, z: &Complex, params: &KernelParams, ctx: &PrecisionContext) -> Result<[Complex; N]> {
    check_z(z)?;
    Ok(r_orders_err(k, z, params, ctx)?.0)
}

fn q_deriv_on_path(path: &ContourPath, zc: &Complex, order: u8, params: &KernelParams, ctx: &PrecisionContext) -> Result<Complex> {
    let prec = ctx.bits;
    let mut expo = Float::with_val(prec, params.beta);
    expo = -expo - 3u32 + Float::with_val(prec, order);
    let tau = Float::with_val(prec, params.tau);
    let r = integrate_path(|t| q_integrand(t, zc, &expo, &tau, prec), path, ctx)?;
    Ok(r.value)
}

fn r_deriv_on_path(path: &ContourPath, zc: &Complex, order: u8, params: &KernelParams, ctx: &PrecisionContext) -> Result<Complex> {
    let prec = ctx.bits;
    let mut expo = Float::with_val(prec, params.beta);
    expo += Float::with_val(prec, order);
    let tau = Float::with_val(prec, params.tau);
    let r = integrate_path(|s| r_integrand(s, zc, &expo, &tau, prec), path, ctx)?;
    // (-1)^order / (2 pi i) = (-1)^order * (-i) / (2 pi)
    let mut factor = Complex::with_val(prec, (0, -1));
    if order % 2 == 1 {
        factor = -factor;
    }
    let mut two_pi = pi(prec);
    two_pi *= 2u32;
    factor /= &two_pi;
    Ok(r.value * factor)
}

/// Derivative of order `0..=3` of the direct solution `q_j`.
pub fn q_j_derivative(j: u8, z: &Complex, order: u8, params: &KernelParams, ctx: &PrecisionContext) -> Result<Complex> {
    if order > 3 {
        return Err(Error::InvalidInput(format!("derivative order must be at most 3, got {order}")));
    }
    KernelParams::new(params.beta, params.tau)?;
    let (az, a) = check_z(z)?;
    let zc = Complex::with_val(ctx.bits, z);
    let path = q_path(j, az, a, params.tau, ctx, false)?;
    q_deriv_on_path(&path, &zc, order, params, ctx)
}

/// Derivative of order `0..=3` of the adjoint solution `r_k`.
pub fn r_k_derivative(k: u8, z: &Complex, order: u8, params: &KernelParams, ctx: &PrecisionContext) -> Result<Complex> {
    if order > 3 {
        return Err(Error::InvalidInput(format!("derivative order must be at most 3, got {order}")));
    }
    KernelParams::new(params.beta, params.tau)?;
    let (az, a) = check_z(z)?;
    let zc = Complex::with_val(ctx.bits, z);
    let path = r_path(k, az, a, params.tau, ctx)?;
    r_deriv_on_path(&path, &zc, order, params, ctx)
}

/// Value and first two derivatives of `q_j` at `z` off the cut `(-inf, 0]`.
/// The three orders share one adaptive pass over the contour.
pub fn q_j(j: u8, z: &Complex, params: &KernelParams, ctx: &PrecisionContext) -> Result<SolutionTriple> {
    let [value, d1, d2] = q_orders::<3>(j, z, params, ctx)?;
    let triple = SolutionTriple { value, d1, d2 };
    if !triple.is_finite() {
        return Err(Error::SingularEndpoint {
            location: format!("q_{j} at {z}"),
        });
    }
    Ok(triple)
}

/// Orders 0..=3 of `q_j` in one shared adaptive pass; for residual checks,
/// which need the third derivative alongside the triple.
pub fn q_j_all(j: u8, z: &Complex, params: &KernelParams, ctx: &PrecisionContext) -> Result<[Complex; 4]> {
    q_orders::<4>(j, z, params, ctx)
}

/// Value and first two derivatives of `r_k` at `z` off the cut `(-inf, 0]`,
/// subject to the sector restrictions for `k = 1, 2`.  The three orders share
/// one adaptive pass over the contour.
pub fn r_k(k: u8, z: &Complex, params: &KernelParams, ctx: &PrecisionContext) -> Result<SolutionTriple> {
    let [value, d1, d2] = r_orders::<3>(k, z, params, ctx)?;
    let triple = SolutionTriple { value, d1, d2 };
    if !triple.is_finite() {
        return Err(Error::SingularEndpoint {
            location: format!("r_{k} at {z}"),
        });
    }
    Ok(triple)
}

/// Orders 0..=3 of `r_k` in one shared adaptive pass.
pub fn r_k_all(k: u8, z: &Complex, params: &KernelParams, ctx: &PrecisionContext) -> Result<[Complex; 4]> {
    r_orders::<4>(k, z, params, ctx)
}

/// The three first-order operators whose row `(B_0 r, B_1 r, B_2 r)(z)`
/// contracts with the column `(q, q', q'')(z)` to the concomitant:
///
/// ```text
/// B_0 r = z r'' + (beta + 2) r' - tau r
/// B_1 r = -z r' - (beta + 1) r
/// B_2 r = z r
/// ```
pub fn apply_b_operators(r: &SolutionTriple, z: &Complex, params: &KernelParams) -> [Complex; 3] {
    let prec = z.prec().0;
    let beta = Float::with_val(prec, params.beta);
    let tau = Float::with_val(prec, params.tau);

    let mut b0 = z.clone();
    b0 *= &r.d2;
    let mut t = r.d1.clone();
    let mut bp2 = beta.clone();
    bp2 += 2u32;
    t *= &bp2;
    b0 += &t;
    let mut t = r.value.clone();
    t *= &tau;
    b0 -= &t;

    let mut b1 = z.clone();
    b1 *= &r.d1;
    b1 = -b1;
    let mut t = r.value.clone();
    let mut bp1 = beta;
    bp1 += 1u32;
    t *= &bp1;
    b1 -= &t;

    let mut b2 = z.clone();
    b2 *= &r.value;

    [b0, b1, b2]
}

/// Bilinear concomitant `B[q, r](x, y)` of a direct triple at `x` and an
/// adjoint triple at `y`.  All coefficients depend on the second point only;
/// `x` enters through the triple `q`.
pub fn concomitant(q: &SolutionTriple, r: &SolutionTriple, _x: &Complex, y: &Complex, params: &KernelParams) -> Complex {
    let [b0, b1, b2] = apply_b_operators(r, y, params);
    let mut out = b2;
    out *= &q.d2;
    let mut t = b1;
    t *= &q.d1;
    out += &t;
    let mut t = b0;
    t *= &q.value;
    out += &t;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::with_bits(256)
    }

    fn c64(ctx: &PrecisionContext, re: f64, im: f64) -> Complex {
        Complex::with_val(ctx.bits, (re, im))
    }

    fn rel_diff(a: &Complex, b: &Complex) -> f64 {
        let scale = Float::with_val(64, a.abs_ref())
            .to_f64()
            .max(Float::with_val(64, b.abs_ref()).to_f64())
            .max(1e-300);
        let d = Complex::with_val(a.prec().0, a - b);
        Float::with_val(64, d.abs_ref()).to_f64() / scale
    }

    fn ode_residual(j: u8, z: &Complex, params: &KernelParams, ctx: &PrecisionContext) -> f64 {
        let [value, d1, d2, d3] = q_j_all(j, z, params, ctx).unwrap();
        let prec = ctx.bits;
        let mut term1 = z.clone();
        term1 *= &d3;
        let mut term2 = d2;
        term2 *= Float::with_val(prec, params.beta);
        let mut term3 = d1;
        term3 *= Float::with_val(prec, params.tau);
        let mut res = term1.clone();
        res -= &term2;
        res -= &term3;
        res += &value;
        let mag = |c: &Complex| Float::with_val(64, c.abs_ref()).to_f64();
        let scale = mag(&term1).max(mag(&term2)).max(mag(&term3)).max(mag(&value));
        mag(&res) / scale.max(1e-300)
    }

    fn adjoint_residual(k: u8, z: &Complex, params: &KernelParams, ctx: &PrecisionContext) -> f64 {
        let [value, d1, d2, d3] = r_k_all(k, z, params, ctx).unwrap();
        let prec = ctx.bits;
        let mut term1 = z.clone();
        term1 *= &d3;
        let mut term2 = d2;
        term2 *= Float::with_val(prec, params.beta + 3.0);
        let mut term3 = d1;
        term3 *= Float::with_val(prec, params.tau);
        let mut res = term1.clone();
        res += &term2;
        res -= &term3;
        res -= &value;
        let mag = |c: &Complex| Float::with_val(64, c.abs_ref()).to_f64();
        let scale = mag(&term1).max(mag(&term2)).max(mag(&term3)).max(mag(&value));
        mag(&res) / scale.max(1e-300)
    }

    #[test]
    fn direct_equation_residual_vanishes() {
        let ctx = ctx();
        let params = KernelParams::new(0.5, 0.3).unwrap();
        let z = c64(&ctx, 1.0, 1.0);
        for j in 1..=3 {
            let r = ode_residual(j, &z, &params, &ctx);
            assert!(r < 1e-12, "q_{j} residual {r}");
        }
    }

    #[test]
    fn adjoint_equation_residual_vanishes() {
        let ctx = ctx();
        let params = KernelParams::new(0.5, 0.3).unwrap();
        let z = c64(&ctx, 1.0, 0.0);
        for k in 1..=3 {
            let r = adjoint_residual(k, &z, &params, &ctx);
            assert!(r < 1e-12, "r_{k} residual {r}");
        }
    }

    // The circle integral re-evaluates the solution at every node, so the
    // cross-checks run at just enough precision for their 1e-10 target.
    fn fast_ctx() -> PrecisionContext {
        PrecisionContext::new(160, 1e-14, 20_000).unwrap()
    }

    #[test]
    fn third_derivative_matches_cauchy_differentiation() {
        let ctx = fast_ctx();
        let params = KernelParams::new(0.5, 0.3).unwrap();
        let z = c64(&ctx, 1.0, 1.0);
        let exact = q_j_derivative(1, &z, 3, &params, &ctx).unwrap();
        let via_cauchy = crate::precision::differentiate(
            |w| q_j_derivative(1, w, 0, &params, &ctx).unwrap(),
            &z,
            3,
            &ctx,
        )
        .unwrap();
        assert!(
            rel_diff(&exact, &via_cauchy) < 1e-10,
            "insertion vs contour differentiation: {}",
            rel_diff(&exact, &via_cauchy)
        );
    }

    #[test]
    fn first_derivative_matches_cauchy_differentiation() {
        let ctx = fast_ctx();
        let params = KernelParams::new(0.5, 0.3).unwrap();
        let z = c64(&ctx, 1.2, 0.3);
        let triple = q_j(2, &z, &params, &ctx).unwrap();
        let via_cauchy = crate::precision::differentiate(
            |w| q_j_derivative(2, w, 0, &params, &ctx).unwrap(),
            &z,
            1,
            &ctx,
        )
        .unwrap();
        assert!(rel_diff(&triple.d1, &via_cauchy) < 1e-10);
    }

    #[test]
    fn concomitant_pairs_solutions_as_kronecker_delta() {
        let ctx = ctx();
        let params = KernelParams::new(0.5, 0.3).unwrap();
        let z = c64(&ctx, 1.0, 0.0);
        for j in 1..=3u8 {
            let q = q_j(j, &z, &params, &ctx).unwrap();
            for k in 1..=3u8 {
                let r = r_k(k, &z, &params, &ctx).unwrap();
                let b = concomitant(&q, &r, &z, &z, &params);
                let expected = if j == k { 1.0 } else { 0.0 };
                let dev = (Float::with_val(64, b.abs_ref()).to_f64() - expected).abs()
                    + b.imag().to_f64().abs();
                assert!(dev < 1e-10, "pair ({j},{k}) deviates by {dev}");
            }
        }
    }

    #[test]
    fn diagonal_concomitant_is_constant_in_z() {
        let ctx = ctx();
        let params = KernelParams::new(0.3, 0.2).unwrap();
        let at = |z: &Complex| {
            let q = q_j(2, z, &params, &ctx).unwrap();
            let r = r_k(2, z, &params, &ctx).unwrap();
            concomitant(&q, &r, z, z, &params)
        };
        let z1 = c64(&ctx, 1.0, 0.0);
        let z2 = c64(&ctx, 2.0, 0.0);
        let zc = c64(&ctx, 1.0, 0.5);
        let one = c64(&ctx, 1.0, 0.0);
        assert!(rel_diff(&at(&z1), &at(&z2)) < 1e-12);
        assert!(rel_diff(&at(&zc), &one) < 1e-10);
    }

    #[test]
    fn operator_row_on_trivial_triples() {
        let ctx = ctx();
        let params = KernelParams::new(0.4, 0.7).unwrap();
        let z = c64(&ctx, 1.3, -0.2);
        let c = c64(&ctx, 2.0, 1.0);
        let zero = zero_c(ctx.bits);
        let constant = SolutionTriple { value: c.clone(), d1: zero.clone(), d2: zero.clone() };
        let [b0, b1, b2] = apply_b_operators(&constant, &z, &params);
        let mut want0 = c.clone();
        want0 *= -Float::with_val(ctx.bits, params.tau);
        let mut want1 = c.clone();
        let mut bp1 = Float::with_val(ctx.bits, params.beta);
        bp1 += 1u32;
        want1 *= -bp1;
        let mut want2 = z.clone();
        want2 *= &c;
        assert_eq!(b0, want0);
        assert_eq!(b1, want1);
        assert_eq!(b2, want2);

        let one = c64(&ctx, 1.0, 0.0);
        let identity = SolutionTriple { value: z.clone(), d1: one, d2: zero };
        let [_, b1, _] = apply_b_operators(&identity, &z, &params);
        let mut bp2 = Float::with_val(ctx.bits, params.beta);
        bp2 += 2u32;
        let mut want = z.clone();
        want *= -bp2;
        assert!(rel_diff(&b1, &want) < 1e-70);
    }

    #[test]
    fn concomitant_is_homogeneous_in_the_adjoint_slot() {
        let ctx = ctx();
        let params = KernelParams::new(0.5, 0.3).unwrap();
        let z = c64(&ctx, 1.0, 0.0);
        let q = q_j(1, &z, &params, &ctx).unwrap();
        let r = r_k(1, &z, &params, &ctx).unwrap();
        let base = concomitant(&q, &r, &z, &z, &params);
        // Power-of-two factor: scaling commutes with rounding bit-for-bit.
        let scaled = SolutionTriple {
            value: r.value.clone() * 4u32,
            d1: r.d1.clone() * 4u32,
            d2: r.d2.clone() * 4u32,
        };
        let quadrupled = concomitant(&q, &scaled, &z, &z, &params);
        assert_eq!(quadrupled, base * 4u32);
    }

    #[test]
    fn conjugation_exchanges_the_solution_pair() {
        let ctx = ctx();
        let params = KernelParams::new(0.3, 0.4).unwrap();
        let z = c64(&ctx, 0.8, 0.6);
        let zbar = c64(&ctx, 0.8, -0.6);
        let prec = ctx.bits;
        let conj = |c: &Complex| {
            let re = Float::with_val(prec, c.real());
            let im = -Float::with_val(prec, c.imag());
            Complex::with_val(prec, (re, im))
        };

        // conj(q_1(conj z)) = -e^{2 beta pi i} q_2(z)
        let lhs = conj(&q_j(1, &zbar, &params, &ctx).unwrap().value);
        let mut rhs = unit_phase(prec, 2.0 * params.beta);
        rhs *= &q_j(2, &z, &params, &ctx).unwrap().value;
        rhs = -rhs;
        assert!(rel_diff(&lhs, &rhs) < 1e-12, "q pair: {}", rel_diff(&lhs, &rhs));

        // conj(q_3(conj z)) = e^{2 beta pi i} q_3(z)
        let lhs = conj(&q_j(3, &zbar, &params, &ctx).unwrap().value);
        let mut rhs = unit_phase(prec, 2.0 * params.beta);
        rhs *= &q_j(3, &z, &params, &ctx).unwrap().value;
        assert!(rel_diff(&lhs, &rhs) < 1e-12);

        // conj(r_1(conj z)) = -e^{-2 beta pi i} r_2(z)
        let lhs = conj(&r_k(1, &zbar, &params, &ctx).unwrap().value);
        let mut rhs = unit_phase(prec, -2.0 * params.beta);
        rhs *= &r_k(2, &z, &params, &ctx).unwrap().value;
        rhs = -rhs;
        assert!(rel_diff(&lhs, &rhs) < 1e-12, "r pair: {}", rel_diff(&lhs, &rhs));

        // conj(r_3(conj z)) = e^{-2 beta pi i} r_3(z)
        let lhs = conj(&r_k(3, &zbar, &params, &ctx).unwrap().value);
        let mut rhs = unit_phase(prec, -2.0 * params.beta);
        rhs *= &r_k(3, &z, &params, &ctx).unwrap().value;
        assert!(rel_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn third_solution_is_real_on_the_positive_axis() {
        let ctx = ctx();
        let params = KernelParams::new(0.0, 0.0).unwrap();
        let z = c64(&ctx, 0.7, 0.0);
        let q = q_j(3, &z, &params, &ctx).unwrap();
        let ratio = q.value.imag().to_f64().abs() / Float::with_val(64, q.value.abs_ref()).to_f64();
        assert!(ratio < 1e-25, "imaginary residue {ratio}");
        let r = r_k(3, &z, &params, &ctx).unwrap();
        let ratio = r.value.imag().to_f64().abs() / Float::with_val(64, r.value.abs_ref()).to_f64();
        assert!(ratio < 1e-25);
    }

    #[test]
    fn third_solution_decays_like_the_saddle_estimate() {
        // q_3(z) ~ sqrt(2 pi / 3) z^{1/3} exp(-(3/2) z^{2/3}) for beta = tau = 0.
        let ctx = ctx();
        let params = KernelParams::new(0.0, 0.0).unwrap();
        let z = c64(&ctx, 64.0, 0.0);
        let q = q_j(3, &z, &params, &ctx).unwrap();
        let predicted = (2.0 * std::f64::consts::PI / 3.0).sqrt() * 4.0 * (-24.0f64).exp();
        let got = q.value.real().to_f64();
        assert!(got > 0.0, "sign must be positive, got {got}");
        assert!(
            (got / predicted - 1.0).abs() < 0.5,
            "ratio to saddle estimate {}",
            got / predicted
        );
        assert!(q.value.imag().to_f64().abs() < 1e-20 * got);
    }

    #[test]
    fn wrapped_and_direct_tails_agree_where_both_converge() {
        let ctx = ctx();
        let params = KernelParams::new(0.5, 0.3).unwrap();
        // arg z = 1.35 < threshold: both the direct rotated tail and the wrap
        // construction are valid; equality pins the deformation class.
        let (az, a) = (1.3f64, 1.35f64);
        let z = c64(&ctx, az * a.cos(), az * a.sin());
        let zc = z.clone();
        let direct = q_path(1, az, a, params.tau, &ctx, false).unwrap();
        let wrapped = q_path(1, az, a, params.tau, &ctx, true).unwrap();
        let v1 = q_deriv_on_path(&direct, &zc, 0, &params, &ctx).unwrap();
        let v2 = q_deriv_on_path(&wrapped, &zc, 0, &params, &ctx).unwrap();
        assert!(rel_diff(&v1, &v2) < 1e-15, "q_1 classes differ: {}", rel_diff(&v1, &v2));

        let (az, a) = (1.3f64, -1.35f64);
        let z2 = c64(&ctx, az * a.cos(), az * a.sin());
        let direct = q_path(2, az, a, params.tau, &ctx, false).unwrap();
        let wrapped = q_path(2, az, a, params.tau, &ctx, true).unwrap();
        let v1 = q_deriv_on_path(&direct, &z2, 0, &params, &ctx).unwrap();
        let v2 = q_deriv_on_path(&wrapped, &z2, 0, &params, &ctx).unwrap();
        assert!(rel_diff(&v1, &v2) < 1e-15, "q_2 classes differ: {}", rel_diff(&v1, &v2));
    }

    #[test]
    fn evaluation_rejects_cut_and_origin() {
        let ctx = ctx();
        let params = KernelParams::new(0.5, 0.0).unwrap();
        let on_cut = c64(&ctx, -1.0, 0.0);
        assert!(matches!(q_j(1, &on_cut, &params, &ctx), Err(Error::DomainError(_))));
        let near_zero = c64(&ctx, 1e-9, 0.0);
        assert!(matches!(q_j(1, &near_zero, &params, &ctx), Err(Error::DomainError(_))));
        let lower_left = c64(&ctx, -0.3, -1.0);
        assert!(matches!(r_k(1, &lower_left, &params, &ctx), Err(Error::DomainError(_))));
        let upper_left = c64(&ctx, -0.3, 1.0);
        assert!(matches!(r_k(2, &upper_left, &params, &ctx), Err(Error::DomainError(_))));
        assert!(KernelParams::new(-1.0, 0.0).is_err());
        assert!(matches!(q_j(4, &c64(&ctx, 1.0, 0.0), &params, &ctx), Err(Error::InvalidInput(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn operator_row_is_linear(re1 in -2.0f64..2.0, im1 in -2.0f64..2.0,
                                  re2 in -2.0f64..2.0, im2 in -2.0f64..2.0,
                                  beta in -0.9f64..2.5, tau in -1.0f64..1.0) {
            let ctx = PrecisionContext::with_bits(128);
            let params = KernelParams::new(beta, tau).unwrap();
            let z = Complex::with_val(ctx.bits, (0.9, 0.4));
            let t1 = SolutionTriple {
                value: Complex::with_val(ctx.bits, (re1, im1)),
                d1: Complex::with_val(ctx.bits, (im1, re2)),
                d2: Complex::with_val(ctx.bits, (re2, im2)),
            };
            let t2 = SolutionTriple {
                value: Complex::with_val(ctx.bits, (re2, im2)),
                d1: Complex::with_val(ctx.bits, (re1, im2)),
                d2: Complex::with_val(ctx.bits, (im1, re1)),
            };
            let sum = SolutionTriple {
                value: t1.value.clone() + &t2.value,
                d1: t1.d1.clone() + &t2.d1,
                d2: t1.d2.clone() + &t2.d2,
            };
            let a = apply_b_operators(&t1, &z, &params);
            let b = apply_b_operators(&t2, &z, &params);
            let s = apply_b_operators(&sum, &z, &params);
            for i in 0..3 {
                let joined = Complex::with_val(ctx.bits, &a[i] + &b[i]);
                let d = Complex::with_val(ctx.bits, &s[i] - &joined);
                let dev = Float::with_val(64, d.abs_ref()).to_f64();
                let scale = Float::with_val(64, joined.abs_ref()).to_f64().max(1.0);
                prop_assert!(dev / scale < 1e-30);
            }
        }
    }
}
