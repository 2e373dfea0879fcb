//! The critical kernel by three independent routes.
//!
//! Every route evaluates the same real kernel `K(x, y; tau)` at real nonzero
//! arguments.  The building blocks are the dual pair
//!
//! ```text
//! q0(x) = 1/(2 pi i) |x|^{beta+2} int_{G}  t^{-beta-3} e^{tau x/t - x^2/(2 t^2) + t} dt,
//! r0(y) = 1/(2 pi i) |y|^{-beta-1} int_{Gh} s^{beta}    e^{-tau y/s + y^2/(2 s^2) - s} ds,
//! ```
//!
//! where `G` is the clockwise loop from -infinity around the origin and back
//! and `Gh` the counterclockwise circle through 0 in the right half-plane,
//! both powers principal.  A derivative in the real argument raises the power
//! of the integration variable by one and lowers the power of the argument in
//! the prefactor, so one adaptive pass over the contour serves all orders.
//!
//! * [`kernel_pairing`] contracts the bilinear concomitant of the pair:
//!   `K = |y/x|^beta B[q0, r0](x, y) / (x - y)`.
//! * [`kernel_double`] evaluates a double contour integral over `G x Gh`
//!   whose denominator `x s - y t` is kept uniformly away from zero by
//!   scaling the two loop radii.
//! * [`kernel_psi`] sandwiches `Psi^{-1}(y) Psi(x)` between sign-dependent
//!   row and column vectors and contracts the product down to cross
//!   concomitants `B[q_j, r_k]` of the canonical solution bases.
//!
//! Agreement of the three is the library's main internal consistency check:
//! beyond the definitions above they share no machinery.

use std::cell::RefCell;
use std::fmt;

use rug::float::Special;
use rug::ops::{NegAssign, Pow};
use rug::{Complex, Float};

use crate::contours::{gamma0, gamma0_hat_with_radius, zero_c, TruncationPolicy};
use crate::error::{Error, Result};
use crate::ode::{self, KernelParams, SolutionTriple};
use crate::precision::{integrate_path_multi, pi, PrecisionContext};
use crate::psi::{self, Sector};

/// Which of the three independent evaluation routes produced a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelMethod {
    Pairing,
    Double,
    Psi,
}

impl fmt::Display for KernelMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelMethod::Pairing => "pairing",
            KernelMethod::Double => "double",
            KernelMethod::Psi => "psi",
        })
    }
}

/// One kernel value with its accounting: the reported real part, the
/// magnitude of the imaginary part discarded on the way (the contour
/// integrals are complex, the kernel is real), and an absolute error
/// estimate.  A healthy evaluation keeps `imag_residual` within a factor
/// 1000 of `abs_error_estimate`.
#[derive(Clone, Debug)]
pub struct KernelEvaluation {
    pub value: Float,
    pub imag_residual: Float,
    pub method: KernelMethod,
    pub abs_error_estimate: Float,
}

fn finish(v: Complex, err: Float, method: KernelMethod) -> KernelEvaluation {
    let (re, im) = v.into_real_imag();
    KernelEvaluation {
        value: re,
        imag_residual: im.abs(),
        method,
        abs_error_estimate: err,
    }
}

/// `-i / (2 pi)`, the reciprocal of `2 pi i`.
fn inv_two_pi_i(prec: u32) -> Complex {
    let mut factor = Complex::with_val(prec, (0, -1));
    let mut two_pi = pi(prec);
    two_pi *= 2u32;
    factor /= &two_pi;
    factor
}

/// Loop integrals `int_G t^{-beta-3+n} e^{tau x/t - x^2/(2 t^2) + t} dt` for
/// `n = 0..N` in one shared pass, finished with the real prefactors
/// `1/(2 pi i) x^{2-n} |x|^beta` of the derivative ladder.
fn q0_orders_err<const N: usize>(
    x: f64,
    params: &KernelParams,
    ctx: &PrecisionContext,
) -> Result<([Complex; N], [Float; N])> {
    let prec = ctx.bits;
    let policy = TruncationPolicy::for_quad_tol(ctx.quad_tol);
    let path = gamma0(x, params.tau, params.beta, &policy, prec);
    let mut expo0 = Float::with_val(prec, params.beta);
    expo0 = -expo0 - 3u32;
    let mut xtau = Float::with_val(prec, params.tau);
    xtau *= x;
    let mut x2h = Float::with_val(prec, x);
    x2h.square_mut();
    x2h /= 2u32;
    let f = |t: &Complex| -> [Complex; N] {
        let mut out: [Complex; N] = std::array::from_fn(|_| zero_c(prec));
        if t.is_zero() {
            return out;
        }
        let mut tinv = t.clone();
        tinv.recip_mut();
        // full exponent expo0 ln t + tau x / t - x^2/(2 t^2) + t, one exp
        let mut e = Complex::with_val(prec, t.ln_ref());
        e *= &expo0;
        let mut term = tinv.clone();
        term *= &xtau;
        e += &term;
        let mut t2 = tinv;
        t2.square_mut();
        t2 *= &x2h;
        e -= &t2;
        e += t;
        out[0] = e.exp();
        for n in 1..N {
            let mut next = out[n - 1].clone();
            next *= t;
            out[n] = next;
        }
        out
    };
    let m = integrate_path_multi(f, &path, ctx)?;
    let mut values = m.values;
    let mut errors = m.abs_error_estimates;
    let beta_f = Float::with_val(prec, params.beta);
    let ax = Float::with_val(prec, x.abs());
    let axb = Float::with_val(prec, (&ax).pow(&beta_f));
    let xf = Float::with_val(prec, x);
    let factor = inv_two_pi_i(prec);
    let mut two_pi = pi(prec);
    two_pi *= 2u32;
    for n in 0..N {
        let mut real = Float::with_val(prec, (&xf).pow(2 - n as i32));
        real *= &axb;
        values[n] *= &real;
        values[n] *= &factor;
        real.abs_mut();
        real /= &two_pi;
        errors[n] *= &real;
    }
    Ok((values, errors))
}

/// Circle integrals `int_Gh s^{beta+n} e^{-tau y/s + y^2/(2 s^2) - s} ds`
/// for `n = 0..N` in one shared pass, finished with the prefactors
/// `(-1)^n/(2 pi i) y^{2-n} |y|^{-beta-3}`.
fn r0_orders_err<const N: usize>(
    y: f64,
    params: &KernelParams,
    ctx: &PrecisionContext,
) -> Result<([Complex; N], [Float; N])> {
    let prec = ctx.bits;
    let rho_hat = y.abs().sqrt().max(1.0);
    let path = gamma0_hat_with_radius(rho_hat, prec);
    let beta_f = Float::with_val(prec, params.beta);
    let mut ytau = Float::with_val(prec, params.tau);
    ytau *= y;
    let mut y2h = Float::with_val(prec, y);
    y2h.square_mut();
    y2h /= 2u32;
    let f = |s: &Complex| -> [Complex; N] {
        let mut out: [Complex; N] = std::array::from_fn(|_| zero_c(prec));
        if s.is_zero() {
            // endpoint on the circle: e^{y^2/(2 s^2)} -> 0 along the
            // vertical tangent kills every power of s
            return out;
        }
        let mut sinv = s.clone();
        sinv.recip_mut();
        let mut e = Complex::with_val(prec, s.ln_ref());
        e *= &beta_f;
        let mut term = sinv.clone();
        term *= &ytau;
        e -= &term;
        let mut s2 = sinv;
        s2.square_mut();
        s2 *= &y2h;
        e += &s2;
        e -= s;
        out[0] = e.exp();
        for n in 1..N {
            let mut next = out[n - 1].clone();
            next *= s;
            out[n] = next;
        }
        out
    };
    let m = integrate_path_multi(f, &path, ctx)?;
    let mut values = m.values;
    let mut errors = m.abs_error_estimates;
    let mut mexp = Float::with_val(prec, params.beta);
    mexp = -mexp - 3u32;
    let ay = Float::with_val(prec, y.abs());
    let ayb = Float::with_val(prec, (&ay).pow(&mexp));
    let yf = Float::with_val(prec, y);
    let factor = inv_two_pi_i(prec);
    let mut two_pi = pi(prec);
    two_pi *= 2u32;
    for n in 0..N {
        let mut real = Float::with_val(prec, (&yf).pow(2 - n as i32));
        real *= &ayb;
        values[n] *= &real;
        values[n] *= &factor;
        if n % 2 == 1 {
            values[n].neg_assign();
        }
        real.abs_mut();
        real /= &two_pi;
        errors[n] *= &real;
    }
    Ok((values, errors))
}

/// Derivative of order 0, 1, or 2 of the direct member of the dual pair at
/// real `x`.  The value vanishes like `|x|^{beta+2}` as `x -> 0`, so order 0
/// extends continuously by `q0(0) = 0` while higher orders do not extend.
pub fn q0(x: f64, order: u8, params: &KernelParams, ctx: &PrecisionContext) -> Result<Complex> {
    KernelParams::new(params.beta, params.tau)?;
    if order > 2 {
        return Err(Error::InvalidInput(format!(
            "q0 derivative order must be at most 2, got {order}"
        )));
    }
    if !x.is_finite() {
        return Err(Error::InvalidInput("x must be finite".into()));
    }
    if x == 0.0 {
        if order == 0 {
            return Ok(zero_c(ctx.bits));
        }
        return Err(Error::UndefinedDerivativeAtZero { order });
    }
    let (values, _) = q0_orders_err::<3>(x, params, ctx)?;
    Ok(values[order as usize].clone())
}

/// Derivative of order 0, 1, or 2 of the adjoint member of the dual pair at
/// real `y != 0`; the `|y|^{-beta-1}` prefactor leaves no continuous
/// extension to 0.
pub fn r0(y: f64, order: u8, params: &KernelParams, ctx: &PrecisionContext) -> Result<Complex> {
    KernelParams::new(params.beta, params.tau)?;
    if order > 2 {
        return Err(Error::InvalidInput(format!(
            "r0 derivative order must be at most 2, got {order}"
        )));
    }
    if !y.is_finite() {
        return Err(Error::InvalidInput("y must be finite".into()));
    }
    if y == 0.0 {
        return Err(Error::DomainError("r0 is undefined at y = 0".into()));
    }
    let (values, _) = r0_orders_err::<3>(y, params, ctx)?;
    Ok(values[order as usize].clone())
}

fn check_kernel_point(x: f64, y: f64) -> Result<()> {
    if !(x.is_finite() && y.is_finite()) {
        return Err(Error::InvalidInput("kernel arguments must be finite".into()));
    }
    if x == y {
        return Err(Error::CoincidentPoints);
    }
    if x == 0.0 || y == 0.0 {
        return Err(Error::DomainError(
            "kernel evaluation requires x != 0 and y != 0".into(),
        ));
    }
    Ok(())
}

/// `|y/x|^beta / (x - y)` at working precision.
fn pairing_prefactor(x: f64, y: f64, beta: f64, prec: u32) -> Float {
    let beta_f = Float::with_val(prec, beta);
    let mut ratio = Float::with_val(prec, y.abs());
    ratio /= Float::with_val(prec, x.abs());
    let mut p = Float::with_val(prec, (&ratio).pow(&beta_f));
    let mut dxy = Float::with_val(prec, x);
    dxy -= y;
    p /= &dxy;
    p
}

/// Worst-case errors of the concomitant coefficient row `(B_0 r, B_1 r,
/// B_2 r)(y)` from per-order errors of the adjoint triple.
fn b_row_errors(re: &[Float; 3], y: f64, params: &KernelParams, prec: u32) -> [Float; 3] {
    let ay = Float::with_val(prec, y.abs());
    let mut w0 = re[2].clone();
    w0 *= &ay;
    let mut t = re[1].clone();
    t *= params.beta + 2.0;
    w0 += &t;
    let mut t = re[0].clone();
    t *= params.tau.abs();
    w0 += &t;
    let mut w1 = re[1].clone();
    w1 *= &ay;
    let mut t = re[0].clone();
    t *= params.beta + 1.0;
    w1 += &t;
    let mut w2 = re[0].clone();
    w2 *= &ay;
    [w0, w1, w2]
}

/// `sum_m |w_m| qe_m + |q_m| we_m`: error of the contraction of a
/// coefficient row against a solution column, both carrying errors.
fn contraction_error(
    w: &[Complex; 3],
    we: &[Float; 3],
    q: &[Complex; 3],
    qe: &[Float; 3],
    prec: u32,
) -> Float {
    let mut err = Float::new(prec);
    for m in 0..3 {
        let mut t1 = Float::with_val(prec, w[m].abs_ref());
        t1 *= &qe[m];
        err += &t1;
        let mut t2 = Float::with_val(prec, q[m].abs_ref());
        t2 *= &we[m];
        err += &t2;
    }
    err
}

/// `K(x, y; tau)` by the concomitant pairing
/// `|y/x|^beta B[q0, r0](x, y) / (x - y)`.
pub fn kernel_pairing(
    x: f64,
    y: f64,
    params: &KernelParams,
    ctx: &PrecisionContext,
) -> Result<KernelEvaluation> {
    KernelParams::new(params.beta, params.tau)?;
    check_kernel_point(x, y)?;
    let prec = ctx.bits;
    let (q, qe) = q0_orders_err::<3>(x, params, ctx)?;
    let (r, re) = r0_orders_err::<3>(y, params, ctx)?;
    let rt = SolutionTriple {
        value: r[0].clone(),
        d1: r[1].clone(),
        d2: r[2].clone(),
    };
    let yc = Complex::with_val(prec, (y, 0.0));
    let w = ode::apply_b_operators(&rt, &yc, params);
    let we = b_row_errors(&re, y, params, prec);
    let mut b = Complex::new(prec);
    for m in 0..3 {
        let mut t = w[m].clone();
        t *= &q[m];
        b += &t;
    }
    let mut err = contraction_error(&w, &we, &q, &qe, prec);
    let pref = pairing_prefactor(x, y, params.beta, prec);
    b *= &pref;
    let mut apref = pref;
    apref.abs_mut();
    err *= &apref;
    Ok(finish(b, err, KernelMethod::Pairing))
}

/// `K(x, y; tau)` by the double contour integral
///
/// ```text
/// sign(y)/(2 pi i)^2 int_G int_Gh  s^beta / t^beta / (x s - y t)
///     e^{tau x/t - x^2/(2 t^2) + t} e^{-tau y/s + y^2/(2 s^2) - s} ds dt.
/// ```
///
/// The loop radius is `rho = max(1, |x|)`, so `|t| >= rho` everywhere, and
/// the circle radius is shrunk to `rho_hat <= |y| rho / (4 |x|)`, which
/// keeps `|x s - y t| >= |y| rho / 2` over the whole contour pair.  Any node
/// that still lands below half that bound aborts the evaluation.
pub fn kernel_double(
    x: f64,
    y: f64,
    params: &KernelParams,
    ctx: &PrecisionContext,
) -> Result<KernelEvaluation> {
    KernelParams::new(params.beta, params.tau)?;
    if !(x.is_finite() && y.is_finite()) {
        return Err(Error::InvalidInput("kernel arguments must be finite".into()));
    }
    if x == 0.0 || y == 0.0 {
        return Err(Error::DomainError(
            "kernel evaluation requires x != 0 and y != 0".into(),
        ));
    }
    let prec = ctx.bits;
    let policy = TruncationPolicy::for_quad_tol(ctx.quad_tol);
    let rho = x.abs().max(1.0);
    let rho_hat = y
        .abs()
        .sqrt()
        .max(1.0)
        .min(y.abs() * rho / (4.0 * x.abs()));
    let t_path = gamma0(x, params.tau, params.beta, &policy, prec);
    let s_path = gamma0_hat_with_radius(rho_hat, prec);
    let required = y.abs() * rho / 4.0;

    let neg_beta = Float::with_val(prec, -params.beta);
    let beta_f = Float::with_val(prec, params.beta);
    let mut xtau = Float::with_val(prec, params.tau);
    xtau *= x;
    let mut x2h = Float::with_val(prec, x);
    x2h.square_mut();
    x2h /= 2u32;
    let mut ytau = Float::with_val(prec, params.tau);
    ytau *= y;
    let mut y2h = Float::with_val(prec, y);
    y2h.square_mut();
    y2h /= 2u32;
    let xf = Float::with_val(prec, x);
    let yf = Float::with_val(prec, y);

    let inner_failure: RefCell<Option<Error>> = RefCell::new(None);
    let min_den: RefCell<Float> = RefCell::new(Float::with_val(prec, Special::Infinity));

    let outer = |t: &Complex| -> [Complex; 1] {
        if t.is_zero() || inner_failure.borrow().is_some() {
            return [zero_c(prec)];
        }
        let mut tinv = t.clone();
        tinv.recip_mut();
        let mut e = Complex::with_val(prec, t.ln_ref());
        e *= &neg_beta;
        let mut term = tinv.clone();
        term *= &xtau;
        e += &term;
        let mut t2 = tinv;
        t2.square_mut();
        t2 *= &x2h;
        e -= &t2;
        e += t;
        let of = e.exp();

        let inner = |s: &Complex| -> [Complex; 1] {
            if s.is_zero() {
                return [zero_c(prec)];
            }
            let mut den = s.clone();
            den *= &xf;
            let mut yt = t.clone();
            yt *= &yf;
            den -= &yt;
            {
                let aden = Float::with_val(prec, den.abs_ref());
                let mut md = min_den.borrow_mut();
                if aden < *md {
                    *md = aden;
                }
            }
            let mut sinv = s.clone();
            sinv.recip_mut();
            let mut e = Complex::with_val(prec, s.ln_ref());
            e *= &beta_f;
            let mut term = sinv.clone();
            term *= &ytau;
            e -= &term;
            let mut s2 = sinv;
            s2.square_mut();
            s2 *= &y2h;
            e += &s2;
            e -= s;
            let mut v = e.exp();
            v /= &den;
            [v]
        };
        match integrate_path_multi(inner, &s_path, ctx) {
            Ok(m) => {
                let mut v = m.values[0].clone();
                v *= &of;
                [v]
            }
            Err(e) => {
                *inner_failure.borrow_mut() = Some(e);
                [zero_c(prec)]
            }
        }
    };
    let m = integrate_path_multi(outer, &t_path, ctx)?;
    if let Some(e) = inner_failure.into_inner() {
        return Err(e);
    }
    let md = min_den.into_inner().to_f64();
    if !(md >= required) {
        return Err(Error::NearSingularDenominator {
            min_abs: md,
            required,
        });
    }
    // sign(y) / (2 pi i)^2 = -sign(y) / (4 pi^2)
    let mut pref = pi(prec);
    pref.square_mut();
    pref *= 4u32;
    pref.recip_mut();
    if y > 0.0 {
        pref.neg_assign();
    }
    let mut v = m.values[0].clone();
    v *= &pref;
    let mut err = m.abs_error_estimates[0].clone();
    let mut apref = pref;
    apref.abs_mut();
    err *= &apref;
    // inner integrals hold a relative target of quad_tol each; their
    // contribution is bounded through the outer mass by quad_tol (1 + |v|)
    let mut extra = Float::with_val(prec, ctx.quad_tol);
    let mut av = Float::with_val(prec, v.abs_ref());
    av += 1u32;
    extra *= &av;
    err += &extra;
    Ok(finish(v, err, KernelMethod::Double))
}

/// Left vector of the sandwich: `(-1, 0, 1)` for `y > 0` and
/// `(-e^{i pi beta}, 1, 0)` for `y < 0`, the choices whose contraction with
/// the adjoint rows reduces to the single function `r0` on each side.
fn row_vector(y: f64, params: &KernelParams, prec: u32) -> [Complex; 3] {
    let one = Complex::with_val(prec, 1);
    if y > 0.0 {
        let mut m1 = one.clone();
        m1.neg_assign();
        [m1, Complex::new(prec), one]
    } else {
        let mut m1 = ode::unit_phase(prec, params.beta);
        m1.neg_assign();
        [m1, one, Complex::new(prec)]
    }
}

/// Right vector: `(1, 0, 1)^T` for `x > 0` and `(e^{-i pi beta}, 1, 0)^T`
/// for `x < 0`, reducing the contraction with the solution columns to `q0`.
fn col_vector(x: f64, params: &KernelParams, prec: u32) -> [Complex; 3] {
    let one = Complex::with_val(prec, 1);
    if x > 0.0 {
        [one.clone(), Complex::new(prec), one]
    } else {
        [ode::unit_phase(prec, -params.beta), one, Complex::new(prec)]
    }
}

/// Sector whose closure holds the real point: I above the positive axis,
/// III above the negative axis (boundary values are taken from above).
fn sector_of(v: f64) -> Sector {
    if v > 0.0 {
        Sector::I
    } else {
        Sector::III
    }
}

/// `K(x, y; tau)` through the matrix parametrix: with `C` the sector
/// connection matrix of the closure containing the point,
///
/// ```text
/// K = |y/x|^beta / (2 pi i (x - y)) sum_{k,j} c_k d_j B[q_j, r_k](x, y),
/// c = row C^{-1}(y),   d = C(x) col,
/// ```
///
/// which is the row-vector / column-vector sandwich of `Psi^{-1}(y) Psi(x)`
/// written in the solution bases.  Coefficients below the rounding floor
/// `2^{-bits/2}` are dropped; the drop removes exactly the basis solutions
/// whose contours would be invalid at the boundary point, so each quadrant
/// needs only admissible evaluations.
pub fn kernel_psi(
    x: f64,
    y: f64,
    params: &KernelParams,
    ctx: &PrecisionContext,
) -> Result<KernelEvaluation> {
    KernelParams::new(params.beta, params.tau)?;
    check_kernel_point(x, y)?;
    let prec = ctx.bits;
    let row = row_vector(y, params, prec);
    let col = col_vector(x, params, prec);
    let cyi = psi::c_inverse(sector_of(y), params, prec);
    let cx = psi::connection_matrix(sector_of(x), params, prec);
    let mut c: [Complex; 3] = std::array::from_fn(|_| Complex::new(prec));
    for k in 0..3 {
        for i in 0..3 {
            let mut t = row[i].clone();
            t *= &cyi[i][k];
            c[k] += &t;
        }
    }
    let mut d: [Complex; 3] = std::array::from_fn(|_| Complex::new(prec));
    for j in 0..3 {
        for m in 0..3 {
            let mut t = cx[j][m].clone();
            t *= &col[m];
            d[j] += &t;
        }
    }
    let floor = Float::with_val(prec, Float::i_exp(1, -((prec / 2) as i32)));
    let active = |v: &Complex| Float::with_val(prec, v.abs_ref()) > floor;

    let xc = Complex::with_val(prec, (x, 0.0));
    let yc = Complex::with_val(prec, (y, 0.0));
    let mut qs: [Option<([Complex; 3], [Float; 3])>; 3] = std::array::from_fn(|_| None);
    for (j, slot) in qs.iter_mut().enumerate() {
        if active(&d[j]) {
            *slot = Some(ode::q_orders_err::<3>(j as u8 + 1, &xc, params, ctx)?);
        }
    }
    let mut rs: [Option<([Complex; 3], [Float; 3])>; 3] = std::array::from_fn(|_| None);
    for (k, slot) in rs.iter_mut().enumerate() {
        if active(&c[k]) {
            *slot = Some(ode::r_orders_err::<3>(k as u8 + 1, &yc, params, ctx)?);
        }
    }

    let mut total = Complex::new(prec);
    let mut err = Float::new(prec);
    for k in 0..3 {
        let Some((rv, re)) = &rs[k] else { continue };
        let rt = SolutionTriple {
            value: rv[0].clone(),
            d1: rv[1].clone(),
            d2: rv[2].clone(),
        };
        let w = ode::apply_b_operators(&rt, &yc, params);
        let we = b_row_errors(re, y, params, prec);
        for j in 0..3 {
            let Some((qv, qe)) = &qs[j] else { continue };
            let mut coef = c[k].clone();
            coef *= &d[j];
            let mut term = Complex::new(prec);
            for m in 0..3 {
                let mut t = w[m].clone();
                t *= &qv[m];
                term += &t;
            }
            term *= &coef;
            total += &term;
            let mut eterm = contraction_error(&w, &we, qv, qe, prec);
            let acoef = Float::with_val(prec, coef.abs_ref());
            eterm *= &acoef;
            err += &eterm;
        }
    }
    let rp = pairing_prefactor(x, y, params.beta, prec);
    let mut factor = inv_two_pi_i(prec);
    factor *= &rp;
    total *= &factor;
    let af = Float::with_val(prec, factor.abs_ref());
    err *= &af;
    Ok(finish(total, err, KernelMethod::Psi))
}
