//! The sectorial model matrix Psi(z; tau) built from the ODE solutions.
//!
//! The plane is cut by six rays at `arg z = 0, +-pi/4, +-3pi/4, pi` into six
//! open sectors, numbered I = (0, pi/4), II = (pi/4, 3pi/4), III = (3pi/4, pi)
//! and their mirror images IV, V, VI in the lower half-plane.  In each sector
//! the 3x3 matrix Psi has rows (value, first, second derivative) and columns
//! that are fixed linear combinations of the solutions `q_1, q_2, q_3` of the
//! third-order equation, e.g. in sector I the columns are
//!
//! ```text
//! e^{2 beta pi i} (q_1, q_1', q_1'')^T,  e^{beta pi i} (q_3, ...)^T,  (q_2, ...)^T.
//! ```
//!
//! Writing Q(z) for the matrix with columns (q_j, q_j', q_j'')^T, every sector
//! value is `Psi = Q C` with a constant combination matrix C per sector, stored
//! here once and shared by [`psi`] and [`psi_inverse`].
//!
//! Across each ray the boundary values satisfy `Psi_+ = Psi_- J` with the
//! constant jump matrices returned by [`jump_matrix`]; the `+` side is the left
//! side when every ray is traversed in the direction of increasing real part.
//! Boundary values are obtained by Richardson extrapolation in the angular
//! offset, never by on-ray evaluation.
//!
//! The inverse is assembled from the adjoint solutions: the matrix R with rows
//! `(B_0 r_k, B_1 r_k, B_2 r_k)` satisfies `R Q = I` because the bilinear
//! concomitant pairs the families as `delta_{jk}`, so `Psi^{-1} = C^{-1} R`.
//! The adjoint family is only computable for `|arg z| < 1.3` (sector limits of
//! `r_1, r_2`), which restricts [`psi_inverse`] to that wedge.
//!
//! As `z -> infinity` at fixed tau,
//!
//! ```text
//! Psi(z) = sqrt(2 pi / 3) e^{tau^2/6} z^{beta/3} diag(z^{1/3}, 1, z^{-1/3})
//!          L_pm (I + O(z^{-1/3})) B_pm e^{Theta(z)},
//! ```
//!
//! with constant frames `L_pm`, `B_pm` per half-plane, and `Theta` diagonal
//! with entries `theta_k = -(3/2) omega^k z^{2/3} - tau omega^{2k} z^{1/3}`,
//! `omega = e^{2 pi i/3}`, arranged `(theta_1, theta_3, theta_2)` in the upper
//! half-plane and `(theta_2, theta_3, theta_1)` in the lower.
//! [`check_asymptotics`] inverts the prefactor from the left and reports the
//! deviation from the identity, which must decay like `z^{-1/3}`.

use crate::error::{Error, Result};
use crate::ode::{self, KernelParams};
use crate::precision::{pi, PrecisionContext};
use rug::ops::NegAssign;
use rug::{Complex, Float};

/// 3x3 complex matrix in row-major layout.
pub type Mat3 = [[Complex; 3]; 3];

/// The six open sectors cut by the jump rays.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sector {
    I,
    II,
    III,
    IV,
    V,
    VI,
}

impl Sector {
    /// Classify `arg` (in `(-pi, pi]`) into a sector; a point within 1e-12 of
    /// a ray is reported as [`Error::OnContour`].
    pub fn from_arg(arg: f64) -> Result<Sector> {
        const GUARD: f64 = 1e-12;
        let pi4 = std::f64::consts::FRAC_PI_4;
        for k in [-3.0f64, -1.0, 0.0, 1.0, 3.0, 4.0, -4.0] {
            if (arg - k * pi4).abs() < GUARD {
                return Err(Error::OnContour { arg_z: arg });
            }
        }
        let s = if arg > 0.0 && arg < pi4 {
            Sector::I
        } else if arg > pi4 && arg < 3.0 * pi4 {
            Sector::II
        } else if arg > 3.0 * pi4 {
            Sector::III
        } else if arg < -3.0 * pi4 {
            Sector::IV
        } else if arg < -pi4 {
            Sector::V
        } else {
            Sector::VI
        };
        Ok(s)
    }

    pub fn label(self) -> &'static str {
        match self {
            Sector::I => "I",
            Sector::II => "II",
            Sector::III => "III",
            Sector::IV => "IV",
            Sector::V => "V",
            Sector::VI => "VI",
        }
    }
}

/// The six jump rays, named by their angle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ray {
    Zero,
    QuarterPi,
    ThreeQuarterPi,
    Pi,
    MinusThreeQuarterPi,
    MinusQuarterPi,
}

/// Side of a ray: `Plus` is the left side when the ray is traversed in the
/// direction of increasing real part.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

impl Ray {
    pub const ALL: [Ray; 6] = [
        Ray::Zero,
        Ray::QuarterPi,
        Ray::ThreeQuarterPi,
        Ray::Pi,
        Ray::MinusThreeQuarterPi,
        Ray::MinusQuarterPi,
    ];

    /// Angle as a multiple of pi/4.
    fn quarter_turns(self) -> i32 {
        match self {
            Ray::Zero => 0,
            Ray::QuarterPi => 1,
            Ray::ThreeQuarterPi => 3,
            Ray::Pi => 4,
            Ray::MinusThreeQuarterPi => -3,
            Ray::MinusQuarterPi => -1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Ray::Zero => "0",
            Ray::QuarterPi => "pi/4",
            Ray::ThreeQuarterPi => "3pi/4",
            Ray::Pi => "pi",
            Ray::MinusThreeQuarterPi => "-3pi/4",
            Ray::MinusQuarterPi => "-pi/4",
        }
    }

    /// The sector whose boundary value is the `+` side of this ray, and the
    /// angular direction (sign) leading into it.
    fn plus_sector(self) -> (Sector, f64) {
        match self {
            Ray::Zero => (Sector::I, 1.0),
            Ray::QuarterPi => (Sector::II, 1.0),
            Ray::ThreeQuarterPi => (Sector::II, -1.0),
            Ray::Pi => (Sector::III, -1.0),
            Ray::MinusThreeQuarterPi => (Sector::IV, -1.0),
            Ray::MinusQuarterPi => (Sector::VI, 1.0),
        }
    }

    fn minus_sector(self) -> (Sector, f64) {
        match self {
            Ray::Zero => (Sector::VI, -1.0),
            Ray::QuarterPi => (Sector::I, -1.0),
            Ray::ThreeQuarterPi => (Sector::III, 1.0),
            Ray::Pi => (Sector::IV, 1.0),
            Ray::MinusThreeQuarterPi => (Sector::V, 1.0),
            Ray::MinusQuarterPi => (Sector::V, -1.0),
        }
    }
}

/// Sector value of the model matrix.
#[derive(Clone, Debug)]
pub struct PsiValue {
    pub matrix: Mat3,
    pub sector: Sector,
}

fn zero_m(prec: u32) -> Mat3 {
    std::array::from_fn(|_| std::array::from_fn(|_| Complex::new(prec)))
}

fn identity_m(prec: u32) -> Mat3 {
    let mut m = zero_m(prec);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Complex::with_val(prec, 1);
    }
    m
}

pub(crate) fn mat_mul(a: &Mat3, b: &Mat3, prec: u32) -> Mat3 {
    let mut out = zero_m(prec);
    for i in 0..3 {
        for j in 0..3 {
            for (k, bk) in b.iter().enumerate() {
                let mut term = a[i][k].clone();
                term *= &bk[j];
                out[i][j] += &term;
            }
        }
    }
    out
}

/// Largest entry modulus, as f64.
fn max_norm(m: &Mat3) -> f64 {
    let mut best = 0.0f64;
    for row in m.iter() {
        for e in row.iter() {
            let a = Float::with_val(64, e.abs_ref()).to_f64();
            if a > best {
                best = a;
            }
        }
    }
    best
}

fn mat_diff_norm(a: &Mat3, b: &Mat3, prec: u32) -> f64 {
    let mut best = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let d = Complex::with_val(prec, &a[i][j] - &b[i][j]);
            let v = Float::with_val(64, d.abs_ref()).to_f64();
            if v > best {
                best = v;
            }
        }
    }
    best
}

/// Closed-form inverse of a 3x3 matrix via the adjugate.  Used only for the
/// constant matrices (C, L) whose determinants are exact unit-scale numbers.
pub(crate) fn adjugate_inverse(m: &Mat3, prec: u32) -> Mat3 {
    let minor = |r0: usize, c0: usize, r1: usize, c1: usize| -> Complex {
        let mut p = m[r0][c0].clone();
        p *= &m[r1][c1];
        let mut q = m[r0][c1].clone();
        q *= &m[r1][c0];
        p -= &q;
        p
    };
    let mut cof = zero_m(prec);
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = match i {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let (c0, c1) = match j {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let mut v = minor(r0, c0, r1, c1);
            if (i + j) % 2 == 1 {
                v.neg_assign();
            }
            cof[i][j] = v;
        }
    }
    let mut det = Complex::new(prec);
    for k in 0..3 {
        let mut term = m[0][k].clone();
        term *= &cof[0][k];
        det += &term;
    }
    let mut out = zero_m(prec);
    for i in 0..3 {
        for j in 0..3 {
            let mut v = cof[j][i].clone();
            v /= &det;
            out[i][j] = v;
        }
    }
    out
}

/// The combination matrix C of the sector, with `C[j][c]` the coefficient of
/// `q_{j+1}` in column `c` of Psi.  Single source of truth for [`psi`],
/// [`psi_inverse`] and the kernel assembly.
pub(crate) fn connection_matrix(sector: Sector, params: &KernelParams, prec: u32) -> Mat3 {
    let e1 = ode::unit_phase(prec, params.beta);
    let e2 = ode::unit_phase(prec, 2.0 * params.beta);
    let one = Complex::with_val(prec, 1);
    let mut m = zero_m(prec);
    let neg = |c: &Complex| {
        let mut v = c.clone();
        v.neg_assign();
        v
    };
    match sector {
        Sector::I => {
            m[0][0] = e2;
            m[1][2] = one;
            m[2][1] = e1;
        }
        Sector::II => {
            m[0][0] = e2;
            m[1][0] = one.clone();
            m[1][2] = one;
            m[2][1] = e1;
        }
        Sector::III => {
            m[0][0] = e2.clone();
            m[1][0] = one.clone();
            m[1][2] = one;
            m[2][0] = neg(&e2);
            m[2][1] = e1;
        }
        Sector::IV => {
            m[0][0] = e2.clone();
            m[0][2] = neg(&e2);
            m[1][0] = one;
            m[2][0] = Complex::with_val(prec, 1);
            m[2][1] = e1;
        }
        Sector::V => {
            m[0][0] = e2.clone();
            m[0][2] = neg(&e2);
            m[1][0] = one;
            m[2][1] = e1;
        }
        Sector::VI => {
            m[0][2] = neg(&e2);
            m[1][0] = one;
            m[2][1] = e1;
        }
    }
    m
}

/// `C^{-1}` for the sector, from the same stored C.
pub(crate) fn c_inverse(sector: Sector, params: &KernelParams, prec: u32) -> Mat3 {
    adjugate_inverse(&connection_matrix(sector, params, prec), prec)
}

/// The constant jump matrix J of the ray, in `Psi_+ = Psi_- J`.
pub fn jump_matrix(ray: Ray, params: &KernelParams, prec: u32) -> Mat3 {
    let e1 = ode::unit_phase(prec, params.beta);
    let e1m = ode::unit_phase(prec, -params.beta);
    let one = || Complex::with_val(prec, 1);
    let mut m = zero_m(prec);
    match ray {
        Ray::Zero => {
            m[0][2] = one();
            m[1][1] = one();
            m[2][0] = -one();
        }
        Ray::QuarterPi | Ray::MinusQuarterPi => {
            m[0][0] = one();
            m[1][1] = one();
            m[2][0] = one();
            m[2][2] = one();
        }
        Ray::ThreeQuarterPi => {
            m[0][0] = one();
            m[1][0] = e1;
            m[1][1] = one();
            m[2][2] = one();
        }
        Ray::MinusThreeQuarterPi => {
            m[0][0] = one();
            m[1][0] = e1m;
            m[1][1] = one();
            m[2][2] = one();
        }
        Ray::Pi => {
            m[0][1] = e1.clone();
            m[1][0] = -e1;
            m[2][2] = one();
        }
    }
    m
}

/// Solution matrix Q(z) with columns `(q_j, q_j', q_j'')^T`, j = 1, 2, 3.
fn q_matrix(z: &Complex, params: &KernelParams, ctx: &PrecisionContext) -> Result<Mat3> {
    let mut q = zero_m(ctx.bits);
    for j in 1..=3u8 {
        let t = ode::q_j(j, z, params, ctx)?;
        let c = (j - 1) as usize;
        q[0][c] = t.value;
        q[1][c] = t.d1;
        q[2][c] = t.d2;
    }
    Ok(q)
}

/// Evaluate Psi at `z` off the jump rays.
pub fn psi(z: &Complex, params: &KernelParams, ctx: &PrecisionContext) -> Result<PsiValue> {
    let arg = Float::with_val(64, z.arg_ref()).to_f64();
    let sector = Sector::from_arg(arg)?;
    let q = q_matrix(z, params, ctx)?;
    let c = connection_matrix(sector, params, ctx.bits);
    Ok(PsiValue {
        matrix: mat_mul(&q, &c, ctx.bits),
        sector,
    })
}

/// Boundary value of Psi on a jump ray from the given side, by Richardson
/// extrapolation in the angular offset (1e-5 and 1e-6 radians).
pub fn psi_boundary(
    ray: Ray,
    side: Side,
    radius: f64,
    params: &KernelParams,
    ctx: &PrecisionContext,
) -> Result<PsiValue> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidInput(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let (sector, sign) = match side {
        Side::Plus => ray.plus_sector(),
        Side::Minus => ray.minus_sector(),
    };
    let prec = ctx.bits;
    let at_offset = |delta: f64| -> Result<Mat3> {
        let mut theta = pi(prec);
        theta *= ray.quarter_turns();
        theta /= 4u32;
        theta += Float::with_val(prec, sign * delta);
        let (s, c) = theta.sin_cos(Float::new(prec));
        let rho = Float::with_val(prec, radius);
        let mut re = c;
        re *= &rho;
        let mut im = s;
        im *= &rho;
        let z = Complex::with_val(prec, (re, im));
        let v = psi(&z, params, ctx)?;
        debug_assert_eq!(v.sector, sector);
        Ok(v.matrix)
    };
    let coarse = at_offset(1e-5)?;
    let fine = at_offset(1e-6)?;
    // Offsets in ratio 10 cancel the linear term: f(0) ~ (10 f(d/10) - f(d))/9.
    let mut matrix = zero_m(prec);
    for i in 0..3 {
        for j in 0..3 {
            let mut v = fine[i][j].clone();
            v *= 10u32;
            v -= &coarse[i][j];
            v /= 9u32;
            matrix[i][j] = v;
        }
    }
    Ok(PsiValue { matrix, sector })
}

/// Evaluate `Psi(z)^{-1}` from the adjoint rows, `C^{-1} R`, never by
/// numerical inversion of [`psi`].  Only available for `|arg z| < 1.3`, where
/// all three adjoint solutions can be computed.
pub fn psi_inverse(z: &Complex, params: &KernelParams, ctx: &PrecisionContext) -> Result<Mat3> {
    let arg = Float::with_val(64, z.arg_ref()).to_f64();
    let sector = Sector::from_arg(arg)?;
    if arg.abs() >= ode::R_SECTOR_LIMIT {
        return Err(Error::DomainError(format!(
            "the inverse needs all three adjoint solutions, which only exist for |arg z| < {}, got {arg}",
            ode::R_SECTOR_LIMIT
        )));
    }
    let prec = ctx.bits;
    let zc = Complex::with_val(prec, z);
    let mut r_rows = zero_m(prec);
    for k in 1..=3u8 {
        let t = ode::r_k(k, z, params, ctx)?;
        r_rows[(k - 1) as usize] = ode::apply_b_operators(&t, &zc, params);
    }
    let cinv = c_inverse(sector, params, prec);
    Ok(mat_mul(&cinv, &r_rows, prec))
}

/// The constant frames of the large-`z` expansion.
#[derive(Clone, Debug)]
pub struct AsymptoticFrame {
    pub l_plus: Mat3,
    pub l_minus: Mat3,
    pub b_plus: Mat3,
    pub b_minus: Mat3,
    pub omega: Complex,
}

impl AsymptoticFrame {
    pub fn new(params: &KernelParams, prec: u32) -> AsymptoticFrame {
        let omega = ode::unit_phase_scaled(prec, 2.0, 3);
        let mut omega2 = omega.clone();
        omega2 *= &omega;
        let one = || Complex::with_val(prec, 1);
        let neg = |c: &Complex| {
            let mut v = c.clone();
            v.neg_assign();
            v
        };
        let l_plus: Mat3 = [
            [neg(&omega2), one(), omega.clone()],
            [one(), -one(), -one()],
            [neg(&omega), one(), omega2.clone()],
        ];
        let l_minus: Mat3 = [
            [omega.clone(), one(), omega2.clone()],
            [-one(), -one(), -one()],
            [omega2.clone(), one(), omega.clone()],
        ];
        let mut b_plus = zero_m(prec);
        b_plus[0][0] = ode::unit_phase_scaled(prec, params.beta, 3);
        b_plus[1][1] = one();
        b_plus[2][2] = ode::unit_phase_scaled(prec, -params.beta, 3);
        let mut b_minus = zero_m(prec);
        b_minus[0][0] = ode::unit_phase_scaled(prec, -params.beta, 3);
        b_minus[1][1] = one();
        b_minus[2][2] = ode::unit_phase_scaled(prec, params.beta, 3);
        AsymptoticFrame {
            l_plus,
            l_minus,
            b_plus,
            b_minus,
            omega,
        }
    }
}

/// Principal-branch power `z^p` for real `p`.
fn pow_principal(z: &Complex, p: &Float, prec: u32) -> Complex {
    let mut ln = Complex::with_val(prec, z.ln_ref());
    ln *= p;
    ln.exp()
}

/// The phase exponents `theta_k(z) = -(3/2) omega^k z^{2/3} - tau omega^{2k}
/// z^{1/3}`, k = 1, 2, 3, with principal fractional powers.
pub fn thetas(z: &Complex, params: &KernelParams, prec: u32) -> [Complex; 3] {
    let omega = ode::unit_phase_scaled(prec, 2.0, 3);
    let tau = Float::with_val(prec, params.tau);
    let two_thirds = Float::with_val(prec, 2) / 3u32;
    let one_third = Float::with_val(prec, 1) / 3u32;
    let z23 = pow_principal(z, &two_thirds, prec);
    let z13 = pow_principal(z, &one_third, prec);
    std::array::from_fn(|i| {
        let k = (i + 1) as u32;
        let mut wk = Complex::with_val(prec, 1);
        for _ in 0..k {
            wk *= &omega;
        }
        let mut w2k = wk.clone();
        w2k *= &wk;
        let mut first = wk;
        first *= &z23;
        first *= -1.5f64;
        let mut second = w2k;
        second *= &z13;
        second *= &tau;
        first -= &second;
        first
    })
}

/// Deviation of Psi from its large-`z` expansion along one direction.
///
/// For each radius the returned number is the largest entry of
///
/// ```text
/// z^{-beta/3} L_pm^{-1} diag(z^{-1/3}, 1, z^{1/3}) Psi(z) e^{-Theta} B_pm^{-1}
///   / (sqrt(2 pi/3) e^{tau^2/6})  -  I,
/// ```
///
/// which the expansion bounds by `O(z^{-1/3})`.  The direction must stay off
/// the jump rays; radii of a few hundred consume working precision through
/// the growing phases, so give a context of at least 512 bits there.
pub fn check_asymptotics(
    radii: &[f64],
    direction: f64,
    params: &KernelParams,
    ctx: &PrecisionContext,
) -> Result<Vec<f64>> {
    Sector::from_arg(direction)?;
    let prec = ctx.bits;
    let frame = AsymptoticFrame::new(params, prec);
    let upper = direction > 0.0;
    let l_inv = adjugate_inverse(if upper { &frame.l_plus } else { &frame.l_minus }, prec);
    let b = if upper { &frame.b_plus } else { &frame.b_minus };
    let ident = identity_m(prec);
    let mut out = Vec::with_capacity(radii.len());
    for &rho in radii {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidInput(format!("radius must be positive, got {rho}")));
        }
        let theta_dir = Float::with_val(prec, direction);
        let (s, c) = theta_dir.sin_cos(Float::new(prec));
        let mut re = c;
        re *= Float::with_val(prec, rho);
        let mut im = s;
        im *= Float::with_val(prec, rho);
        let z = Complex::with_val(prec, (re, im));
        let mut m = psi(&z, params, ctx)?.matrix;
        let th = thetas(&z, params, prec);
        let slots: [&Complex; 3] = if upper {
            [&th[0], &th[2], &th[1]]
        } else {
            [&th[1], &th[2], &th[0]]
        };
        // Right factors e^{-Theta} and B^{-1} scale columns; B is diagonal
        // unimodular so its inverse entries are the conjugates.
        for j in 0..3 {
            let mut e = slots[j].clone();
            e.neg_assign();
            let e = e.exp();
            let binv = {
                let re = Float::with_val(prec, b[j][j].real());
                let mut im = Float::with_val(prec, b[j][j].imag());
                im.neg_assign();
                Complex::with_val(prec, (re, im))
            };
            for i in 0..3 {
                m[i][j] *= &e;
                m[i][j] *= &binv;
            }
        }
        // Left factor diag(z^{-1/3}, 1, z^{1/3}) scales rows.
        let one_third = Float::with_val(prec, 1) / 3u32;
        let z13 = pow_principal(&z, &one_third, prec);
        for j in 0..3 {
            m[0][j] /= &z13;
            m[2][j] *= &z13;
        }
        let mut m = mat_mul(&l_inv, &m, prec);
        // Scalar prefactor 1 / (sqrt(2 pi/3) e^{tau^2/6} z^{beta/3}).
        let mut pref = pi(prec);
        pref *= 2u32;
        pref /= 3u32;
        pref.sqrt_mut();
        let mut tausq = Float::with_val(prec, params.tau);
        tausq.square_mut();
        tausq /= 6u32;
        pref *= tausq.exp();
        let beta_third = Float::with_val(prec, params.beta) / 3u32;
        let mut scale = pow_principal(&z, &beta_third, prec);
        scale *= &pref;
        scale.recip_mut();
        for row in m.iter_mut() {
            for e in row.iter_mut() {
                *e *= &scale;
            }
        }
        out.push(mat_diff_norm(&m, &ident, prec));
    }
    Ok(out)
}

/// Relative jump defect `max |Psi_+ - Psi_- J| / max |Psi_-|` on one ray.
pub fn jump_defect(
    ray: Ray,
    radius: f64,
    params: &KernelParams,
    ctx: &PrecisionContext,
) -> Result<f64> {
    let plus = psi_boundary(ray, Side::Plus, radius, params, ctx)?;
    let minus = psi_boundary(ray, Side::Minus, radius, params, ctx)?;
    let j = jump_matrix(ray, params, ctx.bits);
    let prod = mat_mul(&minus.matrix, &j, ctx.bits);
    let scale = max_norm(&minus.matrix).max(1e-300);
    Ok(mat_diff_norm(&plus.matrix, &prod, ctx.bits) / scale)
}
