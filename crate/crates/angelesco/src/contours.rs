//! Parametrized integration contours.
//!
//! The integral representations in this library run over a small zoo of
//! contours: an open Hankel-type loop around the negative axis, a closed
//! loop through the origin tangent to the imaginary axis, three contours
//! ending at the origin inside sectors where the integrand decays, three
//! adjoint-side contours, and six straight jump rays. Each is assembled
//! from line and elliptic-arc segments with an explicit traversal
//! orientation and a declared branch cut that the path must not cross
//! except possibly at the origin.

use crate::error::{Error, Result};
use rug::float::{Constant, Special};
use rug::ops::{CompleteRound, NegAssign};
use rug::{Complex, Float};
use serde::Serialize;

/// Ray on which the fractional power in the associated integrand is cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchCut {
    None,
    PositiveAxis,
    NegativeAxis,
}

/// Traversal direction relative to the stored segment order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Forward,
    Reversed,
}

/// One smooth piece of a contour, parametrized by u in [0, 1].
#[derive(Debug, Clone)]
pub enum Segment {
    /// Straight line from `a` to `b`.
    Line { a: Complex, b: Complex },
    /// Elliptic arc `center + (rx cos θ, ry sin θ)` with θ affine in u from
    /// `theta0` to `theta1`; `theta1 < theta0` traverses clockwise.
    Arc {
        center: Complex,
        rx: Float,
        ry: Float,
        theta0: Float,
        theta1: Float,
    },
    /// Complex quadratic `p0 + p1 u + p2 u^2`.
    Quad {
        p0: Complex,
        p1: Complex,
        p2: Complex,
    },
}

impl Segment {
    pub fn line(prec: u32, ax: f64, ay: f64, bx: f64, by: f64) -> Segment {
        Segment::Line {
            a: Complex::with_val(prec, (ax, ay)),
            b: Complex::with_val(prec, (bx, by)),
        }
    }

    pub fn arc(prec: u32, cx: f64, cy: f64, rx: f64, ry: f64, theta0: f64, theta1: f64) -> Segment {
        Segment::Arc {
            center: Complex::with_val(prec, (cx, cy)),
            rx: Float::with_val(prec, rx),
            ry: Float::with_val(prec, ry),
            theta0: Float::with_val(prec, theta0),
            theta1: Float::with_val(prec, theta1),
        }
    }

    /// Arc with angles `k0 π` and `k1 π`, built at full precision so that
    /// loops close and junctions with axis-aligned lines match to working
    /// precision, not to f64 precision.
    pub fn arc_pi(prec: u32, cx: f64, cy: f64, rx: f64, ry: f64, k0: f64, k1: f64) -> Segment {
        let pi = Float::with_val(prec, Constant::Pi);
        let mut t0 = pi.clone();
        t0 *= k0;
        let mut t1 = pi;
        t1 *= k1;
        Segment::Arc {
            center: Complex::with_val(prec, (cx, cy)),
            rx: Float::with_val(prec, rx),
            ry: Float::with_val(prec, ry),
            theta0: t0,
            theta1: t1,
        }
    }

    /// Point at parameter `u`, computed at the precision of `u`.
    pub fn point(&self, u: &Float) -> Complex {
        let prec = u.prec();
        match self {
            Segment::Line { a, b } => {
                let mut out = (b - a).complete((prec, prec));
                out *= u;
                out += a;
                out
            }
            Segment::Arc {
                center,
                rx,
                ry,
                theta0,
                theta1,
            } => {
                let mut theta = (theta1 - theta0).complete(prec);
                theta *= u;
                theta += theta0;
                let (s, c) = theta.sin_cos(Float::new(prec));
                let mut re = c;
                re *= rx;
                let mut im = s;
                im *= ry;
                let mut out = Complex::with_val(prec, (re, im));
                out += center;
                out
            }
            Segment::Quad { p0, p1, p2 } => {
                let mut out = (p2 * u).complete((prec, prec));
                out += p1;
                out *= u;
                out += p0;
                out
            }
        }
    }

    /// Derivative of `point` with respect to u.
    pub fn velocity(&self, u: &Float) -> Complex {
        let prec = u.prec();
        match self {
            Segment::Line { a, b } => (b - a).complete((prec, prec)),
            Segment::Arc {
                center: _,
                rx,
                ry,
                theta0,
                theta1,
            } => {
                let dt = (theta1 - theta0).complete(prec);
                let mut theta = dt.clone();
                theta *= u;
                theta += theta0;
                let (s, c) = theta.sin_cos(Float::new(prec));
                let mut re = s;
                re *= rx;
                re.neg_assign();
                re *= &dt;
                let mut im = c;
                im *= ry;
                im *= &dt;
                Complex::with_val(prec, (re, im))
            }
            Segment::Quad { p0: _, p1, p2 } => {
                let mut out = (p2 * u).complete((prec, prec));
                out *= 2u32;
                out += p1;
                out
            }
        }
    }

    fn endpoints_f64(&self) -> ((f64, f64), (f64, f64)) {
        let prec = 64;
        let zero = Float::with_val(prec, 0);
        let one = Float::with_val(prec, 1);
        let a = self.point(&zero);
        let b = self.point(&one);
        (
            (a.real().to_f64(), a.imag().to_f64()),
            (b.real().to_f64(), b.imag().to_f64()),
        )
    }
}

/// Where to cut infinite tails.
///
/// `tail_tol` bounds the modulus of the dropped tail integral; `decay_bound`
/// is a certified lower bound on the exponential decay rate of the integrand
/// family along the truncated rays.
#[derive(Debug, Clone)]
pub struct TruncationPolicy {
    pub tail_tol: f64,
    pub decay_bound: f64,
}

impl TruncationPolicy {
    /// Policy consistent with a quadrature tolerance: tails an order of
    /// magnitude below it.
    pub fn for_quad_tol(quad_tol: f64) -> TruncationPolicy {
        TruncationPolicy {
            tail_tol: quad_tol / 10.0,
            decay_bound: 1.0,
        }
    }

    /// Truncation length for a decay `exp(-rate * length)` starting from a
    /// prefactor bounded by `exp(head)`. The fixed margin of 40 covers
    /// algebraic prefactors relative to the scale of the whole integral.
    pub fn tail_length(&self, rate: f64, head: f64) -> f64 {
        let decay = self.decay_bound.min(rate).max(1e-8);
        (head.max(0.0) - self.tail_tol.ln() + 40.0) / decay
    }

    pub fn validate(&self, quad_tol: f64) -> Result<()> {
        if !(self.tail_tol > 0.0) || self.tail_tol > quad_tol / 10.0 {
            return Err(Error::InvalidInput(format!(
                "tail_tol {} must be positive and at most quad_tol/10 = {}",
                self.tail_tol,
                quad_tol / 10.0
            )));
        }
        if !(self.decay_bound > 0.0) {
            return Err(Error::InvalidInput(
                "decay_bound must be positive".to_string(),
            ));
        }
        Ok(())
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy::for_quad_tol(1e-20)
    }
}

/// A piecewise-smooth oriented contour.
#[derive(Debug, Clone)]
pub struct ContourPath {
    pub segments: Vec<Segment>,
    pub orientation: Orientation,
    pub branch_cut: BranchCut,
}

#[derive(Serialize)]
struct SegmentJson {
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    a: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    center: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rx: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ry: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<[[f64; 2]; 3]>,
}

impl ContourPath {
    pub fn new(segments: Vec<Segment>, branch_cut: BranchCut) -> ContourPath {
        ContourPath {
            segments,
            orientation: Orientation::Forward,
            branch_cut,
        }
    }

    /// Same point set, opposite traversal.
    pub fn reversed(&self) -> ContourPath {
        ContourPath {
            segments: self.segments.clone(),
            orientation: match self.orientation {
                Orientation::Forward => Orientation::Reversed,
                Orientation::Reversed => Orientation::Forward,
            },
            branch_cut: self.branch_cut,
        }
    }

    /// Polyline sample in traversal order, `n + 1` points per segment.
    pub fn sample(&self, n: usize) -> Vec<(f64, f64)> {
        let prec = 64;
        let mut pts = Vec::new();
        let mut push_seg = |seg: &Segment, rev: bool| {
            for k in 0..=n {
                let mut u = k as f64 / n as f64;
                if rev {
                    u = 1.0 - u;
                }
                let p = seg.point(&Float::with_val(prec, u));
                pts.push((p.real().to_f64(), p.imag().to_f64()));
            }
        };
        match self.orientation {
            Orientation::Forward => {
                for seg in &self.segments {
                    push_seg(seg, false);
                }
            }
            Orientation::Reversed => {
                for seg in self.segments.iter().rev() {
                    push_seg(seg, true);
                }
            }
        }
        pts
    }

    /// Structural JSON export with f64 coordinates, for plotting and
    /// debugging.
    pub fn to_json(&self) -> serde_json::Value {
        let segs: Vec<SegmentJson> = self
            .segments
            .iter()
            .map(|s| match s {
                Segment::Line { a, b } => SegmentJson {
                    kind: "line",
                    a: Some([a.real().to_f64(), a.imag().to_f64()]),
                    b: Some([b.real().to_f64(), b.imag().to_f64()]),
                    center: None,
                    rx: None,
                    ry: None,
                    theta0: None,
                    theta1: None,
                    p: None,
                },
                Segment::Arc {
                    center,
                    rx,
                    ry,
                    theta0,
                    theta1,
                } => SegmentJson {
                    kind: "arc",
                    a: None,
                    b: None,
                    center: Some([center.real().to_f64(), center.imag().to_f64()]),
                    rx: Some(rx.to_f64()),
                    ry: Some(ry.to_f64()),
                    theta0: Some(theta0.to_f64()),
                    theta1: Some(theta1.to_f64()),
                    p: None,
                },
                Segment::Quad { p0, p1, p2 } => SegmentJson {
                    kind: "quad",
                    a: None,
                    b: None,
                    center: None,
                    rx: None,
                    ry: None,
                    theta0: None,
                    theta1: None,
                    p: Some([
                        [p0.real().to_f64(), p0.imag().to_f64()],
                        [p1.real().to_f64(), p1.imag().to_f64()],
                        [p2.real().to_f64(), p2.imag().to_f64()],
                    ]),
                },
            })
            .collect();
        serde_json::json!({
            "orientation": self.orientation,
            "branch_cut": self.branch_cut,
            "segments": segs,
        })
    }

    /// Consecutive segments must share endpoints, and every sampled point
    /// must stay off the declared branch cut. The origin itself is allowed,
    /// for paths that begin or end there.
    pub fn check_connectivity(&self, tol: f64) -> Result<()> {
        for w in self.segments.windows(2) {
            let (_, e0) = w[0].endpoints_f64();
            let (s1, _) = w[1].endpoints_f64();
            let d = ((e0.0 - s1.0).powi(2) + (e0.1 - s1.1).powi(2)).sqrt();
            if d > tol {
                return Err(Error::InvalidInput(format!(
                    "segments do not connect: gap {d:e}"
                )));
            }
        }
        for (px, py) in self.sample(64) {
            let on_cut = match self.branch_cut {
                BranchCut::None => false,
                BranchCut::PositiveAxis => py.abs() < 1e-12 && px > 1e-9,
                BranchCut::NegativeAxis => py.abs() < 1e-12 && px < -1e-9,
            };
            if on_cut {
                return Err(Error::InvalidInput(format!(
                    "path touches its branch cut at ({px}, {py})"
                )));
            }
        }
        Ok(())
    }
}

fn is_bad(x: &Float) -> bool {
    x.is_nan() || x.is_infinite()
}

/// True if the complex value is NaN or infinite in either part.
pub fn non_finite(z: &Complex) -> bool {
    is_bad(z.real()) || is_bad(z.imag())
}

/// Exact complex zero, used by integrands to signal "zero by decay".
pub fn zero_c(prec: u32) -> Complex {
    Complex::with_val(prec, (Special::Zero, Special::Zero))
}

/// Open Hankel-type loop: in from -infinity at height rho above the
/// negative axis, clockwise around the origin at radius rho = max(1, |x|),
/// out to -infinity at height -rho. The radius clears the essential
/// singularity at t = 0, the tails end where decay of exp(Re t) certifies
/// the dropped mass, and the path never meets the cut on the negative axis.
pub fn gamma0(x: f64, tau: f64, _beta: f64, policy: &TruncationPolicy, prec: u32) -> ContourPath {
    let rho = x.abs().max(1.0);
    // Head bound over the loop: |exp(tau x/t)| <= exp(|tau x|/rho),
    // |exp(-x^2/(2t^2))| <= exp(1/2) at |t| = rho >= |x|, |exp(t)| <= exp(rho).
    let head = (tau * x).abs() / rho + 0.5 + rho;
    let len = policy.tail_length(1.0, head).max(2.0 * rho);
    let seg_in = Segment::line(prec, -len, rho, 0.0, rho);
    let arc = Segment::arc_pi(prec, 0.0, 0.0, rho, rho, 0.5, -0.5);
    let seg_out = Segment::line(prec, 0.0, -rho, -len, -rho);
    ContourPath::new(vec![seg_in, arc, seg_out], BranchCut::NegativeAxis)
}

/// Closed counterclockwise loop for the adjoint-side single integral: the
/// circle of radius rho_hat centered at rho_hat, beginning and ending at
/// the origin with vertical tangent so that Re(1/s^2) -> -infinity along
/// both approaches. The default radius balances exp(y^2/(2 s^2)) against
/// exp(-s).
pub fn gamma0_hat(
    y: f64,
    _tau: f64,
    _beta: f64,
    _policy: &TruncationPolicy,
    prec: u32,
) -> ContourPath {
    let rho_hat = y.abs().sqrt().max(1.0);
    gamma0_hat_with_radius(rho_hat, prec)
}

/// Same loop with an explicit radius; the double-integral evaluator shrinks
/// it to keep the two contour images separated in the shared denominator.
pub fn gamma0_hat_with_radius(rho_hat: f64, prec: u32) -> ContourPath {
    let arc = Segment::arc_pi(prec, rho_hat, 0.0, rho_hat, rho_hat, -1.0, 1.0);
    ContourPath::new(vec![arc], BranchCut::NegativeAxis)
}

/// Canonical contours ending at the origin for the third-order ODE
/// solutions, with the integrand cut on the positive axis. Index 1 leaves
/// the origin hugging just below the positive axis and exits to -infinity
/// at height -0.6; index 2 mirrors it above the axis, traversed from
/// -infinity into the origin; index 3 runs from the origin out along the
/// negative axis.
pub fn gamma_j(j: u8, policy: &TruncationPolicy, prec: u32) -> Result<ContourPath> {
    let len = policy.tail_length(1.0, 1.0).max(4.0);
    match j {
        1 => Ok(ContourPath::new(
            vec![
                Segment::arc_pi(prec, 0.0, -0.3, 0.5, 0.3, 0.5, -0.5),
                Segment::line(prec, 0.0, -0.6, -len, -0.6),
            ],
            BranchCut::PositiveAxis,
        )),
        2 => Ok(ContourPath::new(
            vec![
                Segment::line(prec, -len, 0.6, 0.0, 0.6),
                Segment::arc_pi(prec, 0.0, 0.3, 0.5, 0.3, 0.5, -0.5),
            ],
            BranchCut::PositiveAxis,
        )),
        3 => Ok(ContourPath::new(
            vec![Segment::line(prec, 0.0, 0.0, -len, 0.0)],
            BranchCut::PositiveAxis,
        )),
        _ => Err(Error::InvalidInput(format!(
            "contour index {j} not in 1..=3"
        ))),
    }
}

/// Adjoint-side contours, cut on the positive axis. Index 1 comes in from
/// +infinity at height -0.4 and ends at the origin moving straight up;
/// index 2 mirrors it from above, arriving moving straight down; index 3 is
/// the closed clockwise ellipse through the origin around the left side.
pub fn gamma_hat_k(k: u8, policy: &TruncationPolicy, prec: u32) -> Result<ContourPath> {
    let len = policy.tail_length(1.0, 1.0).max(4.0);
    match k {
        1 => Ok(ContourPath::new(
            vec![
                Segment::line(prec, len, -0.4, 0.6, -0.4),
                Segment::arc_pi(prec, 0.6, 0.0, 0.6, 0.4, -0.5, -1.0),
            ],
            BranchCut::PositiveAxis,
        )),
        2 => Ok(ContourPath::new(
            vec![
                Segment::line(prec, len, 0.4, 0.6, 0.4),
                Segment::arc_pi(prec, 0.6, 0.0, 0.6, 0.4, 0.5, 1.0),
            ],
            BranchCut::PositiveAxis,
        )),
        3 => Ok(ContourPath::new(
            vec![Segment::arc_pi(prec, -0.3, 0.0, 0.3, 0.5, 0.0, -2.0)],
            BranchCut::PositiveAxis,
        )),
        _ => Err(Error::InvalidInput(format!(
            "contour index {k} not in 1..=3"
        ))),
    }
}

/// One of the six jump rays (arguments 0, ±π/4, ±3π/4, π), truncated at
/// `radius`. Rays in the closed right half-plane point away from the
/// origin, rays in the open left half-plane point toward it.
pub fn sigma_ray(arg: f64, radius: f64, prec: u32) -> ContourPath {
    let (s, c) = arg.sin_cos();
    let (bx, by) = (radius * c, radius * s);
    let seg = if c >= 0.0 {
        Segment::line(prec, 0.0, 0.0, bx, by)
    } else {
        Segment::line(prec, bx, by, 0.0, 0.0)
    };
    ContourPath::new(vec![seg], BranchCut::None)
}

/// The six ray arguments of the jump contour in counterclockwise order.
pub fn sigma_ray_args() -> [f64; 6] {
    let pi = std::f64::consts::PI;
    [
        0.0,
        pi / 4.0,
        3.0 * pi / 4.0,
        pi,
        -3.0 * pi / 4.0,
        -pi / 4.0,
    ]
}

/// Count transversal intersections of two sampled paths outside a disk
/// around the origin; returns (count, sum of crossing signs). A crossing
/// counts +1 when the first path passes the second from its right side to
/// its left, relative to the second path's direction of travel.
pub fn crossing_pattern(a: &ContourPath, b: &ContourPath, exclude_radius: f64) -> (usize, i32) {
    // Coprime odd sample counts keep nodes off symmetric special angles,
    // where a vertex landing exactly on the other path would fall into the
    // half-open rejection gap of the segment intersection test.
    let pa = a.sample(601);
    let pb = b.sample(607);
    let mut count = 0usize;
    let mut signs = 0i32;
    for wa in pa.windows(2) {
        for wb in pb.windows(2) {
            if let Some((px, py, sign)) = seg_intersect(wa[0], wa[1], wb[0], wb[1]) {
                if (px * px + py * py).sqrt() > exclude_radius {
                    count += 1;
                    signs += sign;
                }
            }
        }
    }
    (count, signs)
}

fn seg_intersect(
    a0: (f64, f64),
    a1: (f64, f64),
    b0: (f64, f64),
    b1: (f64, f64),
) -> Option<(f64, f64, i32)> {
    let r = (a1.0 - a0.0, a1.1 - a0.1);
    let s = (b1.0 - b0.0, b1.1 - b0.1);
    let denom = r.0 * s.1 - r.1 * s.0;
    if denom.abs() < 1e-18 {
        return None;
    }
    let qp = (b0.0 - a0.0, b0.1 - a0.1);
    let t = (qp.0 * s.1 - qp.1 * s.0) / denom;
    let u = (qp.0 * r.1 - qp.1 * r.0) / denom;
    // Half-open parameter ranges avoid double counting at shared samples.
    if (0.0..1.0).contains(&t) && (0.0..1.0).contains(&u) {
        let px = a0.0 + t * r.0;
        let py = a0.1 + t * r.1;
        // cross(dir_b, dir_a) > 0 exactly when a crosses b right-to-left.
        let cross = s.0 * r.1 - s.1 * r.0;
        Some((px, py, if cross > 0.0 { 1 } else { -1 }))
    } else {
        None
    }
}
