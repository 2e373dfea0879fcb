//! Gauss-Jacobi quadrature at arbitrary precision.
//!
//! An `m`-point rule integrates `f(x) (1-x)^A (1+x)^B` over `[-1, 1]`
//! exactly for polynomial `f` of degree up to `2m - 1`, for any exponents
//! `A, B > -1`.  Nodes are the roots of the degree-`m` monic Jacobi
//! polynomial from the three-term recurrence
//!
//! ```text
//! p_{k+1}(x) = (x - a_k) p_k(x) - b_k p_{k-1}(x),
//! a_0 = (B - A)/(A + B + 2),
//! a_k = (B^2 - A^2) / ((2k + A + B)(2k + A + B + 2)),
//! b_1 = 4 (1 + A)(1 + B) / ((2 + A + B)^2 (3 + A + B)),
//! b_k = 4 k (k + A)(k + B)(k + A + B)
//!       / ((2k + A + B)^2 (2k + A + B + 1)(2k + A + B - 1)),
//! ```
//!
//! found by interlacing brackets (each root of `p_{k}` is bisected between
//! consecutive roots of `p_{k-1}` and the interval ends) followed by Newton
//! refinement.  The weight at a node is `1 / sum_k phi_k(x_i)^2` with
//! `phi_k` the orthonormal polynomials, `|| p_k ||^2 = b_0 b_1 ... b_k` and
//! `b_0` the total mass `2^{A+B+1} Beta(A+1, B+1)`.
//!
//! The moment-matrix side uses these rules as exact integrators for
//! (polynomial) x (Jacobi weight) integrands after mapping each weight
//! interval onto `[-1, 1]`.

use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};

/// Nodes (strictly increasing, inside `(-1, 1)`) and positive weights of a
/// Gauss-Jacobi rule for the weight `(1-x)^A (1+x)^B`.
#[derive(Clone, Debug)]
pub struct JacobiRule {
    pub nodes: Vec<Float>,
    pub weights: Vec<Float>,
}

/// `Beta(p, q)` for positive real arguments at working precision.
pub(crate) fn beta_value(p: &Float, q: &Float, prec: u32) -> Float {
    let gp = Float::with_val(prec, p.gamma_ref());
    let gq = Float::with_val(prec, q.gamma_ref());
    let mut sum = Float::with_val(prec, p + q);
    sum.gamma_mut();
    let mut out = gp;
    out *= &gq;
    out /= &sum;
    out
}

/// Recurrence coefficients `(a_k, b_k)` for `k = 0..m`; `b_0` holds the
/// total mass of the weight.
fn recurrence(m: usize, aa: f64, bb: f64, prec: u32) -> (Vec<Float>, Vec<Float>) {
    let mut alphas = Vec::with_capacity(m);
    let mut betas = Vec::with_capacity(m);
    let af = Float::with_val(prec, aa);
    let bf = Float::with_val(prec, bb);
    let sf = Float::with_val(prec, &af + &bf);
    for k in 0..m {
        let kf = Float::with_val(prec, k as f64);
        if k == 0 {
            let mut num = Float::with_val(prec, &bf - &af);
            let mut den = sf.clone();
            den += 2u32;
            num /= &den;
            alphas.push(num);
            // total mass 2^{A+B+1} Beta(A+1, B+1)
            let pa = Float::with_val(prec, &af + 1u32);
            let pb = Float::with_val(prec, &bf + 1u32);
            let mut mass = beta_value(&pa, &pb, prec);
            let mut e = sf.clone();
            e += 1u32;
            let two = Float::with_val(prec, 2);
            let scale = Float::with_val(prec, (&two).pow(&e));
            mass *= &scale;
            betas.push(mass);
        } else {
            let mut d = Float::with_val(prec, &kf * 2u32);
            d += &sf;
            let mut num = Float::with_val(prec, &bf * &bf);
            num -= Float::with_val(prec, &af * &af);
            let mut den = Float::with_val(prec, &d + 2u32);
            den *= &d;
            num /= &den;
            alphas.push(num);
            let b = if k == 1 {
                // the generic numerator and denominator share a factor
                // (1 + A + B) that can vanish; use the cancelled form
                let mut num = Float::with_val(prec, &af + 1u32);
                num *= Float::with_val(prec, &bf + 1u32);
                num *= 4u32;
                let mut t = Float::with_val(prec, &sf + 2u32);
                t.square_mut();
                let mut den = t;
                den *= Float::with_val(prec, &sf + 3u32);
                num /= &den;
                num
            } else {
                let mut num = Float::with_val(prec, &kf * 4u32);
                num *= Float::with_val(prec, &kf + &af);
                num *= Float::with_val(prec, &kf + &bf);
                num *= Float::with_val(prec, &kf + &sf);
                let mut den = Float::with_val(prec, d.square_ref());
                den *= Float::with_val(prec, &d + 1u32);
                den *= Float::with_val(prec, &d - 1u32);
                num /= &den;
                num
            };
            betas.push(b);
        }
    }
    (alphas, betas)
}

/// `p_k(x)` and `p_k'(x)` by the monic recurrence.
fn eval_monic(k: usize, x: &Float, alphas: &[Float], betas: &[Float], prec: u32) -> (Float, Float) {
    let mut pm1 = Float::new(prec);
    let mut p = Float::with_val(prec, 1);
    let mut dm1 = Float::new(prec);
    let mut d = Float::new(prec);
    for j in 0..k {
        // p_{j+1} = (x - a_j) p_j - b_j p_{j-1}; b-term absent at j = 0
        let mut xa = x.clone();
        xa -= &alphas[j];
        let mut pnext = xa.clone();
        pnext *= &p;
        let mut dnext = xa;
        dnext *= &d;
        dnext += &p;
        if j > 0 {
            let mut t = pm1.clone();
            t *= &betas[j];
            pnext -= &t;
            let mut t = dm1.clone();
            t *= &betas[j];
            dnext -= &t;
        }
        pm1 = p;
        p = pnext;
        dm1 = d;
        d = dnext;
    }
    (p, d)
}

/// One root of `p_k` inside `(lo, hi)`, where the signs of `p_k` at the
/// bracket ends differ: bisection to a safe basin, then Newton.
fn root_in(
    k: usize,
    lo: &Float,
    hi: &Float,
    alphas: &[Float],
    betas: &[Float],
    prec: u32,
) -> Float {
    let mut lo = lo.clone();
    let mut hi = hi.clone();
    let sign_lo = eval_monic(k, &lo, alphas, betas, prec).0.is_sign_negative();
    for _ in 0..64 {
        let mut mid = Float::with_val(prec, &lo + &hi);
        mid /= 2u32;
        let v = eval_monic(k, &mid, alphas, betas, prec).0;
        if v.is_sign_negative() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = Float::with_val(prec, &lo + &hi);
    x /= 2u32;
    let eps = Float::with_val(prec, Float::i_exp(1, -(prec as i32) + 8));
    for _ in 0..60 {
        let (p, d) = eval_monic(k, &x, alphas, betas, prec);
        if d.is_zero() {
            break;
        }
        let mut step = p;
        step /= &d;
        x -= &step;
        step.abs_mut();
        let mut bound = x.clone();
        bound.abs_mut();
        bound += 1u32;
        bound *= &eps;
        if step < bound {
            break;
        }
    }
    x
}

/// The `m`-point Gauss-Jacobi rule for the weight `(1-x)^A (1+x)^B` on
/// `[-1, 1]`.
pub fn jacobi_rule(m: usize, aa: f64, bb: f64, prec: u32) -> Result<JacobiRule> {
    if m == 0 {
        return Err(Error::InvalidInput("rule size must be positive".into()));
    }
    if !(aa.is_finite() && bb.is_finite() && aa > -1.0 && bb > -1.0) {
        return Err(Error::InvalidInput(format!(
            "Jacobi exponents must be finite and > -1, got ({aa}, {bb})"
        )));
    }
    let (alphas, betas) = recurrence(m, aa, bb, prec);
    // roots level by level: those of p_{k-1} and the interval ends bracket
    // exactly one root of p_k each
    let one = Float::with_val(prec, 1);
    let mone = Float::with_val(prec, -1);
    let mut roots: Vec<Float> = vec![alphas[0].clone()];
    for k in 2..=m {
        let mut next = Vec::with_capacity(k);
        for i in 0..k {
            let lo = if i == 0 { &mone } else { &roots[i - 1] };
            let hi = if i == k - 1 { &one } else { &roots[i] };
            next.push(root_in(k, lo, hi, &alphas, &betas, prec));
        }
        roots = next;
    }
    // w_i = 1 / sum_{k<m} p_k(x_i)^2 / (b_0 ... b_k)
    let mut norm2 = Vec::with_capacity(m);
    let mut acc = Float::with_val(prec, 1);
    for b in betas.iter().take(m) {
        acc *= b;
        norm2.push(acc.clone());
    }
    let mut weights = Vec::with_capacity(m);
    for x in &roots {
        let mut pm1 = Float::new(prec);
        let mut p = Float::with_val(prec, 1);
        let mut sum = Float::new(prec);
        for j in 0..m {
            let mut sq = p.clone();
            sq.square_mut();
            sq /= &norm2[j];
            sum += &sq;
            let mut xa = x.clone();
            xa -= &alphas[j];
            let mut pnext = xa;
            pnext *= &p;
            if j > 0 {
                let mut t = pm1.clone();
                t *= &betas[j];
                pnext -= &t;
            }
            pm1 = p;
            p = pnext;
        }
        sum.recip_mut();
        weights.push(sum);
    }
    Ok(JacobiRule {
        nodes: roots,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PREC: u32 = 256;

    fn total(rule: &JacobiRule, f: impl Fn(&Float) -> Float) -> f64 {
        let mut sum = Float::new(PREC);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let mut t = f(x);
            t *= w;
            sum += &t;
        }
        sum.to_f64()
    }

    #[test]
    fn legendre_rule_integrates_polynomials_exactly() {
        let rule = jacobi_rule(5, 0.0, 0.0, PREC).unwrap();
        let mass = total(&rule, |_| Float::with_val(PREC, 1));
        assert!((mass - 2.0).abs() < 1e-45);
        let m4 = total(&rule, |x| Float::with_val(PREC, x.clone().square()).square());
        assert!((m4 - 0.4).abs() < 1e-45, "x^4 moment {m4}");
        let m8 = total(&rule, |x| {
            let mut v = x.clone().square();
            v.square_mut();
            v.square_mut();
            v
        });
        assert!((m8 - 2.0 / 9.0).abs() < 1e-45, "x^8 moment {m8}");
        // odd degree up to 9 vanishes by symmetry
        let m9 = total(&rule, |x| {
            let mut v = x.clone().square();
            v.square_mut();
            v.square_mut();
            v *= x;
            v
        });
        assert!(m9.abs() < 1e-45, "x^9 moment {m9}");
    }

    #[test]
    fn chebyshev_rule_has_cosine_nodes_and_pi_mass() {
        let m = 6;
        let rule = jacobi_rule(m, -0.5, -0.5, PREC).unwrap();
        let mass = total(&rule, |_| Float::with_val(PREC, 1));
        assert!((mass - std::f64::consts::PI).abs() < 1e-15);
        for (i, x) in rule.nodes.iter().enumerate() {
            // ascending nodes: cos((2(m-i) - 1) pi / (2m))
            let kk = 2 * (m - i) - 1;
            let mut th = Float::with_val(PREC, rug::float::Constant::Pi);
            th *= kk as u32;
            th /= 2 * m as u32;
            let c = th.cos();
            let mut d = x.clone();
            d -= &c;
            d.abs_mut();
            assert!(d.to_f64() < 1e-40, "node {i}");
        }
        // each Chebyshev weight is pi / m
        let mut expect = Float::with_val(PREC, rug::float::Constant::Pi);
        expect /= m as u32;
        for w in &rule.weights {
            let mut d = w.clone();
            d -= &expect;
            d.abs_mut();
            assert!(d.to_f64() < 1e-40, "weight off by {d}");
        }
    }

    #[test]
    fn mass_matches_beta_closed_form() {
        for (aa, bbx) in [(0.5, -0.3), (2.5, 0.0), (-0.9, 1.7)] {
            let rule = jacobi_rule(7, aa, bbx, PREC).unwrap();
            let mut mass = Float::new(PREC);
            for w in &rule.weights {
                mass += w;
            }
            let pa = Float::with_val(PREC, aa) + 1u32;
            let pb = Float::with_val(PREC, bbx) + 1u32;
            let mut expect = beta_value(&pa, &pb, PREC);
            let e = Float::with_val(PREC, aa) + Float::with_val(PREC, bbx) + 1u32;
            let two = Float::with_val(PREC, 2);
            expect *= Float::with_val(PREC, (&two).pow(&e));
            let mut rel = mass;
            rel -= &expect;
            rel /= &expect;
            rel.abs_mut();
            assert!(rel.to_f64() < 1e-40, "({aa}, {bbx}) off by {rel}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn nodes_interior_increasing_weights_positive(
            m in 1usize..9,
            aa in -0.9f64..2.5,
            bb in -0.9f64..2.5,
        ) {
            let rule = jacobi_rule(m, aa, bb, PREC).unwrap();
            prop_assert_eq!(rule.nodes.len(), m);
            for i in 0..m {
                prop_assert!(rule.nodes[i].to_f64() > -1.0 && rule.nodes[i].to_f64() < 1.0);
                prop_assert!(rule.weights[i].to_f64() > 0.0);
                if i > 0 {
                    prop_assert!(rule.nodes[i] > rule.nodes[i - 1]);
                }
            }
        }
    }
}
