//! Order-by-order normal form of the extra first integral.
//!
//! Under coordinate changes `x_i -> g_i(x_i)` and reparametrizations
//! `f -> theta(f)`, the integral of a valid web normalizes to
//! `x_1 + ... + x_n + sum_{i<j} x_i x_j a_ij(x)` with
//! `sum_{i<j} a_ij(0) = 0`: no pure powers `x_i^k` remain, and the
//! degree-k part has no component along `(x_1 + ... + x_n)^k`. The
//! scheme below fixes the one-variable freedoms degree by degree:
//! `g_i`'s degree-k coefficient kills the pure monomial `x_i^k`, and
//! `theta`'s degree-k coefficient kills the coefficientwise projection
//! of the remaining degree-k part onto `(sum x_i)^k`. At k = 2 the
//! projection condition is exactly `sum a_ij(0) = 0`. The result is
//! unique up to the simultaneous homothety `x_i -> lambda x_i`, which is
//! what [`homothety_check`] exercises.

use crate::expr::ExprError;
use crate::jets::{Mono, MultiJet, UniJet};
use crate::rat::{format_q, Q};
use crate::symmetry::{validate_web, Web, WebError, WebSpec};
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NormalFormError {
    #[error(transparent)]
    Web(#[from] WebError),
    #[error(transparent)]
    Expansion(#[from] ExprError),
    #[error(transparent)]
    Jet(#[from] crate::jets::JetError),
    #[error("normalization failed to clean order {order}: leftover {leftover}")]
    OrderNotCleaned { order: u32, leftover: String },
    #[error("reconstruction identity failed at order {0}")]
    Reconstruction(u32),
    #[error("rescaled web is invalid: {0}")]
    RescaledInvalid(String),
}

/// The normal form data of a web integral.
#[derive(Debug, Clone)]
pub struct NormalFormResult {
    /// Normalized jet: linear part `x_1 + .. + x_n`, no pure powers,
    /// degree-k parts orthogonal to `(sum x)^k`. Based at 0 in the
    /// normalized coordinates.
    pub nf: MultiJet,
    /// Coordinate changes: `x_i = g_i(t_i)`, centered at 0 with constant
    /// term 0 (the base point moves to the origin first).
    pub g: Vec<UniJet>,
    /// Reparametrization applied to the shifted, unit-stripped integral.
    pub theta: UniJet,
    /// Quadratic coefficients a_ij(0) of the normal form, i < j.
    pub a_quadratic: Vec<((usize, usize), Q)>,
    /// Largest k <= W with every nonlinear coefficient of total degree
    /// <= k equal to zero.
    pub linear_to_order: u32,
}

/// Computes the normal form of a validated web.
///
/// The integral is first shifted: the base point moves to the origin and
/// `f` is replaced by `f/exp(log_scale) - f(base)`, whose jet is exactly
/// `web.f_jet` minus its constant term. The reconstruction identity
/// `theta o (shifted f) o g = nf` is verified exactly before returning.
pub fn compute_normal_form(web: &Web) -> Result<NormalFormResult, NormalFormError> {
    let n = web.n();
    let w = web.order();
    let zero_base = vec![Q::zero(); n];

    // shifted integral: based at 0, zero constant term
    let mut fhat = web.f_jet.with_base(zero_base.clone());
    fhat.set(Mono::zero(n), Q::zero());

    // order 1: the scale rides on theta through the first partial, so
    // g_1 has unit derivative. This makes the scheme homothety-covariant
    // (normalizing f(lambda x) scales order-k coefficients by
    // lambda^{k-1}) instead of quotienting the homothety away.
    let l1 = web.partials[0].clone();
    let mut g: Vec<UniJet> = (0..n)
        .map(|i| {
            let mut u = UniJet::zero(w, Q::zero());
            u.coeffs[1] = &l1 * web.partials[i].recip();
            u
        })
        .collect();
    let mut theta = UniJet::zero(w, Q::zero());
    theta.coeffs[1] = l1.recip();

    let sum_t: MultiJet = {
        let mut s = MultiJet::zero(n, w, zero_base.clone());
        for i in 0..n {
            s.set(Mono::unit(n, i), Q::one());
        }
        s
    };

    for k in 2..=w {
        let cur = theta.compose_multi(&fhat.substitute_diagonal(&g)?)?;
        // adjusting g_i[k] by delta moves the t_i^k coefficient by
        // l_i * delta (through the linear chain term); adjusting
        // theta[k] by e adds e * (sum t)^k. Pure monomials appear in
        // (sum t)^k with coefficient 1, so the two fixes are coupled
        // and solved jointly:
        //   a_i + e = -r_i,   sum a_i + e <P,P> = -<R,P>
        // where a_i = l_i delta_i, r_i = current t_i^k coefficient.
        let pk = sum_t.int_pow(k as i64)?;
        let mut r = Vec::with_capacity(n);
        for i in 0..n {
            let mut mono = vec![0u32; n];
            mono[i] = k;
            r.push(cur.coeff(&Mono(mono)));
        }
        let mut dot = Q::zero();
        let mut norm = Q::zero();
        for (m, v) in pk.coeffs() {
            if m.degree() == k {
                dot = dot + v * cur.coeff(m);
                norm = norm + v * v;
            }
        }
        let r_sum: Q = r.iter().cloned().sum();
        let nq = Q::from_integer((n as i64).into());
        // norm - n > 0 for n >= 2, k >= 2 (mixed multinomials exist)
        let e = (&r_sum - &dot) / (&norm - &nq);
        for i in 0..n {
            let a_i = -&r[i] - &e;
            let delta = &a_i * &g[i].coeffs[1];
            g[i].coeffs[k as usize] = &g[i].coeffs[k as usize] + delta;
        }
        // e is the effective multiple of (sum t)^k; theta sees the
        // composite through its argument of linear size l1
        let mut l1k = Q::one();
        for _ in 0..k {
            l1k = l1k * &l1;
        }
        theta.coeffs[k as usize] = &theta.coeffs[k as usize] + &e / l1k;
        // the order-k slice must now be clean
        let cur = theta.compose_multi(&fhat.substitute_diagonal(&g)?)?;
        for i in 0..n {
            let mut mono = vec![0u32; n];
            mono[i] = k;
            let c = cur.coeff(&Mono(mono));
            if !c.is_zero() {
                return Err(NormalFormError::OrderNotCleaned {
                    order: k,
                    leftover: format!("pure monomial t{}^{} = {}", i + 1, k, format_q(&c)),
                });
            }
        }
        let mut dot = Q::zero();
        for (m, v) in pk.coeffs() {
            if m.degree() == k {
                dot = dot + v * cur.coeff(m);
            }
        }
        if !dot.is_zero() {
            return Err(NormalFormError::OrderNotCleaned {
                order: k,
                leftover: format!("projection along (sum t)^{k} = {}", format_q(&dot)),
            });
        }
    }

    let nf = theta.compose_multi(&fhat.substitute_diagonal(&g)?)?;

    // invariants of the result
    for i in 0..n {
        let li = nf.coeff(&Mono::unit(n, i));
        if !li.is_one() {
            return Err(NormalFormError::OrderNotCleaned {
                order: 1,
                leftover: format!("linear coefficient of t{} is {}", i + 1, format_q(&li)),
            });
        }
    }
    let mut a_quadratic = Vec::new();
    let mut a_sum = Q::zero();
    for i in 0..n {
        for j in i + 1..n {
            let mut e = vec![0u32; n];
            e[i] = 1;
            e[j] = 1;
            let c = nf.coeff(&Mono(e));
            a_sum = a_sum + &c;
            a_quadratic.push(((i + 1, j + 1), c));
        }
    }
    if !a_sum.is_zero() {
        return Err(NormalFormError::OrderNotCleaned {
            order: 2,
            leftover: format!("sum of quadratic coefficients = {}", format_q(&a_sum)),
        });
    }

    let linear_to_order = {
        let mut k = w;
        'scan: for deg in 2..=w {
            for (m, _) in nf.coeffs() {
                if m.degree() == deg {
                    k = deg - 1;
                    break 'scan;
                }
            }
        }
        k
    };

    // reconstruction: theta o fhat o g = nf exactly at order W
    let recon = theta.compose_multi(&fhat.substitute_diagonal(&g)?)?;
    if recon != nf {
        return Err(NormalFormError::Reconstruction(w));
    }

    Ok(NormalFormResult {
        nf,
        g,
        theta,
        a_quadratic,
        linear_to_order,
    })
}

/// Result of comparing the normal form of `f(lambda x)` against the
/// normal form of `f`: order-k coefficients must scale by lambda^{k-1}.
#[derive(Debug, Clone)]
pub struct HomothetyReport {
    pub lambda: Q,
    pub covariant: bool,
    /// First mismatching monomial, if any.
    pub mismatch: Option<(Vec<u32>, String, String)>,
}

/// Verifies homothety covariance of the normal-form scheme for a given
/// nonzero rational `lambda`: the web `f(lambda x)` based at
/// `base/lambda` normalizes to the jet whose order-k coefficients are
/// `lambda^{k-1}` times those of `f`'s normal form.
pub fn homothety_check(spec: &WebSpec, lambda: &Q) -> Result<HomothetyReport, NormalFormError> {
    assert!(!lambda.is_zero(), "lambda must be nonzero");
    let web = validate_web(spec)?;
    let nf = compute_normal_form(&web)?;

    let scaled_f = spec.f.scale_vars(spec.n, lambda);
    let scaled_base: Vec<Q> = spec.base.iter().map(|b| b / lambda).collect();
    let scaled_spec = WebSpec::new(spec.n, scaled_f, scaled_base, spec.order);
    let scaled_web =
        validate_web(&scaled_spec).map_err(|e| NormalFormError::RescaledInvalid(e.to_string()))?;
    let nf2 = compute_normal_form(&scaled_web)?;

    // expect nf2 coefficient at degree k = lambda^{k-1} * nf coefficient
    let mut mismatch = None;
    let monos: std::collections::BTreeSet<Mono> = nf
        .nf
        .coeffs()
        .map(|(m, _)| m.clone())
        .chain(nf2.nf.coeffs().map(|(m, _)| m.clone()))
        .collect();
    for m in monos {
        let k = m.degree();
        let mut factor = Q::one();
        for _ in 1..k {
            factor = factor * lambda;
        }
        let want = nf.nf.coeff(&m) * factor;
        let got = nf2.nf.coeff(&m);
        if want != got {
            mismatch = Some((m.0.clone(), format_q(&want), format_q(&got)));
            break;
        }
    }
    Ok(HomothetyReport {
        lambda: lambda.clone(),
        covariant: mismatch.is_none(),
        mismatch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{qi, qr};
    use crate::symmetry::web_from_text;

    fn web(n: usize, f: &str, base: Vec<i64>, w: u32) -> Web {
        let spec = web_from_text(n, f, base.into_iter().map(qi).collect(), w).unwrap();
        validate_web(&spec).unwrap()
    }

    #[test]
    fn linear_integral_is_already_normal() {
        let w = web(3, "x1 + x2 + x3", vec![0, 0, 0], 8);
        let nf = compute_normal_form(&w).unwrap();
        assert_eq!(nf.linear_to_order, 8);
        assert_eq!(nf.nf.coeffs().count(), 3);
        for gi in &nf.g {
            assert_eq!(gi.coeffs[1], qi(1));
            assert!(gi.coeffs.iter().skip(2).all(|c| c.is_zero()));
        }
    }

    #[test]
    fn product_integral_normalizes_to_linear() {
        // x + y + xy = (1+x)(1+y) - 1 is linearized by logarithms, so
        // every nonlinear coefficient of the normal form vanishes
        let w = web(2, "x1 + x2 + x1*x2", vec![0, 0], 8);
        let nf = compute_normal_form(&w).unwrap();
        assert_eq!(nf.linear_to_order, 8, "nf = {}", nf.nf);
        // the coordinate changes are the expected exp-like series
        assert_eq!(nf.g[0].coeffs[1], qi(1));
    }

    #[test]
    fn three_web_integrand_is_not_linearizable() {
        let w = web(
            3,
            "(x2*x3 + x3*x1 - 2*x1*x2) / (x1 + x2 - 2*x3)",
            vec![0, 1, 2],
            8,
        );
        let nf = compute_normal_form(&w).unwrap();
        assert!(nf.linear_to_order <= 3, "linear to {}", nf.linear_to_order);
        // quadratic invariant still holds
        let s: Q = nf.a_quadratic.iter().map(|(_, c)| c.clone()).sum();
        assert!(s.is_zero());
    }

    #[test]
    fn homothety_covariance() {
        let spec = web_from_text(2, "x1 + x2 + x1*x2^2", vec![qi(0), qi(0)], 6).unwrap();
        for l in [qi(2), qi(-1), qr(1, 2), qi(1), qi(3)] {
            let rep = homothety_check(&spec, &l).unwrap();
            assert!(rep.covariant, "lambda {}: {:?}", l, rep.mismatch);
        }
    }

    #[test]
    fn order3_coefficients_scale_by_lambda_squared() {
        // direct check of the scaling exponent at one coefficient
        let spec = web_from_text(2, "x1 + x2 + x1*x2^2", vec![qi(0), qi(0)], 6).unwrap();
        let w1 = validate_web(&spec).unwrap();
        let nf1 = compute_normal_form(&w1).unwrap();
        let spec3 = WebSpec::new(
            2,
            spec.f.scale_vars(2, &qi(3)),
            vec![qi(0), qi(0)],
            6,
        );
        let w3 = validate_web(&spec3).unwrap();
        let nf3 = compute_normal_form(&w3).unwrap();
        for (m, v) in nf1.nf.coeffs() {
            if m.degree() == 3 {
                assert_eq!(nf3.nf.coeff(m), v * qi(9));
            }
        }
    }
}
