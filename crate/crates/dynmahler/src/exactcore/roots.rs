//! Complex root finding at working precision (Aberth-Ehrlich iteration).

use num_traits::Zero;

use crate::error::Error;
use crate::exactcore::real::{to_f64, Complex, RealCtx};
use crate::exactcore::{PolyQ, Rat};

/// Evaluates a complex-coefficient polynomial by Horner's rule.
pub fn eval_complex(coeffs: &[Complex], z: &Complex, ctx: &RealCtx) -> Complex {
    let mut acc = Complex::zero(ctx);
    for c in coeffs.iter().rev() {
        acc = acc.mul(z, ctx).add(c, ctx);
    }
    acc
}

fn derivative_coeffs(coeffs: &[Complex], ctx: &RealCtx) -> Vec<Complex> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c.mul_real(&ctx.from_i64(i as i64), ctx))
        .collect()
}

pub fn poly_to_complex(f: &PolyQ, ctx: &RealCtx) -> Vec<Complex> {
    f.coeffs().iter().map(|c| Complex::from_rat(c, ctx)).collect()
}

/// All complex roots of a squarefree rational polynomial, with multiplicity
/// one each, found by Aberth-Ehrlich at the context precision.
///
/// Roots exactly at the origin are deflated first so the iteration starts
/// from a polynomial with nonzero constant term.
pub fn complex_roots(f: &PolyQ, ctx: &RealCtx) -> Result<Vec<Complex>, Error> {
    if f.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    if f.is_constant() {
        return Ok(Vec::new());
    }
    let v = f.valuation_at_zero();
    let mut roots = vec![Complex::zero(ctx); v];
    let deflated = PolyQ::from_coeffs(f.coeffs()[v..].to_vec());
    if deflated.is_constant() {
        return Ok(roots);
    }
    let coeffs = poly_to_complex(&deflated, ctx);
    roots.extend(aberth(&coeffs, ctx)?);
    Ok(roots)
}

fn aberth(coeffs: &[Complex], ctx: &RealCtx) -> Result<Vec<Complex>, Error> {
    let n = coeffs.len() - 1;
    let deriv = derivative_coeffs(coeffs, ctx);
    let lc = coeffs.last().unwrap();

    // Cauchy-style inclusion radius: 1 + max |a_i / a_n|.
    let mut radius = 1.0f64;
    let lc_abs = to_f64(&lc.abs(ctx));
    for c in &coeffs[..n] {
        let r = to_f64(&c.abs(ctx)) / lc_abs;
        if r.is_finite() {
            radius = radius.max(1.0 + r);
        }
    }

    // Initial guesses on a circle, angles offset to avoid real-axis symmetry
    // traps.
    let mut zs: Vec<Complex> = (0..n)
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * (j as f64) / (n as f64) + 0.4;
            Complex::new(
                ctx.from_f64(radius * theta.cos()),
                ctx.from_f64(radius * theta.sin()),
            )
        })
        .collect();

    let stop_bits = (ctx.bits() as i64) - 8;
    let max_iter = 100 + 20 * n;
    for _ in 0..max_iter {
        let mut max_step_exp = i64::MIN;
        let mut max_z_exp = 0i64;
        for i in 0..n {
            let p = eval_complex(coeffs, &zs[i], ctx);
            if p.is_zero() {
                continue;
            }
            let dp = eval_complex(&deriv, &zs[i], ctx);
            let w = if dp.is_zero() {
                // perturb off a critical point
                Complex::new(ctx.from_f64(1e-3), ctx.from_f64(1e-3))
            } else {
                p.div(&dp, ctx)
            };
            let mut sum = Complex::zero(ctx);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let diff = zs[i].sub(&zs[j], ctx);
                if diff.is_zero() {
                    continue;
                }
                sum = sum.add(&Complex::from_real(ctx.from_i64(1), ctx).div(&diff, ctx), ctx);
            }
            let denom = Complex::from_real(ctx.from_i64(1), ctx).sub(&w.mul(&sum, ctx), ctx);
            let step = if denom.is_zero() { w.clone() } else { w.div(&denom, ctx) };
            zs[i] = zs[i].sub(&step, ctx);
            let se = step.abs(ctx).exponent().unwrap_or(i64::MIN as i32 / 2) as i64;
            let ze = zs[i].abs(ctx).exponent().unwrap_or(0) as i64;
            max_step_exp = max_step_exp.max(se - ze);
            max_z_exp = max_z_exp.max(ze);
        }
        if max_step_exp == i64::MIN || max_step_exp < -stop_bits {
            return Ok(zs);
        }
    }
    Err(Error::RootFindingFailed)
}

/// Multiplicity-aware roots of an arbitrary nonzero polynomial: pairs of
/// (root, multiplicity), via Yun-style squarefree splitting.
pub fn complex_roots_with_multiplicity(
    f: &PolyQ,
    ctx: &RealCtx,
) -> Result<Vec<(Complex, usize)>, Error> {
    if f.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    // Peel one copy of the squarefree part per round; a root of multiplicity
    // m shows up in exactly the first m rounds.
    let mut out = Vec::new();
    let mut rem = f.clone();
    let mut rounds = 0usize;
    while !rem.is_constant() {
        rounds += 1;
        if rounds > f.deg() {
            return Err(Error::RootFindingFailed);
        }
        let sf = crate::exactcore::poly::squarefree_part(&rem)?;
        rem = crate::exactcore::poly::poly_div_exact(&rem, &sf)?;
        for r in complex_roots(&sf, ctx)? {
            out.push((r, 1));
        }
    }
    // Merge near-identical roots accumulated across rounds.
    let tol_exp = -(ctx.bits() as i64) / 2;
    let mut merged: Vec<(Complex, usize)> = Vec::new();
    for (r, m) in out {
        let mut found = false;
        for (mr, mm) in merged.iter_mut() {
            let d = mr.sub(&r, ctx).abs(ctx);
            let scale = mr.abs(ctx);
            let close = if scale.is_zero() {
                d.is_zero() || (d.exponent().unwrap_or(0) as i64) < tol_exp
            } else {
                (d.exponent().unwrap_or(i64::MIN as i32 / 2) as i64)
                    < (scale.exponent().unwrap_or(0) as i64) + tol_exp
            };
            if close {
                *mm += m;
                found = true;
                break;
            }
        }
        if !found {
            merged.push((r, m));
        }
    }
    Ok(merged)
}

/// Rational roots of a polynomial (exact), found by the rational root test.
pub fn rational_roots(f: &PolyQ) -> Vec<Rat> {
    if f.is_zero() || f.is_constant() {
        return Vec::new();
    }
    let v = f.valuation_at_zero();
    let mut out = Vec::new();
    if v > 0 {
        out.push(Rat::zero());
    }
    let g = PolyQ::from_coeffs(f.coeffs()[v..].to_vec());
    if g.is_constant() {
        return out;
    }
    // Clear denominators to an integer polynomial.
    let mut den = num_bigint::BigInt::from(1);
    for c in g.coeffs() {
        den = num_integer::Integer::lcm(&den, c.denom());
    }
    let ints: Vec<num_bigint::BigInt> = g
        .coeffs()
        .iter()
        .map(|c| (c * Rat::from(den.clone())).to_integer())
        .collect();
    let a0 = ints[0].clone();
    let an = ints.last().unwrap().clone();
    let ps = crate::exactcore::factor(&a0);
    let qs = crate::exactcore::factor(&an);
    let mut num_divs = divisors_from(&a0, &ps);
    num_divs.sort();
    num_divs.dedup();
    let mut den_divs = divisors_from(&an, &qs);
    den_divs.sort();
    den_divs.dedup();
    for p in &num_divs {
        for q in &den_divs {
            for sign in [1i64, -1] {
                let cand = Rat::new(p * num_bigint::BigInt::from(sign), q.clone());
                if g.eval(&cand).is_zero() && !out.contains(&cand) {
                    out.push(cand);
                }
            }
        }
    }
    out
}

fn divisors_from(n: &num_bigint::BigInt, primes: &[num_bigint::BigInt]) -> Vec<num_bigint::BigInt> {
    use num_traits::Signed;
    let n = n.abs();
    let mut divs = vec![num_bigint::BigInt::from(1)];
    for p in primes {
        let e = crate::exactcore::val_p_int(&n, p);
        let mut next = Vec::new();
        for d in &divs {
            let mut pk = num_bigint::BigInt::from(1);
            for _ in 0..=e {
                next.push(d * &pk);
                pk *= p;
            }
        }
        divs = next;
    }
    divs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactcore::rat_from_i64;

    fn sorted_reals(f: &PolyQ, ctx: &RealCtx) -> Vec<f64> {
        let mut rs: Vec<f64> = complex_roots(f, ctx).unwrap().iter().map(|z| to_f64(&z.re)).collect();
        rs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rs
    }

    #[test]
    fn golden_ratio_roots() {
        let ctx = RealCtx::new(128);
        let f = PolyQ::from_i64s(&[-1, -1, 1]);
        let rs = sorted_reals(&f, &ctx);
        assert!((rs[0] + 0.6180339887498949).abs() < 1e-12);
        assert!((rs[1] - 1.618033988749895).abs() < 1e-12);
    }

    #[test]
    fn roots_of_unity() {
        let ctx = RealCtx::new(192);
        // t^8 - 1
        let mut cs = vec![rat_from_i64(-1)];
        cs.extend(std::iter::repeat(Rat::zero()).take(7));
        cs.push(rat_from_i64(1));
        let f = PolyQ::from_coeffs(cs);
        let roots = complex_roots(&f, &ctx).unwrap();
        assert_eq!(roots.len(), 8);
        for z in &roots {
            assert!((to_f64(&z.abs(&ctx)) - 1.0).abs() < 1e-20);
        }
    }

    #[test]
    fn pure_imaginary_roots() {
        let ctx = RealCtx::new(128);
        let f = PolyQ::from_i64s(&[1, 0, 1]);
        let roots = complex_roots(&f, &ctx).unwrap();
        assert_eq!(roots.len(), 2);
        for z in &roots {
            assert!(to_f64(&z.re).abs() < 1e-20);
            assert!((to_f64(&z.im).abs() - 1.0).abs() < 1e-20);
        }
    }

    #[test]
    fn deflates_origin_roots() {
        let ctx = RealCtx::new(128);
        // t^3 - t^2 = t^2 (t - 1), squarefree part has roots {0, 1}
        let f = PolyQ::from_i64s(&[0, 0, -1, 1]);
        let roots = complex_roots_with_multiplicity(&f, &ctx).unwrap();
        let mut mults: Vec<(f64, usize)> = roots
            .iter()
            .map(|(z, m)| (to_f64(&z.re), *m))
            .collect();
        mults.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        assert_eq!(mults.len(), 2);
        assert!((mults[0].0).abs() < 1e-15 && mults[0].1 == 2);
        assert!((mults[1].0 - 1.0).abs() < 1e-15 && mults[1].1 == 1);
    }

    #[test]
    fn rational_root_search() {
        // (2t - 1)(t + 3) = 2t^2 + 5t - 3
        let f = PolyQ::from_i64s(&[-3, 5, 2]);
        let mut rs = rational_roots(&f);
        rs.sort();
        assert_eq!(rs, vec![rat_from_i64(-3), Rat::new(1.into(), 2.into())]);
        // t^2 + 1 has none
        assert!(rational_roots(&PolyQ::from_i64s(&[1, 0, 1])).is_empty());
    }
}
