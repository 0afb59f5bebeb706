//! Exact univariate polynomials over the rationals.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::Error;
use crate::exactcore::Rat;

/// A univariate polynomial with rational coefficients, stored in ascending
/// degree order with no trailing zero coefficients.
#[derive(Clone, PartialEq, Eq)]
pub struct PolyQ {
    coeffs: Vec<Rat>,
}

impl std::fmt::Debug for PolyQ {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PolyQ[{}]", self.display())
    }
}

impl PolyQ {
    pub fn zero() -> Self {
        PolyQ { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        PolyQ::constant(Rat::one())
    }

    pub fn constant(c: Rat) -> Self {
        if c.is_zero() {
            PolyQ::zero()
        } else {
            PolyQ { coeffs: vec![c] }
        }
    }

    /// `t^n` with coefficient `c`.
    pub fn monomial(c: Rat, n: usize) -> Self {
        if c.is_zero() {
            return PolyQ::zero();
        }
        let mut coeffs = vec![Rat::zero(); n + 1];
        coeffs[n] = c;
        PolyQ { coeffs }
    }

    /// Builds from ascending-degree coefficients, trimming trailing zeros.
    pub fn from_coeffs(mut coeffs: Vec<Rat>) -> Self {
        while coeffs.last().map(|c| c.is_zero()).unwrap_or(false) {
            coeffs.pop();
        }
        PolyQ { coeffs }
    }

    pub fn from_i64s(cs: &[i64]) -> Self {
        PolyQ::from_coeffs(cs.iter().map(|&c| Rat::from(BigInt::from(c))).collect())
    }

    pub fn coeffs(&self) -> &[Rat] {
        &self.coeffs
    }

    /// Coefficient of `t^i` (zero beyond the degree).
    pub fn coeff(&self, i: usize) -> Rat {
        self.coeffs.get(i).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with -1 for the zero polynomial.
    pub fn degree(&self) -> i64 {
        self.coeffs.len() as i64 - 1
    }

    pub fn deg(&self) -> usize {
        debug_assert!(!self.is_zero());
        self.coeffs.len() - 1
    }

    pub fn leading_coeff(&self) -> Rat {
        self.coeffs.last().cloned().unwrap_or_else(Rat::zero)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    pub fn eval(&self, x: &Rat) -> Rat {
        let mut acc = Rat::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// Order of vanishing at t = 0; zero polynomial reports 0.
    pub fn valuation_at_zero(&self) -> usize {
        self.coeffs
            .iter()
            .position(|c| !c.is_zero())
            .unwrap_or(0)
    }

    pub fn derivative(&self) -> PolyQ {
        if self.coeffs.len() <= 1 {
            return PolyQ::zero();
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c * Rat::from(BigInt::from(i)))
            .collect();
        PolyQ::from_coeffs(coeffs)
    }

    pub fn scale(&self, c: &Rat) -> PolyQ {
        if c.is_zero() {
            return PolyQ::zero();
        }
        PolyQ {
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    pub fn monic(&self) -> PolyQ {
        if self.is_zero() {
            return PolyQ::zero();
        }
        let lc = self.leading_coeff();
        self.scale(&lc.recip())
    }

    pub fn add(&self, other: &PolyQ) -> PolyQ {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = Vec::with_capacity(n);
        for i in 0..n {
            coeffs.push(self.coeff(i) + other.coeff(i));
        }
        PolyQ::from_coeffs(coeffs)
    }

    pub fn sub(&self, other: &PolyQ) -> PolyQ {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = Vec::with_capacity(n);
        for i in 0..n {
            coeffs.push(self.coeff(i) - other.coeff(i));
        }
        PolyQ::from_coeffs(coeffs)
    }

    pub fn mul(&self, other: &PolyQ) -> PolyQ {
        if self.is_zero() || other.is_zero() {
            return PolyQ::zero();
        }
        let mut coeffs = vec![Rat::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                coeffs[i + j] += a * b;
            }
        }
        PolyQ::from_coeffs(coeffs)
    }

    /// Human-readable form, used by Debug and the CLI.
    pub fn display(&self) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut parts = Vec::new();
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let cs = c.to_string();
            let term = match i {
                0 => cs,
                1 if c.is_one() => "t".into(),
                1 => format!("{cs}*t"),
                _ if c.is_one() => format!("t^{i}"),
                _ => format!("{cs}*t^{i}"),
            };
            parts.push(term);
        }
        parts.join(" + ")
    }
}

/// Exact Euclidean division: `a = b*q + r` with `deg r < deg b`.
pub fn poly_divrem(a: &PolyQ, b: &PolyQ) -> Result<(PolyQ, PolyQ), Error> {
    if b.is_zero() {
        return Err(Error::ZeroDivisor);
    }
    let db = b.deg();
    let blc = b.leading_coeff();
    let mut rem = a.coeffs.clone();
    let mut quot = vec![Rat::zero(); a.coeffs.len().saturating_sub(db)];
    while rem.len() > db {
        let top = rem.last().unwrap().clone();
        let k = rem.len() - 1 - db;
        let q = &top / &blc;
        if !q.is_zero() {
            for (j, bc) in b.coeffs.iter().enumerate() {
                let t = &q * bc;
                rem[k + j] -= t;
            }
            quot[k] = q;
        }
        debug_assert!(rem.last().unwrap().is_zero());
        rem.pop();
        while rem.last().map(|c| c.is_zero()).unwrap_or(false) && rem.len() > db {
            rem.pop();
        }
    }
    Ok((PolyQ::from_coeffs(quot), PolyQ::from_coeffs(rem)))
}

/// Divides exactly, failing if the remainder is nonzero.
pub fn poly_div_exact(a: &PolyQ, b: &PolyQ) -> Result<PolyQ, Error> {
    let (q, r) = poly_divrem(a, b)?;
    if !r.is_zero() {
        return Err(Error::InexactDivision);
    }
    Ok(q)
}

/// Monic greatest common divisor.
///
/// Uses the primitive polynomial remainder sequence over the integers to keep
/// intermediate coefficients small.
pub fn poly_gcd(a: &PolyQ, b: &PolyQ) -> Result<PolyQ, Error> {
    if a.is_zero() && b.is_zero() {
        return Err(Error::GcdOfZero);
    }
    if a.is_zero() {
        return Ok(b.monic());
    }
    if b.is_zero() {
        return Ok(a.monic());
    }
    let mut f = primitive_part(a);
    let mut g = primitive_part(b);
    if f.len() < g.len() {
        std::mem::swap(&mut f, &mut g);
    }
    loop {
        if g.len() == 1 {
            return Ok(PolyQ::one());
        }
        let r = pseudo_rem(&f, &g);
        if r.is_empty() {
            let grat: Vec<Rat> = g.iter().map(|c| Rat::from(c.clone())).collect();
            return Ok(PolyQ::from_coeffs(grat).monic());
        }
        f = g;
        g = prim_int(r);
    }
}

/// Clears denominators and removes integer content: a primitive integer image.
fn primitive_part(p: &PolyQ) -> Vec<BigInt> {
    let mut den = BigInt::one();
    for c in p.coeffs() {
        den = den.lcm(c.denom());
    }
    let ints: Vec<BigInt> = p.coeffs().iter().map(|c| (c * Rat::from(den.clone())).to_integer()).collect();
    prim_int(ints)
}

fn prim_int(mut v: Vec<BigInt>) -> Vec<BigInt> {
    while v.last().map(|c| c.is_zero()).unwrap_or(false) {
        v.pop();
    }
    if v.is_empty() {
        return v;
    }
    let mut g = BigInt::zero();
    for c in &v {
        g = g.gcd(c);
    }
    if v.last().unwrap().is_negative() {
        g = -g;
    }
    for c in v.iter_mut() {
        *c = &*c / &g;
    }
    v
}

/// Pseudo-remainder of integer polynomials: rem(lc(g)^(df-dg+1) * f, g).
fn pseudo_rem(f: &[BigInt], g: &[BigInt]) -> Vec<BigInt> {
    let (r, e) = prem_tracked(f, g);
    if r.is_empty() {
        return r;
    }
    // Degenerate reductions may skip multiplier steps; gcd use does not care,
    // so return the partially scaled remainder as-is.
    let _ = e;
    r
}

/// Pseudo-remainder that reports how many lc(g) multiplications occurred.
fn prem_tracked(f: &[BigInt], g: &[BigInt]) -> (Vec<BigInt>, u64) {
    let dg = g.len() - 1;
    let glc = g.last().unwrap().clone();
    let mut r: Vec<BigInt> = f.to_vec();
    let mut e = 0u64;
    while r.len() > dg {
        let top = r.last().unwrap().clone();
        let k = r.len() - 1 - dg;
        for c in r.iter_mut() {
            *c = &*c * &glc;
        }
        e += 1;
        for (j, gc) in g.iter().enumerate() {
            r[k + j] -= &top * gc;
        }
        debug_assert!(r.last().unwrap().is_zero());
        while r.last().map(|c| c.is_zero()).unwrap_or(false) && r.len() > dg {
            r.pop();
        }
    }
    while r.last().map(|c| c.is_zero()).unwrap_or(false) {
        r.pop();
    }
    (r, e)
}

/// The classical resultant, satisfying
/// `Res(A,B) = lc(A)^deg(B) * prod_{A(a)=0} B(a)`.
///
/// Computed by the subresultant (fraction-free) pseudo-remainder sequence on
/// primitive integer parts, with the rational contents restored afterwards.
pub fn resultant(a: &PolyQ, b: &PolyQ) -> Result<Rat, Error> {
    if a.is_zero() || b.is_zero() {
        return Err(Error::ZeroResultantInput);
    }
    if a.is_constant() && b.is_constant() {
        return Ok(Rat::one());
    }
    if a.is_constant() {
        return Ok(pow_rat(&a.leading_coeff(), b.deg() as u64));
    }
    if b.is_constant() {
        return Ok(pow_rat(&b.leading_coeff(), a.deg() as u64));
    }
    // Res(cA', B) = c^deg(B) Res(A', B), and symmetrically.
    let (ca, pa) = rational_content(a);
    let (cb, pb) = rational_content(b);
    let res_int = subresultant_int(&pa, &pb);
    let scale = pow_rat(&ca, b.deg() as u64) * pow_rat(&cb, a.deg() as u64);
    Ok(Rat::from(res_int) * scale)
}

fn pow_rat(c: &Rat, e: u64) -> Rat {
    let mut acc = Rat::one();
    let mut base = c.clone();
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            acc *= &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    acc
}

fn rational_content(p: &PolyQ) -> (Rat, Vec<BigInt>) {
    let prim = primitive_part(p);
    // content = lc(p) / lc(prim)
    let c = p.leading_coeff() / Rat::from(prim.last().unwrap().clone());
    (c, prim)
}

/// Subresultant PRS resultant for primitive integer polynomials, following
/// Brown's algorithm (Cohen, Alg. 3.3.7).
fn subresultant_int(a0: &[BigInt], b0: &[BigInt]) -> BigInt {
    let mut negate = false;
    let (mut a, mut b) = if a0.len() >= b0.len() {
        (a0.to_vec(), b0.to_vec())
    } else {
        if (a0.len() - 1) % 2 == 1 && (b0.len() - 1) % 2 == 1 {
            negate = !negate;
        }
        (b0.to_vec(), a0.to_vec())
    };
    if b.len() == 1 {
        let res = pow_big(&b[0], (a.len() - 1) as u64);
        return if negate { -res } else { res };
    }

    let mut g = BigInt::one();
    let mut h = BigInt::one();
    loop {
        let da = a.len() - 1;
        let db = b.len() - 1;
        let delta = (da - db) as u64;
        if da % 2 == 1 && db % 2 == 1 {
            negate = !negate;
        }
        let (r, e) = prem_tracked(&a, &b);
        if r.is_empty() {
            return BigInt::zero();
        }
        let blc = b.last().unwrap().clone();
        // Scale up to the full prem normalization lc(b)^(delta+1).
        let fix = pow_big(&blc, delta + 1 - e);
        let divisor = &g * pow_big(&h, delta);
        let rnew: Vec<BigInt> = r.iter().map(|c| (c * &fix) / &divisor).collect();
        a = b;
        b = rnew;
        if b.len() == 1 {
            // Res = s * lc(b)^deg(a) / h^(deg(a) - 1)
            let dega = (a.len() - 1) as u64;
            let res = pow_big(&b[0], dega) / pow_big(&h, dega - 1);
            return if negate { -res } else { res };
        }
        g = a.last().unwrap().clone();
        h = if delta == 0 {
            h
        } else {
            pow_big(&g, delta) / pow_big(&h, delta - 1)
        };
    }
}

fn pow_big(c: &BigInt, e: u64) -> BigInt {
    let mut acc = BigInt::one();
    let mut base = c.clone();
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            acc *= &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    acc
}

/// Squarefree part F / gcd(F, F').
pub fn squarefree_part(f: &PolyQ) -> Result<PolyQ, Error> {
    if f.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    if f.is_constant() {
        return Ok(f.clone());
    }
    let g = poly_gcd(f, &f.derivative())?;
    if g.is_constant() {
        return Ok(f.clone());
    }
    poly_div_exact(f, &g)
}

pub fn is_squarefree(f: &PolyQ) -> Result<bool, Error> {
    if f.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    if f.is_constant() {
        return Ok(true);
    }
    Ok(poly_gcd(f, &f.derivative())?.is_constant())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(cs: &[i64]) -> PolyQ {
        PolyQ::from_i64s(cs)
    }

    fn r(n: i64) -> Rat {
        Rat::from(BigInt::from(n))
    }

    fn rq(n: i64, d: i64) -> Rat {
        Rat::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn divrem_difference_of_squares() {
        let (q, rem) = poly_divrem(&p(&[-1, 0, 1]), &p(&[-1, 1])).unwrap();
        assert_eq!(q, p(&[1, 1]));
        assert!(rem.is_zero());
    }

    #[test]
    fn divrem_with_remainder() {
        let (q, rem) = poly_divrem(&p(&[0, 0, 1]), &p(&[-1, 1])).unwrap();
        assert_eq!(q, p(&[1, 1]));
        assert_eq!(rem, p(&[1]));
    }

    #[test]
    fn divrem_rational_quotient() {
        // t^3 - 2t by 2t^2 -> quotient t/2, remainder -2t
        let a = p(&[0, -2, 0, 1]);
        let b = p(&[0, 0, 2]);
        let (q, rem) = poly_divrem(&a, &b).unwrap();
        assert_eq!(q, PolyQ::from_coeffs(vec![Rat::zero(), rq(1, 2)]));
        assert_eq!(rem, p(&[0, -2]));
        assert_eq!(b.mul(&q).add(&rem), a);
    }

    #[test]
    fn divrem_zero_divisor_errors() {
        assert!(poly_divrem(&p(&[1]), &PolyQ::zero()).is_err());
    }

    #[test]
    fn gcd_basic() {
        assert_eq!(poly_gcd(&p(&[-1, 0, 1]), &p(&[-1, 1])).unwrap(), p(&[-1, 1]));
        assert_eq!(poly_gcd(&p(&[1, 0, 1]), &p(&[-1, 0, 1])).unwrap(), p(&[1]));
        // t^4 - t and t^2 - t share t^2 - t
        assert_eq!(
            poly_gcd(&p(&[0, -1, 0, 0, 1]), &p(&[0, -1, 1])).unwrap(),
            p(&[0, -1, 1])
        );
        assert!(poly_gcd(&PolyQ::zero(), &PolyQ::zero()).is_err());
    }

    #[test]
    fn resultant_linear_pair() {
        assert_eq!(resultant(&p(&[-3, 1]), &p(&[-1, 1])).unwrap(), r(2));
    }

    #[test]
    fn resultant_quadratic_linear() {
        // (t^2 - t, t - 2): (0-2)(1-2) = 2
        assert_eq!(resultant(&p(&[0, -1, 1]), &p(&[-2, 1])).unwrap(), r(2));
    }

    #[test]
    fn resultant_two_quadratics() {
        // (t^2+1, t^2-1): product over roots +-i of (t^2-1) is (-2)(-2) = 4
        assert_eq!(resultant(&p(&[1, 0, 1]), &p(&[-1, 0, 1])).unwrap(), r(4));
    }

    #[test]
    fn resultant_with_lc_and_contents() {
        // Res(2t^2 - 2, 3t - 3) = 2^1 * ((3*1-3)(3*(-1)-3)) / ... direct:
        // lc(A)^deg(B) prod B(roots of A) = 2 * (0 * -6) = 0
        assert_eq!(
            resultant(&p(&[-2, 0, 2]), &p(&[-3, 3])).unwrap(),
            r(0)
        );
        // Res(2t-4, 3t-3): lc(A)^1 * B(2) = 2*3 = 6... B(2)=3 -> 2*3=6
        assert_eq!(resultant(&p(&[-4, 2]), &p(&[-3, 3])).unwrap(), r(6));
    }

    #[test]
    fn resultant_swap_sign() {
        let a = p(&[-3, 1, 2]);
        let b = p(&[5, -2, 0, 1]);
        let ab = resultant(&a, &b).unwrap();
        let ba = resultant(&b, &a).unwrap();
        // deg a * deg b = 6 even -> equal
        assert_eq!(ab, ba);
        let c = p(&[1, 1]);
        let d = p(&[2, -7, 0, 0, 1]);
        // deg 1 * deg 4 even
        assert_eq!(resultant(&c, &d).unwrap(), resultant(&d, &c).unwrap());
        let e = p(&[1, 3, 1]);
        let f = p(&[4, 1, 0, 1]);
        let ef = resultant(&e, &f).unwrap();
        let fe = resultant(&f, &e).unwrap();
        // deg 2 * deg 3 = 6 even -> equal as well; use odd*odd case:
        let g = p(&[2, 1]);
        let h = p(&[5, 7, 0, 1]);
        let gh = resultant(&g, &h).unwrap();
        let hg = resultant(&h, &g).unwrap();
        assert_eq!(gh, -hg.clone() * r(-1) * r(-1));
        // deg 1 * deg 3 odd: Res(g,h) = -Res(h,g)
        assert_eq!(gh, -hg);
        assert_eq!(ef, fe);
    }

    #[test]
    fn resultant_multiplicative_in_second_argument() {
        let a = p(&[1, 2, 0, 1]);
        let b = p(&[-2, 1]);
        let c = p(&[3, 0, 1]);
        let bc = b.mul(&c);
        let lhs = resultant(&a, &bc).unwrap();
        let rhs = resultant(&a, &b).unwrap() * resultant(&a, &c).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn squarefree_detection() {
        assert!(is_squarefree(&p(&[-1, 0, 1])).unwrap());
        let sq = p(&[-1, 1]).mul(&p(&[-1, 1]));
        assert!(!is_squarefree(&sq).unwrap());
        assert_eq!(squarefree_part(&sq).unwrap().monic(), p(&[-1, 1]));
    }

    #[test]
    fn eval_and_derivative() {
        let f = p(&[-1, -1, 1]); // t^2 - t - 1
        assert_eq!(f.eval(&r(2)), r(1));
        assert_eq!(f.derivative(), p(&[-1, 2]));
        assert_eq!(f.valuation_at_zero(), 0);
        assert_eq!(p(&[0, 0, 3, 1]).valuation_at_zero(), 2);
    }
}
