//! Exact arithmetic substrate: big rationals, polynomials, p-adic
//! valuations, and the high-precision evaluation context.

pub mod poly;
pub mod real;
pub mod roots;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::Error;

/// Exact rational number, always stored reduced with positive denominator.
pub type Rat = num_rational::BigRational;

pub use poly::{poly_divrem, poly_gcd, resultant, PolyQ};
pub use real::{Complex, RealCtx, RF};

pub fn rat_from_i64(n: i64) -> Rat {
    Rat::from(BigInt::from(n))
}

/// Parses "n" or "p/q" into a rational.
pub fn parse_rat(s: &str) -> Result<Rat, Error> {
    let s = s.trim();
    let mk_err = || Error::MalformedRational(s.to_string());
    if let Some((n, d)) = s.split_once('/') {
        let num: BigInt = n.trim().parse().map_err(|_| mk_err())?;
        let den: BigInt = d.trim().parse().map_err(|_| mk_err())?;
        if den.is_zero() {
            return Err(mk_err());
        }
        Ok(Rat::new(num, den))
    } else {
        let num: BigInt = s.parse().map_err(|_| mk_err())?;
        Ok(Rat::from(num))
    }
}

/// Serializes a rational as "n" or "p/q".
pub fn format_rat(q: &Rat) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// The exponent of the prime `p` in `q`; errors on `q = 0`.
///
/// Under the normalization `|p|_p = 1/p` this gives
/// `log|q|_p = -val_p(q) * log p`.
pub fn val_p(q: &Rat, p: &BigInt) -> Result<i64, Error> {
    if q.is_zero() {
        return Err(Error::ValuationOfZero);
    }
    Ok(val_p_int(q.numer(), p) - val_p_int(q.denom(), p))
}

/// p-adic valuation of a nonzero integer.
pub fn val_p_int(n: &BigInt, p: &BigInt) -> i64 {
    debug_assert!(!n.is_zero());
    let mut v = 0i64;
    let mut cur = n.abs();
    loop {
        let (q, r) = cur.div_rem(p);
        if !r.is_zero() {
            return v;
        }
        v += 1;
        cur = q;
    }
}

/// Verifies the product formula `|q| * prod_p |q|_p = 1` exactly.
///
/// Numerator and denominator are split over a coprime base: small primes by
/// trial division, larger factors by budgeted Pollard rho, and any cofactor
/// that resists splitting kept as a coprime block (its own prime factors
/// contribute valuations exactly once, in the numerator or the denominator
/// but never both since q is reduced). The reconstruction check
/// `prod base^exp == value` is exact big-integer arithmetic, so a `true`
/// certifies that every extracted valuation is consistent and the place-sum
/// of log|q|_v vanishes. Always true for correct arithmetic; this is a test
/// oracle.
pub fn product_formula_check(q: &Rat) -> Result<bool, Error> {
    if q.is_zero() {
        return Err(Error::ValuationOfZero);
    }
    let check_side = |n: &BigInt| -> bool {
        let n = n.abs();
        if n.is_one() {
            return true;
        }
        let blocks = coprime_blocks(&n);
        let mut acc = BigInt::one();
        for (base, exp) in &blocks {
            // every block must be completely extracted
            if !(&n % base).is_zero() {
                return false;
            }
            acc *= pow_int(base, *exp);
        }
        acc == n
    };
    Ok(check_side(q.numer()) && check_side(q.denom()))
}

/// Splits |n| over a pairwise-coprime base with full exponents: small primes
/// by trial division, then budgeted rho, with gcd refinement keeping the
/// base coprime even when large composites stay unsplit.
pub fn coprime_blocks(n: &BigInt) -> Vec<(BigInt, u64)> {
    let original = n.abs().to_biguint().unwrap();
    if original.is_zero() || original.is_one() {
        return Vec::new();
    }
    let mut rem = original.clone();
    let mut bases: Vec<BigUint> = Vec::new();
    // trial division
    let mut p = 2u64;
    while p < 100_000 && rem > BigUint::one() {
        let pb = BigUint::from(p);
        if &pb * &pb > rem {
            break;
        }
        if (&rem % &pb).is_zero() {
            bases.push(pb.clone());
            while (&rem % &pb).is_zero() {
                rem /= &pb;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    // budgeted rho on what remains
    let mut stack = vec![rem];
    let mut rounds = 0;
    while let Some(m) = stack.pop() {
        if m.is_one() {
            continue;
        }
        rounds += 1;
        if rounds > 64 || is_prime(&m) {
            bases.push(m);
            continue;
        }
        match pollard_rho_budgeted(&m, 1 << 18) {
            Some(d) => {
                stack.push(&m / &d);
                stack.push(d);
            }
            None => bases.push(m),
        }
    }
    // Refine to a pairwise-coprime base whose powers reconstruct the
    // original exactly. Each pass either finishes (cofactor 1) or strictly
    // splits a block, so the loop terminates.
    let mut base = refine_pairwise_coprime(bases);
    let orig_int = BigInt::from(original.clone());
    loop {
        let mut out: Vec<(BigInt, u64)> = Vec::new();
        let mut product = BigUint::one();
        for b in &base {
            let bi = BigInt::from(b.clone());
            let e = val_p_int(&orig_int, &bi) as u64;
            if e == 0 {
                continue;
            }
            let mut pk = BigUint::one();
            for _ in 0..e {
                pk *= b;
            }
            product *= &pk;
            out.push((bi, e));
        }
        let cofactor = &original / &product;
        if cofactor.is_one() {
            return out;
        }
        // b never divides its own cofactor (the exponent was maximal), so
        // gcds with the cofactor strictly refine the base.
        base.push(cofactor);
        base = refine_pairwise_coprime(base);
    }
}

fn refine_pairwise_coprime(bases: Vec<BigUint>) -> Vec<BigUint> {
    let mut refined: Vec<BigUint> = Vec::new();
    let mut queue: Vec<BigUint> = bases;
    while let Some(mut b) = queue.pop() {
        if b.is_one() {
            continue;
        }
        let mut placed = false;
        for idx in 0..refined.len() {
            let r = refined[idx].clone();
            let g = b.gcd(&r);
            if g.is_one() {
                continue;
            }
            if g == r {
                // strip every copy of r out of b and keep going
                while (&b % &r).is_zero() {
                    b /= &r;
                }
                if b.is_one() {
                    placed = true;
                    break;
                }
                queue.push(b.clone());
                placed = true;
                break;
            }
            // split r into g and r/g, requeue b
            refined.remove(idx);
            queue.push(g.clone());
            queue.push(&r / &g);
            queue.push(b.clone());
            placed = true;
            break;
        }
        if !placed {
            refined.push(b);
        }
    }
    refined.sort();
    refined.dedup();
    refined
}

fn pow_int(p: &BigInt, e: u64) -> BigInt {
    let mut acc = BigInt::one();
    let mut base = p.clone();
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

/// Distinct prime factors of a nonzero integer, sorted ascending.
pub fn factor(n: &BigInt) -> Vec<BigInt> {
    let mut n = n.abs().to_biguint().unwrap();
    let mut out: Vec<BigUint> = Vec::new();
    if n.is_zero() || n.is_one() {
        return Vec::new();
    }
    for small in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47] {
        let p = BigUint::from(small);
        if (&n % &p).is_zero() {
            out.push(p.clone());
            while (&n % &p).is_zero() {
                n /= &p;
            }
        }
    }
    let mut stack = vec![n];
    while let Some(m) = stack.pop() {
        if m.is_one() {
            continue;
        }
        if is_prime(&m) {
            if !out.contains(&m) {
                out.push(m);
            }
            continue;
        }
        let d = pollard_rho(&m);
        stack.push(&m / &d);
        stack.push(d);
    }
    let mut out: Vec<BigInt> = out.into_iter().map(BigInt::from).collect();
    out.sort();
    out
}

/// Miller-Rabin with fixed witnesses, deterministic for inputs below 3.3e24
/// and overwhelmingly reliable beyond.
pub fn is_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    for small in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41] {
        let p = BigUint::from(small);
        if n == &p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n - BigUint::one();
    let s = n_minus_1.trailing_zeros().unwrap();
    let d = &n_minus_1 >> s;
    'witness: for a in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41] {
        let mut x = BigUint::from(a).modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn pollard_rho(n: &BigUint) -> BigUint {
    let one = BigUint::one();
    if (n % 2u32).is_zero() {
        return BigUint::from(2u32);
    }
    let mut c = BigUint::one();
    loop {
        let mut x = BigUint::from(2u32);
        let mut y = BigUint::from(2u32);
        let mut d = BigUint::one();
        let f = |v: &BigUint| (v * v + &c) % n;
        while d.is_one() {
            x = f(&x);
            y = f(&f(&y));
            let diff = if x > y { &x - &y } else { &y - &x };
            if diff.is_zero() {
                break;
            }
            d = diff.gcd(n);
        }
        if !d.is_one() && &d != n {
            return d;
        }
        c += &one;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn val_p_examples() {
        let q = Rat::new(BigInt::from(12), BigInt::from(5));
        assert_eq!(val_p(&q, &BigInt::from(2)).unwrap(), 2);
        assert_eq!(val_p(&q, &BigInt::from(5)).unwrap(), -1);
        assert_eq!(val_p(&Rat::one(), &BigInt::from(7)).unwrap(), 0);
        assert!(val_p(&Rat::zero(), &BigInt::from(2)).is_err());
    }

    #[test]
    fn product_formula_examples() {
        assert!(product_formula_check(&Rat::new(BigInt::from(6), BigInt::from(5))).unwrap());
        assert!(product_formula_check(&rat_from_i64(-1)).unwrap());
        let big = Rat::from(BigInt::from(2).pow(100));
        assert!(product_formula_check(&big).unwrap());
    }

    #[test]
    fn factor_composite() {
        let n = BigInt::from(2u64 * 3 * 3 * 103 * 10007);
        assert_eq!(
            factor(&n),
            vec![BigInt::from(2), BigInt::from(3), BigInt::from(103), BigInt::from(10007)]
        );
        assert!(factor(&BigInt::one()).is_empty());
    }

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_rat("3/6").unwrap(), Rat::new(BigInt::from(1), BigInt::from(2)));
        assert_eq!(parse_rat("-7").unwrap(), rat_from_i64(-7));
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("x").is_err());
        assert_eq!(format_rat(&Rat::new(BigInt::from(-2), BigInt::from(4))), "-1/2");
    }
}
