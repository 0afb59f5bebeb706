//! High-precision real and complex evaluation context.
//!
//! All archimedean arithmetic goes through a [`RealCtx`] carrying the working
//! precision in bits. Finite-place arithmetic never touches floats; reals
//! enter only at the archimedean place and at reporting time.

use std::cell::RefCell;

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::exactcore::Rat;

/// High-precision real number (arbitrary-precision binary float).
pub type RF = BigFloat;

const RM: RoundingMode = RoundingMode::ToEven;

/// Evaluation context: a working precision plus cached constants.
///
/// Not `Sync`; concurrent work should give each worker its own context.
pub struct RealCtx {
    bits: usize,
    cc: RefCell<Consts>,
}

impl RealCtx {
    pub fn new(bits: usize) -> Self {
        let bits = bits.max(64);
        RealCtx {
            bits,
            cc: RefCell::new(Consts::new().expect("constants cache")),
        }
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    /// A context at doubled precision, for recompute-and-compare checks.
    pub fn doubled(&self) -> RealCtx {
        RealCtx::new(self.bits * 2)
    }

    pub fn zero(&self) -> RF {
        RF::new(self.bits)
    }

    pub fn from_i64(&self, n: i64) -> RF {
        RF::from_i64(n, self.bits)
    }

    pub fn from_f64(&self, x: f64) -> RF {
        RF::from_f64(x, self.bits)
    }

    pub fn from_bigint(&self, n: &BigInt) -> RF {
        // Huge integers are truncated to the working precision up front; the
        // discarded low bits are below the final rounding error anyway.
        let nbits = n.bits();
        let keep = (self.bits + 64) as u64;
        let (m, shift) = if nbits > keep {
            (n >> (nbits - keep), (nbits - keep) as i64)
        } else {
            (n.clone(), 0)
        };
        let digits = m.magnitude().to_u64_digits();
        if digits.is_empty() {
            return self.zero();
        }
        let p_exact = (digits.len() * 64 + 64).max(self.bits);
        let two64 = RF::from_u8(2, p_exact).powi(64, p_exact, RM);
        let mut acc = RF::new(p_exact);
        for d in digits.iter().rev() {
            acc = acc.mul(&two64, p_exact, RM).add(&RF::from_u64(*d, p_exact), p_exact, RM);
        }
        if n.is_negative() {
            acc = acc.neg();
        }
        acc.set_precision(self.bits, RM).expect("set_precision");
        if shift != 0 {
            acc = self.scale_pow2(&acc, shift);
        }
        acc
    }

    pub fn from_rat(&self, q: &Rat) -> RF {
        if q.is_zero() {
            return self.zero();
        }
        let hi = RealCtx::new(self.bits + 64);
        let num = hi.from_bigint(q.numer());
        let den = hi.from_bigint(q.denom());
        let mut v = num.div(&den, self.bits + 64, RM);
        v.set_precision(self.bits, RM).expect("set_precision");
        v
    }

    pub fn add(&self, a: &RF, b: &RF) -> RF {
        a.add(b, self.bits, RM)
    }

    pub fn sub(&self, a: &RF, b: &RF) -> RF {
        a.sub(b, self.bits, RM)
    }

    pub fn mul(&self, a: &RF, b: &RF) -> RF {
        a.mul(b, self.bits, RM)
    }

    pub fn div(&self, a: &RF, b: &RF) -> RF {
        a.div(b, self.bits, RM)
    }

    pub fn recip(&self, a: &RF) -> RF {
        a.reciprocal(self.bits, RM)
    }

    pub fn sqrt(&self, a: &RF) -> RF {
        a.sqrt(self.bits, RM)
    }

    pub fn ln(&self, a: &RF) -> RF {
        a.ln(self.bits, RM, &mut self.cc.borrow_mut())
    }

    pub fn exp(&self, a: &RF) -> RF {
        a.exp(self.bits, RM, &mut self.cc.borrow_mut())
    }

    pub fn sin(&self, a: &RF) -> RF {
        a.sin(self.bits, RM, &mut self.cc.borrow_mut())
    }

    pub fn cos(&self, a: &RF) -> RF {
        a.cos(self.bits, RM, &mut self.cc.borrow_mut())
    }

    pub fn pi(&self) -> RF {
        self.cc.borrow_mut().pi(self.bits, RM)
    }

    pub fn ln_bigint(&self, n: &BigInt) -> RF {
        self.ln(&self.from_bigint(n))
    }

    /// log of the absolute value of a nonzero rational.
    pub fn ln_abs_rat(&self, q: &Rat) -> RF {
        let hi = RealCtx::new(self.bits + 64);
        let num = hi.ln(&hi.from_bigint(&q.numer().abs()));
        let den = hi.ln(&hi.from_bigint(&q.denom().abs()));
        let mut v = num.sub(&den, self.bits + 64, RM);
        v.set_precision(self.bits, RM).expect("set_precision");
        v
    }

    pub fn abs(&self, a: &RF) -> RF {
        a.abs()
    }

    pub fn neg(&self, a: &RF) -> RF {
        a.neg()
    }

    pub fn max(&self, a: &RF, b: &RF) -> RF {
        if a.cmp(b).unwrap_or(0) >= 0 {
            a.clone()
        } else {
            b.clone()
        }
    }

    pub fn lt(&self, a: &RF, b: &RF) -> bool {
        a.cmp(b).map(|c| c < 0).unwrap_or(false)
    }

    pub fn scale_pow2(&self, a: &RF, e: i64) -> RF {
        if a.is_zero() {
            return a.clone();
        }
        let mut out = a.clone();
        let cur = out.exponent().expect("finite");
        out.set_exponent(cur + e as i32);
        out
    }
}

/// Converts to f64 for reporting and tolerance checks.
pub fn to_f64(x: &RF) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_inf_pos() {
        return f64::INFINITY;
    }
    if x.is_inf_neg() {
        return f64::NEG_INFINITY;
    }
    let (words, _len, sign, e, _) = x.as_raw_parts().expect("finite number");
    let hi = *words.last().unwrap() as f64;
    let lo = if words.len() >= 2 {
        words[words.len() - 2] as f64
    } else {
        0.0
    };
    // mantissa interpreted as a fraction in [1/2, 1)
    let mant = hi / 18446744073709551616.0 + lo / 3.402823669209385e38;
    let e = e as i32;
    let val = if e > 1023 {
        f64::INFINITY
    } else if e < -1020 {
        0.0
    } else {
        mant * (e as f64).exp2()
    };
    if sign == Sign::Neg {
        -val
    } else {
        val
    }
}

/// High-precision complex number.
#[derive(Clone, Debug)]
pub struct Complex {
    pub re: RF,
    pub im: RF,
}

impl Complex {
    pub fn new(re: RF, im: RF) -> Self {
        Complex { re, im }
    }

    pub fn zero(ctx: &RealCtx) -> Self {
        Complex::new(ctx.zero(), ctx.zero())
    }

    pub fn from_real(re: RF, ctx: &RealCtx) -> Self {
        Complex::new(re, ctx.zero())
    }

    pub fn from_rat(q: &Rat, ctx: &RealCtx) -> Self {
        Complex::from_real(ctx.from_rat(q), ctx)
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn add(&self, o: &Complex, ctx: &RealCtx) -> Complex {
        Complex::new(ctx.add(&self.re, &o.re), ctx.add(&self.im, &o.im))
    }

    pub fn sub(&self, o: &Complex, ctx: &RealCtx) -> Complex {
        Complex::new(ctx.sub(&self.re, &o.re), ctx.sub(&self.im, &o.im))
    }

    pub fn mul(&self, o: &Complex, ctx: &RealCtx) -> Complex {
        let re = ctx.sub(&ctx.mul(&self.re, &o.re), &ctx.mul(&self.im, &o.im));
        let im = ctx.add(&ctx.mul(&self.re, &o.im), &ctx.mul(&self.im, &o.re));
        Complex::new(re, im)
    }

    pub fn mul_real(&self, s: &RF, ctx: &RealCtx) -> Complex {
        Complex::new(ctx.mul(&self.re, s), ctx.mul(&self.im, s))
    }

    pub fn div(&self, o: &Complex, ctx: &RealCtx) -> Complex {
        let d = o.norm_sqr(ctx);
        let num = self.mul(&o.conj(), ctx);
        Complex::new(ctx.div(&num.re, &d), ctx.div(&num.im, &d))
    }

    pub fn conj(&self) -> Complex {
        Complex::new(self.re.clone(), self.im.neg())
    }

    pub fn neg(&self) -> Complex {
        Complex::new(self.re.neg(), self.im.neg())
    }

    pub fn norm_sqr(&self, ctx: &RealCtx) -> RF {
        ctx.add(&ctx.mul(&self.re, &self.re), &ctx.mul(&self.im, &self.im))
    }

    pub fn abs(&self, ctx: &RealCtx) -> RF {
        if self.im.is_zero() {
            return self.re.abs();
        }
        if self.re.is_zero() {
            return self.im.abs();
        }
        ctx.sqrt(&self.norm_sqr(ctx))
    }

    /// log|z|; the caller must ensure z is nonzero.
    pub fn ln_abs(&self, ctx: &RealCtx) -> RF {
        let half = ctx.from_rat(&Rat::new(BigInt::from(1), BigInt::from(2)));
        ctx.mul(&ctx.ln(&self.norm_sqr(ctx)), &half)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactcore::rat_from_i64;

    #[test]
    fn bigint_round_trip() {
        let ctx = RealCtx::new(128);
        let n = BigInt::parse_bytes(b"123456789012345678901234567890", 10).unwrap();
        let x = ctx.from_bigint(&n);
        let approx = to_f64(&x);
        assert!((approx - 1.2345678901234568e29).abs() / 1e29 < 1e-12);
        let neg = ctx.from_bigint(&-n);
        assert!(to_f64(&neg) < 0.0);
    }

    #[test]
    fn ln_and_sqrt() {
        let ctx = RealCtx::new(192);
        let two = ctx.from_i64(2);
        let l = ctx.ln(&two);
        assert!((to_f64(&l) - std::f64::consts::LN_2).abs() < 1e-15);
        let s = ctx.sqrt(&two);
        assert!((to_f64(&s) - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn rational_conversion() {
        let ctx = RealCtx::new(128);
        let q = Rat::new(BigInt::from(-22), BigInt::from(7));
        assert!((to_f64(&ctx.from_rat(&q)) + 22.0 / 7.0).abs() < 1e-15);
        assert!((to_f64(&ctx.ln_abs_rat(&q)) - (22f64 / 7.0).ln()).abs() < 1e-15);
        assert_eq!(to_f64(&ctx.from_rat(&rat_from_i64(0))), 0.0);
    }

    #[test]
    fn complex_arithmetic() {
        let ctx = RealCtx::new(128);
        let z = Complex::new(ctx.from_i64(3), ctx.from_i64(4));
        assert!((to_f64(&z.abs(&ctx)) - 5.0).abs() < 1e-15);
        let w = z.div(&z, &ctx);
        assert!((to_f64(&w.re) - 1.0).abs() < 1e-15);
        assert!(to_f64(&w.im).abs() < 1e-15);
        assert!((to_f64(&z.ln_abs(&ctx)) - 5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn pow2_scaling() {
        let ctx = RealCtx::new(64);
        let x = ctx.from_i64(3);
        assert_eq!(to_f64(&ctx.scale_pow2(&x, 4)), 48.0);
        assert_eq!(to_f64(&ctx.scale_pow2(&x, -1)), 1.5);
    }
}
