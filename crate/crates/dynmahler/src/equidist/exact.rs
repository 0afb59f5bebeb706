//! Exact-mode averages: the sum of log|F| over a periodic or preimage
//! divisor becomes resultant data valid at every place simultaneously.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::dynmap::{fixed_point_poly, preimage_poly, remove_common_factors, BinaryFormPair, ProjPointQ};
use crate::error::Error;
use crate::exactcore::poly::PolyQ;
use crate::exactcore::real::{to_f64, RealCtx};

use crate::exactcore::{resultant, val_p, Rat};
use crate::heights::Place;

/// The exact data behind one finite-k average:
/// sum over roots of Rt of log|F|_v = log|Res(Rt, F)|_v - deg(F) log|lc Rt|_v,
/// so the per-place values all come from one exact rational.
#[derive(Clone, Debug)]
pub struct ExactAverage {
    pub k: u32,
    pub d: usize,
    /// Res(Rt, F), nonzero after factor removal.
    pub resultant: Rat,
    /// lc(Rt): gamma_k (periodic) or eta_k (preimage) up to the removed
    /// monic factors.
    pub lc_rt: Rat,
    pub deg_f: u64,
    pub deg_rt: u64,
    /// total degree removed by the common-factor chain
    pub removed: u64,
}

impl ExactAverage {
    /// The single rational whose absolute values realize the average:
    /// rho = Res(Rt, F) / lc(Rt)^deg(F).
    pub fn log_rational(&self) -> Rat {
        let mut den = Rat::one();
        for _ in 0..self.deg_f {
            den *= &self.lc_rt;
        }
        &self.resultant / den
    }

    /// Exact coefficient of log p in the value at a finite place.
    pub fn log_p_coeff(&self, p: &BigInt) -> Result<Rat, Error> {
        let rho = self.log_rational();
        let v = val_p(&rho, p)?;
        let dk = BigInt::from(self.d).pow(self.k);
        Ok(Rat::new(BigInt::from(-v), dk))
    }

    /// The value of the average at a place, evaluated at the context
    /// precision.
    pub fn value_at(&self, place: &Place, ctx: &RealCtx) -> Result<f64, Error> {
        match place {
            Place::Infinity => {
                let rho = self.log_rational();
                let dk = ctx.from_bigint(&BigInt::from(self.d).pow(self.k));
                Ok(to_f64(&ctx.div(&ctx.ln_abs_rat(&rho), &dk)))
            }
            Place::Finite(p) => {
                let c = self.log_p_coeff(p)?;
                Ok(crate::heights::rat_to_f64(&c, ctx) * to_f64(&ctx.ln_bigint(p)))
            }
        }
    }
}

/// Exact-mode periodic average data at level k.
pub fn periodic_average_exact(
    map: &BinaryFormPair,
    f: &PolyQ,
    k: u32,
    degree_cap: u64,
) -> Result<ExactAverage, Error> {
    if f.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let fp = fixed_point_poly(map, k, degree_cap)?;
    build_average(map, f, k, &fp.rk)
}

/// Exact-mode preimage average data at level k for a nonexceptional target.
pub fn preimage_average_exact(
    map: &BinaryFormPair,
    f: &PolyQ,
    alpha: &ProjPointQ,
    k: u32,
    degree_cap: u64,
) -> Result<ExactAverage, Error> {
    if f.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let pre = preimage_poly(map, alpha, k, degree_cap)?;
    build_average(map, f, k, &pre.sk)
}

fn build_average(
    map: &BinaryFormPair,
    f: &PolyQ,
    k: u32,
    divisor_poly: &PolyQ,
) -> Result<ExactAverage, Error> {
    let (rt, removed) = remove_common_factors(divisor_poly, f)?;
    if rt.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let res = if rt.is_constant() {
        // no affine points left: empty product
        Rat::one()
    } else {
        resultant(&rt, f)?
    };
    debug_assert!(!res.is_zero(), "common factors were removed");
    Ok(ExactAverage {
        k,
        d: map.degree(),
        resultant: res,
        lc_rt: rt.leading_coeff(),
        deg_f: f.degree().max(0) as u64,
        deg_rt: rt.degree().max(0) as u64,
        removed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynmap::map_from_i64;
    use crate::exactcore::rat_from_i64;

    fn squaring() -> BinaryFormPair {
        map_from_i64(&[1, 0, 0], &[0, 0, 1]).unwrap()
    }

    #[test]
    fn squaring_t_minus_2_exact_values() {
        // k = 1: fixed points {0, 1}: |F(0) F(1)| = 2 -> (log 2)/2.
        let f = PolyQ::from_i64s(&[-2, 1]);
        let a = periodic_average_exact(&squaring(), &f, 1, 4096).unwrap();
        assert_eq!(a.log_rational(), rat_from_i64(2));
        // k = 2: rho = 2^4 - 2 = 14.
        let a = periodic_average_exact(&squaring(), &f, 2, 4096).unwrap();
        assert_eq!(a.log_rational().numer().clone(), BigInt::from(14));
        let ctx = RealCtx::new(128);
        let v = a.value_at(&Place::Infinity, &ctx).unwrap();
        assert!((v - (2f64.ln() + 7f64.ln()) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn squaring_fixed_root_removal() {
        // F = t - 1 at k = 2: remove the fixed point, remaining product 3.
        let f = PolyQ::from_i64s(&[-1, 1]);
        let a = periodic_average_exact(&squaring(), &f, 2, 4096).unwrap();
        assert_eq!(a.removed, 1);
        assert_eq!(a.deg_rt, 3);
        let rho = a.log_rational();
        assert_eq!(rho.numer().magnitude().to_string(), "3");
        let ctx = RealCtx::new(128);
        let v = a.value_at(&Place::Infinity, &ctx).unwrap();
        assert!((v - 3f64.ln() / 4.0).abs() < 1e-12);
    }

    #[test]
    fn preimage_roots_of_unity() {
        // z^2, alpha = 1, F = t - 2, k = 3: prod over 8th roots of unity of
        // (2 - xi) = 2^8 - 1 = 255.
        let f = PolyQ::from_i64s(&[-2, 1]);
        let a = preimage_average_exact(&squaring(), &f, &ProjPointQ::from_i64(1), 3, 4096).unwrap();
        assert_eq!(a.log_rational(), rat_from_i64(255));
        let ctx = RealCtx::new(128);
        let v = a.value_at(&Place::Infinity, &ctx).unwrap();
        assert!((v - 255f64.ln() / 8.0).abs() < 1e-12);
    }

    #[test]
    fn finite_place_coefficients() {
        // z^2, F = t - 2, k = 2: rho = 14 = 2 * 7: at p = 2 the coefficient
        // of log 2 is -1/4.
        let f = PolyQ::from_i64s(&[-2, 1]);
        let a = periodic_average_exact(&squaring(), &f, 2, 4096).unwrap();
        let c2 = a.log_p_coeff(&BigInt::from(2)).unwrap();
        assert_eq!(c2, Rat::new((-1).into(), 4.into()));
        let c7 = a.log_p_coeff(&BigInt::from(7)).unwrap();
        assert_eq!(c7, Rat::new((-1).into(), 4.into()));
        let c3 = a.log_p_coeff(&BigInt::from(3)).unwrap();
        assert!(c3.is_zero());
    }

    #[test]
    fn constant_f_scales_by_degree() {
        // F = 3: sum over deg(R_k) points of log 3.
        let f = PolyQ::from_i64s(&[3]);
        let a = periodic_average_exact(&squaring(), &f, 2, 4096).unwrap();
        assert_eq!(a.deg_rt, 4);
        let ctx = RealCtx::new(128);
        let v = a.value_at(&Place::Infinity, &ctx).unwrap();
        assert!((v - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn exceptional_target_rejected() {
        let f = PolyQ::from_i64s(&[-2, 1]);
        assert_eq!(
            preimage_average_exact(&squaring(), &f, &ProjPointQ::from_i64(0), 2, 4096)
                .unwrap_err(),
            Error::ExceptionalTarget
        );
    }
}
