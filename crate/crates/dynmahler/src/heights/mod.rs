//! Weil heights, local canonical heights at every place, and global
//! canonical height assembly with per-place breakdown.

pub mod algebraic;
pub mod archimedean;
pub mod finite;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::dynmap::{bad_primes, BinaryFormPair, ProjPointQ};
use crate::error::Error;
use crate::exactcore::real::{to_f64, Complex, RealCtx, RF};
use crate::exactcore::{factor, val_p, Rat};
pub use archimedean::NormKind;
pub use finite::FiniteLocalHeight;

/// A place of Q: the archimedean absolute value or a p-adic one, normalized
/// so |p|_p = 1/p.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Place {
    Infinity,
    Finite(BigInt),
}

impl Place {
    pub fn finite(p: u64) -> Place {
        Place::Finite(BigInt::from(p))
    }

    pub fn parse(s: &str) -> Result<Place, Error> {
        let s = s.trim();
        if s == "inf" || s == "oo" || s == "infinity" {
            return Ok(Place::Infinity);
        }
        let p: BigInt = s
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad place: {s}")))?;
        if p < BigInt::from(2) || !crate::exactcore::is_prime(p.magnitude()) {
            return Err(Error::InvalidInput(format!("place must be prime: {s}")));
        }
        Ok(Place::Finite(p))
    }
}

impl std::fmt::Display for Place {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Place::Infinity => write!(f, "inf"),
            Place::Finite(p) => write!(f, "{p}"),
        }
    }
}

/// A computed local canonical height.
#[derive(Clone, Debug)]
pub struct LocalHeight {
    pub place: Place,
    /// Exact rational r with value = r * log p, at finite places.
    pub log_p_coeff: Option<Rat>,
    pub value: f64,
    pub exact: bool,
    pub k_used: u32,
    pub error_estimate: f64,
}

/// Global height data: the value, its per-place breakdown, and bookkeeping.
#[derive(Clone, Debug)]
pub struct HeightResult {
    pub value: f64,
    pub per_place: Vec<(Place, f64)>,
    pub k_used: u32,
    pub precision_bits: usize,
    pub error_estimate: f64,
    pub approximate: bool,
}

/// log max(|a|, |b|) for a reduced point.
pub fn weil_height(x: &ProjPointQ, ctx: &RealCtx) -> RF {
    let m = x.a().abs().max(x.b().abs());
    ctx.ln_bigint(&m)
}

/// Archimedean local canonical height with doubled-precision verification.
///
/// Returns the value at the base precision plus an error estimate combining
/// the geometric-tail bound and the precision disagreement.
pub fn arch_local_height(
    map: &BinaryFormPair,
    x: &ProjPointQ,
    tol: f64,
    kmax: u32,
    ctx: &RealCtx,
) -> (RF, u32, f64, bool) {
    arch_local_height_at(
        map,
        &Rat::from(x.a().clone()),
        &Rat::from(x.b().clone()),
        tol,
        kmax,
        ctx,
        NormKind::Max,
    )
}

/// As `arch_local_height` for an arbitrary rational starting pair.
pub fn arch_local_height_at(
    map: &BinaryFormPair,
    a: &Rat,
    b: &Rat,
    tol: f64,
    kmax: u32,
    ctx: &RealCtx,
    norm: NormKind,
) -> (RF, u32, f64, bool) {
    let run = |c: &RealCtx| {
        archimedean::arch_pair_limit(
            map,
            Complex::from_rat(a, c),
            Complex::from_rat(b, c),
            norm,
            tol,
            kmax,
            c,
        )
    };
    let lo = run(ctx);
    let hctx = ctx.doubled();
    let hi = run(&hctx);
    let disagreement = (to_f64(&lo.value) - to_f64(&hi.value)).abs();
    let converged = lo.converged && hi.converged && disagreement <= tol;
    (
        lo.value,
        lo.k_used.max(hi.k_used),
        lo.error_estimate.max(disagreement),
        converged,
    )
}

/// Local canonical height of a point at a place: the limit of
/// log max(|P_k(a,b)|_v, |Q_k(a,b)|_v) / d^k from the reduced coordinates.
pub fn local_canonical_height(
    map: &BinaryFormPair,
    x: &ProjPointQ,
    place: &Place,
    tol: f64,
    kmax: u32,
    ctx: &RealCtx,
) -> Result<LocalHeight, Error> {
    match place {
        Place::Infinity => {
            let (v, k, err, converged) = arch_local_height(map, x, tol, kmax, ctx);
            Ok(LocalHeight {
                place: Place::Infinity,
                log_p_coeff: None,
                value: to_f64(&v),
                exact: false,
                k_used: k,
                error_estimate: err,
                // an unconverged archimedean value is approximate
            }
            .with_exactness(converged))
        }
        Place::Finite(p) => {
            let h = finite::finite_local_height(map, x, p, kmax.max(80))?;
            let logp = to_f64(&ctx.ln_bigint(p));
            Ok(LocalHeight {
                place: place.clone(),
                value: rat_to_f64(&h.coeff, ctx) * logp,
                log_p_coeff: Some(h.coeff),
                exact: h.exact,
                k_used: h.k_used,
                error_estimate: rat_to_f64(&h.err_coeff, ctx) * logp,
            })
        }
    }
}

impl LocalHeight {
    fn with_exactness(mut self, converged: bool) -> Self {
        self.exact = false;
        if !converged {
            self.error_estimate = self.error_estimate.max(f64::EPSILON);
        }
        self
    }
}

/// Local canonical height of the point at infinity.
pub fn local_height_infinity_point(
    map: &BinaryFormPair,
    place: &Place,
    tol: f64,
    kmax: u32,
    ctx: &RealCtx,
) -> Result<LocalHeight, Error> {
    local_canonical_height(map, &ProjPointQ::infinity(), place, tol, kmax, ctx)
}

pub fn rat_to_f64(q: &Rat, ctx: &RealCtx) -> f64 {
    let _ = ctx;
    let c = RealCtx::new(96);
    to_f64(&c.from_rat(q))
}

/// Finite places that can carry a nonzero local height for this point:
/// bad primes of the map plus primes of the coordinates.
pub fn height_support(map: &BinaryFormPair, x: &ProjPointQ) -> Vec<BigInt> {
    let mut ps = bad_primes(map);
    for coord in [x.a(), x.b()] {
        if coord.is_zero() {
            continue;
        }
        for p in factor(coord) {
            if !ps.contains(&p) {
                ps.push(p);
            }
        }
    }
    ps.sort();
    ps
}

/// Canonical height as the sum of local canonical heights over the
/// archimedean place and the finite support, cross-checked against direct
/// big-integer iteration of h(phi^k(x)) / d^k when the budget allows.
pub fn canonical_height(
    map: &BinaryFormPair,
    x: &ProjPointQ,
    tol: f64,
    kmax: u32,
    ctx: &RealCtx,
) -> Result<HeightResult, Error> {
    let mut per_place = Vec::new();
    let mut k_used = 0u32;
    let mut err = 0.0f64;
    let mut approximate = false;

    let arch = local_canonical_height(map, x, &Place::Infinity, tol, kmax, ctx)?;
    let mut total = ctx.from_f64(arch.value);
    k_used = k_used.max(arch.k_used);
    err += arch.error_estimate;
    approximate |= arch.error_estimate > tol;
    per_place.push((Place::Infinity, arch.value));

    for p in height_support(map, x) {
        let lh = local_canonical_height(map, x, &Place::Finite(p.clone()), tol, kmax, ctx)?;
        if let Some(coeff) = &lh.log_p_coeff {
            if !coeff.is_zero() {
                let v = ctx.mul(&ctx.from_rat(coeff), &ctx.ln_bigint(&p));
                total = ctx.add(&total, &v);
            }
        }
        k_used = k_used.max(lh.k_used);
        err += lh.error_estimate;
        approximate |= !lh.exact;
        per_place.push((Place::Finite(p), lh.value));
    }

    // Direct Weil-height iteration cross-check at modest exact budget.
    let d = map.degree() as f64;
    let input_bits = x.a().bits().max(x.b().bits()).max(1);
    let mut kc = 12u32;
    while kc > 6 && (d.powi(kc as i32) as u64).saturating_mul(input_bits + 8) > (1 << 24) {
        kc -= 1;
    }
    if (d.powi(kc as i32) as u64).saturating_mul(input_bits + 8) <= (1 << 24) {
        let direct = map.iterate_exact(x, kc);
        let hk = weil_height(&direct, ctx);
        let dk = ctx.from_f64(d.powi(kc as i32));
        let approx = to_f64(&ctx.div(&hk, &dk));
        let diff = (approx - to_f64(&total)).abs();
        // The direct truncation itself converges like C / d^k; only flag a
        // disagreement well beyond that scale.
        let allowance = 16.0 / d.powi(kc as i32) + 10.0 * tol + err;
        if diff > allowance {
            approximate = true;
            err = err.max(diff);
        }
    }

    Ok(HeightResult {
        value: to_f64(&total),
        per_place,
        k_used,
        precision_bits: ctx.bits(),
        error_estimate: err,
        approximate,
    })
}

/// Residual of the Call-Goldstine functional equation at a place, in the
/// affine normalization: hhat(phi(x)) - d hhat(x) + log|Q(x,1)|_v, which is
/// identically zero for the canonical local height.
///
/// At finite places the computation is exact rational arithmetic on
/// log p coefficients, so an exact zero is reported as exactly 0.0.
pub fn functional_eq_residual(
    map: &BinaryFormPair,
    x: &ProjPointQ,
    place: &Place,
    tol: f64,
    kmax: u32,
    ctx: &RealCtx,
) -> Result<f64, Error> {
    if x.is_infinity() {
        return Err(Error::InfinityNotAllowed);
    }
    let fx = map.step_point(x);
    if fx.is_infinity() {
        return Err(Error::PoleOfQ);
    }
    let beta = x.to_rat().unwrap();
    let qval = {
        let one = Rat::from(BigInt::from(1));
        let (_, q) = map.eval_rat(&beta, &one);
        q
    };
    if qval.is_zero() {
        return Err(Error::PoleOfQ);
    }
    let d = map.degree() as i64;
    match place {
        Place::Finite(p) => {
            let hx = finite::finite_local_height(map, x, p, kmax.max(80))?;
            let hfx = finite::finite_local_height(map, &fx, p, kmax.max(80))?;
            if !(hx.exact && hfx.exact) {
                // fall back to a numeric residual bound
                let logp = to_f64(&ctx.ln_bigint(p));
                let r = (rat_to_f64(&hfx.coeff, ctx) - d as f64 * rat_to_f64(&hx.coeff, ctx))
                    * logp;
                return Ok(r.abs());
            }
            // affine normalization: hhat_aff = coeff*logp - log|b|_p, and
            // log|b|_p = -v_p(b) log p.
            let vb = val_p_of_int(x.b(), p);
            let vbf = val_p_of_int(fx.b(), p);
            let vq = val_p(&qval, p)?;
            // residual coefficient of log p:
            let res = (hfx.coeff - Rat::from(BigInt::from(-vbf)))
                - Rat::from(BigInt::from(d)) * (hx.coeff - Rat::from(BigInt::from(-vb)))
                + Rat::from(BigInt::from(-vq));
            if res.is_zero() {
                Ok(0.0)
            } else {
                Ok((rat_to_f64(&res, ctx) * to_f64(&ctx.ln_bigint(p))).abs())
            }
        }
        Place::Infinity => {
            let (hx, _, _, _) = arch_local_height(map, x, tol, kmax, ctx);
            let (hfx, _, _, _) = arch_local_height(map, &fx, tol, kmax, ctx);
            let lb = ctx.ln_bigint(&x.b().abs());
            let lbf = ctx.ln_bigint(&fx.b().abs());
            let lq = ctx.ln_abs_rat(&qval);
            let aff_x = ctx.sub(&hx, &lb);
            let aff_fx = ctx.sub(&hfx, &lbf);
            let r = ctx.add(
                &ctx.sub(&aff_fx, &ctx.mul(&aff_x, &ctx.from_i64(d))),
                &lq,
            );
            Ok(to_f64(&r).abs())
        }
    }
}

fn val_p_of_int(n: &BigInt, p: &BigInt) -> i64 {
    if n.is_zero() {
        panic!("valuation of zero coordinate");
    }
    crate::exactcore::val_p_int(n, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynmap::map_from_i64;

    fn squaring() -> BinaryFormPair {
        map_from_i64(&[1, 0, 0], &[0, 0, 1]).unwrap()
    }

    fn half_square() -> BinaryFormPair {
        map_from_i64(&[1, 0, 0], &[0, 0, 2]).unwrap()
    }

    #[test]
    fn weil_height_examples() {
        let ctx = RealCtx::new(128);
        let h = weil_height(&ProjPointQ::new(2.into(), 3.into()).unwrap(), &ctx);
        assert!((to_f64(&h) - 3f64.ln()).abs() < 1e-15);
        assert_eq!(to_f64(&weil_height(&ProjPointQ::infinity(), &ctx)), 0.0);
        let h7 = weil_height(&ProjPointQ::from_i64(7), &ctx);
        assert!((to_f64(&h7) - 7f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn local_heights_of_squaring() {
        let ctx = RealCtx::new(256);
        let x = ProjPointQ::from_i64(2);
        let inf = local_canonical_height(&squaring(), &x, &Place::Infinity, 1e-12, 60, &ctx).unwrap();
        assert!((inf.value - 2f64.ln()).abs() < 1e-12);
        let two = local_canonical_height(&squaring(), &x, &Place::finite(2), 1e-12, 60, &ctx).unwrap();
        assert!(two.exact);
        assert_eq!(two.value, 0.0);
    }

    #[test]
    fn half_square_fixed_point_heights() {
        let ctx = RealCtx::new(256);
        let x = ProjPointQ::from_i64(2);
        let two = local_canonical_height(&half_square(), &x, &Place::finite(2), 1e-12, 60, &ctx).unwrap();
        assert!(two.exact);
        assert_eq!(two.log_p_coeff.as_ref().unwrap(), &crate::exactcore::rat_from_i64(-1));
        let inf = local_canonical_height(&half_square(), &x, &Place::Infinity, 1e-12, 60, &ctx).unwrap();
        assert!((inf.value - 2f64.ln()).abs() < 1e-12);

        let h = canonical_height(&half_square(), &x, 1e-12, 60, &ctx).unwrap();
        assert!(h.value.abs() < 1e-9, "fixed point has zero height, got {}", h.value);
    }

    #[test]
    fn canonical_height_squaring_is_weil() {
        let ctx = RealCtx::new(256);
        let x = ProjPointQ::new(2.into(), 3.into()).unwrap();
        let h = canonical_height(&squaring(), &x, 1e-12, 60, &ctx).unwrap();
        assert!((h.value - 3f64.ln()).abs() < 1e-10);
        assert!(!h.approximate);
    }

    #[test]
    fn canonical_height_z2_plus_1() {
        let ctx = RealCtx::new(256);
        let m = map_from_i64(&[1, 0, 1], &[0, 0, 1]).unwrap();
        let h = canonical_height(&m, &ProjPointQ::from_i64(2), 1e-12, 60, &ctx).unwrap();
        assert!((h.value - 0.8147).abs() < 1e-3, "got {}", h.value);
    }

    #[test]
    fn functional_equation_residuals() {
        let ctx = RealCtx::new(256);
        // z^2 at x = 2, infinity: log 4 = 2 log 2.
        let r = functional_eq_residual(&squaring(), &ProjPointQ::from_i64(2), &Place::Infinity, 1e-12, 60, &ctx).unwrap();
        assert!(r < 1e-12);
        // z^2/2 at x = 3, p = 2: exactly zero.
        let r = functional_eq_residual(&half_square(), &ProjPointQ::from_i64(3), &Place::finite(2), 1e-12, 60, &ctx).unwrap();
        assert_eq!(r, 0.0);
        // z^2+1 at x = 2, infinity.
        let m = map_from_i64(&[1, 0, 1], &[0, 0, 1]).unwrap();
        let r = functional_eq_residual(&m, &ProjPointQ::from_i64(2), &Place::Infinity, 1e-12, 60, &ctx).unwrap();
        assert!(r < 1e-9);
    }

    #[test]
    fn pole_detection() {
        // (z^2+1)/z maps 0 to infinity.
        let m = map_from_i64(&[1, 0, 1], &[0, 1, 0]).unwrap();
        let err = functional_eq_residual(&m, &ProjPointQ::from_i64(0), &Place::Infinity, 1e-9, 40, &RealCtx::new(128));
        assert_eq!(err.unwrap_err(), Error::PoleOfQ);
    }
}
