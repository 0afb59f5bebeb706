//! Generalized Mahler measures and their realization as limits of
//! periodic-point and backward-iterate averages of log|F|, global height
//! identities, and Lyapunov exponents.

pub mod exact;
pub mod numeric;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::dynmap::{derivative_pair, BinaryFormPair, ProjPointQ};
use crate::error::Error;
use crate::exactcore::poly::{poly_div_exact, PolyQ};
use crate::exactcore::real::{to_f64, RealCtx};
use crate::exactcore::roots::rational_roots;
use crate::exactcore::{product_formula_check, val_p, Rat};
use crate::heights::algebraic::{
    algebraic_support, arch_conjugate_sum, canonical_height_algebraic, finite_conjugate_sum,
};
use crate::heights::{
    arch_local_height, canonical_height, finite::finite_local_height, rat_to_f64, Place,
};
pub use exact::ExactAverage;
pub use numeric::NumericTarget;

/// Evaluation mode for the averages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AverageMode {
    Exact,
    Numeric,
}

/// Shared knobs for the equidistribution computations.
#[derive(Clone, Debug)]
pub struct EquidistConfig {
    pub tol: f64,
    /// iteration budget for inner pair limits (heights)
    pub kmax_heights: u32,
    /// cap on deg R_k / deg S_k for exact construction
    pub degree_cap: u64,
    /// orbit search bound for exact periodicity analysis
    pub orbit_search: u32,
}

impl Default for EquidistConfig {
    fn default() -> Self {
        EquidistConfig {
            tol: 1e-9,
            kmax_heights: 60,
            degree_cap: 4096,
            orbit_search: 24,
        }
    }
}

/// What a series averages over.
#[derive(Clone, Debug)]
pub enum Target {
    Periodic,
    Preimage(ProjPointQ),
}

/// Full description of an average computation.
#[derive(Clone, Debug)]
pub struct AverageSpec {
    pub map: BinaryFormPair,
    pub f: PolyQ,
    pub place: Place,
    pub mode: AverageMode,
    pub target: Target,
}

/// One finite-k average value.
#[derive(Clone, Debug)]
pub struct AverageValue {
    pub value: f64,
    /// present in exact mode: the resultant decomposition behind the value
    pub exact: Option<ExactAverage>,
    pub approximate: bool,
}

/// (1/d^k) sum of log|F(w)|_v over the affine k-periodic points w with
/// F(w) != 0, counted with multiplicity.
pub fn periodic_average(
    map: &BinaryFormPair,
    f: &PolyQ,
    place: &Place,
    k: u32,
    mode: AverageMode,
    cfg: &EquidistConfig,
    ctx: &RealCtx,
) -> Result<AverageValue, Error> {
    run_average(map, f, place, k, mode, &Target::Periodic, cfg, ctx)
}

/// (1/d^k) sum of log|F(w)|_v over the k-th preimages of a nonexceptional
/// alpha with F(w) != 0, counted with multiplicity.
pub fn preimage_average(
    map: &BinaryFormPair,
    f: &PolyQ,
    alpha: &ProjPointQ,
    place: &Place,
    k: u32,
    mode: AverageMode,
    cfg: &EquidistConfig,
    ctx: &RealCtx,
) -> Result<AverageValue, Error> {
    run_average(
        map,
        f,
        place,
        k,
        mode,
        &Target::Preimage(alpha.clone()),
        cfg,
        ctx,
    )
}

#[allow(clippy::too_many_arguments)]
fn run_average(
    map: &BinaryFormPair,
    f: &PolyQ,
    place: &Place,
    k: u32,
    mode: AverageMode,
    target: &Target,
    cfg: &EquidistConfig,
    ctx: &RealCtx,
) -> Result<AverageValue, Error> {
    match mode {
        AverageMode::Exact => {
            let ex = match target {
                Target::Periodic => exact::periodic_average_exact(map, f, k, cfg.degree_cap)?,
                Target::Preimage(alpha) => {
                    exact::preimage_average_exact(map, f, alpha, k, cfg.degree_cap)?
                }
            };
            let value = ex.value_at(place, ctx)?;
            Ok(AverageValue {
                value,
                exact: Some(ex),
                approximate: false,
            })
        }
        AverageMode::Numeric => {
            if place != &Place::Infinity {
                return Err(Error::NumericModeFinitePlace);
            }
            let nt = match target {
                Target::Periodic => NumericTarget::Periodic,
                Target::Preimage(alpha) => NumericTarget::Preimage(alpha.clone()),
            };
            let run = |c: &RealCtx| {
                numeric::numeric_average_single(
                    map,
                    f,
                    k,
                    &nt,
                    cfg.degree_cap,
                    cfg.orbit_search,
                    c,
                )
            };
            let attempt = run(ctx).and_then(|lo| {
                let hi = run(&ctx.doubled())?;
                Ok((lo, hi))
            });
            match attempt {
                Ok((lo, hi)) => {
                    let v = to_f64(&lo);
                    let disagreement = (v - to_f64(&hi)).abs();
                    Ok(AverageValue {
                        value: v,
                        exact: None,
                        approximate: disagreement > cfg.tol,
                    })
                }
                Err(Error::PrecisionFailure) => {
                    // near-periodic cliff: fall back to the exact route when
                    // the polynomial fits the cap
                    let dk = (map.degree() as u64).checked_pow(k);
                    if dk.map(|v| v <= cfg.degree_cap).unwrap_or(false) {
                        run_average(map, f, place, k, AverageMode::Exact, target, cfg, ctx)
                    } else {
                        Err(Error::PrecisionFailure)
                    }
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// A row of a convergence table.
#[derive(Clone, Debug)]
pub struct SeriesRow {
    pub k: u32,
    pub value: f64,
    pub delta: Option<f64>,
    pub approximate: bool,
}

/// Rows (k, value, delta) for any of the limits, the universal output shape.
#[derive(Clone, Debug)]
pub struct ConvergenceSeries {
    pub rows: Vec<SeriesRow>,
    pub limit_estimate: f64,
    pub converged: bool,
}

impl ConvergenceSeries {
    fn from_values(values: Vec<(u32, f64, bool)>, tol: f64) -> ConvergenceSeries {
        let mut rows: Vec<SeriesRow> = Vec::with_capacity(values.len());
        for (k, value, approximate) in values {
            let delta = rows.last().map(|prev: &SeriesRow| value - prev.value);
            rows.push(SeriesRow {
                k,
                value,
                delta,
                approximate,
            });
        }
        let limit_estimate = rows.last().map(|r| r.value).unwrap_or(0.0);
        let converged = rows.len() >= 2 && {
            let n = rows.len();
            let ok = |r: &SeriesRow| r.delta.map(|d| d.abs() < tol).unwrap_or(false);
            ok(&rows[n - 1]) && ok(&rows[n - 2])
        };
        ConvergenceSeries {
            rows,
            limit_estimate,
            converged,
        }
    }
}

/// Averages for k in kmin..=kmax assembled into a convergence table.
pub fn average_series(
    spec: &AverageSpec,
    kmin: u32,
    kmax: u32,
    cfg: &EquidistConfig,
    ctx: &RealCtx,
) -> Result<ConvergenceSeries, Error> {
    if kmin == 0 || kmin > kmax {
        return Err(Error::InvalidInput("need 1 <= kmin <= kmax".into()));
    }
    let mut values = Vec::new();
    for k in kmin..=kmax {
        let v = run_average(
            &spec.map,
            &spec.f,
            &spec.place,
            k,
            spec.mode,
            &spec.target,
            cfg,
            ctx,
        )?;
        values.push((k, v.value, v.approximate));
    }
    Ok(ConvergenceSeries::from_values(values, cfg.tol))
}

/// The generalized Mahler measure of F at a place:
/// log|lc F|_v + sum over roots of (hhat_v(root) - hhat_v(infinity)).
#[derive(Clone, Debug)]
pub struct MahlerValue {
    pub value: f64,
    /// exact coefficient of log p at a finite place, when fully exact
    pub log_p_coeff: Option<Rat>,
    pub exact: bool,
    /// finite-place value for deg >= 2 families is the conjugate-summed
    /// quantity, not split across places above p
    pub aggregated: bool,
    pub k_used: u32,
    pub error_estimate: f64,
}

pub fn mahler_measure(
    map: &BinaryFormPair,
    f: &PolyQ,
    place: &Place,
    cfg: &EquidistConfig,
    ctx: &RealCtx,
) -> Result<MahlerValue, Error> {
    if f.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    if f.is_constant() {
        // measure of a constant: log|c|_v
        return mahler_constant(f, place, ctx);
    }
    match place {
        Place::Infinity => {
            let (conj, k1, err1, conv1) =
                arch_conjugate_sum(map, f, cfg.tol, cfg.kmax_heights, ctx)?;
            let (hinf, k2, err2, conv2) =
                arch_local_height(map, &ProjPointQ::infinity(), cfg.tol, cfg.kmax_heights, ctx);
            let n = f.deg() as i64;
            let total = ctx.add(
                &ctx.ln_abs_rat(&f.leading_coeff()),
                &ctx.sub(&conj, &ctx.mul(&hinf, &ctx.from_i64(n))),
            );
            let mut err = err1 + n as f64 * err2;
            if !(conv1 && conv2) {
                err = err.max(cfg.tol);
            }
            Ok(MahlerValue {
                value: to_f64(&total),
                log_p_coeff: None,
                exact: false,
                aggregated: false,
                k_used: k1.max(k2),
                error_estimate: err,
            })
        }
        Place::Finite(p) => {
            let kmax = cfg.kmax_heights.max(40);
            let mut coeff = Rat::from(BigInt::from(-val_p(&f.leading_coeff(), p)?));
            let mut exact = true;
            let mut k_used = 0;
            let mut err_coeff = Rat::zero();
            let mut aggregated = false;

            // Split off rational roots: they get the exact point engine.
            let mut rest = f.clone();
            let mut n_rational = 0i64;
            for w in rational_roots(f) {
                let lin = PolyQ::from_coeffs(vec![-w.clone(), Rat::one()]);
                loop {
                    match poly_div_exact(&rest, &lin) {
                        Ok(q) => {
                            rest = q;
                            n_rational += 1;
                            let x = ProjPointQ::from_rat(&w);
                            let lh = finite_local_height(map, &x, p, kmax)?;
                            // affine normalization (w, 1) adds v_p(b) to the
                            // reduced-pair coefficient
                            let adj = Rat::from(BigInt::from(crate::exactcore::val_p_int(
                                x.b(),
                                p,
                            )));
                            coeff += &lh.coeff + adj;
                            exact &= lh.exact;
                            k_used = k_used.max(lh.k_used);
                            err_coeff += lh.err_coeff;
                        }
                        Err(_) => break,
                    }
                }
            }
            let _ = n_rational;
            if !rest.is_constant() {
                let cs = finite_conjugate_sum(map, &rest, p, kmax)?;
                coeff += &cs.coeff;
                exact &= cs.exact;
                k_used = k_used.max(cs.k_used);
                err_coeff += cs.err_coeff;
                aggregated = rest.deg() >= 2;
            }
            // minus deg(F) * hhat_p(infinity)
            let hinf = finite_local_height(map, &ProjPointQ::infinity(), p, kmax)?;
            let n = f.deg() as i64;
            coeff -= Rat::from(BigInt::from(n)) * &hinf.coeff;
            exact &= hinf.exact;
            k_used = k_used.max(hinf.k_used);
            err_coeff += Rat::from(BigInt::from(n)) * &hinf.err_coeff;

            let logp = to_f64(&ctx.ln_bigint(p));
            Ok(MahlerValue {
                value: rat_to_f64(&coeff, ctx) * logp,
                log_p_coeff: if exact { Some(coeff) } else { None },
                exact,
                aggregated,
                k_used,
                error_estimate: rat_to_f64(&err_coeff, ctx) * logp,
            })
        }
    }
}

fn mahler_constant(f: &PolyQ, place: &Place, ctx: &RealCtx) -> Result<MahlerValue, Error> {
    let c = f.leading_coeff();
    match place {
        Place::Infinity => Ok(MahlerValue {
            value: to_f64(&ctx.ln_abs_rat(&c)),
            log_p_coeff: None,
            exact: false,
            aggregated: false,
            k_used: 0,
            error_estimate: 0.0,
        }),
        Place::Finite(p) => {
            let coeff = Rat::from(BigInt::from(-val_p(&c, p)?));
            Ok(MahlerValue {
                value: rat_to_f64(&coeff, ctx) * to_f64(&ctx.ln_bigint(p)),
                log_p_coeff: Some(coeff),
                exact: true,
                aggregated: false,
                k_used: 0,
                error_estimate: 0.0,
            })
        }
    }
}

/// The finite-k global identity record: per-place exact averages over the
/// persistent support, their sum, the exact product-formula check on the
/// underlying rational, and the canonical-height target.
#[derive(Clone, Debug)]
pub struct GlobalIdentity {
    pub k: u32,
    pub per_place: Vec<(Place, f64)>,
    pub total: f64,
    pub product_formula_ok: bool,
    pub target: f64,
}

/// Exact finite-k periodic averages summed over the persistent support
/// (infinity, bad primes, lc/denominator primes of F), compared against
/// deg(F) * (h_phi(beta) - h_phi(infinity)).
pub fn global_periodic_identity(
    map: &BinaryFormPair,
    f: &PolyQ,
    k: u32,
    cfg: &EquidistConfig,
    ctx: &RealCtx,
) -> Result<GlobalIdentity, Error> {
    if f.is_zero() || f.is_constant() {
        return Err(Error::ZeroPolynomial);
    }
    let ex = exact::periodic_average_exact(map, f, k, cfg.degree_cap)?;
    let mut per_place = Vec::new();
    let vinf = ex.value_at(&Place::Infinity, ctx)?;
    per_place.push((Place::Infinity, vinf));
    let mut total = vinf;
    for p in algebraic_support(map, f) {
        let v = ex.value_at(&Place::Finite(p.clone()), ctx)?;
        total += v;
        per_place.push((Place::Finite(p), v));
    }
    let product_formula_ok = product_formula_check(&ex.log_rational())?;

    let halg = canonical_height_algebraic(map, f, cfg.tol, cfg.kmax_heights, ctx)?;
    let hinf = canonical_height(map, &ProjPointQ::infinity(), cfg.tol, cfg.kmax_heights, ctx)?;
    let target = f.deg() as f64 * (halg.value - hinf.value);

    Ok(GlobalIdentity {
        k,
        per_place,
        total,
        product_formula_ok,
        target,
    })
}

/// Lyapunov exponent rows: periodic averages of log|phi'| as the difference
/// of the averages of the derivative numerator and denominator, excluding
/// critical periodic points and infinity.
pub fn lyapunov(
    map: &BinaryFormPair,
    kmin: u32,
    kmax: u32,
    mode: AverageMode,
    cfg: &EquidistConfig,
    ctx: &RealCtx,
) -> Result<ConvergenceSeries, Error> {
    if kmin == 0 || kmin > kmax {
        return Err(Error::InvalidInput("need 1 <= kmin <= kmax".into()));
    }
    let (a, b) = derivative_pair(map);
    if a.is_zero() {
        return Err(Error::DegenerateMap);
    }
    let mut values = Vec::new();
    for k in kmin..=kmax {
        let va = periodic_average(map, &a, &Place::Infinity, k, mode, cfg, ctx)?;
        let vb = if b.is_constant() && b.leading_coeff() == Rat::from(BigInt::from(1)) {
            AverageValue {
                value: 0.0,
                exact: None,
                approximate: false,
            }
        } else {
            periodic_average(map, &b, &Place::Infinity, k, mode, cfg, ctx)?
        };
        values.push((k, va.value - vb.value, va.approximate || vb.approximate));
    }
    Ok(ConvergenceSeries::from_values(values, cfg.tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynmap::map_from_i64;

    fn squaring() -> BinaryFormPair {
        map_from_i64(&[1, 0, 0], &[0, 0, 1]).unwrap()
    }

    fn cfg() -> EquidistConfig {
        EquidistConfig::default()
    }

    #[test]
    fn mahler_classical_values() {
        let ctx = RealCtx::new(256);
        // m(t - 2) = log 2
        let m = mahler_measure(&squaring(), &PolyQ::from_i64s(&[-2, 1]), &Place::Infinity, &cfg(), &ctx).unwrap();
        assert!((m.value - 2f64.ln()).abs() < 1e-12, "got {}", m.value);
        // m(t^2 - t - 1) = log golden
        let m = mahler_measure(&squaring(), &PolyQ::from_i64s(&[-1, -1, 1]), &Place::Infinity, &cfg(), &ctx).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((m.value - golden.ln()).abs() < 1e-12, "got {}", m.value);
    }

    #[test]
    fn mahler_finite_place_half_map() {
        let ctx = RealCtx::new(192);
        let half = map_from_i64(&[1, 0, 0], &[0, 0, 2]).unwrap();
        // hhat_2(2) - hhat_2(inf) = -log 2
        let m = mahler_measure(&half, &PolyQ::from_i64s(&[-2, 1]), &Place::finite(2), &cfg(), &ctx).unwrap();
        assert!(m.exact);
        assert_eq!(m.log_p_coeff.unwrap(), crate::exactcore::rat_from_i64(-1));
        // t - 3: the 2-adic story is trivial
        let m = mahler_measure(&half, &PolyQ::from_i64s(&[-3, 1]), &Place::finite(2), &cfg(), &ctx).unwrap();
        assert!(m.exact);
        assert!(m.log_p_coeff.unwrap().is_zero());
    }

    #[test]
    fn periodic_series_approaches_mahler() {
        let ctx = RealCtx::new(256);
        let spec = AverageSpec {
            map: squaring(),
            f: PolyQ::from_i64s(&[-2, 1]),
            place: Place::Infinity,
            mode: AverageMode::Exact,
            target: Target::Periodic,
        };
        let s = average_series(&spec, 1, 12, &cfg(), &ctx).unwrap();
        assert!((s.limit_estimate - 2f64.ln()).abs() < 3e-4);
        assert_eq!(s.rows.len(), 12);
        assert!(s.rows[0].delta.is_none());
        assert!(s.rows[1].delta.is_some());
    }

    #[test]
    fn exact_and_numeric_agree() {
        let ctx = RealCtx::new(256);
        let maps = [
            squaring(),
            map_from_i64(&[1, 0, 1], &[0, 0, 1]).unwrap(),
            map_from_i64(&[1, 0, -1], &[0, 0, 1]).unwrap(),
            map_from_i64(&[1, 0, 0], &[0, 0, 2]).unwrap(),
            map_from_i64(&[1, 0, 1], &[0, 1, 0]).unwrap(),
        ];
        let fs = [PolyQ::from_i64s(&[-2, 1]), PolyQ::from_i64s(&[-1, -1, 1])];
        for map in &maps {
            for f in &fs {
                for k in [2u32, 5] {
                    let e = periodic_average(map, f, &Place::Infinity, k, AverageMode::Exact, &cfg(), &ctx).unwrap();
                    let n = periodic_average(map, f, &Place::Infinity, k, AverageMode::Numeric, &cfg(), &ctx).unwrap();
                    assert!(
                        (e.value - n.value).abs() < 1e-9,
                        "map {:?} f {:?} k {}: exact {} numeric {}",
                        map,
                        f,
                        k,
                        e.value,
                        n.value
                    );
                }
            }
        }
    }

    #[test]
    fn numeric_finite_place_rejected() {
        let ctx = RealCtx::new(128);
        let e = periodic_average(
            &squaring(),
            &PolyQ::from_i64s(&[-2, 1]),
            &Place::finite(2),
            3,
            AverageMode::Numeric,
            &cfg(),
            &ctx,
        )
        .unwrap_err();
        assert_eq!(e, Error::NumericModeFinitePlace);
    }

    #[test]
    fn global_identity_squaring() {
        let ctx = RealCtx::new(256);
        let g = global_periodic_identity(&squaring(), &PolyQ::from_i64s(&[-2, 1]), 8, &cfg(), &ctx).unwrap();
        assert!(g.product_formula_ok);
        assert!((g.target - 2f64.ln()).abs() < 1e-9);
        assert!((g.total - 2f64.ln()).abs() < 5e-3, "total {}", g.total);
    }

    #[test]
    fn lyapunov_squaring() {
        let ctx = RealCtx::new(256);
        let s = lyapunov(&squaring(), 1, 10, AverageMode::Exact, &cfg(), &ctx).unwrap();
        // rows are (1 - 2^-k) log 2
        for row in &s.rows {
            let expect = (1.0 - 2f64.powi(-(row.k as i32))) * 2f64.ln();
            assert!((row.value - expect).abs() < 1e-12, "k={} got {}", row.k, row.value);
        }
    }
}
