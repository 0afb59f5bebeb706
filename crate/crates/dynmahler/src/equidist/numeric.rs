//! Numeric-mode periodic and preimage averages at the archimedean place.
//!
//! For k beyond the exact polynomial cap the sum of log|F| over the periodic
//! (or preimage) divisor is assembled per complex root of F from
//! renormalized pair iteration, with truncated jets supplying the removed
//! factors at periodic roots and the leading coefficients at infinity.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::dynmap::{
    analyze_rational_point, fixed_point_poly, periodic_multiplicity, BinaryFormPair, ProjPointQ,
};
use crate::error::Error;
use crate::exactcore::poly::{poly_div_exact, poly_divrem, poly_gcd, PolyQ};
use crate::exactcore::real::{Complex, RealCtx, RF};
use crate::exactcore::roots::complex_roots;
use crate::exactcore::Rat;
use crate::heights::archimedean::{arch_pair_limit, MapComplexCoeffs, NormKind, ScaledPair};

/// Truncated complex power series of fixed length.
#[derive(Clone)]
struct CSeries {
    c: Vec<Complex>,
}

impl CSeries {
    fn zero(j: usize, ctx: &RealCtx) -> Self {
        CSeries {
            c: vec![Complex::zero(ctx); j],
        }
    }

    fn from_coeffs(mut c: Vec<Complex>, j: usize, ctx: &RealCtx) -> Self {
        c.truncate(j);
        while c.len() < j {
            c.push(Complex::zero(ctx));
        }
        CSeries { c }
    }

    fn add(&self, o: &CSeries, ctx: &RealCtx) -> CSeries {
        CSeries {
            c: self
                .c
                .iter()
                .zip(o.c.iter())
                .map(|(a, b)| a.add(b, ctx))
                .collect(),
        }
    }

    fn sub(&self, o: &CSeries, ctx: &RealCtx) -> CSeries {
        CSeries {
            c: self
                .c
                .iter()
                .zip(o.c.iter())
                .map(|(a, b)| a.sub(b, ctx))
                .collect(),
        }
    }

    fn mul(&self, o: &CSeries, ctx: &RealCtx) -> CSeries {
        let j = self.c.len();
        let mut out = CSeries::zero(j, ctx);
        for (i, a) in self.c.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (l, b) in o.c.iter().enumerate() {
                if i + l >= j {
                    break;
                }
                out.c[i + l] = out.c[i + l].add(&a.mul(b, ctx), ctx);
            }
        }
        out
    }

    fn scale_complex(&self, s: &Complex, ctx: &RealCtx) -> CSeries {
        CSeries {
            c: self.c.iter().map(|a| a.mul(s, ctx)).collect(),
        }
    }

    fn scale_real(&self, s: &RF, ctx: &RealCtx) -> CSeries {
        CSeries {
            c: self.c.iter().map(|a| a.mul_real(s, ctx)).collect(),
        }
    }

    fn max_abs(&self, ctx: &RealCtx) -> RF {
        let mut m = ctx.zero();
        for a in &self.c {
            m = ctx.max(&m, &a.abs(ctx));
        }
        m
    }
}

/// A renormalized pair of truncated series with exact log-scale tracking.
struct SeriesPair {
    a: CSeries,
    b: CSeries,
    logscale: RF,
}

impl SeriesPair {
    fn start(a: CSeries, b: CSeries, ctx: &RealCtx) -> SeriesPair {
        let mut sp = SeriesPair {
            a,
            b,
            logscale: ctx.zero(),
        };
        sp.renormalize(ctx);
        sp
    }

    fn renormalize(&mut self, ctx: &RealCtx) {
        let s = ctx.max(&self.a.max_abs(ctx), &self.b.max_abs(ctx));
        debug_assert!(!s.is_zero());
        let inv = ctx.recip(&s);
        self.a = self.a.scale_real(&inv, ctx);
        self.b = self.b.scale_real(&inv, ctx);
        self.logscale = ctx.add(&self.logscale, &ctx.ln(&s));
    }

    fn step(&mut self, coeffs: &MapComplexCoeffs, ctx: &RealCtx) {
        let d = coeffs.d;
        let j = self.a.c.len();
        let mut pa = vec![CSeries::from_coeffs(
            vec![Complex::from_real(ctx.from_i64(1), ctx)],
            j,
            ctx,
        )];
        let mut pb = pa.clone();
        for i in 1..=d {
            let na = pa[i - 1].mul(&self.a, ctx);
            pa.push(na);
            let nb = pb[i - 1].mul(&self.b, ctx);
            pb.push(nb);
        }
        let assemble = |cs: &[Complex]| {
            let mut acc = CSeries::zero(j, ctx);
            for (i, c) in cs.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                acc = acc.add(&pa[d - i].mul(&pb[i], ctx).scale_complex(c, ctx), ctx);
            }
            acc
        };
        let na = assemble(coeffs.pc());
        let nb = assemble(coeffs.qc());
        self.a = na;
        self.b = nb;
        self.logscale = ctx.mul(&self.logscale, &ctx.from_i64(d as i64));
        self.renormalize(ctx);
    }
}

/// log of the order-`ord` Taylor coefficient of R_k(t) at t = beta, i.e. of
/// the value of R_k with the factor (t - beta)^ord divided out.
///
/// The lower coefficients must vanish (beta has multiplicity `ord`); they are
/// checked against the working precision and a violation reports a
/// precision failure rather than a wrong number.
fn log_removed_value_at(
    map: &BinaryFormPair,
    beta: &Complex,
    k: u32,
    ord: u64,
    ctx: &RealCtx,
) -> Result<RF, Error> {
    let j = ord as usize + 1;
    let coeffs = MapComplexCoeffs::new(map, ctx);
    let one = Complex::from_real(ctx.from_i64(1), ctx);
    let shift = CSeries::from_coeffs(vec![beta.clone(), one.clone()], j.max(2), ctx);
    let a0 = shift.clone();
    let b0 = CSeries::from_coeffs(vec![one], j.max(2), ctx);
    let mut sp = SeriesPair::start(a0, b0, ctx);
    for _ in 0..k {
        sp.step(&coeffs, ctx);
    }
    // R-jet = A - (beta + u) B
    let rjet = sp.a.sub(&shift.mul(&sp.b, ctx), ctx);
    extract_jet_log(&rjet, ord as usize, &sp.logscale, ctx)
}

/// log |gamma_k| (or |eta_k|) from the jet of the homogeneous numerator at
/// infinity: the order-n coefficient of u A(u) - B(u) (periodic case) or
/// u_scale-combination for preimages.
fn log_gamma_by_jets(map: &BinaryFormPair, k: u32, ord: u64, ctx: &RealCtx) -> Result<RF, Error> {
    let j = ord as usize + 2;
    let coeffs = MapComplexCoeffs::new(map, ctx);
    let one = Complex::from_real(ctx.from_i64(1), ctx);
    let a0 = CSeries::from_coeffs(vec![one.clone()], j, ctx);
    let b0 = CSeries::from_coeffs(vec![Complex::zero(ctx), one], j, ctx);
    let mut sp = SeriesPair::start(a0, b0, ctx);
    for _ in 0..k {
        sp.step(&coeffs, ctx);
    }
    // T1 P_k - T0 Q_k at (1, u): u * A(u) - B(u).
    let mut shifted = vec![Complex::zero(ctx)];
    shifted.extend(sp.a.c.iter().take(j - 1).cloned());
    let ua = CSeries { c: shifted };
    let g = ua.sub(&sp.b, ctx);
    extract_jet_log(&g, ord as usize, &sp.logscale, ctx)
}

fn extract_jet_log(g: &CSeries, ord: usize, logscale: &RF, ctx: &RealCtx) -> Result<RF, Error> {
    let lead = &g.c[ord];
    if lead.is_zero() {
        return Err(Error::PrecisionFailure);
    }
    // coefficients below the predicted order must be noise
    let cutoff_exp = -((ctx.bits() / 2) as i64);
    let lead_exp = lead.abs(ctx).exponent().unwrap_or(0) as i64;
    for low in &g.c[..ord] {
        if low.is_zero() {
            continue;
        }
        let e = low.abs(ctx).exponent().unwrap_or(i64::MIN as i32 / 2) as i64;
        if e > lead_exp + cutoff_exp {
            return Err(Error::PrecisionFailure);
        }
    }
    Ok(ctx.add(logscale, &lead.ln_abs(ctx)))
}

/// How a root family of F sits among the periodic points, decided exactly.
#[derive(Clone, Debug)]
pub enum FamilyCycle {
    NotPeriodic,
    Periodic {
        period: u32,
        /// e(k) = 1 when the multiplier is not a root of unity; otherwise the
        /// parabolic multiplicity applies when ord | k/period.
        unit_order: Option<u32>,
        parabolic_multiplicity: Option<u64>,
    },
}

pub fn family_multiplicity(fc: &FamilyCycle, k: u32) -> u64 {
    match fc {
        FamilyCycle::NotPeriodic => 0,
        FamilyCycle::Periodic {
            period,
            unit_order,
            parabolic_multiplicity,
        } => {
            if k % period != 0 {
                return 0;
            }
            match unit_order {
                Some(rho) if (k / period) % rho == 0 => parabolic_multiplicity.unwrap_or(1),
                _ => 1,
            }
        }
    }
}

fn ring_reduce(a: &PolyQ, f: &PolyQ) -> PolyQ {
    if a.degree() < f.degree() {
        a.clone()
    } else {
        poly_divrem(a, f).expect("modulus nonzero").1
    }
}

fn ring_normalize(a: &PolyQ, b: &PolyQ) -> (PolyQ, PolyQ) {
    // divide by the largest-coefficient content to keep sizes in check
    let mut best: Option<Rat> = None;
    for c in a.coeffs().iter().chain(b.coeffs().iter()) {
        if c.is_zero() {
            continue;
        }
        let mag = c.clone();
        let mag = if mag < Rat::zero() { -mag } else { mag };
        best = Some(match best {
            None => mag,
            Some(m) => {
                if mag > m {
                    mag
                } else {
                    m
                }
            }
        });
    }
    match best {
        Some(s) if !s.is_zero() && !s.is_one() => {
            let inv = s.recip();
            (a.scale(&inv), b.scale(&inv))
        }
        _ => (a.clone(), b.clone()),
    }
}

/// Exact ring inverse of b modulo f (f squarefree, gcd(b, f) = 1).
fn ring_inverse(b: &PolyQ, f: &PolyQ) -> Result<PolyQ, Error> {
    // extended Euclid over Q[t]
    let (mut r0, mut r1) = (f.clone(), ring_reduce(b, f));
    let (mut s0, mut s1) = (PolyQ::zero(), PolyQ::one());
    while !r1.is_zero() {
        let (q, r) = poly_divrem(&r0, &r1)?;
        let ns = s0.sub(&q.mul(&s1));
        r0 = std::mem::replace(&mut r1, r);
        s0 = std::mem::replace(&mut s1, ring_reduce(&ns, f));
    }
    if !r0.is_constant() {
        return Err(Error::Unsupported(
            "ring element not invertible (orbit meets infinity)".into(),
        ));
    }
    Ok(s0.scale(&r0.leading_coeff().recip()))
}

/// Exact cycle analysis for the whole conjugate family of roots of an
/// irreducible F of degree >= 2 (linear F goes through the rational-point
/// analysis instead).
pub fn analyze_root_family(
    map: &BinaryFormPair,
    f: &PolyQ,
    search: u32,
    degree_cap: u64,
) -> Result<FamilyCycle, Error> {
    let t = PolyQ::monomial(Rat::one(), 1);
    let mut a = ring_reduce(&t, f);
    let mut b = PolyQ::one();
    let mut period = None;
    for j in 1..=search {
        let (na, nb) = eval_forms_ring(map, &a, &b, f);
        let (na, nb) = ring_normalize(&na, &nb);
        a = na;
        b = nb;
        // family periodic at j iff A_j - t B_j == 0 in the ring
        let test = ring_reduce(&a.sub(&t.mul(&b)), f);
        if test.is_zero() {
            period = Some(j);
            break;
        }
    }
    let period = match period {
        Some(p) => p,
        None => return Ok(FamilyCycle::NotPeriodic),
    };
    // multiplier of phi^period along the cycle, as a ring element
    let (da, db) = crate::dynmap::derivative_pair(map);
    let mut lambda = PolyQ::one();
    let mut xa = ring_reduce(&t, f);
    let mut xb = PolyQ::one();
    for _ in 0..period {
        // x = xa / xb in the ring
        let xbinv = ring_inverse(&xb, f)?;
        let x = ring_reduce(&xa.mul(&xbinv), f);
        let denom = eval_poly_ring(&db, &x, f);
        let denom_inv = ring_inverse(&denom, f)?;
        let num = eval_poly_ring(&da, &x, f);
        lambda = ring_reduce(&lambda.mul(&num).mul(&denom_inv), f);
        let (na, nb) = eval_forms_ring(map, &xa, &xb, f);
        let (na, nb) = ring_normalize(&na, &nb);
        xa = na;
        xb = nb;
    }
    // is the multiplier a root of unity? test small orders
    let mut unit_order = None;
    let mut pw = PolyQ::one();
    for m in 1..=24u32 {
        pw = ring_reduce(&pw.mul(&lambda), f);
        if pw == PolyQ::one() {
            unit_order = Some(m);
            break;
        }
    }
    let parabolic_multiplicity = match unit_order {
        None => None,
        Some(rho) => {
            let omega = rho * period;
            let fp = fixed_point_poly(map, omega, degree_cap)?;
            // multiplicity of F in R_omega via repeated exact division
            let mut e = 0u64;
            let mut cur = fp.rk.clone();
            loop {
                let g = poly_gcd(&cur, f)?;
                if g.is_constant() {
                    break;
                }
                if g.deg() != f.deg() {
                    return Err(Error::Unsupported(
                        "irreducible family with partial gcd".into(),
                    ));
                }
                cur = poly_div_exact(&cur, &g)?;
                e += 1;
            }
            Some(e)
        }
    };
    Ok(FamilyCycle::Periodic {
        period,
        unit_order,
        parabolic_multiplicity,
    })
}

fn eval_forms_ring(map: &BinaryFormPair, a: &PolyQ, b: &PolyQ, f: &PolyQ) -> (PolyQ, PolyQ) {
    let d = map.degree();
    let mut pa = vec![PolyQ::one()];
    let mut pb = vec![PolyQ::one()];
    for i in 1..=d {
        let na = ring_reduce(&pa[i - 1].mul(a), f);
        pa.push(na);
        let nb = ring_reduce(&pb[i - 1].mul(b), f);
        pb.push(nb);
    }
    let assemble = |coeffs: &[Rat]| {
        let mut acc = PolyQ::zero();
        for (i, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            acc = acc.add(&ring_reduce(&pa[d - i].mul(&pb[i]), f).scale(c));
        }
        ring_reduce(&acc, f)
    };
    (assemble(map.pcoeffs()), assemble(map.qcoeffs()))
}

fn eval_poly_ring(p: &PolyQ, x: &PolyQ, f: &PolyQ) -> PolyQ {
    let mut acc = PolyQ::zero();
    for c in p.coeffs().iter().rev() {
        acc = ring_reduce(&acc.mul(x), f).add(&PolyQ::constant(c.clone()));
    }
    acc
}

/// Target of a numeric average: the periodic divisor or a preimage divisor.
pub enum NumericTarget {
    Periodic,
    Preimage(ProjPointQ),
}

/// One numeric-mode average at the archimedean place, at a single precision.
///
/// Returns (value, diagnostics are the caller's job). The removal of
/// periodic roots of F (or preimage-coincident roots) is decided by exact
/// arithmetic before any float sees the data.
pub fn numeric_average_single(
    map: &BinaryFormPair,
    f: &PolyQ,
    k: u32,
    target: &NumericTarget,
    degree_cap: u64,
    orbit_search: u32,
    ctx: &RealCtx,
) -> Result<RF, Error> {
    if f.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let d = map.degree() as u64;
    let dk = d.checked_pow(k).ok_or(Error::IterationBudgetExceeded)? as i64;
    let lc = f.leading_coeff();

    let has_roots = f.deg() > 0;
    // Exact structural data; the leading-coefficient log is only needed when
    // F has roots.
    let (removed_per_root, inf_ord, log_lead) = match target {
        NumericTarget::Periodic => {
            let inf =
                analyze_rational_point(map, &ProjPointQ::infinity(), orbit_search, degree_cap)?;
            let n_inf = periodic_multiplicity(&inf, k);
            let e_root = if has_roots {
                periodic_root_multiplicity(map, f, k, orbit_search, degree_cap)?
            } else {
                0
            };
            let log_gamma = if has_roots {
                Some(log_gamma_numeric(map, k, n_inf, ctx)?)
            } else {
                None
            };
            (e_root, n_inf, log_gamma)
        }
        NumericTarget::Preimage(alpha) => {
            if crate::dynmap::is_exceptional(map, alpha) {
                return Err(Error::ExceptionalTarget);
            }
            let w_inf = preimage_inf_multiplicity(map, alpha, k)?;
            if w_inf > 0 {
                return Err(Error::Unsupported(
                    "numeric preimage average with infinity in the fiber; use exact mode".into(),
                ));
            }
            if preimage_hits_family(map, f, alpha, k, orbit_search)? {
                return Err(Error::Unsupported(
                    "numeric preimage average with an F-root in the fiber of alpha; use exact mode"
                        .into(),
                ));
            }
            let log_eta = if has_roots {
                Some(log_eta_numeric(map, alpha, k, ctx)?)
            } else {
                None
            };
            (0u64, 0u64, log_eta)
        }
    };

    // Degree of the divisor polynomial after removals.
    let n_roots = f.deg() as u64;
    let full_degree = match target {
        NumericTarget::Periodic => dk as u64 + 1 - inf_ord,
        NumericTarget::Preimage(_) => dk as u64,
    };
    let deg_rt = full_degree - removed_per_root * n_roots;

    let roots = if has_roots {
        complex_roots(f, ctx)?
    } else {
        Vec::new()
    };
    debug_assert_eq!(roots.len() as u64, n_roots);
    let log_lead = log_lead.unwrap_or_else(|| ctx.zero());

    let mut total = ctx.mul(&ctx.from_i64(deg_rt as i64), &ctx.ln_abs_rat(&lc));
    for (i, beta) in roots.iter().enumerate() {
        let log_val = match target {
            NumericTarget::Periodic if removed_per_root > 0 => {
                // jet at a periodic root, then divide out the sibling factors
                let mut v = log_removed_value_at(map, beta, k, removed_per_root, ctx)?;
                for (jx, other) in roots.iter().enumerate() {
                    if jx == i {
                        continue;
                    }
                    let diff = beta.sub(other, ctx);
                    v = ctx.sub(
                        &v,
                        &ctx.mul(&ctx.from_i64(removed_per_root as i64), &diff.ln_abs(ctx)),
                    );
                }
                v
            }
            _ => {
                // plain pair iteration: log |u P_k - s Q_k| at the root
                let (s, u) = match target {
                    NumericTarget::Periodic => (beta.clone(), Complex::from_real(ctx.from_i64(1), ctx)),
                    NumericTarget::Preimage(alpha) => (
                        Complex::from_rat(&Rat::from(alpha.a().clone()), ctx),
                        Complex::from_rat(&Rat::from(alpha.b().clone()), ctx),
                    ),
                };
                let coeffs = MapComplexCoeffs::new(map, ctx);
                let mut sp = ScaledPair::start(
                    beta.clone(),
                    Complex::from_real(ctx.from_i64(1), ctx),
                    NormKind::Max,
                    ctx,
                );
                for _ in 0..k {
                    sp.step(&coeffs, NormKind::Max, ctx);
                }
                let resid = sp.a.mul(&u, ctx).sub(&sp.b.mul(&s, ctx), ctx);
                let cliff = -((ctx.bits() / 2) as i64);
                let re = resid.abs(ctx).exponent().unwrap_or(i64::MIN as i32 / 2) as i64;
                if resid.is_zero() || re < cliff {
                    // unexpectedly close to the excluded locus
                    return Err(Error::PrecisionFailure);
                }
                ctx.add(&sp.logscale, &resid.ln_abs(ctx))
            }
        };
        total = ctx.add(&total, &ctx.sub(&log_val, &log_lead));
    }
    Ok(ctx.div(&total, &ctx.from_i64(dk)))
}

/// Exact multiplicity e(k) shared by all roots of F in R_k.
fn periodic_root_multiplicity(
    map: &BinaryFormPair,
    f: &PolyQ,
    k: u32,
    orbit_search: u32,
    degree_cap: u64,
) -> Result<u64, Error> {
    if f.is_constant() {
        return Ok(0);
    }
    if f.deg() == 1 {
        let root = -(f.coeff(0) / f.coeff(1));
        let x = ProjPointQ::from_rat(&root);
        let cyc = analyze_rational_point(map, &x, orbit_search, degree_cap)?;
        return Ok(periodic_multiplicity(&cyc, k));
    }
    // Degree >= 2: families must be irreducible for the uniform analysis.
    let fam = analyze_root_family(map, f, orbit_search, degree_cap)?;
    Ok(family_multiplicity(&fam, k))
}

/// Whether phi^k(infinity) = alpha, decided exactly (with cycle shortcut).
fn preimage_inf_multiplicity(
    map: &BinaryFormPair,
    alpha: &ProjPointQ,
    k: u32,
) -> Result<u64, Error> {
    let target = orbit_point_at(map, &ProjPointQ::infinity(), k)?;
    Ok(u64::from(&target == alpha))
}

/// phi^k(x) with early cycle detection and a hard coordinate budget.
fn orbit_point_at(map: &BinaryFormPair, x: &ProjPointQ, k: u32) -> Result<ProjPointQ, Error> {
    let mut orbit = vec![x.clone()];
    for j in 1..=k {
        let next = map.step_point(orbit.last().unwrap());
        if let Some(pos) = orbit.iter().position(|y| y == &next) {
            // cycle: index k into tail + cycle (k > tail always holds here)
            let tail = pos as u32;
            let period = j - tail;
            let idx = tail + ((k - tail) % period);
            return Ok(orbit[idx as usize].clone());
        }
        if next.a().bits().max(next.b().bits()) > (1 << 22) {
            return Err(Error::IterationBudgetExceeded);
        }
        orbit.push(next);
    }
    Ok(orbit[k as usize].clone())
}

/// Whether any root of F lies in the k-th preimage fiber of alpha (exactly).
fn preimage_hits_family(
    map: &BinaryFormPair,
    f: &PolyQ,
    alpha: &ProjPointQ,
    k: u32,
    orbit_search: u32,
) -> Result<bool, Error> {
    let _ = orbit_search;
    if f.is_constant() {
        return Ok(false);
    }
    if f.deg() == 1 {
        let root = -(f.coeff(0) / f.coeff(1));
        let x = ProjPointQ::from_rat(&root);
        return Ok(&orbit_point_at(map, &x, k)? == alpha);
    }
    // family test in the ring: u A_k - s B_k == 0 mod F
    let t = PolyQ::monomial(Rat::one(), 1);
    let mut a = ring_reduce(&t, f);
    let mut b = PolyQ::one();
    for _ in 0..k {
        let (na, nb) = eval_forms_ring(map, &a, &b, f);
        let (na, nb) = ring_normalize(&na, &nb);
        a = na;
        b = nb;
    }
    let s = Rat::from(alpha.a().clone());
    let u = Rat::from(alpha.b().clone());
    let test = ring_reduce(&a.scale(&u).sub(&b.scale(&s)), f);
    Ok(test.is_zero())
}

/// log |gamma_k| for the exact periodic normalization at infinity.
fn log_gamma_numeric(map: &BinaryFormPair, k: u32, n_inf: u64, ctx: &RealCtx) -> Result<RF, Error> {
    let d = map.degree() as u64;
    if map.is_polynomial_map() {
        // gamma_k = a^((d^k - 1)/(d - 1)) where a is the top P coefficient.
        let a = &map.pcoeffs()[0];
        let dk = BigInt::from(d).pow(k);
        let expo = (dk - BigInt::one()) / BigInt::from(d - 1);
        let e = ctx.from_bigint(&expo);
        return Ok(ctx.mul(&e, &ctx.ln_abs_rat(a)));
    }
    if n_inf == 0 {
        // gamma_k = -Q_k(1, 0) != 0: iterate the pair at (1, 0).
        let coeffs = MapComplexCoeffs::new(map, ctx);
        let one = Complex::from_real(ctx.from_i64(1), ctx);
        let mut sp = ScaledPair::start(one, Complex::zero(ctx), NormKind::Max, ctx);
        for _ in 0..k {
            sp.step(&coeffs, NormKind::Max, ctx);
        }
        if sp.b.is_zero() {
            return Err(Error::PrecisionFailure);
        }
        return Ok(ctx.add(&sp.logscale, &sp.b.ln_abs(ctx)));
    }
    log_gamma_by_jets(map, k, n_inf, ctx)
}

/// log |eta_k| for a preimage target alpha with infinity not in the fiber.
fn log_eta_numeric(
    map: &BinaryFormPair,
    alpha: &ProjPointQ,
    k: u32,
    ctx: &RealCtx,
) -> Result<RF, Error> {
    let coeffs = MapComplexCoeffs::new(map, ctx);
    let one = Complex::from_real(ctx.from_i64(1), ctx);
    let mut sp = ScaledPair::start(one, Complex::zero(ctx), NormKind::Max, ctx);
    for _ in 0..k {
        sp.step(&coeffs, NormKind::Max, ctx);
    }
    let s = Complex::from_rat(&Rat::from(alpha.a().clone()), ctx);
    let u = Complex::from_rat(&Rat::from(alpha.b().clone()), ctx);
    let eta = sp.a.mul(&u, ctx).sub(&sp.b.mul(&s, ctx), ctx);
    if eta.is_zero() {
        return Err(Error::PrecisionFailure);
    }
    Ok(ctx.add(&sp.logscale, &eta.ln_abs(ctx)))
}

/// Sanity anchor used by tests: the value log max(|P_k|,|Q_k|)/d^k at a
/// rational point via the numeric pair engine.
pub fn pair_limit_value(
    map: &BinaryFormPair,
    a: &Rat,
    b: &Rat,
    k: u32,
    ctx: &RealCtx,
) -> RF {
    let raw = arch_pair_limit(
        map,
        Complex::from_rat(a, ctx),
        Complex::from_rat(b, ctx),
        NormKind::Max,
        0.0,
        k,
        ctx,
    );
    raw.value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactcore::real::to_f64;
    use crate::dynmap::map_from_i64;
    use crate::exactcore::rat_from_i64;

    fn squaring() -> BinaryFormPair {
        map_from_i64(&[1, 0, 0], &[0, 0, 1]).unwrap()
    }

    #[test]
    fn gamma_jets_match_exact_for_parabolic_map() {
        // (z^2+1)/z: gamma_k = k (hand-checked k = 1..3 from exact R_k).
        let ctx = RealCtx::new(192);
        let m = map_from_i64(&[1, 0, 1], &[0, 1, 0]).unwrap();
        for k in 1..=6u32 {
            let fp = fixed_point_poly(&m, k, 4096).unwrap();
            let expect = crate::heights::rat_to_f64(&fp.gamma_k, &ctx).abs().ln();
            let got = to_f64(&log_gamma_by_jets(&m, k, fp.inf_mult, &ctx).unwrap());
            assert!(
                (got - expect).abs() < 1e-9,
                "k={k}: jets {got} vs exact {expect}"
            );
        }
    }

    #[test]
    fn family_analysis_golden_under_z2_minus_1() {
        // t^2 - t - 1: both roots are fixed points of z^2 - 1 with
        // non-unit multipliers.
        let m = map_from_i64(&[1, 0, -1], &[0, 0, 1]).unwrap();
        let f = PolyQ::from_i64s(&[-1, -1, 1]);
        let fam = analyze_root_family(&m, &f, 12, 4096).unwrap();
        match fam {
            FamilyCycle::Periodic {
                period, unit_order, ..
            } => {
                assert_eq!(period, 1);
                assert!(unit_order.is_none());
            }
            _ => panic!("family should be periodic"),
        }
        assert_eq!(family_multiplicity(&fam, 5), 1);
    }

    #[test]
    fn family_analysis_wandering() {
        let f = PolyQ::from_i64s(&[-1, -1, 1]);
        let fam = analyze_root_family(&squaring(), &f, 12, 4096).unwrap();
        assert!(matches!(fam, FamilyCycle::NotPeriodic));
    }

    #[test]
    fn numeric_matches_closed_form_squaring() {
        // z^2, F = t-2, periodic: value_k = (log 2 + log(2^(2^k -1) - 1))/2^k
        // and log(2^(2^k-1) - 1) = (2^k - 1) log 2 + log(1 - 2^(1 - 2^k)).
        let ctx = RealCtx::new(256);
        let f = PolyQ::from_i64s(&[-2, 1]);
        for k in [3u32, 6, 10] {
            let v = numeric_average_single(
                &squaring(),
                &f,
                k,
                &NumericTarget::Periodic,
                4096,
                24,
                &ctx,
            )
            .unwrap();
            let dk = 2f64.powi(k as i32);
            let expect =
                (2f64.ln() + (dk - 1.0) * 2f64.ln() + (1.0 - 2f64.powf(1.0 - dk)).ln()) / dk;
            assert!(
                (to_f64(&v) - expect).abs() < 1e-12,
                "k={k}: got {} want {}",
                to_f64(&v),
                expect
            );
        }
    }

    #[test]
    fn numeric_with_periodic_rational_root() {
        // z^2, F = t - 1: remove the fixed point 1; at k=2 value = log(3)/4.
        let ctx = RealCtx::new(256);
        let f = PolyQ::from_i64s(&[-1, 1]);
        let v = numeric_average_single(
            &squaring(),
            &f,
            2,
            &NumericTarget::Periodic,
            4096,
            24,
            &ctx,
        )
        .unwrap();
        assert!((to_f64(&v) - 3f64.ln() / 4.0).abs() < 1e-12, "got {}", to_f64(&v));
    }

    #[test]
    fn numeric_preimage_roots_of_unity() {
        // z^2, F = t-2, alpha = 1, k = 3: (1/8) log(2^8 - 1).
        let ctx = RealCtx::new(256);
        let f = PolyQ::from_i64s(&[-2, 1]);
        let v = numeric_average_single(
            &squaring(),
            &f,
            3,
            &NumericTarget::Preimage(ProjPointQ::from_i64(1)),
            4096,
            24,
            &ctx,
        )
        .unwrap();
        assert!((to_f64(&v) - 255f64.ln() / 8.0).abs() < 1e-12);
    }

    #[test]
    fn numeric_rejects_exceptional_target() {
        let ctx = RealCtx::new(128);
        let f = PolyQ::from_i64s(&[-2, 1]);
        let e = numeric_average_single(
            &squaring(),
            &f,
            3,
            &NumericTarget::Preimage(ProjPointQ::from_i64(0)),
            4096,
            24,
            &ctx,
        )
        .unwrap_err();
        assert_eq!(e, Error::ExceptionalTarget);
    }
}
