//! Archimedean local heights via renormalized pair iteration.
//!
//! The pair (a, b) is kept at unit size while the removed scale accumulates
//! exactly in log form, so log max(|P_k|, |Q_k|) never overflows.

use crate::dynmap::BinaryFormPair;
use crate::exactcore::real::{to_f64, Complex, RealCtx, RF};

/// Which norm renormalizes the pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    Max,
    FubiniStudy,
}

/// A place-normalized coordinate pair with exactly tracked log-scale.
pub struct ScaledPair {
    pub a: Complex,
    pub b: Complex,
    pub logscale: RF,
}

impl ScaledPair {
    pub fn start(a: Complex, b: Complex, norm: NormKind, ctx: &RealCtx) -> ScaledPair {
        let mut sp = ScaledPair {
            a,
            b,
            logscale: ctx.zero(),
        };
        sp.renormalize(norm, ctx);
        sp
    }

    fn norm_value(&self, norm: NormKind, ctx: &RealCtx) -> RF {
        match norm {
            NormKind::Max => ctx.max(&self.a.abs(ctx), &self.b.abs(ctx)),
            NormKind::FubiniStudy => {
                ctx.sqrt(&ctx.add(&self.a.norm_sqr(ctx), &self.b.norm_sqr(ctx)))
            }
        }
    }

    fn renormalize(&mut self, norm: NormKind, ctx: &RealCtx) {
        let s = self.norm_value(norm, ctx);
        debug_assert!(!s.is_zero(), "pair (0,0) cannot appear");
        let inv = ctx.recip(&s);
        self.a = self.a.mul_real(&inv, ctx);
        self.b = self.b.mul_real(&inv, ctx);
        self.logscale = ctx.add(&self.logscale, &ctx.ln(&s));
    }

    /// One map application plus renormalization:
    /// logscale <- d * logscale + log ||(P(a,b), Q(a,b))||.
    pub fn step(&mut self, coeffs: &MapComplexCoeffs, norm: NormKind, ctx: &RealCtx) {
        let (pa, qa) = coeffs.eval(&self.a, &self.b, ctx);
        self.a = pa;
        self.b = qa;
        self.logscale = ctx.mul(&self.logscale, &ctx.from_i64(coeffs.d as i64));
        self.renormalize(norm, ctx);
    }
}

/// Map coefficients converted once to the working precision.
pub struct MapComplexCoeffs {
    pub d: usize,
    p: Vec<Complex>,
    q: Vec<Complex>,
}

impl MapComplexCoeffs {
    pub fn new(map: &BinaryFormPair, ctx: &RealCtx) -> Self {
        MapComplexCoeffs {
            d: map.degree(),
            p: map.pcoeffs().iter().map(|c| Complex::from_rat(c, ctx)).collect(),
            q: map.qcoeffs().iter().map(|c| Complex::from_rat(c, ctx)).collect(),
        }
    }

    pub(crate) fn pc(&self) -> &[Complex] {
        &self.p
    }

    pub(crate) fn qc(&self) -> &[Complex] {
        &self.q
    }

    pub fn eval(&self, a: &Complex, b: &Complex, ctx: &RealCtx) -> (Complex, Complex) {
        let mut pa = Vec::with_capacity(self.d + 1);
        let mut pb = Vec::with_capacity(self.d + 1);
        pa.push(Complex::from_real(ctx.from_i64(1), ctx));
        pb.push(Complex::from_real(ctx.from_i64(1), ctx));
        for i in 1..=self.d {
            let na = pa[i - 1].mul(a, ctx);
            pa.push(na);
            let nb = pb[i - 1].mul(b, ctx);
            pb.push(nb);
        }
        let assemble = |coeffs: &[Complex]| {
            let mut acc = Complex::zero(ctx);
            for (i, c) in coeffs.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                acc = acc.add(&c.mul(&pa[self.d - i], ctx).mul(&pb[i], ctx), ctx);
            }
            acc
        };
        (assemble(&self.p), assemble(&self.q))
    }
}

/// Raw archimedean limit data at a single precision.
pub struct ArchRaw {
    pub value: RF,
    pub k_used: u32,
    pub error_estimate: f64,
    pub converged: bool,
}

/// The limit log max(|P_k(a,b)|, |Q_k(a,b)|) / d^k at the archimedean place.
///
/// Stops at the first increment below tol * (1 - 1/d) and reports the
/// geometric-tail bound increment * d/(d-1).
pub fn arch_pair_limit(
    map: &BinaryFormPair,
    a: Complex,
    b: Complex,
    norm: NormKind,
    tol: f64,
    kmax: u32,
    ctx: &RealCtx,
) -> ArchRaw {
    let coeffs = MapComplexCoeffs::new(map, ctx);
    let d = map.degree() as f64;
    let mut sp = ScaledPair::start(a, b, norm, ctx);
    let mut dk = ctx.from_i64(1);
    let dstep = ctx.from_i64(map.degree() as i64);
    let mut prev = sp.logscale.clone();
    let mut k_used = 0;
    let stop = tol * (1.0 - 1.0 / d);
    let mut last_inc = f64::INFINITY;
    for k in 1..=kmax {
        sp.step(&coeffs, norm, ctx);
        dk = ctx.mul(&dk, &dstep);
        let cur = ctx.div(&sp.logscale, &dk);
        let inc = to_f64(&ctx.abs(&ctx.sub(&cur, &prev)));
        prev = cur;
        k_used = k;
        last_inc = inc;
        if inc < stop {
            return ArchRaw {
                value: prev,
                k_used,
                error_estimate: inc * d / (d - 1.0),
                converged: true,
            };
        }
    }
    ArchRaw {
        value: prev,
        k_used,
        error_estimate: if last_inc.is_finite() {
            last_inc * d / (d - 1.0)
        } else {
            f64::INFINITY
        },
        converged: false,
    }
}
