//! Canonical heights, local canonical heights, and generalized Mahler
//! measures for rational self-maps of the projective line over Q.
//!
//! The crate computes, at desk scale, the quantities tied to a degree-d > 1
//! rational map phi = [P : Q] acting on P^1:
//!
//! - naive and canonical heights of rational and algebraic points, with the
//!   per-place breakdown (archimedean escape-rate iteration; exact p-adic
//!   valuation recurrences at finite places);
//! - generalized Mahler measures of polynomials F at each place, and their
//!   realization as limits of averages of log|F| over periodic points and
//!   over backward iterates of a nonexceptional point;
//! - Lyapunov exponents as periodic-point averages of log|phi'|;
//! - a tower-function construction showing the periodic averages diverge for
//!   a (transcendental) point, so the algebraicity hypotheses are sharp.
//!
//! Everything that can be exact is exact: big rationals everywhere, resultant
//! arithmetic for root sums, and valuation recurrences at finite places.
//! Floats appear only at the archimedean place, behind a precision context
//! with doubled-precision verification.
//!
//! See the `examples/` directory for one runnable program per capability,
//! and the `dynmahler` binary for the command-line interface.

pub mod dynmap;
pub mod equidist;
pub mod error;
pub mod heights;
pub mod exactcore;

pub use error::Error;
pub use exactcore::{PolyQ, Rat, RealCtx};
