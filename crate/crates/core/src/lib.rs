//! Ergodic averages, backward martingales and the bilinear paraproducts that
//! combine them, realized exactly on finite atomized probability spaces.
//!
//! The crate is organized bottom-up:
//!
//! - [`space`]: weighted atom spaces, partitions (finite σ-algebras),
//!   filtrations, observables, `L^p` norms and conditional expectations.
//! - [`dynamics`]: measure-preserving atom maps, ergodic averages via orbit
//!   prefix sums, lacunary index helpers, the commutativity check and a
//!   catalog of group-translation systems.
//! - [`martingale`]: backward martingales, martingale differences, square
//!   functions and binary refinement of forward filtrations.
//! - [`paraproduct`]: the ergodic–martingale, martingale–ergodic and
//!   martingale–martingale paraproducts and double ergodic averages.
//! - [`experiments`]: transference to `ℤ×Ω`, empirical constant estimation,
//!   Cauchy profiles, oscillation probes and identity suites.
//!
//! All floating-point work is done in `f64`. Everything is a pure function of
//! immutable values.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod martingale;
pub mod paraproduct;
pub mod space;

pub use error::{Error, Result};

/// Absolute tolerance for identities between values of magnitude `O(1)`.
pub const ABS_TOL: f64 = 1e-12;

/// Relative tolerance for identities between larger quantities.
pub const REL_TOL: f64 = 1e-10;
