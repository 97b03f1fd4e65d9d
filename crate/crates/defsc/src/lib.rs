//! Deformed semicircle law toolkit.
//!
//! The crate computes the free additive convolution of a bounded potential
//! law `μ` with the semicircle law by solving the self-consistent equation
//!
//! ```text
//! m_fc(z) = ∫ dμ(v) / (λ v − z − m_fc(z)),   Im m_fc > 0,
//! ```
//!
//! derives the support, density, integrated density and classical eigenvalue
//! locations of the resulting law, and provides a Monte Carlo harness that
//! samples `H = λV + W` and compares its spectral statistics against the
//! local-law, rigidity and delocalization envelopes.
//!
//! Modules:
//!
//! * [`measure`]: potential laws (Jacobi densities and atomic measures).
//! * [`quadrature`]: Gauss–Jacobi rules and adaptive Gauss–Kronrod.
//! * [`freeconv`]: the self-consistent solver and everything derived from it.
//! * [`rmt`]: ensemble sampling, diagonalization and resolvent statistics.
//! * [`fluctuation`]: potential-driven corrections `r_n`, `ζ₀`, `ζ̃₀`.
//! * [`harness`]: declarative experiments, envelopes, reports.

pub mod error;
pub mod fluctuation;
pub mod freeconv;
pub mod harness;
pub mod measure;
pub mod quadrature;
pub mod rmt;

pub use error::{Error, Result};
pub use freeconv::{EdgeClass, FreeConvolution, SpectralPoint};
pub use measure::Measure;

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
