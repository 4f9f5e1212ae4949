//! Numerical core for the Ising-Kac model near criticality and the dynamical Φ⁴₂ equation.
//!
//! * [`lattice`]: periodic lattice fields, Fourier conventions, trigonometric extension.
//! * [`kernel`]: Kac kernel, spectrum, renormalization constant.
//! * [`glauber`]: Glauber dynamics, fluctuation field, linearized process.
//! * [`phi42`]: Galerkin sampler for Φ⁴₂ and Hermite/Wick utilities.
//! * [`besov`]: Paley-Littlewood blocks and discrete Besov norms.
//! * [`oracle`]: exact enumeration on tiny tori.
//! * [`stats`]: error bars and distribution comparison.

pub mod besov;
pub mod error;
mod fft;
pub mod glauber;
pub mod kernel;
pub mod lattice;
pub mod numeric;
pub mod oracle;
pub mod phi42;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use lattice::TorusField;
