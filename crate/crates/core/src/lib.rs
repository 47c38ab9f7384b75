//! Squeezed resonance fluorescence from a two-level emitter next to a metal
//! nanosphere.
//!
//! The crate is organised bottom-up:
//!
//! - [`materials`]: analytic Drude-Lorentz permittivity and its fit to tabulated data.
//! - [`specfun`]: spherical Bessel/Hankel, Riccati-Bessel and Mie angular functions.
//! - [`green`]: vacuum and sphere-scattered dyadic Green tensors, plane-wave Mie fields.
//! - [`emitter`]: dressed decay rate, frequency shift and Rabi enhancement, Bloch steady
//!   state and the normally-ordered atomic variance.
//! - [`squeeze`]: squeezing amplitudes and phases at a detector, the field variance and
//!   the homodyne photocount conversion.
//!
//! All quantities are SI internally. Lengths cross the public boundary in nanometres
//! where noted.

pub mod constants;
pub mod emitter;
pub mod error;
pub mod green;
pub mod materials;
pub mod quadrature;
pub mod specfun;
pub mod squeeze;

pub use error::{Error, Result};

/// Complex double used throughout.
pub type C64 = num_complex::Complex64;
