//! Krein strings: forward and inverse spectral problems.
//!
//! A string is a non-negative measure `ω` on `(a, b)`; its Dirichlet spectrum and
//! norming constants come from `-u'' = z u ω`. The crate maps strings to spectral
//! data, inverts finite spectral data back to Stieltjes strings, reconstructs strings
//! from three spectra, and measures convergence of truncated reconstructions.

pub mod cli;
pub mod convergence;
pub mod error;
pub mod fixtures;
pub mod herglotz;
pub mod inverse;
pub mod io;
pub mod model;
pub mod poly;
pub mod quad;
pub mod scalar;
pub mod singular;
pub mod stieltjes;
pub mod three_spectra;

pub use error::{Error, Result};
pub use model::*;
pub use scalar::{Bits, Exact, Field, Mpf, Real};
