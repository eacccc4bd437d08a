//! Data types for strings, measures, spectra and triples.

mod integral;
mod mass;
mod measure;
mod sequence;
mod string;
mod triple;

pub use integral::{ls_integral, ls_integral_tol, validate_mass, MassCertificate, QUAD_TOL};
pub(crate) use integral::density_integral;
pub use mass::{Density, Interval, MassDistribution, Profile};
pub use measure::{Atom, AtomTail, SpectralMeasure, SpectralTriplet};
pub use sequence::{zero_product_eval, zero_product_eval_with, ProductValue, SeqTail, ZeroProduct, ZeroSet};
pub use string::StieltjesString;
pub use triple::ThreeSpectraTriple;
