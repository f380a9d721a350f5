//! Exact-arithmetic homological algebra for Z/dZ-graded differential modules
//! over polynomial rings: Groebner bases with transformation logs, free
//! resolutions, free flags, homological perturbation, Cartan-Eilenberg style
//! resolutions of differential modules, and cyclic Adams operations.

pub(crate) mod cancel;
pub mod coeff_ring;
pub mod dm_core;
pub mod error;
pub mod flags;
pub mod groebner;
pub mod homalg;
pub mod linalg;
pub mod matrix;
pub mod perturb;
pub mod resolve;

pub use error::{Error, Result};
