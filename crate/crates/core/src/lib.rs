//! Sub-Riemannian spectral toolkit: Carnot-group arithmetic, Carnot-Caratheodory
//! distances and volumes, discretized sub-Laplacian spectra and metric-measure
//! decompositions with Rayleigh-quotient certificates.

pub mod carnot;
pub mod decomposition;
pub mod error;
pub mod io;
pub mod metric;
pub mod popp;
pub mod quad;
pub mod rng;

pub use error::{Error, Result};
pub mod spectra;
