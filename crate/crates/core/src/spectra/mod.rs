//! Sub-Laplacian spectra: the exact CR-sphere spectrum, finite-element box
//! operators, a shift-invert eigensolver and Weyl-law fitting.

mod band;
mod counting;
mod eigen;
mod exact_rank;
mod operator;
mod sparse;
mod sphere;

pub use band::BandCholesky;
pub use counting::{
    counting_function, counting_samples, eigenvalue_from_counting, log_grid, weyl_fit, Counting, WeylFit,
};
pub use eigen::{eigen_smallest, eigen_smallest_with, EigenOptions, SpectrumResult};
pub use exact_rank::{rank_exact, rank_mod_p, rank_rational};
pub use operator::{
    assemble_conformal, assemble_sub_laplacian, horizontal_gradient_samples, interpolate_at_quadrature,
    interval_neumann, BoxGrid, DiscreteOperator, MIN_NODES,
};
pub use sparse::CsrMatrix;
pub use sphere::{bidegree_dimension, harmonic_dimension_brute_force, sphere_spectrum, SphereSpectrumEntry, MAX_BASIS};
