//! Metric-measure decompositions, the test functions built on them and
//! Rayleigh-quotient certificates.

mod annulus;
mod space;
mod testfn;
mod verify;

pub use annulus::{
    decompose_global, decompose_local, exhaustive_optimum, Annulus, DecompositionKind, DecompositionResult,
    ExhaustiveOptimum, ANNULUS_CANDIDATE_MAX_N, DOMAIN_RHO, LOCAL_OUTER_CAP,
};
pub use space::{MetricMeasureSpace, PointMetric, SpaceCheck};
pub use testfn::{
    annulus_profile, build_annulus_test_function, build_domain_test_function, certify_counting_bound,
    eigenvalue_bound_report, lipschitz_ratio, smooth_random_factor, verify_conformal_invariance, BoundReport, BoundRow,
    ConformalEnergyReport, CountingCertificate, TestFunction,
};
pub use verify::{verify_decomposition, VerificationReport};
