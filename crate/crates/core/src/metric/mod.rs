//! Carnot-Caratheodory distance, ball volumes and covering measurements.

mod covering;
mod distance;
mod volume;

pub use covering::{covering_number, verify_cover, BallSampler, CoveringNet, EuclideanLine};
pub use distance::{cc_distance, Geodesic, DistanceOracle};
pub use volume::{
    ball_volume_mc, ball_volume_mc_at, doubling_ratio, growth_modulus, z_box_constant, BallEstimate,
    GrowthReport, MIN_SAMPLES,
};
