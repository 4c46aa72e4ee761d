//! Popp volume: conformal scaling, the corank-one unit-ball integral and the
//! space-form ball volume omega_kappa.

mod calibrate;
pub(crate) mod conformal;
mod omega;
mod unit_ball;

pub use calibrate::{calibrate_prefactor, density_factor, unit_ball_volume, Calibration, ModelSpace};
pub use conformal::{conformal_scale_volume, ConformalFactor};
pub use omega::{b_kappa, omega_kappa, omega_ratio_sup, phi_kappa, OmegaKappa, OMEGA_GRID_STEP, OMEGA_STAR};
pub use unit_ball::{unit_ball_integral, unit_ball_integrand, UnitBallIntegral, APPENDIX_CONSTANT};
