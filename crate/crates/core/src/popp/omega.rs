use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::integrate;

/// Bound omega_kappa(r) <= OMEGA_STAR r^4, set to 1.1 times the largest ratio
/// seen on the grid of [`omega_ratio_sup`].
pub const OMEGA_STAR: f64 = 24.6163;

/// Radius spacing of the grid behind [`OMEGA_STAR`].
pub const OMEGA_GRID_STEP: f64 = 0.25;

const REL_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmegaKappa {
    pub kappa: f64,
    pub r: f64,
    pub value: f64,
    pub error: f64,
}

/// (2 - 2 cos tau - tau sin tau) / tau^4 with tau^2 = sigma, continued to
/// sigma <= 0 through cosh/sinh.
pub fn phi_kappa(sigma: f64) -> f64 {
    if sigma.abs() < 0.05 {
        let s = sigma;
        1.0 / 12.0
            + s * (-1.0 / 180.0
                + s * (1.0 / 6720.0 + s * (-1.0 / 453600.0 + s * (1.0 / 47900160.0 - s / 7264857600.0))))
    } else if sigma > 0.0 {
        let t = sigma.sqrt();
        (2.0 - 2.0 * t.cos() - t * t.sin()) / (sigma * sigma)
    } else {
        let t = (-sigma).sqrt();
        (2.0 - 2.0 * t.cosh() + t * t.sinh()) / (sigma * sigma)
    }
}

/// Density b_kappa(t, z) = t^2 phi(kappa t^2 + z^2).
pub fn b_kappa(kappa: f64, t: f64, z: f64) -> f64 {
    t * t * phi_kappa(kappa * t * t + z * z)
}

/// Largest admissible radius, infinite for kappa >= 0.
fn radius_limit(kappa: f64) -> f64 {
    if kappa < 0.0 {
        2.0 * 2f64.sqrt() * PI / (-kappa).sqrt()
    } else {
        f64::INFINITY
    }
}

/// Ball volume 2 pi int int b_kappa(t, z) t dt dz over
/// {0 < t <= r, kappa t^2 + z^2 <= 4 pi^2}.
pub fn omega_kappa(kappa: f64, r: f64) -> Result<OmegaKappa> {
    if !(r > 0.0) || !r.is_finite() || !kappa.is_finite() {
        return Err(Error::invalid(format!("need finite kappa and r > 0, got ({kappa}, {r})")));
    }
    let lim = radius_limit(kappa);
    if r > lim * (1.0 + 1e-12) {
        return Err(Error::invalid(format!("r = {r} exceeds 2 sqrt(2) pi / sqrt(-kappa) = {lim}")));
    }
    let tmax = if kappa > 0.0 { r.min(2.0 * PI / kappa.sqrt()) } else { r };
    let mut inner_err = 0.0f64;
    let mut failure = None;
    let outer = integrate(
        |t| {
            let zmax = (4.0 * PI * PI - kappa * t * t).max(0.0).sqrt();
            match integrate(|z| phi_kappa(kappa * t * t + z * z), 0.0, zmax, 1e-15, REL_TOL) {
                Ok(v) => {
                    inner_err = inner_err.max(v.error);
                    2.0 * t * t * t * v.value
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        tmax,
        1e-15,
        REL_TOL,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let value = 2.0 * PI * outer.value;
    Ok(OmegaKappa {
        kappa,
        r,
        value,
        error: 2.0 * PI * (outer.error + inner_err * tmax.powi(4) / 2.0),
    })
}

/// sup of omega_kappa(r) / r^4 over kappa in {-1, 0, 1} and radii
/// r = j * OMEGA_GRID_STEP up to `r_max`, plus the endpoint of the admissible
/// range when kappa < 0.
pub fn omega_ratio_sup(r_max: f64) -> Result<(f64, f64, f64)> {
    let mut best = (0.0, 0.0, 0.0);
    for &kappa in &[-1.0, 0.0, 1.0] {
        let lim = radius_limit(kappa).min(r_max);
        let mut radii: Vec<f64> = (1..)
            .map(|j| j as f64 * OMEGA_GRID_STEP)
            .take_while(|&r| r <= lim)
            .collect();
        if kappa < 0.0 && radius_limit(kappa) <= r_max {
            radii.push(radius_limit(kappa));
        }
        for r in radii {
            let v = omega_kappa(kappa, r)?.value / r.powi(4);
            if v > best.0 {
                best = (v, kappa, r);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi_direct(sigma: f64) -> f64 {
        let t = sigma.sqrt();
        (2.0 - 2.0 * t.cos() - t * t.sin()) / t.powi(4)
    }

    #[test]
    fn flat_density_on_axis() {
        for &t in &[0.1, 1.0, 3.0] {
            assert!((b_kappa(0.0, t, 0.0) - t * t / 12.0).abs() < 1e-15);
        }
    }

    #[test]
    fn small_tau_limit() {
        let tau: f64 = 1e-3;
        let v = phi_kappa(tau * tau);
        assert!(((v - 1.0 / 12.0) / (1.0 / 12.0)).abs() < 1e-6);
        assert_eq!(phi_kappa(0.0), 1.0 / 12.0);
    }

    #[test]
    fn branches_meet() {
        // the direct forms are accurate to ~1e-13 at the switch point
        for &s in &[0.05f64, 0.0500001, 0.06] {
            assert!((phi_kappa(s) - phi_direct(s)).abs() < 1e-12, "{s}");
        }
        let series = |s: f64| 1.0 / 12.0 - s / 180.0 + s * s / 6720.0 - s * s * s / 453600.0;
        assert!((phi_kappa(0.0499999) - series(0.0499999)).abs() < 1e-12);
        let hyp = |s: f64| {
            let t = (-s).sqrt();
            (2.0 - 2.0 * t.cosh() + t * t.sinh()) / (s * s)
        };
        for &s in &[-0.05f64, -0.09, -3.0] {
            assert!((phi_kappa(s) - hyp(s)).abs() < 1e-12, "{s}");
        }
        assert!((phi_kappa(-0.0499999) - series(-0.0499999)).abs() < 1e-12);
    }

    #[test]
    fn quartic_homogeneity_flat() {
        let a = omega_kappa(0.0, 0.5).unwrap().value;
        let b = omega_kappa(0.0, 1.0).unwrap().value;
        assert!((b / a - 16.0).abs() < 1e-8);
    }

    #[test]
    fn domain_restriction() {
        assert!(omega_kappa(-1.0, 9.0).is_err());
        assert!(omega_kappa(-1.0, 8.8).is_ok());
        assert!(omega_kappa(0.0, 0.0).is_err());
        // for kappa > 0 the region stops at t = 2 pi / sqrt(kappa)
        let a = omega_kappa(1.0, 2.0 * PI).unwrap().value;
        let b = omega_kappa(1.0, 10.0).unwrap().value;
        assert!((a - b).abs() < 1e-9 * a);
    }
}
