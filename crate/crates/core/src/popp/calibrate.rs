use std::collections::HashMap;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use serde::Serialize;

use crate::carnot::CorankOneGroup;
use crate::error::{Error, Result};
use crate::metric::{ball_volume_mc, BallEstimate, DistanceOracle};
use crate::popp::{omega_kappa, unit_ball_integral, UnitBallIntegral};

const DEFAULT_SAMPLES: usize = 400_000;

/// Prefactor C_ell fixed by a Monte-Carlo unit-ball volume of the standard group.
#[derive(Debug, Clone, Serialize)]
pub struct Calibration {
    pub ell: usize,
    pub prefactor: f64,
    pub volume: BallEstimate,
    pub integral: UnitBallIntegral,
}

fn cache() -> &'static Mutex<HashMap<(usize, usize, u64), Calibration>> {
    static C: OnceLock<Mutex<HashMap<(usize, usize, u64), Calibration>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

/// C_ell = (unit-ball volume at b = 1) / unit_ball_integral(ell, 1). The sign is
/// carried by C_ell so that C_ell times the integral is the positive volume.
pub fn calibrate_prefactor(ell: usize, n: usize, seed: u64) -> Result<Calibration> {
    if let Some(c) = cache().lock().expect("calibration cache poisoned").get(&(ell, n, seed)) {
        return Ok(c.clone());
    }
    let group = CorankOneGroup::heisenberg(ell)?;
    let oracle = DistanceOracle::new(group);
    let volume = ball_volume_mc(&oracle, 1.0, n, seed)?;
    let integral = unit_ball_integral(ell, &vec![1.0; ell])?;
    if integral.value.abs() < 1e3 * integral.quadrature_error.max(f64::MIN_POSITIVE) {
        return Err(Error::numeric(format!(
            "unit-ball integral {} is indistinguishable from zero",
            integral.value
        )));
    }
    let cal = Calibration {
        ell,
        prefactor: volume.volume_estimate / integral.value,
        volume,
        integral,
    };
    cache()
        .lock()
        .expect("calibration cache poisoned")
        .insert((ell, n, seed), cal.clone());
    Ok(cal)
}

/// Popp volume of the unit ball of `group`: the closed-form space-form value
/// for H^1 and a cached Monte-Carlo estimate otherwise.
pub fn unit_ball_volume(group: &CorankOneGroup) -> Result<f64> {
    if group.ell() == 1 && !group.has_transversal_t() {
        return Ok(omega_kappa(0.0, 1.0)?.value);
    }
    static C: OnceLock<Mutex<HashMap<String, f64>>> = OnceLock::new();
    let cache = C.get_or_init(|| Mutex::new(HashMap::new()));
    let key = format!("{:?}", group);
    if let Some(v) = cache.lock().expect("volume cache poisoned").get(&key) {
        return Ok(*v);
    }
    let v = ball_volume_mc(&DistanceOracle::new(group.clone()), 1.0, DEFAULT_SAMPLES, 0)?.volume_estimate;
    cache.lock().expect("volume cache poisoned").insert(key, v);
    Ok(v)
}

/// Model spaces with a constant tangent-ball density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModelSpace {
    /// Heisenberg group H^ell.
    Heisenberg { ell: usize },
    /// CR sphere S^(2 ell + 1); its tangent cones are H^ell.
    Sphere { ell: usize },
}

impl ModelSpace {
    pub fn ell(&self) -> usize {
        match *self {
            ModelSpace::Heisenberg { ell } | ModelSpace::Sphere { ell } => ell,
        }
    }

    pub fn hausdorff_dimension(&self) -> usize {
        2 * self.ell() + 2
    }
}

impl FromStr for ModelSpace {
    type Err = Error;

    /// Accepts `heisenberg:<ell>` and `sphere:<ell>`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, ell) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("unknown space tag '{s}'")))?;
        let ell: usize = ell
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad ell in space tag '{s}'")))?;
        if ell == 0 {
            return Err(Error::invalid("ell must be positive"));
        }
        match kind.trim() {
            "heisenberg" => Ok(ModelSpace::Heisenberg { ell }),
            "sphere" => Ok(ModelSpace::Sphere { ell }),
            _ => Err(Error::invalid(format!("unknown space tag '{s}'"))),
        }
    }
}

/// 2^-Q times the tangent unit-ball volume. `conformal_scale` rescales the
/// metric by a constant and leaves the result unchanged.
pub fn density_factor(space: ModelSpace, conformal_scale: f64) -> Result<f64> {
    if !(conformal_scale > 0.0 && conformal_scale.is_finite()) {
        return Err(Error::invalid("conformal scale must be positive"));
    }
    let group = CorankOneGroup::heisenberg(space.ell())?;
    let q = space.hausdorff_dimension() as i32;
    Ok(unit_ball_volume(&group)? / 2f64.powi(q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tags() {
        assert_eq!("heisenberg:1".parse::<ModelSpace>().unwrap(), ModelSpace::Heisenberg { ell: 1 });
        assert_eq!("sphere:2".parse::<ModelSpace>().unwrap(), ModelSpace::Sphere { ell: 2 });
        assert!("torus:1".parse::<ModelSpace>().is_err());
        assert!("heisenberg".parse::<ModelSpace>().is_err());
        assert!("sphere:0".parse::<ModelSpace>().is_err());
    }

    #[test]
    fn heisenberg_density() {
        let d = density_factor(ModelSpace::Heisenberg { ell: 1 }, 1.0).unwrap();
        let w = omega_kappa(0.0, 1.0).unwrap().value;
        assert_eq!(d, w / 16.0);
        assert_eq!(density_factor(ModelSpace::Heisenberg { ell: 1 }, 4.0).unwrap(), d);
        assert_eq!(density_factor(ModelSpace::Sphere { ell: 1 }, 1.0).unwrap(), d);
        assert!(density_factor(ModelSpace::Sphere { ell: 1 }, -1.0).is_err());
    }
}
