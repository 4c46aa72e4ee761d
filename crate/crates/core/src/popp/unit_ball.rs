use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::integrate;

/// Uniform per-term constant c_* = e^pi.
pub const APPENDIX_CONSTANT: f64 = 23.140_692_632_779_267;

const ABS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitBallIntegral {
    pub ell: usize,
    pub b: Vec<f64>,
    /// Sum of the per-term integrals, without the prefactor C_ell.
    pub value: f64,
    /// Normalized integral of the i-th summand.
    pub terms: Vec<f64>,
    pub quadrature_error: f64,
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// (x cos x - sin x) / x^3
fn cubic_remainder(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let x2 = x * x;
        -1.0 / 3.0
            + x2 * (1.0 / 30.0
                + x2 * (-1.0 / 840.0 + x2 * (1.0 / 45360.0 + x2 * (-1.0 / 3991680.0 + x2 / 518918400.0))))
    } else {
        (x * x.cos() - x.sin()) / (x * x * x)
    }
}

// i-th summand divided by B^2 and s^(2 ell + 2), in a cancellation-free form
fn term(b: &[f64], i: usize, s: f64) -> f64 {
    let mut p = b[i] * b[i] * sinc(b[i] * s) * cubic_remainder(b[i] * s);
    for (j, &bj) in b.iter().enumerate() {
        if j != i {
            let c = sinc(bj * s);
            p *= c * c;
        }
    }
    p
}

/// Integrand before the 1/B^2 normalization,
/// s^-(2l+2) sum_i prod_{j != i} sin^2(b_j s) sin(b_i s) (b_i s cos(b_i s) - sin(b_i s)),
/// continuous at s = 0.
pub fn unit_ball_integrand(b: &[f64], s: f64) -> f64 {
    let bb: f64 = b.iter().map(|v| v * v).product();
    bb * (0..b.len()).map(|i| term(b, i, s)).sum::<f64>()
}

fn validate(ell: usize, b: &[f64]) -> Result<()> {
    if ell == 0 || b.len() != ell {
        return Err(Error::invalid(format!("b has {} entries, expected ell = {ell}", b.len())));
    }
    if b.iter().any(|v| !(v.is_finite() && *v > 0.0 && *v <= 1.0)) {
        return Err(Error::invalid("b entries must lie in (0, 1]"));
    }
    let max = b.iter().cloned().fold(0.0, f64::max);
    if (max - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("max b must be 1, got {max}")));
    }
    Ok(())
}

/// Normalized corank-one unit-ball integral over s in [0, pi].
pub fn unit_ball_integral(ell: usize, b: &[f64]) -> Result<UnitBallIntegral> {
    validate(ell, b)?;
    let mut terms = Vec::with_capacity(ell);
    let mut err = 0.0;
    for i in 0..ell {
        let r = integrate(|s| term(b, i, s), 0.0, PI, ABS_TOL / ell as f64, 0.0)?;
        terms.push(r.value);
        err += r.error;
    }
    Ok(UnitBallIntegral {
        ell,
        b: b.to_vec(),
        value: terms.iter().sum(),
        terms,
        quadrature_error: err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_exp_pi() {
        assert_eq!(APPENDIX_CONSTANT, PI.exp());
    }

    #[test]
    fn integrand_limit_at_zero() {
        assert!((unit_ball_integrand(&[1.0], 1e-12) + 1.0 / 3.0).abs() < 1e-15);
        let b: [f64; 2] = [1.0, 0.5];
        let lim = -(1.0 / 3.0) * (b[0].powi(4) * b[1].powi(2) + b[1].powi(4) * b[0].powi(2));
        assert!((unit_ball_integrand(&b, 1e-9) - lim).abs() < 1e-12);
    }

    #[test]
    fn factored_form_matches_direct() {
        let b: [f64; 3] = [1.0, 0.3, 0.8];
        for &s in &[0.4f64, 1.0, 2.5, 3.1] {
            let mut direct = 0.0;
            for i in 0..3 {
                let mut p = (b[i] * s).sin() * (b[i] * s * (b[i] * s).cos() - (b[i] * s).sin());
                for j in 0..3 {
                    if j != i {
                        p *= (b[j] * s).sin().powi(2);
                    }
                }
                direct += p;
            }
            direct /= s.powi(8);
            let f = unit_ball_integrand(&b, s);
            assert!((f - direct).abs() < 1e-12 * direct.abs().max(1e-3), "{s}: {f} vs {direct}");
        }
    }

    #[test]
    fn series_branch_is_continuous() {
        let a = cubic_remainder(0.4999999);
        let b = cubic_remainder(0.5000001);
        assert!((a - b).abs() < 1e-8);
        let x: f64 = 0.5;
        assert!((cubic_remainder(0.5) - (x * x.cos() - x.sin()) / x.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn heisenberg_value() {
        let r = unit_ball_integral(1, &[1.0]).unwrap();
        assert!((r.value + 0.525_768_839_7).abs() < 1e-8, "{}", r.value);
        assert!(r.quadrature_error < 1e-8);
    }

    #[test]
    fn rejects_unnormalized() {
        assert!(unit_ball_integral(2, &[0.5, 0.5]).is_err());
        assert!(unit_ball_integral(2, &[1.0]).is_err());
        assert!(unit_ball_integral(1, &[1.5]).is_err());
    }
}
