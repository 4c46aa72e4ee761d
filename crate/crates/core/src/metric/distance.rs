use std::f64::consts::PI;

use crate::carnot::{CorankOneGroup, GroupElement};
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;
const MAX_ITER: usize = 200;

/// Rotation angle beta in [0, 2 pi] stored with its gap 2 pi - beta, so that
/// angles close to a full turn keep their relative precision.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Turn {
    pub beta: f64,
    pub gap: f64,
}

impl Turn {
    pub fn new(beta: f64) -> Self {
        Turn { beta, gap: TWO_PI - beta }
    }

    fn half_sin(self) -> f64 {
        if self.beta <= PI {
            (0.5 * self.beta).sin()
        } else {
            (0.5 * self.gap).sin()
        }
    }

    fn sin(self) -> f64 {
        if self.beta <= PI {
            self.beta.sin()
        } else {
            -self.gap.sin()
        }
    }
}

/// z-area per squared horizontal displacement for a pair rotated by beta:
/// (beta - sin beta) / (4 (1 - cos beta)).
pub(crate) fn nu(t: Turn) -> f64 {
    let beta = t.beta;
    if beta.abs() < 0.25 {
        let b2 = beta * beta;
        beta * (1.0 / 12.0
            + b2 * (1.0 / 360.0 + b2 * (1.0 / 10080.0 + b2 * (1.0 / 302400.0 + b2 / 9580032.0))))
    } else {
        let h = t.half_sin();
        (beta - t.sin()) / (8.0 * h * h)
    }
}

pub(crate) fn dnu(t: Turn) -> f64 {
    let beta = t.beta;
    if beta.abs() < 0.25 {
        let b2 = beta * beta;
        1.0 / 12.0 + b2 * (1.0 / 120.0 + b2 * (1.0 / 2016.0 + b2 * (1.0 / 43200.0 + b2 / 1064448.0)))
    } else {
        let h = t.half_sin();
        let omc = 2.0 * h * h;
        let sb = t.sin();
        (omc * omc - (beta - sb) * sb) / (4.0 * omc * omc)
    }
}

/// Chord-to-arc ratio 2 sin(beta/2) / beta.
pub(crate) fn chord(t: Turn) -> f64 {
    if t.beta.abs() < 1e-4 {
        1.0 - t.beta * t.beta / 24.0
    } else {
        t.half_sin() / (0.5 * t.beta)
    }
}

/// Length-minimizing geodesic from the identity, described by its length and
/// its unit initial covector (p_x, p_y, p_w, p_z) for H = (1/2) sum h_X^2 + h_Y^2.
#[derive(Debug, Clone, PartialEq)]
pub struct Geodesic {
    pub length: f64,
    pub px: Vec<f64>,
    pub py: Vec<f64>,
    pub pw: f64,
    pub pz: f64,
    /// Total rotation |p_z| * length of the fastest-turning pair.
    pub theta: f64,
    /// True when the endpoint sits beyond the reach of the smooth family and
    /// some b = 1 pair closes a full loop.
    pub full_loop: bool,
}

/// Exact distance on a corank-one Carnot group by geodesic shooting.
///
/// Shooting reduces to a scalar monotone equation in the rotation parameter,
/// solved with a bracketed Newton iteration.
#[derive(Debug, Clone)]
pub struct DistanceOracle {
    group: CorankOneGroup,
    tol: f64,
    max_parameter: f64,
}

impl DistanceOracle {
    pub fn new(group: CorankOneGroup) -> Self {
        DistanceOracle {
            group,
            tol: 1e-12,
            max_parameter: TWO_PI,
        }
    }

    /// `tol` is the relative residual accepted in the shooting equation;
    /// `max_parameter` caps the rotation parameter and may not exceed 2 pi.
    pub fn with_params(group: CorankOneGroup, tol: f64, max_parameter: f64) -> Result<Self> {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::invalid(format!("shooting tolerance {tol} outside (0, 1)")));
        }
        if !(max_parameter > 0.0 && max_parameter <= TWO_PI) {
            return Err(Error::invalid(format!(
                "max geodesic parameter {max_parameter} outside (0, 2 pi]"
            )));
        }
        Ok(DistanceOracle {
            group,
            tol,
            max_parameter,
        })
    }

    pub fn group(&self) -> &CorankOneGroup {
        &self.group
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// d(e, q)
    pub fn distance(&self, q: &GroupElement) -> Result<f64> {
        Ok(self.shoot(q)?.length)
    }

    /// d(p, q) = d(e, p^{-1} q)
    pub fn distance_between(&self, p: &GroupElement, q: &GroupElement) -> Result<f64> {
        self.distance(&self.group.relative(p, q)?)
    }

    pub fn shoot(&self, q: &GroupElement) -> Result<Geodesic> {
        self.group.check(q)?;
        if !q.is_finite() {
            return Err(Error::invalid("non-finite coordinates"));
        }
        let b = self.group.b();
        let l = b.len();
        let rho2: Vec<f64> = (0..l).map(|i| q.x[i] * q.x[i] + q.y[i] * q.y[i]).collect();
        let rt2 = q.w * q.w;
        let zabs = q.z.abs();
        let sgn = if q.z < 0.0 { -1.0 } else { 1.0 };

        // rotation of pair i, from either theta or its gap to 2 pi
        let turn = |i: usize, theta: f64, gap: Option<f64>| -> Turn {
            match gap {
                Some(eps) => Turn {
                    beta: b[i] * theta,
                    gap: TWO_PI * (1.0 - b[i]) + b[i] * eps,
                },
                None => Turn::new(b[i] * theta),
            }
        };
        let g_of = |theta: f64, gap: Option<f64>| -> f64 {
            (0..l).filter(|&i| rho2[i] > 0.0).map(|i| rho2[i] * b[i] * nu(turn(i, theta, gap))).sum()
        };
        let dg_of = |theta: f64, gap: Option<f64>| -> f64 {
            (0..l)
                .filter(|&i| rho2[i] > 0.0)
                .map(|i| rho2[i] * b[i] * b[i] * dnu(turn(i, theta, gap)))
                .sum()
        };

        // full loops are possible only when every b = 1 pair sits at the origin
        let open_top = (0..l).any(|i| b[i] == 1.0 && rho2[i] > 0.0);
        let horiz2: f64 = rho2.iter().sum::<f64>() + rt2;
        let scale = horiz2.max(zabs);

        if zabs == 0.0 || scale == 0.0 {
            let turns = vec![Turn::new(0.0); l];
            return Ok(self.assemble(q, &rho2, &turns, 0.0, sgn, horiz2.sqrt(), None));
        }

        let g_top = if open_top { f64::INFINITY } else { g_of(TWO_PI, Some(0.0)) };
        if !open_top && zabs >= g_top {
            if self.max_parameter < TWO_PI {
                return Err(Error::numeric(format!(
                    "endpoint needs rotation 2 pi beyond max parameter {}",
                    self.max_parameter
                )));
            }
            let mut s2 = rt2 + 4.0 * PI * (zabs - g_top);
            for i in 0..l {
                if rho2[i] > 0.0 {
                    let c = chord(turn(i, TWO_PI, Some(0.0)));
                    s2 += rho2[i] / (c * c);
                }
            }
            let loop_len2 = 4.0 * PI * (zabs - g_top);
            let turns: Vec<Turn> = (0..l).map(|i| turn(i, TWO_PI, Some(0.0))).collect();
            return Ok(self.assemble(q, &rho2, &turns, TWO_PI, sgn, s2.sqrt(), Some(loop_len2)));
        }

        // Solve G = |z| in theta on [0, pi], or in the gap 2 pi - theta beyond.
        let upper_half = zabs > g_of(PI, None);
        let eval = |u: f64| -> (f64, f64) {
            if upper_half {
                (g_of(TWO_PI - u, Some(u)) - zabs, -dg_of(TWO_PI - u, Some(u)))
            } else {
                (g_of(u, None) - zabs, dg_of(u, None))
            }
        };
        let u = bracketed_newton(eval, 0.0, PI, upper_half, zabs).ok_or_else(|| {
            Error::numeric(format!("shooting did not converge for |z| = {zabs}, |h|^2 = {horiz2}"))
        })?;
        let (theta, gap) = if upper_half { (TWO_PI - u, Some(u)) } else { (u, None) };
        let resid = (g_of(theta, gap) - zabs).abs();
        if resid > self.tol * zabs {
            return Err(Error::numeric(format!(
                "shooting residual {resid:e} above tolerance at theta = {theta}"
            )));
        }
        if theta > self.max_parameter {
            return Err(Error::numeric(format!(
                "rotation parameter {theta} exceeds max parameter {}",
                self.max_parameter
            )));
        }
        let turns: Vec<Turn> = (0..l).map(|i| turn(i, theta, gap)).collect();
        let mut s2 = rt2;
        for i in 0..l {
            if rho2[i] > 0.0 {
                let c = chord(turns[i]);
                s2 += rho2[i] / (c * c);
            }
        }
        Ok(self.assemble(q, &rho2, &turns, theta, sgn, s2.sqrt(), None))
    }

    fn assemble(
        &self,
        q: &GroupElement,
        rho2: &[f64],
        turns: &[Turn],
        theta: f64,
        sgn: f64,
        length: f64,
        loop_len2: Option<f64>,
    ) -> Geodesic {
        let b = self.group.b();
        let l = b.len();
        let mut px = vec![0.0; l];
        let mut py = vec![0.0; l];
        let mut pw = 0.0;
        if length > 0.0 {
            for i in 0..l {
                if rho2[i] > 0.0 {
                    let v = rho2[i].sqrt() / (length * chord(turns[i]));
                    let phi = q.y[i].atan2(q.x[i]) + 0.5 * sgn * turns[i].beta;
                    px[i] = v * phi.cos();
                    py[i] = v * phi.sin();
                }
            }
            pw = q.w / length;
            if let Some(ll2) = loop_len2 {
                if let Some(i) = (0..l).find(|&i| b[i] == 1.0) {
                    px[i] = ll2.sqrt() / length;
                }
            }
        }
        let pz = if length > 0.0 { sgn * theta / length } else { 0.0 };
        Geodesic {
            length,
            px,
            py,
            pw,
            pz,
            theta,
            full_loop: loop_len2.is_some(),
        }
    }
}

/// Root of an increasing (or, with `decreasing`, decreasing) function on
/// [lo, hi], Newton steps kept inside a shrinking bracket.
fn bracketed_newton<F: Fn(f64) -> (f64, f64)>(f: F, mut lo: f64, mut hi: f64, decreasing: bool, scale: f64) -> Option<f64> {
    let sign = if decreasing { -1.0 } else { 1.0 };
    let mut u = 0.5 * (lo + hi);
    // start from the small-angle estimate when it applies
    if !decreasing {
        let (f0, d0) = f(0.0);
        if d0 > 0.0 {
            u = (-f0 / d0).clamp(lo, hi);
            if u <= lo || u >= hi {
                u = 0.5 * (lo + hi);
            }
        }
    }
    for _ in 0..MAX_ITER {
        let (v, d) = f(u);
        if v == 0.0 || v.abs() <= 1e-15 * scale {
            return Some(u);
        }
        if sign * v > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let mut next = u - v / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 2.0 * f64::EPSILON * u.abs() || hi - lo <= 2.0 * f64::EPSILON * hi.abs() {
            return Some(next);
        }
        u = next;
    }
    None
}

/// Free-function form of [`DistanceOracle::distance`].
pub fn cc_distance(oracle: &DistanceOracle, q: &GroupElement) -> Result<f64> {
    oracle.distance(q)
}
