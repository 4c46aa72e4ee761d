use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::carnot::GroupElement;
use crate::error::{Error, Result};
use crate::metric::DistanceOracle;
use crate::popp;
use crate::rng::{hash_words, stream_rng};

/// Smallest sample count accepted by the Monte-Carlo estimators.
pub const MIN_SAMPLES: usize = 1000;

const CHUNK: usize = 1 << 14;

/// Sup over the unit ball of |z|, attained off the vertical axis:
/// max over beta in (0, 2 pi] of (beta - sin beta) / (2 beta^2).
pub fn z_box_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let f = |b: f64| (b - b.sin()) / (2.0 * b * b);
        let (mut a, mut c) = (1.0f64, 6.0f64);
        let gr = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let x1 = c - gr * (c - a);
            let x2 = a + gr * (c - a);
            if f(x1) < f(x2) {
                a = x1;
            } else {
                c = x2;
            }
        }
        f(0.5 * (a + c))
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BallEstimate {
    pub center: GroupElement,
    pub radius: f64,
    pub volume_estimate: f64,
    pub standard_error: f64,
    pub sample_count: usize,
    pub hits: u64,
    pub box_volume: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub t: f64,
    pub alpha: f64,
    /// (radius, ratio) for every sampled ball.
    pub samples: Vec<(f64, f64)>,
}

/// Popp density relative to Lebesgue measure in exponential coordinates.
pub(crate) fn popp_density(oracle: &DistanceOracle) -> f64 {
    let nb: f64 = oracle.group().b().iter().map(|b| b * b).sum::<f64>().sqrt();
    1.0 / nb
}

// Half-widths of the sampling box: (horizontal, w, z).
fn half_widths(r: f64) -> (f64, f64, f64) {
    // slack keeps boundary points strictly inside
    let cz = z_box_constant() * (1.0 + 1e-6);
    (r, r, cz * r * r)
}

fn box_volume(oracle: &DistanceOracle, r: f64) -> f64 {
    let (h, hw, hz) = half_widths(r);
    let l = oracle.group().ell() as i32;
    let mut v = (2.0 * h).powi(2 * l) * 2.0 * hz;
    if oracle.group().has_transversal_t() {
        v *= 2.0 * hw;
    }
    v
}

pub(crate) fn sample_box<R: Rng>(oracle: &DistanceOracle, r: f64, rng: &mut R) -> GroupElement {
    let (h, hw, hz) = half_widths(r);
    let l = oracle.group().ell();
    let x = (0..l).map(|_| rng.gen_range(-h..h)).collect();
    let y = (0..l).map(|_| rng.gen_range(-h..h)).collect();
    let w = if oracle.group().has_transversal_t() {
        rng.gen_range(-hw..hw)
    } else {
        0.0
    };
    let z = rng.gen_range(-hz..hz);
    GroupElement { x, y, z, w }
}

/// Popp volume of B(e, r).
pub fn ball_volume_mc(oracle: &DistanceOracle, r: f64, n: usize, seed: u64) -> Result<BallEstimate> {
    ball_volume_mc_at(oracle, &oracle.group().identity(), r, n, seed)
}

/// Popp volume of B(center, r) by rejection sampling in the left translate of
/// a dilation-shaped box. Chunks draw from independent streams of one seed, so
/// the hit count does not depend on the thread count.
pub fn ball_volume_mc_at(
    oracle: &DistanceOracle,
    center: &GroupElement,
    r: f64,
    n: usize,
    seed: u64,
) -> Result<BallEstimate> {
    if n < MIN_SAMPLES {
        return Err(Error::invalid(format!("need at least {MIN_SAMPLES} samples, got {n}")));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("radius must be positive, got {r}")));
    }
    let g = oracle.group();
    g.check(center)?;
    let chunks = n.div_ceil(CHUNK);
    let hits: Result<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let m = CHUNK.min(n - c * CHUNK);
            let mut h = 0u64;
            for _ in 0..m {
                let u = sample_box(oracle, r, &mut rng);
                let p = g.multiply(center, &u)?;
                if oracle.distance_between(center, &p)? < r {
                    h += 1;
                }
            }
            Ok(h)
        })
        .collect();
    let hits: u64 = hits?.into_iter().sum();
    let bv = box_volume(oracle, r);
    let dens = popp_density(oracle);
    let p = hits as f64 / n as f64;
    Ok(BallEstimate {
        center: center.clone(),
        radius: r,
        volume_estimate: dens * bv * p,
        standard_error: dens * bv * (p * (1.0 - p) / n as f64).sqrt(),
        sample_count: n,
        hits,
        box_volume: bv,
    })
}

fn center_seed(seed: u64, center: &GroupElement, r: f64) -> u64 {
    let words = center
        .to_coords(true)
        .into_iter()
        .chain(std::iter::once(r))
        .map(f64::to_bits);
    hash_words(seed, words)
}

/// Vol(B(x, 2r)) / Vol(B(x, r)).
pub fn doubling_ratio(oracle: &DistanceOracle, x: &GroupElement, r: f64, n: usize, seed: u64) -> Result<f64> {
    let small = ball_volume_mc_at(oracle, x, r, n, center_seed(seed, x, r))?;
    let big = ball_volume_mc_at(oracle, x, 2.0 * r, n, center_seed(seed, x, 2.0 * r))?;
    if small.hits == 0 {
        return Err(Error::numeric("no Monte-Carlo hits in the smaller ball"));
    }
    Ok(big.volume_estimate / small.volume_estimate)
}

/// Sup of Vol(B(x, r)) / (omega r^Q) over centers and radii r <= 1/t.
///
/// Each (center, radius) pair gets its own derived seed, so the estimate for a
/// ball does not depend on which other balls are in the sweep and the sup is
/// exactly monotone in `t`.
pub fn growth_modulus(
    oracle: &DistanceOracle,
    t: f64,
    radii: &[f64],
    centers: &[GroupElement],
    n: usize,
    seed: u64,
) -> Result<GrowthReport> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("t must be nonnegative, got {t}")));
    }
    if radii.is_empty() || centers.is_empty() {
        return Err(Error::invalid("empty radius or center sample"));
    }
    let omega = popp::unit_ball_volume(oracle.group())?;
    let q = oracle.group().hausdorff_dimension() as i32;
    let mut samples = Vec::new();
    for &r in radii.iter().filter(|&&r| t == 0.0 || r <= 1.0 / t) {
        for c in centers {
            let est = ball_volume_mc_at(oracle, c, r, n, center_seed(seed, c, r))?;
            samples.push((r, est.volume_estimate / (omega * r.powi(q))));
        }
    }
    let alpha = samples.iter().map(|s| s.1).fold(0.0, f64::max);
    Ok(GrowthReport { t, alpha, samples })
}
