use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::carnot::GroupElement;
use crate::error::{Error, Result};
use crate::metric::volume::sample_box;
use crate::metric::DistanceOracle;
use crate::rng::stream_rng;

const MAX_REJECTIONS: usize = 1_000_000;

/// A metric space that can draw points from its balls.
pub trait BallSampler {
    type Point: Clone;

    fn dist(&self, a: &Self::Point, b: &Self::Point) -> Result<f64>;

    /// A random point of B(center, r).
    fn sample_ball(&self, center: &Self::Point, r: f64, rng: &mut ChaCha8Rng) -> Result<Self::Point>;
}

impl BallSampler for DistanceOracle {
    type Point = GroupElement;

    fn dist(&self, a: &GroupElement, b: &GroupElement) -> Result<f64> {
        self.distance_between(a, b)
    }

    fn sample_ball(&self, center: &GroupElement, r: f64, rng: &mut ChaCha8Rng) -> Result<GroupElement> {
        for _ in 0..MAX_REJECTIONS {
            let u = sample_box(self, r, rng);
            if self.distance(&u)? < r {
                return self.group().multiply(center, &u);
            }
        }
        Err(Error::numeric("rejection sampler found no ball point"))
    }
}

/// The real line, the one-layer degenerate case.
#[derive(Debug, Clone, Copy, Default)]
pub struct EuclideanLine;

impl BallSampler for EuclideanLine {
    type Point = f64;

    fn dist(&self, a: &f64, b: &f64) -> Result<f64> {
        Ok((a - b).abs())
    }

    fn sample_ball(&self, center: &f64, r: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
        Ok(center + rng.gen_range(-r..r))
    }
}

#[derive(Debug, Clone)]
pub struct CoveringNet<P> {
    /// Centers of the returned cover.
    pub points: Vec<P>,
    /// Size of the maximal r/4-separated net.
    pub separated_count: usize,
    pub radius: f64,
}

impl<P> CoveringNet<P> {
    pub fn count(&self) -> usize {
        self.points.len()
    }
}

/// Upper-bound witness for the number of r/2-balls needed to cover B(center, r).
///
/// Draws `n_samples` ball points and builds a greedy maximal r/4-separated
/// net on them. A second greedy pass then covers the samples with balls of
/// radius 0.48 r, always serving the uncovered sample farthest from `center`
/// first with the candidate that covers the most. That cover replaces the net
/// when it is smaller and its r/2-balls also cover `n_samples` fresh points.
pub fn covering_number<S: BallSampler>(
    space: &S,
    center: &S::Point,
    r: f64,
    n_samples: usize,
    seed: u64,
    cap: usize,
) -> Result<CoveringNet<S::Point>> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("radius must be positive, got {r}")));
    }
    if n_samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let mut rng = stream_rng(seed, 0);
    let samples: Vec<S::Point> = (0..n_samples)
        .map(|_| space.sample_ball(center, r, &mut rng))
        .collect::<Result<_>>()?;
    let n = samples.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let v = space.dist(&samples[i], &samples[j])?;
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }

    let mut net: Vec<usize> = Vec::new();
    for i in 0..n {
        if net.iter().all(|&j| d[i * n + j] >= 0.25 * r) {
            net.push(i);
            if net.len() > cap {
                return Err(Error::numeric(format!("net exceeded cap of {cap} points")));
            }
        }
    }

    let reach = 0.48 * r;
    let from_center: Vec<f64> = samples.iter().map(|p| space.dist(center, p)).collect::<Result<_>>()?;
    let mut covered = vec![false; n];
    let mut left = n;
    let mut cover: Vec<usize> = Vec::new();
    while left > 0 && cover.len() < net.len() {
        let far = (0..n)
            .filter(|&i| !covered[i])
            .max_by(|&a, &b| from_center[a].total_cmp(&from_center[b]).then(b.cmp(&a)))
            .expect("some sample is uncovered");
        let mut best = (0usize, far);
        for c in (0..n).filter(|&c| d[far * n + c] < reach) {
            let gain = (0..n).filter(|&i| !covered[i] && d[c * n + i] < reach).count();
            if gain > best.0 {
                best = (gain, c);
            }
        }
        let c = best.1;
        for i in 0..n {
            if !covered[i] && d[c * n + i] < reach {
                covered[i] = true;
                left -= 1;
            }
        }
        cover.push(c);
    }
    // the tighter cover has little slack, so it must also hold on fresh points
    let mut chosen = net.clone();
    if left == 0 && cover.len() < net.len() {
        let mut hold = stream_rng(seed, 1);
        let centers: Vec<S::Point> = cover.iter().map(|&i| samples[i].clone()).collect();
        let holdout: Vec<S::Point> = (0..n_samples)
            .map(|_| space.sample_ball(center, r, &mut hold))
            .collect::<Result<_>>()?;
        if verify_cover(space, &centers, &holdout, 0.5 * r)? {
            chosen = cover;
        }
    }
    Ok(CoveringNet {
        points: chosen.iter().map(|&i| samples[i].clone()).collect(),
        separated_count: net.len(),
        radius: r,
    })
}

/// True when every point lies within `radius` of some net point.
pub fn verify_cover<S: BallSampler>(space: &S, net: &[S::Point], points: &[S::Point], radius: f64) -> Result<bool> {
    for p in points {
        let mut hit = false;
        for c in net {
            if space.dist(p, c)? < radius {
                hit = true;
                break;
            }
        }
        if !hit {
            return Ok(false);
        }
    }
    Ok(true)
}
