//! Counting functions and power-law fits.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectra::eigen::SpectrumResult;
use crate::spectra::sphere::SphereSpectrumEntry;

/// A spectrum as sorted-or-not (value, multiplicity) levels.
pub trait Counting {
    fn levels(&self) -> Vec<(f64, u64)>;
}

impl Counting for SpectrumResult {
    fn levels(&self) -> Vec<(f64, u64)> {
        self.eigenvalues.iter().map(|&v| (v, 1)).collect()
    }
}

impl Counting for [SphereSpectrumEntry] {
    fn levels(&self) -> Vec<(f64, u64)> {
        self.iter().map(|e| (e.value(), e.multiplicity)).collect()
    }
}

impl Counting for Vec<SphereSpectrumEntry> {
    fn levels(&self) -> Vec<(f64, u64)> {
        self.as_slice().levels()
    }
}

impl Counting for [f64] {
    fn levels(&self) -> Vec<(f64, u64)> {
        self.iter().map(|&v| (v, 1)).collect()
    }
}

impl Counting for Vec<f64> {
    fn levels(&self) -> Vec<(f64, u64)> {
        self.as_slice().levels()
    }
}

/// N(lambda): eigenvalues strictly below lambda, with multiplicity.
pub fn counting_function<S: Counting + ?Sized>(spectrum: &S, lambda: f64) -> u64 {
    spectrum.levels().iter().filter(|(v, _)| *v < lambda).map(|(_, m)| m).sum()
}

/// lambda_k = inf { lambda : N(lambda) >= k }, for k >= 1.
pub fn eigenvalue_from_counting<S: Counting + ?Sized>(spectrum: &S, k: u64) -> Option<f64> {
    if k == 0 {
        return None;
    }
    let mut lv = spectrum.levels();
    lv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = 0;
    for (v, m) in lv {
        acc += m;
        if acc >= k {
            return Some(v);
        }
    }
    None
}

/// (lambda, N(lambda)) on a grid.
pub fn counting_samples<S: Counting + ?Sized>(spectrum: &S, grid: &[f64]) -> Vec<(f64, f64)> {
    let mut lv = spectrum.levels();
    lv.sort_by(|a, b| a.0.total_cmp(&b.0));
    grid.iter()
        .map(|&l| {
            let n: u64 = lv.iter().take_while(|(v, _)| *v < l).map(|(_, m)| m).sum();
            (l, n as f64)
        })
        .collect()
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(Error::invalid("need 0 < lo < hi and n >= 2"));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeylFit {
    pub slope: f64,
    /// log N = intercept + slope log lambda; exp(intercept) is the prefactor.
    pub intercept: f64,
    pub r2: f64,
    pub points_used: usize,
}

/// Least-squares fit of log N against log lambda over the upper half of the
/// sampled log-lambda range.
pub fn weyl_fit(samples: &[(f64, f64)]) -> Result<WeylFit> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(l, n)| *l > 0.0 && *n >= 1.0)
        .map(|(l, n)| (l.ln(), n.ln()))
        .collect();
    if pts.is_empty() {
        return Err(Error::invalid("all counting samples are zero"));
    }
    if pts.len() < 10 {
        return Err(Error::invalid(format!("need at least 10 samples with N >= 1, got {}", pts.len())));
    }
    let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (lo + hi);
    let used: Vec<(f64, f64)> = pts.into_iter().filter(|p| p.0 >= mid).collect();
    if used.len() < 2 {
        return Err(Error::invalid("upper half of the range holds fewer than two samples"));
    }
    let k = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / k;
    let my = used.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = used.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("samples share a single lambda"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(WeylFit {
        slope,
        intercept,
        r2,
        points_used: used.len(),
    })
}
