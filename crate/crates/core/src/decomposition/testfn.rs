//! Lipschitz test functions on box grids, Rayleigh-quotient certificates for
//! counting-function lower bounds, and conformal checks.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::carnot::{CorankOneGroup, GroupElement};
use crate::decomposition::annulus::Annulus;
use crate::error::{Error, Result};
use crate::metric::{z_box_constant, DistanceOracle};
use crate::popp::ConformalFactor;
use crate::rng::stream_rng;
use crate::spectra::{
    assemble_conformal, counting_function, eigen_smallest_with, horizontal_gradient_samples, interpolate_at_quadrature,
    BoxGrid, DiscreteOperator, EigenOptions, SpectrumResult,
};

/// Nodal values in [0, 1] with a Lipschitz bound for the CC distance.
#[derive(Debug, Clone, Serialize)]
pub struct TestFunction {
    pub values: Vec<f64>,
    /// Nodes where the value is positive.
    pub support: Vec<usize>,
    pub lipschitz_bound: f64,
}

impl TestFunction {
    fn from_values(values: Vec<f64>, lipschitz_bound: f64) -> Self {
        let support = values.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(i, _)| i).collect();
        TestFunction {
            values,
            support,
            lipschitz_bound,
        }
    }
}

fn grid_oracle(grid: &BoxGrid) -> Result<DistanceOracle> {
    Ok(DistanceOracle::new(CorankOneGroup::new(grid.b.clone(), false)?))
}

/// Profile of an annulus test function at distance d from its center.
pub fn annulus_profile(r: f64, big_r: f64, d: f64) -> f64 {
    if d < 0.5 * r {
        0.0
    } else if d < r {
        2.0 * d / r - 1.0
    } else if d < big_r {
        1.0
    } else if d < 2.0 * big_r {
        2.0 - d / big_r
    } else {
        0.0
    }
}

/// 1 on the annulus, linear tapers on [r/2, r) and [R, 2R), 0 elsewhere; the
/// center is a node index. With r = 0 the inner taper is absent.
pub fn build_annulus_test_function(grid: &BoxGrid, annulus: &Annulus) -> Result<TestFunction> {
    grid.validate()?;
    if annulus.center >= grid.node_count() {
        return Err(Error::invalid(format!("center node {} outside the grid", annulus.center)));
    }
    if !(annulus.r >= 0.0 && annulus.big_r > annulus.r) {
        return Err(Error::invalid("annulus radii out of order"));
    }
    let oracle = grid_oracle(grid)?;
    let a = grid.node_element(annulus.center);
    let values = (0..grid.node_count())
        .into_par_iter()
        .map(|i| Ok(annulus_profile(annulus.r, annulus.big_r, oracle.distance_between(&a, &grid.node_element(i))?)))
        .collect::<Result<Vec<f64>>>()?;
    let lip = if annulus.r > 0.0 {
        (2.0 / annulus.r).max(1.0 / annulus.big_r)
    } else {
        1.0 / annulus.big_r
    };
    Ok(TestFunction::from_values(values, lip))
}

/// Lower bound on d(p, q) from the horizontal displacement and the vertical
/// box of the unit ball.
fn distance_lower_bound(g: &CorankOneGroup, p: &GroupElement, q: &GroupElement, cz: f64) -> f64 {
    let h: f64 = p
        .x
        .iter()
        .zip(&q.x)
        .chain(p.y.iter().zip(&q.y))
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let rel = g.relative(p, q).map(|e| e.z.abs()).unwrap_or(0.0);
    h.max((rel / cz).sqrt())
}

/// 1 on the node set `domain`, 1 - dist(x, D)/rho on the collar, 0 beyond.
pub fn build_domain_test_function(grid: &BoxGrid, domain: &[usize], rho: f64) -> Result<TestFunction> {
    grid.validate()?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid(format!("rho must be positive, got {rho}")));
    }
    let n = grid.node_count();
    if let Some(&p) = domain.iter().find(|&&p| p >= n) {
        return Err(Error::invalid(format!("domain node {p} outside the grid")));
    }
    let oracle = grid_oracle(grid)?;
    let group = oracle.group().clone();
    let cz = z_box_constant() * (1.0 + 1e-6);
    let mut inside = vec![false; n];
    for &p in domain {
        inside[p] = true;
    }
    let elems: Vec<GroupElement> = domain.iter().map(|&p| grid.node_element(p)).collect();
    let values = (0..n)
        .into_par_iter()
        .map(|i| {
            if inside[i] {
                return Ok(1.0);
            }
            let x = grid.node_element(i);
            let mut best = rho;
            for p in &elems {
                if distance_lower_bound(&group, p, &x, cz) >= best {
                    continue;
                }
                best = best.min(oracle.distance_between(p, &x)?);
            }
            Ok((1.0 - best / rho).max(0.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(TestFunction::from_values(values, 1.0 / rho))
}

/// max over grid edges of |u(x) - u(y)| / (L d(x, y)); at most 1 up to
/// rounding for a function built from a distance profile.
pub fn lipschitz_ratio(grid: &BoxGrid, u: &TestFunction) -> Result<f64> {
    if u.values.len() != grid.node_count() {
        return Err(Error::invalid("function does not match the grid"));
    }
    let oracle = grid_oracle(grid)?;
    let strides = grid.strides();
    let worst = (0..grid.node_count())
        .into_par_iter()
        .map(|i| {
            let m = grid.node_multi(i);
            let xi = grid.node_element(i);
            let mut w: f64 = 0.0;
            for k in 0..grid.dim() {
                if m[k] + 1 >= grid.nodes[k] {
                    continue;
                }
                let j = i + strides[k];
                let du = (u.values[i] - u.values[j]).abs();
                if du == 0.0 {
                    continue;
                }
                let d = oracle.distance_between(&xi, &grid.node_element(j))?;
                w = w.max(du / (u.lipschitz_bound * d));
            }
            Ok(w)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Serialize)]
pub struct CountingCertificate {
    pub lambda: f64,
    pub k: usize,
    /// <A u_i, u_i> / <M u_i, u_i> for each function.
    pub quotients: Vec<f64>,
    /// Largest eigenvalue of the pencil restricted to span(u_1..u_k); by
    /// min-max, N(lambda) >= k whenever it is below lambda.
    pub pencil_max: f64,
    pub certified: bool,
}

impl CountingCertificate {
    /// Whether a computed spectrum agrees: N(lambda) >= k when certified.
    pub fn confirmed_by(&self, spectrum: &SpectrumResult) -> bool {
        !self.certified || counting_function(spectrum, self.lambda) >= self.k as u64
    }
}

/// Certifies N(lambda) >= k from test functions with pairwise disjoint nodal
/// supports. Nodal disjointness makes the lumped mass block diagonal but
/// neighbouring supports still couple through the stiffness, so the decision
/// uses the projected k x k pencil rather than the individual quotients.
pub fn certify_counting_bound(op: &DiscreteOperator, funcs: &[TestFunction], lambda: f64) -> Result<CountingCertificate> {
    let n = op.n();
    let k = funcs.len();
    if k == 0 {
        return Err(Error::invalid("need at least one test function"));
    }
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    let mut owner = vec![usize::MAX; n];
    for (i, f) in funcs.iter().enumerate() {
        if f.values.len() != n {
            return Err(Error::invalid(format!("test function {i} has {} values for {n} nodes", f.values.len())));
        }
        if f.support.is_empty() {
            return Err(Error::invalid(format!("test function {i} vanishes identically")));
        }
        for (p, &v) in f.values.iter().enumerate() {
            if v != 0.0 {
                if owner[p] != usize::MAX {
                    return Err(Error::invalid(format!("test functions {} and {i} overlap at node {p}", owner[p])));
                }
                owner[p] = i;
            }
        }
    }
    let au: Vec<Vec<f64>> = funcs.par_iter().map(|f| op.stiffness.mul(&f.values)).collect();
    let mut a = DMatrix::<f64>::zeros(k, k);
    let mut m = vec![0.0; k];
    for i in 0..k {
        m[i] = funcs[i].values.iter().zip(&op.mass).map(|(u, w)| w * u * u).sum();
        for j in 0..k {
            a[(i, j)] = au[i].iter().zip(&funcs[j].values).map(|(x, y)| x * y).sum();
        }
    }
    let quotients: Vec<f64> = (0..k).map(|i| a[(i, i)] / m[i]).collect();
    let b = DMatrix::from_fn(k, k, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]) / (m[i] * m[j]).sqrt());
    let pencil_max = SymmetricEigen::new(b).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(CountingCertificate {
        lambda,
        k,
        quotients,
        pencil_max,
        certified: pencil_max < lambda,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConformalEnergyReport {
    pub q: usize,
    /// sum |grad_b u|^Q over the quadrature of g.
    pub energy: f64,
    /// Same energy measured in phi g.
    pub energy_conformal: f64,
    pub relative_difference: f64,
}

/// Q-energy of u under g and under phi g. The gradient norm scales by
/// phi^(-1/2) at the quadrature points while the volume scales by phi^(Q/2)
/// at the cell centers, so the two agree up to the variation of phi within
/// a cell.
pub fn verify_conformal_invariance(grid: &BoxGrid, u: &TestFunction, phi: &ConformalFactor) -> Result<ConformalEnergyReport> {
    let q = 2 * grid.ell + 2;
    if grid.riemannian {
        return Err(Error::invalid("the Q-energy check needs the sub-Riemannian operator"));
    }
    if phi.q() != q {
        return Err(Error::invalid(format!("conformal factor carries Q = {}, grid has Q = {q}", phi.q())));
    }
    let grads = horizontal_gradient_samples(grid, &u.values)?;
    let at_gauss = interpolate_at_quadrature(grid, phi.values())?;
    let nv = 1usize << grid.dim();
    let pv = phi.values();
    let centers: Vec<f64> = (0..grid.cell_count())
        .map(|c| {
            let nodes = grid.cell_nodes(c);
            let p0 = pv[nodes[0]];
            p0 + nodes[1..].iter().map(|&a| pv[a] - p0).sum::<f64>() / nv as f64
        })
        .collect();
    let half = (q / 2) as i32;
    let mut e0 = 0.0;
    let mut e1 = 0.0;
    for (s, ((g, w), pg)) in grads.iter().zip(&at_gauss).enumerate() {
        let base = g.powi(q as i32) * w;
        e0 += base;
        e1 += base * (centers[s / nv] / pg).powi(half);
    }
    let rel = if e0 > 0.0 { (e1 - e0).abs() / e0 } else { (e1 - e0).abs() };
    Ok(ConformalEnergyReport {
        q,
        energy: e0,
        energy_conformal: e1,
        relative_difference: rel,
    })
}

/// A smooth factor with values in [lo, hi]: exp of a normalised random
/// trigonometric sum over the box.
pub fn smooth_random_factor(grid: &BoxGrid, lo: f64, hi: f64, seed: u64) -> Result<ConformalFactor> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::invalid(format!("need 0 < lo <= hi, got [{lo}, {hi}]")));
    }
    let d = grid.dim();
    let mut rng = stream_rng(seed, 0xc0f);
    let modes: Vec<(Vec<f64>, f64, f64)> = (0..4)
        .map(|_| {
            let kvec: Vec<f64> = (0..d).map(|_| rng.gen_range(0..3) as f64).collect();
            (kvec, rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.2..1.0))
        })
        .collect();
    let total: f64 = modes.iter().map(|m| m.2).sum();
    let mid = (lo * hi).sqrt();
    let span = 0.5 * (hi / lo).ln();
    let values = (0..grid.node_count())
        .map(|i| {
            let c = grid.node_coords(i);
            let s: f64 = modes
                .iter()
                .map(|(kv, ph, amp)| {
                    let arg: f64 = (0..d).map(|j| kv[j] * (c[j] - grid.origin[j]) / grid.lengths[j]).sum::<f64>();
                    amp * (std::f64::consts::TAU * arg + ph).cos()
                })
                .sum::<f64>()
                / total;
            (mid * (span * s).exp()).clamp(lo, hi)
        })
        .collect();
    ConformalFactor::new(values, 2 * grid.ell + 2)
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub factor: usize,
    pub volume: f64,
    pub eigenvalues: Vec<f64>,
    /// lambda_k Vol^(2/Q) / k^(2/Q) for k = 1..k_max.
    pub normalized: Vec<f64>,
    pub sup: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub q: usize,
    pub k_max: usize,
    pub rows: Vec<BoundRow>,
    /// Row index of phi = 1.
    pub baseline: usize,
    /// max over rows of sup / baseline sup.
    pub max_ratio: f64,
}

/// Normalised Neumann eigenvalues on the box for each conformal factor.
pub fn eigenvalue_bound_report(
    grid: &BoxGrid,
    factors: &[ConformalFactor],
    k_max: usize,
    opts: &EigenOptions,
) -> Result<BoundReport> {
    if factors.len() < 2 {
        return Err(Error::invalid("need at least two conformal factors"));
    }
    if k_max == 0 {
        return Err(Error::invalid("k_max must be positive"));
    }
    let baseline = factors
        .iter()
        .position(|f| f.values().iter().all(|&v| v == 1.0))
        .ok_or_else(|| Error::invalid("the family must contain phi = 1"))?;
    let q = 2 * grid.ell + 2;
    let expo = 2.0 / q as f64;
    let mut rows = Vec::with_capacity(factors.len());
    for (i, f) in factors.iter().enumerate() {
        let op = assemble_conformal(grid, Some(f))?;
        let spec = eigen_smallest_with(&op, k_max, opts)?;
        let vol = op.volume();
        let normalized: Vec<f64> = spec
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(j, &l)| l * vol.powf(expo) / ((j + 1) as f64).powf(expo))
            .collect();
        let sup = normalized.iter().copied().fold(0.0, f64::max);
        rows.push(BoundRow {
            factor: i,
            volume: vol,
            eigenvalues: spec.eigenvalues,
            normalized,
            sup,
        });
    }
    let base = rows[baseline].sup;
    let max_ratio = rows.iter().map(|r| r.sup / base).fold(0.0, f64::max);
    Ok(BoundReport {
        q,
        k_max,
        rows,
        baseline,
        max_ratio,
    })
}
