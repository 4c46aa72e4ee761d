//! Exact sub-Laplacian spectrum of the CR sphere S^(2 ell + 1).

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectra::exact_rank::rank_exact;

/// Largest monomial basis handled by the exact rank computations.
pub const MAX_BASIS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SphereSpectrumEntry {
    pub p: u32,
    pub q: u32,
    /// 2 ell (p + q) + 4 p q
    pub eigenvalue: u64,
    pub multiplicity: u64,
}

impl SphereSpectrumEntry {
    pub fn value(&self) -> f64 {
        self.eigenvalue as f64
    }
}

/// Exponent vectors of total degree `total` in `parts` variables.
pub(crate) fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; parts];
    fn rec(i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.clone());
            return;
        }
        for v in (0..=left).rev() {
            cur[i] = v;
            rec(i + 1, left - v, cur, out);
        }
    }
    if parts == 0 {
        if total == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(0, total, &mut cur, &mut out);
    out
}

pub(crate) fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as u64
}

fn check_basis(size: u64) -> Result<()> {
    if size as usize > MAX_BASIS {
        return Err(Error::invalid(format!(
            "monomial basis of size {size} exceeds cap {MAX_BASIS}"
        )));
    }
    Ok(())
}

/// Dimension of harmonic polynomials of bidegree (p, q) on C^(ell + 1):
/// the bidegree monomial count minus the exact rank of sum_j d/dz_j d/dzbar_j.
pub fn bidegree_dimension(ell: usize, p: u32, q: u32) -> Result<u64> {
    if ell == 0 {
        return Err(Error::invalid("ell must be positive"));
    }
    let n = ell + 1;
    let count = binomial(p as u64 + ell as u64, ell as u64) * binomial(q as u64 + ell as u64, ell as u64);
    check_basis(count)?;
    if p == 0 || q == 0 {
        return Ok(count);
    }
    let alphas = compositions(p, n);
    let betas = compositions(q, n);
    let t_alphas = compositions(p - 1, n);
    let t_betas = compositions(q - 1, n);

    // the operator preserves alpha - beta, so it splits into blocks
    type Key = Vec<i64>;
    let key = |a: &[u32], b: &[u32]| -> Key { a.iter().zip(b).map(|(&x, &y)| x as i64 - y as i64).collect() };
    let mut src: HashMap<Key, Vec<(usize, usize)>> = HashMap::new();
    for (i, a) in alphas.iter().enumerate() {
        for (j, b) in betas.iter().enumerate() {
            src.entry(key(a, b)).or_default().push((i, j));
        }
    }
    let mut tgt: HashMap<Key, HashMap<(Vec<u32>, Vec<u32>), usize>> = HashMap::new();
    for a in &t_alphas {
        for b in &t_betas {
            let blk = tgt.entry(key(a, b)).or_default();
            let idx = blk.len();
            blk.insert((a.clone(), b.clone()), idx);
        }
    }
    let mut rank = 0u64;
    for (k, cols) in &src {
        let Some(rows) = tgt.get(k) else { continue };
        let (nr, nc) = (rows.len(), cols.len());
        let mut m = vec![0i64; nr * nc];
        for (c, &(i, j)) in cols.iter().enumerate() {
            let (a, b) = (&alphas[i], &betas[j]);
            for v in 0..n {
                if a[v] > 0 && b[v] > 0 {
                    let mut a2 = a.clone();
                    let mut b2 = b.clone();
                    a2[v] -= 1;
                    b2[v] -= 1;
                    let r = rows[&(a2, b2)];
                    m[r * nc + c] += a[v] as i64 * b[v] as i64;
                }
            }
        }
        rank += rank_exact(nr, nc, &m) as u64;
    }
    Ok(count - rank)
}

/// Dimension of harmonic homogeneous polynomials of degree k in `nvars` real
/// variables, from the exact rank of the Euclidean Laplacian on monomials.
pub fn harmonic_dimension_brute_force(nvars: usize, k: u32) -> Result<u64> {
    let src = compositions(k, nvars);
    check_basis(src.len() as u64)?;
    if k < 2 {
        return Ok(src.len() as u64);
    }
    let tgt = compositions(k - 2, nvars);
    let index: HashMap<&Vec<u32>, usize> = tgt.iter().enumerate().map(|(i, g)| (g, i)).collect();
    let (nr, nc) = (tgt.len(), src.len());
    let mut m = vec![0i64; nr * nc];
    for (c, g) in src.iter().enumerate() {
        for v in 0..nvars {
            if g[v] >= 2 {
                let mut h = g.clone();
                h[v] -= 2;
                m[index[&h] * nc + c] += (g[v] * (g[v] - 1)) as i64;
            }
        }
    }
    Ok(nc as u64 - rank_exact(nr, nc, &m) as u64)
}

/// All (p, q) with eigenvalue 2 ell (p + q) + 4 p q <= lambda_max, sorted by
/// eigenvalue and then by (p, q).
pub fn sphere_spectrum(ell: usize, lambda_max: f64) -> Result<Vec<SphereSpectrumEntry>> {
    if ell == 0 {
        return Err(Error::invalid("ell must be positive"));
    }
    if !(lambda_max >= 0.0) || !lambda_max.is_finite() {
        return Err(Error::invalid(format!("lambda_max must be finite and >= 0, got {lambda_max}")));
    }
    let l = ell as u64;
    let mut out = Vec::new();
    let mut p = 0u64;
    while (2 * l * p) as f64 <= lambda_max {
        let mut q = 0u64;
        loop {
            let ev = 2 * l * (p + q) + 4 * p * q;
            if ev as f64 > lambda_max {
                break;
            }
            out.push(SphereSpectrumEntry {
                p: p as u32,
                q: q as u32,
                eigenvalue: ev,
                multiplicity: bidegree_dimension(ell, p as u32, q as u32)?,
            });
            q += 1;
        }
        p += 1;
    }
    out.sort_by_key(|e| (e.eigenvalue, e.p, e.q));
    Ok(out)
}
