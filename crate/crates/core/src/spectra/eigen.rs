//! Smallest eigenpairs of A v = lambda M v by shift-invert block Krylov
//! iteration with full reorthogonalization.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, PartialSpectrum, Result};
use crate::rng::stream_rng;
use crate::spectra::band::BandCholesky;
use crate::spectra::operator::DiscreteOperator;

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub k_requested: usize,
    pub k_converged: usize,
    /// Eigenvectors with unit Euclidean norm, in eigenvalue order.
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EigenOptions {
    /// Accept a pair when ||A v - lambda M v|| <= tol ||A|| for ||v|| = 1.
    pub tol: f64,
    pub block: usize,
    /// Krylov basis cap; defaults to max(3k, k + 120).
    pub max_basis: Option<usize>,
    /// Shift s of (A + s M)^-1 M; defaults to 1e-4 max(A_ii / M_ii).
    pub shift: Option<f64>,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-8,
            block: 6,
            max_basis: None,
            shift: None,
            seed: 0,
        }
    }
}

const MAX_RESTARTS: usize = 40;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Two passes of classical Gram-Schmidt against `basis`; returns the summed
/// coefficients.
fn orthogonalize(basis: &[Vec<f64>], w: &mut [f64]) -> Vec<f64> {
    let mut coef = vec![0.0; basis.len()];
    for _ in 0..2 {
        let c: Vec<f64> = basis.iter().map(|v| dot(v, w)).collect();
        for (v, &ci) in basis.iter().zip(&c) {
            axpy(-ci, v, w);
        }
        for (a, b) in coef.iter_mut().zip(&c) {
            *a += b;
        }
    }
    coef
}

/// The k smallest eigenvalues of the pencil (stiffness, mass).
pub fn eigen_smallest(op: &DiscreteOperator, k: usize) -> Result<SpectrumResult> {
    eigen_smallest_with(op, k, &EigenOptions::default())
}

pub fn eigen_smallest_with(op: &DiscreteOperator, k: usize, opts: &EigenOptions) -> Result<SpectrumResult> {
    let n = op.n();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("need 0 < k < n, got k = {k}, n = {n}")));
    }
    if opts.block == 0 || !(opts.tol > 0.0) {
        return Err(Error::invalid("block size and tolerance must be positive"));
    }
    let a = &op.stiffness;
    let m = &op.mass;
    let anorm = a.norm_inf().max(f64::MIN_POSITIVE);
    let shift = match opts.shift {
        Some(s) if s > 0.0 => s,
        Some(s) => return Err(Error::invalid(format!("shift must be positive, got {s}"))),
        None => {
            let r = (0..n).map(|i| a.get(i, i) / m[i]).fold(0.0, f64::max);
            if r > 0.0 {
                1e-4 * r
            } else {
                1e-4
            }
        }
    };
    let shifted: Vec<f64> = m.iter().map(|w| shift * w).collect();
    let chol = BandCholesky::factor(a, &shifted)?;
    let sq: Vec<f64> = m.iter().map(|w| w.sqrt()).collect();
    // S = M^1/2 (A + s M)^-1 M^1/2 is symmetric; its top eigenvalues give
    // the bottom of the pencil
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut x: Vec<f64> = v.iter().zip(&sq).map(|(a, b)| a * b).collect();
        chol.solve_in_place(&mut x);
        for (xi, b) in x.iter_mut().zip(&sq) {
            *xi *= b;
        }
        x
    };

    let p = opts.block.min(n);
    let cap = opts.max_basis.unwrap_or((3 * k).max(k + 120)).min(n).max(k + 1);
    let mut rng = stream_rng(opts.seed, 0x5eed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cap + p);
    let mut h = DMatrix::<f64>::zeros(cap + p, cap + p);

    let fresh = |basis: &[Vec<f64>], rng: &mut rand_chacha::ChaCha8Rng| -> Option<Vec<f64>> {
        for _ in 0..5 {
            let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            orthogonalize(basis, &mut w);
            let nw = norm(&w);
            if nw > 1e-8 {
                w.iter_mut().for_each(|x| *x /= nw);
                return Some(w);
            }
        }
        None
    };
    for _ in 0..p {
        match fresh(&basis, &mut rng) {
            Some(w) => basis.push(w),
            None => break,
        }
    }

    // column-by-column Arnoldi; with a start block of p vectors this is the
    // block Krylov recurrence, and H[..j, ..j] = V^T S V for the processed part.
    // When the basis cap is hit the leading Ritz vectors are kept together with
    // the unprocessed block (thick restart).
    let check_every = p.max((k / 3 + p).min(40));
    let keep = (k + k / 2 + p).min(cap.saturating_sub(2 * p)).max(k);
    let mut processed = 0;
    let mut iterations = 0;
    let mut restarts = 0;
    let mut last_check = 0;
    let (lams, res, vecs, conv) = loop {
        if processed < basis.len() && processed < cap {
            iterations += 1;
            let mut w = apply(&basis[processed]);
            let before = norm(&w);
            let coef = orthogonalize(&basis, &mut w);
            for (r, &cf) in coef.iter().enumerate() {
                h[(r, processed)] += cf;
            }
            let nw = norm(&w);
            if basis.len() < n {
                if nw > 1e-12 * before.max(f64::MIN_POSITIVE) {
                    w.iter_mut().for_each(|x| *x /= nw);
                    h[(basis.len(), processed)] = nw;
                    basis.push(w);
                } else if let Some(w) = fresh(&basis, &mut rng) {
                    basis.push(w);
                }
            }
            processed += 1;
        }
        let exhausted = processed == basis.len();
        let full = processed >= cap;
        if processed < (k + p).min(n) && !exhausted && !full {
            continue;
        }
        if processed - last_check < check_every && !exhausted && !full {
            continue;
        }
        last_check = processed;
        let msize = processed;

        let hm = h.view((0, 0), (msize, msize)).into_owned();
        let hs = (&hm + hm.transpose()) * 0.5;
        let eig = SymmetricEigen::new(hs);
        let mut order: Vec<usize> = (0..msize).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let want = &order[..k.min(msize)];
        let mut lams = Vec::new();
        let mut res = Vec::new();
        let mut vecs = Vec::new();
        let mut conv = Vec::new();
        for &i in want {
            let theta = eig.eigenvalues[i];
            let y = eig.eigenvectors.column(i);
            let mut u = vec![0.0; n];
            for (c, v) in basis[..msize].iter().enumerate() {
                axpy(y[c], v, &mut u);
            }
            let mut v: Vec<f64> = u.iter().zip(&sq).map(|(a, b)| a / b).collect();
            let nv = norm(&v);
            v.iter_mut().for_each(|x| *x /= nv);
            let lam = if theta > 0.0 { 1.0 / theta - shift } else { f64::INFINITY };
            let av = a.mul(&v);
            let r: f64 = av
                .iter()
                .zip(&v)
                .zip(m)
                .map(|((x, y), w)| (x - lam * w * y).powi(2))
                .sum::<f64>()
                .sqrt();
            let lam = if lam < 0.0 && -lam <= opts.tol * anorm { 0.0 } else { lam };
            conv.push(r <= opts.tol * anorm);
            lams.push(lam);
            res.push(r);
            vecs.push(v);
        }
        let all_conv = conv.len() == k && conv.iter().all(|&c| c);
        if all_conv || exhausted || (full && restarts >= MAX_RESTARTS) {
            break (lams, res, vecs, conv);
        }
        if !full {
            continue;
        }

        restarts += 1;
        let kept = keep.min(msize);
        let tail: Vec<Vec<f64>> = basis.drain(msize..).collect();
        let mut fresh_basis: Vec<Vec<f64>> = Vec::with_capacity(cap + p);
        for &i in &order[..kept] {
            let y = eig.eigenvectors.column(i);
            let mut u = vec![0.0; n];
            for (c, v) in basis.iter().enumerate() {
                axpy(y[c], v, &mut u);
            }
            fresh_basis.push(u);
        }
        let mut hn = DMatrix::<f64>::zeros(cap + p, cap + p);
        for (c, &i) in order[..kept].iter().enumerate() {
            hn[(c, c)] = eig.eigenvalues[i];
            let y = eig.eigenvectors.column(i);
            for t in 0..tail.len() {
                let mut acc = 0.0;
                for j in 0..msize {
                    acc += h[(msize + t, j)] * y[j];
                }
                hn[(kept + t, c)] = acc;
            }
        }
        // Ritz vectors drift slightly from orthogonality; one more sweep
        // keeps the tail block clean
        fresh_basis.extend(tail);
        for j in kept..fresh_basis.len() {
            let (head, rest) = fresh_basis.split_at_mut(j);
            let w = &mut rest[0];
            orthogonalize(head, w);
            let nw = norm(w);
            w.iter_mut().for_each(|x| *x /= nw);
        }
        basis = fresh_basis;
        h = hn;
        processed = kept;
        last_check = kept;
    };

    let mut idx: Vec<usize> = (0..lams.len()).collect();
    idx.sort_by(|&i, &j| lams[i].total_cmp(&lams[j]));
    let eigenvalues: Vec<f64> = idx.iter().map(|&i| lams[i]).collect();
    let residuals: Vec<f64> = idx.iter().map(|&i| res[i]).collect();
    let converged: Vec<bool> = idx.iter().map(|&i| conv[i]).collect();
    let k_converged = converged.iter().filter(|&&c| c).count();
    if k_converged < k {
        return Err(Error::EigenNotConverged {
            requested: k,
            converged: k_converged,
            iterations,
            partial: PartialSpectrum {
                eigenvalues,
                residuals,
                converged,
            },
        });
    }
    Ok(SpectrumResult {
        eigenvalues,
        residuals,
        k_requested: k,
        k_converged,
        vectors: idx.into_iter().map(|i| vecs[i].clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::operator::interval_neumann;
    use crate::spectra::sparse::CsrMatrix;

    #[test]
    fn diagonal_pencil() {
        let d: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let op = DiscreteOperator::new(CsrMatrix::diagonal_matrix(&d), vec![1.0; 40]).unwrap();
        let r = eigen_smallest(&op, 5).unwrap();
        for (j, l) in r.eigenvalues.iter().enumerate() {
            assert!((l - j as f64).abs() < 1e-12, "{l}");
        }
    }

    #[test]
    fn interval_modes() {
        let op = interval_neumann(400, 1.0).unwrap();
        let r = eigen_smallest(&op, 4).unwrap();
        for j in 0..3 {
            let exact = (std::f64::consts::PI * j as f64).powi(2);
            assert!((r.eigenvalues[j] - exact).abs() < 1e-3 * exact.max(1.0), "{:?}", r.eigenvalues);
        }
    }

    #[test]
    fn bad_k() {
        let op = interval_neumann(10, 1.0).unwrap();
        assert!(eigen_smallest(&op, 0).is_err());
        assert!(eigen_smallest(&op, 10).is_err());
    }
}
