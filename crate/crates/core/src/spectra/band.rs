//! Banded Cholesky factorization for the shift-invert solves.

use crate::error::{Error, Result};
use crate::spectra::sparse::CsrMatrix;

/// L with A = L L^T, stored row by row: row i keeps L[i][i - bw ..= i]
/// (entries left of column 0 are zero padding).
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    rows: Vec<f64>,
}

impl BandCholesky {
    /// Factors A + diag(shift).
    pub fn factor(a: &CsrMatrix, shift: &[f64]) -> Result<Self> {
        let n = a.n;
        if shift.len() != n {
            return Err(Error::invalid("shift length does not match matrix"));
        }
        let bw = a.bandwidth();
        let w = bw + 1;
        let bytes = n as u128 * w as u128 * 8;
        if bytes > 3 << 30 {
            return Err(Error::invalid(format!("band factor would need {bytes} bytes")));
        }
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            let (c, v) = a.row(i);
            for (&j, &x) in c.iter().zip(v) {
                if j <= i {
                    l[i * w + (j + bw - i)] += x;
                }
            }
            l[i * w + bw] += shift[i];
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                // L[i][j] = (A[i][j] - sum_{k<j} L[i][k] L[j][k]) / L[j][j]
                let k0 = j0.max(j.saturating_sub(bw));
                let len = j - k0;
                let ri = &l[i * w + (k0 + bw - i)..i * w + (k0 + bw - i) + len];
                let rj = &l[j * w + (k0 + bw - j)..j * w + (k0 + bw - j) + len];
                let mut s = 0.0;
                for (x, y) in ri.iter().zip(rj) {
                    s += x * y;
                }
                let idx = i * w + (j + bw - i);
                let v = l[idx] - s;
                if j == i {
                    if !(v > 0.0) {
                        return Err(Error::numeric(format!("matrix not positive definite at row {i}")));
                    }
                    l[idx] = v.sqrt();
                } else {
                    l[idx] = v / l[j * w + bw];
                }
            }
        }
        Ok(BandCholesky { n, bw, rows: l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Solves (L L^T) x = b in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let l = &self.rows;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let row = &l[i * w + (j0 + bw - i)..i * w + bw];
            let mut s = x[i];
            for (a, y) in row.iter().zip(&x[j0..i]) {
                s -= a * y;
            }
            x[i] = s / l[i * w + bw];
        }
        for i in (0..n).rev() {
            x[i] /= l[i * w + bw];
            let xi = x[i];
            let j0 = i.saturating_sub(bw);
            let row = &l[i * w + (j0 + bw - i)..i * w + bw];
            for (a, y) in row.iter().zip(&mut x[j0..i]) {
                *y -= a * xi;
            }
        }
    }
}
