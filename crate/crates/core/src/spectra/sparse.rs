//! Compressed sparse row storage.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl CsrMatrix {
    /// Square matrix from (row, col, value) triplets; duplicates are summed in
    /// input order.
    pub fn from_triplets(n: usize, trip: &[(usize, usize, f64)]) -> Result<Self> {
        if trip.iter().any(|&(i, j, _)| i >= n || j >= n) {
            return Err(Error::invalid("triplet index out of range"));
        }
        let mut order: Vec<usize> = (0..trip.len()).collect();
        order.sort_by_key(|&k| (trip[k].0, trip[k].1, k));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col = Vec::new();
        let mut val: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (i, j, v) = trip[k];
            if last == Some((i, j)) {
                *val.last_mut().expect("entry exists") += v;
            } else {
                col.push(j);
                val.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(CsrMatrix { n, row_ptr, col, val })
    }

    pub fn diagonal_matrix(d: &[f64]) -> Self {
        let n = d.len();
        CsrMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col: (0..n).collect(),
            val: d.to_vec(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col[r.clone()], &self.val[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(k) => v[k],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let (c, v) = self.row(i);
            let mut s = 0.0;
            for (j, a) in c.iter().zip(v) {
                s += a * x[*j];
            }
            y[i] = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// Half bandwidth max |i - j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0;
        for i in 0..self.n {
            let (c, _) = self.row(i);
            if let (Some(&f), Some(&l)) = (c.first(), c.last()) {
                bw = bw.max(i.saturating_sub(f)).max(l.saturating_sub(i));
            }
        }
        bw
    }

    /// Bitwise symmetry of stored values.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).all(|(&j, &a)| self.get(j, i).to_bits() == a.to_bits())
        })
    }

    /// Infinity norm, an upper bound for the spectral norm of a symmetric matrix.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                m[(i, j)] += a;
            }
        }
        m
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let (c, v) = self.row(i);
            let mut r = 0.0;
            for (j, a) in c.iter().zip(v) {
                r += a * x[*j];
            }
            s += x[i] * r;
        }
        s
    }

    /// x^T A y
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            if x[i] == 0.0 {
                continue;
            }
            let (c, v) = self.row(i);
            let mut r = 0.0;
            for (j, a) in c.iter().zip(v) {
                r += a * y[*j];
            }
            s += x[i] * r;
        }
        s
    }
}
