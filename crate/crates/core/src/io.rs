//! Matrix Market export of discrete operators and CSV spectra.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::spectra::{CsrMatrix, DiscreteOperator, SpectrumResult};

/// Seventeen significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Lower triangle of a symmetric matrix in coordinate format, 1-based.
pub fn write_matrix_market<W: Write>(w: &mut W, a: &CsrMatrix) -> Result<()> {
    if !a.is_symmetric() {
        return Err(Error::invalid("only symmetric matrices are exported"));
    }
    let lower: usize = (0..a.n)
        .map(|i| a.col[a.row_ptr[i]..a.row_ptr[i + 1]].iter().filter(|&&j| j <= i).count())
        .sum();
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{} {} {}", a.n, a.n, lower)?;
    for i in 0..a.n {
        for p in a.row_ptr[i]..a.row_ptr[i + 1] {
            let j = a.col[p];
            if j <= i {
                writeln!(w, "{} {} {}", i + 1, j + 1, fmt_f64(a.val[p]))?;
            }
        }
    }
    Ok(())
}

/// Writes the stiffness matrix and, as a diagonal matrix, the lumped mass.
pub fn write_operator<W: Write>(stiffness: &mut W, mass: &mut W, op: &DiscreteOperator) -> Result<()> {
    write_matrix_market(stiffness, &op.stiffness)?;
    write_matrix_market(mass, &CsrMatrix::diagonal_matrix(&op.mass))
}

/// Reads a real coordinate file; symmetric storage is expanded.
pub fn read_matrix_market<R: BufRead>(r: R) -> Result<CsrMatrix> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::invalid("empty Matrix Market file"))??;
    let h = header.to_ascii_lowercase();
    if !h.starts_with("%%matrixmarket matrix coordinate real") {
        return Err(Error::invalid(format!("unsupported header {header:?}")));
    }
    let symmetric = h.contains("symmetric");
    let mut size = None;
    let mut trip = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let f: Vec<&str> = t.split_whitespace().collect();
        let bad = || Error::invalid(format!("bad Matrix Market line {t:?}"));
        if size.is_none() {
            if f.len() != 3 {
                return Err(bad());
            }
            let n: usize = f[0].parse().map_err(|_| bad())?;
            let m: usize = f[1].parse().map_err(|_| bad())?;
            if n != m {
                return Err(Error::invalid("only square matrices are supported"));
            }
            size = Some(n);
            continue;
        }
        if f.len() != 3 {
            return Err(bad());
        }
        let i: usize = f[0].parse().map_err(|_| bad())?;
        let j: usize = f[1].parse().map_err(|_| bad())?;
        let v: f64 = f[2].parse().map_err(|_| bad())?;
        if i == 0 || j == 0 {
            return Err(bad());
        }
        trip.push((i - 1, j - 1, v));
        if symmetric && i != j {
            trip.push((j - 1, i - 1, v));
        }
    }
    let n = size.ok_or_else(|| Error::invalid("missing size line"))?;
    CsrMatrix::from_triplets(n, &trip)
}

/// `index,eigenvalue,residual` with a 0-based index.
pub fn write_spectrum_csv<W: Write>(w: &mut W, s: &SpectrumResult) -> Result<()> {
    writeln!(w, "index,eigenvalue,residual")?;
    for (i, (l, r)) in s.eigenvalues.iter().zip(&s.residuals).enumerate() {
        writeln!(w, "{i},{},{}", fmt_f64(*l), fmt_f64(*r))?;
    }
    Ok(())
}
