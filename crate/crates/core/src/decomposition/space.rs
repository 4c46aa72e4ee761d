//! Finite weighted metric spaces with a dense distance matrix.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::carnot::GroupElement;
use crate::error::{Error, Result};
use crate::metric::DistanceOracle;
use crate::rng::stream_rng;

/// How coordinates read from a point file are turned into distances.
#[derive(Debug, Clone)]
pub enum PointMetric {
    Euclidean,
    /// Coordinates (x_1..x_ell, y_1..y_ell, z) on the oracle's group.
    Carnot(DistanceOracle),
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricMeasureSpace {
    pub ids: Vec<String>,
    #[serde(skip)]
    coords: Option<Vec<Vec<f64>>>,
    #[serde(skip)]
    dist: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Outcome of [`MetricMeasureSpace::check`].
#[derive(Debug, Clone, Serialize)]
pub struct SpaceCheck {
    pub triples_checked: usize,
    pub max_triangle_defect: f64,
    pub max_atom_fraction: f64,
}

fn mirror(n: usize, rows: Vec<Vec<f64>>) -> Vec<f64> {
    let mut d = vec![0.0; n * n];
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

impl MetricMeasureSpace {
    /// From a row-major n x n matrix. Symmetry and the zero diagonal are
    /// checked exactly; the triangle inequality only by [`Self::check`].
    pub fn from_matrix(dist: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let n = weights.len();
        if dist.len() != n * n {
            return Err(Error::invalid(format!("distance matrix has {} entries for {n} points", dist.len())));
        }
        let ids = (0..n).map(|i| i.to_string()).collect();
        let s = MetricMeasureSpace {
            ids,
            coords: None,
            dist,
            weights,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_points(points: Vec<Vec<f64>>, weights: Vec<f64>, metric: &PointMetric) -> Result<Self> {
        let n = points.len();
        if weights.len() != n {
            return Err(Error::invalid("one weight per point is required"));
        }
        if let Some(p) = points.iter().find(|p| p.len() != points[0].len()) {
            return Err(Error::invalid(format!("mixed coordinate lengths {} and {}", p.len(), points[0].len())));
        }
        let dist = match metric {
            PointMetric::Euclidean => {
                let rows: Vec<Vec<f64>> = (0..n)
                    .into_par_iter()
                    .map(|i| {
                        (i + 1..n)
                            .map(|j| points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                            .collect()
                    })
                    .collect();
                mirror(n, rows)
            }
            PointMetric::Carnot(oracle) => {
                let ell = oracle.group().ell();
                let w = usize::from(oracle.group().has_transversal_t());
                let elems: Vec<GroupElement> = points
                    .iter()
                    .map(|p| {
                        if p.len() != 2 * ell + 1 + w {
                            return Err(Error::invalid(format!("expected {} coordinates, got {}", 2 * ell + 1 + w, p.len())));
                        }
                        let mut g = GroupElement::new(p[..ell].to_vec(), p[ell..2 * ell].to_vec(), p[2 * ell + w]);
                        if w == 1 {
                            g.w = p[2 * ell];
                        }
                        Ok(g)
                    })
                    .collect::<Result<_>>()?;
                return Self::from_group_points(oracle, &elems, weights).map(|mut s| {
                    s.coords = Some(points);
                    s
                });
            }
        };
        let s = MetricMeasureSpace {
            ids: (0..n).map(|i| i.to_string()).collect(),
            coords: Some(points),
            dist,
            weights,
        };
        s.validate()?;
        Ok(s)
    }

    /// Carnot-Caratheodory distances between group elements.
    pub fn from_group_points(oracle: &DistanceOracle, points: &[GroupElement], weights: Vec<f64>) -> Result<Self> {
        let n = points.len();
        if weights.len() != n {
            return Err(Error::invalid("one weight per point is required"));
        }
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (i + 1..n).map(|j| oracle.distance_between(&points[i], &points[j])).collect::<Result<Vec<f64>>>())
            .collect::<Result<_>>()?;
        let coords = points
            .iter()
            .map(|p| p.to_coords(oracle.group().has_transversal_t()))
            .collect();
        let s = MetricMeasureSpace {
            ids: (0..n).map(|i| i.to_string()).collect(),
            coords: Some(coords),
            dist: mirror(n, rows),
            weights,
        };
        s.validate()?;
        Ok(s)
    }

    /// `n` points drawn uniformly from the ball B(center, r) of the oracle's
    /// group, with weights uniform in [w_lo, w_hi].
    pub fn sample_group_ball(
        oracle: &DistanceOracle,
        center: &GroupElement,
        r: f64,
        n: usize,
        weight_range: (f64, f64),
        seed: u64,
    ) -> Result<Self> {
        use crate::metric::BallSampler;
        let (lo, hi) = weight_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::invalid("weight range must be positive and ordered"));
        }
        let mut rng = stream_rng(seed, 0xba11);
        let mut pts = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for _ in 0..n {
            pts.push(oracle.sample_ball(center, r, &mut rng)?);
            weights.push(if hi > lo { rng.gen_range(lo..hi) } else { lo });
        }
        Self::from_group_points(oracle, &pts, weights)
    }

    fn validate(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::invalid("empty space"));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        if !(self.total_mass() > 0.0) {
            return Err(Error::invalid("total weight must be positive"));
        }
        for i in 0..n {
            if self.dist[i * n + i] != 0.0 {
                return Err(Error::invalid(format!("nonzero diagonal at {i}")));
            }
            for j in i + 1..n {
                let d = self.dist[i * n + j];
                if !(d.is_finite() && d >= 0.0) {
                    return Err(Error::invalid(format!("bad distance {d} between {i} and {j}")));
                }
                if d != self.dist[j * n + i] {
                    return Err(Error::invalid(format!("asymmetric distance between {i} and {j}")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.dist[i * n..(i + 1) * n]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Triangle inequality on up to `triples` random triples (all of them when
    /// n^3 is smaller) and the atom bound: no weight above mu(X) / (2k).
    pub fn check(&self, k: usize, triples: usize, seed: u64) -> Result<SpaceCheck> {
        if k == 0 {
            return Err(Error::invalid("k must be positive"));
        }
        let n = self.len();
        let mu = self.total_mass();
        let mut worst: f64 = 0.0;
        let mut defect = |i: usize, j: usize, l: usize| {
            let d = self.dist(i, l) - self.dist(i, j) - self.dist(j, l);
            worst = worst.max(d);
        };
        let count = if n.pow(3) <= triples {
            for i in 0..n {
                for j in 0..n {
                    for l in 0..n {
                        defect(i, j, l);
                    }
                }
            }
            n.pow(3)
        } else {
            let mut rng = stream_rng(seed, 0x7e1);
            for _ in 0..triples {
                defect(rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
            }
            triples
        };
        let scale = self.diameter().max(f64::MIN_POSITIVE);
        if worst > 1e-9 * scale {
            return Err(Error::invalid(format!("triangle inequality fails by {worst}")));
        }
        let atom = self.weights.iter().copied().fold(0.0, f64::max) / mu;
        if atom > 1.0 / (2.0 * k as f64) {
            return Err(Error::invalid(format!(
                "an atom carries {atom:.4} of the mass, above 1/(2k) = {:.4}",
                1.0 / (2.0 * k as f64)
            )));
        }
        Ok(SpaceCheck {
            triples_checked: count,
            max_triangle_defect: worst,
            max_atom_fraction: atom,
        })
    }

    /// Reads `id, coord..., weight` rows; a header row is detected by a
    /// non-numeric weight column.
    pub fn read_csv(path: impl AsRef<Path>, metric: &PointMetric) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path.as_ref())
            .map_err(csv_error)?;
        let mut ids = Vec::new();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_error)?;
            if rec.len() < 3 {
                return Err(Error::invalid(format!("row {}: need id, coordinates and weight", line + 1)));
            }
            let last = &rec[rec.len() - 1];
            let w: f64 = match last.parse() {
                Ok(w) => w,
                Err(_) if line == 0 => continue,
                Err(_) => return Err(Error::invalid(format!("row {}: bad weight {last:?}", line + 1))),
            };
            let c = (1..rec.len() - 1)
                .map(|k| {
                    rec[k]
                        .parse::<f64>()
                        .map_err(|_| Error::invalid(format!("row {}: bad coordinate {:?}", line + 1, &rec[k])))
                })
                .collect::<Result<Vec<f64>>>()?;
            ids.push(rec[0].to_string());
            points.push(c);
            weights.push(w);
        }
        let mut s = Self::from_points(points, weights, metric)?;
        s.ids = ids;
        Ok(s)
    }

    /// Binary layout, little endian: u64 n, then n*n f64 distances row-major,
    /// then optionally n f64 weights (unit weights when absent).
    pub fn read_binary(path: impl AsRef<Path>) -> Result<Self> {
        let mut buf = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut buf)?;
        Self::from_binary(&buf)
    }

    pub fn from_binary(buf: &[u8]) -> Result<Self> {
        if buf.len() < 8 {
            return Err(Error::invalid("binary matrix shorter than its header"));
        }
        let n = u64::from_le_bytes(buf[..8].try_into().expect("8 bytes")) as usize;
        let body = &buf[8..];
        let nn = n
            .checked_mul(n)
            .and_then(|x| x.checked_mul(8))
            .ok_or_else(|| Error::invalid("declared size overflows"))?;
        let has_weights = if body.len() == nn {
            false
        } else if body.len() == nn + 8 * n {
            true
        } else {
            return Err(Error::invalid(format!(
                "binary body has {} bytes, expected {nn} or {} for n = {n}",
                body.len(),
                nn + 8 * n
            )));
        };
        let floats: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let dist = floats[..n * n].to_vec();
        let weights = if has_weights { floats[n * n..].to_vec() } else { vec![1.0; n] };
        Self::from_matrix(dist, weights)
    }

    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for v in self.dist.iter().chain(&self.weights) {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::invalid(format!("csv: {other:?}")),
    }
}
