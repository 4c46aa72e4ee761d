//! Q1 finite-element quadratic forms of horizontal gradients on coordinate boxes.

use rayon::prelude::*;
use serde::Serialize;

use crate::carnot::GroupElement;
use crate::error::{Error, Result};
use crate::popp::conformal::volume_weight;
use crate::popp::ConformalFactor;
use crate::spectra::sparse::CsrMatrix;

/// Smallest number of nodes per axis accepted by the box assembler.
pub const MIN_NODES: usize = 8;

/// Coordinate box [origin, origin + lengths] in H^ell, axes ordered
/// (x_1..x_ell, y_1..y_ell, t), with `nodes[k]` grid nodes on axis k.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxGrid {
    pub ell: usize,
    pub b: Vec<f64>,
    pub origin: Vec<f64>,
    pub lengths: Vec<f64>,
    pub nodes: Vec<usize>,
    /// Adds d/dt to the frame: the Riemannian control operator.
    pub riemannian: bool,
}

impl BoxGrid {
    /// Box [0, L_k] with the standard b = 1 frame.
    pub fn heisenberg(ell: usize, lengths: Vec<f64>, nodes: Vec<usize>) -> Result<Self> {
        let g = BoxGrid {
            ell,
            b: vec![1.0; ell],
            origin: vec![0.0; 2 * ell + 1],
            lengths,
            nodes,
            riemannian: false,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_b(mut self, b: Vec<f64>) -> Result<Self> {
        self.b = b;
        self.validate()?;
        Ok(self)
    }

    pub fn with_origin(mut self, origin: Vec<f64>) -> Result<Self> {
        self.origin = origin;
        self.validate()?;
        Ok(self)
    }

    pub fn riemannian(mut self, on: bool) -> Self {
        self.riemannian = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let d = 2 * self.ell + 1;
        if self.ell == 0 {
            return Err(Error::invalid("ell must be positive"));
        }
        if self.b.len() != self.ell || self.b.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("b must hold ell positive entries"));
        }
        if self.lengths.len() != d || self.origin.len() != d || self.nodes.len() != d {
            return Err(Error::invalid(format!("box needs {d} lengths, origins and node counts")));
        }
        if self.lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) || self.origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::invalid("box lengths must be positive and finite"));
        }
        if self.nodes.iter().any(|&n| n < MIN_NODES) {
            return Err(Error::invalid(format!("need at least {MIN_NODES} nodes per axis")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        2 * self.ell + 1
    }

    pub fn node_count(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn cell_count(&self) -> usize {
        self.nodes.iter().map(|n| n - 1).product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / (self.nodes[axis] - 1) as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).product()
    }

    /// Box volume.
    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim()];
        for k in 1..self.dim() {
            s[k] = s[k - 1] * self.nodes[k - 1];
        }
        s
    }

    pub fn node_multi(&self, mut i: usize) -> Vec<usize> {
        let mut m = vec![0; self.dim()];
        for k in 0..self.dim() {
            m[k] = i % self.nodes[k];
            i /= self.nodes[k];
        }
        m
    }

    pub fn node_coords(&self, i: usize) -> Vec<f64> {
        self.node_multi(i)
            .iter()
            .enumerate()
            .map(|(k, &m)| self.origin[k] + m as f64 * self.spacing(k))
            .collect()
    }

    /// Group element at coordinates (x.., y.., t).
    pub fn element_at(&self, c: &[f64]) -> GroupElement {
        let l = self.ell;
        GroupElement::new(c[..l].to_vec(), c[l..2 * l].to_vec(), c[2 * l])
    }

    pub fn node_element(&self, i: usize) -> GroupElement {
        self.element_at(&self.node_coords(i))
    }

    /// Lower-corner multi-index of cell `c`.
    pub fn cell_multi(&self, mut c: usize) -> Vec<usize> {
        let mut m = vec![0; self.dim()];
        for k in 0..self.dim() {
            m[k] = c % (self.nodes[k] - 1);
            c /= self.nodes[k] - 1;
        }
        m
    }

    /// Global node indices of the 2^d corners of cell `c`; bit k of the local
    /// index selects the upper node along axis k.
    pub fn cell_nodes(&self, c: usize) -> Vec<usize> {
        let m = self.cell_multi(c);
        let s = self.strides();
        let base: usize = m.iter().zip(&s).map(|(a, b)| a * b).sum();
        (0..1usize << self.dim())
            .map(|a| base + (0..self.dim()).filter(|k| a >> k & 1 == 1).map(|k| s[k]).sum::<usize>())
            .collect()
    }

    pub fn cell_center(&self, c: usize) -> Vec<f64> {
        self.cell_multi(c)
            .iter()
            .enumerate()
            .map(|(k, &m)| self.origin[k] + (m as f64 + 0.5) * self.spacing(k))
            .collect()
    }

    /// Rows of frame coefficients at a point: one row per horizontal field
    /// (plus d/dt for the control), each a vector over the coordinate axes.
    pub fn frame_at(&self, c: &[f64]) -> Vec<Vec<f64>> {
        let l = self.ell;
        let d = self.dim();
        let mut f = Vec::with_capacity(2 * l + 1);
        for i in 0..l {
            let mut x = vec![0.0; d];
            x[i] = 1.0;
            x[2 * l] = 0.5 * self.b[i] * c[l + i];
            f.push(x);
            let mut y = vec![0.0; d];
            y[l + i] = 1.0;
            y[2 * l] = -0.5 * self.b[i] * c[i];
            f.push(y);
        }
        if self.riemannian {
            let mut t = vec![0.0; d];
            t[2 * l] = 1.0;
            f.push(t);
        }
        f
    }
}

/// Tensor 2-point Gauss rule on the reference cell [0, 1]^d with Q1 basis
/// values and reference gradients.
pub(crate) struct Reference {
    pub points: Vec<Vec<f64>>,
    pub weight: f64,
    /// basis[g][a]
    pub basis: Vec<Vec<f64>>,
    /// grad[g][a][k], derivative in reference coordinates
    pub grad: Vec<Vec<Vec<f64>>>,
}

impl Reference {
    pub fn new(dim: usize) -> Self {
        let off = 0.5 / 3f64.sqrt();
        let g1 = [0.5 - off, 0.5 + off];
        let nv = 1usize << dim;
        let mut points = Vec::with_capacity(nv);
        for gi in 0..nv {
            points.push((0..dim).map(|k| g1[gi >> k & 1]).collect::<Vec<f64>>());
        }
        let shape = |a: usize, k: usize, xi: f64| if a >> k & 1 == 1 { xi } else { 1.0 - xi };
        let dshape = |a: usize, k: usize| if a >> k & 1 == 1 { 1.0 } else { -1.0 };
        let basis = points
            .iter()
            .map(|p| (0..nv).map(|a| (0..dim).map(|k| shape(a, k, p[k])).product()).collect())
            .collect();
        let grad = points
            .iter()
            .map(|p| {
                (0..nv)
                    .map(|a| {
                        (0..dim)
                            .map(|k| {
                                dshape(a, k) * (0..dim).filter(|&m| m != k).map(|m| shape(a, m, p[m])).product::<f64>()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Reference {
            points,
            weight: 1.0 / nv as f64,
            basis,
            grad,
        }
    }
}

/// Sparse PSD stiffness matrix with a positive lumped mass.
#[derive(Debug, Clone, Serialize)]
pub struct DiscreteOperator {
    pub stiffness: CsrMatrix,
    pub mass: Vec<f64>,
    pub grid: Option<BoxGrid>,
}

impl DiscreteOperator {
    pub fn new(stiffness: CsrMatrix, mass: Vec<f64>) -> Result<Self> {
        if stiffness.n != mass.len() {
            return Err(Error::invalid("stiffness and mass sizes differ"));
        }
        if mass.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::invalid("mass weights must be positive"));
        }
        if !stiffness.is_symmetric() {
            return Err(Error::invalid("stiffness matrix is not symmetric"));
        }
        Ok(DiscreteOperator {
            stiffness,
            mass,
            grid: None,
        })
    }

    pub fn n(&self) -> usize {
        self.mass.len()
    }

    pub fn volume(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// <A u, u> / <M u, u>
    pub fn rayleigh_quotient(&self, u: &[f64]) -> f64 {
        let m: f64 = u.iter().zip(&self.mass).map(|(x, w)| w * x * x).sum();
        self.stiffness.quad_form(u) / m
    }
}

/// Sub-Laplacian (or, with `grid.riemannian`, the Riemannian control) on a box
/// with natural Neumann conditions.
pub fn assemble_sub_laplacian(grid: &BoxGrid) -> Result<DiscreteOperator> {
    assemble_conformal(grid, None)
}

/// Same as [`assemble_sub_laplacian`] for the metric phi g, with phi given at
/// the grid nodes: stiffness weight phi^(Q/2 - 1) at quadrature points and
/// mass weight phi^(Q/2) at the nodes.
pub fn assemble_conformal(grid: &BoxGrid, phi: Option<&ConformalFactor>) -> Result<DiscreteOperator> {
    grid.validate()?;
    let n = grid.node_count();
    if let Some(p) = phi {
        if p.len() != n {
            return Err(Error::invalid(format!("conformal factor has {} samples for {n} nodes", p.len())));
        }
    }
    let d = grid.dim();
    let nv = 1usize << d;
    let reference = Reference::new(d);
    let h: Vec<f64> = (0..d).map(|k| grid.spacing(k)).collect();
    let cell_vol = grid.cell_volume();

    // upper-triangular element matrices, computed in parallel
    let elems: Vec<Vec<f64>> = (0..grid.cell_count())
        .into_par_iter()
        .map(|c| {
            let nodes = grid.cell_nodes(c);
            let lo: Vec<f64> = grid.cell_multi(c).iter().enumerate().map(|(k, &m)| grid.origin[k] + m as f64 * h[k]).collect();
            let mut ke = vec![0.0; nv * (nv + 1) / 2];
            let mut dv = vec![0.0; nv];
            for (g, xi) in reference.points.iter().enumerate() {
                let x: Vec<f64> = (0..d).map(|k| lo[k] + xi[k] * h[k]).collect();
                let mut w = reference.weight * cell_vol;
                if let Some(p) = phi {
                    let pv = p.values();
                    let p0 = pv[nodes[0]];
                    let pg = p0 + (1..nv).map(|a| reference.basis[g][a] * (pv[nodes[a]] - p0)).sum::<f64>();
                    w *= volume_weight(pg, p.q()) / pg;
                }
                for field in grid.frame_at(&x) {
                    for a in 0..nv {
                        dv[a] = (0..d).map(|k| field[k] * reference.grad[g][a][k] / h[k]).sum();
                    }
                    let mut idx = 0;
                    for a in 0..nv {
                        for b in a..nv {
                            ke[idx] += w * dv[a] * dv[b];
                            idx += 1;
                        }
                    }
                }
            }
            ke
        })
        .collect();

    // sparsity pattern from the 3^d neighbourhood
    let strides = grid.strides();
    let mut offsets: Vec<(i64, Vec<i64>)> = (0..3usize.pow(d as u32))
        .map(|mut o| {
            let v: Vec<i64> = (0..d)
                .map(|_| {
                    let r = (o % 3) as i64 - 1;
                    o /= 3;
                    r
                })
                .collect();
            (v.iter().zip(&strides).map(|(a, &s)| a * s as i64).sum(), v)
        })
        .collect();
    offsets.sort_by_key(|o| o.0);
    let mut row_ptr = vec![0usize; n + 1];
    let mut col = Vec::new();
    for i in 0..n {
        let m = grid.node_multi(i);
        for (lin, v) in &offsets {
            if (0..d).all(|k| {
                let t = m[k] as i64 + v[k];
                t >= 0 && t < grid.nodes[k] as i64
            }) {
                col.push((i as i64 + lin) as usize);
            }
        }
        row_ptr[i + 1] = col.len();
    }
    let mut val = vec![0.0; col.len()];
    let pos = |i: usize, j: usize| -> usize {
        let r = &col[row_ptr[i]..row_ptr[i + 1]];
        row_ptr[i] + r.binary_search(&j).expect("entry in stencil pattern")
    };
    for (c, ke) in elems.iter().enumerate() {
        let nodes = grid.cell_nodes(c);
        let mut idx = 0;
        for a in 0..nv {
            for b in a..nv {
                let v = ke[idx];
                idx += 1;
                if a == b {
                    val[pos(nodes[a], nodes[a])] += v;
                } else {
                    val[pos(nodes[a], nodes[b])] += v;
                    val[pos(nodes[b], nodes[a])] += v;
                }
            }
        }
    }
    // rows of the exact form sum to zero; pin the diagonal to enforce it
    for i in 0..n {
        let mut off = 0.0;
        let mut dpos = usize::MAX;
        for p in row_ptr[i]..row_ptr[i + 1] {
            if col[p] == i {
                dpos = p;
            } else {
                off += val[p];
            }
        }
        val[dpos] = -off;
    }

    let mut mass = vec![0.0; n];
    for c in 0..grid.cell_count() {
        for node in grid.cell_nodes(c) {
            mass[node] += cell_vol / nv as f64;
        }
    }
    if let Some(p) = phi {
        for (i, m) in mass.iter_mut().enumerate() {
            *m *= p.volume_weight(i);
        }
    }
    let stiffness = CsrMatrix { n, row_ptr, col, val };
    Ok(DiscreteOperator {
        stiffness,
        mass,
        grid: Some(grid.clone()),
    })
}

/// P1 Neumann Laplacian on [0, length] with `n` nodes and lumped mass.
pub fn interval_neumann(n: usize, length: f64) -> Result<DiscreteOperator> {
    if n < 2 || !(length > 0.0) {
        return Err(Error::invalid("need n >= 2 and a positive length"));
    }
    let h = length / (n - 1) as f64;
    let mut trip = Vec::new();
    let mut mass = vec![0.0; n];
    for e in 0..n - 1 {
        let k = 1.0 / h;
        trip.push((e, e, k));
        trip.push((e + 1, e + 1, k));
        trip.push((e, e + 1, -k));
        trip.push((e + 1, e, -k));
        mass[e] += 0.5 * h;
        mass[e + 1] += 0.5 * h;
    }
    DiscreteOperator::new(CsrMatrix::from_triplets(n, &trip)?, mass)
}

/// Horizontal gradient norms |grad_b u| at every quadrature point, cell-major,
/// with the quadrature weight (cell volume share) alongside.
pub fn horizontal_gradient_samples(grid: &BoxGrid, u: &[f64]) -> Result<Vec<(f64, f64)>> {
    if u.len() != grid.node_count() {
        return Err(Error::invalid("function does not match the grid"));
    }
    let d = grid.dim();
    let nv = 1usize << d;
    let reference = Reference::new(d);
    let h: Vec<f64> = (0..d).map(|k| grid.spacing(k)).collect();
    let cell_vol = grid.cell_volume();
    let out: Vec<Vec<(f64, f64)>> = (0..grid.cell_count())
        .into_par_iter()
        .map(|c| {
            let nodes = grid.cell_nodes(c);
            let lo: Vec<f64> = grid.cell_multi(c).iter().enumerate().map(|(k, &m)| grid.origin[k] + m as f64 * h[k]).collect();
            let mut v = Vec::with_capacity(nv);
            for (g, xi) in reference.points.iter().enumerate() {
                let x: Vec<f64> = (0..d).map(|k| lo[k] + xi[k] * h[k]).collect();
                let grad: Vec<f64> = (0..d)
                    .map(|k| (0..nv).map(|a| u[nodes[a]] * reference.grad[g][a][k] / h[k]).sum())
                    .collect();
                let s: f64 = grid
                    .frame_at(&x)
                    .iter()
                    .map(|f| {
                        let t: f64 = f.iter().zip(&grad).map(|(a, b)| a * b).sum();
                        t * t
                    })
                    .sum();
                v.push((s.sqrt(), reference.weight * cell_vol));
            }
            v
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}

/// Value of a nodal field at every quadrature point, in the order of
/// [`horizontal_gradient_samples`].
pub fn interpolate_at_quadrature(grid: &BoxGrid, f: &[f64]) -> Result<Vec<f64>> {
    if f.len() != grid.node_count() {
        return Err(Error::invalid("field does not match the grid"));
    }
    let reference = Reference::new(grid.dim());
    let nv = 1usize << grid.dim();
    let mut out = Vec::with_capacity(grid.cell_count() * nv);
    for c in 0..grid.cell_count() {
        let nodes = grid.cell_nodes(c);
        // offset form: exact on cells where f is constant
        let f0 = f[nodes[0]];
        for g in 0..nv {
            out.push(f0 + (1..nv).map(|a| reference.basis[g][a] * (f[nodes[a]] - f0)).sum::<f64>());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BoxGrid {
        BoxGrid::heisenberg(1, vec![1.0, 1.0, 0.5], vec![8, 9, 10]).unwrap()
    }

    #[test]
    fn constants_in_kernel_and_symmetric() {
        let op = assemble_sub_laplacian(&small()).unwrap();
        assert!(op.stiffness.is_symmetric());
        let r = op.stiffness.mul(&vec![1.0; op.n()]);
        let scale = op.stiffness.norm_inf();
        assert!(r.iter().all(|v| v.abs() <= 1e-14 * scale));
        assert!((op.volume() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn quadratic_form_is_exact_on_linear_functions() {
        // u = x: |X u|^2 = 1, |Y u|^2 = 0, so the energy equals the volume
        let g = small();
        let op = assemble_sub_laplacian(&g).unwrap();
        let u: Vec<f64> = (0..op.n()).map(|i| g.node_coords(i)[0]).collect();
        assert!((op.stiffness.quad_form(&u) - g.volume()).abs() < 1e-12);
        // u = t: |X t|^2 + |Y t|^2 = (y^2 + x^2) / 4, integral over the box
        let u: Vec<f64> = (0..op.n()).map(|i| g.node_coords(i)[2]).collect();
        let exact = 0.5 * (1.0 / 3.0 + 1.0 / 3.0) / 4.0;
        assert!((op.stiffness.quad_form(&u) - exact).abs() < 1e-12);
        let gr = g.clone().riemannian(true);
        let op = assemble_sub_laplacian(&gr).unwrap();
        assert!((op.stiffness.quad_form(&u) - exact - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(BoxGrid::heisenberg(1, vec![1.0, 1.0, 1.0], vec![4, 8, 8]).is_err());
        assert!(BoxGrid::heisenberg(1, vec![1.0, 0.0, 1.0], vec![8, 8, 8]).is_err());
        assert!(BoxGrid::heisenberg(1, vec![1.0, 1.0], vec![8, 8]).is_err());
    }

    #[test]
    fn conformal_constant_scales() {
        let g = small();
        let base = assemble_sub_laplacian(&g).unwrap();
        let phi = ConformalFactor::constant(4.0, g.node_count(), 4).unwrap();
        let op = assemble_conformal(&g, Some(&phi)).unwrap();
        for (a, b) in op.mass.iter().zip(&base.mass) {
            assert_eq!(*a, 16.0 * b);
        }
        let u: Vec<f64> = (0..g.node_count()).map(|i| (i as f64 * 0.37).sin()).collect();
        let r = op.stiffness.quad_form(&u) / base.stiffness.quad_form(&u);
        assert!((r - 4.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_samples_integrate_energy() {
        let g = small();
        let op = assemble_sub_laplacian(&g).unwrap();
        let u: Vec<f64> = (0..g.node_count()).map(|i| {
            let c = g.node_coords(i);
            (2.0 * c[0]).sin() + c[1] * c[2]
        }).collect();
        let e: f64 = horizontal_gradient_samples(&g, &u).unwrap().iter().map(|(s, w)| s * s * w).sum();
        assert!((e - op.stiffness.quad_form(&u)).abs() < 1e-10 * e);
    }
}
