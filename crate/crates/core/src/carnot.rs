//! Graded nilpotent Lie algebras and corank-1 Carnot groups.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest algebra dimension accepted by the dense structure-constant table.
pub const MAX_DENSE_DIM: usize = 16;

const STRUCTURE_TOL: f64 = 1e-12;

/// Graded Lie algebra g_1 + ... + g_r with a dense table of structure constants.
///
/// Basis vectors are ordered layer by layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedLieAlgebra {
    layer_dims: Vec<usize>,
    // c[(i * d + j) * d + k] = c^k_{ij}
    constants: Vec<f64>,
}

impl GradedLieAlgebra {
    /// Builds an algebra after checking grading, antisymmetry and the Jacobi identity.
    pub fn new(layer_dims: Vec<usize>, constants: Vec<f64>) -> Result<Self> {
        if layer_dims.is_empty() || layer_dims.iter().any(|&n| n == 0) {
            return Err(Error::invalid("layer dimensions must be positive"));
        }
        let d: usize = layer_dims.iter().sum();
        if d > MAX_DENSE_DIM {
            return Err(Error::invalid(format!(
                "algebra dimension {d} exceeds dense limit {MAX_DENSE_DIM}"
            )));
        }
        if constants.len() != d * d * d {
            return Err(Error::invalid(format!(
                "expected {} structure constants, got {}",
                d * d * d,
                constants.len()
            )));
        }
        if constants.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("structure constants must be finite"));
        }
        let alg = GradedLieAlgebra {
            layer_dims,
            constants,
        };
        alg.check_grading()?;
        alg.check_antisymmetry()?;
        let defect = alg.jacobi_defect();
        let scale = alg.constants.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        if defect > STRUCTURE_TOL * scale * scale {
            return Err(Error::invalid(format!(
                "Jacobi identity violated (defect {defect:e})"
            )));
        }
        Ok(alg)
    }

    /// Abelian algebra concentrated in the first layer.
    pub fn abelian(n: usize) -> Result<Self> {
        Self::new(vec![n], vec![0.0; n * n * n])
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn dim(&self) -> usize {
        self.layer_dims.iter().sum()
    }

    pub fn step(&self) -> usize {
        self.layer_dims.len()
    }

    /// Layer (1-based) containing basis vector `i`.
    pub fn layer_of(&self, i: usize) -> usize {
        let mut acc = 0;
        for (l, &n) in self.layer_dims.iter().enumerate() {
            acc += n;
            if i < acc {
                return l + 1;
            }
        }
        panic!("basis index {i} out of range");
    }

    /// c^k_{ij}
    pub fn constant(&self, i: usize, j: usize, k: usize) -> f64 {
        let d = self.dim();
        self.constants[(i * d + j) * d + k]
    }

    /// Coordinates of [e_i, e_j].
    pub fn bracket(&self, i: usize, j: usize) -> Vec<f64> {
        let d = self.dim();
        self.constants[(i * d + j) * d..(i * d + j + 1) * d].to_vec()
    }

    /// Hausdorff dimension sum_i i * dim(g_i).
    pub fn hausdorff_dimension(&self) -> usize {
        // cumulative filtration dims H^1 <= H^2 <= ...
        let mut prev = 0;
        let mut q = 0;
        for (i, &n) in self.layer_dims.iter().enumerate() {
            let cum = prev + n;
            q += (i + 1) * (cum - prev);
            prev = cum;
        }
        q
    }

    /// Largest absolute Jacobi residual over all basis triples.
    pub fn jacobi_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let mut s = 0.0;
                        for m in 0..d {
                            s += self.constant(i, j, m) * self.constant(m, k, l)
                                + self.constant(j, k, m) * self.constant(m, i, l)
                                + self.constant(k, i, m) * self.constant(m, j, l);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    fn check_grading(&self) -> Result<()> {
        let d = self.dim();
        let r = self.step();
        for i in 0..d {
            for j in 0..d {
                let target = self.layer_of(i) + self.layer_of(j);
                for k in 0..d {
                    let c = self.constant(i, j, k);
                    if c != 0.0 && (target > r || self.layer_of(k) != target) {
                        return Err(Error::invalid(format!(
                            "bracket [e{i}, e{j}] has a component outside layer {target}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_antisymmetry(&self) -> Result<()> {
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let a = self.constant(i, j, k);
                    let b = self.constant(j, i, k);
                    if (a + b).abs() > STRUCTURE_TOL * (1.0 + a.abs()) {
                        return Err(Error::invalid(format!(
                            "c^{k}_({i},{j}) is not antisymmetric"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Free-function form of [`GradedLieAlgebra::hausdorff_dimension`].
pub fn hausdorff_dimension(algebra: &GradedLieAlgebra) -> usize {
    algebra.hausdorff_dimension()
}

/// Step-2 group with brackets [X_i, Y_i] = -b_i Z, optionally times a line
/// spanned by a transversal horizontal vector T.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorankOneGroup {
    b: Vec<f64>,
    has_transversal_t: bool,
}

/// Point in exponential coordinates. `w` is the coordinate along T and must
/// stay zero on groups without a transversal direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: f64,
    pub w: f64,
}

impl GroupElement {
    pub fn new(x: Vec<f64>, y: Vec<f64>, z: f64) -> Self {
        GroupElement { x, y, z, w: 0.0 }
    }

    pub fn identity(ell: usize) -> Self {
        GroupElement::new(vec![0.0; ell], vec![0.0; ell], 0.0)
    }

    /// Heisenberg H^1 point.
    pub fn h1(x: f64, y: f64, z: f64) -> Self {
        GroupElement::new(vec![x], vec![y], z)
    }

    pub fn ell(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.z.is_finite()
            && self.w.is_finite()
            && self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }

    /// Flat coordinates (x_1.., y_1.., [w], z).
    pub fn to_coords(&self, with_w: bool) -> Vec<f64> {
        let mut v = self.x.clone();
        v.extend_from_slice(&self.y);
        if with_w {
            v.push(self.w);
        }
        v.push(self.z);
        v
    }

    pub fn max_abs_diff(&self, other: &GroupElement) -> f64 {
        let mut m = (self.z - other.z).abs().max((self.w - other.w).abs());
        for (a, b) in self.x.iter().zip(&other.x).chain(self.y.iter().zip(&other.y)) {
            m = m.max((a - b).abs());
        }
        m
    }
}

impl CorankOneGroup {
    /// Rescales `b` so that its largest entry is 1.
    pub fn new(b: Vec<f64>, has_transversal_t: bool) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::invalid("need at least one (X, Y) pair"));
        }
        if b.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::invalid("bracket coefficients must be positive and finite"));
        }
        let max = b.iter().cloned().fold(0.0, f64::max);
        let b = b.into_iter().map(|v| if v == max { 1.0 } else { v / max }).collect();
        Ok(CorankOneGroup {
            b,
            has_transversal_t,
        })
    }

    /// Standard Heisenberg group H^ell (b = 1).
    pub fn heisenberg(ell: usize) -> Result<Self> {
        Self::new(vec![1.0; ell], false)
    }

    pub fn ell(&self) -> usize {
        self.b.len()
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn has_transversal_t(&self) -> bool {
        self.has_transversal_t
    }

    /// Topological dimension.
    pub fn dim(&self) -> usize {
        2 * self.ell() + 1 + usize::from(self.has_transversal_t)
    }

    pub fn hausdorff_dimension(&self) -> usize {
        2 * self.ell() + 2 + usize::from(self.has_transversal_t)
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement::identity(self.ell())
    }

    pub fn check(&self, q: &GroupElement) -> Result<()> {
        if q.x.len() != self.ell() || q.y.len() != self.ell() {
            return Err(Error::invalid(format!(
                "element has {}/{} horizontal coordinates, group has ell = {}",
                q.x.len(),
                q.y.len(),
                self.ell()
            )));
        }
        if !self.has_transversal_t && q.w != 0.0 {
            return Err(Error::invalid("w coordinate set on a group without T"));
        }
        Ok(())
    }

    pub fn multiply(&self, q: &GroupElement, p: &GroupElement) -> Result<GroupElement> {
        self.check(q)?;
        self.check(p)?;
        let mut area = 0.0;
        for i in 0..self.ell() {
            area += self.b[i] * (q.x[i] * p.y[i] - q.y[i] * p.x[i]);
        }
        Ok(GroupElement {
            x: q.x.iter().zip(&p.x).map(|(a, b)| a + b).collect(),
            y: q.y.iter().zip(&p.y).map(|(a, b)| a + b).collect(),
            z: q.z + p.z - 0.5 * area,
            w: q.w + p.w,
        })
    }

    pub fn inverse(&self, q: &GroupElement) -> GroupElement {
        GroupElement {
            x: q.x.iter().map(|v| -v).collect(),
            y: q.y.iter().map(|v| -v).collect(),
            z: -q.z,
            w: -q.w,
        }
    }

    /// q^{-1} p
    pub fn relative(&self, q: &GroupElement, p: &GroupElement) -> Result<GroupElement> {
        self.multiply(&self.inverse(q), p)
    }

    /// Dilation D_t: weight 1 on horizontal coordinates, weight 2 on z.
    pub fn dilate(&self, t: f64, q: &GroupElement) -> Result<GroupElement> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!("dilation factor must be positive, got {t}")));
        }
        self.check(q)?;
        Ok(GroupElement {
            x: q.x.iter().map(|v| t * v).collect(),
            y: q.y.iter().map(|v| t * v).collect(),
            z: t * t * q.z,
            w: t * q.w,
        })
    }

    /// Lie algebra with basis X_1..X_l, Y_1..Y_l, [T], Z.
    pub fn algebra_of(&self) -> GradedLieAlgebra {
        let l = self.ell();
        let h = 2 * l + usize::from(self.has_transversal_t);
        let d = h + 1;
        let mut c = vec![0.0; d * d * d];
        let z = h;
        for i in 0..l {
            let (xi, yi) = (i, l + i);
            c[(xi * d + yi) * d + z] = -self.b[i];
            c[(yi * d + xi) * d + z] = self.b[i];
        }
        GradedLieAlgebra::new(vec![h, 1], c).expect("corank-one brackets are a valid step-2 algebra")
    }
}

/// Free-function form of [`CorankOneGroup::multiply`].
pub fn group_multiply(g: &CorankOneGroup, q: &GroupElement, p: &GroupElement) -> Result<GroupElement> {
    g.multiply(q, p)
}

/// Free-function form of [`CorankOneGroup::dilate`].
pub fn dilate(g: &CorankOneGroup, t: f64, q: &GroupElement) -> Result<GroupElement> {
    g.dilate(t, q)
}

/// Free-function form of [`CorankOneGroup::algebra_of`].
pub fn algebra_of(g: &CorankOneGroup) -> GradedLieAlgebra {
    g.algebra_of()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn commutator(g: &CorankOneGroup, a: &GroupElement, b: &GroupElement) -> GroupElement {
        let ab = g.multiply(a, b).unwrap();
        let ai = g.inverse(a);
        let bi = g.inverse(b);
        g.multiply(&g.multiply(&ab, &ai).unwrap(), &bi).unwrap()
    }

    #[test]
    fn hausdorff_examples() {
        let h1 = CorankOneGroup::heisenberg(1).unwrap().algebra_of();
        assert_eq!(h1.hausdorff_dimension(), 4);
        assert_eq!(GradedLieAlgebra::abelian(5).unwrap().hausdorff_dimension(), 5);

        // corank-2 step-2: free-ish algebra on 4 generators with two central directions
        let d = 6;
        let mut c = vec![0.0; d * d * d];
        let mut set = |i: usize, j: usize, k: usize, v: f64| {
            c[(i * d + j) * d + k] = v;
            c[(j * d + i) * d + k] = -v;
        };
        set(0, 1, 4, 1.0);
        set(2, 3, 5, 1.0);
        let alg = GradedLieAlgebra::new(vec![4, 2], c).unwrap();
        assert_eq!(alg.hausdorff_dimension(), 8);
    }

    #[test]
    fn identity_and_inverse() {
        let g = CorankOneGroup::new(vec![0.3, 1.0], false).unwrap();
        let q = GroupElement::new(vec![0.4, -1.2], vec![2.0, 0.7], -0.9);
        assert_eq!(g.multiply(&q, &g.identity()).unwrap(), q);
        assert_eq!(g.multiply(&g.identity(), &q).unwrap(), q);
        let e = g.multiply(&q, &g.inverse(&q)).unwrap();
        assert!(e.max_abs_diff(&g.identity()) == 0.0);
    }

    #[test]
    fn commutator_matches_bracket() {
        let g = CorankOneGroup::heisenberg(1).unwrap();
        let a = GroupElement::h1(1.0, 0.0, 0.0);
        let b = GroupElement::h1(0.0, 1.0, 0.0);
        let c = commutator(&g, &a, &b);
        assert_eq!(c, GroupElement::h1(0.0, 0.0, -1.0));
        let alg = g.algebra_of();
        assert_eq!(alg.constant(0, 1, 2), -1.0);
    }

    #[test]
    fn normalization_rescales() {
        let g = CorankOneGroup::new(vec![2.0, 4.0, 1.0], false).unwrap();
        assert_eq!(g.b(), &[0.5, 1.0, 0.25]);
        assert!(CorankOneGroup::new(vec![1.0, 0.0], false).is_err());
        assert!(CorankOneGroup::new(vec![], false).is_err());
    }

    #[test]
    fn dilation_examples() {
        let g = CorankOneGroup::heisenberg(1).unwrap();
        let q = GroupElement::h1(1.0, 0.0, 1.0);
        assert_eq!(g.dilate(1.0, &q).unwrap(), q);
        assert_eq!(g.dilate(2.0, &q).unwrap(), GroupElement::h1(2.0, 0.0, 4.0));
        assert!(g.dilate(0.0, &q).is_err());
        assert!(g.dilate(-1.0, &q).is_err());
    }

    #[test]
    fn transversal_layers() {
        let g = CorankOneGroup::new(vec![1.0, 1.0], true).unwrap();
        let alg = g.algebra_of();
        assert_eq!(alg.layer_dims(), &[5, 1]);
        assert_eq!(alg.hausdorff_dimension(), 7);
        assert_eq!(alg.jacobi_defect(), 0.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let g = CorankOneGroup::heisenberg(2).unwrap();
        let q = GroupElement::h1(1.0, 0.0, 0.0);
        assert!(matches!(g.multiply(&q, &q), Err(Error::InvalidArgument(_))));
        let mut p = g.identity();
        p.w = 1.0;
        assert!(g.multiply(&p, &p).is_err());
    }

    #[test]
    fn rejects_bad_algebras() {
        // [e0, e1] = e0 breaks grading
        let d = 2;
        let mut c = vec![0.0; d * d * d];
        c[(0 * d + 1) * d] = 1.0;
        c[(1 * d) * d] = -1.0;
        assert!(GradedLieAlgebra::new(vec![2], c).is_err());

        // not antisymmetric
        let d = 3;
        let mut c = vec![0.0; d * d * d];
        c[(0 * d + 1) * d + 2] = 1.0;
        assert!(GradedLieAlgebra::new(vec![2, 1], c).is_err());
    }
}
