use serde::Serialize;

use crate::error::{Error, Result};

/// Positive conformal factor sampled on a grid, together with the Hausdorff
/// dimension that fixes its volume weight phi^(Q/2).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConformalFactor {
    values: Vec<f64>,
    q: usize,
}

impl ConformalFactor {
    pub fn new(values: Vec<f64>, q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::invalid("Q must be positive"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("conformal factor must be positive and finite"));
        }
        Ok(ConformalFactor { values, q })
    }

    pub fn constant(c: f64, len: usize, q: usize) -> Result<Self> {
        Self::new(vec![c; len], q)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// phi^(Q/2), exact powers for even Q.
    pub fn volume_weight(&self, i: usize) -> f64 {
        volume_weight(self.values[i], self.q)
    }

    /// Pointwise product, the factor of the metric psi (phi g).
    pub fn compose(&self, other: &ConformalFactor) -> Result<ConformalFactor> {
        if self.len() != other.len() || self.q != other.q {
            return Err(Error::invalid("conformal factors live on different grids"));
        }
        Self::new(self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(), self.q)
    }

    /// Largest ratio between neighbouring samples along a 1D ordering; a cheap
    /// smoothness proxy.
    pub fn max_jump(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| (w[1] / w[0]).ln().abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn volume_weight(phi: f64, q: usize) -> f64 {
    if q % 2 == 0 {
        phi.powi((q / 2) as i32)
    } else {
        phi.powf(0.5 * q as f64)
    }
}

/// Multiplies each cell volume by phi^(Q/2) at the cell sample point.
pub fn conformal_scale_volume(phi: &ConformalFactor, base: &[f64]) -> Result<Vec<f64>> {
    if phi.len() != base.len() {
        return Err(Error::invalid(format!(
            "grid mismatch: {} factor samples for {} cells",
            phi.len(),
            base.len()
        )));
    }
    Ok(base.iter().enumerate().map(|(i, v)| v * phi.volume_weight(i)).collect())
}
