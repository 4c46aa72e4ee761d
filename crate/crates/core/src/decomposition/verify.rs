//! Contract check for decomposition output, written against the raw distance
//! matrix only so it does not inherit mistakes of the constructor.

use serde::Serialize;

use crate::decomposition::annulus::{DecompositionKind, DecompositionResult};
use crate::decomposition::space::MetricMeasureSpace;

/// Relative slack on the mass bound, for the rounding of summed weights.
const MASS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub valid: bool,
    pub violations: Vec<String>,
    /// Masses recomputed from the distance matrix.
    pub masses: Vec<f64>,
}

fn in_annulus(d: f64, r: f64, big_r: f64) -> bool {
    d >= r && d < big_r
}

fn in_double(d: f64, r: f64, big_r: f64) -> bool {
    d >= r / 2.0 && d < big_r * 2.0
}

pub fn verify_decomposition(space: &MetricMeasureSpace, res: &DecompositionResult) -> VerificationReport {
    let n = space.len();
    let mu: f64 = space.weights.iter().sum();
    let mut v = Vec::new();
    if res.k == 0 {
        v.push("k is zero".to_string());
    }
    if !(res.achieved_c > 0.0 && res.achieved_c.is_finite()) {
        v.push(format!("achieved_c = {} is not positive", res.achieved_c));
    }

    let mut masses = Vec::new();
    match res.kind {
        DecompositionKind::Annuli => {
            if res.annuli.len() != res.k {
                v.push(format!("{} annuli for k = {}", res.annuli.len(), res.k));
            }
            let mut doubles: Vec<Vec<bool>> = Vec::new();
            for (i, a) in res.annuli.iter().enumerate() {
                if a.center >= n {
                    v.push(format!("annulus {i}: center {} out of range", a.center));
                    doubles.push(vec![false; n]);
                    masses.push(0.0);
                    continue;
                }
                if !(a.r >= 0.0 && a.big_r > a.r && a.big_r.is_finite()) {
                    v.push(format!("annulus {i}: radii r = {}, R = {} out of order", a.r, a.big_r));
                }
                if let Some(cap) = res.outer_cap {
                    if a.big_r * 2.0 > cap {
                        v.push(format!("annulus {i}: doubled outer radius {} above {cap}", 2.0 * a.big_r));
                    }
                }
                let mut m = 0.0;
                let mut dbl = vec![false; n];
                for (j, slot) in dbl.iter_mut().enumerate() {
                    let d = space.dist(a.center, j);
                    if in_annulus(d, a.r, a.big_r) {
                        m += space.weight(j);
                    }
                    *slot = in_double(d, a.r, a.big_r);
                }
                masses.push(m);
                doubles.push(dbl);
            }
            for i in 0..doubles.len() {
                for j in i + 1..doubles.len() {
                    if let Some(p) = (0..n).find(|&p| doubles[i][p] && doubles[j][p]) {
                        v.push(format!("doubled annuli {i} and {j} share point {p}"));
                    }
                }
            }
        }
        DecompositionKind::SeparatedDomains => {
            if res.domains.len() != res.k {
                v.push(format!("{} domains for k = {}", res.domains.len(), res.k));
            }
            let rho = match res.rho {
                Some(r) if r > 0.0 => r,
                _ => {
                    v.push("domain decomposition without a positive rho".to_string());
                    0.0
                }
            };
            let mut owner = vec![usize::MAX; n];
            for (i, d) in res.domains.iter().enumerate() {
                let mut m = 0.0;
                for &p in d {
                    if p >= n {
                        v.push(format!("domain {i}: point {p} out of range"));
                        continue;
                    }
                    if owner[p] != usize::MAX {
                        v.push(format!("point {p} lies in domains {} and {i}", owner[p]));
                    }
                    owner[p] = i;
                    m += space.weight(p);
                }
                masses.push(m);
            }
            // rho-neighbourhoods of D_i and D_j meet only if some pair is
            // closer than 2 rho
            'outer: for p in 0..n {
                if owner[p] == usize::MAX {
                    continue;
                }
                for q in p + 1..n {
                    if owner[q] != usize::MAX && owner[q] != owner[p] && space.dist(p, q) < 2.0 * rho {
                        v.push(format!(
                            "domains {} and {} are {} apart, below 2 rho",
                            owner[p],
                            owner[q],
                            space.dist(p, q)
                        ));
                        break 'outer;
                    }
                }
            }
        }
    }

    let bound = res.achieved_c * mu / res.k.max(1) as f64;
    for (i, &m) in masses.iter().enumerate() {
        if m < bound * (1.0 - MASS_SLACK) {
            v.push(format!("set {i} has mass {m}, below achieved_c mu/k = {bound}"));
        }
    }
    VerificationReport {
        valid: v.is_empty(),
        violations: v,
        masses,
    }
}
