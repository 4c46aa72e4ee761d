//! Named verification suites. Each check reports its measured values; the
//! suite fails (exit 1) when any check does.

use std::f64::consts::PI;

use serde_json::{json, Value as Json};
use subspec::carnot::GroupElement;
use subspec::metric::{doubling_ratio, DistanceOracle};
use subspec::popp::{calibrate_prefactor, omega_kappa, unit_ball_integral};
use subspec::spectra::{
    bidegree_dimension, counting_samples, eigen_smallest, harmonic_dimension_brute_force, interval_neumann, log_grid,
    sphere_spectrum, weyl_fit,
};

use crate::config::Params;
use crate::error::CliError;
use crate::output::Artifact;

struct Check {
    name: &'static str,
    pass: bool,
    values: Json,
}

fn check(name: &'static str, pass: bool, values: Json) -> Check {
    Check { name, pass, values }
}

fn slope_of<S: subspec::spectra::Counting + ?Sized>(s: &S, lo: f64, hi: f64) -> Result<f64, CliError> {
    Ok(weyl_fit(&counting_samples(s, &log_grid(lo, hi, 40)?))?.slope)
}

fn weyl() -> Result<Vec<Check>, CliError> {
    let synthetic: Vec<(f64, f64)> = log_grid(1.0, 1e4, 40)?.into_iter().map(|l| (l, l * l)).collect();
    let s0 = weyl_fit(&synthetic)?.slope;
    let s1 = slope_of(&sphere_spectrum(1, 400.0)?, 4.0, 400.0)?;
    let interval = eigen_smallest(&interval_neumann(400, 1.0)?, 60)?;
    let ev = &interval.eigenvalues;
    let s2 = slope_of(&interval, ev[5], ev[59])?;
    Ok(vec![
        check("power_law_recovered", (s0 - 2.0).abs() < 1e-6, json!({ "slope": s0, "expected": 2.0 })),
        check("sphere_counting_slope", (1.85..=2.15).contains(&s1), json!({ "slope": s1, "band": [1.85, 2.15] })),
        check("interval_counting_slope", (0.45..=0.55).contains(&s2), json!({ "slope": s2, "band": [0.45, 0.55] })),
    ])
}

fn sphere() -> Result<Vec<Check>, CliError> {
    let mut identity_ok = true;
    let mut dims_ok = true;
    for ell in 1..=2usize {
        for e in sphere_spectrum(ell, 200.0)?.iter().filter(|e| e.p + e.q <= 8) {
            let (p, q, l) = (e.p as i64, e.q as i64, ell as i64);
            identity_ok &= e.eigenvalue as i64 + (p - q).pow(2) == (p + q) * (2 * l + p + q);
        }
        for k in 0..=8u32 {
            let total = (0..=k).map(|p| bidegree_dimension(ell, p, k - p)).sum::<Result<u64, _>>()?;
            dims_ok &= total == harmonic_dimension_brute_force(2 * ell + 2, k)?;
        }
    }
    Ok(vec![
        check("eigenvalue_identity", identity_ok, json!({ "ell": [1, 2], "max_degree": 8 })),
        check("bidegree_dimensions_sum", dims_ok, json!({ "ell": [1, 2], "max_degree": 8 })),
    ])
}

fn volume(samples: usize, seed: u64) -> Result<Vec<Check>, CliError> {
    let cal = calibrate_prefactor(1, samples, seed)?;
    let v = cal.prefactor * unit_ball_integral(1, &[1.0])?.value;
    let w = omega_kappa(0.0, 1.0)?.value;
    let rel = (v / w - 1.0).abs();
    let mut worst: f64 = 0.0;
    for ell in 1..=4 {
        let r = unit_ball_integral(ell, &vec![1.0; ell])?;
        worst = worst.max(r.terms.iter().fold(0.0, |m: f64, t| m.max(t.abs())) / (PI.exp() * PI));
    }
    Ok(vec![
        check("calibrated_volume_matches_flat_model", rel < 0.03, json!({ "calibrated": v, "model": w, "relative": rel })),
        check("unit_ball_terms_bounded", worst <= 1.0, json!({ "max_term_over_bound": worst })),
    ])
}

fn doubling(samples: usize, seed: u64) -> Result<Vec<Check>, CliError> {
    let o = DistanceOracle::new(subspec::carnot::CorankOneGroup::heisenberg(1)?);
    let e = GroupElement::identity(1);
    let ratios = [0.25, 0.5, 1.0]
        .iter()
        .enumerate()
        .map(|(i, &r)| doubling_ratio(&o, &e, r, samples, seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<f64>, _>>()?;
    let ok = ratios.iter().all(|q| (15.2..=16.8).contains(q));
    Ok(vec![check("doubling_ratio_near_sixteen", ok, json!({ "radii": [0.25, 0.5, 1.0], "ratios": ratios }))])
}

pub fn run(p: &Params) -> Result<Artifact, CliError> {
    let name = p.string("name", None)?;
    let checks = match name.as_str() {
        "weyl" => weyl()?,
        "sphere" => sphere()?,
        "volume" => volume(p.usize("samples", Some(400_000))?, p.seed())?,
        "doubling" => doubling(p.usize("samples", Some(200_000))?, p.seed())?,
        other => {
            return Err(CliError::invalid(format!(
                "unknown suite {other:?}; expected weyl, sphere, volume or doubling"
            )))
        }
    };
    let passed = checks.iter().all(|c| c.pass);
    let list: Vec<Json> = checks
        .iter()
        .map(|c| json!({ "name": c.name, "pass": c.pass, "values": c.values }))
        .collect();
    Ok(Artifact {
        result: json!({ "suite": name, "checks": list, "passed": passed }),
        table: None,
        verified: passed,
    })
}
