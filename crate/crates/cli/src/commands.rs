use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter};
use std::path::Path;

use serde_json::json;
use subspec::carnot::{CorankOneGroup, GroupElement};
use subspec::decomposition::{
    build_annulus_test_function, certify_counting_bound, decompose_global, decompose_local, smooth_random_factor,
    verify_decomposition, Annulus, DecompositionKind, MetricMeasureSpace, PointMetric,
};
use subspec::io::write_operator;
use subspec::metric::DistanceOracle;
use subspec::popp::{calibrate_prefactor, unit_ball_integral};
use subspec::spectra::{
    assemble_conformal, counting_samples, eigen_smallest_with, log_grid, sphere_spectrum, weyl_fit, BoxGrid,
    EigenOptions, SpectrumResult,
};

use crate::config::Params;
use crate::error::CliError;
use crate::output::{float, Artifact, Format, Table};

pub fn default_format(command: &str) -> Format {
    match command {
        "sphere-spectrum" => Format::Csv,
        _ => Format::Json,
    }
}

pub fn run(p: &Params) -> Result<Artifact, CliError> {
    match p.command {
        "volume" => volume(p),
        "sphere-spectrum" => sphere(p),
        "assemble-solve" => assemble_solve(p),
        "decompose" => decompose(p),
        "certify" => certify(p),
        "weyl-fit" => weyl(p),
        "verify-suite" => crate::suites::run(p),
        other => Err(CliError::invalid(format!("unknown command {other}"))),
    }
}

fn volume(p: &Params) -> Result<Artifact, CliError> {
    let ell = p.usize("ell", Some(1))?;
    let b = p.floats("b", Some(vec![1.0; ell]))?;
    let samples = p.usize("samples", Some(400_000))?;
    let integral = unit_ball_integral(ell, &b)?;
    let cal = calibrate_prefactor(ell, samples, p.seed())?;
    Ok(Artifact::json(json!({
        "integral": integral.value,
        "terms": integral.terms,
        "quadrature_error": integral.quadrature_error,
        "prefactor": cal.prefactor,
        "volume": cal.prefactor * integral.value,
        "calibration": {
            "samples": cal.volume.sample_count,
            "unit_ball_volume": cal.volume.volume_estimate,
            "standard_error": cal.volume.standard_error,
        },
    })))
}

fn sphere(p: &Params) -> Result<Artifact, CliError> {
    let ell = p.usize("ell", Some(1))?;
    let lmax = p.f64("lmax", Some(20.0))?;
    let entries = sphere_spectrum(ell, lmax)?;
    let mut table = Table::new(vec!["p", "q", "eigenvalue", "multiplicity"]);
    for e in &entries {
        table.rows.push(vec![e.p.to_string(), e.q.to_string(), e.eigenvalue.to_string(), e.multiplicity.to_string()]);
    }
    let total: u64 = entries.iter().map(|e| e.multiplicity).sum();
    Ok(Artifact {
        result: json!({ "entries": entries, "total_multiplicity": total }),
        table: Some(table),
        verified: true,
    })
}

/// Single values broadcast to every axis.
fn per_axis<T: Clone>(v: Vec<T>, d: usize) -> Vec<T> {
    if v.len() == 1 {
        vec![v[0].clone(); d]
    } else {
        v
    }
}

fn grid(p: &Params) -> Result<BoxGrid, CliError> {
    let ell = p.usize("ell", Some(1))?;
    let d = 2 * ell + 1;
    let lengths = per_axis(p.floats("lengths", Some(vec![1.0]))?, d);
    let nodes = per_axis(p.ints("nodes", Some(vec![16]))?, d);
    let b = p.floats("b", Some(vec![1.0; ell]))?;
    Ok(BoxGrid::heisenberg(ell, lengths, nodes)?.with_b(b)?)
}

fn eigen_options(p: &Params) -> Result<EigenOptions, CliError> {
    Ok(EigenOptions {
        tol: p.f64("tol", Some(EigenOptions::default().tol))?,
        seed: p.seed(),
        ..Default::default()
    })
}

fn spectrum_table(s: &SpectrumResult) -> Table {
    let mut t = Table::new(vec!["index", "eigenvalue", "residual"]);
    for (i, (l, r)) in s.eigenvalues.iter().zip(&s.residuals).enumerate() {
        t.rows.push(vec![i.to_string(), float(*l), float(*r)]);
    }
    t
}

fn assemble_solve(p: &Params) -> Result<Artifact, CliError> {
    let g = grid(p)?.riemannian(p.bool("riemannian", false)?);
    let phi = if p.bool("conformal", false)? {
        Some(smooth_random_factor(&g, 0.5, 2.0, p.seed())?)
    } else {
        None
    };
    let op = assemble_conformal(&g, phi.as_ref())?;
    let k = p.usize("k", Some(10))?;
    let spec = eigen_smallest_with(&op, k, &eigen_options(p)?)?;
    if let Some(dir) = p.opt_string("export") {
        let dir = Path::new(&dir);
        std::fs::create_dir_all(dir)?;
        let mut a = BufWriter::new(File::create(dir.join("stiffness.mtx"))?);
        let mut m = BufWriter::new(File::create(dir.join("mass.mtx"))?);
        write_operator(&mut a, &mut m, &op)?;
    }
    Ok(Artifact {
        result: json!({
            "unknowns": op.n(),
            "volume": op.volume(),
            "k_requested": spec.k_requested,
            "k_converged": spec.k_converged,
            "eigenvalues": spec.eigenvalues,
            "residuals": spec.residuals,
        }),
        table: Some(spectrum_table(&spec)),
        verified: true,
    })
}

fn decompose(p: &Params) -> Result<Artifact, CliError> {
    let space = match p.opt_string("input") {
        Some(path) if path.ends_with(".bin") => MetricMeasureSpace::read_binary(&path)?,
        Some(path) => {
            let metric = match p.string("metric", Some("euclidean"))?.as_str() {
                "euclidean" => PointMetric::Euclidean,
                "heisenberg" => {
                    let ell = p.usize("ell", Some(1))?;
                    PointMetric::Carnot(DistanceOracle::new(CorankOneGroup::heisenberg(ell)?))
                }
                other => return Err(CliError::invalid(format!("unknown metric {other:?}"))),
            };
            MetricMeasureSpace::read_csv(&path, &metric)?
        }
        None => {
            let ell = p.usize("ell", Some(1))?;
            let o = DistanceOracle::new(CorankOneGroup::heisenberg(ell)?);
            let n = p.usize("sample_size", Some(1000))?;
            let r = p.f64("radius", Some(1.0))?;
            MetricMeasureSpace::sample_group_ball(&o, &GroupElement::identity(ell), r, n, (0.5, 1.5), p.seed())?
        }
    };
    let k = p.usize("k", Some(8))?;
    let res = if p.bool("local", false)? {
        decompose_local(&space, k)?
    } else {
        decompose_global(&space, k)?
    };
    let report = verify_decomposition(&space, &res);
    let mut table = Table::new(vec!["set", "kind", "center", "r", "R", "size", "mass"]);
    match res.kind {
        DecompositionKind::Annuli => {
            for (i, a) in res.annuli.iter().enumerate() {
                table.rows.push(vec![
                    i.to_string(),
                    "annulus".into(),
                    space.ids[a.center].clone(),
                    float(a.r),
                    float(a.big_r),
                    a.members(&space).len().to_string(),
                    float(res.masses[i]),
                ]);
            }
        }
        DecompositionKind::SeparatedDomains => {
            for (i, d) in res.domains.iter().enumerate() {
                table.rows.push(vec![
                    i.to_string(),
                    "domain".into(),
                    String::new(),
                    String::new(),
                    String::new(),
                    d.len().to_string(),
                    float(res.masses[i]),
                ]);
            }
        }
    }
    Ok(Artifact {
        result: json!({ "points": space.len(), "decomposition": res, "verification": report }),
        table: Some(table),
        verified: report.valid,
    })
}

/// Centers of a regular lattice of at least k cells; the first k are used.
fn lattice_balls(g: &BoxGrid, k: usize, radius: f64) -> Result<Vec<Annulus>, CliError> {
    let d = g.dim();
    let m = (1..).find(|m: &usize| m.pow(d as u32) >= k).expect("finite");
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let mut idx = i;
        let target: Vec<f64> = (0..d)
            .map(|a| {
                let j = idx % m;
                idx /= m;
                g.origin[a] + g.lengths[a] * (j as f64 + 0.5) / m as f64
            })
            .collect();
        let dist = |n: usize| -> f64 { g.node_coords(n).iter().zip(&target).map(|(x, y)| (x - y).powi(2)).sum() };
        let node = (0..g.node_count()).min_by(|&a, &b| dist(a).total_cmp(&dist(b))).expect("grid has nodes");
        out.push(Annulus::new(node, 0.0, radius)?);
    }
    Ok(out)
}

fn certify(p: &Params) -> Result<Artifact, CliError> {
    let g = grid(p)?;
    let phi = if p.bool("conformal", false)? {
        Some(smooth_random_factor(&g, 0.5, 2.0, p.seed())?)
    } else {
        None
    };
    let op = assemble_conformal(&g, phi.as_ref())?;
    let k = p.usize("k", Some(8))?;
    let radius = p.f64("radius", Some(0.1))?;
    let balls = lattice_balls(&g, k, radius)?;
    let funcs = balls
        .iter()
        .map(|a| build_annulus_test_function(&g, a))
        .collect::<Result<Vec<_>, _>>()?;
    // without an explicit threshold, certify just above the projected pencil maximum
    let lambda = match p.opt_f64("lambda") {
        Some(l) => l,
        None => 1.2 * certify_counting_bound(&op, &funcs, 1.0)?.pencil_max,
    };
    let cert = certify_counting_bound(&op, &funcs, lambda)?;
    let mut result = json!({ "certificate": cert, "centers": balls });
    let mut verified = true;
    if p.bool("confirm", true)? {
        let spec = eigen_smallest_with(&op, k, &eigen_options(p)?)?;
        verified = cert.confirmed_by(&spec);
        result["confirmation"] = json!({ "eigenvalues": spec.eigenvalues, "confirmed": verified });
    }
    Ok(Artifact { result, table: None, verified })
}

/// Eigenvalues from a CSV with an `eigenvalue` column, or a single column.
fn read_spectrum(path: &str) -> Result<Vec<f64>, CliError> {
    let lines: Vec<String> = BufReader::new(File::open(path)?)
        .lines()
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
        .collect();
    let body = lines.join("\n");
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let mut col = 0;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::invalid(format!("{path}: {e}")))?;
        if i == 0 && rec.get(col).map_or(true, |f| f.parse::<f64>().is_err()) {
            col = match rec.iter().position(|h| h == "eigenvalue") {
                Some(c) => c,
                None if rec.len() == 1 => 0,
                None => return Err(CliError::invalid(format!("{path}: no eigenvalue column"))),
            };
            continue;
        }
        let f = rec.get(col).ok_or_else(|| CliError::invalid(format!("{path}: row {} is short", i + 1)))?;
        out.push(f.parse().map_err(|_| CliError::invalid(format!("{path}: bad eigenvalue {f:?}")))?);
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

fn weyl(p: &Params) -> Result<Artifact, CliError> {
    let points = p.usize("grid_points", Some(40))?;
    let fit_on = |levels: &dyn Fn(&[f64]) -> Vec<(f64, f64)>, lo: f64, hi: f64| -> Result<Artifact, CliError> {
        let lo = p.opt_f64("lambda_lo").unwrap_or(lo);
        let hi = p.opt_f64("lambda_hi").unwrap_or(hi);
        let samples = levels(&log_grid(lo, hi, points)?);
        let fit = weyl_fit(&samples)?;
        let mut table = Table::new(vec!["lambda", "count"]);
        for (l, n) in &samples {
            table.rows.push(vec![float(*l), float(*n)]);
        }
        Ok(Artifact {
            result: json!({ "fit": fit, "lambda_lo": lo, "lambda_hi": hi, "samples": samples }),
            table: Some(table),
            verified: true,
        })
    };
    match p.string("source", Some("grid"))?.as_str() {
        "grid" => {
            let g = grid(p)?.riemannian(p.bool("riemannian", false)?);
            let k = p.usize("k", Some(60))?;
            if k < 4 {
                return Err(CliError::invalid("weyl-fit needs k >= 4"));
            }
            let spec = eigen_smallest_with(&assemble_conformal(&g, None)?, k, &eigen_options(p)?)?;
            let ev = &spec.eigenvalues;
            let lo = ev[(k / 15).max(2) - 1];
            fit_on(&|grid| counting_samples(&spec, grid), lo, ev[k - 1])
        }
        "sphere" => {
            let ell = p.usize("ell", Some(1))?;
            let lmax = p.f64("lmax", Some(400.0))?;
            let sp = sphere_spectrum(ell, lmax)?;
            fit_on(&|grid| counting_samples(&sp, grid), 2.0 * ell as f64, lmax)
        }
        "file" => {
            let ev = read_spectrum(&p.string("input", None)?)?;
            let top = ev.last().copied().unwrap_or(0.0);
            let lo = ev.iter().copied().find(|&l| l > 1e-9 * top).unwrap_or(0.0);
            fit_on(&|grid| counting_samples(&ev, grid), lo, top)
        }
        other => Err(CliError::invalid(format!("unknown source {other:?}; expected grid, sphere or file"))),
    }
}

