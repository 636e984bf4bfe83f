use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::{num, push_complex, write_csv, write_jsonl, Header};
use grauert::geometry::{MetricModel, PhasePoint};
use grauert::hamiltonian_flow::FlowNode;
use grauert::holomorphic_ext::{self as ext, ExtensionResult};
use grauert::jacobi::lifts;
use grauert::lagrangian::{distribution_straight, j_tensor_from_frame, positivity_check};
use grauert::linalg::{c, I};
use grauert::verify::{self, default_function, disk_breakdown, RadiusEstimate};
use grauert::{sampling, Error, FlowOptions, SigmaPath};
use num_complex::Complex64;
use serde_json::{json, Value};
use std::path::PathBuf;

/// Files written and the process exit code.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub exit: i32,
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

fn header(cfg: &RunConfig, m: &MetricModel, command: &str) -> Header {
    Header { command: command.into(), config_hash: cfg.hash(), model: m.name.clone(), params: m.params_string(), seed: cfg.seed }
}

fn coord_columns(cols: &mut Vec<String>, n: usize) {
    for s in ["q", "p"] {
        for k in 0..n {
            cols.push(format!("{s}{k}_re"));
            cols.push(format!("{s}{k}_im"));
        }
    }
}

fn push_point(row: &mut Vec<String>, z: &PhasePoint) {
    for x in z.q.iter().chain(&z.p) {
        push_complex(row, *x);
    }
}

/// Start point from `[paths]`: chart, base point and velocity (or momentum).
/// Without `v0`/`p0` the velocity is the first vector of the orthonormal frame.
pub fn initial_point(cfg: &RunConfig, m: &MetricModel) -> Result<PhasePoint> {
    let n = m.dim();
    let chart = match &cfg.paths.chart {
        Some(name) => m
            .chart_index(name)
            .ok_or_else(|| CliError::Config(format!("model {} has no chart `{name}`", m.name)))?,
        None => 0,
    };
    let q0 = cfg.paths.q0.clone().unwrap_or_else(|| vec![0.0; n]);
    let check = |what: &str, v: &[f64]| {
        if v.len() != n {
            return Err(CliError::Config(format!("paths.{what} needs {n} entries, got {}", v.len())));
        }
        Ok(())
    };
    check("q0", &q0)?;
    let q: Vec<Complex64> = q0.iter().map(|&x| c(x, 0.0)).collect();
    m.chart(chart).check_margin(&q)?;
    if let Some(p0) = &cfg.paths.p0 {
        check("p0", p0)?;
        return Ok(PhasePoint::real(chart, &q0, p0));
    }
    let v: Vec<Complex64> = match &cfg.paths.v0 {
        Some(v0) => {
            check("v0", v0)?;
            v0.iter().map(|&x| c(x, 0.0)).collect()
        }
        None => m.orthonormal_frame(chart, &q, None)?.column(0).iter().copied().collect(),
    };
    let z = m.phase_from_velocity(chart, &q, &v)?;
    let p: Vec<f64> = z.p.iter().map(|x| x.re).collect();
    Ok(PhasePoint::real(chart, &q0, &p))
}

fn path_points(cfg: &RunConfig) -> Vec<Complex64> {
    cfg.paths.waypoints.iter().chain([&cfg.paths.target]).map(|w| c(w[0], w[1])).collect()
}

fn breakdown_record(last_good: Complex64, radius: Option<f64>, reason: &str) -> Value {
    json!({
        "record": "breakdown",
        "last_good_re": last_good.re,
        "last_good_im": last_good.im,
        "breakdown_radius": radius,
        "reason": reason,
    })
}

/// Trajectory table along the configured σ-path.
pub fn cmd_flow(cfg: &RunConfig) -> Result<Outcome> {
    let m = cfg.model()?;
    let h = header(cfg, &m, "flow");
    let dir = &cfg.output.dir;
    let z0 = initial_point(cfg, &m)?;
    let pts = path_points(cfg);
    let path = SigmaPath::through(&pts)?;
    let reach = path.waypoints().iter().fold(0.0f64, |a, w| a.max(w.norm()));
    let breakdown = |last_good: Complex64, radius: Option<f64>, reason: String| -> Result<Outcome> {
        let f = write_jsonl(dir, "flow_breakdown.jsonl", &h, &[breakdown_record(last_good, radius, &reason)])?;
        Ok(Outcome { exit: 2, files: vec![f], summary: vec![format!("breakdown: {reason}; last good sigma = {last_good}")] })
    };
    if cfg.paths.require_disk && reach > 0.0 {
        if let Some(r) = disk_breakdown(&z0, reach, &m, &cfg.tube_config()) {
            let dir_unit = path.target() / path.target().norm().max(f64::MIN_POSITIVE);
            let reason = format!("flow does not continue over the disk |sigma| <= {}; breakdown radius {r:.6}", num(reach));
            return breakdown(dir_unit * r, Some(r), reason);
        }
    }
    let nodes: Vec<FlowNode> = if path.waypoints().len() == 1 {
        vec![FlowNode { sigma: c(0.0, 0.0), point: z0.clone(), jacobian: None }]
    } else {
        let opts = FlowOptions { dense: cfg.paths.dense, jacobian: false, ..FlowOptions::with_tol(cfg.tol) };
        match grauert::flow(&z0, &path, &m, &opts) {
            Ok(r) => r.nodes,
            Err(Error::Singularity { last_good, reason }) => return breakdown(last_good, None, reason),
            Err(e) => return Err(e.into()),
        }
    };
    let n = m.dim();
    let mut cols: Vec<String> = vec!["sigma_re".into(), "sigma_im".into(), "chart".into()];
    coord_columns(&mut cols, n);
    cols.extend(["E_re".into(), "E_im".into()]);
    let mut rows = Vec::with_capacity(nodes.len());
    let mut drift = 0.0f64;
    let e0 = m.energy(&z0)?;
    for node in &nodes {
        let mut row = Vec::with_capacity(cols.len());
        push_complex(&mut row, node.sigma);
        row.push(m.chart(node.point.chart).name.clone());
        push_point(&mut row, &node.point);
        let e = m.energy(&node.point)?;
        drift = drift.max((e - e0).norm());
        push_complex(&mut row, e);
        rows.push(row);
    }
    let f = write_csv(dir, "flow.csv", &h, &cols, &rows)?;
    Ok(Outcome { exit: 0, files: vec![f], summary: vec![format!("{} nodes, energy drift {}", rows.len(), num(drift))] })
}

/// `J`, `J` in the adapted frame and the Kähler metric at sample points of
/// the tube and of the zero section.
pub fn cmd_jtensor(cfg: &RunConfig) -> Result<Outcome> {
    let m = cfg.model()?;
    let h = header(cfg, &m, "jtensor");
    let n = m.dim();
    let k = cfg.grids.jtensor_points;
    let vc = cfg.verify_config()?;
    let mut points: Vec<(&str, PhasePoint)> =
        sampling::sample_points(&m, k, vc.rho(&m), cfg.seed)?.into_iter().map(|z| ("tube", z)).collect();
    points.extend(sampling::sample_zero_section(&m, k, cfg.seed)?.into_iter().map(|z| ("zero_section", z)));
    let mut cols: Vec<String> = vec!["kind".into(), "chart".into()];
    coord_columns(&mut cols, n);
    for prefix in ["j", "ja", "g"] {
        for r in 0..2 * n {
            for col in 0..2 * n {
                cols.push(format!("{prefix}_{r}{col}"));
            }
        }
    }
    cols.extend(["positivity_min_eig".into(), "metric_min_eig".into(), "square_defect".into()]);
    let mut rows = Vec::new();
    let mut min_pos = f64::INFINITY;
    for (kind, z) in &points {
        let frame = distribution_straight(z, I, &m, cfg.tol)?;
        let j = j_tensor_from_frame(&frame)?;
        let b = grauert::linalg::real_part(&lifts(z, &m, None)?.basis_matrix());
        let binv = b.clone().try_inverse().ok_or_else(|| Error::DegenerateFrame("lift basis is singular".into()))?;
        let adapted = binv * &j.matrix * b;
        let (_, pos) = positivity_check(&frame);
        min_pos = min_pos.min(pos);
        let mut row = vec![kind.to_string(), m.chart(z.chart).name.clone()];
        push_point(&mut row, z);
        for mat in [&j.matrix, &adapted, &j.kahler_metric] {
            for r in 0..2 * n {
                for col in 0..2 * n {
                    row.push(num(mat[(r, col)]));
                }
            }
        }
        row.extend([num(pos), num(j.metric_min_eigenvalue()), num(j.square_defect())]);
        rows.push(row);
    }
    let f = write_csv(&cfg.output.dir, "jtensor.csv", &h, &cols, &rows)?;
    Ok(Outcome { exit: 0, files: vec![f], summary: vec![format!("{} points, smallest positivity eigenvalue {}", rows.len(), num(min_pos))] })
}

/// Series, flow and exponential-map extensions side by side.
pub fn cmd_extend(cfg: &RunConfig) -> Result<Outcome> {
    let m = cfg.model()?;
    let h = header(cfg, &m, "extend");
    let n = m.dim();
    let vc = cfg.verify_config()?;
    let fname = cfg.checks.function.clone().unwrap_or_else(|| default_function(&m.name).to_string());
    let f = ext::function(&m, &fname)?;
    let pts = sampling::sample_points(&m, cfg.grids.samples, vc.rho(&m), cfg.seed)?;
    let mut cols: Vec<String> = vec!["chart".into()];
    coord_columns(&mut cols, n);
    for method in ["series", "flow", "exp_map"] {
        cols.push(format!("{method}_re"));
        cols.push(format!("{method}_im"));
    }
    cols.extend(["series_terms".into(), "max_abs_dev".into(), "notes".into()]);
    let mut rows = Vec::with_capacity(pts.len());
    let mut worst = 0.0f64;
    for z in &pts {
        let results: [(&str, grauert::Result<ExtensionResult>); 3] = [
            ("series", ext::extend_by_series(&f, z, cfg.checks.series_terms, &m)),
            ("flow", ext::extend_by_flow(&f, z, &SigmaPath::straight(I), &m, cfg.tol)),
            ("exp_map", ext::extend_by_exp(&f, z, &m)),
        ];
        let mut row = vec![m.chart(z.chart).name.clone()];
        push_point(&mut row, z);
        let mut notes = Vec::new();
        let mut vals = Vec::new();
        for (name, r) in &results {
            match r {
                Ok(r) => {
                    push_complex(&mut row, r.value);
                    vals.push(r.value);
                }
                Err(e) => {
                    row.extend([String::new(), String::new()]);
                    notes.push(format!("{name}: {e}"));
                }
            }
        }
        let dev = vals.iter().enumerate().flat_map(|(a, x)| vals[a + 1..].iter().map(move |y| (x - y).norm())).fold(0.0f64, f64::max);
        worst = worst.max(dev);
        let terms = results[0].1.as_ref().ok().and_then(|r| r.terms_used).map(|t| t.to_string()).unwrap_or_default();
        row.extend([terms, if vals.len() >= 2 { num(dev) } else { String::new() }, notes.join("; ")]);
        rows.push(row);
    }
    let out = write_csv(&cfg.output.dir, &format!("extend_{fname}.csv"), &h, &cols, &rows)?;
    Ok(Outcome { exit: 0, files: vec![out], summary: vec![format!("{} points of `{fname}`, max deviation {}", rows.len(), num(worst))] })
}

/// The selected verification checks; exit 1 if any fails.
pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome> {
    let m = cfg.model()?;
    let h = header(cfg, &m, "verify");
    let reports = verify::run_checks(&m, &cfg.checks.select, &cfg.verify_config()?)?;
    let mut records = Vec::with_capacity(reports.len());
    let mut summary = Vec::with_capacity(reports.len());
    for r in &reports {
        let verdict = if r.pass { "pass" } else { "fail" };
        summary.push(format!("{:<17} {verdict}  max residual {} (tol {})", r.check, num(r.max_residual), num(r.tolerance)));
        records.push(json!({
            "record": "check",
            "name": r.check,
            "model": r.model,
            "params": r.params,
            "max_residual": r.max_residual,
            "tolerance": r.tolerance,
            "verdict": verdict,
            "n_samples": r.n_samples,
            "worst": r.worst.iter().map(|o| json!({"point": o.point, "residual": o.residual})).collect::<Vec<_>>(),
            "errors": r.errors,
        }));
    }
    let f = write_jsonl(&cfg.output.dir, "verify.jsonl", &h, &records)?;
    let exit = if reports.iter().all(|r| r.pass) { 0 } else { 1 };
    Ok(Outcome { exit, files: vec![f], summary })
}

/// Empirical tube radii, one record per criterion.
pub fn cmd_tube_radius(cfg: &RunConfig) -> Result<Outcome> {
    let m = cfg.model()?;
    let h = header(cfg, &m, "tube-radius");
    let est = verify::estimate_tube_radius(&m, &cfg.tube_config())?;
    let rec = |kind: &str, r: &RadiusEstimate| {
        json!({
            "record": "tube_radius",
            "kind": kind,
            "model": est.model,
            "params": est.params,
            "radius": r.radius,
            "no_breakdown": r.no_breakdown,
            "monotone": r.monotone,
            "n_directions": est.n_directions,
            "cap": est.cap,
        })
    };
    let all = [("continuation", &est.continuation), ("transversality", &est.transversality), ("positivity", &est.positivity)];
    let records: Vec<Value> = all.iter().map(|(k, r)| rec(k, r)).collect();
    let summary = all
        .iter()
        .map(|(k, r)| format!("{k:<15} radius {}{}", num(r.radius), if r.no_breakdown { " (no breakdown up to the cap)" } else { "" }))
        .collect();
    let f = write_jsonl(&cfg.output.dir, "tube_radius.jsonl", &h, &records)?;
    Ok(Outcome { exit: 0, files: vec![f], summary })
}
