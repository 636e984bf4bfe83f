use super::{Chart, ClosedFormOracle, MetricModel, Sampler, Transition};
use crate::error::{Error, Result};
use crate::expr::Expr;
use serde::Deserialize;
use std::f64::consts::{FRAC_PI_2, PI};

pub const MODEL_NAMES: [&str; 4] = ["flat_space", "flat_torus", "round_sphere", "surface_of_revolution"];

/// Parameters accepted by [`catalog`]. Each model reads only its own fields
/// and rejects the others.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub dim: Option<usize>,
    pub periods: Option<Vec<f64>>,
    pub radius: Option<f64>,
    /// Surface of revolution profile `r(u) = a + b cos u`.
    pub a: Option<f64>,
    pub b: Option<f64>,
}

pub fn catalog(name: &str, params: &ModelParams) -> Result<MetricModel> {
    let allowed: &[&str] = match name {
        "flat_space" => &["dim"],
        "flat_torus" => &["periods"],
        "round_sphere" => &["radius", "dim"],
        "surface_of_revolution" => &["a", "b"],
        _ => return Err(Error::UnknownModel(name.to_string())),
    };
    let given = [
        ("dim", params.dim.is_some()),
        ("periods", params.periods.is_some()),
        ("radius", params.radius.is_some()),
        ("a", params.a.is_some()),
        ("b", params.b.is_some()),
    ];
    for (key, set) in given {
        if set && !allowed.contains(&key) {
            return Err(Error::InvalidParams(format!("`{key}` does not apply to {name}")));
        }
    }
    match name {
        "flat_space" => flat_space(params.dim.unwrap_or(2)),
        "flat_torus" => flat_torus(params.periods.clone().unwrap_or_else(|| vec![2.0 * PI, 2.0 * PI])),
        "round_sphere" => {
            if let Some(d) = params.dim {
                if d != 2 {
                    return Err(Error::InvalidParams(format!("round_sphere supports dim = 2 only, got {d}")));
                }
            }
            round_sphere(params.radius.unwrap_or(1.0))
        }
        _ => surface_of_revolution(params.a.unwrap_or(2.0), params.b.unwrap_or(1.0)),
    }
}

fn identity_metric(n: usize) -> Vec<Vec<Expr>> {
    (0..n).map(|j| (0..n).map(|k| Expr::c(if j == k { 1.0 } else { 0.0 })).collect()).collect()
}

fn diagonal(entries: Vec<Expr>) -> Vec<Vec<Expr>> {
    let n = entries.len();
    entries
        .into_iter()
        .enumerate()
        .map(|(j, e)| (0..n).map(|k| if j == k { e.clone() } else { Expr::c(0.0) }).collect())
        .collect()
}

pub fn flat_space(dim: usize) -> Result<MetricModel> {
    if dim == 0 {
        return Err(Error::InvalidParams("dim must be positive".into()));
    }
    let inf = vec![f64::INFINITY; dim];
    let chart = Chart::new("cartesian", vec![0.0; dim], inf.clone(), inf, identity_metric(dim), Some(Expr::vars(dim)));
    Ok(MetricModel {
        name: "flat_space".into(),
        params: vec![("dim".into(), dim as f64)],
        charts: vec![chart],
        transitions: Vec::new(),
        sampler: Sampler::Box { chart: 0, lo: vec![-1.0; dim], hi: vec![1.0; dim] },
        oracle: Some(ClosedFormOracle::Flat),
    })
}

/// Flat torus in universal-cover coordinates; points are not reduced modulo
/// the periods.
pub fn flat_torus(periods: Vec<f64>) -> Result<MetricModel> {
    let dim = periods.len();
    if dim == 0 || periods.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::InvalidParams(format!("torus periods must be positive, got {periods:?}")));
    }
    let inf = vec![f64::INFINITY; dim];
    let chart = Chart::new("cover", vec![0.0; dim], inf.clone(), inf, identity_metric(dim), Some(Expr::vars(dim)));
    Ok(MetricModel {
        name: "flat_torus".into(),
        params: periods.iter().enumerate().map(|(i, p)| (format!("period{i}"), *p)).collect(),
        charts: vec![chart],
        transitions: Vec::new(),
        sampler: Sampler::Box { chart: 0, lo: vec![0.0; dim], hi: periods },
        oracle: Some(ClosedFormOracle::Flat),
    })
}

/// Round 2-sphere of radius `a`. Charts: `N` (stereographic from the north
/// pole, covers the southern hemisphere with |u| <= 1), `S` (from the south
/// pole) and `polar` (θ, φ), which only transitions into the other two.
pub fn round_sphere(a: f64) -> Result<MetricModel> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::InvalidParams(format!("sphere radius must be positive, got {a}")));
    }
    let u = Expr::vars(2);
    let uu = &u[0] * &u[0] + &u[1] * &u[1];
    let conformal = 4.0 * a * a * (1.0 + uu.clone()).powi(-2);
    let stereo_metric = diagonal(vec![conformal.clone(), conformal]);
    let denom = uu.clone() + 1.0;
    let embed_n = vec![
        a * 2.0 * u[0].clone() / denom.clone(),
        a * 2.0 * u[1].clone() / denom.clone(),
        a * (uu.clone() - 1.0) / denom.clone(),
    ];
    let embed_s = vec![
        a * 2.0 * u[0].clone() / denom.clone(),
        a * 2.0 * u[1].clone() / denom.clone(),
        a * (1.0 - uu.clone()) / denom,
    ];
    let stereo_margin = vec![50.0, 50.0];
    let north = Chart::new("N", vec![0.0, 0.0], vec![1.5, 1.5], stereo_margin.clone(), stereo_metric.clone(), Some(embed_n));
    let south = Chart::new("S", vec![0.0, 0.0], vec![1.5, 1.5], stereo_margin, stereo_metric, Some(embed_s));

    let th = Expr::var(0);
    let ph = Expr::var(1);
    let polar_metric = diagonal(vec![Expr::c(a * a), a * a * th.sin().powi(2)]);
    let embed_p = vec![a * th.sin() * ph.cos(), a * th.sin() * ph.sin(), a * th.cos()];
    let polar = Chart::new("polar", vec![FRAC_PI_2, 0.0], vec![FRAC_PI_2, f64::INFINITY], vec![0.5, 0.5], polar_metric, Some(embed_p));

    let inversion = vec![u[0].clone() / uu.clone(), u[1].clone() / uu];
    let cot_half = (th.clone() * 0.5).cos() / (th.clone() * 0.5).sin();
    let tan_half = (th.clone() * 0.5).sin() / (th * 0.5).cos();
    let transitions = vec![
        Transition::new(0, 1, inversion.clone()),
        Transition::new(1, 0, inversion),
        Transition::new(2, 0, vec![cot_half.clone() * ph.cos(), cot_half * ph.sin()]),
        Transition::new(2, 1, vec![tan_half.clone() * ph.cos(), tan_half * ph.sin()]),
    ];
    Ok(MetricModel {
        name: "round_sphere".into(),
        params: vec![("radius".into(), a)],
        charts: vec![north, south, polar],
        transitions,
        sampler: Sampler::Sphere { radius: a },
        oracle: Some(ClosedFormOracle::Sphere { radius: a }),
    })
}

/// Surface swept by the profile `(r(u), u)` with `r(u) = a + b cos u`,
/// metric `diag(1 + r'(u)^2, r(u)^2)` in coordinates (u, φ).
pub fn surface_of_revolution(a: f64, b: f64) -> Result<MetricModel> {
    if !(a.is_finite() && b.is_finite() && a > b.abs()) {
        return Err(Error::InvalidParams(format!("need a > |b| for a positive profile, got a={a}, b={b}")));
    }
    let u = Expr::var(0);
    let ph = Expr::var(1);
    let r = a + b * u.cos();
    let dr = -b * u.sin();
    let metric = diagonal(vec![1.0 + dr.powi(2), r.powi(2)]);
    let embedding = vec![r.clone() * ph.cos(), r * ph.sin(), u];
    // complex zeros of 1 + r'^2 and of r bound the usable strip in u
    let sing = if b == 0.0 { f64::INFINITY } else { (1.0 / b.abs()).asinh().min((a / b.abs()).acosh()) };
    let margin_u = (0.7 * sing).min(0.6);
    let chart = Chart::new(
        "revolution",
        vec![0.0, 0.0],
        vec![f64::INFINITY, f64::INFINITY],
        vec![margin_u, f64::INFINITY],
        metric,
        Some(embedding),
    );
    Ok(MetricModel {
        name: "surface_of_revolution".into(),
        params: vec![("a".into(), a), ("b".into(), b)],
        charts: vec![chart],
        transitions: Vec::new(),
        sampler: Sampler::Box { chart: 0, lo: vec![-PI, 0.0], hi: vec![PI, 2.0 * PI] },
        oracle: None,
    })
}
