//! Identity battery for the computed structure and empirical tube radii.

use crate::error::{Error, Result};
use crate::geometry::{MetricModel, PhasePoint};
use crate::hamiltonian_flow::{flow, i_times, phase_distance, FlowOptions, SigmaPath};
use crate::holomorphic_ext::{self as ext, BaseFunction};
use crate::jacobi::lifts;
use crate::lagrangian::{distribution_at, j_tensor_at, j_tensor_from_frame, positivity_check, scaling_pushforward, JTensor};
use crate::linalg::{self, c, top, CMat, RMat, I, ZERO};
use crate::sampling;
use num_complex::Complex64;
use rayon::prelude::*;

/// All checks, in report order.
pub const CHECK_NAMES: [&str; 10] = [
    "theta_sigma",
    "kahler_potential",
    "involution",
    "scaling",
    "zero_section",
    "adaptedness",
    "nijenhuis",
    "holomorphy",
    "extension",
    "homogeneity",
];

pub fn tolerance(check: &str) -> Option<f64> {
    Some(match check {
        "theta_sigma" => 1e-8,
        "kahler_potential" => 1e-6,
        "involution" => 1e-7,
        "scaling" => 1e-8,
        "zero_section" => 1e-9,
        "adaptedness" => 1e-5,
        "nijenhuis" => 1e-4,
        "holomorphy" => 1e-5,
        "extension" => 1e-8,
        "homogeneity" => 1e-9,
        _ => return None,
    })
}

/// Sign convention for `∂̄` on functions: `½ dα∘(1 + iJ)` (standard) or
/// `½ dα∘(1 − iJ)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DbarConvention {
    #[default]
    Standard,
    Flipped,
}

/// Fiber radius of the default sampling ball.
pub fn default_rho_max(model: &str) -> f64 {
    match model {
        "round_sphere" => 0.5,
        "surface_of_revolution" => 0.25,
        _ => 1.0,
    }
}

pub fn default_function(model: &str) -> &'static str {
    match model {
        "round_sphere" => "x3",
        "surface_of_revolution" => "cos_u",
        _ => "exp_ix",
    }
}

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub samples: usize,
    /// Fiber radius of the sampling ball; model default when `None`.
    pub rho_max: Option<f64>,
    pub seed: u64,
    /// Flow integration tolerance.
    pub tol: f64,
    pub dbar: DbarConvention,
    /// Function for the extension checks; model default when `None`.
    pub function: Option<String>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { samples: 50, rho_max: None, seed: 1, tol: 1e-12, dbar: DbarConvention::Standard, function: None }
    }
}

impl VerifyConfig {
    pub fn rho(&self, m: &MetricModel) -> f64 {
        self.rho_max.unwrap_or_else(|| default_rho_max(&m.name))
    }

    fn opts(&self) -> FlowOptions {
        FlowOptions::with_tol(self.tol)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Offender {
    pub point: String,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub model: String,
    pub params: String,
    pub check: String,
    pub n_samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Largest residuals first.
    pub worst: Vec<Offender>,
    /// Samples where the computation itself failed.
    pub errors: Vec<String>,
}

impl VerificationReport {
    fn build(m: &MetricModel, check: &str, samples: Vec<(String, Result<f64>)>) -> VerificationReport {
        let tol = tolerance(check).unwrap_or(0.0);
        let mut errors = Vec::new();
        let mut vals: Vec<Offender> = Vec::with_capacity(samples.len());
        for (label, r) in samples {
            match r {
                Ok(v) => vals.push(Offender { point: label, residual: if v.is_nan() { f64::INFINITY } else { v } }),
                Err(e) => {
                    errors.push(format!("{label}: {e}"));
                    vals.push(Offender { point: label, residual: f64::INFINITY });
                }
            }
        }
        let n = vals.len();
        let max = vals.iter().fold(0.0f64, |a, o| a.max(o.residual));
        vals.sort_by(|a, b| b.residual.total_cmp(&a.residual));
        vals.truncate(3);
        VerificationReport {
            model: m.name.clone(),
            params: m.params_string(),
            check: check.to_string(),
            n_samples: n,
            max_residual: max,
            tolerance: tol,
            pass: max <= tol,
            worst: vals,
            errors,
        }
    }
}

fn fmt_c(z: Complex64) -> String {
    if z.im == 0.0 { format!("{:.6}", z.re) } else { format!("{:.6}{:+.6}i", z.re, z.im) }
}

fn label(z: &PhasePoint, extra: &str) -> String {
    let v = |x: &[Complex64]| x.iter().map(|a| fmt_c(*a)).collect::<Vec<_>>().join(",");
    format!("chart={} q=[{}] p=[{}]{}", z.chart, v(&z.q), v(&z.p), extra)
}

fn par_samples<T: Sync>(items: &[T], f: impl Fn(&T) -> Vec<(String, Result<f64>)> + Sync + Send) -> Vec<(String, Result<f64>)> {
    items.par_iter().map(f).collect::<Vec<_>>().into_iter().flatten().collect()
}

/// Flow to the end of `path`; the endpoint and pushforward are re-expressed
/// in `z`'s chart when a transition exists.
pub fn flow_in_chart(z: &PhasePoint, path: &SigmaPath, m: &MetricModel, opts: &FlowOptions) -> Result<(PhasePoint, CMat)> {
    let res = flow(z, path, m, opts)?;
    if res.endpoint.chart == z.chart {
        return Ok((res.endpoint, res.jacobian));
    }
    match m.change_chart(&res.endpoint, z.chart) {
        Ok((p, t)) => Ok((p, t * res.jacobian)),
        Err(_) => Ok((res.endpoint, res.jacobian)),
    }
}

/// Differential of `E` in Darboux components, `(−½ vᵀ ∂_l g v, v)`.
fn energy_differential(z: &PhasePoint, m: &MetricModel) -> Result<Vec<Complex64>> {
    let md = m.metric_data(z.chart, &z.q, false)?;
    let p = nalgebra::DVector::from_column_slice(&z.p);
    let v = &md.ginv * &p;
    let mut out: Vec<Complex64> = md.dg.iter().map(|d| -(v.transpose() * d * &v)[(0, 0)] * 0.5).collect();
    out.extend(v.iter().copied());
    Ok(out)
}

fn theta_sigma_residual(z: &PhasePoint, sigma: Complex64, m: &MetricModel, opts: &FlowOptions) -> Result<f64> {
    let n = z.dim();
    let frame = distribution_at(z, &SigmaPath::straight(sigma), m, opts)?;
    let f = linalg::orthonormal_basis(&frame.matrix);
    let de = energy_differential(z, m)?;
    let mut worst = 0.0f64;
    for j in 0..n {
        let col = f.column(j);
        let theta: Complex64 = (0..n).map(|a| z.p[a] * col[a]).sum();
        let ze: Complex64 = (0..2 * n).map(|a| de[a] * col[a]).sum();
        worst = worst.max((theta - sigma * ze).norm());
    }
    Ok(worst)
}

/// `|Θ(Z) − σ Z(E)|` over orthonormal frame columns of `P_z(σ)`.
pub fn check_theta_sigma_identity(m: &MetricModel, pts: &[PhasePoint], sigmas: &[Complex64], cfg: &VerifyConfig) -> VerificationReport {
    let opts = cfg.opts();
    let samples = par_samples(pts, |z| {
        sigmas
            .iter()
            .map(|&s| (label(z, &format!(" sigma={}", fmt_c(s))), theta_sigma_residual(z, s, m, &opts)))
            .collect()
    });
    VerificationReport::build(m, "theta_sigma", samples)
}

pub const THETA_SIGMAS: [Complex64; 5] = [c(0.3, 0.0), c(0.7, 0.0), c(-0.5, 0.0), c(0.0, 0.5), I];

fn kahler_residual(z: &PhasePoint, m: &MetricModel, cfg: &VerifyConfig) -> Result<f64> {
    let n = z.dim();
    let j = j_tensor_at(z, m, cfg.tol)?;
    // dκ = 2 dE for κ = g(v, v)
    let dk: Vec<f64> = energy_differential(z, m)?.iter().map(|x| 2.0 * x.re).collect();
    let sign = match cfg.dbar {
        DbarConvention::Standard => 0.5,
        DbarConvention::Flipped => -0.5,
    };
    let mut worst = 0.0f64;
    for a in 0..2 * n {
        // (Im ∂̄κ)(e_a) = ± ½ dκ(J e_a)
        let im_dbar: f64 = (0..2 * n).map(|b| dk[b] * j.matrix[(b, a)]).sum::<f64>() * sign;
        let theta = if a < n { z.p[a].re } else { 0.0 };
        worst = worst.max((im_dbar - theta).abs());
    }
    Ok(worst)
}

/// `‖Im ∂̄κ − Θ‖` for `κ = g(v, v)`, pointwise with the computed `J`.
pub fn check_kahler_potential(m: &MetricModel, pts: &[PhasePoint], cfg: &VerifyConfig) -> VerificationReport {
    let samples = par_samples(pts, |z| vec![(label(z, ""), kahler_residual(z, m, cfg))]);
    VerificationReport::build(m, "kahler_potential", samples)
}

fn involution_residual(z: &PhasePoint, m: &MetricModel, tol: f64) -> Result<f64> {
    let n = z.dim();
    let jz = j_tensor_at(z, m, tol)?;
    let jm = j_tensor_at(&z.scaled(-1.0), m, tol)?;
    let mut s = RMat::identity(2 * n, 2 * n);
    for k in n..2 * n {
        s[(k, k)] = -1.0;
    }
    Ok((&s * jm.matrix * &s + jz.matrix).abs().max())
}

/// `‖(N₋₁)_* J_{N₋₁z} (N₋₁)_* + J_z‖`.
pub fn check_involution(m: &MetricModel, pts: &[PhasePoint], cfg: &VerifyConfig) -> VerificationReport {
    let samples = par_samples(pts, |z| vec![(label(z, ""), involution_residual(z, m, cfg.tol))]);
    VerificationReport::build(m, "involution", samples)
}

fn scaling_residual(z: &PhasePoint, cc: f64, sigma: Complex64, m: &MetricModel, opts: &FlowOptions) -> Result<f64> {
    let lhs = distribution_at(&z.scaled(cc), &SigmaPath::straight(sigma), m, opts)?;
    let rhs = distribution_at(z, &SigmaPath::straight(sigma * cc), m, opts)?;
    let pushed = scaling_pushforward(z.dim(), cc) * rhs.matrix;
    Ok(linalg::subspace_distance(&lhs.matrix, &pushed))
}

/// Principal angles between `P_{N_c z}(σ)` and `(N_c)_* P_z(cσ)`.
pub fn check_scaling(m: &MetricModel, pts: &[PhasePoint], cs: &[f64], sigmas: &[Complex64], cfg: &VerifyConfig) -> VerificationReport {
    let opts = cfg.opts();
    let samples = par_samples(pts, |z| {
        let mut out = Vec::new();
        for &cc in cs {
            for &s in sigmas {
                out.push((label(z, &format!(" c={cc} sigma={}", fmt_c(s))), scaling_residual(z, cc, s, m, &opts)));
            }
        }
        out
    });
    VerificationReport::build(m, "scaling", samples)
}

fn zero_section_residual(z: &PhasePoint, sigma: f64, m: &MetricModel, opts: &FlowOptions) -> Result<f64> {
    let n = z.dim();
    let (end, d) = flow_in_chart(z, &SigmaPath::straight(c(sigma, 0.0)), m, opts)?;
    if end.chart != z.chart {
        return Err(Error::ChartDomain { chart: m.chart(z.chart).name.clone(), detail: "endpoint left the chart".into() });
    }
    let e = m.orthonormal_frame(z.chart, &z.q, None)?;
    let g = m.metric(z.chart, &z.q)?;
    let zero = CMat::zeros(n, n);
    let b = linalg::blocks(&e, &zero, &zero, &(g * &e));
    let binv = linalg::inverse(&b).ok_or_else(|| Error::DegenerateFrame("adapted splitting is singular".into()))?;
    let r = binv * d * b;
    let id = CMat::identity(n, n);
    let expected = linalg::blocks(&id, &(&id * c(sigma, 0.0)), &zero, &id);
    Ok(linalg::max_abs(&(r - expected)))
}

pub const ZERO_SECTION_SIGMAS: [f64; 3] = [0.3, 1.0, 2.0];

/// Pushforward at zero-section points against `[[I, σI], [0, I]]` in the
/// splitting by an orthonormal frame and its vertical lift.
pub fn check_zero_section(m: &MetricModel, pts: &[PhasePoint], sigmas: &[f64], cfg: &VerifyConfig) -> VerificationReport {
    let opts = FlowOptions { dense: 1, ..cfg.opts() };
    let samples = par_samples(pts, |z| {
        sigmas.iter().map(|&s| (label(z, &format!(" sigma={s}")), zero_section_residual(z, s, m, &opts))).collect()
    });
    VerificationReport::build(m, "zero_section", samples)
}

fn flow_real(z: &PhasePoint, sigma: f64, m: &MetricModel, opts: &FlowOptions) -> Result<PhasePoint> {
    let (p, _) = flow_in_chart(z, &SigmaPath::straight(c(sigma, 0.0)), m, opts)?;
    if p.chart != z.chart {
        return Err(Error::ChartDomain { chart: m.chart(z.chart).name.clone(), detail: "geodesic left the chart".into() });
    }
    Ok(p)
}

/// Cauchy–Riemann residual of `Ψ(σ + iτ) = (γ(σ), τγ'(σ))` at one grid point.
pub fn adaptedness_residual(z: &PhasePoint, sigma: f64, tau: f64, m: &MetricModel, tol: f64) -> Result<f64> {
    let n = z.dim();
    let h = 1e-4;
    let opts = FlowOptions { dense: 1, jacobian: false, ..FlowOptions::with_tol(tol) };
    let at = |s: f64| flow_real(z, s, m, &opts);
    let (zp, z0, zm) = (at(sigma + h)?, at(sigma)?, at(sigma - h)?);
    let mut dsig = vec![ZERO; 2 * n];
    let mut dtau = vec![ZERO; 2 * n];
    for k in 0..n {
        dsig[k] = (zp.q[k] - zm.q[k]) / (2.0 * h);
        dsig[n + k] = (zp.p[k] - zm.p[k]) * tau / (2.0 * h);
        dtau[n + k] = z0.p[k];
    }
    let psi = PhasePoint::new(z0.chart, z0.q.clone(), z0.p.iter().map(|p| p * tau).collect());
    let j = j_tensor_at(&psi, m, tol)?;
    let mut worst = 0.0f64;
    for r in 0..2 * n {
        let jx: Complex64 = (0..2 * n).map(|k| dsig[k] * j.matrix[(r, k)]).sum();
        worst = worst.max((jx - dtau[r]).norm());
    }
    Ok(worst)
}

/// Holomorphy of the strips `Ψ_z` for unit covectors on a `σ × τ` grid.
pub fn check_adaptedness(m: &MetricModel, covectors: &[PhasePoint], sigmas: &[f64], taus: &[f64], cfg: &VerifyConfig) -> VerificationReport {
    let samples = par_samples(covectors, |z| {
        let mut out = Vec::new();
        for &s in sigmas {
            for &t in taus {
                out.push((label(z, &format!(" sigma={s} tau={t}")), adaptedness_residual(z, s, t, m, cfg.tol)));
            }
        }
        out
    });
    VerificationReport::build(m, "adaptedness", samples)
}

/// Strip grid used by the default battery, scaled to the sampling radius.
pub fn adaptedness_grid(rho_max: f64) -> (Vec<f64>, Vec<f64>) {
    let s = rho_max;
    (vec![-0.5, 0.0, 0.5], vec![0.0, 0.4 * s, -0.4 * s, 0.8 * s, -0.8 * s])
}

fn perturbed(z: &PhasePoint, k: usize, h: f64) -> PhasePoint {
    let mut y = z.state();
    y[k] += h;
    PhasePoint::from_state(z.chart, &y)
}

/// Max over coordinate fields of the Nijenhuis tensor of the `J` field,
/// with first derivatives by central differences of step `h`.
pub fn nijenhuis_residual(z: &PhasePoint, m: &MetricModel, h: f64, tol: f64) -> Result<f64> {
    let d = 2 * z.dim();
    let j = j_tensor_at(z, m, tol)?.matrix;
    let mut dj: Vec<RMat> = Vec::with_capacity(d);
    for k in 0..d {
        let jp = j_tensor_at(&perturbed(z, k, h), m, tol)?.matrix;
        let jm = j_tensor_at(&perturbed(z, k, -h), m, tol)?.matrix;
        dj.push((jp - jm) / (2.0 * h));
    }
    let mut worst = 0.0f64;
    for a in 0..d {
        for b in 0..d {
            for cc in 0..d {
                let mut nv = 0.0;
                for k in 0..d {
                    // [JX, JY]
                    nv += j[(k, a)] * dj[k][(cc, b)] - j[(k, b)] * dj[k][(cc, a)];
                    // −J[JX, Y] − J[X, JY]
                    nv += j[(cc, k)] * (dj[b][(k, a)] - dj[a][(k, b)]);
                }
                worst = worst.max(nv.abs());
            }
        }
    }
    Ok(worst)
}

pub fn check_nijenhuis(m: &MetricModel, pts: &[PhasePoint], cfg: &VerifyConfig) -> VerificationReport {
    let samples = par_samples(pts, |z| vec![(label(z, ""), nijenhuis_residual(z, m, 1e-3, cfg.tol))]);
    VerificationReport::build(m, "nijenhuis", samples)
}

/// `‖(X + iJX) f_C‖` for the flow-route extension.
pub fn check_holomorphy(m: &MetricModel, pts: &[PhasePoint], f: &BaseFunction, cfg: &VerifyConfig) -> VerificationReport {
    let samples = par_samples(pts, |z| {
        let r = j_tensor_at(z, m, cfg.tol).and_then(|j: JTensor| ext::holomorphy_residual(f, z, &j, m, 1e-4, cfg.tol));
        vec![(label(z, ""), r)]
    });
    VerificationReport::build(m, "holomorphy", samples)
}

/// Pairwise agreement of the series, flow and exponential-map extensions.
pub fn check_extension(m: &MetricModel, pts: &[PhasePoint], f: &BaseFunction, cfg: &VerifyConfig) -> VerificationReport {
    let samples = par_samples(pts, |z| {
        let cc = ext::crosscheck(f, z, m, cfg.tol);
        let r = if cc.deviations.is_empty() {
            let why = cc.results.iter().filter_map(|(k, r)| r.as_ref().err().map(|e| format!("{}: {e}", k.name()))).collect::<Vec<_>>();
            Err(Error::InvalidParams(format!("fewer than two methods succeeded ({})", why.join("; "))))
        } else {
            Ok(cc.max_deviation())
        };
        vec![(label(z, ""), r)]
    });
    VerificationReport::build(m, "extension", samples)
}

/// Relative defect of `X_E^k(f∘π)(x, cv) = c^k X_E^k(f∘π)(x, v)` for k ≤ 8.
pub fn homogeneity_residual(f: &BaseFunction, z: &PhasePoint, cc: f64, m: &MetricModel) -> Result<f64> {
    let base = ext::xe_powers(f, z, 8, m)?;
    let scaled = ext::xe_powers(f, &z.scaled(cc), 8, m)?;
    let mut worst = 0.0f64;
    for (k, (a, b)) in base.iter().zip(&scaled).enumerate() {
        let expect = a * cc.powi(k as i32);
        worst = worst.max((b - expect).norm() / expect.norm().max(1.0));
    }
    Ok(worst)
}

pub fn check_homogeneity(m: &MetricModel, pts: &[PhasePoint], f: &BaseFunction, _cfg: &VerifyConfig) -> VerificationReport {
    let samples = par_samples(pts, |z| {
        [0.5, 2.0].iter().map(|&cc| (label(z, &format!(" c={cc}")), homogeneity_residual(f, z, cc, m))).collect()
    });
    VerificationReport::build(m, "homogeneity", samples)
}

/// Runs the selected checks in [`CHECK_NAMES`] order. An empty selection
/// yields no reports.
pub fn run_checks(m: &MetricModel, select: &[String], cfg: &VerifyConfig) -> Result<Vec<VerificationReport>> {
    for s in select {
        if !CHECK_NAMES.contains(&s.as_str()) {
            return Err(Error::InvalidParams(format!("unknown check `{s}`")));
        }
    }
    if cfg.samples == 0 {
        return Err(Error::InvalidParams("sample count must be positive".into()));
    }
    let rho = cfg.rho(m);
    let want = |name: &str| select.iter().any(|s| s == name);
    let pts = sampling::sample_points(m, cfg.samples, rho, cfg.seed)?;
    let fname = cfg.function.clone().unwrap_or_else(|| default_function(&m.name).to_string());
    let func = if want("holomorphy") || want("extension") || want("homogeneity") { Some(ext::function(m, &fname)?) } else { None };
    let mut out = Vec::new();
    for name in CHECK_NAMES {
        if !want(name) {
            continue;
        }
        let r = match name {
            "theta_sigma" => check_theta_sigma_identity(m, &pts, &THETA_SIGMAS, cfg),
            "kahler_potential" => check_kahler_potential(m, &pts, cfg),
            "involution" => check_involution(m, &pts, cfg),
            "scaling" => check_scaling(m, &pts, &[0.5, 2.0], &[c(0.6, 0.0), I], cfg),
            "zero_section" => {
                let zs = sampling::sample_zero_section(m, cfg.samples, cfg.seed)?;
                check_zero_section(m, &zs, &ZERO_SECTION_SIGMAS, cfg)
            }
            "adaptedness" => {
                let (sg, tg) = adaptedness_grid(rho);
                let count = cfg.samples.div_ceil(sg.len() * tg.len()).max(1);
                let cov = sampling::sample_unit_covectors(m, count, cfg.seed)?;
                check_adaptedness(m, &cov, &sg, &tg, cfg)
            }
            "nijenhuis" => check_nijenhuis(m, &pts, cfg),
            "holomorphy" => check_holomorphy(m, &pts, func.as_ref().unwrap(), cfg),
            "extension" => check_extension(m, &pts, func.as_ref().unwrap(), cfg),
            _ => check_homogeneity(m, &pts, func.as_ref().unwrap(), cfg),
        };
        out.push(r);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct TubeRadiusConfig {
    pub covectors: usize,
    pub cap: f64,
    pub resolution: f64,
    pub seed: u64,
    pub tol: f64,
    /// Polygon sides and dense nodes per segment of the disk loop.
    pub sides: usize,
    pub dense: usize,
}

impl Default for TubeRadiusConfig {
    fn default() -> Self {
        TubeRadiusConfig { covectors: 20, cap: 2.0, resolution: 1e-3, seed: 1, tol: 1e-10, sides: 64, dense: 40 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadiusEstimate {
    pub radius: f64,
    /// No failure up to the sweep cap.
    pub no_breakdown: bool,
    /// Failure persisted at 1.1 times the radius for every direction.
    pub monotone: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TubeRadiusEstimate {
    pub model: String,
    pub params: String,
    pub n_directions: usize,
    pub cap: f64,
    pub continuation: RadiusEstimate,
    pub transversality: RadiusEstimate,
    pub positivity: RadiusEstimate,
}

/// Winding number of `σ ↦ det(Vᵀ g V)` around the disk loop, where `V` is the
/// base projection of the pushed horizontal lifts.
fn loop_winding(z: &PhasePoint, tau: f64, m: &MetricModel, cfg: &TubeRadiusConfig) -> Result<i64> {
    let opts = FlowOptions { dense: cfg.dense, jacobian: true, ..FlowOptions::with_tol(cfg.tol) };
    let res = flow(z, &SigmaPath::disk_loop(tau, cfg.sides), m, &opts)?;
    // state after the radial segment must come back after the loop
    let start = &res.nodes[cfg.dense].point;
    let scale = start.state().iter().fold(1.0f64, |a, x| a.max(x.norm()));
    if phase_distance(m, start, &res.endpoint)? > 1e-6 * scale {
        return Err(Error::Singularity { last_good: c(tau, 0.0), reason: "flow is not single-valued around the loop".into() });
    }
    let xi = lifts(z, m, None)?.xi;
    let mut total = 0.0;
    let mut prev: Option<Complex64> = None;
    for node in &res.nodes[cfg.dense..] {
        let d = node.jacobian.as_ref().expect("jacobian requested");
        let v = top(&(d * &xi));
        let g = m.metric(node.point.chart, &node.point.q)?;
        let gam = (v.transpose() * g * &v).determinant();
        if !(gam.is_finite() && gam.norm() > 0.0) {
            return Err(Error::ConjugatePoint(format!("det vanishes near sigma = {}", fmt_c(node.sigma))));
        }
        if let Some(p) = prev {
            total += (gam / p).arg();
        }
        prev = Some(gam);
    }
    Ok((total / (2.0 * std::f64::consts::PI)).round() as i64)
}

/// Flow to iτ succeeds and the disk of radius τ passes [`disk_continues`].
pub fn continuation_ok(z: &PhasePoint, tau: f64, m: &MetricModel, cfg: &TubeRadiusConfig) -> bool {
    let opts = FlowOptions { dense: 1, jacobian: false, ..FlowOptions::with_tol(cfg.tol) };
    flow(z, &SigmaPath::straight(i_times(tau)), m, &opts).is_ok() && matches!(loop_winding(z, tau, m, cfg), Ok(0))
}

fn transversality_ok(z: &PhasePoint, tau: f64, m: &MetricModel, cfg: &TubeRadiusConfig) -> bool {
    distribution_at(z, &SigmaPath::straight(i_times(tau)), m, &FlowOptions::with_tol(cfg.tol))
        .and_then(|f| j_tensor_from_frame(&f))
        .is_ok()
}

fn positivity_ok(z: &PhasePoint, tau: f64, m: &MetricModel, cfg: &TubeRadiusConfig) -> bool {
    distribution_at(z, &SigmaPath::straight(i_times(tau)), m, &FlowOptions::with_tol(cfg.tol))
        .map(|f| positivity_check(&f).0)
        .unwrap_or(false)
}

/// The flow of `z` continues single-valued over `|σ| <= tau` with no
/// conjugate point inside.
pub fn disk_continues(z: &PhasePoint, tau: f64, m: &MetricModel, cfg: &TubeRadiusConfig) -> bool {
    tau == 0.0 || matches!(loop_winding(z, tau, m, cfg), Ok(0))
}

/// Radius at which [`disk_continues`] first fails inside `|σ| <= tau`,
/// located to `cfg.resolution`; `None` when the whole disk is fine.
pub fn disk_breakdown(z: &PhasePoint, tau: f64, m: &MetricModel, cfg: &TubeRadiusConfig) -> Option<f64> {
    if disk_continues(z, tau, m, cfg) {
        return None;
    }
    Some(direction_radius(|t| disk_continues(z, t, m, cfg), tau, cfg.resolution).0)
}

/// Largest success below the first failure: sweep in eighths of the cap, then
/// bisect. Returns (radius, broke down, failure persists at 1.1 radius).
fn direction_radius(ok: impl Fn(f64) -> bool, cap: f64, resolution: f64) -> (f64, bool, bool) {
    let step = cap / 8.0;
    let mut good = 0.0;
    let mut bad = None;
    for k in 1..=8 {
        let t = step * k as f64;
        if ok(t) {
            good = t;
        } else {
            bad = Some(t);
            break;
        }
    }
    let Some(mut bad) = bad else {
        return (cap, false, true);
    };
    while bad - good > resolution {
        let mid = 0.5 * (good + bad);
        if ok(mid) { good = mid } else { bad = mid }
    }
    let persists = !ok(1.1 * good.max(resolution));
    (good, true, persists)
}

/// Empirical tube radii over quasi-uniform unit covectors.
pub fn estimate_tube_radius(m: &MetricModel, cfg: &TubeRadiusConfig) -> Result<TubeRadiusEstimate> {
    if !(cfg.cap > 0.0 && cfg.cap.is_finite()) {
        return Err(Error::InvalidParams(format!("sweep cap must be positive, got {}", cfg.cap)));
    }
    if cfg.covectors == 0 || cfg.resolution <= 0.0 || cfg.sides < 3 || cfg.dense == 0 {
        return Err(Error::InvalidParams("need covectors > 0, resolution > 0, sides >= 3 and dense >= 1".into()));
    }
    let dirs = sampling::sample_unit_covectors(m, cfg.covectors, cfg.seed)?;
    let per: Vec<[(f64, bool, bool); 3]> = dirs
        .par_iter()
        .map(|z| {
            [
                direction_radius(|t| continuation_ok(z, t, m, cfg), cfg.cap, cfg.resolution),
                direction_radius(|t| transversality_ok(z, t, m, cfg), cfg.cap, cfg.resolution),
                direction_radius(|t| positivity_ok(z, t, m, cfg), cfg.cap, cfg.resolution),
            ]
        })
        .collect();
    let summary = |k: usize| RadiusEstimate {
        radius: per.iter().fold(f64::INFINITY, |a, r| a.min(r[k].0)),
        no_breakdown: per.iter().all(|r| !r[k].1),
        monotone: per.iter().all(|r| r[k].2),
    };
    Ok(TubeRadiusEstimate {
        model: m.name.clone(),
        params: m.params_string(),
        n_directions: dirs.len(),
        cap: cfg.cap,
        continuation: summary(0),
        transversality: summary(1),
        positivity: summary(2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_finds_threshold() {
        let (r, broke, mono) = direction_radius(|t| t < 0.777, 2.0, 1e-4);
        assert!(broke && mono);
        assert!((r - 0.777).abs() < 1e-4);
        let (r, broke, _) = direction_radius(|_| true, 2.0, 1e-3);
        assert_eq!(r, 2.0);
        assert!(!broke);
    }
}
