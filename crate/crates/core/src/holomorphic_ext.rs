//! Holomorphic extension of functions on `M` into the tube by three routes:
//! the power series in `X_E`, the flow to σ = i, and the complexified
//! exponential map.

use crate::error::{Error, Result};
use crate::expr::{Expr, Tape};
use crate::geometry::{MetricModel, PhasePoint};
use crate::hamiltonian_flow::{flow, state_jets, FlowDiagnostics, FlowOptions, SigmaPath};
use crate::jet::Jet;
use crate::lagrangian::JTensor;
use crate::linalg::{CMat, I, ONE, ZERO};
use num_complex::Complex64;

/// Largest number of series terms supported by the jet capacity.
pub const MAX_TERMS: usize = 63;
pub const DEFAULT_TERMS: usize = 40;

type SJet = Jet<64>;

/// Names accepted by [`function`] for each model.
pub fn function_names(model: &str) -> &'static [&'static str] {
    match model {
        "flat_torus" | "flat_space" => &["exp_ix", "trig_poly", "constant"],
        "round_sphere" => &["x1", "x2", "x3", "constant"],
        "surface_of_revolution" => &["cos_u", "constant"],
        _ => &[],
    }
}

/// A real-analytic function on `M` given by expressions in each chart, as
/// a pair (real part, imaginary part). The expressions are continued
/// holomorphically when evaluated at complex coordinates.
#[derive(Clone, Debug)]
pub struct BaseFunction {
    pub name: String,
    charts: Vec<Option<[Expr; 2]>>,
    tapes: Vec<Option<Tape>>,
    /// Same function in the model embedding coordinates, used with the
    /// closed-form exponential map.
    ambient: Option<[Expr; 2]>,
    /// Allowed `|Im q|` of the complex base point; infinite when the chart
    /// margins are the only limit.
    pub margin: f64,
}

impl BaseFunction {
    pub fn new(name: &str, charts: Vec<Option<[Expr; 2]>>, ambient: Option<[Expr; 2]>, margin: f64) -> BaseFunction {
        let tapes = charts.iter().map(|c| c.as_ref().map(|e| Tape::compile(e))).collect();
        BaseFunction { name: name.to_string(), charts, tapes, ambient, margin }
    }

    /// The same expressions in every chart of `m`.
    pub fn uniform(name: &str, m: &MetricModel, re: Expr, im: Expr, ambient: bool) -> BaseFunction {
        let e = [re, im];
        let amb = if ambient { Some(e.clone()) } else { None };
        BaseFunction::new(name, vec![Some(e); m.charts.len()], amb, f64::INFINITY)
    }

    pub fn with_margin(mut self, margin: f64) -> BaseFunction {
        self.margin = margin;
        self
    }

    pub fn has_chart(&self, chart: usize) -> bool {
        self.charts.get(chart).is_some_and(|c| c.is_some())
    }

    pub fn has_ambient(&self) -> bool {
        self.ambient.is_some()
    }

    pub fn chart_exprs(&self, chart: usize) -> Option<&[Expr; 2]> {
        self.charts.get(chart).and_then(|c| c.as_ref())
    }

    /// Value at (possibly complex) chart coordinates.
    pub fn eval(&self, chart: usize, q: &[Complex64]) -> Result<Complex64> {
        let tape = self.tape(chart)?;
        let out: Vec<Complex64> = tape.eval(q);
        Ok(out[0] + I * out[1])
    }

    pub fn eval_ambient(&self, x: &[Complex64]) -> Option<Complex64> {
        self.ambient.as_ref().map(|[re, im]| re.eval_c(x) + I * im.eval_c(x))
    }

    fn tape(&self, chart: usize) -> Result<&Tape> {
        self.tapes.get(chart).and_then(|t| t.as_ref()).ok_or_else(|| Error::ChartDomain {
            chart: chart.to_string(),
            detail: format!("function `{}` is not defined in this chart", self.name),
        })
    }
}

/// Catalog functions for a model.
pub fn function(m: &MetricModel, name: &str) -> Result<BaseFunction> {
    let n = m.dim();
    let x = Expr::vars(n);
    let zero = Expr::c(0.0);
    let unknown = || Error::InvalidParams(format!("no function `{name}` for model {}", m.name));
    if name == "constant" {
        return Ok(BaseFunction::uniform(name, m, Expr::c(1.0), zero, true));
    }
    match m.name.as_str() {
        "flat_torus" | "flat_space" => match name {
            "exp_ix" => Ok(BaseFunction::uniform(name, m, x[0].cos(), x[0].sin(), true)),
            "trig_poly" => {
                let mut re = x[0].cos() + x[0].sin();
                if n > 1 {
                    re = re + 0.5 * (2.0 * x[1].clone()).sin() + 0.25 * (x[0].clone() + x[1].clone()).cos();
                }
                let im = 0.3 * x[n - 1].sin();
                Ok(BaseFunction::uniform(name, m, re, im, true))
            }
            _ => Err(unknown()),
        },
        "round_sphere" => {
            let k = match name {
                "x1" => 0,
                "x2" => 1,
                "x3" => 2,
                _ => return Err(unknown()),
            };
            let charts = m
                .charts
                .iter()
                .map(|c| c.embedding.as_ref().map(|e| [e[k].clone(), zero.clone()]))
                .collect();
            Ok(BaseFunction::new(name, charts, Some([Expr::var(k), zero.clone()]), f64::INFINITY))
        }
        "surface_of_revolution" => match name {
            "cos_u" => Ok(BaseFunction::uniform(name, m, x[0].cos(), zero, false)),
            _ => Err(unknown()),
        },
        _ => Err(unknown()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Series,
    Flow,
    ExpMap,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Series => "series",
            Method::Flow => "flow",
            Method::ExpMap => "exp_map",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExtensionResult {
    pub value: Complex64,
    pub method: Method,
    pub terms_used: Option<usize>,
    pub diagnostics: Option<FlowDiagnostics>,
    /// Last term magnitude (series) or integration tolerance (flow).
    pub error_estimate: f64,
}

/// Taylor coefficients `c_k` of `σ ↦ f(π(Φ_σ(z)))`, so `X_E^k (f∘π)(z) = k! c_k`.
pub fn sigma_coefficients(f: &BaseFunction, z: &PhasePoint, order: usize, m: &MetricModel) -> Result<Vec<Complex64>> {
    if order > MAX_TERMS {
        return Err(Error::InvalidParams(format!("at most {MAX_TERMS} terms are supported")));
    }
    let ch = m.chart(z.chart);
    ch.check_margin(&z.q)?;
    let tape = f.tape(z.chart)?;
    let jets: Vec<SJet> = state_jets::<64>(ch, &z.state(), ONE, order);
    let n = z.dim();
    let out: Vec<SJet> = tape.eval(&jets[..n]);
    let coeffs: Vec<Complex64> = (0..=order).map(|k| out[0].coeff(k) + I * out[1].coeff(k)).collect();
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::ChartDomain { chart: ch.name.clone(), detail: "non-finite jet coefficients".into() });
    }
    Ok(coeffs)
}

/// `X_E^k (f∘π)(z)` for k = 0..=order.
pub fn xe_powers(f: &BaseFunction, z: &PhasePoint, order: usize, m: &MetricModel) -> Result<Vec<Complex64>> {
    let c = sigma_coefficients(f, z, order, m)?;
    let mut fact = 1.0;
    Ok(c.iter()
        .enumerate()
        .map(|(k, ck)| {
            if k > 0 {
                fact *= k as f64;
            }
            ck * fact
        })
        .collect())
}

fn symbolic_det(g: &[Vec<Expr>]) -> Expr {
    let n = g.len();
    if n == 1 {
        return g[0][0].clone();
    }
    let mut acc = Expr::c(0.0);
    for col in 0..n {
        let minor: Vec<Vec<Expr>> = g[1..]
            .iter()
            .map(|row| row.iter().enumerate().filter(|(j, _)| *j != col).map(|(_, e)| e.clone()).collect())
            .collect();
        let term = g[0][col].clone() * symbolic_det(&minor);
        acc = if col % 2 == 0 { acc + term } else { acc - term };
    }
    acc
}

fn symbolic_inverse(g: &[Vec<Expr>]) -> Vec<Vec<Expr>> {
    let n = g.len();
    let det = symbolic_det(g);
    if n == 1 {
        return vec![vec![Expr::c(1.0) / det]];
    }
    (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    // adjugate: cofactor of (c, r)
                    let minor: Vec<Vec<Expr>> = g
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != c)
                        .map(|(_, row)| row.iter().enumerate().filter(|(j, _)| *j != r).map(|(_, e)| e.clone()).collect())
                        .collect();
                    let cof = symbolic_det(&minor) / det.clone();
                    if (r + c) % 2 == 0 { cof } else { -cof }
                })
                .collect()
        })
        .collect()
}

/// Independent slow route to `X_E^k (f∘π)(z)`: nested Poisson brackets
/// `{E, {E, … f}}` built as expression trees in (q, p).
pub fn xe_powers_symbolic(f: &BaseFunction, z: &PhasePoint, order: usize, m: &MetricModel) -> Result<Vec<Complex64>> {
    let ch = m.chart(z.chart);
    ch.check_margin(&z.q)?;
    let n = z.dim();
    let ginv = symbolic_inverse(&ch.metric);
    let p: Vec<Expr> = (0..n).map(|j| Expr::var(n + j)).collect();
    let mut energy = Expr::c(0.0);
    for j in 0..n {
        for k in 0..n {
            energy = energy + 0.5 * ginv[j][k].clone() * p[j].clone() * p[k].clone();
        }
    }
    let de_dq: Vec<Expr> = (0..n).map(|j| energy.diff(j)).collect();
    let de_dp: Vec<Expr> = (0..n).map(|j| energy.diff(n + j)).collect();
    let exprs = f.chart_exprs(z.chart).ok_or_else(|| Error::ChartDomain {
        chart: ch.name.clone(),
        detail: format!("function `{}` is not defined in this chart", f.name),
    })?;
    let state = z.state();
    let mut cur = exprs.clone();
    let mut out = Vec::with_capacity(order + 1);
    for k in 0..=order {
        out.push(cur[0].eval_c(&state) + I * cur[1].eval_c(&state));
        if k == order {
            break;
        }
        cur = cur.map(|e| {
            let mut acc = Expr::c(0.0);
            for j in 0..n {
                acc = acc + e.diff(j) * de_dp[j].clone() - e.diff(n + j) * de_dq[j].clone();
            }
            acc
        });
    }
    Ok(out)
}

/// `Σ_{k ≤ K} i^k/k! X_E^k (f∘π)(z)`. Summation stops once two consecutive
/// terms fall below `1e-15` of the partial sum.
pub fn extend_by_series(f: &BaseFunction, z: &PhasePoint, max_terms: usize, m: &MetricModel) -> Result<ExtensionResult> {
    if max_terms == 0 {
        return Err(Error::InvalidParams("need at least one series term".into()));
    }
    if !z.is_real() {
        return Err(Error::InvalidParams("series extension needs a real phase point".into()));
    }
    let c = sigma_coefficients(f, z, max_terms, m)?;
    let mut sum = ZERO;
    let mut ik = ONE;
    let mut tiny_run = 0;
    let mut grow_run = 0;
    let mut prev_env = f64::INFINITY;
    let mut last = 0.0;
    let mut prev_mag = 0.0f64;
    let mut used = max_terms;
    for (k, ck) in c.iter().enumerate() {
        let term = ik * ck;
        ik *= I;
        sum += term;
        let mag = term.norm();
        last = mag;
        // envelope over pairs so that vanishing odd or even terms do not hide growth
        let env = mag.max(prev_mag);
        prev_mag = mag;
        if k > 10 && env > prev_env {
            grow_run += 1;
            if grow_run >= 5 {
                return Err(Error::Divergence { term: k });
            }
        } else {
            grow_run = 0;
        }
        prev_env = env;
        if k >= 2 && mag <= 1e-15 * sum.norm() {
            tiny_run += 1;
            if tiny_run >= 2 {
                used = k;
                break;
            }
        } else {
            tiny_run = 0;
        }
    }
    Ok(ExtensionResult { value: sum, method: Method::Series, terms_used: Some(used), diagnostics: None, error_estimate: last })
}

/// `f(π(Φ_i(z)))`, with the flow integrated along `path` (which must end at i).
pub fn extend_by_flow(f: &BaseFunction, z: &PhasePoint, path: &SigmaPath, m: &MetricModel, tol: f64) -> Result<ExtensionResult> {
    let opts = FlowOptions { dense: 1, jacobian: false, ..FlowOptions::with_tol(tol) };
    let res = flow(z, path, m, &opts)?;
    let mut end = res.endpoint.clone();
    if !f.has_chart(end.chart) {
        let to = (0..m.charts.len())
            .find(|&c| f.has_chart(c) && m.transition(end.chart, c).is_some())
            .ok_or_else(|| Error::ChartDomain {
                chart: m.chart(end.chart).name.clone(),
                detail: format!("function `{}` is not defined here", f.name),
            })?;
        end = m.change_chart(&end, to)?.0;
    }
    let im = end.q.iter().fold(0.0f64, |a, q| a.max(q.im.abs()));
    if im >= f.margin {
        return Err(Error::ChartDomain {
            chart: m.chart(end.chart).name.clone(),
            detail: format!("|Im q| = {im:.4} is outside the declared margin {} of `{}`", f.margin, f.name),
        });
    }
    let value = f.eval(end.chart, &end.q)?;
    Ok(ExtensionResult {
        value,
        method: Method::Flow,
        terms_used: None,
        diagnostics: Some(res.diagnostics),
        error_estimate: tol,
    })
}

/// `f_C(exp_x(iv))` through the model's closed-form geodesics.
pub fn extend_by_exp(f: &BaseFunction, z: &PhasePoint, m: &MetricModel) -> Result<ExtensionResult> {
    let unsupported = |what: &str| Error::UnsupportedModel { model: m.name.clone(), what: what.into() };
    let oracle = m.oracle.ok_or_else(|| unsupported("exponential map"))?;
    if !f.has_ambient() {
        return Err(unsupported(&format!("extension of `{}` in ambient coordinates", f.name)));
    }
    let ch = m.chart(z.chart);
    let (x, jac) = ch.embed(&z.q).ok_or_else(|| unsupported("embedding"))?;
    let v = m.velocity(z)?;
    let w: Vec<Complex64> = (jac * nalgebra::DVector::from_column_slice(&v)).iter().copied().collect();
    let (pos, _) = oracle.geodesic(&x, &w, I);
    let value = f.eval_ambient(&pos).ok_or_else(|| unsupported("ambient function"))?;
    Ok(ExtensionResult { value, method: Method::ExpMap, terms_used: None, diagnostics: None, error_estimate: 0.0 })
}

#[derive(Clone, Debug)]
pub struct CrossCheck {
    pub results: Vec<(Method, std::result::Result<ExtensionResult, Error>)>,
    /// Pairwise absolute deviations between the methods that succeeded.
    pub deviations: Vec<(Method, Method, f64)>,
}

impl CrossCheck {
    pub fn max_deviation(&self) -> f64 {
        self.deviations.iter().fold(0.0, |a, d| a.max(d.2))
    }

    pub fn value(&self, method: Method) -> Option<Complex64> {
        self.results.iter().find(|r| r.0 == method).and_then(|r| r.1.as_ref().ok()).map(|r| r.value)
    }
}

/// Runs all three routes and reports pairwise deviations.
pub fn crosscheck(f: &BaseFunction, z: &PhasePoint, m: &MetricModel, tol: f64) -> CrossCheck {
    let results = vec![
        (Method::Series, extend_by_series(f, z, DEFAULT_TERMS, m)),
        (Method::Flow, extend_by_flow(f, z, &SigmaPath::straight(I), m, tol)),
        (Method::ExpMap, extend_by_exp(f, z, m)),
    ];
    let mut deviations = Vec::new();
    for a in 0..results.len() {
        for b in a + 1..results.len() {
            if let (Ok(ra), Ok(rb)) = (&results[a].1, &results[b].1) {
                deviations.push((results[a].0, results[b].0, (ra.value - rb.value).norm()));
            }
        }
    }
    CrossCheck { results, deviations }
}

/// `max_a |df(e_a) + i Σ_b J_ba df(e_b)|` for the flow-route extension near
/// the real point `z`, with central differences of step `h` in the Darboux
/// coordinates.
pub fn holomorphy_residual(f: &BaseFunction, z: &PhasePoint, j: &JTensor, m: &MetricModel, h: f64, tol: f64) -> Result<f64> {
    let n = z.dim();
    let state = z.state();
    let path = SigmaPath::straight(I);
    let mut df = Vec::with_capacity(2 * n);
    for a in 0..2 * n {
        let mut plus = state.clone();
        let mut minus = state.clone();
        plus[a] += h;
        minus[a] -= h;
        let fp = extend_by_flow(f, &PhasePoint::from_state(z.chart, &plus), &path, m, tol)?.value;
        let fm = extend_by_flow(f, &PhasePoint::from_state(z.chart, &minus), &path, m, tol)?.value;
        df.push((fp - fm) / (2.0 * h));
    }
    let jm = CMat::from_fn(2 * n, 2 * n, |r, c| Complex64::new(j.matrix[(r, c)], 0.0));
    let mut worst = 0.0f64;
    for a in 0..2 * n {
        let mut r = df[a];
        for b in 0..2 * n {
            r += I * jm[(b, a)] * df[b];
        }
        worst = worst.max(r.norm());
    }
    Ok(worst)
}
