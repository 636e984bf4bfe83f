//! Geodesic flow `Φ_σ` and its pushforward for real and complex σ.
//!
//! The flow is integrated along piecewise-linear paths in the σ-plane with an
//! adaptive Taylor method: the state's Taylor coefficients come from jet
//! arithmetic on the Hamiltonian vector field, and the variational matrix is
//! carried by the recursion `D' = A D` on the same coefficients.

use crate::error::{Error, Result};
use crate::geometry::{solve_scalar, Chart, MetricModel, PhasePoint};
use crate::jet::{Jet, Scalar};
use crate::linalg::{CMat, ZERO};
use num_complex::Complex64;

/// Jet capacity used by the integrator; the order must stay below it.
pub const FLOW_JET: usize = 24;
pub const MAX_ORDER: usize = FLOW_JET - 1;

type FJet = Jet<FLOW_JET>;

/// Piecewise-linear path in the σ-plane starting at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaPath {
    waypoints: Vec<Complex64>,
}

impl SigmaPath {
    pub fn straight(target: Complex64) -> SigmaPath {
        if target == ZERO {
            SigmaPath { waypoints: vec![ZERO] }
        } else {
            SigmaPath { waypoints: vec![ZERO, target] }
        }
    }

    /// Path through the given points. A leading 0 is added if missing.
    pub fn through(points: &[Complex64]) -> Result<SigmaPath> {
        let mut w = vec![ZERO];
        for p in points {
            if w.len() == 1 && *p == ZERO {
                continue;
            }
            if !(p.re.is_finite() && p.im.is_finite()) {
                return Err(Error::InvalidParams(format!("non-finite waypoint {p}")));
            }
            if *w.last().unwrap() == *p {
                return Err(Error::InvalidParams(format!("repeated waypoint {p}")));
            }
            w.push(*p);
        }
        Ok(SigmaPath { waypoints: w })
    }

    /// `0 -> tau -> regular polygon of radius tau (vertex at angle 0) -> tau`.
    pub fn disk_loop(tau: f64, sides: usize) -> SigmaPath {
        let mut w = vec![ZERO];
        for k in 0..=sides {
            let ang = 2.0 * std::f64::consts::PI * k as f64 / sides as f64;
            w.push(Complex64::from_polar(tau, ang));
        }
        *w.last_mut().unwrap() = Complex64::new(tau, 0.0);
        SigmaPath { waypoints: w }
    }

    pub fn waypoints(&self) -> &[Complex64] {
        &self.waypoints
    }

    pub fn target(&self) -> Complex64 {
        *self.waypoints.last().unwrap()
    }

    pub fn negated(&self) -> SigmaPath {
        SigmaPath { waypoints: self.waypoints.iter().map(|w| -w).collect() }
    }

    pub fn scaled(&self, c: f64) -> SigmaPath {
        SigmaPath { waypoints: self.waypoints.iter().map(|w| w * c).collect() }
    }

    pub fn conjugated(&self) -> SigmaPath {
        SigmaPath { waypoints: self.waypoints.iter().map(|w| w.conj()).collect() }
    }

    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|s| (s[1] - s[0]).norm()).sum()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FlowOptions {
    /// Local error target per step, relative to the state size.
    pub tol: f64,
    pub order: usize,
    /// Uniform output nodes per path segment.
    pub dense: usize,
    pub jacobian: bool,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { tol: 1e-12, order: 20, dense: 10, jacobian: true, min_step: 1e-8, max_steps: 200_000 }
    }
}

impl FlowOptions {
    pub fn with_tol(tol: f64) -> Self {
        FlowOptions { tol, ..Default::default() }
    }
}

#[derive(Clone, Debug)]
pub struct FlowNode {
    pub sigma: Complex64,
    pub point: PhasePoint,
    pub jacobian: Option<CMat>,
}

#[derive(Clone, Debug, Default)]
pub struct FlowDiagnostics {
    pub steps: usize,
    pub rejected: usize,
    pub chart_switches: usize,
    pub max_error_estimate: f64,
}

#[derive(Clone, Debug)]
pub struct FlowResult {
    pub endpoint: PhasePoint,
    /// Pushforward from the start chart to the endpoint chart; identity when
    /// the jacobian was not tracked.
    pub jacobian: CMat,
    pub path: SigmaPath,
    pub nodes: Vec<FlowNode>,
    pub diagnostics: FlowDiagnostics,
}

fn vector_field_generic<S: Scalar>(chart: &Chart, q: &[S], p: &[S]) -> Vec<S> {
    let n = q.len();
    let n2 = n * n;
    let vals = chart.eval_first(q);
    let g: Vec<Vec<S>> = (0..n).map(|j| vals[j * n..(j + 1) * n].to_vec()).collect();
    let v = solve_scalar(g, p.to_vec());
    let mut out = v.clone();
    for l in 0..n {
        let mut acc = S::zero();
        for j in 0..n {
            let mut row = S::zero();
            for k in 0..n {
                row = row + vals[n2 + l * n2 + j * n + k].clone() * v[k].clone();
            }
            acc = acc + v[j].clone() * row;
        }
        out.push(acc.scale(Complex64::new(0.5, 0.0)));
    }
    out
}

/// `X_E = (g^{-1} p, 1/2 v^T (d_l g) v)` with `v = g^{-1} p`.
pub fn hamiltonian_vector_field(z: &PhasePoint, m: &MetricModel) -> Result<Vec<Complex64>> {
    let ch = m.chart(z.chart);
    ch.check_margin(&z.q)?;
    let out = vector_field_generic(ch, &z.q, &z.p);
    if out.iter().all(|x| x.is_finite()) {
        Ok(out)
    } else {
        Err(Error::ChartDomain { chart: ch.name.clone(), detail: "vector field is not finite".into() })
    }
}

/// Jacobian of the vector field in (q, p), `A = d X_E / d(q, p)`.
fn flow_matrix_generic<S: Scalar>(chart: &Chart, q: &[S], p: &[S]) -> Vec<Vec<S>> {
    let n = q.len();
    let n2 = n * n;
    let vals = chart.eval_second(q);
    let g: Vec<Vec<S>> = (0..n).map(|j| vals[j * n..(j + 1) * n].to_vec()).collect();
    let dg = |l: usize, j: usize, k: usize| vals[n2 + l * n2 + j * n + k].clone();
    let ddg = |l: usize, m: usize, j: usize, k: usize| vals[n2 + n * n2 + (l * n + m) * n2 + j * n + k].clone();
    let v = solve_scalar(g.clone(), p.to_vec());
    let a: Vec<Vec<S>> = (0..n)
        .map(|l| {
            (0..n)
                .map(|j| (0..n).fold(S::zero(), |acc, k| acc + dg(l, j, k) * v[k].clone()))
                .collect()
        })
        .collect();
    let b: Vec<Vec<S>> = a.iter().map(|al| solve_scalar(g.clone(), al.clone())).collect();
    let ginv_cols: Vec<Vec<S>> = (0..n)
        .map(|c| {
            let e = (0..n).map(|r| if r == c { S::one() } else { S::zero() }).collect();
            solve_scalar(g.clone(), e)
        })
        .collect();
    let mut out = vec![vec![S::zero(); 2 * n]; 2 * n];
    for r in 0..n {
        for c in 0..n {
            out[r][c] = -b[c][r].clone();
            out[r][n + c] = ginv_cols[c][r].clone();
            out[n + r][n + c] = b[r][c].clone();
            let mut quad = S::zero();
            for j in 0..n {
                for k in 0..n {
                    quad = quad + v[j].clone() * ddg(r, c, j, k) * v[k].clone();
                }
            }
            let cross = (0..n).fold(S::zero(), |acc, j| acc + a[r][j].clone() * b[c][j].clone());
            out[n + r][c] = quad.scale(Complex64::new(0.5, 0.0)) - cross;
        }
    }
    out
}

/// Flow matrix `A` at a point (for tests and diagnostics).
pub fn flow_matrix(z: &PhasePoint, m: &MetricModel) -> Result<CMat> {
    let ch = m.chart(z.chart);
    ch.check_margin(&z.q)?;
    let a = flow_matrix_generic(ch, &z.q, &z.p);
    let n2 = 2 * z.dim();
    Ok(CMat::from_fn(n2, n2, |r, c| a[r][c]))
}

/// Taylor coefficients of the state along direction `dir`.
pub(crate) fn state_jets<const N: usize>(chart: &Chart, y: &[Complex64], dir: Complex64, order: usize) -> Vec<Jet<N>> {
    let n = y.len() / 2;
    let mut jets: Vec<Jet<N>> = y.iter().map(|&v| Jet::<N>::constant(v)).collect();
    for k in 0..order {
        let f = vector_field_generic(chart, &jets[..n], &jets[n..]);
        let s = dir / (k as f64 + 1.0);
        for (j, fj) in jets.iter_mut().zip(&f) {
            j.set_coeff(k + 1, fj.coeff(k) * s);
        }
    }
    jets
}

/// Taylor coefficient matrices of the variational solution with `D_0 = d0`.
fn jacobian_coeffs(chart: &Chart, jets: &[FJet], d0: &CMat, dir: Complex64, order: usize) -> Vec<CMat> {
    let n = jets.len() / 2;
    let a = flow_matrix_generic(chart, &jets[..n], &jets[n..]);
    let dim = 2 * n;
    let a_k: Vec<CMat> = (0..order).map(|k| CMat::from_fn(dim, dim, |r, c| a[r][c].coeff(k))).collect();
    let mut d = Vec::with_capacity(order + 1);
    d.push(d0.clone());
    for k in 0..order {
        let mut acc = CMat::zeros(dim, d0.ncols());
        for j in 0..=k {
            acc += &a_k[j] * &d[k - j];
        }
        d.push(acc * (dir / (k as f64 + 1.0)));
    }
    d
}

fn horner_vec(coeffs: &[Vec<Complex64>], h: f64) -> Vec<Complex64> {
    let mut acc = coeffs.last().unwrap().clone();
    for c in coeffs.iter().rev().skip(1) {
        for (a, ci) in acc.iter_mut().zip(c) {
            *a = *a * h + ci;
        }
    }
    acc
}

fn horner_mat(coeffs: &[CMat], h: f64) -> CMat {
    let mut acc = coeffs.last().unwrap().clone();
    for c in coeffs.iter().rev().skip(1) {
        acc = acc * Complex64::new(h, 0.0) + c;
    }
    acc
}

fn inf_norm(v: &[Complex64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.norm()))
}

fn step_from_coeffs(norms: &[f64], scale: f64, tol: f64) -> f64 {
    let k = norms.len() - 1;
    let eps = tol * scale.max(1.0);
    let mut h = f64::INFINITY;
    for kk in [k - 1, k] {
        if norms[kk] > 0.0 {
            h = h.min((eps / norms[kk]).powf(1.0 / kk as f64));
        }
    }
    h
}

/// Integrates the flow along `path`, starting at `z0`.
pub fn flow(z0: &PhasePoint, path: &SigmaPath, m: &MetricModel, opts: &FlowOptions) -> Result<FlowResult> {
    if opts.order < 2 || opts.order > MAX_ORDER {
        return Err(Error::InvalidParams(format!("Taylor order must lie in 2..={MAX_ORDER}")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParams("tolerance must be positive".into()));
    }
    let n = z0.dim();
    if n != m.dim() || z0.chart >= m.charts.len() {
        return Err(Error::InvalidParams("phase point does not match the model".into()));
    }
    m.chart(z0.chart).check_margin(&z0.q)?;
    let dense = opts.dense.max(1);
    let mut chart = z0.chart;
    let mut y = z0.state();
    let mut d = CMat::identity(2 * n, 2 * n);
    let mut diag = FlowDiagnostics::default();
    let mut nodes = vec![FlowNode {
        sigma: path.waypoints[0],
        point: z0.clone(),
        jacobian: opts.jacobian.then(|| d.clone()),
    }];

    for seg in path.waypoints.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let len = (b - a).norm();
        let dir = (b - a) / len;
        let mut t = 0.0;
        let mut next_node = 1usize;
        let node_t = |k: usize| len * k as f64 / dense as f64;
        while t < len {
            if diag.steps >= opts.max_steps {
                return Err(Error::Singularity { last_good: a + dir * t, reason: "step budget exhausted".into() });
            }
            let ch = m.chart(chart);
            let jets = state_jets::<FLOW_JET>(ch, &y, dir, opts.order);
            let ycoef: Vec<Vec<Complex64>> = (0..=opts.order).map(|k| jets.iter().map(|j| j.coeff(k)).collect()).collect();
            let dcoef = if opts.jacobian { Some(jacobian_coeffs(ch, &jets, &d, dir, opts.order)) } else { None };
            let ynorms: Vec<f64> = ycoef.iter().map(|c| inf_norm(c)).collect();
            let mut h = step_from_coeffs(&ynorms, ynorms[0], opts.tol);
            if let Some(dc) = &dcoef {
                let dn: Vec<f64> = dc.iter().map(crate::linalg::max_abs).collect();
                h = h.min(step_from_coeffs(&dn, dn[0], opts.tol));
            }
            if !h.is_finite() || h.is_nan() {
                h = len - t;
            }
            let remaining = len - t;
            if h >= remaining * (1.0 - 1e-12) {
                h = remaining;
            }
            let (y_new, d_new) = loop {
                if h < opts.min_step && h < remaining {
                    return Err(Error::Singularity {
                        last_good: a + dir * t,
                        reason: format!("step size {h:.2e} below floor {:.0e}", opts.min_step),
                    });
                }
                let yn = horner_vec(&ycoef, h);
                let dn = dcoef.as_ref().map(|dc| horner_mat(dc, h));
                let finite = yn.iter().all(|x| x.is_finite()) && dn.as_ref().is_none_or(|x| x.iter().all(|v| v.is_finite()));
                if finite && inf_norm(&yn) < 1e12 {
                    break (yn, dn);
                }
                diag.rejected += 1;
                h *= 0.5;
            };
            let err = ynorms[opts.order] * h.powi(opts.order as i32);
            diag.max_error_estimate = diag.max_error_estimate.max(err);
            while next_node <= dense && node_t(next_node) <= t + h + 1e-12 * len {
                let s = (node_t(next_node) - t).min(h);
                let yn = horner_vec(&ycoef, s);
                let dn = dcoef.as_ref().map(|dc| horner_mat(dc, s));
                nodes.push(FlowNode { sigma: a + dir * node_t(next_node), point: PhasePoint::from_state(chart, &yn), jacobian: dn });
                next_node += 1;
            }
            t = if h == remaining { len } else { t + h };
            y = y_new;
            if let Some(dn) = d_new {
                d = dn;
            }
            diag.steps += 1;

            let z = PhasePoint::from_state(chart, &y);
            let ch = m.chart(chart);
            if !ch.in_margin(&z.q) || ch.score(&z.q) > 0.8 {
                if let Some(to) = m.better_chart(&z) {
                    let (z2, tm) = m.change_chart(&z, to)?;
                    y = z2.state();
                    d = &tm * &d;
                    chart = to;
                    diag.chart_switches += 1;
                } else if !ch.in_margin(&z.q) {
                    return Err(Error::ChartDomain {
                        chart: ch.name.clone(),
                        detail: format!("flow left the extension margin near sigma = {}", a + dir * t),
                    });
                }
            }
        }
    }
    let endpoint = PhasePoint::from_state(chart, &y);
    Ok(FlowResult {
        endpoint,
        jacobian: if opts.jacobian { d } else { CMat::identity(2 * n, 2 * n) },
        path: path.clone(),
        nodes,
        diagnostics: diag,
    })
}

/// Straight-path flow to `target` with default options at tolerance `tol`.
pub fn flow_to(z0: &PhasePoint, target: Complex64, m: &MetricModel, tol: f64) -> Result<FlowResult> {
    let opts = FlowOptions { dense: 1, ..FlowOptions::with_tol(tol) };
    flow(z0, &SigmaPath::straight(target), m, &opts)
}

/// Max-norm distance between two phase points after expressing `b` in `a`'s chart.
pub fn phase_distance(m: &MetricModel, a: &PhasePoint, b: &PhasePoint) -> Result<f64> {
    let (b2, _) = m.change_chart(b, a.chart)?;
    Ok(a.max_dist(&b2))
}

/// `‖Φ_{σ1}(Φ_{σ2}(z0)) − Φ_{σ1+σ2}(z0)‖`.
pub fn flow_group_check(z0: &PhasePoint, s1: f64, s2: f64, m: &MetricModel, tol: f64) -> Result<f64> {
    let c = |x: f64| Complex64::new(x, 0.0);
    let inner = flow_to(z0, c(s2), m, tol)?.endpoint;
    let composed = flow_to(&inner, c(s1), m, tol)?.endpoint;
    let direct = flow_to(z0, c(s1 + s2), m, tol)?.endpoint;
    phase_distance(m, &direct, &composed)
}

/// `‖Φ_σ(z0) − N_c Φ_{cσ}(N_{1/c} z0)‖`; σ may be complex.
pub fn scaling_conjugation_check(z0: &PhasePoint, c: f64, sigma: Complex64, m: &MetricModel, tol: f64) -> Result<f64> {
    if c == 0.0 {
        return Err(Error::InvalidParams("scaling factor must be nonzero".into()));
    }
    let direct = flow_to(z0, sigma, m, tol)?.endpoint;
    let conj = flow_to(&z0.scaled(1.0 / c), sigma * c, m, tol)?.endpoint.scaled(c);
    phase_distance(m, &direct, &conj)
}

/// Symplecticity defect `‖D^T Ω D − Ω‖`.
pub fn symplectic_defect(d: &CMat) -> f64 {
    let n = d.nrows() / 2;
    let o = crate::linalg::to_complex(&crate::linalg::omega(n));
    crate::linalg::max_abs(&(d.transpose() * &o * d - o))
}

/// Unit complex number helper for paths along the imaginary axis.
pub fn i_times(tau: f64) -> Complex64 {
    Complex64::new(0.0, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::catalog;
    use crate::geometry::ModelParams;
    use crate::linalg::{c, ONE};

    fn torus() -> MetricModel {
        catalog("flat_torus", &ModelParams::default()).unwrap()
    }

    #[test]
    fn path_constructors_validate() {
        let p = SigmaPath::through(&[c(0.5, 0.0), c(0.0, 1.0)]).unwrap();
        assert_eq!(p.waypoints(), &[ZERO, c(0.5, 0.0), c(0.0, 1.0)]);
        assert!(SigmaPath::through(&[c(0.5, 0.0), c(0.5, 0.0)]).is_err());
        assert_eq!(SigmaPath::straight(ZERO).waypoints().len(), 1);
        let l = SigmaPath::disk_loop(1.0, 8);
        assert_eq!(l.target(), c(1.0, 0.0));
        assert_eq!(l.waypoints().len(), 10);
    }

    #[test]
    fn flat_flow_to_i_is_exact() {
        let m = torus();
        let z = PhasePoint::real(0, &[0.3, -1.0], &[0.7, 0.2]);
        let r = flow(&z, &SigmaPath::straight(c(0.0, 1.0)), &m, &FlowOptions::default()).unwrap();
        assert!((r.endpoint.q[0] - c(0.3, 0.7)).norm() < 1e-14);
        assert!((r.endpoint.q[1] - c(-1.0, 0.2)).norm() < 1e-14);
        assert_eq!(r.nodes.len(), 11);
        let d = &r.jacobian;
        assert!((d[(0, 2)] - c(0.0, 1.0)).norm() < 1e-14);
        assert!((d[(0, 0)] - ONE).norm() < 1e-14);
        assert!(d[(2, 0)].norm() < 1e-14);
    }

    #[test]
    fn flow_matrix_matches_finite_differences_of_the_vector_field() {
        let m = catalog("surface_of_revolution", &ModelParams::default()).unwrap();
        let z = PhasePoint::new(0, vec![c(0.4, 0.1), c(1.0, 0.0)], vec![c(0.3, 0.0), c(-0.8, 0.05)]);
        let a = flow_matrix(&z, &m).unwrap();
        let h = 1e-6;
        for col in 0..4 {
            let mut zp = z.state();
            let mut zm = z.state();
            zp[col] += h;
            zm[col] -= h;
            let fp = hamiltonian_vector_field(&PhasePoint::from_state(0, &zp), &m).unwrap();
            let fm = hamiltonian_vector_field(&PhasePoint::from_state(0, &zm), &m).unwrap();
            for row in 0..4 {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                assert!((fd - a[(row, col)]).norm() < 1e-8, "({row},{col}) {fd} vs {}", a[(row, col)]);
            }
        }
    }

    #[test]
    fn zero_target_returns_start() {
        let m = torus();
        let z = PhasePoint::real(0, &[0.1, 0.2], &[1.0, 0.0]);
        let r = flow(&z, &SigmaPath::straight(ZERO), &m, &FlowOptions::default()).unwrap();
        assert_eq!(r.endpoint, z);
        assert_eq!(r.nodes.len(), 1);
        assert_eq!(r.jacobian, CMat::identity(4, 4));
    }
}
