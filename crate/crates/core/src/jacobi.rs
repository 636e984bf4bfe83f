//! Jacobi fields along geodesics, the matrix `f_z(σ)`, and its continuation
//! to σ = i, giving a route to `J` that does not integrate in complex time.

use crate::error::{Error, Result};
use crate::geometry::{ClosedFormOracle, MetricModel, PhasePoint};
use crate::hamiltonian_flow::{flow, FlowOptions, SigmaPath};
use crate::lagrangian::JTensor;
use crate::linalg::{self, CMat, RMat, I, ZERO};
use crate::pade::{self, Pade};
use num_complex::Complex64;

/// Samples with `cond(V) >= MAX_FIELD_CONDITION` are treated as conjugate points.
pub const MAX_FIELD_CONDITION: f64 = 1e8;

/// Horizontal lifts `ξ_j` and vertical lifts `η_j` of a basis `{v_j}` of
/// `T_x M` at `z`, in Darboux components.
#[derive(Clone, Debug)]
pub struct Lifts {
    pub base: PhasePoint,
    /// Columns are the basis vectors `v_j`.
    pub basis: CMat,
    pub xi: CMat,
    pub eta: CMat,
    /// True when the basis is g-orthonormal with `v_1` along the velocity.
    pub adapted: bool,
}

impl Lifts {
    /// `[Ξ | H]`.
    pub fn basis_matrix(&self) -> CMat {
        let n = self.basis.nrows();
        let mut b = CMat::zeros(2 * n, 2 * n);
        b.view_mut((0, 0), (2 * n, n)).copy_from(&self.xi);
        b.view_mut((0, n), (2 * n, n)).copy_from(&self.eta);
        b
    }
}

/// Lifts of `basis`, or of the orthonormal (velocity, normal, ...) basis when `None`.
pub fn lifts(z: &PhasePoint, m: &MetricModel, basis: Option<CMat>) -> Result<Lifts> {
    let n = z.dim();
    let adapted = basis.is_none();
    let basis = match basis {
        Some(b) => b,
        None => {
            let v = m.velocity(z)?;
            let moving = v.iter().any(|x| x.norm() > 1e-14);
            m.orthonormal_frame(z.chart, &z.q, moving.then_some(v.as_slice()))?
        }
    };
    let md = m.metric_data(z.chart, &z.q, false)?;
    let gam = crate::geometry::christoffel_from(&md);
    let mut xi = CMat::zeros(2 * n, n);
    let mut eta = CMat::zeros(2 * n, n);
    for j in 0..n {
        let u = basis.column(j);
        for a in 0..n {
            xi[(a, j)] = u[a];
            let mut s = ZERO;
            for l in 0..n {
                for mm in 0..n {
                    s += gam[mm][(l, a)] * u[l] * z.p[mm];
                }
            }
            xi[(n + a, j)] = s;
            eta[(n + a, j)] = (md.g.row(a) * u)[(0, 0)];
        }
    }
    Ok(Lifts { base: z.clone(), basis, xi, eta, adapted })
}

#[derive(Clone, Debug)]
pub struct JacobiNode {
    pub sigma: f64,
    pub point: PhasePoint,
    /// Columns `v_j(σ)` in the chart of `point`.
    pub v: CMat,
    /// Columns `w_j(σ)`.
    pub w: CMat,
    /// Covariant derivatives `∇_σ v_j`, `∇_σ w_j`.
    pub dv: CMat,
    pub dw: CMat,
}

#[derive(Clone, Debug)]
pub struct JacobiSystem {
    pub lifts: Lifts,
    pub nodes: Vec<JacobiNode>,
}

fn covariant_derivative(m: &MetricModel, z: &PhasePoint, dq: &CMat, dp: &CMat) -> Result<CMat> {
    // δq̇ = G δp − G (∂g·δq) G p, then add Γ(q̇, δq)
    let n = z.dim();
    let md = m.metric_data(z.chart, &z.q, false)?;
    let gam = crate::geometry::christoffel_from(&md);
    let p = nalgebra::DVector::from_column_slice(&z.p);
    let v = &md.ginv * &p;
    let mut out = &md.ginv * dp;
    for col in 0..dq.ncols() {
        let mut dg = CMat::zeros(n, n);
        for l in 0..n {
            dg += &md.dg[l] * dq[(l, col)];
        }
        let corr = &md.ginv * (dg * &v);
        for i in 0..n {
            let mut s = -corr[i];
            for j in 0..n {
                for k in 0..n {
                    s += gam[i][(j, k)] * v[j] * dq[(k, col)];
                }
            }
            out[(i, col)] += s;
        }
    }
    Ok(out)
}

/// Pushes the lifts forward along the real geodesic of `z` and samples the
/// Jacobi fields at each σ in `sigmas`.
pub fn jacobi_fields(z: &PhasePoint, sigmas: &[f64], m: &MetricModel, tol: f64) -> Result<JacobiSystem> {
    let lf = lifts(z, m, None)?;
    jacobi_fields_with(lf, sigmas, m, tol)
}

pub fn jacobi_fields_with(lf: Lifts, sigmas: &[f64], m: &MetricModel, tol: f64) -> Result<JacobiSystem> {
    let z = lf.base.clone();
    let n = z.dim();
    let mut pos: Vec<f64> = sigmas.iter().copied().filter(|s| *s > 0.0).collect();
    let mut neg: Vec<f64> = sigmas.iter().copied().filter(|s| *s < 0.0).collect();
    pos.sort_by(f64::total_cmp);
    pos.dedup();
    neg.sort_by(|a, b| b.total_cmp(a));
    neg.dedup();
    let opts = FlowOptions { dense: 1, jacobian: true, ..FlowOptions::with_tol(tol) };
    let mut raw: Vec<(f64, PhasePoint, CMat)> = Vec::new();
    if sigmas.contains(&0.0) {
        raw.push((0.0, z.clone(), CMat::identity(2 * n, 2 * n)));
    }
    for side in [pos, neg] {
        if side.is_empty() {
            continue;
        }
        let pts: Vec<Complex64> = side.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        let res = flow(&z, &SigmaPath::through(&pts)?, m, &opts)?;
        for node in res.nodes.into_iter().skip(1) {
            raw.push((node.sigma.re, node.point, node.jacobian.unwrap()));
        }
    }
    let mut nodes = Vec::with_capacity(raw.len());
    for (sigma, point, d) in raw {
        let dxi = &d * &lf.xi;
        let deta = &d * &lf.eta;
        let v = linalg::top(&dxi);
        let w = linalg::top(&deta);
        let dv = covariant_derivative(m, &point, &v, &linalg::bottom(&dxi))?;
        let dw = covariant_derivative(m, &point, &w, &linalg::bottom(&deta))?;
        nodes.push(JacobiNode { sigma, point, v, w, dv, dw });
    }
    let order: Vec<usize> = {
        let mut idx: Vec<usize> = (0..nodes.len()).collect();
        idx.sort_by(|&a, &b| nodes[a].sigma.total_cmp(&nodes[b].sigma));
        idx
    };
    let nodes = order.into_iter().map(|i| nodes[i].clone()).collect();
    Ok(JacobiSystem { lifts: lf, nodes })
}

/// Residual of the Jacobi equation `∇²w + R(w, γ')γ'` at σ, from covariant
/// derivatives sampled at σ ± h.
pub fn jacobi_equation_residual(z: &PhasePoint, sigma: f64, m: &MetricModel, tol: f64) -> Result<f64> {
    let h = 1e-4;
    let sys = jacobi_fields(z, &[sigma - h, sigma, sigma + h], m, tol)?;
    let [lo, mid, hi] = [&sys.nodes[0], &sys.nodes[1], &sys.nodes[2]];
    if lo.point.chart != mid.point.chart || hi.point.chart != mid.point.chart {
        return Err(Error::ChartDomain { chart: m.chart(mid.point.chart).name.clone(), detail: "chart switch inside the stencil".into() });
    }
    let n = z.dim();
    let gam = m.christoffel(mid.point.chart, &mid.point.q)?;
    let vel = m.velocity(&mid.point)?;
    let mut worst = 0.0f64;
    for (a, b, c, fields) in [(&lo.dv, &mid.dv, &hi.dv, &mid.v), (&lo.dw, &mid.dw, &hi.dw, &mid.w)] {
        let deriv = (c - a) / Complex64::new(2.0 * h, 0.0);
        for col in 0..n {
            let w: Vec<Complex64> = fields.column(col).iter().copied().collect();
            let curv = m.curvature_operator(mid.point.chart, &mid.point.q, &w, &vel)?;
            for i in 0..n {
                let mut s = deriv[(i, col)] + curv[i];
                for j in 0..n {
                    for k in 0..n {
                        s += gam[i][(j, k)] * vel[j] * b[(k, col)];
                    }
                }
                worst = worst.max(s.norm());
            }
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug)]
pub enum Continuation {
    ClosedForm(ClosedFormOracle),
    Pade { l: usize, m: usize },
}

/// Samples of `f_z(σ)` on the real axis and, once continued, `f_z(i)`.
#[derive(Clone, Debug)]
pub struct FMatrix {
    pub base: PhasePoint,
    pub speed: f64,
    pub adapted: bool,
    pub samples: Vec<(f64, RMat)>,
    /// Sample locations dropped as (near) conjugate points.
    pub excluded: Vec<f64>,
    pub half_width: f64,
    pub continuation: Option<Continuation>,
    pub value_at_i: Option<CMat>,
    pub poles: Vec<Complex64>,
    pub warnings: Vec<String>,
}

impl FMatrix {
    pub fn f1(&self) -> Option<RMat> {
        self.value_at_i.as_ref().map(linalg::real_part)
    }

    pub fn f2(&self) -> Option<RMat> {
        self.value_at_i.as_ref().map(|v| v.map(|x| x.im))
    }
}

/// `f = (V^{-1} W)^T` at each node, skipping nodes where `V` is ill-conditioned.
pub fn f_samples(system: &JacobiSystem, m: &MetricModel) -> Result<FMatrix> {
    let mut samples = Vec::new();
    let mut excluded = Vec::new();
    for node in &system.nodes {
        if node.sigma == 0.0 {
            let n = node.v.nrows();
            samples.push((0.0, RMat::zeros(n, n)));
            continue;
        }
        if linalg::condition_number(&node.v) >= MAX_FIELD_CONDITION {
            excluded.push(node.sigma);
            continue;
        }
        let x = linalg::solve(&node.v, &node.w).ok_or_else(|| Error::ConjugatePoint(format!("V singular at σ = {}", node.sigma)))?;
        samples.push((node.sigma, linalg::real_part(&x.transpose())));
    }
    if samples.iter().all(|(s, _)| *s == 0.0) {
        return Err(Error::ConjugatePoint("every sample lies at a conjugate point".into()));
    }
    let half_width = system.nodes.iter().fold(0.0f64, |a, nd| a.max(nd.sigma.abs()));
    Ok(FMatrix {
        base: system.lifts.base.clone(),
        speed: m.speed(&system.lifts.base)?.re,
        adapted: system.lifts.adapted,
        samples,
        excluded,
        half_width,
        continuation: None,
        value_at_i: None,
        poles: Vec::new(),
        warnings: Vec::new(),
    })
}

/// Samples `f` at `count` Chebyshev points on `[-s, s]`.
pub fn f_chebyshev_samples(z: &PhasePoint, m: &MetricModel, count: usize, s: f64, tol: f64) -> Result<FMatrix> {
    let sys = jacobi_fields(z, &pade::chebyshev_points(count, s), m, tol)?;
    let mut fm = f_samples(&sys, m)?;
    fm.half_width = s;
    Ok(fm)
}

impl ClosedFormOracle {
    /// `f(σ)` in the adapted orthonormal basis for a geodesic of speed `rho`.
    pub fn f_matrix(&self, n: usize, rho: f64, sigma: Complex64) -> CMat {
        let mut f = CMat::identity(n, n) * sigma;
        if let ClosedFormOracle::Sphere { radius } = *self {
            if rho > 0.0 {
                let k = rho / radius;
                for j in 1..n {
                    f[(j, j)] = (sigma * k).tan() / k;
                }
            }
        }
        f
    }

    /// Distance from 0 to the nearest pole of `f` for speed `rho`.
    pub fn pole_radius(&self, rho: f64) -> f64 {
        match *self {
            ClosedFormOracle::Flat => f64::INFINITY,
            ClosedFormOracle::Sphere { radius } => {
                if rho == 0.0 {
                    f64::INFINITY
                } else {
                    std::f64::consts::FRAC_PI_2 * radius / rho
                }
            }
        }
    }

    /// Geodesic with initial point `x` and velocity `w` in the model
    /// embedding, continued to complex σ: position and velocity.
    pub fn geodesic(&self, x: &[Complex64], w: &[Complex64], sigma: Complex64) -> (Vec<Complex64>, Vec<Complex64>) {
        match *self {
            ClosedFormOracle::Flat => (x.iter().zip(w).map(|(a, b)| a + b * sigma).collect(), w.to_vec()),
            ClosedFormOracle::Sphere { radius } => {
                let om2: Complex64 = w.iter().map(|a| a * a).sum::<Complex64>() / (radius * radius);
                let (c, sn) = even_trig(om2, sigma);
                let pos = x.iter().zip(w).map(|(a, b)| a * c + b * sn).collect();
                let vel = x.iter().zip(w).map(|(a, b)| -a * om2 * sn + b * c).collect();
                (pos, vel)
            }
        }
    }
}

/// `cos(σω)` and `sin(σω)/ω` as functions of `ω²` (both even in ω).
pub fn even_trig(om2: Complex64, sigma: Complex64) -> (Complex64, Complex64) {
    let om = om2.sqrt();
    if om.norm() * sigma.norm() < 1e-4 {
        let x = sigma * sigma * om2;
        let c = 1.0 - x / 2.0 + x * x / 24.0 - x * x * x / 720.0;
        let s = sigma * (1.0 - x / 6.0 + x * x / 120.0 - x * x * x / 5040.0);
        (c, s)
    } else {
        ((sigma * om).cos(), (sigma * om).sin() / om)
    }
}

/// Continues `f` to σ = i.
pub fn continue_f_to_i(fm: &FMatrix, method: Continuation) -> Result<FMatrix> {
    let n = fm.base.dim();
    let mut out = fm.clone();
    match &method {
        Continuation::ClosedForm(oracle) => {
            if !fm.adapted {
                return Err(Error::InvalidParams("closed form needs the adapted basis".into()));
            }
            out.value_at_i = Some(oracle.f_matrix(n, fm.speed, I));
            let r = oracle.pole_radius(fm.speed);
            if r.is_finite() {
                out.poles = vec![Complex64::new(r, 0.0), Complex64::new(-r, 0.0)];
            }
        }
        Continuation::Pade { l, m } => {
            let xs: Vec<f64> = fm.samples.iter().map(|(s, _)| *s).collect();
            let scale = fm.half_width.max(xs.iter().fold(0.0f64, |a, x| a.max(x.abs())));
            let global = fm.samples.iter().fold(0.0f64, |a, (_, f)| a.max(f.abs().max()));
            let mut value = CMat::zeros(n, n);
            let mut poles = Vec::new();
            for r in 0..n {
                for c in 0..n {
                    let ys: Vec<f64> = fm.samples.iter().map(|(_, f)| f[(r, c)]).collect();
                    let ymax = ys.iter().fold(0.0f64, |a, y| a.max(y.abs()));
                    if ymax <= 1e-11 * global {
                        continue;
                    }
                    let p: Pade = pade::fit(&xs, &ys, *l, *m, scale)?;
                    let v = p.eval(I);
                    if !v.is_finite() {
                        return Err(Error::PadeDegeneracy(format!("entry ({r},{c}) has a pole at i")));
                    }
                    value[(r, c)] = v;
                    poles.extend(p.poles());
                }
            }
            out.value_at_i = Some(value);
            out.poles = poles;
        }
    }
    out.warnings.clear();
    let inside: Vec<Complex64> = out.poles.iter().copied().filter(|p| p.norm() <= 1.05).collect();
    if !inside.is_empty() {
        out.warnings.push(format!("approximant has {} pole(s) with |σ| <= 1.05, nearest at |σ| = {:.4}", inside.len(), inside.iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min)));
    }
    out.continuation = Some(method);
    Ok(out)
}

/// `J` from `f(i) = f1 + i f2` via `J ξ_j = (f2^{-1})_j^k (η_k − (f1)_k^l ξ_l)`,
/// completed on the η's by `J² = −I`.
pub fn j_tensor_from_f(fm: &FMatrix, lifts: &Lifts) -> Result<JTensor> {
    let n = fm.base.dim();
    let (f1, f2) = match (fm.f1(), fm.f2()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::InvalidParams("f has not been continued to i".into())),
    };
    let min_eig = linalg::symmetric_eigenvalues_real(&f2)[0];
    if min_eig <= 0.0 {
        return Err(Error::Positivity { min_eig });
    }
    let f2inv = f2.clone().try_inverse().ok_or(Error::Positivity { min_eig })?;
    let p = -(&f2inv * &f1).transpose();
    let r = f2inv.transpose();
    let rinv = r.clone().try_inverse().ok_or(Error::Positivity { min_eig })?;
    let q = -(RMat::identity(n, n) + &p * &p) * &rinv;
    let s = -(&r * &p * &rinv);
    let mut jj = RMat::zeros(2 * n, 2 * n);
    jj.view_mut((0, 0), (n, n)).copy_from(&p);
    jj.view_mut((0, n), (n, n)).copy_from(&q);
    jj.view_mut((n, 0), (n, n)).copy_from(&r);
    jj.view_mut((n, n), (n, n)).copy_from(&s);
    let b = linalg::real_part(&lifts.basis_matrix());
    let binv = b.clone().try_inverse().ok_or_else(|| Error::DegenerateFrame("lift basis is singular".into()))?;
    Ok(JTensor::from_matrix(fm.base.clone(), b * jj * binv))
}

/// Jacobi-route `J` at a real point: Chebyshev samples, Padé continuation.
pub fn j_tensor_jacobi_route(z: &PhasePoint, m: &MetricModel, tol: f64) -> Result<(JTensor, FMatrix)> {
    let fm = f_chebyshev_samples(z, m, 21, 1.0, tol)?;
    let fm = continue_f_to_i(&fm, Continuation::Pade { l: 8, m: 8 })?;
    let lf = lifts(z, m, None)?;
    Ok((j_tensor_from_f(&fm, &lf)?, fm))
}
