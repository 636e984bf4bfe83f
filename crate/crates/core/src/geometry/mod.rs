//! Chart-based real-analytic metrics and their holomorphic extensions.

mod catalog;

pub use catalog::{catalog, ModelParams, MODEL_NAMES};

use crate::error::{Error, Result};
use crate::expr::{Expr, Tape};
use crate::jet::Scalar;
use crate::linalg::{CMat, ZERO};
use num_complex::Complex64;

/// A coordinate chart: a box of real coordinates, an allowed imaginary margin
/// per coordinate, and the metric components as expressions in the
/// coordinates.
#[derive(Clone, Debug)]
pub struct Chart {
    pub name: String,
    pub center: Vec<f64>,
    /// `f64::INFINITY` marks an unbounded direction.
    pub half_width: Vec<f64>,
    pub margin: Vec<f64>,
    pub metric: Vec<Vec<Expr>>,
    /// Coordinates of a model embedding (used by closed-form oracles).
    pub embedding: Option<Vec<Expr>>,
    first: Tape,
    second: Tape,
    embed_tape: Option<Tape>,
}

impl Chart {
    pub fn new(
        name: &str,
        center: Vec<f64>,
        half_width: Vec<f64>,
        margin: Vec<f64>,
        metric: Vec<Vec<Expr>>,
        embedding: Option<Vec<Expr>>,
    ) -> Chart {
        let n = center.len();
        let mut first: Vec<Expr> = Vec::with_capacity(n * n * (n + 1));
        for row in &metric {
            first.extend(row.iter().cloned());
        }
        for l in 0..n {
            for row in &metric {
                first.extend(row.iter().map(|e| e.diff(l)));
            }
        }
        let mut second = first.clone();
        for l in 0..n {
            for m in 0..n {
                for row in &metric {
                    second.extend(row.iter().map(|e| e.diff(l).diff(m)));
                }
            }
        }
        let embed_tape = embedding.as_ref().map(|e| {
            let mut outs = e.clone();
            for l in 0..n {
                outs.extend(e.iter().map(|x| x.diff(l)));
            }
            Tape::compile(&outs)
        });
        Chart {
            name: name.to_string(),
            center,
            half_width,
            margin,
            metric,
            embedding,
            first: Tape::compile(&first),
            second: Tape::compile(&second),
            embed_tape,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Normalized distance from the chart center; the safe interior is `< 0.8`.
    pub fn score(&self, q: &[Complex64]) -> f64 {
        q.iter()
            .zip(self.center.iter().zip(&self.half_width))
            .map(|(x, (c, hw))| if hw.is_finite() { (x - c).norm() / hw } else { 0.0 })
            .fold(0.0, f64::max)
    }

    pub fn in_margin(&self, q: &[Complex64]) -> bool {
        q.iter().zip(&self.margin).all(|(x, m)| x.im.abs() <= *m) && q.iter().all(|x| x.is_finite())
    }

    pub fn check_margin(&self, q: &[Complex64]) -> Result<()> {
        if self.in_margin(q) {
            return Ok(());
        }
        Err(Error::ChartDomain {
            chart: self.name.clone(),
            detail: format!("imaginary parts {:?} exceed margin {:?}", q.iter().map(|x| x.im).collect::<Vec<_>>(), self.margin),
        })
    }

    /// `g` (n*n, row major) followed by `d_l g` for each l.
    pub fn eval_first<S: Scalar>(&self, q: &[S]) -> Vec<S> {
        self.first.eval(q)
    }

    /// As [`Chart::eval_first`], followed by `d_l d_m g` for each (l, m).
    pub fn eval_second<S: Scalar>(&self, q: &[S]) -> Vec<S> {
        self.second.eval(q)
    }

    /// Embedding value and its Jacobian (rows: ambient coordinate, columns: chart coordinate).
    pub fn embed(&self, q: &[Complex64]) -> Option<(Vec<Complex64>, CMat)> {
        let tape = self.embed_tape.as_ref()?;
        let out: Vec<Complex64> = tape.eval(q);
        let n = self.dim();
        let k = out.len() / (n + 1);
        let x = out[..k].to_vec();
        let jac = CMat::from_fn(k, n, |a, l| out[k + l * k + a]);
        Some((x, jac))
    }
}

/// A coordinate change between two charts, with first and second derivatives.
#[derive(Clone, Debug)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub map: Vec<Expr>,
    tape: Tape,
}

impl Transition {
    pub fn new(from: usize, to: usize, map: Vec<Expr>) -> Transition {
        let n = map.len();
        let mut outs = map.clone();
        for m in &map {
            for l in 0..n {
                outs.push(m.diff(l));
            }
        }
        for m in &map {
            for l in 0..n {
                for k in 0..n {
                    outs.push(m.diff(l).diff(k));
                }
            }
        }
        Transition { from, to, tape: Tape::compile(&outs), map }
    }

    /// New coordinates, the Jacobian `M[a][l] = d q'_a / d q_l`, and its
    /// derivatives `dM[k][(a, l)]`.
    pub fn eval(&self, q: &[Complex64]) -> (Vec<Complex64>, CMat, Vec<CMat>) {
        let n = self.map.len();
        let out: Vec<Complex64> = self.tape.eval(q);
        let q2 = out[..n].to_vec();
        let m = CMat::from_fn(n, n, |a, l| out[n + a * n + l]);
        let dm = (0..n)
            .map(|k| CMat::from_fn(n, n, |a, l| out[n + n * n + a * n * n + l * n + k]))
            .collect();
        (q2, m, dm)
    }
}

/// Metric, inverse metric and derivatives at a point.
#[derive(Clone, Debug)]
pub struct MetricData {
    pub g: CMat,
    pub ginv: CMat,
    /// `dg[l] = d g / d q^l`
    pub dg: Vec<CMat>,
    /// `ddg[l][m] = d^2 g / d q^l d q^m`, empty unless requested.
    pub ddg: Vec<Vec<CMat>>,
}

/// How tube sample points are drawn for a model.
#[derive(Clone, Debug)]
pub enum Sampler {
    /// Uniform over a coordinate box of one chart.
    Box { chart: usize, lo: Vec<f64>, hi: Vec<f64> },
    /// Uniform over a round sphere using the two stereographic charts 0 and 1.
    Sphere { radius: f64 },
}

/// Models with exact geodesic flow and Jacobi fields.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClosedFormOracle {
    Flat,
    Sphere { radius: f64 },
}

#[derive(Clone, Debug)]
pub struct ManifoldPoint {
    pub chart: usize,
    pub coords: Vec<Complex64>,
}

impl ManifoldPoint {
    pub fn is_real(&self) -> bool {
        self.coords.iter().all(|x| x.im == 0.0)
    }
}

#[derive(Clone, Debug)]
pub struct TangentVector {
    pub base: ManifoldPoint,
    pub components: Vec<Complex64>,
}

/// A point of the cotangent bundle in Darboux coordinates of a chart.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub chart: usize,
    pub q: Vec<Complex64>,
    pub p: Vec<Complex64>,
}

impl PhasePoint {
    pub fn new(chart: usize, q: Vec<Complex64>, p: Vec<Complex64>) -> Self {
        assert_eq!(q.len(), p.len());
        PhasePoint { chart, q, p }
    }

    pub fn real(chart: usize, q: &[f64], p: &[f64]) -> Self {
        PhasePoint {
            chart,
            q: q.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            p: p.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn is_real(&self) -> bool {
        self.q.iter().chain(&self.p).all(|x| x.im == 0.0)
    }

    /// Fiber scaling `N_c`.
    pub fn scaled(&self, c: f64) -> Self {
        PhasePoint { chart: self.chart, q: self.q.clone(), p: self.p.iter().map(|x| x * c).collect() }
    }

    pub fn base(&self) -> ManifoldPoint {
        ManifoldPoint { chart: self.chart, coords: self.q.clone() }
    }

    /// State vector `(q, p)`.
    pub fn state(&self) -> Vec<Complex64> {
        self.q.iter().chain(&self.p).copied().collect()
    }

    pub fn from_state(chart: usize, y: &[Complex64]) -> Self {
        let n = y.len() / 2;
        PhasePoint { chart, q: y[..n].to_vec(), p: y[n..].to_vec() }
    }

    pub fn max_dist(&self, other: &PhasePoint) -> f64 {
        self.state().iter().zip(other.state()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// A Riemannian manifold given by an atlas of analytic charts.
#[derive(Clone, Debug)]
pub struct MetricModel {
    pub name: String,
    /// Human-readable parameter list, e.g. `radius=1`.
    pub params: Vec<(String, f64)>,
    pub charts: Vec<Chart>,
    pub transitions: Vec<Transition>,
    pub sampler: Sampler,
    pub oracle: Option<ClosedFormOracle>,
}

impl MetricModel {
    pub fn dim(&self) -> usize {
        self.charts[0].dim()
    }

    pub fn chart(&self, i: usize) -> &Chart {
        &self.charts[i]
    }

    pub fn chart_index(&self, name: &str) -> Option<usize> {
        self.charts.iter().position(|c| c.name == name)
    }

    pub fn params_string(&self) -> String {
        self.params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
    }

    pub fn metric_data(&self, chart: usize, q: &[Complex64], second: bool) -> Result<MetricData> {
        let ch = self.chart(chart);
        ch.check_margin(q)?;
        let n = self.dim();
        let vals: Vec<Complex64> = if second { ch.eval_second(q) } else { ch.eval_first(q) };
        let n2 = n * n;
        let g = CMat::from_row_slice(n, n, &vals[..n2]);
        let ginv = g.clone().try_inverse().ok_or_else(|| Error::ChartDomain {
            chart: ch.name.clone(),
            detail: "metric is singular".into(),
        })?;
        let dg = (0..n).map(|l| CMat::from_row_slice(n, n, &vals[n2 + l * n2..n2 + (l + 1) * n2])).collect();
        let ddg = if second {
            let base = n2 + n * n2;
            (0..n)
                .map(|l| {
                    (0..n)
                        .map(|m| {
                            let o = base + (l * n + m) * n2;
                            CMat::from_row_slice(n, n, &vals[o..o + n2])
                        })
                        .collect()
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(MetricData { g, ginv, dg, ddg })
    }

    pub fn metric(&self, chart: usize, q: &[Complex64]) -> Result<CMat> {
        Ok(self.metric_data(chart, q, false)?.g)
    }

    /// `E = 1/2 g^{jk} p_j p_k`.
    pub fn energy(&self, z: &PhasePoint) -> Result<Complex64> {
        let md = self.metric_data(z.chart, &z.q, false)?;
        let p = nalgebra::DVector::from_column_slice(&z.p);
        Ok((p.transpose() * &md.ginv * &p)[(0, 0)] * 0.5)
    }

    /// `v = g^{-1} p`.
    pub fn velocity(&self, z: &PhasePoint) -> Result<Vec<Complex64>> {
        let md = self.metric_data(z.chart, &z.q, false)?;
        let p = nalgebra::DVector::from_column_slice(&z.p);
        Ok((&md.ginv * p).iter().copied().collect())
    }

    /// Phase point for base point `q` and tangent vector `v` (`p = g v`).
    pub fn phase_from_velocity(&self, chart: usize, q: &[Complex64], v: &[Complex64]) -> Result<PhasePoint> {
        let g = self.metric(chart, q)?;
        let vv = nalgebra::DVector::from_column_slice(v);
        Ok(PhasePoint::new(chart, q.to_vec(), (g * vv).iter().copied().collect()))
    }

    /// `sqrt(g(v, v))` for the velocity of `z`, principal branch.
    pub fn speed(&self, z: &PhasePoint) -> Result<Complex64> {
        Ok((self.energy(z)? * 2.0).sqrt())
    }

    /// `Gamma[i][(j, k)] = Γ^i_jk`.
    pub fn christoffel(&self, chart: usize, q: &[Complex64]) -> Result<Vec<CMat>> {
        let md = self.metric_data(chart, q, false)?;
        Ok(christoffel_from(&md))
    }

    /// `R^i_jkl` stored at `[i][j][k][l]`, with `R(X, Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z`
    /// and `R(∂_k, ∂_l)∂_j = R^i_jkl ∂_i`.
    pub fn riemann(&self, chart: usize, q: &[Complex64]) -> Result<Vec<Vec<Vec<Vec<Complex64>>>>> {
        let n = self.dim();
        let md = self.metric_data(chart, q, true)?;
        let gam = christoffel_from(&md);
        let dgam = christoffel_derivatives(&md);
        let mut r = vec![vec![vec![vec![ZERO; n]; n]; n]; n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut v = dgam[k][i][(l, j)] - dgam[l][i][(k, j)];
                        for m in 0..n {
                            v += gam[i][(k, m)] * gam[m][(l, j)] - gam[i][(l, m)] * gam[m][(k, j)];
                        }
                        r[i][j][k][l] = v;
                    }
                }
            }
        }
        Ok(r)
    }

    /// `R(w, u)u`, the curvature term of the Jacobi equation.
    pub fn curvature_operator(&self, chart: usize, q: &[Complex64], w: &[Complex64], u: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.dim();
        let r = self.riemann(chart, q)?;
        Ok((0..n)
            .map(|i| {
                let mut acc = ZERO;
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            acc += r[i][j][k][l] * u[j] * w[k] * u[l];
                        }
                    }
                }
                acc
            })
            .collect())
    }

    /// Sectional curvature of the plane spanned by `u`, `w`.
    pub fn sectional_curvature(&self, chart: usize, q: &[Complex64], u: &[Complex64], w: &[Complex64]) -> Result<Complex64> {
        let g = self.metric(chart, q)?;
        let ruw = self.curvature_operator(chart, q, u, w)?;
        let ip = |a: &[Complex64], b: &[Complex64]| {
            let mut s = ZERO;
            for j in 0..a.len() {
                for k in 0..b.len() {
                    s += g[(j, k)] * a[j] * b[k];
                }
            }
            s
        };
        // ⟨R(u, w)w, u⟩
        let num = ip(&ruw, u);
        let den = ip(u, u) * ip(w, w) - ip(u, w) * ip(u, w);
        Ok(num / den)
    }

    pub fn transition(&self, from: usize, to: usize) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.from == from && t.to == to)
    }

    /// Re-expresses `z` in chart `to`. Also returns the phase-space Jacobian
    /// `T = [[M, 0], [K, M^{-T}]]` of the change of Darboux coordinates.
    pub fn change_chart(&self, z: &PhasePoint, to: usize) -> Result<(PhasePoint, CMat)> {
        let n = self.dim();
        if to == z.chart {
            return Ok((z.clone(), CMat::identity(2 * n, 2 * n)));
        }
        let t = self.transition(z.chart, to).ok_or_else(|| Error::ChartDomain {
            chart: self.chart(z.chart).name.clone(),
            detail: format!("no transition to chart `{}`", self.chart(to).name),
        })?;
        let (q2, m, dm) = t.eval(&z.q);
        let bad = || Error::ChartDomain {
            chart: self.chart(z.chart).name.clone(),
            detail: format!("transition to `{}` is singular here", self.chart(to).name),
        };
        let mit = m.clone().try_inverse().ok_or_else(bad)?.transpose();
        let p = nalgebra::DVector::from_column_slice(&z.p);
        let p2 = &mit * &p;
        let mut k = CMat::zeros(n, n);
        for (col, dmk) in dm.iter().enumerate() {
            let c = -(&mit * dmk.transpose() * &p2);
            k.set_column(col, &c);
        }
        let tm = crate::linalg::blocks(&m, &CMat::zeros(n, n), &k, &mit);
        let z2 = PhasePoint::new(to, q2, p2.iter().copied().collect());
        if !z2.state().iter().all(|x| x.is_finite()) || !tm.iter().all(|x| x.is_finite()) {
            return Err(bad());
        }
        Ok((z2, tm))
    }

    /// The chart reachable from `chart` with the lowest score at this point,
    /// if it beats the current one and the point lies within its margin.
    pub fn better_chart(&self, z: &PhasePoint) -> Option<usize> {
        let cur = self.chart(z.chart).score(&z.q);
        let cur_ok = self.chart(z.chart).in_margin(&z.q);
        let mut best: Option<(usize, f64)> = None;
        for t in self.transitions.iter().filter(|t| t.from == z.chart) {
            let (q2, _, _) = t.eval(&z.q);
            let ch = self.chart(t.to);
            if !ch.in_margin(&q2) {
                continue;
            }
            let s = ch.score(&q2);
            if s.is_finite() && best.is_none_or(|(_, b)| s < b) {
                best = Some((t.to, s));
            }
        }
        match best {
            Some((i, s)) if !cur_ok || s < cur => Some(i),
            _ => None,
        }
    }

    /// g-orthonormal basis of `T_q M` by Gram–Schmidt, starting from `first`
    /// when given (columns of the result).
    pub fn orthonormal_frame(&self, chart: usize, q: &[Complex64], first: Option<&[Complex64]>) -> Result<CMat> {
        let n = self.dim();
        let g = self.metric(chart, q)?;
        let ip = |a: &nalgebra::DVector<Complex64>, b: &nalgebra::DVector<Complex64>| (a.transpose() * &g * b)[(0, 0)];
        let mut cands: Vec<nalgebra::DVector<Complex64>> = Vec::new();
        if let Some(f) = first {
            cands.push(nalgebra::DVector::from_column_slice(f));
        }
        for j in 0..n {
            let mut e = nalgebra::DVector::zeros(n);
            e[j] = Complex64::new(1.0, 0.0);
            cands.push(e);
        }
        let mut basis: Vec<nalgebra::DVector<Complex64>> = Vec::new();
        for mut c in cands {
            if basis.len() == n {
                break;
            }
            for b in &basis {
                let proj = ip(b, &c);
                c -= b * proj;
            }
            let norm2 = ip(&c, &c);
            if norm2.norm() < 1e-20 {
                continue;
            }
            c /= norm2.sqrt();
            basis.push(c);
        }
        if basis.len() < n {
            return Err(Error::DegenerateFrame("could not complete an orthonormal basis".into()));
        }
        Ok(CMat::from_columns(&basis))
    }
}

pub(crate) fn christoffel_from(md: &MetricData) -> Vec<CMat> {
    let n = md.g.nrows();
    (0..n)
        .map(|i| {
            CMat::from_fn(n, n, |j, k| {
                let mut s = ZERO;
                for l in 0..n {
                    s += md.ginv[(i, l)] * (md.dg[j][(l, k)] + md.dg[k][(l, j)] - md.dg[l][(j, k)]);
                }
                s * 0.5
            })
        })
        .collect()
}

/// `out[m][i][(j, k)] = d_m Γ^i_jk`; needs second derivatives in `md`.
pub(crate) fn christoffel_derivatives(md: &MetricData) -> Vec<Vec<CMat>> {
    let n = md.g.nrows();
    (0..n)
        .map(|m| {
            let dginv = -(&md.ginv * &md.dg[m] * &md.ginv);
            (0..n)
                .map(|i| {
                    CMat::from_fn(n, n, |j, k| {
                        let mut s = ZERO;
                        for l in 0..n {
                            let bracket = md.dg[j][(l, k)] + md.dg[k][(l, j)] - md.dg[l][(j, k)];
                            let dbracket = md.ddg[j][m][(l, k)] + md.ddg[k][m][(l, j)] - md.ddg[l][m][(j, k)];
                            s += dginv[(i, l)] * bracket + md.ginv[(i, l)] * dbracket;
                        }
                        s * 0.5
                    })
                })
                .collect()
        })
        .collect()
}

/// Solves the small dense system `a x = b` over any scalar type by Gaussian
/// elimination with partial pivoting on the constant terms.
pub(crate) fn solve_scalar<S: Scalar>(mut a: Vec<Vec<S>>, mut b: Vec<S>) -> Vec<S> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].value().norm().total_cmp(&a[y][col].value().norm()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col].clone() / a[col][col].clone();
            for k in col..n {
                let t = f.clone() * a[col][k].clone();
                a[row][k] = a[row][k].clone() - t;
            }
            let t = f * b[col].clone();
            b[row] = b[row].clone() - t;
        }
    }
    let mut x = vec![S::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row].clone();
        for k in row + 1..n {
            acc = acc - a[row][k].clone() * x[k].clone();
        }
        x[row] = acc / a[row][row].clone();
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn scalar_solver_matches_nalgebra() {
        let a = vec![vec![c(1.0, 0.2), c(2.0, 0.0)], vec![c(0.5, -1.0), c(0.1, 0.0)]];
        let b = vec![c(1.0, 0.0), c(0.0, 1.0)];
        let x = solve_scalar(a.clone(), b.clone());
        for (row, bi) in a.iter().zip(&b) {
            let lhs = row[0] * x[0] + row[1] * x[1];
            assert!((lhs - bi).norm() < 1e-14);
        }
    }
}
