//! Deterministic quasi-random sampling of phase points: Halton sequences
//! with a seeded Cranley–Patterson shift.

use crate::error::{Error, Result};
use crate::geometry::{MetricModel, PhasePoint, Sampler};
use crate::linalg::c;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Radical inverse of `index` in base `b`.
pub fn radical_inverse(mut index: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % b) as f64;
        index /= b;
        f *= inv;
    }
    r
}

/// Shifted Halton points in `[0, 1)^dims`.
#[derive(Clone, Debug)]
pub struct Halton {
    shift: Vec<f64>,
    next: u64,
}

impl Halton {
    pub fn new(dims: usize, seed: u64) -> Result<Halton> {
        if dims > PRIMES.len() {
            return Err(Error::InvalidParams(format!("at most {} sampling dimensions", PRIMES.len())));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dims).map(|_| rng.random::<f64>()).collect();
        Ok(Halton { shift, next: 1 })
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.next;
        self.next += 1;
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(s, b)| (radical_inverse(i, b) + s).fract())
            .collect()
    }
}

/// Base point in the model's sampling region from `n` (sphere: 2) uniforms.
fn base_point(m: &MetricModel, u: &[f64]) -> (usize, Vec<f64>) {
    match &m.sampler {
        Sampler::Box { chart, lo, hi } => (*chart, lo.iter().zip(hi).zip(u).map(|((l, h), t)| l + (h - l) * t).collect()),
        Sampler::Sphere { .. } => {
            let z = 2.0 * u[0] - 1.0;
            let phi = 2.0 * PI * u[1];
            let s = (1.0 - z * z).max(0.0).sqrt();
            let x = [s * phi.cos(), s * phi.sin(), z];
            // chart N covers the southern hemisphere, S the northern one
            let (chart, den) = if x[2] <= 0.0 { (0, 1.0 - x[2]) } else { (1, 1.0 + x[2]) };
            (chart, vec![x[0] / den, x[1] / den])
        }
    }
}

fn base_dims(m: &MetricModel) -> usize {
    match m.sampler {
        Sampler::Box { .. } => m.dim(),
        Sampler::Sphere { .. } => 2,
    }
}

/// Unit vector from `direction_dims(n)` uniforms.
fn direction(u: &[f64], n: usize) -> Vec<f64> {
    match n {
        1 => vec![if u[0] < 0.5 { -1.0 } else { 1.0 }],
        2 => {
            let a = 2.0 * PI * u[0];
            vec![a.cos(), a.sin()]
        }
        3 => {
            let z = 2.0 * u[0] - 1.0;
            let a = 2.0 * PI * u[1];
            let s = (1.0 - z * z).max(0.0).sqrt();
            vec![s * a.cos(), s * a.sin(), z]
        }
        _ => {
            // Box–Muller on pairs
            let mut d: Vec<f64> = (0..n)
                .map(|k| {
                    let (a, b) = (u[2 * (k / 2)], u[2 * (k / 2) + 1]);
                    let r = (-2.0 * (1.0 - a).ln()).sqrt();
                    let t = 2.0 * PI * b;
                    if k % 2 == 0 { r * t.cos() } else { r * t.sin() }
                })
                .collect();
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            d.iter_mut().for_each(|x| *x /= norm);
            d
        }
    }
}

fn direction_dims(n: usize) -> usize {
    if n <= 3 { n.max(2) - 1 } else { 2 * n.div_ceil(2) }
}

/// Phase point over `x` with velocity `speed · E d` for the g-orthonormal frame `E`.
fn phase_point(m: &MetricModel, chart: usize, x: &[f64], d: &[f64], speed: f64) -> Result<PhasePoint> {
    let q: Vec<Complex64> = x.iter().map(|&a| c(a, 0.0)).collect();
    let e = m.orthonormal_frame(chart, &q, None)?;
    let v: Vec<Complex64> = (0..m.dim()).map(|r| (0..m.dim()).map(|k| e[(r, k)] * d[k] * speed).sum()).collect();
    let z = m.phase_from_velocity(chart, &q, &v)?;
    // exactly real
    Ok(PhasePoint::real(chart, &z.q.iter().map(|a| a.re).collect::<Vec<_>>(), &z.p.iter().map(|a| a.re).collect::<Vec<_>>()))
}

/// `count` phase points with base points spread over the model and velocity
/// uniform in the ball `|v| <= rho_max`.
pub fn sample_points(m: &MetricModel, count: usize, rho_max: f64, seed: u64) -> Result<Vec<PhasePoint>> {
    let n = m.dim();
    let bd = base_dims(m);
    let dd = direction_dims(n);
    let mut h = Halton::new(bd + dd + 1, seed)?;
    (0..count)
        .map(|_| {
            let u = h.next_point();
            let (chart, x) = base_point(m, &u[..bd]);
            let d = direction(&u[bd..bd + dd], n);
            let r = rho_max * u[bd + dd].powf(1.0 / n as f64);
            phase_point(m, chart, &x, &d, r)
        })
        .collect()
}

/// Unit-speed phase points.
pub fn sample_unit_covectors(m: &MetricModel, count: usize, seed: u64) -> Result<Vec<PhasePoint>> {
    let n = m.dim();
    let bd = base_dims(m);
    let dd = direction_dims(n);
    let mut h = Halton::new(bd + dd, seed)?;
    (0..count)
        .map(|_| {
            let u = h.next_point();
            let (chart, x) = base_point(m, &u[..bd]);
            phase_point(m, chart, &x, &direction(&u[bd..], n), 1.0)
        })
        .collect()
}

/// Points of the zero section.
pub fn sample_zero_section(m: &MetricModel, count: usize, seed: u64) -> Result<Vec<PhasePoint>> {
    let bd = base_dims(m);
    let mut h = Halton::new(bd, seed)?;
    Ok((0..count)
        .map(|_| {
            let u = h.next_point();
            let (chart, x) = base_point(m, &u);
            PhasePoint::real(chart, &x, &vec![0.0; m.dim()])
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert_eq!(radical_inverse(6, 2), 0.375);
    }

    #[test]
    fn same_seed_same_points() {
        let mut a = Halton::new(3, 7).unwrap();
        let mut b = Halton::new(3, 7).unwrap();
        for _ in 0..10 {
            assert_eq!(a.next_point(), b.next_point());
        }
    }
}
