//! Rational least-squares fits in a Chebyshev basis, used to continue
//! real-axis samples of `f_z(σ)` into the complex plane.

use crate::error::{Error, Result};
use crate::linalg::RMat;
use num_complex::Complex64;

/// `p(x/s) / q(x/s)` with `p`, `q` in Chebyshev form.
#[derive(Clone, Debug)]
pub struct Pade {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
    pub scale: f64,
}

fn chebyshev_row(x: f64, deg: usize) -> Vec<f64> {
    let mut t = vec![1.0; deg + 1];
    if deg >= 1 {
        t[1] = x;
    }
    for k in 2..=deg {
        t[k] = 2.0 * x * t[k - 1] - t[k - 2];
    }
    t
}

fn chebyshev_eval(c: &[f64], x: Complex64) -> Complex64 {
    // Clenshaw
    let mut b1 = Complex64::new(0.0, 0.0);
    let mut b2 = Complex64::new(0.0, 0.0);
    for &ck in c.iter().skip(1).rev() {
        let b0 = x * b1 * 2.0 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    x * b1 - b2 + c[0]
}

/// Chebyshev points of the first kind on `[-s, s]`.
pub fn chebyshev_points(count: usize, s: f64) -> Vec<f64> {
    (0..count)
        .map(|k| s * (std::f64::consts::PI * (k as f64 + 0.5) / count as f64).cos())
        .collect()
}

impl Pade {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let x = z / self.scale;
        chebyshev_eval(&self.num, x) / chebyshev_eval(&self.den, x)
    }

    pub fn degrees(&self) -> (usize, usize) {
        (self.num.len() - 1, self.den.len() - 1)
    }

    /// Zeros of the denominator in the σ-plane.
    pub fn poles(&self) -> Vec<Complex64> {
        let mono = chebyshev_to_monomial(&self.den);
        let max = mono.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let mut deg = mono.len() - 1;
        while deg > 0 && mono[deg].abs() <= 1e-12 * max {
            deg -= 1;
        }
        if deg == 0 {
            return Vec::new();
        }
        let lead = mono[deg];
        let mut comp = RMat::zeros(deg, deg);
        for i in 1..deg {
            comp[(i, i - 1)] = 1.0;
        }
        for i in 0..deg {
            comp[(i, deg - 1)] = -mono[i] / lead;
        }
        comp.complex_eigenvalues().iter().map(|r| r * self.scale).collect()
    }
}

fn chebyshev_to_monomial(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut out = vec![0.0; n];
    let mut tkm1 = vec![0.0; n];
    let mut tk = vec![0.0; n];
    tkm1[0] = 1.0;
    if n > 0 {
        out[0] += c[0];
    }
    if n > 1 {
        tk[1] = 1.0;
        out[1] += c[1];
    }
    for ck in c.iter().skip(2) {
        let mut next = vec![0.0; n];
        for i in 0..n - 1 {
            next[i + 1] += 2.0 * tk[i];
        }
        for i in 0..n {
            next[i] -= tkm1[i];
        }
        for i in 0..n {
            out[i] += ck * next[i];
        }
        tkm1 = tk;
        tk = next;
    }
    out
}

/// Linearized least-squares fit of type `[l/m]` to samples `(x, y)` on `[-s, s]`.
/// When the coefficient system has a multi-dimensional null space the degrees
/// are lowered until it is one-dimensional.
pub fn fit(xs: &[f64], ys: &[f64], l: usize, m: usize, s: f64) -> Result<Pade> {
    if xs.len() != ys.len() || xs.len() < l + m + 1 {
        return Err(Error::PadeDegeneracy(format!("need at least {} samples for [{l}/{m}], got {}", l + m + 1, xs.len())));
    }
    let ymax = ys.iter().fold(0.0f64, |a, y| a.max(y.abs()));
    if !ymax.is_finite() {
        return Err(Error::PadeDegeneracy("non-finite samples".into()));
    }
    if ymax == 0.0 {
        return Ok(Pade { num: vec![0.0], den: vec![1.0], scale: s });
    }
    let (mut l, mut m) = (l, m);
    loop {
        let cols = l + m + 2;
        let rows = xs.len().max(cols);
        let mut a = RMat::zeros(rows, cols);
        for (k, (&x, &y)) in xs.iter().zip(ys).enumerate() {
            let t = chebyshev_row(x / s, l.max(m));
            for j in 0..=l {
                a[(k, j)] = t[j];
            }
            for j in 0..=m {
                a[(k, l + 1 + j)] = -(y / ymax) * t[j];
            }
        }
        let svd = a.svd(false, true);
        let sv = &svd.singular_values;
        let smax = sv.max();
        let null = sv.iter().filter(|&&v| v <= 1e-14 * smax).count() + (cols - sv.len().min(cols));
        if null > 1 && m > 0 {
            let cut = (null - 1).min(m);
            l = l.saturating_sub(cut);
            m -= cut;
            continue;
        }
        let vt = svd.v_t.unwrap();
        let (imin, _) = sv.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
        let row = vt.row(imin);
        let num: Vec<f64> = (0..=l).map(|j| row[j] * ymax).collect();
        let den: Vec<f64> = (0..=m).map(|j| row[l + 1 + j]).collect();
        if den.iter().all(|d| d.abs() < 1e-14) {
            return Err(Error::PadeDegeneracy("denominator vanishes identically".into()));
        }
        return Ok(Pade { num, den, scale: s });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_tangent_off_the_interval() {
        let xs = chebyshev_points(21, 1.0);
        let ys: Vec<f64> = xs.iter().map(|x| (0.5 * x).tan() / 0.5).collect();
        let p = fit(&xs, &ys, 8, 8, 1.0).unwrap();
        let at_i = p.eval(Complex64::new(0.0, 1.0));
        let exact = Complex64::new(0.0, 0.5f64.tanh() / 0.5);
        assert!((at_i - exact).norm() < 1e-11, "{at_i} vs {exact}");
        // nearest poles of tan(σ/2) at ±π
        let near = p.poles().into_iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        assert!((near - std::f64::consts::PI).abs() < 1e-6, "{near}");
    }

    #[test]
    fn linear_function_reduces_degree() {
        let xs = chebyshev_points(21, 1.0);
        let ys = xs.clone();
        let p = fit(&xs, &ys, 8, 8, 1.0).unwrap();
        let (l, m) = p.degrees();
        assert!(l <= 2 && m <= 1, "[{l}/{m}]");
        assert!((p.eval(Complex64::new(0.0, 1.0)) - Complex64::new(0.0, 1.0)).norm() < 1e-13);
    }

    #[test]
    fn monomial_conversion() {
        // T2 = 2x^2 - 1, T3 = 4x^3 - 3x
        let m = chebyshev_to_monomial(&[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(m, vec![-1.0, -3.0, 2.0, 4.0]);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        assert!(matches!(fit(&[0.0, 0.5], &[0.0, 1.0], 2, 2, 1.0), Err(Error::PadeDegeneracy(_))));
    }
}
