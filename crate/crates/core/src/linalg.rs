//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub const fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| c(x, 0.0))
}

pub fn real_part(m: &CMat) -> RMat {
    m.map(|x| x.re)
}

pub fn max_imag(m: &CMat) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.im.abs()))
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.norm()))
}

/// Matrix of the Darboux form, `omega(X, Y) = X^T Omega Y`.
pub fn omega(n: usize) -> RMat {
    let mut o = RMat::zeros(2 * n, 2 * n);
    for j in 0..n {
        o[(j, n + j)] = 1.0;
        o[(n + j, j)] = -1.0;
    }
    o
}

/// `[[A, B], [C, D]]` from four n x n blocks.
pub fn blocks(a: &CMat, b: &CMat, cc: &CMat, d: &CMat) -> CMat {
    let n = a.nrows();
    let mut m = CMat::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.view_mut((0, n), (n, n)).copy_from(b);
    m.view_mut((n, 0), (n, n)).copy_from(cc);
    m.view_mut((n, n), (n, n)).copy_from(d);
    m
}

pub fn top(m: &CMat) -> CMat {
    let n = m.nrows() / 2;
    m.rows(0, n).into_owned()
}

pub fn bottom(m: &CMat) -> CMat {
    let n = m.nrows() / 2;
    m.rows(n, n).into_owned()
}

pub fn solve(a: &CMat, b: &CMat) -> Option<CMat> {
    a.clone().lu().solve(b)
}

pub fn inverse(a: &CMat) -> Option<CMat> {
    a.clone().try_inverse()
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    a.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Smallest over largest singular value; 0 for a zero matrix.
pub fn relative_min_sv(a: &CMat) -> f64 {
    let s = singular_values(a);
    let max = s.iter().cloned().fold(0.0, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

pub fn condition_number(a: &CMat) -> f64 {
    let r = relative_min_sv(a);
    if r == 0.0 {
        f64::INFINITY
    } else {
        1.0 / r
    }
}

pub fn op_norm(a: &CMat) -> f64 {
    singular_values(a).into_iter().fold(0.0, f64::max)
}

pub fn op_norm_real(a: &RMat) -> f64 {
    a.clone().svd(false, false).singular_values.iter().cloned().fold(0.0, f64::max)
}

/// Orthonormal basis of the column span (left singular vectors).
pub fn orthonormal_basis(f: &CMat) -> CMat {
    let k = f.ncols();
    let svd = f.clone().svd(true, false);
    svd.u.expect("left singular vectors").columns(0, k).into_owned()
}

/// Sines of the principal angles between two equal-dimensional column spans.
pub fn principal_angle_sines(a: &CMat, b: &CMat) -> Vec<f64> {
    let qa = orthonormal_basis(a);
    let qb = orthonormal_basis(b);
    let proj = &qb - &qa * (qa.adjoint() * &qb);
    singular_values(&proj)
}

/// Largest principal-angle sine; 0 means the spans coincide.
pub fn subspace_distance(a: &CMat, b: &CMat) -> f64 {
    principal_angle_sines(a, b).into_iter().fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian matrix (after symmetrizing roundoff), ascending.
pub fn hermitian_eigenvalues(h: &CMat) -> Vec<f64> {
    let sym = (h + h.adjoint()).scale(0.5);
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn symmetric_eigenvalues_real(h: &RMat) -> Vec<f64> {
    let sym = (h + h.transpose()).scale(0.5);
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}
