//! Complex Lagrangian subspaces `P_z(σ)` and the almost complex tensor `J`.
//!
//! Conventions: Darboux coordinates (q, p) with
//! `ω(a⊕b, a'⊕b') = a·b' − b·a'`, and `J(∂/∂q) = ∂/∂p` on the zero section of
//! the flat model. `P_z(i)` is the +i eigenspace of `J`.

use crate::error::{Error, Result};
use crate::geometry::{MetricModel, PhasePoint};
use crate::hamiltonian_flow::{flow, FlowOptions, SigmaPath};
use crate::jacobi::Lifts;
use crate::linalg::{self, blocks, bottom, top, CMat, RMat, I, ONE, ZERO};
use num_complex::Complex64;

/// Relative smallest singular value of `[F | conj F]` below which `P` is
/// considered to meet its conjugate.
pub const TRANSVERSALITY_THRESHOLD: f64 = 1e-8;

/// A 2n x n frame spanning `P_z(σ)` in Darboux components at `base`.
#[derive(Clone, Debug)]
pub struct LagrangianFrame {
    pub base: PhasePoint,
    pub matrix: CMat,
    pub sigma: Complex64,
}

impl LagrangianFrame {
    /// `A^T B − B^T A` for `F = [A; B]`; zero for a Lagrangian span.
    pub fn isotropy_defect(&self) -> f64 {
        let a = top(&self.matrix);
        let b = bottom(&self.matrix);
        linalg::max_abs(&(a.transpose() * &b - b.transpose() * &a))
    }

    pub fn rank_ok(&self) -> bool {
        linalg::relative_min_sv(&self.matrix) > 1e-10
    }

    /// Same span with orthonormal columns.
    pub fn normalized(&self) -> LagrangianFrame {
        LagrangianFrame { base: self.base.clone(), matrix: linalg::orthonormal_basis(&self.matrix), sigma: self.sigma }
    }

    pub fn conjugate(&self) -> LagrangianFrame {
        LagrangianFrame { base: self.base.clone(), matrix: self.matrix.map(|x| x.conj()), sigma: self.sigma.conj() }
    }

    /// Largest principal-angle sine to another frame's span.
    pub fn distance(&self, other: &LagrangianFrame) -> f64 {
        linalg::subspace_distance(&self.matrix, &other.matrix)
    }
}

/// Real 2n x 2n complex structure with its Kähler metric `G = Ω J`.
#[derive(Clone, Debug)]
pub struct JTensor {
    pub base: PhasePoint,
    pub matrix: RMat,
    pub kahler_metric: RMat,
}

impl JTensor {
    pub fn from_matrix(base: PhasePoint, matrix: RMat) -> JTensor {
        let n = base.dim();
        let kahler_metric = linalg::omega(n) * &matrix;
        JTensor { base, matrix, kahler_metric }
    }

    /// `‖J² + I‖`.
    pub fn square_defect(&self) -> f64 {
        let k = self.matrix.nrows();
        (&self.matrix * &self.matrix + RMat::identity(k, k)).abs().max()
    }

    /// `‖J^T Ω J − Ω‖`.
    pub fn compatibility_defect(&self) -> f64 {
        let o = linalg::omega(self.base.dim());
        (self.matrix.transpose() * &o * &self.matrix - o).abs().max()
    }

    pub fn metric_min_eigenvalue(&self) -> f64 {
        linalg::symmetric_eigenvalues_real(&self.kahler_metric)[0]
    }

    /// Basis of the +i eigenspace.
    pub fn holomorphic_frame(&self) -> CMat {
        let k = self.matrix.nrows();
        let j = linalg::to_complex(&self.matrix);
        // (1 − iJ) projects onto the +i eigenspace; the q-directions form a
        // real Lagrangian subspace, which a positive P meets only in 0
        let proj = CMat::identity(k, k) - j * I;
        linalg::orthonormal_basis(&proj.columns(0, k / 2).into_owned())
    }
}

/// The standard structure `[[0, −I], [I, 0]]`.
pub fn standard_j(n: usize) -> RMat {
    -linalg::omega(n)
}

/// `F = [0; I]` at σ = 0.
pub fn vertical_frame(z: &PhasePoint) -> LagrangianFrame {
    let n = z.dim();
    let m = blocks(&CMat::zeros(n, n), &CMat::zeros(n, n), &CMat::zeros(n, n), &CMat::identity(n, n));
    LagrangianFrame { base: z.clone(), matrix: m.columns(n, n).into_owned(), sigma: ZERO }
}

/// Frame spanning `P_z(σ)` where σ is the endpoint of `path`: flows backward
/// along the negated path, then pulls the vertical space back through the
/// inverse pushforward.
pub fn distribution_at(z: &PhasePoint, path: &SigmaPath, m: &MetricModel, opts: &FlowOptions) -> Result<LagrangianFrame> {
    let n = z.dim();
    let sigma = path.target();
    if sigma == ZERO {
        return Ok(vertical_frame(z));
    }
    let o = FlowOptions { dense: 1, jacobian: true, ..*opts };
    let back = flow(z, &path.negated(), m, &o)?;
    let vert = vertical_frame(&back.endpoint).matrix;
    let f = linalg::solve(&back.jacobian, &vert)
        .ok_or_else(|| Error::DegenerateFrame("pushforward is singular".into()))?;
    let frame = LagrangianFrame { base: z.clone(), matrix: f, sigma };
    if !frame.rank_ok() {
        return Err(Error::DegenerateFrame(format!("rank of the {}x{n} frame collapsed", 2 * n)));
    }
    Ok(frame)
}

/// Straight-path convenience for [`distribution_at`].
pub fn distribution_straight(z: &PhasePoint, sigma: Complex64, m: &MetricModel, tol: f64) -> Result<LagrangianFrame> {
    distribution_at(z, &SigmaPath::straight(sigma), m, &FlowOptions::with_tol(tol))
}

/// `J = M diag(iI, −iI) M^{-1}` with `M = [F | conj F]`.
pub fn j_tensor_from_frame(frame: &LagrangianFrame) -> Result<JTensor> {
    let n = frame.base.dim();
    let f = linalg::orthonormal_basis(&frame.matrix);
    let mut mm = CMat::zeros(2 * n, 2 * n);
    mm.view_mut((0, 0), (2 * n, n)).copy_from(&f);
    mm.view_mut((0, n), (2 * n, n)).copy_from(&f.map(|x| x.conj()));
    let rel = linalg::relative_min_sv(&mm);
    if rel <= TRANSVERSALITY_THRESHOLD {
        return Err(Error::Transversality { rel_sv: rel });
    }
    let mut d = CMat::zeros(2 * n, 2 * n);
    for k in 0..n {
        d[(k, k)] = I;
        d[(n + k, n + k)] = -I;
    }
    let inv = linalg::inverse(&mm).ok_or(Error::Transversality { rel_sv: rel })?;
    let j = &mm * d * inv;
    Ok(JTensor::from_matrix(frame.base.clone(), linalg::real_part(&j)))
}

/// `H_jk = −i ω(F_j, conj F_k)` and its smallest eigenvalue.
pub fn positivity_check(frame: &LagrangianFrame) -> (bool, f64) {
    let n = frame.base.dim();
    let o = linalg::to_complex(&linalg::omega(n));
    let h = (frame.matrix.transpose() * o * frame.matrix.map(|x| x.conj())) * (-I);
    let min = linalg::hermitian_eigenvalues(&h)[0];
    (min > 0.0, min)
}

/// Writes the frame as `F = Ξ A + H B` in the horizontal/vertical basis and
/// returns `f_z(−σ) = −(A B^{-1})^T`, the matrix with
/// `span F = span{η_j − Σ_k f_jk ξ_k}`.
pub fn f_matrix_from_frame(frame: &LagrangianFrame, lifts: &Lifts) -> Result<CMat> {
    let n = frame.base.dim();
    let basis = lifts.basis_matrix();
    let coef = linalg::solve(&basis, &frame.matrix)
        .ok_or_else(|| Error::DegenerateFrame("horizontal/vertical basis is singular".into()))?;
    let a = coef.rows(0, n).into_owned();
    let b = coef.rows(n, n).into_owned();
    if linalg::relative_min_sv(&b) < 1e-12 {
        return Err(Error::DegenerateFrame("vertical block of the frame is singular".into()));
    }
    let binv = linalg::inverse(&b).ok_or_else(|| Error::DegenerateFrame("vertical block is singular".into()))?;
    Ok(-(a * binv).transpose())
}

/// Flow-route complex structure at a real point `z`: `J` from `P_z(i)`.
pub fn j_tensor_at(z: &PhasePoint, m: &MetricModel, tol: f64) -> Result<JTensor> {
    j_tensor_from_frame(&distribution_straight(z, I, m, tol)?)
}

/// `diag(I, c I)`, the pushforward of the fiber scaling `N_c`.
pub fn scaling_pushforward(n: usize, c: f64) -> CMat {
    let mut s = CMat::identity(2 * n, 2 * n);
    for k in n..2 * n {
        s[(k, k)] = ONE * c;
    }
    s
}
