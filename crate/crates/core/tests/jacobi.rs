use grauert::geometry::{catalog, ClosedFormOracle, MetricModel, ModelParams, PhasePoint};
use grauert::jacobi::{
    continue_f_to_i, f_chebyshev_samples, f_samples, j_tensor_from_f, jacobi_equation_residual, jacobi_fields,
    lifts, Continuation,
};
use grauert::linalg::{self, c, I};
use grauert::pade::chebyshev_points;
use grauert::Error;

const TOL: f64 = 1e-12;

fn model(name: &str) -> MetricModel {
    catalog(name, &ModelParams::default()).unwrap()
}

fn sphere_covector(u: f64, w: f64, ang: f64, rho: f64) -> PhasePoint {
    let m = model("round_sphere");
    let q = [c(u, 0.0), c(w, 0.0)];
    let e = m.orthonormal_frame(0, &q, None).unwrap();
    let v: Vec<_> = (0..2).map(|r| (e[(r, 0)] * ang.cos() + e[(r, 1)] * ang.sin()) * rho).collect();
    let z = m.phase_from_velocity(0, &q, &v).unwrap();
    PhasePoint::real(0, &[u, w], &[z.p[0].re, z.p[1].re])
}

#[test]
fn flat_f_is_sigma_times_identity() {
    let m = model("flat_torus");
    let z = PhasePoint::real(0, &[0.5, 0.1], &[0.4, 0.9]);
    let fm = f_samples(&jacobi_fields(&z, &[-0.8, -0.2, 0.0, 0.5, 1.0], &m, TOL).unwrap(), &m).unwrap();
    assert_eq!(fm.samples.len(), 5);
    for (s, f) in &fm.samples {
        assert!((f - nalgebra::DMatrix::identity(2, 2) * *s).abs().max() < 1e-13, "σ = {s}");
    }
}

#[test]
fn sphere_samples_match_tangent_profile() {
    let m = model("round_sphere");
    let rho = 0.8;
    let z = sphere_covector(0.2, 0.3, 1.1, rho);
    let fm = f_chebyshev_samples(&z, &m, 15, 1.0, TOL).unwrap();
    assert!(fm.adapted);
    assert!((fm.speed - rho).abs() < 1e-14);
    for (s, f) in &fm.samples {
        assert!((f[(0, 0)] - s).abs() < 1e-10);
        assert!((f[(1, 1)] - (rho * s).tan() / rho).abs() < 1e-10);
        assert!(f[(0, 1)].abs() < 1e-10 && f[(1, 0)].abs() < 1e-10);
    }
}

#[test]
fn jacobi_equation_holds_along_the_geodesic() {
    let z = sphere_covector(-0.4, 0.1, 0.3, 0.9);
    for s in [-0.7, 0.4, 1.3] {
        assert!(jacobi_equation_residual(&z, s, &model("round_sphere"), TOL).unwrap() < 1e-7);
    }
    let z = PhasePoint::real(0, &[0.6, 0.2], &[0.3, 0.8]);
    assert!(jacobi_equation_residual(&z, 0.5, &model("surface_of_revolution"), TOL).unwrap() < 1e-7);
}

#[test]
fn pade_continuation_reaches_the_closed_form_at_i() {
    let m = model("round_sphere");
    for rho in [0.1, 0.5, 0.9, 1.2] {
        let z = sphere_covector(0.1, -0.3, 0.7, rho);
        let fm = f_chebyshev_samples(&z, &m, 21, 1.0, TOL).unwrap();
        let fm = continue_f_to_i(&fm, Continuation::Pade { l: 8, m: 8 }).unwrap();
        let mut expect = linalg::to_complex(&nalgebra::DMatrix::zeros(2, 2));
        expect[(0, 0)] = I;
        expect[(1, 1)] = I * rho.tanh() / rho;
        let got = fm.value_at_i.unwrap();
        assert!(linalg::max_abs(&(got - expect)) < 1e-7, "ρ = {rho}");
    }
}

#[test]
fn pade_poles_sit_at_the_conjugate_points() {
    let m = model("round_sphere");
    let rho = 1.2;
    let z = sphere_covector(0.0, 0.2, 2.5, rho);
    let fm = continue_f_to_i(&f_chebyshev_samples(&z, &m, 21, 1.0, TOL).unwrap(), Continuation::Pade { l: 8, m: 8 }).unwrap();
    let pole = std::f64::consts::FRAC_PI_2 / rho;
    let nearest = fm.poles.iter().map(|p| (p.norm() - pole).abs()).fold(f64::INFINITY, f64::min);
    assert!(nearest < 1e-3, "{:?}", fm.poles);
    assert!(fm.warnings.is_empty());
}

#[test]
fn closed_form_continuation_warns_about_nearby_poles() {
    let m = model("round_sphere");
    let z = sphere_covector(0.3, 0.3, 0.0, 1.5);
    let fm = f_samples(&jacobi_fields(&z, &chebyshev_points(11, 0.9), &m, TOL).unwrap(), &m).unwrap();
    let out = continue_f_to_i(&fm, Continuation::ClosedForm(ClosedFormOracle::Sphere { radius: 1.0 })).unwrap();
    assert_eq!(out.warnings.len(), 1);
    assert!((out.poles[0].re - std::f64::consts::FRAC_PI_2 / 1.5).abs() < 1e-15);
}

#[test]
fn closed_form_requires_adapted_basis() {
    let m = model("round_sphere");
    let z = sphere_covector(0.3, 0.3, 0.0, 0.5);
    let lf = lifts(&z, &m, Some(linalg::to_complex(&nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])))).unwrap();
    let sys = grauert::jacobi::jacobi_fields_with(lf, &[-0.5, 0.5], &m, TOL).unwrap();
    let fm = f_samples(&sys, &m).unwrap();
    assert!(!fm.adapted);
    assert!(matches!(continue_f_to_i(&fm, Continuation::ClosedForm(ClosedFormOracle::Flat)), Err(Error::InvalidParams(_))));
}

#[test]
fn structure_from_f_needs_a_continued_value() {
    let m = model("flat_torus");
    let z = PhasePoint::real(0, &[0.0, 0.0], &[1.0, 0.0]);
    let fm = f_samples(&jacobi_fields(&z, &[-0.5, 0.5], &m, TOL).unwrap(), &m).unwrap();
    let lf = lifts(&z, &m, None).unwrap();
    assert!(matches!(j_tensor_from_f(&fm, &lf), Err(Error::InvalidParams(_))));
    let fm = continue_f_to_i(&fm, Continuation::ClosedForm(ClosedFormOracle::Flat)).unwrap();
    let j = j_tensor_from_f(&fm, &lf).unwrap();
    assert!((j.matrix - grauert::lagrangian::standard_j(2)).abs().max() < 1e-14);
}

#[test]
fn surface_f_is_symmetric_in_an_orthonormal_basis() {
    let m = model("surface_of_revolution");
    let z = PhasePoint::real(0, &[0.7, 0.0], &[0.2, 0.5]);
    let fm = f_samples(&jacobi_fields(&z, &[-0.6, 0.3, 0.9], &m, TOL).unwrap(), &m).unwrap();
    for (s, f) in &fm.samples {
        assert!((f - f.transpose()).abs().max() < 1e-10, "σ = {s}");
    }
    let _ = c(0.0, 0.0);
}
