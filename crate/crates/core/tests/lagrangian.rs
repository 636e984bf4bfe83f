use grauert::geometry::{catalog, MetricModel, ModelParams, PhasePoint};
use grauert::jacobi::{j_tensor_jacobi_route, lifts};
use grauert::lagrangian::{
    distribution_straight, f_matrix_from_frame, j_tensor_at, j_tensor_from_frame, positivity_check, standard_j,
    LagrangianFrame,
};
use grauert::linalg::{self, c, CMat, I, ONE};
use grauert::Error;
use proptest::prelude::*;

const TOL: f64 = 1e-12;

fn model(name: &str) -> MetricModel {
    catalog(name, &ModelParams::default()).unwrap()
}

/// Unit-sphere point in chart N over `(u, w)` moving with speed `rho` at angle `ang`.
fn sphere_covector(u: f64, w: f64, ang: f64, rho: f64) -> PhasePoint {
    let m = model("round_sphere");
    let q = [c(u, 0.0), c(w, 0.0)];
    let e = m.orthonormal_frame(0, &q, None).unwrap();
    let v: Vec<_> = (0..2).map(|r| (e[(r, 0)] * ang.cos() + e[(r, 1)] * ang.sin()) * rho).collect();
    let z = m.phase_from_velocity(0, &q, &v).unwrap();
    PhasePoint::real(0, &[u, w], &[z.p[0].re, z.p[1].re])
}

#[test]
fn flat_distribution_at_i_is_spanned_by_i_e_and_e() {
    let m = model("flat_torus");
    let z = PhasePoint::real(0, &[0.2, 1.4], &[0.7, -0.3]);
    let frame = distribution_straight(&z, I, &m, TOL).unwrap();
    let n = 2;
    let mut expect = CMat::zeros(2 * n, n);
    for k in 0..n {
        expect[(k, k)] = I;
        expect[(n + k, k)] = ONE;
    }
    let sines = linalg::principal_angle_sines(&frame.matrix, &expect);
    assert!(sines.iter().all(|s| *s < 1e-10), "{sines:?}");
    assert!(frame.isotropy_defect() < 1e-14);
    let j = j_tensor_from_frame(&frame).unwrap();
    assert!((j.matrix - standard_j(n)).abs().max() < 1e-12);
}

#[test]
fn vertical_space_at_zero_and_conjugate_at_minus_i() {
    let m = model("round_sphere");
    let z = sphere_covector(0.3, -0.2, 0.5, 0.8);
    let at0 = distribution_straight(&z, c(0.0, 0.0), &m, TOL).unwrap();
    assert!(linalg::max_abs(&linalg::top(&at0.matrix)) == 0.0);
    let plus = distribution_straight(&z, I, &m, TOL).unwrap();
    let minus = distribution_straight(&z, -I, &m, TOL).unwrap();
    assert!(plus.conjugate().distance(&minus) < 1e-10);
    let (pos, h_plus) = positivity_check(&plus);
    let (neg, _) = positivity_check(&minus);
    assert!(pos && h_plus > 0.0);
    assert!(!neg);
}

#[test]
fn real_time_distribution_is_not_transversal() {
    let m = model("round_sphere");
    let z = sphere_covector(0.1, 0.4, 1.0, 0.6);
    let frame = distribution_straight(&z, c(0.7, 0.0), &m, TOL).unwrap();
    assert!(matches!(j_tensor_from_frame(&frame), Err(Error::Transversality { .. })));
}

#[test]
fn zero_section_structure_is_standard_in_the_adapted_frame() {
    for (name, z) in [
        ("round_sphere", PhasePoint::real(0, &[0.4, -0.6], &[0.0, 0.0])),
        ("surface_of_revolution", PhasePoint::real(0, &[1.1, 0.3], &[0.0, 0.0])),
    ] {
        let m = model(name);
        let j = j_tensor_at(&z, &m, TOL).unwrap();
        let b = linalg::real_part(&lifts(&z, &m, None).unwrap().basis_matrix());
        let local = b.clone().try_inverse().unwrap() * &j.matrix * b;
        assert!((local - standard_j(2)).abs().max() < 1e-9, "{name}");
    }
}

#[test]
fn frame_route_recovers_closed_form_f_on_the_sphere() {
    let m = model("round_sphere");
    let rho = 0.9;
    let z = sphere_covector(-0.2, 0.5, 2.0, rho);
    let lf = lifts(&z, &m, None).unwrap();
    for sigma in [c(0.6, 0.0), c(0.0, 1.0), c(0.3, 0.5)] {
        let frame = distribution_straight(&z, sigma, &m, TOL).unwrap();
        let f = f_matrix_from_frame(&frame, &lf).unwrap();
        let expect = m.oracle.as_ref().unwrap().f_matrix(2, rho, -sigma);
        assert!(linalg::max_abs(&(f - expect)) < 1e-9, "σ = {sigma}");
    }
}

#[test]
fn flow_and_jacobi_routes_agree_on_the_sphere() {
    let m = model("round_sphere");
    for (rho, ang) in [(0.3, 0.2), (0.9, 1.7), (1.2, 4.0)] {
        let z = sphere_covector(0.35, -0.15, ang, rho);
        let a = j_tensor_at(&z, &m, TOL).unwrap();
        let (b, _) = j_tensor_jacobi_route(&z, &m, TOL).unwrap();
        assert!(linalg::op_norm_real(&(a.matrix - b.matrix)) < 1e-6, "ρ = {rho}");
    }
}

#[test]
fn frame_with_collapsed_rank_is_flagged() {
    let z = PhasePoint::real(0, &[0.0], &[1.0]);
    let frame = LagrangianFrame { base: z, matrix: CMat::zeros(2, 1), sigma: I };
    assert!(!frame.rank_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn sphere_structure_is_compatible_and_positive(u in -1.0f64..1.0, w in -1.0f64..1.0, ang in 0.0f64..std::f64::consts::TAU, rho in 0.0f64..1.2) {
        let m = model("round_sphere");
        let z = sphere_covector(u, w, ang, rho);
        let frame = distribution_straight(&z, I, &m, TOL).unwrap();
        prop_assert!(frame.isotropy_defect() < 1e-10);
        prop_assert!(positivity_check(&frame).0);
        let j = j_tensor_from_frame(&frame).unwrap();
        prop_assert!(j.square_defect() < 1e-9);
        prop_assert!(j.compatibility_defect() < 1e-9);
        prop_assert!(j.metric_min_eigenvalue() > 0.0);
        let hol = j.holomorphic_frame();
        let back = LagrangianFrame { base: z.clone(), matrix: hol, sigma: I };
        prop_assert!(back.distance(&frame) < 1e-8, "{}", back.distance(&frame));
    }
}
