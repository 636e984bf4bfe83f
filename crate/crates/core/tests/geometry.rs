use approx::assert_relative_eq;
use grauert::geometry::{catalog, MetricModel, ModelParams, PhasePoint, MODEL_NAMES};
use grauert::linalg::{self, c, CMat};
use grauert::Error;
use num_complex::Complex64;
use proptest::prelude::*;

fn model(name: &str) -> MetricModel {
    catalog(name, &ModelParams::default()).unwrap()
}

fn sphere(a: f64) -> MetricModel {
    catalog("round_sphere", &ModelParams { radius: Some(a), ..Default::default() }).unwrap()
}

fn cq(x: &[f64]) -> Vec<Complex64> {
    x.iter().map(|&v| c(v, 0.0)).collect()
}

#[test]
fn every_catalog_name_builds_with_defaults() {
    for name in MODEL_NAMES {
        let m = model(name);
        assert_eq!(m.name, name);
        assert!(m.dim() >= 1);
    }
}

#[test]
fn catalog_rejects_foreign_and_bad_parameters() {
    assert!(matches!(catalog("klein_bottle", &ModelParams::default()), Err(Error::UnknownModel(_))));
    let p = ModelParams { radius: Some(1.0), ..Default::default() };
    assert!(matches!(catalog("flat_torus", &p), Err(Error::InvalidParams(_))));
    let p = ModelParams { radius: Some(-1.0), ..Default::default() };
    assert!(matches!(catalog("round_sphere", &p), Err(Error::InvalidParams(_))));
    let p = ModelParams { a: Some(1.0), b: Some(2.0), ..Default::default() };
    assert!(matches!(catalog("surface_of_revolution", &p), Err(Error::InvalidParams(_))));
    let p = ModelParams { dim: Some(3), ..Default::default() };
    assert!(matches!(catalog("round_sphere", &p), Err(Error::InvalidParams(_))));
}

#[test]
fn flat_energy_is_half_square_norm() {
    let m = catalog("flat_space", &ModelParams { dim: Some(3), ..Default::default() }).unwrap();
    let z = PhasePoint::real(0, &[0.1, 0.2, 0.3], &[1.0, -2.0, 0.5]);
    assert_relative_eq!(m.energy(&z).unwrap().re, 0.5 * (1.0 + 4.0 + 0.25), epsilon = 1e-15);
}

#[test]
fn polar_sphere_energy_and_christoffels() {
    let a = 2.0;
    let m = sphere(a);
    let polar = m.chart_index("polar").unwrap();
    let (th, ph) = (0.9, 0.4);
    let z = PhasePoint::real(polar, &[th, ph], &[0.3, -0.7]);
    let expect = 0.5 * (0.09 / (a * a) + 0.49 / (a * a * th.sin().powi(2)));
    assert_relative_eq!(m.energy(&z).unwrap().re, expect, epsilon = 1e-14);
    let gam = m.christoffel(polar, &cq(&[th, ph])).unwrap();
    // Γ^θ_φφ = −sin θ cos θ, Γ^φ_θφ = cot θ
    assert_relative_eq!(gam[0][(1, 1)].re, -th.sin() * th.cos(), epsilon = 1e-14);
    assert_relative_eq!(gam[1][(0, 1)].re, th.cos() / th.sin(), epsilon = 1e-14);
    assert_relative_eq!(gam[0][(0, 0)].norm(), 0.0, epsilon = 1e-15);
}

#[test]
fn sphere_sectional_curvature_is_inverse_square_radius_in_every_chart() {
    let m = sphere(2.0);
    let u = cq(&[1.0, 0.3]);
    let w = cq(&[-0.2, 0.8]);
    for (chart, q) in [(0, [0.3, -0.4]), (1, [0.7, 0.1]), (2, [1.1, 0.5])] {
        let k = m.sectional_curvature(chart, &cq(&q), &u, &w).unwrap();
        assert_relative_eq!(k.re, 0.25, epsilon = 1e-12);
        assert!(k.im.abs() < 1e-14);
    }
}

#[test]
fn surface_curvature_matches_profile_formula() {
    let (a, b) = (2.0, 1.0);
    let m = model("surface_of_revolution");
    for u in [-2.0, -0.5, 0.0, 0.7, 2.5] {
        let r = a + b * f64::cos(u);
        let dr = -b * f64::sin(u);
        let ddr = -b * f64::cos(u);
        let expect = -ddr / (r * (1.0 + dr * dr).powi(2));
        let k = m.sectional_curvature(0, &cq(&[u, 1.3]), &cq(&[1.0, 0.0]), &cq(&[0.0, 1.0])).unwrap();
        assert_relative_eq!(k.re, expect, epsilon = 1e-12);
    }
}

#[test]
fn stereographic_transition_is_an_isometry() {
    let m = sphere(1.5);
    let q = cq(&[0.4, -0.9]);
    let z = PhasePoint::new(0, q.clone(), cq(&[0.0, 0.0]));
    let (z2, t) = m.change_chart(&z, 1).unwrap();
    let n = 2;
    let mm = t.view((0, 0), (n, n)).into_owned();
    let g0 = m.metric(0, &q).unwrap();
    let g1 = m.metric(1, &z2.q).unwrap();
    assert!(linalg::max_abs(&(mm.transpose() * g1 * &mm - g0)) < 1e-13);
}

#[test]
fn chart_change_is_symplectic_and_preserves_energy() {
    let m = sphere(1.0);
    let z = PhasePoint::new(0, vec![c(0.3, 0.2), c(-0.5, 0.1)], vec![c(0.7, -0.3), c(0.2, 0.4)]);
    let (z2, t) = m.change_chart(&z, 1).unwrap();
    let o = linalg::to_complex(&linalg::omega(2));
    assert!(linalg::max_abs(&(t.transpose() * &o * &t - o)) < 1e-12);
    assert!((m.energy(&z).unwrap() - m.energy(&z2).unwrap()).norm() < 1e-13);
    let (back, _) = m.change_chart(&z2, 0).unwrap();
    assert!(back.max_dist(&z) < 1e-13);
}

#[test]
fn orthonormal_frame_starts_along_the_given_vector() {
    let m = model("surface_of_revolution");
    let q = cq(&[0.4, 1.0]);
    let v = cq(&[0.3, 0.2]);
    let e = m.orthonormal_frame(0, &q, Some(&v)).unwrap();
    let g = m.metric(0, &q).unwrap();
    let gram = e.transpose() * &g * &e;
    assert!(linalg::max_abs(&(gram - CMat::identity(2, 2))) < 1e-14);
    // first column parallel to v
    let cross = e[(0, 0)] * v[1] - e[(1, 0)] * v[0];
    assert!(cross.norm() < 1e-14);
}

fn levi_civita_defect(m: &MetricModel, chart: usize, q: &[Complex64]) -> f64 {
    let n = m.dim();
    let md = m.metric_data(chart, q, false).unwrap();
    let gam = m.christoffel(chart, q).unwrap();
    let mut worst = 0.0f64;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                // ∂_k g_ij = Γ^l_ki g_lj + Γ^l_kj g_il
                let mut rhs = c(0.0, 0.0);
                for l in 0..n {
                    rhs += gam[l][(k, i)] * md.g[(l, j)] + gam[l][(k, j)] * md.g[(i, l)];
                }
                worst = worst.max((md.dg[k][(i, j)] - rhs).norm());
                worst = worst.max((gam[k][(i, j)] - gam[k][(j, i)]).norm());
            }
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn metrics_are_symmetric_positive_definite(u in -1.4f64..1.4, w in -1.4f64..1.4, s in -3.0f64..3.0) {
        for (m, chart, q) in [
            (sphere(1.3), 0usize, [u, w]),
            (sphere(1.3), 1, [w, u]),
            (model("surface_of_revolution"), 0, [s, w]),
            (model("flat_torus"), 0, [s, u]),
        ] {
            let g = linalg::real_part(&m.metric(chart, &cq(&q)).unwrap());
            prop_assert!((&g - g.transpose()).abs().max() < 1e-15);
            prop_assert!(linalg::symmetric_eigenvalues_real(&g)[0] > 0.0);
        }
    }

    #[test]
    fn christoffels_are_levi_civita(u in -1.4f64..1.4, w in -1.4f64..1.4, im in -0.3f64..0.3) {
        let q = vec![c(u, im), c(w, -0.5 * im)];
        prop_assert!(levi_civita_defect(&sphere(0.8), 0, &q) < 1e-12);
        let q = vec![c(2.0 * u, 0.5 * im), c(w, im)];
        prop_assert!(levi_civita_defect(&model("surface_of_revolution"), 0, &q) < 1e-12);
    }

    #[test]
    fn metric_extension_satisfies_cauchy_riemann(u in -1.0f64..1.0, w in -1.0f64..1.0) {
        let m = model("surface_of_revolution");
        let h = 1e-6;
        let at = |re: f64, im: f64| m.metric(0, &[c(re, im), c(w, 0.0)]).unwrap();
        let d_re = (at(u + h, 0.1) - at(u - h, 0.1)) / c(2.0 * h, 0.0);
        let d_im = (at(u, 0.1 + h) - at(u, 0.1 - h)) / c(2.0 * h, 0.0);
        prop_assert!(linalg::max_abs(&(d_im - d_re * c(0.0, 1.0))) < 1e-8);
    }
}
