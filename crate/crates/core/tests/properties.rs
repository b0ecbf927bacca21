use approx::{assert_abs_diff_eq, assert_relative_eq};
use nalgebra::{DMatrix, DVector, Rotation3};
use proptest::prelude::*;
use std::f64::consts::PI;

use neckglue::green::{green_eval, GreenData};
use neckglue::harmonics::{self, ShExpansion, Side};
use neckglue::interaction::{gamma_entry, gamma_matrix, lambda_vector};
use neckglue::neck::{self, NeckParams};
use neckglue::quadrature::{omega_n, QuadratureRule};
use neckglue::Configuration;

fn rot(a: f64, b: f64, c: f64) -> DMatrix<f64> {
    let r = Rotation3::from_euler_angles(a, b, c);
    DMatrix::from_iterator(3, 3, r.matrix().iter().copied())
}

fn two_point_config(r1: DMatrix<f64>, r2: DMatrix<f64>, x: [f64; 3]) -> Configuration {
    let p = DVector::from_row_slice(&x);
    Configuration::new(
        3,
        vec![p.clone(), -p],
        vec![r1, r2],
        DMatrix::identity(3, 3),
        1e-4,
        0.1,
    )
    .unwrap()
}

fn angle() -> impl Strategy<Value = f64> {
    -PI..PI
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-1.0..1.0f64).prop_filter("away from the origin", |p| {
        p.iter().map(|v| v * v).sum::<f64>() > 0.04
    })
}

#[test]
fn sphere_areas() {
    assert_relative_eq!(omega_n(2).unwrap(), 2.0 * PI, epsilon = 1e-15);
    assert_relative_eq!(omega_n(3).unwrap(), 4.0 * PI, epsilon = 1e-14);
    assert_relative_eq!(omega_n(4).unwrap(), 2.0 * PI * PI, epsilon = 1e-14);
    for n in 2..=5 {
        let rule = QuadratureRule::product_gauss(n, 12).unwrap();
        assert_relative_eq!(rule.weight_sum(), omega_n(n).unwrap(), max_relative = 1e-13);
    }
}

#[test]
fn flagship_lambda() {
    let l = lambda_vector(&Configuration::flagship()).unwrap();
    assert_abs_diff_eq!(l[0], -4.0 * PI, epsilon = 1e-13);
    assert_abs_diff_eq!(l[1], -4.0 * PI / 3.0, epsilon = 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gamma_is_symmetric(a in angle(), b in angle(), c in angle(), d in angle(), x in point()) {
        let cfg = two_point_config(rot(a, b, c), rot(d, c, a), x);
        let g01 = gamma_entry(&cfg, 0, 1).unwrap();
        let g10 = gamma_entry(&cfg, 1, 0).unwrap();
        prop_assert!((g01 - g10).abs() <= 1e-12 * g01.abs().max(1.0));
    }

    #[test]
    fn gamma_is_conjugation_invariant(a in angle(), b in angle(), c in angle(), q in prop::array::uniform3(-PI..PI), x in point()) {
        let cfg = two_point_config(rot(a, b, c), rot(c, a, b), x);
        let qm = rot(q[0], q[1], q[2]);
        let moved = Configuration::new(
            3,
            cfg.points.iter().map(|p| &qm * p).collect(),
            cfg.rotations.iter().map(|r| &qm * r * qm.transpose()).collect(),
            &qm * &cfg.a0 * qm.transpose(),
            cfg.epsilon,
            cfg.rho_star,
        ).unwrap();
        let g = gamma_matrix(&cfg).unwrap();
        let h = gamma_matrix(&moved).unwrap();
        prop_assert!((g - h).amax() < 1e-12);
        let l = lambda_vector(&cfg).unwrap();
        let m = lambda_vector(&moved).unwrap();
        prop_assert!((l - m).amax() < 1e-12);
    }

    #[test]
    fn green_is_linear_in_alpha(a0 in 0.1..5.0f64, a1 in 0.1..5.0f64, x in point()) {
        let cfg = Configuration::flagship();
        let g1 = GreenData::new(cfg.clone(), DVector::from_vec(vec![a0, 0.0])).unwrap();
        let g2 = GreenData::new(cfg.clone(), DVector::from_vec(vec![0.0, a1])).unwrap();
        let g12 = GreenData::new(cfg, DVector::from_vec(vec![a0, a1])).unwrap();
        let p = [x[0] * 0.5 + 0.1, x[1], x[2]];
        let zero = GreenData::new(Configuration::flagship(), DVector::zeros(2)).unwrap();
        let (u, v, w, z) = (
            green_eval(&g1, &p).unwrap(),
            green_eval(&g2, &p).unwrap(),
            green_eval(&g12, &p).unwrap(),
            green_eval(&zero, &p).unwrap(),
        );
        for c in 0..3 {
            // z is the shared A0 x term
            prop_assert!((u[c] + v[c] - z[c] - w[c]).abs() < 1e-10 * (1.0 + w[c].abs()));
        }
    }

    #[test]
    fn neck_coordinates_round_trip(s in 0.01..(PI / 3.0 - 0.01)) {
        let t = neck::s_to_t(s, 3).unwrap();
        let back = neck::t_to_s(t, 3).unwrap();
        prop_assert!((back - s).abs() < 1e-12);
    }

    #[test]
    fn neck_radius_matches_x_part(s in 0.05..(PI / 3.0 - 0.05), polar in 0.1..3.0f64, az in 0.0..6.2f64) {
        let p = NeckParams::unit(3).unwrap();
        let q = neck::neck_point(&p, s, &[polar, az]).unwrap();
        let r = neck::radius_of_s(&p, s).unwrap();
        prop_assert!((q.x.norm() - r).abs() < 1e-12 * r.max(1.0));
    }

    #[test]
    fn dtn_solve_inverts(seed in any::<u64>(), degree in 1usize..10) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut psi = ShExpansion::zeros(degree);
        for c in psi.coeffs.iter_mut() {
            c.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        }
        let phi = harmonics::dtn_solve(&psi);
        let back = harmonics::p_ext(&phi).sub(&harmonics::p_int(&phi)).unwrap();
        prop_assert!(back.sub(&psi).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn extensions_agree_on_the_sphere(seed in any::<u64>(), theta in 0.05..3.0f64, az in 0.0..6.2f64) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut phi = ShExpansion::zeros(5);
        for c in phi.coeffs.iter_mut() {
            c.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        }
        let a = harmonics::harmonic_extension(&phi, Side::Interior, 1.0, theta, az).unwrap();
        let b = harmonics::harmonic_extension(&phi, Side::Exterior, 1.0, theta, az).unwrap();
        let c = harmonics::sh_synthesize(&phi, theta, az);
        for i in 0..3 {
            prop_assert!((a[i] - c[i]).abs() < 1e-12 && (b[i] - c[i]).abs() < 1e-12);
        }
    }
}
