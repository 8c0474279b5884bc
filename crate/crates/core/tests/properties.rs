mod common;

use proptest::prelude::*;

use common::*;

fn spectrum() -> impl Strategy<Value = (Vec<f64>, usize, Vec<f64>)> {
    (2usize..=5).prop_flat_map(|n| {
        (
            prop::collection::vec(0.5f64..3.0, n),
            0..=n,
            prop::collection::vec(-0.25f64..0.25, n * n),
        )
            .prop_map(|(mags, n_stable, pert)| {
                let lambdas = mags.iter().enumerate().map(|(i, m)| if i < n_stable { -m } else { *m }).collect();
                (lambdas, n_stable, pert)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projectors_split_identity((lambdas, n_stable, pert) in spectrum()) {
        let a = diagonalizable(&lambdas, &pert);
        prop_assert!(projector_defect(&a, n_stable) <= 1e-10);
    }

    #[test]
    fn central_differences_exact_on_quadratics(
        center in prop::collection::vec(-2.0f64..2.0, 1..=3),
        h in 1e-3f64..0.3,
        coeffs in prop::collection::vec(-3.0f64..3.0, 16),
    ) {
        prop_assert!(quadratic_diff_error(&center, h, &coeffs) <= 1e-11 / h);
    }

    #[test]
    fn hermite_collocation_exact_on_cubics(
        p in prop::array::uniform4(-2.0f64..2.0),
        k in -3.0f64..3.0,
        steps in prop::collection::vec(0.05f64..0.4, 2..12),
    ) {
        let mut mesh = vec![0.0];
        for s in steps {
            mesh.push(mesh.last().unwrap() + s);
        }
        prop_assert!(hermite_cubic_error(p, k, &mesh) <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lindemann_equilibrium_stays_fixed(eps in 1e-3f64..0.5, h in 1e-4f64..1e-1) {
        let (residual, eta) = lindemann_equilibrium_residuals(eps, h);
        prop_assert!(residual <= 1e-15, "residual {residual}");
        prop_assert!(eta <= 1e-15, "eta {eta}");
    }

    #[test]
    fn fiber_round_trip_is_second_order(
        x in prop::array::uniform2(-1.0f64..1.0),
        angle in 0.0f64..std::f64::consts::TAU,
    ) {
        let slope = fiber_round_trip_slope(0.01, x, [angle.cos(), angle.sin()], &[4e-2, 2e-2, 1e-2, 5e-3]);
        prop_assert!((slope - 2.0).abs() <= 0.3, "slope {slope}");
    }
}
