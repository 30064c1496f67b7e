mod common;

use common::profiles::Mixture;
use gclm_core::fixpoint::{apply_ra, default_x_max};
use gclm_core::profile::{
    check_admissibility_with, curvature_estimate, make_profile, renormalize, residual_norm, Builtin,
    GridSpec, ProfileGrid, TailModel,
};
use gclm_core::specfun::{eval_f, eval_f_prime};
use gclm_core::transform::apply_t;
use proptest::prelude::*;

fn mixture() -> impl Strategy<Value = Mixture> {
    (
        prop::collection::vec((0.05f64..1.0, 0.6f64..5.0), 1..4),
        prop_oneof![Just(0.0), 0.0f64..1.0],
        prop_oneof![Just(0.0), 0.0f64..1.0],
    )
        .prop_map(|(p, g, c)| Mixture::new(p, g, c))
}

fn away_from_one() -> impl Strategy<Value = f64> {
    prop_oneof![1e-3f64..0.99, 1.01f64..1e3]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kernel_reflection(t in away_from_one()) {
        let s = eval_f(t).unwrap() + eval_f(1.0 / t).unwrap();
        prop_assert!((s - 2.0).abs() < 1e-12, "{s}");
        let lhs = eval_f_prime(1.0 / t).unwrap();
        let rhs = t * t * eval_f_prime(t).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1e-300), "{lhs} {rhs}");
        prop_assert!(eval_f_prime(t).unwrap() >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ra_stays_admissible(m in mixture(), ai in 0usize..6) {
        let a = [-2.0, -0.5, 0.0, 0.3, 0.7, 1.0][ai];
        let f = m.profile(GridSpec::default().with_x_max(default_x_max(a)));
        let h = apply_ra(&f, a).unwrap();
        let rep = check_admissibility_with(&h, 1e-6);
        prop_assert!(rep.is_member, "a={a} {m:?} {rep:?}");
        prop_assert_eq!(h.values()[0], 1.0);
        let q = curvature_estimate(&h);
        prop_assert!((q - 1.0).abs() < 1e-3, "a={a} q={q}");
    }

    #[test]
    fn transform_shape(m in mixture()) {
        let f = m.profile(GridSpec::default());
        let tf = apply_t(&f).unwrap();
        let pi = std::f64::consts::PI;
        prop_assert!(tf.c <= 4.0 / pi + 1e-9);
        prop_assert!(tf.c <= 8.0 / pi * (1.0 - f.eval(1.0)).sqrt() + 1e-9);
        prop_assert!(tf.values_t.iter().all(|&t| t <= 1e-12));
        prop_assert!(tf.values_t.windows(2).all(|w| w[1] <= w[0] + 1e-10));
    }

    #[test]
    fn renormalize_undoes_scaling(beta in 0.5f64..2.0) {
        let grid = GridSpec::default();
        let g = ProfileGrid::from_fn(grid, TailModel::algebraic(2.0, 1.0 / (beta * beta)), |x| {
            1.0 / (1.0 + beta * beta * x * x)
        })
        .unwrap();
        let back = renormalize(&g).unwrap();
        let d = residual_norm(&back, &make_profile(Builtin::SeedLorentzian, grid));
        prop_assert!(d < 1e-6, "{d}");
    }
}
