use proptest::prelude::*;

use qaux::bethe::{eig_t, pb_coefficients, BetheRootSet, Provenance};
use qaux::linalg::{c, commutator_residual, poly_eval};
use qaux::operators::{q_mu, sector_leakage, transfer_t};
use qaux::relations::{check_tq_root, CheckOptions};
use qaux::{Branched, ModelParams, C64};

fn point() -> impl Strategy<Value = C64> {
    (0.3f64..1.8, -3.1f64..3.1).prop_map(|(r, t)| C64::from_polar(r, t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transfer_matrices_commute(phase in 0.05f64..0.45, lr in 0.6f64..1.4, z1 in point(), z2 in point()) {
        let p = ModelParams::generic_phase(3, phase, c(lr, 0.1)).unwrap();
        let a = transfer_t(&p, z1).unwrap().mat;
        let b = transfer_t(&p, z2).unwrap().mat;
        prop_assert!(commutator_residual(&a, &b).unwrap() < 1e-12);
        prop_assert_eq!(sector_leakage(&a, p.m), 0.0);
    }

    #[test]
    fn q_mu_commutes_with_t(mu in point(), w in point(), z in point()) {
        let p = ModelParams::root_of_unity(3, 3, 1, c(0.8, 0.1)).unwrap();
        let q = q_mu(&p, Branched::principal(mu), w).unwrap().mat;
        let t = transfer_t(&p, z).unwrap().mat;
        prop_assert!(commutator_residual(&q, &t).unwrap() < 1e-11);
    }

    #[test]
    fn tq_at_root_of_unity(mu in point(), z in point()) {
        let p = ModelParams::root_of_unity(3, 3, 1, c(0.9, -0.2)).unwrap();
        let r = check_tq_root(&p, Branched::principal(mu), z, &[], &CheckOptions::default()).unwrap();
        prop_assert!(r.operator_residual.unwrap() < 1e-9, "{:?}", r.operator_residual);
    }

    #[test]
    fn eigenvalue_is_symmetric_in_the_roots(a in point(), b in point(), z in point()) {
        let p = ModelParams::generic_phase(4, 0.23, c(0.8, 0.1)).unwrap();
        let x = BetheRootSet::from_roots(vec![a, b], &p, Provenance::Manual).unwrap();
        let y = BetheRootSet::from_roots(vec![b, a], &p, Provenance::Manual).unwrap();
        let (ex, ey) = (eig_t(&x, &p, z), eig_t(&y, &p, z));
        prop_assert!((ex - ey).norm() <= 1e-12 * ex.norm().max(1.0));
    }

    #[test]
    fn pb_coefficients_vanish_at_the_roots(a in point(), b in point(), d in point()) {
        let co = pb_coefficients(&[a, b, d]);
        prop_assert!((co[0] - c(1.0, 0.0)).norm() < 1e-14);
        for r in [a, b, d] {
            prop_assert!(poly_eval(&co, r).norm() < 1e-12 * co.iter().map(|x| x.norm()).sum::<f64>());
        }
    }
}
