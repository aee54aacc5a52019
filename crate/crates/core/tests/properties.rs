use ndarray::Array2;
use proptest::prelude::*;

use pseudomode::bath::{Mode, PseudomodeSpec};
use pseudomode::dynamics::{analytic_p, coherent_trajectory, markovian_reduction, AmplitudeModel, MarkovRate};
use pseudomode::liouvillian::{build_liouvillian, partial_trace_pseudomodes, LiouvillianOperator, TruncationSpec};
use pseudomode::linalg::{dagger, hermiticity_error, trace};
use pseudomode::mpemba::{closed_form_distance, detect_crossing, attach_distances, DistanceKind};
use pseudomode::spectral::{build_dynamical_matrix, characteristic_polynomial, polynomial_roots};
use pseudomode::sparse::CsrMatrix;
use pseudomode::C64;

fn complex_matrix(n: usize) -> impl Strategy<Value = Array2<C64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n * n)
        .prop_map(move |v| Array2::from_shape_fn((n, n), |(i, j)| C64::new(v[i * n + j].0, v[i * n + j].1)))
}

fn density(n: usize) -> impl Strategy<Value = Array2<C64>> {
    complex_matrix(n).prop_map(|a| {
        let rho = a.dot(&dagger(&a));
        let tr = trace(&rho);
        rho / tr
    })
}

fn resonant() -> impl Strategy<Value = PseudomodeSpec> {
    (0.0..3.0f64, 0.1..15.0f64).prop_map(|(alpha, gamma)| PseudomodeSpec::resonant(1.0, alpha, gamma).unwrap())
}

fn two_modes() -> impl Strategy<Value = PseudomodeSpec> {
    ((0.0..2.0f64, 0.0..3.0f64, 0.1..8.0f64), (0.0..2.0f64, 0.0..3.0f64, 0.1..8.0f64)).prop_map(|(a, b)| {
        PseudomodeSpec::new(1.0, vec![Mode::new(a.0, a.1, a.2), Mode::new(b.0, b.1, b.2)]).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generator_preserves_trace_and_hermiticity(h in complex_matrix(6), a in complex_matrix(6), rho in density(6), rate in 0.0..3.0f64) {
        let trunc = TruncationSpec::new(2, vec![3]).unwrap();
        let h = CsrMatrix::from_dense(&((&h + &dagger(&h)) * C64::from(0.5)));
        let l = LiouvillianOperator::from_lindblad(&h, &[(rate, CsrMatrix::from_dense(&a))], &trunc).unwrap();
        let d = l.apply(&rho).unwrap();
        prop_assert!(trace(&d).norm() < 1e-12);
        prop_assert!(hermiticity_error(&d) < 1e-12);
    }

    #[test]
    fn model_generator_is_trace_preserving(spec in resonant(), rho in density(9)) {
        let trunc = TruncationSpec::new(3, vec![3]).unwrap();
        let d = build_liouvillian(&spec, &trunc).unwrap().apply(&rho).unwrap();
        prop_assert!(trace(&d).norm() < 1e-10);
        prop_assert!(hermiticity_error(&d) < 1e-10);
    }

    #[test]
    fn partial_trace_keeps_trace_and_positivity(rho in density(12)) {
        let trunc = TruncationSpec::new(3, vec![4]).unwrap();
        let r = partial_trace_pseudomodes(&rho, &trunc).unwrap();
        prop_assert_eq!(r.dim(), (3, 3));
        prop_assert!((trace(&r) - C64::from(1.0)).norm() < 1e-12);
        prop_assert!(hermiticity_error(&r) < 1e-12);
        for k in 0..3 {
            prop_assert!(r[[k, k]].re >= -1e-15);
        }
    }

    #[test]
    fn roots_sum_to_matrix_trace(spec in two_modes()) {
        let m = build_dynamical_matrix(&spec);
        let roots = polynomial_roots(&characteristic_polynomial(&spec)).unwrap();
        prop_assert_eq!(roots.len(), 3);
        let sum: C64 = roots.roots().iter().sum();
        let tr: C64 = m.matrix().diag().iter().sum();
        prop_assert!((sum - tr).norm() < 1e-8 * (1.0 + tr.norm()));
        for r in roots.roots() {
            prop_assert!(r.re <= 1e-9);
        }
    }

    #[test]
    fn amplitude_is_contractive(spec in resonant(), t in 0.0..30.0f64) {
        prop_assert!((analytic_p(&spec, 0.0) - C64::from(1.0)).norm() < 1e-14);
        prop_assert!(analytic_p(&spec, t).norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn closed_form_distance_is_monotone(x in 0.0..50.0f64, dx in 0.0..10.0f64) {
        let (d0, d1) = (closed_form_distance(x), closed_form_distance(x + dx));
        prop_assert!((0.0..=1.0).contains(&d0));
        prop_assert!(d1 >= d0);
    }

    #[test]
    fn markovian_pairs_never_cross(alpha in 0.1..3.0f64, gamma in 1.0..20.0f64, xi1 in 0.2..3.0f64, xi2 in 0.2..3.0f64) {
        let spec = PseudomodeSpec::resonant(1.0, alpha, gamma).unwrap();
        let model = AmplitudeModel::Markovian(markovian_reduction(&spec, MarkovRate::Lindblad));
        let times: Vec<f64> = (0..201).map(|k| 0.05 * k as f64).collect();
        let mut a = coherent_trajectory(&model, xi1.max(xi2), &times).unwrap();
        let mut b = coherent_trajectory(&model, xi1.min(xi2), &times).unwrap();
        attach_distances(&mut a, DistanceKind::ClosedForm).unwrap();
        attach_distances(&mut b, DistanceKind::ClosedForm).unwrap();
        prop_assert!(!detect_crossing(&a, &b).unwrap().crossed);
    }
}
