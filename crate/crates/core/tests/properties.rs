use num_complex::Complex64 as C64;
use proptest::prelude::*;
use quasilocal::experiment::{format_float, ExperimentConfig, ExperimentKind, Seeds};
use quasilocal::observables::entanglement_entropy;
use quasilocal::pauli::multiply as multiply_words;
use quasilocal::{commutator, from_dense, multiply, to_dense, OperatorSum, PauliString, StateVector};

const N: usize = 4;

fn word() -> impl Strategy<Value = PauliString> {
    (0u64..16, 0u64..16).prop_map(|(x, z)| PauliString::new(N, x, z).unwrap())
}

fn sum() -> impl Strategy<Value = OperatorSum> {
    prop::collection::vec((word(), -1.0f64..1.0, -1.0f64..1.0), 1..6)
        .prop_map(|t| OperatorSum::from_terms(N, t.into_iter().map(|(p, a, b)| (p, C64::new(a, b)))).unwrap())
}

fn dense_diff(a: &OperatorSum, b: &quasilocal::DenseOperator) -> f64 {
    to_dense(a).unwrap().sub(b).unwrap().max_abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn word_products_are_associative(p in word(), q in word(), r in word()) {
        let (a, pq) = multiply_words(&p, &q).unwrap();
        let (b, left) = multiply_words(&pq, &r).unwrap();
        let (c, qr) = multiply_words(&q, &r).unwrap();
        let (d, right) = multiply_words(&p, &qr).unwrap();
        prop_assert_eq!(left, right);
        prop_assert!((a * b - c * d).norm() < 1e-15);
    }

    #[test]
    fn products_match_dense(a in sum(), b in sum()) {
        let (da, db) = (to_dense(&a).unwrap(), to_dense(&b).unwrap());
        prop_assert!(dense_diff(&multiply(&a, &b).unwrap(), &da.matmul(&db).unwrap()) < 1e-12);
        prop_assert!(dense_diff(&commutator(&a, &b).unwrap(), &da.commutator(&db).unwrap()) < 1e-12);
    }

    #[test]
    fn commutator_is_antisymmetric(a in sum(), b in sum()) {
        let ab = commutator(&a, &b).unwrap();
        let ba = commutator(&b, &a).unwrap();
        prop_assert!(ab.add(&ba).unwrap().one_norm() < 1e-12);
    }

    #[test]
    fn dense_round_trip(a in sum()) {
        let back = from_dense(&to_dense(&a).unwrap(), 1e-14).unwrap();
        prop_assert!(back.sub(&a).unwrap().one_norm() < 1e-12);
    }

    #[test]
    fn entropy_lies_in_range(amps in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16), cut in 0usize..=4) {
        let v: Vec<C64> = amps.into_iter().map(|(a, b)| C64::new(a, b)).collect();
        prop_assume!(v.iter().map(|c| c.norm_sqr()).sum::<f64>() > 1e-3);
        let s = StateVector::from_amplitudes(v).unwrap().normalized().unwrap();
        let e = entanglement_entropy(&s, cut).unwrap();
        let cap = std::f64::consts::LN_2 * cut.min(N - cut) as f64;
        prop_assert!(e >= -1e-12 && e <= cap + 1e-10);
    }

    #[test]
    fn floats_render_exactly(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn configs_round_trip(seeds in prop::collection::btree_set(0u64..1000, 1..5), threads in 1usize..8, gamma in 0.0f64..2.0) {
        let mut c = ExperimentConfig::new(ExperimentKind::Lrb);
        c.seeds = Seeds::List(seeds.into_iter().collect());
        c.threads = threads;
        c.chain.gamma = gamma;
        prop_assert_eq!(ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
    }
}
