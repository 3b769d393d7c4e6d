use nalgebra::DMatrix;
use proptest::prelude::*;
use randmeas::linalg::kron_all;
use randmeas::prelude::*;
use randmeas::sampling::{local_unitary_setting, sample_settings};
use randmeas::shadows::Shadow;

fn random_group(n: usize, n_u: usize, n_m: usize, seed: u64) -> MeasurementGroup {
    let psi = StateVector::random(n, &mut RngSeed::new(seed, 999).rng()).unwrap();
    let settings = sample_settings(n_u, seed, |rng| local_unitary_setting(n, rng)).unwrap();
    sim::simulate_group(&psi, &settings, n_m, None, seed + 1).unwrap()
}

/// Non-empty strictly increasing subset of `1..=n` picked by `mask`.
fn subset(n: usize, mask: u32) -> Subsystem {
    let mut sites: Vec<usize> = (1..=n).filter(|i| mask & (1 << (i - 1)) != 0).collect();
    if sites.is_empty() {
        sites.push(1 + mask as usize % n);
    }
    Subsystem::new(sites).unwrap()
}

fn pauli_string(n: usize, code: u64) -> String {
    (0..n).map(|i| ['I', 'X', 'Y', 'Z'][((code >> (2 * i)) & 3) as usize]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reduction_is_idempotent_and_composes(n in 2usize..6, seed in 0u64..1000, a in 1u32..64, b in 1u32..64) {
        let group = random_group(n, 4, 3, seed);
        let outer = subset(n, a);
        let once = group.reduce(&outer).unwrap();
        prop_assert_eq!(&once.reduce(&Subsystem::full(outer.len())).unwrap(), &once);
        let inner = subset(outer.len(), b);
        let twice = once.reduce(&inner).unwrap();
        prop_assert_eq!(twice, group.reduce(&outer.compose(&inner).unwrap()).unwrap());
    }

    #[test]
    fn shadows_have_unit_trace_and_match_kron(n in 1usize..5, seed in 0u64..1000) {
        let group = random_group(n, 3, 2, seed);
        let factorized = shadows::factorized_shadows(&group, None).unwrap();
        let dense = shadows::dense_shadows(&group, None).unwrap();
        for (f, d) in factorized.iter().zip(&dense) {
            let m = kron_all(f.site_factors());
            prop_assert!((m.trace() - C64::new(1.0, 0.0)).norm() < 1e-12);
            prop_assert!((&m - m.adjoint()).norm() < 1e-12);
            prop_assert!((&m - d.matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn expectation_is_linear(n in 1usize..5, seed in 0u64..1000, p in any::<u64>(), q in any::<u64>(),
                             a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let group = random_group(n, 5, 4, seed);
        let snaps = shadows::factorized_shadows(&group, None).unwrap();
        let op = PauliObservable::from_str_letters(&pauli_string(n, p)).unwrap();
        let oq = PauliObservable::from_str_letters(&pauli_string(n, q)).unwrap();
        let combined = op.linear_combination(a, &oq, b).unwrap();
        let lhs = estimators::expect_shadow(&combined, &snaps, false).unwrap().value;
        let rhs = a * estimators::expect_shadow(&op, &snaps, false).unwrap().value
            + b * estimators::expect_shadow(&oq, &snaps, false).unwrap().value;
        prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn shadow_pauli_trace_matches_dense(n in 1usize..5, seed in 0u64..1000, code in any::<u64>()) {
        let group = random_group(n, 2, 2, seed);
        let letters = pauli_string(n, code);
        let obs = PauliObservable::from_str_letters(&letters).unwrap();
        let term = &obs.terms()[0];
        for f in shadows::factorized_shadows(&group, None).unwrap() {
            let dense = f.to_dense().unwrap();
            let expected = randmeas::linalg::pauli_trace(&term.letters, dense.matrix());
            prop_assert!((f.trace_with(&term.letters) - expected).norm() < 1e-10);
        }
    }

    #[test]
    fn jackknife_ignores_batch_order(seed in 0u64..1000, shift in 1usize..6, k in 2usize..4) {
        let mut rng = RngSeed::new(seed, 0).rng();
        let mats: Vec<DMatrix<C64>> = (0..6)
            .map(|_| DensityMatrix::random_induced(2, 1, &mut rng).unwrap().matrix().clone())
            .collect();
        let refs: Vec<&DMatrix<C64>> = mats.iter().collect();
        let mut rotated = refs.clone();
        rotated.rotate_left(shift);
        rotated.swap(0, 3);
        let a = &stats::jackknife_matrices(&refs, &[k], false).unwrap().results[0];
        let b = &stats::jackknife_matrices(&rotated, &[k], false).unwrap().results[0];
        prop_assert!((a.raw_estimate - b.raw_estimate).abs() < 1e-12);
        prop_assert!((a.std_error() - b.std_error()).abs() < 1e-12);
    }

    #[test]
    fn batch_assignment_is_balanced(n_settings in 1usize..200, n_batches in 1usize..50) {
        prop_assume!(n_batches <= n_settings);
        let assign = shadows::batch_assignment(n_settings, n_batches).unwrap();
        prop_assert_eq!(assign.len(), n_settings);
        prop_assert!(assign.windows(2).all(|w| w[0] <= w[1]));
        let mut sizes = vec![0usize; n_batches];
        for &b in &assign {
            sizes[b] += 1;
        }
        let (lo, hi) = (*sizes.iter().min().unwrap(), *sizes.iter().max().unwrap());
        prop_assert!(lo >= 1 && hi - lo <= 1);
    }

    #[test]
    fn mps_and_dense_born_probabilities_agree(n in 1usize..7, chi in 1usize..5, seed in 0u64..1000) {
        let mps = Mps::random(n, chi, &mut RngSeed::new(seed, 0).rng()).unwrap();
        let dense = StateVector::new(mps.to_dense().unwrap()).unwrap();
        let setting: MeasurementSetting = local_unitary_setting(n, &mut RngSeed::new(seed, 1).rng()).unwrap().into();
        let p = mps.born_probabilities(&setting).unwrap();
        let q = dense.born_probabilities(&setting).unwrap();
        let total: f64 = p.probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        for (x, y) in p.probabilities().iter().zip(q.probabilities()) {
            prop_assert!(*x >= 0.0 && (x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn group_files_round_trip(n in 1usize..5, n_u in 1usize..6, n_m in 1usize..5, seed in 0u64..1000) {
        let group = random_group(n, n_u, n_m, seed);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.json");
        randmeas::format::write_group(&path, &group).unwrap();
        prop_assert_eq!(randmeas::format::read_group(&path).unwrap(), group);
    }
}
