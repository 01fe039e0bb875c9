mod common;

use common::{condensed_error, enumerate_active_sets, random_box_qp, random_system, Shifted};
use nalgebra::{DMatrix, DVector};
use policyopt::ipm::{ipm_run, ipm_solve, HessianMode, IpmOptions, QuadraticProgram};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn condensed_step_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let p = rng.random_range(1..=10);
        let s = rng.random_range(1..=4);
        let ms: Vec<usize> = (0..s).map(|_| rng.random_range(1..=6)).collect();
        let sys = random_system(&mut rng, p, &ms);
        let e = condensed_error(&sys);
        assert!(e <= 1e-8, "P={p} m={ms:?}: {e:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn condensed_step_correct(seed in any::<u64>(), p in 1usize..=10, ms in prop::collection::vec(1usize..=6, 1..=4)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = random_system(&mut rng, p, &ms);
        prop_assert!(condensed_error(&sys) <= 1e-8);
    }

    /// Final slacks and multipliers stay strictly positive and `μ` never increases.
    #[test]
    fn iterates_stay_interior(seed in any::<u64>(), n in 1usize..=5) {
        let qp = random_box_qp(&mut ChaCha8Rng::seed_from_u64(seed), n);
        let out = ipm_run(&qp, &vec![0.0; n], &IpmOptions::default()).unwrap();
        prop_assert!(out.result.slacks[0].min() > 0.0);
        prop_assert!(out.result.multipliers[0].min() > 0.0);
        for w in out.result.stats.log.windows(2) {
            prop_assert!(w[1].mu <= w[0].mu);
        }
    }
}

#[test]
fn squared_with_lower_bound() {
    let r = ipm_solve(&Shifted, &[3.0], &IpmOptions::default()).unwrap();
    assert!((r.theta[0] - 1.0).abs() <= 1e-6, "{}", r.theta[0]);
    assert!((r.multipliers[0][0] - 2.0).abs() <= 1e-4, "{}", r.multipliers[0][0]);
}

#[test]
fn box_qp_matches_active_set_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..3 {
        let qp = random_box_qp(&mut rng, 10);
        let oracle = enumerate_active_sets(&qp);
        let active = (0..10)
            .filter(|&i| {
                (oracle[i] + qp.constraint_offset[i]).abs() < 1e-9
                    || (qp.constraint_offset[10 + i] - oracle[i]).abs() < 1e-9
            })
            .count();
        assert!(active > 0, "instance has no active bound");
        // final slacks on active bounds are about μ/λ, so solve well below 1e-6
        for mode in [HessianMode::Exact, HessianMode::DampedBfgs] {
            let opts = IpmOptions { hessian: mode, tol: 1e-9, ..Default::default() };
            let r = ipm_solve(&qp, &[0.0; 10], &opts).unwrap();
            let err = (DVector::from_column_slice(&r.theta) - &oracle).amax();
            assert!(err <= 1e-6, "{mode:?}: {err:e}");
        }
    }
}

#[test]
fn infeasible_problem_reports_failure_with_last_iterate() {
    // θ ≥ 1 and θ ≤ −1
    let qp = QuadraticProgram::new(
        DMatrix::identity(1, 1),
        DVector::zeros(1),
        DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
        DVector::from_vec(vec![-1.0, -1.0]),
    )
    .unwrap();
    let opts = IpmOptions { hessian: HessianMode::Exact, max_iter: 200, ..Default::default() };
    let out = ipm_run(&qp, &[0.0], &opts).unwrap();
    assert!(!out.converged());
    assert!(out.result.theta[0].is_finite());
    assert!(ipm_solve(&qp, &[0.0], &opts).is_err());
}

#[test]
fn options_validation() {
    let bad = IpmOptions { mu_shrink: 1.0, ..Default::default() };
    assert!(ipm_run(&Shifted, &[0.0], &bad).is_err());
    let bad = IpmOptions { tol: 0.0, ..Default::default() };
    assert!(ipm_run(&Shifted, &[0.0], &bad).is_err());
    assert!(ipm_run(&Shifted, &[0.0, 1.0], &IpmOptions::default()).is_err());
}
