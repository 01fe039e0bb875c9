use policyopt::cli::EvalContext;
use policyopt::config::ExperimentConfig;
use policyopt::evaluation::{compare, simulate, Actuator, ComparisonTable, Controller, PolicyController, VALIDATION_STAGES};
use policyopt::policy::MlpPolicy;
use policyopt::process_model::{benchmark_problem, sample_scenarios, BoxDistribution};
use proptest::prelude::*;

fn actuator() -> Actuator {
    Actuator { lo: vec![-0.03; 3], hi: vec![0.03; 3] }
}

fn random_policy(seed: u64, scale: f64) -> PolicyController {
    let policy = MlpPolicy::new(vec![6, 6, 6, 3]).unwrap();
    let theta = policy.init_params(seed, scale).unwrap();
    PolicyController { name: "PO".into(), policy, theta }
}

fn small_context() -> EvalContext {
    let mut c = ExperimentConfig::benchmark(false);
    c.validation.samples = 4;
    c.validation.stages = 30;
    c.validation.mpc_horizon = 8;
    EvalContext::new(&c).unwrap()
}

fn compare_in_pool(ctx: &EvalContext, threads: usize) -> ComparisonTable {
    let po = random_policy(3, 1.0);
    let controllers: [&dyn Controller; 3] = [&po, &ctx.lqr, &ctx.mpc];
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(|| {
            compare(&controllers, &ctx.problem, &ctx.embedding, &ctx.actuator, &ctx.validation, ctx.stages).unwrap()
        })
}

#[test]
fn compare_is_identical_across_thread_counts() {
    let ctx = small_context();
    let one = compare_in_pool(&ctx, 1);
    let three = compare_in_pool(&ctx, 3);
    assert_eq!(one, three);
    for (a, b) in one.rows.iter().zip(&three.rows) {
        assert_eq!(a.performance.to_bits(), b.performance.to_bits());
    }
}

#[test]
fn zero_policy_on_quiet_scenarios_costs_nothing() {
    let (mut p, e) = benchmark_problem(false);
    p.init_state = BoxDistribution::point(vec![0.0; 3]);
    p.init_aug = BoxDistribution::point(vec![0.0; 3]);
    let set = sample_scenarios(&p, &e, 4, VALIDATION_STAGES, 21).unwrap();
    let policy = MlpPolicy::new(vec![6, 6, 6, 3]).unwrap();
    let po = PolicyController { name: "PO".into(), theta: vec![0.0; policy.param_count()], policy };
    let table = compare(&[&po], &p, &e, &actuator(), &set, VALIDATION_STAGES).unwrap();
    assert_eq!(table.rows[0].performance, 0.0);
    assert_eq!(table.rows[0].violations, 0.0);
}

/// Replays a run by hand: `x⁺ = Ax + u + 0.1·1·ξ⁺`,
/// `ℓ = 10⁻³‖x‖² + ‖u‖² + 0.3 ξ Σu`, discounted by 0.99.
#[test]
fn recorded_run_replays_by_hand() {
    let (p, e) = benchmark_problem(false);
    let set = sample_scenarios(&p, &e, 1, 40, 8).unwrap();
    let po = random_policy(5, 0.5);
    let run = simulate(&po, &p, &e, &actuator(), &set.scenarios[0], 0, 40).unwrap();
    let mut perf = 0.0;
    let mut weight = 1.0;
    for t in 0..40 {
        let x = &run.states[t];
        let u = &run.controls[t];
        let xi = run.xi[t][0];
        let cost = 1e-3 * x.iter().map(|v| v * v).sum::<f64>()
            + u.iter().map(|v| v * v).sum::<f64>()
            + 0.3 * xi * u.iter().sum::<f64>();
        assert!((cost - run.stage_costs[t]).abs() <= 1e-15);
        perf += weight * cost;
        weight *= 0.99;
        if t + 1 < 40 {
            let xi_next = run.xi[t + 1][0];
            for i in 0..3 {
                let ax: f64 = (0..3).map(|j| p.a[(i, j)] * x[j]).sum();
                let expected = ax + u[i] + 0.1 * xi_next;
                assert!((expected - run.states[t + 1][i]).abs() <= 1e-15);
            }
        }
        let outside = x.iter().any(|v| v.abs() > 0.2) || u.iter().any(|v| v.abs() > 0.03);
        assert_eq!(outside, run.violated[t]);
    }
    assert!((perf - run.performance).abs() <= 1e-14);
}

#[test]
fn mpc_keeps_nominal_validation_feasible() {
    let ctx = EvalContext::new(&ExperimentConfig::benchmark(false)).unwrap();
    let runs = ctx.run(&[&ctx.mpc]).unwrap();
    let total: usize = runs[0].iter().map(|r| r.violations).sum();
    assert_eq!(total, 0);
}

#[test]
fn trajectory_csv_has_one_row_per_stage() {
    let (p, e) = benchmark_problem(true);
    let set = sample_scenarios(&p, &e, 1, 12, 1).unwrap();
    let run = simulate(&random_policy(1, 1.0), &p, &e, &actuator(), &set.scenarios[0], 0, 12).unwrap();
    let mut buf = Vec::new();
    run.write_csv(&mut buf).unwrap();
    let mut r = csv::Reader::from_reader(buf.as_slice());
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["t", "x1", "x2", "x3", "u1", "u2", "u3", "xi", "cost", "violated"]
    );
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 12);
    let u1: f64 = rows[3][4].parse().unwrap();
    assert_eq!(u1, run.controls[3][0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Applied inputs stay in the actuator box whatever the policy emits.
    #[test]
    fn applied_inputs_are_saturated(seed in 0u64..10_000, scale in 0.1f64..20.0, noisy in any::<bool>()) {
        let (p, e) = benchmark_problem(noisy);
        let set = sample_scenarios(&p, &e, 1, 25, seed).unwrap();
        let run = simulate(&random_policy(seed, scale), &p, &e, &actuator(), &set.scenarios[0], 0, 25).unwrap();
        for u in &run.controls {
            prop_assert!(u.iter().all(|v| v.abs() <= 0.03));
        }
    }

    /// Violation counts are bounded by the horizon and match the per-stage flags.
    #[test]
    fn violations_bounded(seed in 0u64..10_000, stages in 1usize..60) {
        let (p, e) = benchmark_problem(true);
        let set = sample_scenarios(&p, &e, 2, stages, seed).unwrap();
        let po = random_policy(seed, 2.0);
        let table = compare(&[&po], &p, &e, &actuator(), &set, stages).unwrap();
        prop_assert!(table.rows[0].violations <= stages as f64);
        let run = simulate(&po, &p, &e, &actuator(), &set.scenarios[1], 1, stages).unwrap();
        prop_assert_eq!(run.violations, run.violated.iter().filter(|v| **v).count());
        prop_assert_eq!(run.states.len(), stages + 1);
    }
}
