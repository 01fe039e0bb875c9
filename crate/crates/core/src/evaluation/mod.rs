//! Closed-loop validation: run controllers on held-out scenarios and tabulate
//! the discounted performance index and constraint-violation counts.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{AugmentedLti, LqrController, MpcController};
use crate::error::{check_dim, Error, Result};
use crate::policy::MlpPolicy;
use crate::process_model::{ControlProblem, MarkovEmbedding, Scenario, ScenarioSet};

/// Validation horizon.
pub const VALIDATION_STAGES: usize = 100;

/// State feedback on `(x, ζ)`.
pub trait Controller: Sync {
    fn id(&self) -> String;
    fn control(&self, x: &[f64], zeta: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Clone, Debug)]
pub struct ZeroController {
    pub control_dim: usize,
}

impl Controller for ZeroController {
    fn id(&self) -> String {
        "zero".into()
    }

    fn control(&self, _x: &[f64], _zeta: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; self.control_dim])
    }
}

#[derive(Clone, Debug)]
pub struct PolicyController {
    pub name: String,
    pub policy: MlpPolicy,
    pub theta: Vec<f64>,
}

impl Controller for PolicyController {
    fn id(&self) -> String {
        self.name.clone()
    }

    fn control(&self, x: &[f64], zeta: &[f64]) -> Result<Vec<f64>> {
        self.policy.eval(&self.theta, x, zeta)
    }
}

impl Controller for LqrController {
    fn id(&self) -> String {
        "LQR".into()
    }

    fn control(&self, x: &[f64], zeta: &[f64]) -> Result<Vec<f64>> {
        self.act(&AugmentedLti::stack(x, zeta))
    }
}

impl Controller for MpcController {
    fn id(&self) -> String {
        "MPC".into()
    }

    fn control(&self, x: &[f64], zeta: &[f64]) -> Result<Vec<f64>> {
        self.act(&AugmentedLti::stack(x, zeta))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClosedLoopRun {
    pub controller: String,
    pub scenario: usize,
    /// `x_0..x_H`.
    pub states: Vec<Vec<f64>>,
    /// Applied (saturated) inputs `u_0..u_{H−1}`.
    pub controls: Vec<Vec<f64>>,
    /// `ξ_0..ξ_{H−1}`.
    pub xi: Vec<Vec<f64>>,
    pub stage_costs: Vec<f64>,
    pub violated: Vec<bool>,
    pub performance: f64,
    pub performance_undiscounted: f64,
    pub violations: usize,
}

impl ClosedLoopRun {
    pub fn stages(&self) -> usize {
        self.controls.len()
    }

    /// `t, x_*, u_*, xi_*, cost, violated`, one row per stage.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let nx = self.states.first().map_or(0, Vec::len);
        let nu = self.controls.first().map_or(0, Vec::len);
        let nxi = self.xi.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=nx).map(|i| format!("x{i}")));
        header.extend((1..=nu).map(|i| format!("u{i}")));
        header.extend((1..=nxi).map(|i| if nxi == 1 { "xi".into() } else { format!("xi{i}") }));
        header.extend(["cost".to_string(), "violated".to_string()]);
        w.write_record(&header)?;
        for t in 0..self.stages() {
            let mut row = vec![t.to_string()];
            row.extend(self.states[t].iter().map(|v| format!("{v:e}")));
            row.extend(self.controls[t].iter().map(|v| format!("{v:e}")));
            row.extend(self.xi[t].iter().map(|v| format!("{v:e}")));
            row.push(format!("{:e}", self.stage_costs[t]));
            row.push(u8::from(self.violated[t]).to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn saturate(u: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in u.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

/// Input limits applied by the actuator.
#[derive(Clone, Debug, PartialEq)]
pub struct Actuator {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Closed loop over `horizon` stages of `scenario`'s recorded `ζ` path.
/// Stage `t` is counted as violated when any entry of `g(x_t, u_t)` is negative.
pub fn simulate<P, E, C>(
    controller: &C,
    problem: &P,
    embedding: &E,
    actuator: &Actuator,
    scenario: &Scenario,
    scenario_index: usize,
    horizon: usize,
) -> Result<ClosedLoopRun>
where
    P: ControlProblem + ?Sized,
    E: MarkovEmbedding + ?Sized,
    C: Controller + ?Sized,
{
    if scenario.horizon() < horizon {
        return Err(Error::InvalidArgument(format!(
            "scenario covers {} stages, {horizon} requested",
            scenario.horizon()
        )));
    }
    check_dim("initial state", problem.state_dim(), scenario.x0.len())?;
    check_dim("actuator lower bound", problem.control_dim(), actuator.lo.len())?;
    check_dim("actuator upper bound", problem.control_dim(), actuator.hi.len())?;
    let gamma = problem.discount();
    let mut x = scenario.x0.clone();
    let mut run = ClosedLoopRun {
        controller: controller.id(),
        scenario: scenario_index,
        states: vec![x.clone()],
        controls: Vec::with_capacity(horizon),
        xi: Vec::with_capacity(horizon),
        stage_costs: Vec::with_capacity(horizon),
        violated: Vec::with_capacity(horizon),
        performance: 0.0,
        performance_undiscounted: 0.0,
        violations: 0,
    };
    let mut weight = 1.0;
    for t in 0..horizon {
        let zeta = &scenario.zeta[t];
        let mut u = controller
            .control(&x, zeta)
            .map_err(|e| Error::Controller { stage: t, message: e.to_string() })?;
        check_dim("controller output", problem.control_dim(), u.len())?;
        saturate(&mut u, &actuator.lo, &actuator.hi);
        let cost: f64 = problem.stage_cost(&x, &u, zeta);
        let violated = problem.constraints(&x, &u, zeta).iter().any(|g: &f64| *g < 0.0);
        let next: Vec<f64> = problem.dynamics(&x, &u, &scenario.zeta[t + 1]);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::DivergedRollout { t: t + 1 });
        }
        run.performance += weight * cost;
        run.performance_undiscounted += cost;
        run.violations += usize::from(violated);
        run.stage_costs.push(cost);
        run.violated.push(violated);
        run.xi.push(embedding.observe(zeta));
        run.controls.push(u);
        run.states.push(next.clone());
        x = next;
        weight *= gamma;
    }
    Ok(run)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub controller: String,
    /// Training sample count, for trained policies.
    pub samples: Option<usize>,
    /// Training horizon, for trained policies.
    pub horizon: Option<usize>,
    pub performance: f64,
    pub performance_undiscounted: f64,
    pub violations: f64,
    /// `ok`, or a short reason the cell has no trustworthy numbers.
    pub status: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, controller: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.controller == controller)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "controller",
            "S",
            "T",
            "performance",
            "performance_undiscounted",
            "violations",
            "status",
        ])?;
        let opt = |v: Option<usize>| v.map_or(String::new(), |v| v.to_string());
        for r in &self.rows {
            w.write_record([
                r.controller.clone(),
                opt(r.samples),
                opt(r.horizon),
                format!("{:.17e}", r.performance),
                format!("{:.17e}", r.performance_undiscounted),
                format!("{}", r.violations),
                r.status.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean metrics of a batch of runs of one controller.
pub fn summarize(controller: &str, runs: &[ClosedLoopRun]) -> Result<ComparisonRow> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument("no runs to summarize".into()));
    }
    let n = runs.len() as f64;
    Ok(ComparisonRow {
        controller: controller.to_string(),
        samples: None,
        horizon: None,
        performance: runs.iter().map(|r| r.performance).sum::<f64>() / n,
        performance_undiscounted: runs.iter().map(|r| r.performance_undiscounted).sum::<f64>() / n,
        violations: runs.iter().map(|r| r.violations as f64).sum::<f64>() / n,
        status: "ok".into(),
    })
}

/// Every controller on every validation scenario. Runs execute in parallel
/// and are returned grouped by controller, in input order.
pub fn run_all<P, E>(
    controllers: &[&dyn Controller],
    problem: &P,
    embedding: &E,
    actuator: &Actuator,
    validation: &ScenarioSet,
    horizon: usize,
) -> Result<Vec<Vec<ClosedLoopRun>>>
where
    P: ControlProblem + ?Sized,
    E: MarkovEmbedding + ?Sized,
{
    if controllers.is_empty() || validation.is_empty() {
        return Err(Error::InvalidArgument("need at least one controller and one scenario".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..controllers.len())
        .flat_map(|c| (0..validation.len()).map(move |s| (c, s)))
        .collect();
    let runs: Vec<ClosedLoopRun> = jobs
        .par_iter()
        .map(|&(c, s)| {
            simulate(controllers[c], problem, embedding, actuator, &validation.scenarios[s], s, horizon)
        })
        .collect::<Result<_>>()?;
    Ok(runs.chunks(validation.len()).map(<[_]>::to_vec).collect())
}

/// Mean performance and violations per controller.
pub fn compare<P, E>(
    controllers: &[&dyn Controller],
    problem: &P,
    embedding: &E,
    actuator: &Actuator,
    validation: &ScenarioSet,
    horizon: usize,
) -> Result<ComparisonTable>
where
    P: ControlProblem + ?Sized,
    E: MarkovEmbedding + ?Sized,
{
    let grouped = run_all(controllers, problem, embedding, actuator, validation, horizon)?;
    let rows = controllers
        .iter()
        .zip(&grouped)
        .map(|(c, runs)| summarize(&c.id(), runs))
        .collect::<Result<_>>()?;
    Ok(ComparisonTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process_model::{benchmark_problem, sample_scenarios, BoxDistribution};

    fn zero_setup() -> (crate::process_model::AffineQuadraticProblem, crate::process_model::LinearEmbedding, ScenarioSet) {
        let (mut p, e) = benchmark_problem(false);
        p.init_state = BoxDistribution::point(vec![0.0; 3]);
        p.init_aug = BoxDistribution::point(vec![0.0; 3]);
        let set = sample_scenarios(&p, &e, 3, VALIDATION_STAGES, 9).unwrap();
        (p, e, set)
    }

    fn actuator() -> Actuator {
        Actuator { lo: vec![-0.03; 3], hi: vec![0.03; 3] }
    }

    #[test]
    fn zero_controller_on_zero_scenarios() {
        let (p, e, set) = zero_setup();
        let zero = ZeroController { control_dim: 3 };
        let table = compare(&[&zero], &p, &e, &actuator(), &set, VALIDATION_STAGES).unwrap();
        let row = &table.rows[0];
        assert_eq!(row.performance, 0.0);
        assert_eq!(row.performance_undiscounted, 0.0);
        assert_eq!(row.violations, 0.0);
    }

    #[test]
    fn violation_counted_at_the_offending_stage() {
        struct Push;
        impl Controller for Push {
            fn id(&self) -> String {
                "push".into()
            }
            fn control(&self, _: &[f64], _: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![0.03, 0.0, 0.0])
            }
        }
        // x₀ = (0.2, 0, 0), u₀ = (0.03, 0, 0)  →  x₁ = (0.21, −0.01, 0)
        let (p, e, mut set) = zero_setup();
        set.scenarios[0].x0 = vec![0.2, 0.0, 0.0];
        let run = simulate(&Push, &p, &e, &actuator(), &set.scenarios[0], 0, 3).unwrap();
        assert!((run.states[1][0] - 0.21).abs() < 1e-15);
        assert!(!run.violated[0]);
        assert!(run.violated[1]);
    }

    #[test]
    fn saturation_applied_to_every_controller() {
        struct Big;
        impl Controller for Big {
            fn id(&self) -> String {
                "big".into()
            }
            fn control(&self, _: &[f64], _: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![1.0, -1.0, 0.01])
            }
        }
        let (p, e, set) = zero_setup();
        let run = simulate(&Big, &p, &e, &actuator(), &set.scenarios[0], 0, 2).unwrap();
        assert_eq!(run.controls[0], vec![0.03, -0.03, 0.01]);
    }

    #[test]
    fn short_scenario_rejected() {
        let (p, e, _) = zero_setup();
        let set = sample_scenarios(&p, &e, 1, 10, 0).unwrap();
        let zero = ZeroController { control_dim: 3 };
        assert!(simulate(&zero, &p, &e, &actuator(), &set.scenarios[0], 0, 11).is_err());
    }

    #[test]
    fn controller_error_carries_stage() {
        struct Fails;
        impl Controller for Fails {
            fn id(&self) -> String {
                "fails".into()
            }
            fn control(&self, _: &[f64], _: &[f64]) -> Result<Vec<f64>> {
                Err(Error::Numerical("no".into()))
            }
        }
        let (p, e, set) = zero_setup();
        let err = simulate(&Fails, &p, &e, &actuator(), &set.scenarios[0], 0, 5).unwrap_err();
        assert!(matches!(err, Error::Controller { stage: 0, .. }));
    }
}
