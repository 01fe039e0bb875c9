use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bfgs::DampedBfgs;
use super::kkt::{build_condensed, recover_directions, solve_condensed, KktSystem};
use super::{HessianMode, IpmOptions, SampleDerivatives, SeparableNlp, SolverError};
use crate::error::{check_dim, Error, Result};

const MERIT_RHO: f64 = 0.1;
const ARMIJO_ETA: f64 = 1e-4;
const KAPPA_SIGMA: f64 = 1e10;
const SCALE_MAX: f64 = 100.0;
const BFGS_RESET_AFTER: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub kkt: f64,
    pub mu: f64,
    pub step: f64,
    pub delta_w: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IpmStats {
    pub iterations: usize,
    pub final_mu: f64,
    pub kkt: f64,
    pub objective: f64,
    pub factorization_retries: usize,
    pub barrier_updates: usize,
    pub log: Vec<IterationRecord>,
}

impl IpmStats {
    /// Fixed-width text log, one row per iteration.
    pub fn write_log<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "{:>6} {:>24} {:>12} {:>10} {:>10} {:>8}",
            "iter", "objective", "kkt", "mu", "step", "delta_w"
        )?;
        for r in &self.log {
            writeln!(
                out,
                "{:>6} {:>24.16e} {:>12.4e} {:>10.3e} {:>10.3e} {:>8.1e}",
                r.iter, r.objective, r.kkt, r.mu, r.step, r.delta_w
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct IpmResult {
    pub theta: Vec<f64>,
    pub slacks: Vec<DVector<f64>>,
    pub multipliers: Vec<DVector<f64>>,
    pub stats: IpmStats,
}

struct Point {
    objective: f64,
    /// `Σ ∇L_i`
    gradient: DVector<f64>,
    constraints: Vec<DVector<f64>>,
    jacobians: Vec<DMatrix<f64>>,
}

impl Point {
    fn lagrangian_gradient(&self, multipliers: &[DVector<f64>]) -> DVector<f64> {
        let mut g = self.gradient.clone();
        for (jac, lam) in self.jacobians.iter().zip(multipliers) {
            g -= jac.tr_mul(lam);
        }
        g
    }
}

fn evaluate_point<N: SeparableNlp + ?Sized>(nlp: &N, theta: &[f64]) -> Result<Point> {
    let samples: Vec<SampleDerivatives> = (0..nlp.n_samples())
        .into_par_iter()
        .map(|i| nlp.first_order(theta, i))
        .collect::<Result<_>>()?;
    let mut objective = 0.0;
    let mut gradient = DVector::zeros(theta.len());
    let mut constraints = Vec::with_capacity(samples.len());
    let mut jacobians = Vec::with_capacity(samples.len());
    for d in samples {
        objective += d.cost;
        gradient += &d.gradient;
        constraints.push(d.constraints);
        jacobians.push(d.jacobian);
    }
    let finite = objective.is_finite()
        && gradient.iter().all(|v| v.is_finite())
        && constraints.iter().all(|g| g.iter().all(|v| v.is_finite()))
        && jacobians.iter().all(|j| j.iter().all(|v| v.is_finite()));
    if !finite {
        return Err(SolverError::NonFinite("objective or constraint derivatives").into());
    }
    Ok(Point {
        objective,
        gradient,
        constraints,
        jacobians,
    })
}

fn evaluate_values<N: SeparableNlp + ?Sized>(
    nlp: &N,
    theta: &[f64],
) -> Result<(f64, Vec<DVector<f64>>)> {
    let samples: Vec<(f64, DVector<f64>)> = (0..nlp.n_samples())
        .into_par_iter()
        .map(|i| nlp.evaluate(theta, i))
        .collect::<Result<_>>()?;
    let mut objective = 0.0;
    let mut constraints = Vec::with_capacity(samples.len());
    for (c, g) in samples {
        objective += c;
        constraints.push(g);
    }
    Ok((objective, constraints))
}

fn merit(
    objective: f64,
    mu: f64,
    nu: f64,
    slacks: &[DVector<f64>],
    constraints: &[DVector<f64>],
) -> f64 {
    let mut barrier = 0.0;
    let mut infeas = 0.0;
    for (s, g) in slacks.iter().zip(constraints) {
        for (si, gi) in s.iter().zip(g.iter()) {
            barrier += si.ln();
            infeas += (gi - si).abs();
        }
    }
    objective - mu * barrier + nu * infeas
}

/// Move each slack to `G` when that lowers its merit contribution
/// `−μ log s + ν |G − s|`; never increases the merit.
fn reset_slacks(slacks: &mut [DVector<f64>], constraints: &[DVector<f64>], mu: f64, nu: f64) {
    for (s, g) in slacks.iter_mut().zip(constraints) {
        for (si, gi) in s.iter_mut().zip(g.iter()) {
            if *gi > 0.0 && -mu * gi.ln() < -mu * si.ln() + nu * (gi - *si).abs() {
                *si = *gi;
            }
        }
    }
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>, tau: f64) -> f64 {
    let mut alpha: f64 = 1.0;
    for (x, dx) in v.iter().zip(dv.iter()) {
        if *dx < 0.0 {
            alpha = alpha.min(-tau * x / dx);
        }
    }
    alpha
}

struct Residuals {
    stationarity: f64,
    primal: f64,
    complementarity: f64,
    scale_d: f64,
    scale_c: f64,
}

impl Residuals {
    fn new(
        grad_l: &DVector<f64>,
        constraints: &[DVector<f64>],
        slacks: &[DVector<f64>],
        multipliers: &[DVector<f64>],
    ) -> Self {
        let mut primal: f64 = 0.0;
        let mut lam_sum = 0.0;
        let mut m = 0usize;
        for (g, s) in constraints.iter().zip(slacks) {
            primal = primal.max((g - s).amax());
        }
        for l in multipliers {
            lam_sum += l.iter().map(|v| v.abs()).sum::<f64>();
            m += l.len();
        }
        let scale = if m == 0 {
            1.0
        } else {
            (lam_sum / m as f64).max(SCALE_MAX) / SCALE_MAX
        };
        Self {
            stationarity: if grad_l.is_empty() {
                0.0
            } else {
                grad_l.amax()
            },
            primal,
            complementarity: 0.0,
            scale_d: scale,
            scale_c: scale,
        }
    }

    fn error(&mut self, mu: f64, slacks: &[DVector<f64>], multipliers: &[DVector<f64>]) -> f64 {
        let mut comp: f64 = 0.0;
        for (s, l) in slacks.iter().zip(multipliers) {
            for (si, li) in s.iter().zip(l.iter()) {
                comp = comp.max((si * li - mu).abs());
            }
        }
        self.complementarity = comp;
        (self.stationarity / self.scale_d)
            .max(self.primal)
            .max(self.complementarity / self.scale_c)
    }
}

fn finite_difference_hessian<N: SeparableNlp + ?Sized>(
    nlp: &N,
    theta: &[f64],
    multipliers: &[DVector<f64>],
) -> Result<DMatrix<f64>> {
    let n = theta.len();
    let mut h = DMatrix::zeros(n, n);
    let mut work = theta.to_vec();
    for j in 0..n {
        let step = 1e-5 * theta[j].abs().max(1.0);
        work[j] = theta[j] + step;
        let gp = evaluate_point(nlp, &work)?.lagrangian_gradient(multipliers);
        work[j] = theta[j] - step;
        let gm = evaluate_point(nlp, &work)?.lagrangian_gradient(multipliers);
        work[j] = theta[j];
        h.set_column(j, &((gp - gm) / (2.0 * step)));
    }
    Ok((&h + h.transpose()) * 0.5)
}

/// Final iterate plus the reason the solver stopped early, if it did.
#[derive(Debug)]
pub struct IpmOutcome {
    pub result: IpmResult,
    pub failure: Option<Error>,
}

impl IpmOutcome {
    pub fn converged(&self) -> bool {
        self.failure.is_none()
    }
}

/// Solve `min Σ L_i(θ)` s.t. `G_i(θ) ≥ 0` from `theta0`. Any failure after
/// the first iterate is reported as an error.
pub fn ipm_solve<N: SeparableNlp + ?Sized>(
    nlp: &N,
    theta0: &[f64],
    options: &IpmOptions,
) -> Result<IpmResult> {
    let outcome = ipm_run(nlp, theta0, options)?;
    match outcome.failure {
        None => Ok(outcome.result),
        Some(e) => Err(e),
    }
}

/// Like [`ipm_solve`], but keeps the last accepted iterate when the solver
/// stops early. Only invalid input and a non-evaluable starting point are
/// returned as `Err`.
pub fn ipm_run<N: SeparableNlp + ?Sized>(
    nlp: &N,
    theta0: &[f64],
    options: &IpmOptions,
) -> Result<IpmOutcome> {
    options.validate()?;
    let n = nlp.n_params();
    check_dim("ipm initial point", n, theta0.len())?;
    let n_samples = nlp.n_samples();
    if n_samples == 0 {
        return Err(Error::InvalidArgument("NLP has no samples".into()));
    }
    if options.hessian == HessianMode::Exact && !nlp.provides_hessian() {
        return Err(Error::InvalidArgument(
            "exact Hessian mode requested but the problem provides none".into(),
        ));
    }

    let mut theta = DVector::from_column_slice(theta0);
    let mut mu = options.mu_init;
    let mut point = evaluate_point(nlp, theta.as_slice())?;
    for (i, g) in point.constraints.iter().enumerate() {
        check_dim("constraint block", nlp.n_constraints(i), g.len())?;
    }
    let mut slacks: Vec<DVector<f64>> = point
        .constraints
        .iter()
        .map(|g| g.map(|v| v.max(options.slack_floor)))
        .collect();
    let mut multipliers: Vec<DVector<f64>> = slacks.iter().map(|s| s.map(|v| mu / v)).collect();

    let mut bfgs = DampedBfgs::new(n);
    let mut rejected_updates = 0usize;
    let mut nu: f64 = 1.0;
    let mut stats = IpmStats::default();
    let mut last_step = 0.0;
    let mut last_delta = 0.0;

    macro_rules! attempt {
        ($label:lifetime, $e:expr) => {
            match $e {
                Ok(v) => v,
                Err(e) => break $label Some(e),
            }
        };
    }

    let failure: Option<Error> = 'solve: {
        for iter in 0..=options.max_iter {
            let grad_l = point.lagrangian_gradient(&multipliers);
            let mut res = Residuals::new(&grad_l, &point.constraints, &slacks, &multipliers);
            let kkt = res.error(0.0, &slacks, &multipliers);
            stats.log.push(IterationRecord {
                iter,
                objective: point.objective,
                kkt,
                mu,
                step: last_step,
                delta_w: last_delta,
            });
            stats.iterations = iter;
            stats.kkt = kkt;
            stats.objective = point.objective;
            stats.final_mu = mu;
            if kkt <= options.tol {
                break 'solve None;
            }
            if iter == options.max_iter {
                break;
            }

            let mu_min = options.tol / 10.0;
            while mu > mu_min
                && res.error(mu, &slacks, &multipliers) <= options.barrier_tol_factor * mu
            {
                mu = (options.mu_shrink * mu).max(mu_min);
                stats.barrier_updates += 1;
            }

            let hessian = match options.hessian {
                HessianMode::DampedBfgs => bfgs.matrix().clone(),
                HessianMode::Exact => {
                    attempt!('solve, nlp.lagrangian_hessian(theta.as_slice(), &multipliers))
                }
                HessianMode::FiniteDifference => {
                    attempt!('solve, finite_difference_hessian(
                        nlp,
                        theta.as_slice(),
                        &multipliers
                    ))
                }
            };

            let sigma: Vec<DVector<f64>> = multipliers
                .iter()
                .zip(&slacks)
                .map(|(l, s)| l.component_div(s))
                .collect();
            let r_s: Vec<DVector<f64>> = multipliers
                .iter()
                .zip(&slacks)
                .map(|(l, s)| l - s.map(|v| mu / v))
                .collect();
            let r_lambda: Vec<DVector<f64>> = slacks
                .iter()
                .zip(&point.constraints)
                .map(|(s, g)| s - g)
                .collect();
            let system = KktSystem {
                hessian,
                sigma,
                jacobians: std::mem::take(&mut point.jacobians),
                r_theta: -&grad_l,
                r_s,
                r_lambda,
            };
            let condensed = attempt!('solve, build_condensed(&system));
            let solution = attempt!('solve, solve_condensed(&condensed, &options.regularization_ladder)
            .map_err(|e| match e {
                Error::Solver(SolverError::RegularizationExhausted { .. }) => {
                    SolverError::RegularizationExhausted { iteration: iter }.into()
                }
                other => other,
            }));
            stats.factorization_retries += solution.retries;
            last_delta = solution.regularization;
            let d_theta = solution.d_theta;
            let (d_s, d_l) = recover_directions(&d_theta, &system);
            point.jacobians = system.jacobians;
            let ds: Vec<DVector<f64>> = d_s.into_iter().map(|v| -v).collect();
            let dl: Vec<DVector<f64>> = d_l.into_iter().map(|v| -v).collect();

            let tau = IpmOptions::fraction_to_boundary(mu);
            let alpha_p = slacks
                .iter()
                .zip(&ds)
                .map(|(s, d)| max_step(s, d, tau))
                .fold(1.0, f64::min);
            let alpha_d = multipliers
                .iter()
                .zip(&dl)
                .map(|(l, d)| max_step(l, d, tau))
                .fold(1.0, f64::min);

            // penalty update and directional derivative of the merit
            let mut infeas = 0.0;
            let mut barrier_slope = 0.0;
            for i in 0..n_samples {
                infeas += (&point.constraints[i] - &slacks[i]).lp_norm(1);
                barrier_slope -= mu * ds[i].component_div(&slacks[i]).sum();
            }
            let smooth_slope = point.gradient.dot(&d_theta) + barrier_slope;
            if infeas > 0.0 {
                let curvature = 0.5 * d_theta.dot(&(&condensed.matrix * &d_theta)).max(0.0);
                let needed = (smooth_slope + curvature) / ((1.0 - MERIT_RHO) * infeas);
                if needed > nu {
                    nu = needed + 1.0;
                }
            }
            let slope = smooth_slope - nu * infeas;
            let phi0 = merit(point.objective, mu, nu, &slacks, &point.constraints);

            let mut alpha = 1.0;
            let accepted = loop {
                let step = alpha * alpha_p;
                if step < options.min_step {
                    break None;
                }
                let trial_theta = &theta + &d_theta * step;
                let mut trial_slacks: Vec<DVector<f64>> =
                    slacks.iter().zip(&ds).map(|(s, d)| s + d * step).collect();
                if let Ok((obj, cons)) = evaluate_values(nlp, trial_theta.as_slice()) {
                    reset_slacks(&mut trial_slacks, &cons, mu, nu);
                    let phi = merit(obj, mu, nu, &trial_slacks, &cons);
                    let roundoff = 10.0 * f64::EPSILON * phi0.abs();
                    if phi.is_finite()
                        && (phi <= phi0 + ARMIJO_ETA * step * slope || phi - phi0 <= roundoff)
                    {
                        break Some((step, trial_theta, trial_slacks));
                    }
                }
                alpha *= 0.5;
            };
            let line_search_failure = SolverError::LineSearch {
                iteration: iter,
                min_step: options.min_step,
            };
            let Some((step, new_theta, new_slacks)) = accepted else {
                break 'solve Some(line_search_failure.into());
            };
            let Ok(new_point) = evaluate_point(nlp, new_theta.as_slice()) else {
                break 'solve Some(line_search_failure.into());
            };
            let mut new_multipliers: Vec<DVector<f64>> = Vec::with_capacity(n_samples);
            for i in 0..n_samples {
                let mut l = &multipliers[i] + &dl[i] * alpha_d;
                for (lj, sj) in l.iter_mut().zip(new_slacks[i].iter()) {
                    let lo = mu / (KAPPA_SIGMA * sj);
                    let hi = KAPPA_SIGMA * mu / sj;
                    *lj = lj.clamp(lo, hi);
                }
                new_multipliers.push(l);
            }

            if options.hessian == HessianMode::DampedBfgs {
                let s_vec = &new_theta - &theta;
                let y = new_point.lagrangian_gradient(&new_multipliers)
                    - point.lagrangian_gradient(&new_multipliers);
                if bfgs.update(&s_vec, &y) {
                    rejected_updates = 0;
                } else {
                    rejected_updates += 1;
                    if rejected_updates >= BFGS_RESET_AFTER {
                        bfgs.reset();
                        rejected_updates = 0;
                    }
                }
            }

            theta = new_theta;
            slacks = new_slacks;
            multipliers = new_multipliers;
            point = new_point;
            last_step = step;
        }
        Some(
            SolverError::MaxIterations {
                iterations: options.max_iter,
                kkt: stats.kkt,
            }
            .into(),
        )
    };

    Ok(IpmOutcome {
        result: IpmResult {
            theta: theta.as_slice().to_vec(),
            slacks,
            multipliers,
            stats,
        },
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// One sample: `L = a θ² + b θ`, `G = θ − c`.
    struct Scalar {
        a: f64,
        b: f64,
        c: f64,
    }

    impl SeparableNlp for Scalar {
        fn n_params(&self) -> usize {
            1
        }
        fn n_samples(&self) -> usize {
            1
        }
        fn n_constraints(&self, _: usize) -> usize {
            1
        }
        fn evaluate(&self, t: &[f64], _: usize) -> Result<(f64, DVector<f64>)> {
            Ok((
                self.a * t[0] * t[0] + self.b * t[0],
                DVector::from_element(1, t[0] - self.c),
            ))
        }
        fn first_order(&self, t: &[f64], s: usize) -> Result<SampleDerivatives> {
            let (cost, constraints) = self.evaluate(t, s)?;
            Ok(SampleDerivatives {
                cost,
                gradient: DVector::from_element(1, 2.0 * self.a * t[0] + self.b),
                constraints,
                jacobian: DMatrix::from_element(1, 1, 1.0),
            })
        }
        fn provides_hessian(&self) -> bool {
            true
        }
        fn lagrangian_hessian(&self, _: &[f64], _: &[DVector<f64>]) -> Result<DMatrix<f64>> {
            Ok(DMatrix::from_element(1, 1, 2.0 * self.a))
        }
    }

    #[test]
    fn interior_optimum() {
        // (θ − 1)² up to a constant, θ ≥ 0
        let nlp = Scalar {
            a: 1.0,
            b: -2.0,
            c: 0.0,
        };
        for mode in [
            HessianMode::DampedBfgs,
            HessianMode::Exact,
            HessianMode::FiniteDifference,
        ] {
            let opts = IpmOptions {
                hessian: mode,
                ..Default::default()
            };
            let r = ipm_solve(&nlp, &[3.0], &opts).unwrap();
            assert!((r.theta[0] - 1.0).abs() < 1e-6, "{mode:?} {}", r.theta[0]);
            assert!(r.multipliers[0][0] < 1e-6);
        }
    }

    #[test]
    fn active_bound() {
        let nlp = Scalar {
            a: 1.0,
            b: 0.0,
            c: 1.0,
        };
        for mode in [HessianMode::DampedBfgs, HessianMode::Exact] {
            let opts = IpmOptions {
                hessian: mode,
                ..Default::default()
            };
            let r = ipm_solve(&nlp, &[0.0], &opts).unwrap();
            assert!((r.theta[0] - 1.0).abs() < 1e-6, "{}", r.theta[0]);
            assert!(
                (r.multipliers[0][0] - 2.0).abs() < 1e-4,
                "{}",
                r.multipliers[0][0]
            );
        }
    }

    #[test]
    fn barrier_is_monotone_and_log_is_complete() {
        let nlp = Scalar {
            a: 1.0,
            b: 0.0,
            c: 1.0,
        };
        let r = ipm_solve(&nlp, &[5.0], &IpmOptions::default()).unwrap();
        assert_eq!(r.stats.log.len(), r.stats.iterations + 1);
        for w in r.stats.log.windows(2) {
            assert!(w[1].mu <= w[0].mu);
        }
        let mut text = Vec::new();
        r.stats.write_log(&mut text).unwrap();
        assert_eq!(
            String::from_utf8(text).unwrap().lines().count(),
            r.stats.log.len() + 1
        );
    }

    #[test]
    fn max_iterations_reported() {
        let nlp = Scalar {
            a: 1.0,
            b: 0.0,
            c: 1.0,
        };
        let opts = IpmOptions {
            max_iter: 2,
            ..Default::default()
        };
        match ipm_solve(&nlp, &[5.0], &opts) {
            Err(Error::Solver(SolverError::MaxIterations { iterations: 2, .. })) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exact_mode_requires_hessian() {
        struct NoHess;
        impl SeparableNlp for NoHess {
            fn n_params(&self) -> usize {
                1
            }
            fn n_samples(&self) -> usize {
                1
            }
            fn n_constraints(&self, _: usize) -> usize {
                0
            }
            fn evaluate(&self, t: &[f64], _: usize) -> Result<(f64, DVector<f64>)> {
                Ok((t[0] * t[0], DVector::zeros(0)))
            }
            fn first_order(&self, t: &[f64], s: usize) -> Result<SampleDerivatives> {
                let (cost, constraints) = self.evaluate(t, s)?;
                Ok(SampleDerivatives {
                    cost,
                    gradient: DVector::from_element(1, 2.0 * t[0]),
                    constraints,
                    jacobian: DMatrix::zeros(0, 1),
                })
            }
        }
        let opts = IpmOptions {
            hessian: HessianMode::Exact,
            ..Default::default()
        };
        assert!(ipm_solve(&NoHess, &[1.0], &opts).is_err());
        let r = ipm_solve(&NoHess, &[1.0], &IpmOptions::default()).unwrap();
        assert!(r.theta[0].abs() < 1e-6);
    }
}
