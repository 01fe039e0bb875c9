//! Primal-dual interior-point method for sample-separable NLPs
//!
//! ```text
//! min_θ  Σ_i L_i(θ)   s.t.  G_i(θ) ≥ 0,  i = 1..S
//! ```
//!
//! Slacks turn the inequalities into `G_i(θ) = s_i` with `s_i > 0` kept by a
//! log barrier. Each Newton step eliminates the slack and multiplier blocks
//! sample by sample (see [`kkt`]) and factorizes only the `P x P` condensed
//! matrix.

pub mod bfgs;
pub mod kkt;
pub mod qp;
mod solver;

pub use kkt::{
    build_condensed, recover_directions, solve_condensed, CondensedSolution, CondensedSystem,
    KktSystem,
};
pub use qp::QuadraticProgram;
pub use solver::{ipm_run, ipm_solve, IpmOutcome, IpmResult, IpmStats, IterationRecord};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("maximum iterations ({iterations}) reached with scaled KKT residual {kkt:e}")]
    MaxIterations { iterations: usize, kkt: f64 },

    #[error("line search failed at iteration {iteration} (step below {min_step:e})")]
    LineSearch { iteration: usize, min_step: f64 },

    #[error("regularization ladder exhausted at iteration {iteration}")]
    RegularizationExhausted { iteration: usize },

    #[error("non-finite values in the {0}")]
    NonFinite(&'static str),
}

/// First-order information of one sample at one `θ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleDerivatives {
    pub cost: f64,
    pub gradient: DVector<f64>,
    pub constraints: DVector<f64>,
    /// `m_s x P`
    pub jacobian: DMatrix<f64>,
}

/// An NLP whose objective and constraints split into independent samples.
///
/// Implementations must be safe to evaluate concurrently for different
/// samples; the solver reduces per-sample results in sample order.
pub trait SeparableNlp: Sync {
    fn n_params(&self) -> usize;
    fn n_samples(&self) -> usize;
    fn n_constraints(&self, sample: usize) -> usize;

    /// `(L_i(θ), G_i(θ))`
    fn evaluate(&self, theta: &[f64], sample: usize) -> Result<(f64, DVector<f64>)>;

    fn first_order(&self, theta: &[f64], sample: usize) -> Result<SampleDerivatives>;

    /// Whether [`SeparableNlp::lagrangian_hessian`] is implemented.
    fn provides_hessian(&self) -> bool {
        false
    }

    /// Exact `∇²_θθ [Σ L_i − Σ λ_iᵀ G_i]`.
    fn lagrangian_hessian(
        &self,
        _theta: &[f64],
        _multipliers: &[DVector<f64>],
    ) -> Result<DMatrix<f64>> {
        Err(Error::InvalidArgument("problem provides no exact Hessian".into()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianMode {
    /// Powell-damped BFGS on the Lagrangian.
    DampedBfgs,
    /// Supplied by [`SeparableNlp::lagrangian_hessian`]; indefinite
    /// matrices are handled by the regularization ladder.
    Exact,
    /// Central differences of the Lagrangian gradient. Costs `2P` gradient
    /// evaluations per iteration; meant for small problems and tests.
    FiniteDifference,

}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IpmOptions {
    /// Scaled KKT tolerance.
    pub tol: f64,
    pub mu_init: f64,
    /// `μ ← mu_shrink · μ` once the barrier subproblem is solved.
    pub mu_shrink: f64,
    /// A barrier subproblem is solved when its scaled residual is `≤ barrier_tol_factor · μ`.
    pub barrier_tol_factor: f64,
    pub max_iter: usize,
    pub hessian: HessianMode,
    /// Lower bound for the initial slacks.
    pub slack_floor: f64,
    /// Smallest accepted line-search step.
    pub min_step: f64,
    /// Primal regularizations tried in order when the condensed factorization fails.
    pub regularization_ladder: Vec<f64>,
}

impl Default for IpmOptions {
    fn default() -> Self {
        let mut ladder = vec![0.0, 1e-8];
        ladder.extend((0..=10).map(|k| 1e-4 * 10f64.powi(k)));
        Self {
            tol: 1e-6,
            mu_init: 1e-1,
            mu_shrink: 0.2,
            barrier_tol_factor: 10.0,
            max_iter: 3000,
            hessian: HessianMode::DampedBfgs,
            slack_floor: 1e-2,
            min_step: 1e-12,
            regularization_ladder: ladder,
        }
    }
}

impl IpmOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol", self.tol),
            ("mu_init", self.mu_init),
            ("barrier_tol_factor", self.barrier_tol_factor),
            ("slack_floor", self.slack_floor),
            ("min_step", self.min_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.mu_shrink > 0.0 && self.mu_shrink < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "mu_shrink must lie in (0, 1), got {}",
                self.mu_shrink
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        if self.regularization_ladder.is_empty()
            || self.regularization_ladder.iter().any(|d| !(*d >= 0.0))
        {
            return Err(Error::InvalidArgument(
                "regularization ladder needs non-negative entries".into(),
            ));
        }
        Ok(())
    }

    /// Fraction-to-boundary parameter for barrier `μ`.
    pub fn fraction_to_boundary(mu: f64) -> f64 {
        f64::max(0.99, 1.0 - mu)
    }
}
