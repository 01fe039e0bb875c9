//! Stochastic control problems, Markov embeddings of the exogenous signal,
//! and scenario sampling.
//!
//! A problem is stated on the augmented uncertainty `ζ` directly: the
//! observation `ξ = ψ(ζ)` is folded into the dynamics, cost and constraint
//! maps, so every map here takes `ζ` (or `ζ_next` for the dynamics).

mod affine;
mod benchmark;
mod scenario;

pub use affine::{AffineQuadraticProblem, InnovationDist, LinearEmbedding};
pub use benchmark::{benchmark_problem, benchmark_problem_with, BenchmarkParams, BENCHMARK_GAMMA};
pub use scenario::{sample_scenarios, Scenario, ScenarioSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diff::Real;
use crate::error::{check_dim, Error, Result};

/// Generator used for every random draw in scenario construction.
pub type ScenarioRng = ChaCha8Rng;

/// Discrete-time stochastic control problem on `(x, u, ζ)`.
///
/// All maps must be deterministic and `constraints` must always return
/// `constraint_dim()` entries; the problem is feasible where every entry is
/// non-negative.
pub trait ControlProblem: Send + Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn aug_dim(&self) -> usize;
    fn constraint_dim(&self) -> usize;
    fn discount(&self) -> f64;

    /// `x_next = f(x, u; ζ_next)`.
    fn dynamics<R: Real>(&self, x: &[R], u: &[R], zeta_next: &[f64]) -> Vec<R>;
    fn stage_cost<R: Real>(&self, x: &[R], u: &[R], zeta: &[f64]) -> R;
    fn constraints<R: Real>(&self, x: &[R], u: &[R], zeta: &[f64]) -> Vec<R>;

    fn sample_initial_state(&self, rng: &mut ScenarioRng) -> Vec<f64>;
    fn sample_initial_aug(&self, rng: &mut ScenarioRng) -> Vec<f64>;
}

/// Markov process `ζ` driven by iid innovations, observed through `ψ`.
pub trait MarkovEmbedding: Send + Sync {
    fn aug_dim(&self) -> usize;
    fn innovation_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;

    fn step(&self, zeta: &[f64], w: &[f64]) -> Vec<f64>;
    fn observe(&self, zeta: &[f64]) -> Vec<f64>;
    fn sample_innovation(&self, rng: &mut ScenarioRng) -> Vec<f64>;
}

/// `ζ_next` from `ζ` and innovation `w`, with dimension checks.
pub fn step_embedding<E: MarkovEmbedding + ?Sized>(
    emb: &E,
    zeta: &[f64],
    w: &[f64],
) -> Result<Vec<f64>> {
    check_dim("step_embedding zeta", emb.aug_dim(), zeta.len())?;
    check_dim("step_embedding innovation", emb.innovation_dim(), w.len())?;
    Ok(emb.step(zeta, w))
}

/// `ξ = ψ(ζ)`, with dimension checks.
pub fn observe<E: MarkovEmbedding + ?Sized>(emb: &E, zeta: &[f64]) -> Result<Vec<f64>> {
    check_dim("observe zeta", emb.aug_dim(), zeta.len())?;
    Ok(emb.observe(zeta))
}

/// Independent uniform distribution per coordinate; `lo == hi` gives a point mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDistribution {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDistribution {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim("box distribution bounds", lo.len(), hi.len())?;
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::InvalidArgument(
                "box distribution needs finite lo <= hi".into(),
            ));
        }
        Ok(Self { lo, hi })
    }

    pub fn symmetric(half_width: &[f64]) -> Result<Self> {
        Self::new(half_width.iter().map(|h| -h).collect(), half_width.to_vec())
    }

    pub fn point(v: Vec<f64>) -> Self {
        Self { lo: v.clone(), hi: v }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn sample(&self, rng: &mut ScenarioRng) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| if l == h { l } else { rng.random_range(l..=h) })
            .collect()
    }
}
