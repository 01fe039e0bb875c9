//! LQR and receding-horizon MPC on the augmented state `x̃ = (x, ζ)`.

mod mpc;
mod riccati;

pub use mpc::{MpcController, MpcDecision, MPC_HORIZON};
pub use riccati::{solve_dare, DareSolution, LqrController};

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::process_model::{AffineQuadraticProblem, LinearEmbedding};

/// Weight added on the `ζ` block of `Q̃`.
pub const ZETA_COST_EPS: f64 = 1e-9;

/// Certainty-equivalent linear model with stage cost
/// `x̃ᵀQ̃x̃ + uᵀRu + 2x̃ᵀÑu`.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedLti {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub n: DMatrix<f64>,
    pub gamma: f64,
    /// Number of leading entries of `x̃` that belong to `x`.
    pub state_dim: usize,
}

impl AugmentedLti {
    /// ```text
    /// Ã = [A  EΨΦ]   B̃ = [B]   Q̃ = [Q  0 ]   Ñ = [   0   ]
    ///     [0   Φ ]        [0]        [0  εI]        [½ ΨᵀC ]
    /// ```
    pub fn from_problem(problem: &AffineQuadraticProblem, embedding: &LinearEmbedding) -> Result<Self> {
        problem.validate()?;
        embedding.validate()?;
        let nx = problem.a.nrows();
        let nu = problem.b.ncols();
        let nz = embedding.transition.nrows();
        if problem.observation != embedding.observation {
            return Err(Error::InvalidArgument(
                "problem and embedding disagree on the observation map".into(),
            ));
        }
        let n = nx + nz;
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (nx, nx)).copy_from(&problem.a);
        let coupling = &problem.e * &embedding.observation * &embedding.transition;
        a.view_mut((0, nx), (nx, nz)).copy_from(&coupling);
        a.view_mut((nx, nx), (nz, nz)).copy_from(&embedding.transition);

        let mut b = DMatrix::zeros(n, nu);
        b.view_mut((0, 0), (nx, nu)).copy_from(&problem.b);

        let mut q = DMatrix::zeros(n, n);
        q.view_mut((0, 0), (nx, nx)).copy_from(&problem.q);
        for i in nx..n {
            q[(i, i)] = ZETA_COST_EPS;
        }

        let mut cross = DMatrix::zeros(n, nu);
        let zeta_cross = embedding.observation.transpose() * &problem.price * 0.5;
        cross.view_mut((nx, 0), (nz, nu)).copy_from(&zeta_cross);

        Ok(Self {
            a,
            b,
            q,
            r: problem.r.clone(),
            n: cross,
            gamma: problem.gamma,
            state_dim: nx,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn stage_cost(&self, xt: &DVector<f64>, u: &DVector<f64>) -> f64 {
        xt.dot(&(&self.q * xt)) + u.dot(&(&self.r * u)) + 2.0 * xt.dot(&(&self.n * u))
    }

    /// `x̃ = (x, ζ)`.
    pub fn stack(x: &[f64], zeta: &[f64]) -> DVector<f64> {
        DVector::from_iterator(x.len() + zeta.len(), x.iter().chain(zeta).copied())
    }
}

/// Writes `m` as headerless CSV, one matrix row per line.
pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process_model::{benchmark_problem, ControlProblem};
    use crate::diff::Real;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_form_reproduces_stage_cost() {
        let (p, e) = benchmark_problem(false);
        let m = AugmentedLti::from_problem(&p, &e).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let z: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let direct: f64 = p.stage_cost(&x, &u, &z).value();
            let xt = AugmentedLti::stack(&x, &z);
            let quad = m.stage_cost(&xt, &DVector::from_vec(u));
            let zz: f64 = z.iter().map(|v| v * v).sum();
            assert!((direct - quad).abs() <= ZETA_COST_EPS * zz + 1e-14);
        }
    }

    #[test]
    fn one_step_prediction_matches_dynamics() {
        let (p, e) = benchmark_problem(false);
        let m = AugmentedLti::from_problem(&p, &e).unwrap();
        let x = [0.1, -0.05, 0.02];
        let z = [0.3, -0.7, 0.4];
        let u = [0.01, 0.0, -0.02];
        let z_next: Vec<f64> = (&e.transition * DVector::from_column_slice(&z)).iter().copied().collect();
        let x_next = p.dynamics(&x, &u, &z_next);
        let pred = &m.a * AugmentedLti::stack(&x, &z) + &m.b * DVector::from_column_slice(&u);
        for i in 0..3 {
            assert!((pred[i] - x_next[i]).abs() < 1e-15);
            assert!((pred[3 + i] - z_next[i]).abs() < 1e-15);
        }
    }
}
