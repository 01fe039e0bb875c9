//! Condensed solve of the block primal-dual Newton system.
//!
//! The full system, with one slack block and one multiplier block per sample:
//!
//! ```text
//! [ H + Σ_θ   0    J_1ᵀ ... J_Sᵀ ] [ d_θ   ]   [ r_θ   ]
//! [ 0         Σ_i  I             ] [ d^s_i ] = [ r^s_i ]
//! [ J_i       I    0             ] [ d^λ_i ]   [ r^λ_i ]
//! ```
//!
//! With every `Σ_i` diagonal and positive, the last two block rows give
//! `d^s_i = r^λ_i − J_i d_θ` and `d^λ_i = r^s_i − Σ_i d^s_i`, leaving
//!
//! ```text
//! (H + Σ_θ + Σ_i J_iᵀ Σ_i J_i) d_θ = r_θ − Σ_i J_iᵀ (r^s_i − Σ_i r^λ_i)
//! ```
//!
//! Sign convention used by the solver: `d^s = −Δs`, `d^λ = −Δλ`,
//! `r_θ = −(∇L − Σ J_iᵀ λ_i)`, `r^s_i = λ_i − μ / s_i`, `r^λ_i = s_i − G_i`.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::SolverError;
use crate::error::{check_dim, Error, Result};
use crate::rollout::weighted_gram;

#[derive(Clone, Debug)]
pub struct KktSystem {
    /// `P x P` Hessian (or its approximation) of the Lagrangian.
    pub hessian: DMatrix<f64>,
    /// Diagonals of `Σ_i`.
    pub sigma: Vec<DVector<f64>>,
    pub jacobians: Vec<DMatrix<f64>>,
    pub r_theta: DVector<f64>,
    pub r_s: Vec<DVector<f64>>,
    pub r_lambda: Vec<DVector<f64>>,
}

impl KktSystem {
    pub fn n_params(&self) -> usize {
        self.hessian.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.sigma.len()
    }

    fn check(&self) -> Result<()> {
        let p = self.n_params();
        check_dim("hessian columns", p, self.hessian.ncols())?;
        check_dim("r_theta", p, self.r_theta.len())?;
        let s = self.n_samples();
        check_dim("jacobian blocks", s, self.jacobians.len())?;
        check_dim("r_s blocks", s, self.r_s.len())?;
        check_dim("r_lambda blocks", s, self.r_lambda.len())?;
        for i in 0..s {
            let m = self.sigma[i].len();
            check_dim("jacobian rows", m, self.jacobians[i].nrows())?;
            check_dim("jacobian columns", p, self.jacobians[i].ncols())?;
            check_dim("r_s length", m, self.r_s[i].len())?;
            check_dim("r_lambda length", m, self.r_lambda[i].len())?;
            if self.sigma[i].iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidArgument(
                    "barrier diagonal Σ_i must be strictly positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Condensed matrix `M` (without `Σ_θ`) and right-hand side.
#[derive(Clone, Debug)]
pub struct CondensedSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

pub fn build_condensed(system: &KktSystem) -> Result<CondensedSystem> {
    system.check()?;
    let mut matrix = system.hessian.clone();
    let mut rhs = system.r_theta.clone();
    for i in 0..system.n_samples() {
        let sigma = &system.sigma[i];
        let jac = &system.jacobians[i];
        matrix += weighted_gram(jac, sigma.as_slice());
        let v = &system.r_s[i] - sigma.component_mul(&system.r_lambda[i]);
        rhs -= jac.tr_mul(&v);
    }
    // symmetrize the Hessian part too
    let n = matrix.nrows();
    for r in 0..n {
        for c in (r + 1)..n {
            let v = 0.5 * (matrix[(r, c)] + matrix[(c, r)]);
            matrix[(r, c)] = v;
            matrix[(c, r)] = v;
        }
    }
    if matrix.iter().chain(rhs.iter()).any(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite("condensed system").into());
    }
    Ok(CondensedSystem { matrix, rhs })
}

#[derive(Clone, Debug)]
pub struct CondensedSolution {
    pub d_theta: DVector<f64>,
    /// `δ_w` that made the factorization succeed.
    pub regularization: f64,
    /// Failed factorization attempts before success.
    pub retries: usize,
}

/// Cholesky solve of `(M + δ_w I) d = rhs`, walking up `ladder` until the
/// factorization succeeds. The factorization runs on the symmetrically
/// diagonal-scaled matrix, which leaves the solution unchanged.
pub fn solve_condensed(condensed: &CondensedSystem, ladder: &[f64]) -> Result<CondensedSolution> {
    let n = condensed.matrix.nrows();
    for (retries, &delta) in ladder.iter().enumerate() {
        let diag: Vec<f64> = (0..n).map(|i| condensed.matrix[(i, i)] + delta).collect();
        if diag.iter().any(|d| !(*d > 0.0)) {
            continue;
        }
        let scale: Vec<f64> = diag.iter().map(|d| 1.0 / d.sqrt()).collect();
        let mut m = condensed.matrix.clone();
        for c in 0..n {
            for r in 0..n {
                let v = if r == c { m[(r, c)] + delta } else { m[(r, c)] };
                m[(r, c)] = v * scale[r] * scale[c];
            }
        }
        if let Some(chol) = Cholesky::new(m) {
            let scaled_rhs = DVector::from_fn(n, |i, _| condensed.rhs[i] * scale[i]);
            let y = chol.solve(&scaled_rhs);
            let d_theta = DVector::from_fn(n, |i, _| y[i] * scale[i]);
            if d_theta.iter().all(|v| v.is_finite()) {
                return Ok(CondensedSolution {
                    d_theta,
                    regularization: delta,
                    retries,
                });
            }
        }
    }
    Err(SolverError::RegularizationExhausted { iteration: 0 }.into())
}

/// Back-substitution for the slack and multiplier blocks.
pub fn recover_directions(
    d_theta: &DVector<f64>,
    system: &KktSystem,
) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let mut d_s = Vec::with_capacity(system.n_samples());
    let mut d_lambda = Vec::with_capacity(system.n_samples());
    for i in 0..system.n_samples() {
        let ds = &system.r_lambda[i] - &system.jacobians[i] * d_theta;
        let dl = &system.r_s[i] - system.sigma[i].component_mul(&ds);
        d_s.push(ds);
        d_lambda.push(dl);
    }
    (d_s, d_lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn no_reg() -> Vec<f64> {
        vec![0.0]
    }

    #[test]
    fn single_sample_without_constraints_coupling() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let sys = KktSystem {
            hessian: h.clone(),
            sigma: vec![DVector::from_vec(vec![3.0, 4.0])],
            jacobians: vec![DMatrix::zeros(2, 2)],
            r_theta: DVector::from_vec(vec![1.0, -1.0]),
            r_s: vec![DVector::from_vec(vec![0.3, 0.1])],
            r_lambda: vec![DVector::from_vec(vec![-0.2, 0.7])],
        };
        let c = build_condensed(&sys).unwrap();
        assert_eq!(c.matrix, h);
        assert_eq!(c.rhs, sys.r_theta);
    }

    #[test]
    fn identity_solve() {
        let c = CondensedSystem {
            matrix: DMatrix::identity(3, 3),
            rhs: DVector::from_vec(vec![1.0, 0.0, 0.0]),
        };
        let sol = solve_condensed(&c, &no_reg()).unwrap();
        assert_eq!(sol.d_theta, c.rhs);
        assert_eq!(sol.retries, 0);
    }

    #[test]
    fn indefinite_hessian_regularizes_to_descent() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]);
        let grad = DVector::from_vec(vec![0.4, -1.3]);
        let c = CondensedSystem {
            matrix: h,
            rhs: -&grad,
        };
        assert!(solve_condensed(&c, &no_reg()).is_err());
        let ladder = crate::ipm::IpmOptions::default().regularization_ladder;
        let sol = solve_condensed(&c, &ladder).unwrap();
        assert!(sol.regularization > 2.0);
        assert!(sol.retries > 0);
        assert!(grad.dot(&sol.d_theta) < 0.0);
    }

    #[test]
    fn non_positive_sigma_rejected() {
        let sys = KktSystem {
            hessian: DMatrix::identity(1, 1),
            sigma: vec![DVector::from_vec(vec![0.0])],
            jacobians: vec![DMatrix::zeros(1, 1)],
            r_theta: DVector::zeros(1),
            r_s: vec![DVector::zeros(1)],
            r_lambda: vec![DVector::zeros(1)],
        };
        assert!(build_condensed(&sys).is_err());
    }

    #[test]
    fn large_sigma_approaches_nullspace_projection() {
        // min ½|d|² − r·d  s.t.  d_1 + d_2 = 0  →  d = (−0.5, 0.5)
        let sys = KktSystem {
            hessian: DMatrix::identity(2, 2),
            sigma: vec![DVector::from_vec(vec![1e9])],
            jacobians: vec![DMatrix::from_row_slice(1, 2, &[1.0, 1.0])],
            r_theta: DVector::from_vec(vec![1.0, 2.0]),
            r_s: vec![DVector::from_vec(vec![0.5])],
            r_lambda: vec![DVector::zeros(1)],
        };
        let sol = solve_condensed(&build_condensed(&sys).unwrap(), &no_reg()).unwrap();
        assert!((sol.d_theta[0] + 0.5).abs() < 1e-6, "{}", sol.d_theta);
        assert!((sol.d_theta[1] - 0.5).abs() < 1e-6, "{}", sol.d_theta);
    }

    #[test]
    fn recovered_blocks_satisfy_their_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = 4;
        let ms = [3, 5];
        let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
        let sys = KktSystem {
            hessian: &a * a.transpose() + DMatrix::identity(p, p),
            sigma: ms.iter().map(|&m| DVector::from_fn(m, |_, _| rng.random_range(0.1..5.0))).collect(),
            jacobians: ms.iter().map(|&m| DMatrix::from_fn(m, p, |_, _| rng.random_range(-1.0..1.0))).collect(),
            r_theta: DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0)),
            r_s: ms.iter().map(|&m| DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0))).collect(),
            r_lambda: ms.iter().map(|&m| DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0))).collect(),
        };
        let sol = solve_condensed(&build_condensed(&sys).unwrap(), &no_reg()).unwrap();
        let (ds, dl) = recover_directions(&sol.d_theta, &sys);
        for i in 0..2 {
            let row_s = sys.sigma[i].component_mul(&ds[i]) + &dl[i] - &sys.r_s[i];
            let row_l = &sys.jacobians[i] * &sol.d_theta + &ds[i] - &sys.r_lambda[i];
            assert!(row_s.amax() <= 1e-10);
            assert!(row_l.amax() <= 1e-10);
        }
        let mut row_t = &sys.hessian * &sol.d_theta - &sys.r_theta;
        for i in 0..2 {
            row_t += sys.jacobians[i].tr_mul(&dl[i]);
        }
        assert!(row_t.amax() <= 1e-10);
    }
}
