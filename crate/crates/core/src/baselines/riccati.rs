use nalgebra::{DMatrix, DVector};

use super::AugmentedLti;
use crate::error::{check_dim, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DareSolution {
    pub p: DMatrix<f64>,
    /// `u = −K x̃`.
    pub k: DMatrix<f64>,
    pub iterations: usize,
    /// `‖P − dare_map(P)‖_max` at return.
    pub residual: f64,
}

/// One application of the discounted Riccati map with cross term. Returns
/// the new `P` and the gain it implies.
fn dare_map(m: &AugmentedLti, p: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let g = m.gamma;
    let pb = p * &m.b;
    let gain_lhs = &m.r + m.b.transpose() * &pb * g;
    let coupling = (m.a.transpose() * &pb) * g + &m.n;
    let chol = gain_lhs.cholesky().ok_or_else(|| {
        Error::Numerical("R + γB̃ᵀPB̃ is not positive definite".into())
    })?;
    let k = chol.solve(&coupling.transpose());
    let next = &m.q + m.a.transpose() * p * &m.a * g - &coupling * &k;
    Ok(((&next + next.transpose()) * 0.5, k))
}

/// Value iteration on the discounted DARE from `P = Q̃`, stopping when
/// successive iterates differ by at most `tol` in max norm.
pub fn solve_dare(m: &AugmentedLti, tol: f64, max_iter: usize) -> Result<DareSolution> {
    let n = m.dim();
    check_dim("B̃ rows", n, m.b.nrows())?;
    check_dim("Q̃ rows", n, m.q.nrows())?;
    check_dim("Ñ rows", n, m.n.nrows())?;
    check_dim("R rows", m.input_dim(), m.r.nrows())?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("DARE tolerance must be positive".into()));
    }
    if m.r.clone().cholesky().is_none() {
        return Err(Error::InvalidArgument("R must be symmetric positive definite".into()));
    }
    let mut p = m.q.clone();
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let (next, k) = dare_map(m, &p)?;
        residual = (&next - &p).amax();
        if !residual.is_finite() {
            break;
        }
        if residual <= tol {
            // `k` is the gain of `p`, whose map residual was just measured
            return Ok(DareSolution { p, k, iterations: it, residual });
        }
        p = next;
    }
    Err(Error::Stabilizability { iterations: max_iter, residual })
}

/// Saturated linear feedback `u = clamp(−K x̃, u_lo, u_hi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LqrController {
    pub gain: DMatrix<f64>,
    pub riccati: DMatrix<f64>,
    pub u_lo: Vec<f64>,
    pub u_hi: Vec<f64>,
}

impl LqrController {
    pub fn new(solution: &DareSolution, u_lo: Vec<f64>, u_hi: Vec<f64>) -> Result<Self> {
        check_dim("input lower bound", solution.k.nrows(), u_lo.len())?;
        check_dim("input upper bound", solution.k.nrows(), u_hi.len())?;
        Ok(Self {
            gain: solution.k.clone(),
            riccati: solution.p.clone(),
            u_lo,
            u_hi,
        })
    }

    /// Unsaturated `−K x̃`.
    pub fn linear(&self, xt: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("augmented state", self.gain.ncols(), xt.len())?;
        Ok(-(&self.gain * xt))
    }

    pub fn act(&self, xt: &DVector<f64>) -> Result<Vec<f64>> {
        let u = self.linear(xt)?;
        Ok(u.iter()
            .zip(self.u_lo.iter().zip(&self.u_hi))
            .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process_model::benchmark_problem;

    fn scalar(a: f64, q: f64, gamma: f64) -> AugmentedLti {
        let one = DMatrix::from_element(1, 1, 1.0);
        AugmentedLti {
            a: DMatrix::from_element(1, 1, a),
            b: one.clone(),
            q: DMatrix::from_element(1, 1, q),
            r: one,
            n: DMatrix::zeros(1, 1),
            gamma,
            state_dim: 1,
        }
    }

    #[test]
    fn decoupled_scalar() {
        let s = solve_dare(&scalar(0.0, 1.0, 1.0), 1e-12, 100).unwrap();
        assert!((s.p[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(s.k[(0, 0)].abs() < 1e-12);
    }

    #[test]
    fn golden_ratio_scalar() {
        let s = solve_dare(&scalar(1.0, 1.0, 1.0), 1e-13, 1000).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((s.p[(0, 0)] - phi).abs() < 1e-10);
        // P² − P − 1 = 0
        let p = s.p[(0, 0)];
        assert!((p * p - p - 1.0).abs() < 1e-10);
    }

    #[test]
    fn unstabilizable_reports_error() {
        let mut m = scalar(2.0, 1.0, 1.0);
        m.b[(0, 0)] = 0.0;
        assert!(matches!(solve_dare(&m, 1e-10, 200), Err(Error::Stabilizability { .. })));
    }

    #[test]
    fn benchmark_closed_loop_is_stable() {
        let (p, e) = benchmark_problem(false);
        let m = AugmentedLti::from_problem(&p, &e).unwrap();
        let s = solve_dare(&m, 1e-12, 100_000).unwrap();
        let closed = (&m.a - &m.b * &s.k) * m.gamma.sqrt();
        let rho = closed
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(rho < 1.0, "{rho}");
        let (next, _) = dare_map(&m, &s.p).unwrap();
        assert!((next - &s.p).amax() <= 1e-12);
    }

    #[test]
    fn saturation() {
        let c = LqrController {
            gain: DMatrix::identity(3, 3),
            riccati: DMatrix::zeros(3, 3),
            u_lo: vec![-0.03; 3],
            u_hi: vec![0.03; 3],
        };
        // K x̃ = (0.1, 0, −0.1)
        let u = c.act(&DVector::from_vec(vec![0.1, 0.0, -0.1])).unwrap();
        assert_eq!(u, vec![-0.03, 0.0, 0.03]);
        assert_eq!(c.act(&DVector::zeros(3)).unwrap(), vec![0.0; 3]);
        let inner = DVector::from_vec(vec![0.01, -0.02, 0.005]);
        assert_eq!(c.act(&inner).unwrap(), vec![-0.01, 0.02, -0.005]);
    }
}
