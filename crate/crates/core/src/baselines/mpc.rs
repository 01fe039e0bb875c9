use nalgebra::{DMatrix, DVector};

use super::{AugmentedLti, LqrController};
use crate::error::{check_dim, Error, Result};
use crate::ipm::{ipm_run, HessianMode, IpmOptions, QuadraticProgram};

pub const MPC_HORIZON: usize = 20;

/// Phase-1 optimum above which the MPC problem is declared infeasible.
const INFEASIBILITY_MARGIN: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MpcDecision {
    Optimal,
    /// QP infeasible; the LQR input was applied instead.
    FallbackLqr,
}

/// Condensed certainty-equivalent MPC over the stacked inputs
/// `U = (u_0, …, u_{N−1})`:
///
/// ```text
/// min ½ UᵀHU + (F x̃)ᵀU   s.t.   C U + D x̃ + e ≥ 0
/// ```
///
/// with the state box on the `x` part of `x̃_1 … x̃_N` and the input box on
/// every `u_k`.
#[derive(Clone, Debug)]
pub struct MpcController {
    horizon: usize,
    hessian: DMatrix<f64>,
    linear_map: DMatrix<f64>,
    constraint_matrix: DMatrix<f64>,
    offset_map: DMatrix<f64>,
    offset_const: DVector<f64>,
    u_lo: Vec<f64>,
    u_hi: Vec<f64>,
    fallback: LqrController,
    options: IpmOptions,
}

fn qp_options() -> IpmOptions {
    IpmOptions {
        tol: 1e-9,
        mu_init: 1e-2,
        max_iter: 200,
        hessian: HessianMode::Exact,
        ..IpmOptions::default()
    }
}

impl MpcController {
    pub fn new(
        model: &AugmentedLti,
        horizon: usize,
        x_box: (&[f64], &[f64]),
        u_box: (&[f64], &[f64]),
        fallback: LqrController,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("MPC horizon must be positive".into()));
        }
        let nt = model.dim();
        let nu = model.input_dim();
        let nx = model.state_dim;
        check_dim("state box", nx, x_box.0.len())?;
        check_dim("state box", nx, x_box.1.len())?;
        check_dim("input box", nu, u_box.0.len())?;
        check_dim("input box", nu, u_box.1.len())?;
        check_dim("fallback gain", nt, fallback.gain.ncols())?;
        let n = horizon;
        let nv = n * nu;

        // x̃_k = Sx_k x̃_0 + Su_k U
        let mut sx = Vec::with_capacity(n + 1);
        let mut su = Vec::with_capacity(n + 1);
        sx.push(DMatrix::identity(nt, nt));
        su.push(DMatrix::zeros(nt, nv));
        for k in 0..n {
            let next_sx = &model.a * &sx[k];
            let mut next_su = &model.a * &su[k];
            next_su.view_mut((0, k * nu), (nt, nu)).copy_from(&model.b);
            sx.push(next_sx);
            su.push(next_su);
        }

        let mut hessian = DMatrix::zeros(nv, nv);
        let mut linear_map = DMatrix::zeros(nv, nt);
        let mut weight = 1.0;
        for k in 0..n {
            let q = &model.q * weight;
            let nk = &model.n * weight;
            // stage k contributes x̃_kᵀQx̃_k + u_kᵀRu_k + 2x̃_kᵀÑu_k
            let mut sel = DMatrix::zeros(nu, nv);
            sel.view_mut((0, k * nu), (nu, nu)).fill_with_identity();
            let qsu = &q * &su[k];
            let nsel = &nk * &sel;
            hessian += (su[k].transpose() * &qsu) * 2.0;
            hessian += (sel.transpose() * &model.r * &sel) * (2.0 * weight);
            let cross = su[k].transpose() * &nsel;
            hessian += (&cross + cross.transpose()) * 2.0;
            linear_map += (qsu.transpose() * &sx[k] + nsel.transpose() * &sx[k]) * 2.0;
            weight *= model.gamma;
        }
        hessian = (&hessian + hessian.transpose()) * 0.5;

        let rows = 2 * n * nx + 2 * nv;
        let mut constraint_matrix = DMatrix::zeros(rows, nv);
        let mut offset_map = DMatrix::zeros(rows, nt);
        let mut offset_const = DVector::zeros(rows);
        let mut r = 0;
        for k in 1..=n {
            for i in 0..nx {
                let su_row = su[k].row(i);
                let sx_row = sx[k].row(i);
                constraint_matrix.row_mut(r).copy_from(&su_row);
                offset_map.row_mut(r).copy_from(&sx_row);
                offset_const[r] = -x_box.0[i];
                constraint_matrix.row_mut(r + 1).copy_from(&(-su_row));
                offset_map.row_mut(r + 1).copy_from(&(-sx_row));
                offset_const[r + 1] = x_box.1[i];
                r += 2;
            }
        }
        for j in 0..nv {
            let i = j % nu;
            constraint_matrix[(r, j)] = 1.0;
            offset_const[r] = -u_box.0[i];
            constraint_matrix[(r + 1, j)] = -1.0;
            offset_const[r + 1] = u_box.1[i];
            r += 2;
        }

        Ok(Self {
            horizon,
            hessian,
            linear_map,
            constraint_matrix,
            offset_map,
            offset_const,
            u_lo: u_box.0.to_vec(),
            u_hi: u_box.1.to_vec(),
            fallback,
            options: qp_options(),
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn fallback(&self) -> &LqrController {
        &self.fallback
    }

    /// The QP posed at `x̃`.
    pub fn qp(&self, xt: &DVector<f64>) -> Result<QuadraticProgram> {
        check_dim("augmented state", self.linear_map.ncols(), xt.len())?;
        QuadraticProgram::new(
            self.hessian.clone(),
            &self.linear_map * xt,
            self.constraint_matrix.clone(),
            &self.offset_map * xt + &self.offset_const,
        )
    }

    /// First input of the optimal plan, or the LQR input when the QP is infeasible.
    pub fn decide(&self, xt: &DVector<f64>) -> Result<(Vec<f64>, MpcDecision)> {
        let qp = self.qp(xt)?;
        let nu = self.u_lo.len();
        let outcome = ipm_run(&qp, &vec![0.0; qp.dim()], &self.options)?;
        let Some(failure) = outcome.failure else {
            let u = outcome.result.theta[..nu]
                .iter()
                .zip(self.u_lo.iter().zip(&self.u_hi))
                .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
                .collect();
            return Ok((u, MpcDecision::Optimal));
        };
        let margin = phase_one(&qp, &self.options)?;
        if margin > INFEASIBILITY_MARGIN {
            Ok((self.fallback.act(xt)?, MpcDecision::FallbackLqr))
        } else {
            Err(Error::Numerical(format!(
                "MPC QP is feasible (phase-1 margin {margin:e}) but the solver failed: {failure}"
            )))
        }
    }

    pub fn act(&self, xt: &DVector<f64>) -> Result<Vec<f64>> {
        Ok(self.decide(xt)?.0)
    }
}

/// `min t  s.t.  A U + b + t·1 ≥ 0`; the optimum is positive exactly when
/// the QP has no feasible point.
fn phase_one(qp: &QuadraticProgram, options: &IpmOptions) -> Result<f64> {
    let nv = qp.dim();
    let rows = qp.constraint_matrix.nrows();
    let mut a = DMatrix::zeros(rows, nv + 1);
    a.view_mut((0, 0), (rows, nv)).copy_from(&qp.constraint_matrix);
    a.column_mut(nv).fill(1.0);
    let mut c = DVector::zeros(nv + 1);
    c[nv] = 1.0;
    let lp = QuadraticProgram::new(DMatrix::zeros(nv + 1, nv + 1), c, a, qp.constraint_offset.clone())?;
    let violation = qp.constraint_offset.iter().fold(0.0f64, |m, v| m.max(-v));
    let mut start = vec![0.0; nv + 1];
    start[nv] = violation + 1.0;
    let outcome = ipm_run(&lp, &start, options)?;
    if let Some(e) = outcome.failure {
        return Err(Error::Numerical(format!("MPC phase-1 problem failed: {e}")));
    }
    Ok(outcome.result.theta[nv])
}
