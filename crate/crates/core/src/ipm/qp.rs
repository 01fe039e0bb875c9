//! Convex QP `min ½θᵀHθ + cᵀθ` s.t. `Aθ + b ≥ 0` as a one-sample NLP.

use nalgebra::{DMatrix, DVector};

use super::{SampleDerivatives, SeparableNlp};
use crate::error::{check_dim, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticProgram {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constraint_matrix: DMatrix<f64>,
    pub constraint_offset: DVector<f64>,
}

impl QuadraticProgram {
    pub fn new(
        hessian: DMatrix<f64>,
        linear: DVector<f64>,
        constraint_matrix: DMatrix<f64>,
        constraint_offset: DVector<f64>,
    ) -> Result<Self> {
        let n = linear.len();
        check_dim("qp hessian rows", n, hessian.nrows())?;
        check_dim("qp hessian columns", n, hessian.ncols())?;
        check_dim("qp constraint columns", n, constraint_matrix.ncols())?;
        check_dim("qp constraint rows", constraint_matrix.nrows(), constraint_offset.len())?;
        Ok(Self { hessian, linear, constraint_matrix, constraint_offset })
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn objective(&self, theta: &DVector<f64>) -> f64 {
        0.5 * theta.dot(&(&self.hessian * theta)) + self.linear.dot(theta)
    }

    pub fn constraints(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.constraint_matrix * theta + &self.constraint_offset
    }
}

impl SeparableNlp for QuadraticProgram {
    fn n_params(&self) -> usize {
        self.dim()
    }

    fn n_samples(&self) -> usize {
        1
    }

    fn n_constraints(&self, _sample: usize) -> usize {
        self.constraint_offset.len()
    }

    fn evaluate(&self, theta: &[f64], _sample: usize) -> Result<(f64, DVector<f64>)> {
        check_dim("qp point", self.dim(), theta.len())?;
        let t = DVector::from_column_slice(theta);
        Ok((self.objective(&t), self.constraints(&t)))
    }

    fn first_order(&self, theta: &[f64], _sample: usize) -> Result<SampleDerivatives> {
        check_dim("qp point", self.dim(), theta.len())?;
        let t = DVector::from_column_slice(theta);
        Ok(SampleDerivatives {
            cost: self.objective(&t),
            gradient: &self.hessian * &t + &self.linear,
            constraints: self.constraints(&t),
            jacobian: self.constraint_matrix.clone(),
        })
    }

    fn provides_hessian(&self) -> bool {
        true
    }

    fn lagrangian_hessian(
        &self,
        _theta: &[f64],
        _multipliers: &[DVector<f64>],
    ) -> Result<DMatrix<f64>> {
        Ok(self.hessian.clone())
    }
}
