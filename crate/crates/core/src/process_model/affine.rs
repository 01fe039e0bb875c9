use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{BoxDistribution, ControlProblem, MarkovEmbedding, ScenarioRng};
use crate::diff::{dot, mat_vec, Real};
use crate::error::{check_dim, Error, Result};

/// Affine dynamics, quadratic cost with a price cross-term, and box constraints.
///
/// ```text
/// x_next = A x + B u + E ψ(ζ_next)
/// ℓ      = xᵀ Q x + uᵀ R u + ψ(ζ)ᵀ C u
/// g      = (x - x_lo, x_hi - x, u - u_lo, u_hi - u)
/// ```
///
/// `observation` is the linear read-out `ψ` of the embedding the problem is
/// paired with.
#[derive(Clone, Debug)]
pub struct AffineQuadraticProblem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub observation: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub price: DMatrix<f64>,
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    pub u_lo: Vec<f64>,
    pub u_hi: Vec<f64>,
    pub gamma: f64,
    pub init_state: BoxDistribution,
    pub init_aug: BoxDistribution,
}

impl AffineQuadraticProblem {
    pub fn validate(&self) -> Result<()> {
        let nx = self.a.nrows();
        let nu = self.b.ncols();
        let nxi = self.e.ncols();
        let nz = self.observation.ncols();
        check_dim("A columns", nx, self.a.ncols())?;
        check_dim("B rows", nx, self.b.nrows())?;
        check_dim("E rows", nx, self.e.nrows())?;
        check_dim("observation rows", nxi, self.observation.nrows())?;
        check_dim("Q rows", nx, self.q.nrows())?;
        check_dim("Q columns", nx, self.q.ncols())?;
        check_dim("R rows", nu, self.r.nrows())?;
        check_dim("R columns", nu, self.r.ncols())?;
        check_dim("price rows", nxi, self.price.nrows())?;
        check_dim("price columns", nu, self.price.ncols())?;
        check_dim("x_lo", nx, self.x_lo.len())?;
        check_dim("x_hi", nx, self.x_hi.len())?;
        check_dim("u_lo", nu, self.u_lo.len())?;
        check_dim("u_hi", nu, self.u_hi.len())?;
        check_dim("initial state distribution", nx, self.init_state.dim())?;
        check_dim("initial augmented distribution", nz, self.init_aug.dim())?;
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "discount must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        let boxes_ok = self
            .x_lo
            .iter()
            .zip(&self.x_hi)
            .chain(self.u_lo.iter().zip(&self.u_hi))
            .all(|(l, h)| l.is_finite() && h.is_finite() && l < h);
        if !boxes_ok {
            return Err(Error::InvalidArgument(
                "state and input boxes need finite lo < hi".into(),
            ));
        }
        Ok(())
    }

    pub fn input_box(&self) -> (&[f64], &[f64]) {
        (&self.u_lo, &self.u_hi)
    }

    pub fn state_box(&self) -> (&[f64], &[f64]) {
        (&self.x_lo, &self.x_hi)
    }

    fn xi(&self, zeta: &[f64]) -> DVector<f64> {
        &self.observation * DVector::from_column_slice(zeta)
    }
}

impl ControlProblem for AffineQuadraticProblem {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    fn control_dim(&self) -> usize {
        self.b.ncols()
    }
    fn aug_dim(&self) -> usize {
        self.observation.ncols()
    }
    fn constraint_dim(&self) -> usize {
        2 * (self.state_dim() + self.control_dim())
    }
    fn discount(&self) -> f64 {
        self.gamma
    }

    fn dynamics<R: Real>(&self, x: &[R], u: &[R], zeta_next: &[f64]) -> Vec<R> {
        let disturbance = &self.e * self.xi(zeta_next);
        let ax = mat_vec(&self.a, x);
        let bu = mat_vec(&self.b, u);
        ax.iter()
            .zip(&bu)
            .zip(disturbance.iter())
            .map(|((axi, bui), di)| axi.add(bui).offset(*di))
            .collect()
    }

    fn stage_cost<R: Real>(&self, x: &[R], u: &[R], zeta: &[f64]) -> R {
        let qx = mat_vec(&self.q, x);
        let ru = mat_vec(&self.r, u);
        let mut cost = dot(x, &qx);
        cost.scale_acc(1.0, &dot(u, &ru));
        let coeff = self.price.transpose() * self.xi(zeta);
        for (c, ui) in coeff.iter().zip(u) {
            cost.scale_acc(*c, ui);
        }
        cost
    }

    fn constraints<R: Real>(&self, x: &[R], u: &[R], _zeta: &[f64]) -> Vec<R> {
        let mut g = Vec::with_capacity(self.constraint_dim());
        g.extend(x.iter().zip(&self.x_lo).map(|(xi, lo)| xi.offset(-lo)));
        g.extend(x.iter().zip(&self.x_hi).map(|(xi, hi)| xi.scale(-1.0).offset(*hi)));
        g.extend(u.iter().zip(&self.u_lo).map(|(ui, lo)| ui.offset(-lo)));
        g.extend(u.iter().zip(&self.u_hi).map(|(ui, hi)| ui.scale(-1.0).offset(*hi)));
        g
    }

    fn sample_initial_state(&self, rng: &mut ScenarioRng) -> Vec<f64> {
        self.init_state.sample(rng)
    }

    fn sample_initial_aug(&self, rng: &mut ScenarioRng) -> Vec<f64> {
        self.init_aug.sample(rng)
    }
}

/// Innovation law for the embedding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnovationDist {
    /// `w ≡ 0`; the embedding evolves deterministically.
    Zero,
    Uniform { lo: Vec<f64>, hi: Vec<f64> },
}

/// `ζ_next = Φ ζ + G w`, `ξ = Ψ ζ`.
#[derive(Clone, Debug)]
pub struct LinearEmbedding {
    pub transition: DMatrix<f64>,
    pub innovation: DMatrix<f64>,
    pub observation: DMatrix<f64>,
    pub noise: InnovationDist,
}

impl LinearEmbedding {
    pub fn validate(&self) -> Result<()> {
        let nz = self.transition.nrows();
        check_dim("transition columns", nz, self.transition.ncols())?;
        check_dim("innovation rows", nz, self.innovation.nrows())?;
        check_dim("observation columns", nz, self.observation.ncols())?;
        if let InnovationDist::Uniform { lo, hi } = &self.noise {
            BoxDistribution::new(lo.clone(), hi.clone())?;
            check_dim("innovation distribution", self.innovation.ncols(), lo.len())?;
        }
        Ok(())
    }

    pub fn is_noisy(&self) -> bool {
        !matches!(self.noise, InnovationDist::Zero)
    }

    /// Same embedding with the innovations switched off.
    pub fn nominal(&self) -> Self {
        Self {
            noise: InnovationDist::Zero,
            ..self.clone()
        }
    }
}

impl MarkovEmbedding for LinearEmbedding {
    fn aug_dim(&self) -> usize {
        self.transition.nrows()
    }
    fn innovation_dim(&self) -> usize {
        self.innovation.ncols()
    }
    fn obs_dim(&self) -> usize {
        self.observation.nrows()
    }

    fn step(&self, zeta: &[f64], w: &[f64]) -> Vec<f64> {
        let next = &self.transition * DVector::from_column_slice(zeta)
            + &self.innovation * DVector::from_column_slice(w);
        next.as_slice().to_vec()
    }

    fn observe(&self, zeta: &[f64]) -> Vec<f64> {
        (&self.observation * DVector::from_column_slice(zeta))
            .as_slice()
            .to_vec()
    }

    fn sample_innovation(&self, rng: &mut ScenarioRng) -> Vec<f64> {
        match &self.noise {
            InnovationDist::Zero => vec![0.0; self.innovation_dim()],
            InnovationDist::Uniform { lo, hi } => BoxDistribution {
                lo: lo.clone(),
                hi: hi.clone(),
            }
            .sample(rng),
        }
    }
}
