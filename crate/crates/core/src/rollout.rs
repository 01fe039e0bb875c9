//! Sampled, truncated policy-optimization problem in separable form.
//!
//! Each sample `s` contributes a cost `L_s(θ)` (discounted stage costs of a
//! `T`-step closed-loop simulation under `π_θ`) and a constraint vector
//! `G_s(θ) ≥ 0` (the stage constraints at `t = 0..T`, stage-major). Samples do
//! not interact, so their derivatives can be evaluated independently.

use nalgebra::{DMatrix, DVector};

use crate::diff::{jvp, values, Differentiable, Dual, Real, TangentBundle};
use crate::error::{check_dim, Error, Result};
use crate::ipm::{SampleDerivatives, SeparableNlp};
use crate::policy::MlpPolicy;
use crate::process_model::{ControlProblem, ScenarioSet};

/// Closed-loop trace of one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutResult {
    /// `x_0..x_T`
    pub states: Vec<Vec<f64>>,
    /// `u_0..u_T`
    pub controls: Vec<Vec<f64>>,
    /// Undiscounted `ℓ(x_t, u_t; ζ_t)`.
    pub stage_costs: Vec<f64>,
    /// `Σ_t γ^t ℓ_t`
    pub total_cost: f64,
    /// `g(x_t, u_t; ζ_t)` per stage.
    pub constraints: Vec<Vec<f64>>,
}

/// How [`SampleNlp::jtj_accumulate_with`] forms `Jᵀ diag(σ) J`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JtjMode {
    /// Dense when `m_s · P` is small, streaming otherwise.
    Auto,
    Dense,
    /// Accumulates stage by stage; the full Jacobian is never held.
    Streaming,
}

const DENSE_JTJ_LIMIT: usize = 1 << 20;

/// Policy-optimization NLP built from a problem, a policy shape, and scenarios.
///
/// The embedding is not needed here: scenarios carry the realized `ζ` paths.
#[derive(Clone, Debug)]
pub struct SampleNlp<P> {
    problem: P,
    policy: MlpPolicy,
    scenarios: ScenarioSet,
}

impl<P: ControlProblem> SampleNlp<P> {
    pub fn new(problem: P, policy: MlpPolicy, scenarios: ScenarioSet) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::InvalidArgument("no scenarios".into()));
        }
        check_dim(
            "policy input",
            problem.state_dim() + problem.aug_dim(),
            policy.input_dim(),
        )?;
        check_dim("policy output", problem.control_dim(), policy.output_dim())?;
        let horizon = scenarios.horizon();
        if horizon == 0 {
            return Err(Error::InvalidArgument("scenario horizon must be at least 1".into()));
        }
        for sc in &scenarios.scenarios {
            check_dim("scenario horizon", horizon, sc.horizon())?;
            check_dim("scenario initial state", problem.state_dim(), sc.x0.len())?;
            for z in &sc.zeta {
                check_dim("scenario augmented state", problem.aug_dim(), z.len())?;
            }
        }
        Ok(Self {
            problem,
            policy,
            scenarios,
        })
    }

    pub fn problem(&self) -> &P {
        &self.problem
    }

    pub fn policy(&self) -> &MlpPolicy {
        &self.policy
    }

    pub fn scenarios(&self) -> &ScenarioSet {
        &self.scenarios
    }

    pub fn horizon(&self) -> usize {
        self.scenarios.horizon()
    }

    /// `m_s = m · (T + 1)`.
    pub fn constraints_per_sample(&self) -> usize {
        self.problem.constraint_dim() * (self.horizon() + 1)
    }

    pub fn param_count(&self) -> usize {
        self.policy.param_count()
    }

    fn check_call(&self, theta_len: usize, s: usize) -> Result<()> {
        check_dim("theta length", self.param_count(), theta_len)?;
        if s >= self.scenarios.len() {
            return Err(Error::InvalidArgument(format!(
                "sample index {s} out of range ({} samples)",
                self.scenarios.len()
            )));
        }
        Ok(())
    }

    /// Runs the closed loop for sample `s`, handing each stage to `visit`
    /// as `(t, x_t, u_t, ℓ_t, g_t)`.
    fn simulate<R, V>(&self, theta: &[R], s: usize, mut visit: V) -> Result<()>
    where
        R: Real,
        V: FnMut(usize, &[R], &[R], R, Vec<R>) -> Result<()>,
    {
        let sc = &self.scenarios.scenarios[s];
        let horizon = sc.horizon();
        let mut x: Vec<R> = sc.x0.iter().map(|&v| R::constant(v)).collect();
        for t in 0..=horizon {
            let zeta = &sc.zeta[t];
            let u = self.policy.act(theta, &x, zeta);
            if x.iter().chain(&u).any(|v| !v.value().is_finite()) {
                return Err(Error::DivergedRollout { t });
            }
            let cost = self.problem.stage_cost(&x, &u, zeta);
            let g = self.problem.constraints(&x, &u, zeta);
            let next = if t < horizon {
                Some(self.problem.dynamics(&x, &u, &sc.zeta[t + 1]))
            } else {
                None
            };
            visit(t, &x, &u, cost, g)?;
            if let Some(next) = next {
                x = next;
            }
        }
        Ok(())
    }

    /// `(L_s, G_s)` on any scalar type.
    fn cost_and_constraints<R: Real>(&self, theta: &[R], s: usize) -> Result<(R, Vec<R>)> {
        let gamma = self.problem.discount();
        let mut total = R::zero();
        let mut weight = 1.0;
        let mut all_g = Vec::with_capacity(self.constraints_per_sample());
        self.simulate(theta, s, |_, _, _, cost, g| {
            total.scale_acc(weight, &cost);
            weight *= gamma;
            all_g.extend(g);
            Ok(())
        })?;
        if !total.value().is_finite() {
            return Err(Error::DivergedRollout { t: self.horizon() });
        }
        Ok((total, all_g))
    }

    pub fn rollout(&self, theta: &[f64], s: usize) -> Result<RolloutResult> {
        self.check_call(theta.len(), s)?;
        let gamma = self.problem.discount();
        let mut out = RolloutResult {
            states: Vec::new(),
            controls: Vec::new(),
            stage_costs: Vec::new(),
            total_cost: 0.0,
            constraints: Vec::new(),
        };
        let mut weight = 1.0;
        self.simulate(theta, s, |_, x, u, cost, g| {
            out.states.push(x.to_vec());
            out.controls.push(u.to_vec());
            out.total_cost += weight * cost;
            weight *= gamma;
            out.stage_costs.push(cost);
            out.constraints.push(g);
            Ok(())
        })?;
        Ok(out)
    }

    pub fn sample_cost(&self, theta: &[f64], s: usize) -> Result<f64> {
        self.check_call(theta.len(), s)?;
        Ok(self.cost_and_constraints(theta, s)?.0)
    }

    pub fn sample_constraints(&self, theta: &[f64], s: usize) -> Result<DVector<f64>> {
        self.check_call(theta.len(), s)?;
        Ok(DVector::from_vec(self.cost_and_constraints(theta, s)?.1))
    }

    /// `Σ_s L_s(θ)` reduced in sample order.
    pub fn total_cost(&self, theta: &[f64]) -> Result<f64> {
        let costs = (0..self.scenarios.len())
            .map(|s| self.sample_cost(theta, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(costs.iter().sum())
    }

    fn sample_fn(&self, s: usize) -> SampleFunction<'_, P> {
        SampleFunction { nlp: self, s }
    }

    /// Value, gradient, constraints and Jacobian of sample `s` in one forward pass.
    pub fn sample_derivatives(&self, theta: &[f64], s: usize) -> Result<SampleDerivatives> {
        self.check_call(theta.len(), s)?;
        let p = self.param_count();
        let tb = jvp(&self.sample_fn(s), theta, &DMatrix::identity(p, p))?;
        Ok(split_bundle(tb))
    }

    /// Directional derivatives of `(L_s, G_s)` along the columns of `directions`.
    pub fn sample_jvp(&self, theta: &[f64], s: usize, directions: &DMatrix<f64>) -> Result<TangentBundle> {
        self.check_call(theta.len(), s)?;
        jvp(&self.sample_fn(s), theta, directions)
    }

    pub fn cost_gradient(&self, theta: &[f64], s: usize) -> Result<DVector<f64>> {
        Ok(self.sample_derivatives(theta, s)?.gradient)
    }

    pub fn constraint_jacobian(&self, theta: &[f64], s: usize) -> Result<DMatrix<f64>> {
        Ok(self.sample_derivatives(theta, s)?.jacobian)
    }

    pub fn jtj_accumulate(&self, theta: &[f64], s: usize, sigma: &[f64]) -> Result<DMatrix<f64>> {
        self.jtj_accumulate_with(theta, s, sigma, JtjMode::Auto)
    }

    /// `J_sᵀ diag(σ) J_s`.
    pub fn jtj_accumulate_with(
        &self,
        theta: &[f64],
        s: usize,
        sigma: &[f64],
        mode: JtjMode,
    ) -> Result<DMatrix<f64>> {
        self.check_call(theta.len(), s)?;
        check_dim("sigma length", self.constraints_per_sample(), sigma.len())?;
        if sigma.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("sigma entries must be finite and non-negative".into()));
        }
        let p = self.param_count();
        let dense = match mode {
            JtjMode::Dense => true,
            JtjMode::Streaming => false,
            JtjMode::Auto => self.constraints_per_sample() * p <= DENSE_JTJ_LIMIT,
        };
        if dense {
            let jac = self.constraint_jacobian(theta, s)?;
            return Ok(weighted_gram(&jac, sigma));
        }
        let seeded: Vec<Dual> = theta
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let mut t = vec![0.0; p];
                t[i] = 1.0;
                Dual::new(v, t)
            })
            .collect();
        let m = self.problem.constraint_dim();
        let mut acc = DMatrix::zeros(p, p);
        self.simulate(&seeded, s, |t, _, _, _, g| {
            let block = TangentBundle::from_duals(&g, p).tangents;
            acc += weighted_gram(&block, &sigma[t * m..(t + 1) * m]);
            Ok(())
        })?;
        Ok(acc)
    }
}

/// `Jᵀ diag(σ) J`, exactly symmetric.
pub fn weighted_gram(jac: &DMatrix<f64>, sigma: &[f64]) -> DMatrix<f64> {
    let mut scaled = jac.clone();
    for (mut row, w) in scaled.row_iter_mut().zip(sigma) {
        row *= w.sqrt();
    }
    let mut g = scaled.tr_mul(&scaled);
    let n = g.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

fn split_bundle(tb: TangentBundle) -> SampleDerivatives {
    let m = tb.value.len() - 1;
    let p = tb.tangents.ncols();
    SampleDerivatives {
        cost: tb.value[0],
        gradient: tb.tangents.row(0).transpose(),
        constraints: tb.value.rows(1, m).into_owned(),
        jacobian: tb.tangents.view((1, 0), (m, p)).into_owned(),
    }
}

/// `θ ↦ (L_s(θ), G_s(θ))` for one sample.
pub struct SampleFunction<'a, P> {
    nlp: &'a SampleNlp<P>,
    s: usize,
}

impl<P: ControlProblem> Differentiable for SampleFunction<'_, P> {
    fn input_dim(&self) -> usize {
        self.nlp.param_count()
    }

    fn output_dim(&self) -> usize {
        1 + self.nlp.constraints_per_sample()
    }

    fn eval<R: Real>(&self, theta: &[R]) -> Result<Vec<R>> {
        let (cost, g) = self.nlp.cost_and_constraints(theta, self.s)?;
        let mut out = Vec::with_capacity(1 + g.len());
        out.push(cost);
        out.extend(g);
        Ok(out)
    }
}

impl<P: ControlProblem> SeparableNlp for SampleNlp<P> {
    fn n_params(&self) -> usize {
        self.param_count()
    }

    fn n_samples(&self) -> usize {
        self.scenarios.len()
    }

    fn n_constraints(&self, _sample: usize) -> usize {
        self.constraints_per_sample()
    }

    fn evaluate(&self, theta: &[f64], sample: usize) -> Result<(f64, DVector<f64>)> {
        self.check_call(theta.len(), sample)?;
        let (cost, g) = self.cost_and_constraints(theta, sample)?;
        Ok((cost, DVector::from_vec(values(&g))))
    }

    fn first_order(&self, theta: &[f64], sample: usize) -> Result<SampleDerivatives> {
        self.sample_derivatives(theta, sample)
    }
}
