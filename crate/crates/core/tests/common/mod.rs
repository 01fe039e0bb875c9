//! Oracles shared by the integration suites.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use policyopt::ipm::{build_condensed, recover_directions, solve_condensed, KktSystem, QuadraticProgram, SampleDerivatives, SeparableNlp};
use policyopt::policy::MlpPolicy;
use policyopt::process_model::{benchmark_problem, sample_scenarios, AffineQuadraticProblem};
use policyopt::rollout::SampleNlp;
use policyopt::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random instance with `H` positive definite and positive `Σ_i`.
pub fn random_system(rng: &mut ChaCha8Rng, p: usize, ms: &[usize]) -> KktSystem {
    let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    let mut v = || rng.random_range(-1.0..1.0);
    let hessian = &a * a.transpose() + DMatrix::identity(p, p) * 0.1;
    let jacobians = ms.iter().map(|&m| DMatrix::from_fn(m, p, |_, _| v())).collect();
    let r_theta = DVector::from_fn(p, |_, _| v());
    let r_s = ms.iter().map(|&m| DVector::from_fn(m, |_, _| v())).collect();
    let r_lambda = ms.iter().map(|&m| DVector::from_fn(m, |_, _| v())).collect();
    let sigma = ms
        .iter()
        .map(|&m| DVector::from_fn(m, |_, _| 10f64.powf(rng.random_range(-2.0..2.0))))
        .collect();
    KktSystem { hessian, sigma, jacobians, r_theta, r_s, r_lambda }
}

/// Dense LU solve of the unreduced block system, ordered
/// `(d_θ, d^s_1, d^λ_1, …, d^s_S, d^λ_S)`.
pub fn dense_solve(sys: &KktSystem) -> (DVector<f64>, Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let p = sys.hessian.nrows();
    let ms: Vec<usize> = sys.sigma.iter().map(|s| s.len()).collect();
    let n = p + 2 * ms.iter().sum::<usize>();
    let mut k = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    k.view_mut((0, 0), (p, p)).copy_from(&sys.hessian);
    rhs.rows_mut(0, p).copy_from(&sys.r_theta);
    let mut off = p;
    for (i, &m) in ms.iter().enumerate() {
        let (so, lo) = (off, off + m);
        k.view_mut((0, lo), (p, m)).copy_from(&sys.jacobians[i].transpose());
        for j in 0..m {
            k[(so + j, so + j)] = sys.sigma[i][j];
            k[(so + j, lo + j)] = 1.0;
            k[(lo + j, so + j)] = 1.0;
        }
        k.view_mut((lo, 0), (m, p)).copy_from(&sys.jacobians[i]);
        rhs.rows_mut(so, m).copy_from(&sys.r_s[i]);
        rhs.rows_mut(lo, m).copy_from(&sys.r_lambda[i]);
        off += 2 * m;
    }
    let x = k.lu().solve(&rhs).expect("dense system is nonsingular");
    let mut ds = Vec::new();
    let mut dl = Vec::new();
    let mut off = p;
    for &m in &ms {
        ds.push(x.rows(off, m).into_owned());
        dl.push(x.rows(off + m, m).into_owned());
        off += 2 * m;
    }
    (x.rows(0, p).into_owned(), ds, dl)
}

pub fn block_rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Worst block-wise relative error of the condensed path against the dense oracle.
pub fn condensed_error(sys: &KktSystem) -> f64 {
    let sol = solve_condensed(&build_condensed(sys).unwrap(), &[0.0]).unwrap();
    let (ds, dl) = recover_directions(&sol.d_theta, sys);
    let (t_ref, ds_ref, dl_ref) = dense_solve(sys);
    let mut worst = block_rel(&sol.d_theta, &t_ref);
    for i in 0..ds.len() {
        worst = worst.max(block_rel(&ds[i], &ds_ref[i])).max(block_rel(&dl[i], &dl_ref[i]));
    }
    worst
}

/// One sample, `L = θ²`, `G = θ − 1`.
pub struct Shifted;

impl SeparableNlp for Shifted {
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
        Ok((t[0] * t[0], DVector::from_element(1, t[0] - 1.0)))
    }
    fn first_order(&self, t: &[f64], s: usize) -> Result<SampleDerivatives> {
        let (cost, constraints) = self.evaluate(t, s)?;
        Ok(SampleDerivatives {
            cost,
            gradient: DVector::from_element(1, 2.0 * t[0]),
            constraints,
            jacobian: DMatrix::from_element(1, 1, 1.0),
        })
    }
}

pub fn random_box_qp(rng: &mut ChaCha8Rng, n: usize) -> QuadraticProgram {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let h = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
    let c = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
    let lo = DVector::from_fn(n, |_, _| rng.random_range(-1.0..-0.1));
    let hi = DVector::from_fn(n, |_, _| rng.random_range(0.1..1.0));
    let mut cm = DMatrix::zeros(2 * n, n);
    let mut off = DVector::zeros(2 * n);
    for i in 0..n {
        cm[(i, i)] = 1.0;
        off[i] = -lo[i];
        cm[(n + i, i)] = -1.0;
        off[n + i] = hi[i];
    }
    QuadraticProgram::new(h, c, cm, off).unwrap()
}

/// Exhaustive search over the `3ⁿ` free/lower/upper assignments for the
/// point satisfying the box-QP KKT conditions.
pub fn enumerate_active_sets(qp: &QuadraticProgram) -> DVector<f64> {
    let n = qp.dim();
    let lo: Vec<f64> = (0..n).map(|i| -qp.constraint_offset[i]).collect();
    let hi: Vec<f64> = (0..n).map(|i| qp.constraint_offset[n + i]).collect();
    let h = &qp.hessian;
    let c = &qp.linear;
    let total = 3usize.pow(n as u32);
    let tol = 1e-10;
    let mut found = Vec::new();
    for code in 0..total {
        let mut state = vec![0u8; n];
        let mut k = code;
        for s in state.iter_mut() {
            *s = (k % 3) as u8;
            k /= 3;
        }
        let mut x = DVector::zeros(n);
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 0).collect();
        for i in 0..n {
            match state[i] {
                1 => x[i] = lo[i],
                2 => x[i] = hi[i],
                _ => {}
            }
        }
        if !free.is_empty() {
            let hf = DMatrix::from_fn(free.len(), free.len(), |r, q| h[(free[r], free[q])]);
            let rhs = DVector::from_fn(free.len(), |r, _| {
                -c[free[r]] - (0..n).filter(|j| state[*j] != 0).map(|j| h[(free[r], j)] * x[j]).sum::<f64>()
            });
            let xf = hf.cholesky().expect("principal submatrix is PD").solve(&rhs);
            for (r, &i) in free.iter().enumerate() {
                x[i] = xf[r];
            }
        }
        let g = h * &x + c;
        let ok = (0..n).all(|i| match state[i] {
            0 => x[i] >= lo[i] - tol && x[i] <= hi[i] + tol,
            1 => g[i] >= -tol,
            _ => g[i] <= tol,
        });
        if ok {
            found.push(x);
        }
    }
    assert!(!found.is_empty(), "no KKT point found");
    for x in &found[1..] {
        assert!((x - &found[0]).amax() < 1e-8, "KKT point is not unique");
    }
    found.swap_remove(0)
}

pub const H: f64 = 1e-6;

pub fn nlp(noisy: bool, s: usize, t: usize, seed: u64) -> SampleNlp<AffineQuadraticProblem> {
    let (p, e) = benchmark_problem(noisy);
    let sc = sample_scenarios(&p, &e, s, t, seed).unwrap();
    SampleNlp::new(p, MlpPolicy::new(vec![6, 6, 6, 3]).unwrap(), sc).unwrap()
}

pub fn random_theta(rng: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    (0..p).map(|_| rng.random_range(-0.5..0.5)).collect()
}

/// Central differences of `(L_s, G_s)` along every coordinate.
pub fn central(nlp: &SampleNlp<AffineQuadraticProblem>, theta: &[f64], s: usize) -> (DVector<f64>, Vec<DVector<f64>>) {
    let p = theta.len();
    let m = nlp.constraints_per_sample();
    let mut grad = DVector::zeros(p);
    let mut rows = vec![DVector::zeros(p); m];
    let mut work = theta.to_vec();
    for j in 0..p {
        work[j] = theta[j] + H;
        let (cp, gp) = nlp.evaluate(&work, s).unwrap();
        work[j] = theta[j] - H;
        let (cm, gm) = nlp.evaluate(&work, s).unwrap();
        work[j] = theta[j];
        grad[j] = (cp - cm) / (2.0 * H);
        for i in 0..m {
            rows[i][j] = (gp[i] - gm[i]) / (2.0 * H);
        }
    }
    (grad, rows)
}

/// `‖a − b‖∞ / ‖b‖∞`, or `‖a‖∞` when `b` vanishes.
pub fn row_rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let scale = b.amax();
    let diff = (a - b).amax();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn worst_error(nlp: &SampleNlp<AffineQuadraticProblem>, theta: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for s in 0..nlp.n_samples() {
        let d = nlp.first_order(theta, s).unwrap();
        let (grad, rows) = central(nlp, theta, s);
        worst = worst.max(row_rel(&d.gradient, &grad));
        for (i, row) in rows.iter().enumerate() {
            worst = worst.max(row_rel(&d.jacobian.row(i).transpose(), row));
        }
    }
    worst
}
