//! Three-zone heating/cooling benchmark with an oscillating, decaying price signal.

use nalgebra::DMatrix;

use super::{AffineQuadraticProblem, BoxDistribution, InnovationDist, LinearEmbedding};

pub const BENCHMARK_GAMMA: f64 = 0.99;

/// Knobs of the benchmark that are not part of its physics.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkParams {
    pub gamma: f64,
    /// Half-width of the uniform initial-state box (per coordinate).
    pub state_half_width: f64,
    /// Half-width of the uniform draw for the two oscillator coordinates of `ζ₀`.
    pub aug_half_width: f64,
    /// Half-width of the uniform innovation in the noisy variant.
    pub noise_half_width: f64,
}

impl Default for BenchmarkParams {
    fn default() -> Self {
        Self {
            gamma: BENCHMARK_GAMMA,
            state_half_width: 0.2,
            aug_half_width: 0.5,
            noise_half_width: 1.0,
        }
    }
}

/// The benchmark instance with default parameters.
pub fn benchmark_problem(noisy: bool) -> (AffineQuadraticProblem, LinearEmbedding) {
    benchmark_problem_with(noisy, &BenchmarkParams::default())
}

pub fn benchmark_problem_with(
    noisy: bool,
    params: &BenchmarkParams,
) -> (AffineQuadraticProblem, LinearEmbedding) {
    let a = DMatrix::from_row_slice(
        3,
        3,
        &[0.9, -0.05, 0.0, -0.05, 0.9, -0.05, 0.0, -0.05, 0.9],
    );
    let observation = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 1.0]);
    let transition = DMatrix::from_row_slice(
        3,
        3,
        &[0.955, 0.295, 0.0, -0.295, 0.955, 0.0, 0.0, 0.0, 0.0],
    );
    let innovation = DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 1.0]);
    let noise = if noisy {
        InnovationDist::Uniform {
            lo: vec![-params.noise_half_width],
            hi: vec![params.noise_half_width],
        }
    } else {
        InnovationDist::Zero
    };

    let sw = params.state_half_width;
    let aw = params.aug_half_width;
    let problem = AffineQuadraticProblem {
        a,
        b: DMatrix::identity(3, 3),
        e: DMatrix::from_element(3, 1, 0.1),
        observation: observation.clone(),
        q: DMatrix::identity(3, 3) * 1e-3,
        r: DMatrix::identity(3, 3),
        price: DMatrix::from_element(1, 3, 0.3),
        x_lo: vec![-0.2; 3],
        x_hi: vec![0.2; 3],
        u_lo: vec![-0.03; 3],
        u_hi: vec![0.03; 3],
        gamma: params.gamma,
        init_state: BoxDistribution {
            lo: vec![-sw; 3],
            hi: vec![sw; 3],
        },
        init_aug: BoxDistribution {
            lo: vec![-aw, -aw, 0.0],
            hi: vec![aw, aw, 0.0],
        },
    };
    let embedding = LinearEmbedding {
        transition,
        innovation,
        observation,
        noise,
    };
    (problem, embedding)
}
