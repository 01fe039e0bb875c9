//! Experiment configuration and the external affine-problem file format.
//!
//! Both are TOML. A config looks like
//!
//! ```toml
//! out_dir = "runs/nominal"
//!
//! [problem]
//! noisy = false
//! gamma = 0.99
//!
//! [problem.source]
//! kind = "benchmark"
//! state_half_width = 0.2
//! aug_half_width = 0.5
//! noise_half_width = 1.0
//!
//! [training]
//! samples = 20
//! horizon = 20
//! hidden = [6, 6]
//! seed = 1
//! init_seed = 7
//! init_scale = 1.0
//!
//! [validation]
//! seed = 2
//! samples = 10
//! stages = 100
//! mpc_horizon = 20
//!
//! [ipm]
//! tol = 1e-6
//! ```
//!
//! Every section except `problem.source` may be omitted. With
//! `kind = "file"` the source names an [`AffineProblemFile`] by `path`,
//! resolved against the working directory.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ipm::IpmOptions;
use crate::policy::MlpPolicy;
use crate::process_model::{
    benchmark_problem_with, AffineQuadraticProblem, BenchmarkParams, BoxDistribution,
    ControlProblem, InnovationDist, LinearEmbedding, BENCHMARK_GAMMA,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub ipm: IpmOptions,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub source: ProblemSource,
    #[serde(default)]
    pub noisy: bool,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_gamma() -> f64 {
    BENCHMARK_GAMMA
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSource {
    Benchmark {
        state_half_width: f64,
        aug_half_width: f64,
        noise_half_width: f64,
    },
    File {
        path: PathBuf,
    },
}

impl Default for ProblemSource {
    fn default() -> Self {
        let p = BenchmarkParams::default();
        Self::Benchmark {
            state_half_width: p.state_half_width,
            aug_half_width: p.aug_half_width,
            noise_half_width: p.noise_half_width,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// `S`.
    pub samples: usize,
    /// `T`.
    pub horizon: usize,
    /// Hidden layer widths; input and output widths follow from the problem.
    pub hidden: Vec<usize>,
    /// Scenario seed.
    pub seed: u64,
    pub init_seed: u64,
    pub init_scale: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            samples: 20,
            horizon: 20,
            hidden: vec![6, 6],
            seed: 1,
            init_seed: 7,
            init_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub seed: u64,
    pub samples: usize,
    pub stages: usize,
    pub mpc_horizon: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            seed: 2,
            samples: 10,
            stages: 100,
            mpc_horizon: crate::baselines::MPC_HORIZON,
        }
    }
}

impl ExperimentConfig {
    /// Benchmark with every default.
    pub fn benchmark(noisy: bool) -> Self {
        Self {
            out_dir: default_out_dir(),
            problem: ProblemConfig {
                source: ProblemSource::default(),
                noisy,
                gamma: BENCHMARK_GAMMA,
            },
            training: TrainingConfig::default(),
            validation: ValidationConfig::default(),
            ipm: IpmOptions::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let t = &self.training;
        let v = &self.validation;
        if t.samples == 0 {
            return bad("training.samples must be at least 1".into());
        }
        if t.horizon == 0 {
            return bad("training.horizon must be at least 1".into());
        }
        if t.hidden.contains(&0) {
            return bad("training.hidden widths must be positive".into());
        }
        if !(t.init_scale > 0.0 && t.init_scale.is_finite()) {
            return bad("training.init_scale must be positive".into());
        }
        if v.samples == 0 || v.stages == 0 || v.mpc_horizon == 0 {
            return bad("validation samples, stages and mpc_horizon must be positive".into());
        }
        let gamma = self.problem.gamma;
        if !(gamma > 0.0 && gamma < 1.0) {
            return bad(format!("problem.gamma must lie in (0, 1), got {gamma}"));
        }
        if let ProblemSource::Benchmark {
            state_half_width,
            aug_half_width,
            noise_half_width,
        } = self.problem.source
        {
            let widths = [state_half_width, aug_half_width, noise_half_width];
            if widths.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
                return bad("benchmark half-widths must be finite and non-negative".into());
            }
        }
        self.ipm.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Problem and embedding selected by the config, with `gamma` and the
    /// noise switch applied.
    pub fn build_problem(&self) -> Result<(AffineQuadraticProblem, LinearEmbedding)> {
        let (mut problem, embedding) = match &self.problem.source {
            ProblemSource::Benchmark {
                state_half_width,
                aug_half_width,
                noise_half_width,
            } => benchmark_problem_with(
                self.problem.noisy,
                &BenchmarkParams {
                    gamma: self.problem.gamma,
                    state_half_width: *state_half_width,
                    aug_half_width: *aug_half_width,
                    noise_half_width: *noise_half_width,
                },
            ),
            ProblemSource::File { path } => {
                let (p, e) = AffineProblemFile::load(path)?.build(self.problem.gamma)?;
                if self.problem.noisy {
                    (p, e)
                } else {
                    (p, e.nominal())
                }
            }
        };
        problem.gamma = self.problem.gamma;
        problem.validate().map_err(|e| Error::Config(e.to_string()))?;
        embedding.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok((problem, embedding))
    }

    pub fn policy_for(&self, problem: &AffineQuadraticProblem) -> Result<MlpPolicy> {
        MlpPolicy::for_dims(
            problem.state_dim(),
            problem.aug_dim(),
            &self.training.hidden,
            problem.control_dim(),
        )
    }

    /// SHA-256 over the canonical serialization with `out_dir` blanked,
    /// followed by the problem file bytes when the source is a file.
    pub fn hash(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.out_dir = PathBuf::new();
        let mut h = Sha256::new();
        h.update(canonical.to_toml_string()?.as_bytes());
        if let ProblemSource::File { path } = &self.problem.source {
            h.update(std::fs::read(path)?);
        }
        Ok(hex::encode(h.finalize()))
    }
}

/// Affine-quadratic problem with a linear embedding, in plain arrays.
/// Matrices are lists of rows. `gamma` comes from the experiment config.
///
/// ```toml
/// a = [[0.9, 0.0], [0.0, 0.9]]
/// b = [[1.0], [0.0]]
/// e = [[0.1], [0.1]]
/// q = [[1.0, 0.0], [0.0, 1.0]]
/// r = [[1.0]]
/// price = [[0.3]]
/// x_lo = [-1.0, -1.0]
/// x_hi = [1.0, 1.0]
/// u_lo = [-0.5]
/// u_hi = [0.5]
/// transition = [[0.9]]
/// innovation = [[1.0]]
/// observation = [[1.0]]
/// init_state = { lo = [-0.1, -0.1], hi = [0.1, 0.1] }
/// init_aug = { lo = [-1.0], hi = [1.0] }
/// noise = { kind = "uniform", lo = [-0.5], hi = [0.5] }
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineProblemFile {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub price: Vec<Vec<f64>>,
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    pub u_lo: Vec<f64>,
    pub u_hi: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    pub innovation: Vec<Vec<f64>>,
    pub observation: Vec<Vec<f64>>,
    pub init_state: BoxDistribution,
    pub init_aug: BoxDistribution,
    pub noise: InnovationDist,
}

fn to_matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!("{name} must be a non-empty rectangular list of rows")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{name} has non-finite entries")));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), ncols, rows.iter().flatten().copied()))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl AffineProblemFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn from_parts(problem: &AffineQuadraticProblem, embedding: &LinearEmbedding) -> Self {
        Self {
            a: to_rows(&problem.a),
            b: to_rows(&problem.b),
            e: to_rows(&problem.e),
            q: to_rows(&problem.q),
            r: to_rows(&problem.r),
            price: to_rows(&problem.price),
            x_lo: problem.x_lo.clone(),
            x_hi: problem.x_hi.clone(),
            u_lo: problem.u_lo.clone(),
            u_hi: problem.u_hi.clone(),
            transition: to_rows(&embedding.transition),
            innovation: to_rows(&embedding.innovation),
            observation: to_rows(&embedding.observation),
            init_state: problem.init_state.clone(),
            init_aug: problem.init_aug.clone(),
            noise: embedding.noise.clone(),
        }
    }

    pub fn build(&self, gamma: f64) -> Result<(AffineQuadraticProblem, LinearEmbedding)> {
        let observation = to_matrix("observation", &self.observation)?;
        let problem = AffineQuadraticProblem {
            a: to_matrix("a", &self.a)?,
            b: to_matrix("b", &self.b)?,
            e: to_matrix("e", &self.e)?,
            observation: observation.clone(),
            q: to_matrix("q", &self.q)?,
            r: to_matrix("r", &self.r)?,
            price: to_matrix("price", &self.price)?,
            x_lo: self.x_lo.clone(),
            x_hi: self.x_hi.clone(),
            u_lo: self.u_lo.clone(),
            u_hi: self.u_hi.clone(),
            gamma,
            init_state: self.init_state.clone(),
            init_aug: self.init_aug.clone(),
        };
        let embedding = LinearEmbedding {
            transition: to_matrix("transition", &self.transition)?,
            innovation: to_matrix("innovation", &self.innovation)?,
            observation,
            noise: self.noise.clone(),
        };
        let cfg = |e: Error| Error::Config(e.to_string());
        problem.validate().map_err(cfg)?;
        embedding.validate().map_err(cfg)?;
        Ok((problem, embedding))
    }
}
