//! Multilayer-perceptron policy `u = π_θ(x, ζ)` with tanh hidden layers.
//!
//! Parameters are one flat vector: for each layer, the `out x in` weight
//! matrix in row-major order followed by the `out` biases. The last layer is
//! affine with no activation and no output clamping.

use std::io::{BufRead, BufReader, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diff::{affine, constants, tanh_all, Real};
use crate::error::{check_dim, Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpPolicy {
    layer_sizes: Vec<usize>,
}

impl MlpPolicy {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidArgument(
                "a policy needs at least an input and an output layer".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::InvalidArgument("layer sizes must be positive".into()));
        }
        Ok(Self { layer_sizes })
    }

    /// `[n_x + n_ζ, hidden..., n_u]`.
    pub fn for_dims(state_dim: usize, aug_dim: usize, hidden: &[usize], control_dim: usize) -> Result<Self> {
        let mut sizes = vec![state_dim + aug_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(control_dim);
        Self::new(sizes)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.layer_sizes)
    }

    pub fn init_params(&self, seed: u64, scale: f64) -> Result<Vec<f64>> {
        init_params(&self.layer_sizes, seed, scale)
    }

    /// Network output for an already-assembled input; no dimension checks.
    pub fn forward<R: Real>(&self, theta: &[R], input: &[R]) -> Vec<R> {
        let mut h = input.to_vec();
        let mut offset = 0;
        let last = self.layer_sizes.len() - 2;
        for (l, pair) in self.layer_sizes.windows(2).enumerate() {
            let (n_in, n_out) = (pair[0], pair[1]);
            let w = &theta[offset..offset + n_in * n_out];
            offset += n_in * n_out;
            let b = &theta[offset..offset + n_out];
            offset += n_out;
            let z = affine(w, &h, b);
            h = if l == last { z } else { tanh_all(&z) };
        }
        h
    }

    /// `π_θ(x, ζ)` with the state possibly carrying tangents and `ζ` constant.
    pub fn act<R: Real>(&self, theta: &[R], x: &[R], zeta: &[f64]) -> Vec<R> {
        let mut input = x.to_vec();
        input.extend(constants::<R>(zeta));
        self.forward(theta, &input)
    }

    pub fn eval(&self, theta: &[f64], x: &[f64], zeta: &[f64]) -> Result<Vec<f64>> {
        check_dim("policy parameters", self.param_count(), theta.len())?;
        check_dim("policy input", self.input_dim(), x.len() + zeta.len())?;
        Ok(self.act(theta, x, zeta))
    }

    /// Product of layer weight spectral norms, a Lipschitz bound for the network.
    pub fn lipschitz_bound(&self, theta: &[f64]) -> f64 {
        let mut offset = 0;
        let mut bound = 1.0;
        for pair in self.layer_sizes.windows(2) {
            let (n_in, n_out) = (pair[0], pair[1]);
            let w = nalgebra::DMatrix::from_row_slice(n_out, n_in, &theta[offset..offset + n_in * n_out]);
            offset += n_in * n_out + n_out;
            bound *= w.singular_values().max();
        }
        bound
    }
}

pub fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|p| p[0] * p[1] + p[1]).sum()
}

/// Weights uniform on `±scale / sqrt(fan_in)`, biases zero.
pub fn init_params(layer_sizes: &[usize], seed: u64, scale: f64) -> Result<Vec<f64>> {
    if layer_sizes.len() < 2 {
        return Err(Error::InvalidArgument("empty layer list".into()));
    }
    if !(scale > 0.0) {
        return Err(Error::InvalidArgument("initialization scale must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = Vec::with_capacity(param_count(layer_sizes));
    for pair in layer_sizes.windows(2) {
        let (n_in, n_out) = (pair[0], pair[1]);
        let bound = scale / (n_in as f64).sqrt();
        theta.extend((0..n_in * n_out).map(|_| rng.random_range(-1.0..=1.0) * bound));
        theta.extend(std::iter::repeat_n(0.0, n_out));
    }
    Ok(theta)
}

const THETA_MAGIC: &[u8; 8] = b"POTHETA1";

/// Parameter vector plus the layer shape it belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaFile {
    pub layer_sizes: Vec<usize>,
    pub theta: Vec<f64>,
}

impl ThetaFile {
    pub fn new(policy: &MlpPolicy, theta: Vec<f64>) -> Result<Self> {
        check_dim("theta length", policy.param_count(), theta.len())?;
        Ok(Self {
            layer_sizes: policy.layer_sizes().to_vec(),
            theta,
        })
    }

    pub fn policy(&self) -> Result<MlpPolicy> {
        MlpPolicy::new(self.layer_sizes.clone())
    }

    /// Binary layout (little endian): magic `POTHETA1`, `u32` layer count,
    /// `u32` per layer size, `u64` parameter count, then the `f64` values.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(THETA_MAGIC)?;
        out.write_all(&(self.layer_sizes.len() as u32).to_le_bytes())?;
        for &n in &self.layer_sizes {
            out.write_all(&(n as u32).to_le_bytes())?;
        }
        out.write_all(&(self.theta.len() as u64).to_le_bytes())?;
        for v in &self.theta {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != THETA_MAGIC {
            return Err(Error::Format("not a binary theta file".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        input.read_exact(&mut b4)?;
        let n_layers = u32::from_le_bytes(b4) as usize;
        let mut layer_sizes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            input.read_exact(&mut b4)?;
            layer_sizes.push(u32::from_le_bytes(b4) as usize);
        }
        input.read_exact(&mut b8)?;
        let p = u64::from_le_bytes(b8) as usize;
        if p != param_count(&layer_sizes) {
            return Err(Error::Format(format!(
                "parameter count {p} does not match layers {layer_sizes:?}"
            )));
        }
        let mut theta = Vec::with_capacity(p);
        for _ in 0..p {
            input.read_exact(&mut b8)?;
            theta.push(f64::from_le_bytes(b8));
        }
        Ok(Self { layer_sizes, theta })
    }

    /// Text layout: `# layers 6 6 6 3`, `# P 105`, then one value per line.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let sizes: Vec<String> = self.layer_sizes.iter().map(ToString::to_string).collect();
        writeln!(out, "# layers {}", sizes.join(" "))?;
        writeln!(out, "# P {}", self.theta.len())?;
        for v in &self.theta {
            writeln!(out, "{v:e}")?;
        }
        Ok(())
    }

    pub fn read_text<R: Read>(input: R) -> Result<Self> {
        let mut layer_sizes = None;
        let mut declared = None;
        let mut theta = Vec::new();
        for line in BufReader::new(input).lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# layers") {
                let sizes = rest
                    .split_whitespace()
                    .map(|s| s.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::Format(format!("bad layer size: {e}")))?;
                layer_sizes = Some(sizes);
            } else if let Some(rest) = line.strip_prefix("# P") {
                declared = Some(
                    rest.trim()
                        .parse::<usize>()
                        .map_err(|e| Error::Format(format!("bad parameter count: {e}")))?,
                );
            } else if !line.starts_with('#') {
                theta.push(
                    line.parse::<f64>()
                        .map_err(|e| Error::Format(format!("bad value {line:?}: {e}")))?,
                );
            }
        }
        let layer_sizes = layer_sizes.ok_or_else(|| Error::Format("missing layers header".into()))?;
        let p = declared.ok_or_else(|| Error::Format("missing P header".into()))?;
        if p != theta.len() || p != param_count(&layer_sizes) {
            return Err(Error::Format(format!(
                "declared {p} parameters, found {}, layers imply {}",
                theta.len(),
                param_count(&layer_sizes)
            )));
        }
        Ok(Self { layer_sizes, theta })
    }

    /// Reads either layout, sniffing the magic bytes.
    pub fn read_any(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(THETA_MAGIC) {
            Self::read_binary(bytes)
        } else {
            Self::read_text(bytes)
        }
    }
}
