//! Forward-mode differentiation with batched tangents.
//!
//! Every quantity that depends on the parameters is carried as a [`Dual`]:
//! a value plus `k` directional derivatives, one per seed column. Model code
//! (dynamics, costs, constraints, the policy network) is written once against
//! the [`Real`] trait and evaluated either on plain `f64` or on `Dual`.
//!
//! A `Dual` with an empty tangent vector is a constant; arithmetic treats the
//! missing tangent as all zeros, so constants never allocate.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Result};

/// Scalar arithmetic needed by differentiable model code.
pub trait Real: Clone + Send + Sync + std::fmt::Debug {
    fn constant(v: f64) -> Self;
    fn value(&self) -> f64;

    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn scale(&self, c: f64) -> Self;
    fn offset(&self, c: f64) -> Self;
    fn tanh(&self) -> Self;

    /// `self += a * b`
    fn mul_acc(&mut self, a: &Self, b: &Self);
    /// `self += c * a`
    fn scale_acc(&mut self, c: f64, a: &Self);

    fn zero() -> Self {
        Self::constant(0.0)
    }

    fn square(&self) -> Self {
        self.mul(self)
    }
}

impl Real for f64 {
    #[inline]
    fn constant(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    #[inline]
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    #[inline]
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    #[inline]
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    #[inline]
    fn offset(&self, c: f64) -> Self {
        self + c
    }
    #[inline]
    fn tanh(&self) -> Self {
        f64::tanh(*self)
    }
    #[inline]
    fn mul_acc(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    #[inline]
    fn scale_acc(&mut self, c: f64, a: &Self) {
        *self += c * a;
    }
}

/// Value with `k` simultaneous directional derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct Dual {
    pub value: f64,
    /// Empty for constants.
    pub tangent: Vec<f64>,
}

impl Dual {
    pub fn new(value: f64, tangent: Vec<f64>) -> Self {
        Self { value, tangent }
    }

    pub fn is_constant(&self) -> bool {
        self.tangent.is_empty()
    }

    /// Tangent component `j`, treating constants as zero.
    pub fn d(&self, j: usize) -> f64 {
        self.tangent.get(j).copied().unwrap_or(0.0)
    }
}

/// `ca * ta + cb * tb` with empty slices standing for zero vectors.
fn lincomb(ca: f64, ta: &[f64], cb: f64, tb: &[f64]) -> Vec<f64> {
    match (ta.is_empty(), tb.is_empty()) {
        (true, true) => Vec::new(),
        (false, true) => ta.iter().map(|a| ca * a).collect(),
        (true, false) => tb.iter().map(|b| cb * b).collect(),
        (false, false) => {
            debug_assert_eq!(ta.len(), tb.len());
            ta.iter().zip(tb).map(|(a, b)| ca * a + cb * b).collect()
        }
    }
}

impl Real for Dual {
    fn constant(v: f64) -> Self {
        Dual {
            value: v,
            tangent: Vec::new(),
        }
    }

    fn value(&self) -> f64 {
        self.value
    }

    fn add(&self, other: &Self) -> Self {
        Dual {
            value: self.value + other.value,
            tangent: lincomb(1.0, &self.tangent, 1.0, &other.tangent),
        }
    }

    fn sub(&self, other: &Self) -> Self {
        Dual {
            value: self.value - other.value,
            tangent: lincomb(1.0, &self.tangent, -1.0, &other.tangent),
        }
    }

    fn mul(&self, other: &Self) -> Self {
        Dual {
            value: self.value * other.value,
            tangent: lincomb(other.value, &self.tangent, self.value, &other.tangent),
        }
    }

    fn scale(&self, c: f64) -> Self {
        Dual {
            value: self.value * c,
            tangent: self.tangent.iter().map(|t| c * t).collect(),
        }
    }

    fn offset(&self, c: f64) -> Self {
        Dual {
            value: self.value + c,
            tangent: self.tangent.clone(),
        }
    }

    fn tanh(&self) -> Self {
        let v = self.value.tanh();
        let slope = 1.0 - v * v;
        Dual {
            value: v,
            tangent: self.tangent.iter().map(|t| slope * t).collect(),
        }
    }

    fn mul_acc(&mut self, a: &Self, b: &Self) {
        self.value += a.value * b.value;
        let k = a.tangent.len().max(b.tangent.len());
        if k == 0 {
            return;
        }
        if self.tangent.is_empty() {
            self.tangent = vec![0.0; k];
        }
        let acc = &mut self.tangent;
        if !a.tangent.is_empty() {
            for (s, ta) in acc.iter_mut().zip(&a.tangent) {
                *s += b.value * ta;
            }
        }
        if !b.tangent.is_empty() {
            for (s, tb) in acc.iter_mut().zip(&b.tangent) {
                *s += a.value * tb;
            }
        }
    }

    fn scale_acc(&mut self, c: f64, a: &Self) {
        self.value += c * a.value;
        if a.tangent.is_empty() {
            return;
        }
        if self.tangent.is_empty() {
            self.tangent = vec![0.0; a.tangent.len()];
        }
        for (s, ta) in self.tangent.iter_mut().zip(&a.tangent) {
            *s += c * ta;
        }
    }
}

// Vector primitives shared by the model code.

/// `W x + b` with `W` stored row-major as `rows x x.len()`.
pub fn affine<R: Real>(w: &[R], x: &[R], b: &[R]) -> Vec<R> {
    let cols = x.len();
    debug_assert_eq!(w.len(), b.len() * cols);
    b.iter()
        .enumerate()
        .map(|(i, bi)| {
            let mut acc = bi.clone();
            for (wij, xj) in w[i * cols..(i + 1) * cols].iter().zip(x) {
                acc.mul_acc(wij, xj);
            }
            acc
        })
        .collect()
}

/// `M x` for a constant matrix.
pub fn mat_vec<R: Real>(m: &DMatrix<f64>, x: &[R]) -> Vec<R> {
    debug_assert_eq!(m.ncols(), x.len());
    (0..m.nrows())
        .map(|i| {
            let mut acc = R::zero();
            for (j, xj) in x.iter().enumerate() {
                let c = m[(i, j)];
                if c != 0.0 {
                    acc.scale_acc(c, xj);
                }
            }
            acc
        })
        .collect()
}

pub fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    let mut acc = R::zero();
    for (ai, bi) in a.iter().zip(b) {
        acc.mul_acc(ai, bi);
    }
    acc
}

/// `xᵀ M y` for a constant matrix.
pub fn bilinear<R: Real>(x: &[R], m: &DMatrix<f64>, y: &[R]) -> R {
    let my = mat_vec(m, y);
    dot(x, &my)
}

pub fn hadamard<R: Real>(a: &[R], b: &[R]) -> Vec<R> {
    a.iter().zip(b).map(|(ai, bi)| ai.mul(bi)).collect()
}

pub fn sum<R: Real>(a: &[R]) -> R {
    let mut acc = R::zero();
    for ai in a {
        acc.scale_acc(1.0, ai);
    }
    acc
}

pub fn norm_squared<R: Real>(a: &[R]) -> R {
    dot(a, a)
}

pub fn tanh_all<R: Real>(a: &[R]) -> Vec<R> {
    a.iter().map(Real::tanh).collect()
}

pub fn add_vec<R: Real>(a: &[R], b: &[R]) -> Vec<R> {
    a.iter().zip(b).map(|(ai, bi)| ai.add(bi)).collect()
}

pub fn constants<R: Real>(v: &[f64]) -> Vec<R> {
    v.iter().map(|&x| R::constant(x)).collect()
}

pub fn values<R: Real>(v: &[R]) -> Vec<f64> {
    v.iter().map(Real::value).collect()
}

/// A vector value together with its `value.len() x k` tangent block.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentBundle {
    pub value: DVector<f64>,
    pub tangents: DMatrix<f64>,
}

impl TangentBundle {
    pub fn from_duals(duals: &[Dual], k: usize) -> Self {
        let value = DVector::from_iterator(duals.len(), duals.iter().map(|d| d.value));
        let mut tangents = DMatrix::zeros(duals.len(), k);
        for (i, d) in duals.iter().enumerate() {
            for (j, t) in d.tangent.iter().enumerate() {
                tangents[(i, j)] = *t;
            }
        }
        Self { value, tangents }
    }

    pub fn to_duals(&self) -> Vec<Dual> {
        (0..self.value.len())
            .map(|i| Dual::new(self.value[i], self.tangents.row(i).iter().copied().collect()))
            .collect()
    }

    pub fn directions(&self) -> usize {
        self.tangents.ncols()
    }
}

/// A map from parameters to a vector output that can be evaluated on any [`Real`].
///
/// Implementing this trait is what makes a function differentiable by this
/// engine; anything that cannot be written against `Real` is rejected at
/// compile time.
pub trait Differentiable: Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval<R: Real>(&self, input: &[R]) -> Result<Vec<R>>;
}

/// Value and directional derivatives `∂f · V` for all columns of `seeds` in one pass.
pub fn jvp<F: Differentiable + ?Sized>(
    f: &F,
    at: &[f64],
    seeds: &DMatrix<f64>,
) -> Result<TangentBundle> {
    check_dim("jvp input", f.input_dim(), at.len())?;
    check_dim("jvp seed rows", at.len(), seeds.nrows())?;
    let k = seeds.ncols();
    let input: Vec<Dual> = at
        .iter()
        .enumerate()
        .map(|(i, &v)| Dual::new(v, seeds.row(i).iter().copied().collect()))
        .collect();
    let out = f.eval(&input)?;
    check_dim("jvp output", f.output_dim(), out.len())?;
    Ok(TangentBundle::from_duals(&out, k))
}

/// Dense Jacobian, i.e. [`jvp`] seeded with the identity.
pub fn full_jacobian<F: Differentiable + ?Sized>(f: &F, at: &[f64]) -> Result<DMatrix<f64>> {
    let n = at.len();
    Ok(jvp(f, at, &DMatrix::identity(n, n))?.tangents)
}

/// Plain evaluation without tangents.
pub fn evaluate<F: Differentiable + ?Sized>(f: &F, at: &[f64]) -> Result<DVector<f64>> {
    check_dim("evaluate input", f.input_dim(), at.len())?;
    let out = f.eval(at)?;
    Ok(DVector::from_vec(out))
}
