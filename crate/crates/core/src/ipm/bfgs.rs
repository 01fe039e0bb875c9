//! Powell-damped BFGS approximation of the Lagrangian Hessian.

use nalgebra::{DMatrix, DVector};

/// Smallest accepted eigenvalue ratio of an updated matrix.
const MIN_RCOND: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct DampedBfgs {
    matrix: DMatrix<f64>,
    updates: usize,
    initial_scale: f64,
}

impl DampedBfgs {
    pub fn new(n: usize) -> Self {
        Self::scaled(n, 1.0)
    }

    /// Starts from `scale · I`.
    pub fn scaled(n: usize, scale: f64) -> Self {
        Self {
            matrix: DMatrix::identity(n, n) * scale,
            updates: 0,
            initial_scale: scale,
        }
    }

    /// Back to the initial matrix; the next accepted pair rescales it.
    pub fn reset(&mut self) {
        let n = self.matrix.nrows();
        self.matrix = DMatrix::identity(n, n) * self.initial_scale;
        self.updates = 0;
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    /// Update with step `s` and gradient change `y`. Returns `false` when the
    /// pair is skipped (tiny, non-finite or numerically degenerate), in which
    /// case the matrix is unchanged.
    pub fn update(&mut self, s: &DVector<f64>, y: &DVector<f64>) -> bool {
        let ss = s.norm_squared();
        if !(ss > 1e-300) || !s.iter().chain(y.iter()).all(|v| v.is_finite()) {
            return false;
        }
        let sy = s.dot(y);
        if self.updates == 0 && sy > 0.0 {
            // Shanno-Phua initial scaling
            let scale = y.norm_squared() / sy;
            if scale.is_finite() && scale > 0.0 {
                self.matrix = DMatrix::identity(s.len(), s.len()) * scale;
            }
        }
        let bs = &self.matrix * s;
        let sbs = s.dot(&bs);
        if !(sbs > 0.0) {
            return false;
        }
        let r = if sy >= 0.2 * sbs {
            y.clone()
        } else {
            let phi = 0.8 * sbs / (sbs - sy);
            y * phi + &bs * (1.0 - phi)
        };
        let sr = s.dot(&r);
        // reject pairs whose curvature is lost in cancellation
        if !(sr > 1e-8 * s.norm() * r.norm()) || !(sbs > 1e-8 * s.norm() * bs.norm()) {
            return false;
        }
        let mut next = &self.matrix - &bs * bs.transpose() / sbs + &r * r.transpose() / sr;
        let n = next.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (next[(i, j)] + next[(j, i)]);
                next[(i, j)] = v;
                next[(j, i)] = v;
            }
        }
        // Cholesky alone admits pivots at rounding level
        let eig = next.clone().symmetric_eigenvalues();
        if !(eig.min() > MIN_RCOND * eig.max()) {
            return false;
        }
        self.matrix = next;
        self.updates += 1;
        true
    }
}
