//! Exact Gaussian-process regression with the RBF kernel
//! `k(v, v') = exp(-(l / 2) * ||v - v'||^2)`.
//!
//! Note that `l` multiplies the squared distance: larger `l` means a
//! shorter correlation length, the reverse of the usual lengthscale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, squared_distance, Cholesky, Matrix};

pub const DEFAULT_LENGTHSCALE: f64 = 1.0;
pub const DEFAULT_NOISE: f64 = 1e-4;

pub fn rbf_kernel(v: &[f64], w: &[f64], lengthscale: f64) -> f64 {
    debug_assert_eq!(v.len(), w.len());
    (-0.5 * lengthscale * squared_distance(v, w)).exp()
}

/// Fitted posterior state.
#[derive(Debug, Clone)]
pub struct GprModel {
    dim: usize,
    lengthscale: f64,
    noise: f64,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    /// Factor of `K + noise * I`; `None` for the prior-only model.
    chol: Option<Cholesky>,
    /// `(K + noise * I)^-1 y`
    alpha: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub mean: f64,
    pub variance: f64,
}

impl Posterior {
    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }
}

impl GprModel {
    /// Fits the posterior on `inputs` (each of length `dim`) and `targets`.
    pub fn fit(
        dim: usize,
        inputs: Vec<Vec<f64>>,
        targets: Vec<f64>,
        lengthscale: f64,
        noise: f64,
    ) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                got: targets.len(),
            });
        }
        if let Some(bad) = inputs.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        if !(noise >= 0.0) || !(lengthscale > 0.0) {
            return Err(Error::Validation {
                field: "gpr",
                reason: format!("lengthscale {lengthscale} / noise {noise} invalid"),
            });
        }
        if targets.iter().chain(inputs.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("gpr training data"));
        }
        let n = inputs.len();
        if n == 0 {
            return Ok(Self {
                dim,
                lengthscale,
                noise,
                inputs,
                targets,
                chol: None,
                alpha: Vec::new(),
            });
        }
        let k = Matrix::from_fn(n, n, |i, j| {
            let kij = rbf_kernel(&inputs[i], &inputs[j], lengthscale);
            if i == j {
                kij + noise
            } else {
                kij
            }
        });
        let chol = Cholesky::new(&k)?;
        let alpha = chol.solve(&targets);
        Ok(Self {
            dim,
            lengthscale,
            noise,
            inputs,
            targets,
            chol: Some(chol),
            alpha,
        })
    }

    /// Prior-only model.
    pub fn empty(dim: usize, lengthscale: f64, noise: f64) -> Self {
        Self::fit(dim, Vec::new(), Vec::new(), lengthscale, noise)
            .expect("empty fit cannot fail")
    }

    /// Refits with one extra observation (full re-factorization).
    pub fn with_point(&self, v: Vec<f64>, y: f64) -> Result<Self> {
        let mut inputs = self.inputs.clone();
        let mut targets = self.targets.clone();
        inputs.push(v);
        targets.push(y);
        Self::fit(self.dim, inputs, targets, self.lengthscale, self.noise)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn factor(&self) -> Option<&Cholesky> {
        self.chol.as_ref()
    }

    pub fn kernel(&self, v: &[f64], w: &[f64]) -> f64 {
        rbf_kernel(v, w, self.lengthscale)
    }

    /// Posterior mean and variance at `query`.
    pub fn posterior(&self, query: &[f64]) -> Posterior {
        debug_assert_eq!(query.len(), self.dim);
        let prior = self.kernel(query, query);
        let Some(chol) = &self.chol else {
            return Posterior {
                mean: 0.0,
                variance: prior,
            };
        };
        let kv: Vec<f64> = self.inputs.iter().map(|x| self.kernel(query, x)).collect();
        let mean = dot(&kv, &self.alpha);
        let w = chol.solve_lower(&kv);
        let variance = (prior - dot(&w, &w)).max(0.0);
        Posterior { mean, variance }
    }

    pub fn predict_mean(&self, query: &[f64]) -> f64 {
        if self.chol.is_none() {
            return 0.0;
        }
        self.inputs
            .iter()
            .zip(&self.alpha)
            .map(|(x, a)| self.kernel(query, x) * a)
            .sum()
    }
}
