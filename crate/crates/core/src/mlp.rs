//! Fully connected PE regressor with hand-written forward and backward passes.
//!
//! Hidden layers use the rectifier, the output layer is linear. Weights of a
//! layer are stored row-major with shape `in_dim x out_dim`, so a layer
//! computes `z = x W + b`. The rectifier subgradient at `z = 0` is 0.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::FEATURE_DIM;
use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_LAYER_DIMS: [usize; 5] = [FEATURE_DIM, 128, 256, 128, 1];

const FORMAT_NAME: &str = "ronet-mlp";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `in_dim x out_dim`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
        }
    }

    fn weight_row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.out_dim..(i + 1) * self.out_dim]
    }

    /// Largest singular value of `W`, by power iteration.
    pub fn spectral_norm(&self) -> f64 {
        let mut v = vec![1.0 / (self.out_dim as f64).sqrt(); self.out_dim];
        let mut sigma = 0.0;
        for _ in 0..200 {
            // u = W v, v' = W^T u
            let u: Vec<f64> = (0..self.in_dim).map(|i| dot(self.weight_row(i), &v)).collect();
            let mut w = vec![0.0; self.out_dim];
            for (i, &ui) in u.iter().enumerate() {
                axpy(ui, self.weight_row(i), &mut w);
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            let next = norm.sqrt();
            v = w.into_iter().map(|x| x / norm).collect();
            if (next - sigma).abs() <= 1e-12 * next {
                return next;
            }
            sigma = next;
        }
        sigma
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub epochs: usize,
    pub final_loss: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    layers: Vec<Layer>,
    pub train_meta: TrainMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 5e-3,
            momentum: 0.9,
            batch_size: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean training loss per epoch.
    pub losses: Vec<f64>,
}

/// Per-parameter gradients, same layout as the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(m: &MlpModel) -> Self {
        Self {
            weights: m.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: m.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    fn clear(&mut self) {
        self.weights.iter_mut().chain(self.biases.iter_mut()).for_each(|g| g.fill(0.0));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Parameters whose central difference straddles a rectifier kink.
    pub skipped_at_kink: usize,
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

impl MlpModel {
    /// He-uniform initialization, zero biases.
    pub fn new(layer_dims: &[usize], seed: u64) -> Result<Self> {
        let mut m = Self::zeros(layer_dims)?;
        let mut rng = seed::rng(seed::derive(seed, "mlp-init"));
        for layer in &mut m.layers {
            let bound = (6.0 / layer.in_dim as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-bound..bound);
            }
        }
        m.train_meta.seed = seed;
        Ok(m)
    }

    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::Validation {
                field: "layer_dims",
                reason: format!("{layer_dims:?} needs at least two positive sizes"),
            });
        }
        if *layer_dims.last().unwrap() != 1 {
            return Err(Error::Validation {
                field: "layer_dims",
                reason: "output layer must have width 1".into(),
            });
        }
        let layers = layer_dims
            .windows(2)
            .map(|w| Layer::zeros(w[0], w[1]))
            .collect();
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            layers,
            train_meta: TrainMeta::default(),
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Forward pass for a batch stored row-major (`batch x input_dim`).
    /// Returns the post-activation output of every layer, input first.
    fn forward_cached(&self, inputs: &[f64], batch: usize) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(inputs.to_vec());
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let x = acts.last().unwrap();
            let mut z = vec![0.0; batch * layer.out_dim];
            for b in 0..batch {
                let out = &mut z[b * layer.out_dim..(b + 1) * layer.out_dim];
                out.copy_from_slice(&layer.biases);
                for (i, &xi) in x[b * layer.in_dim..(b + 1) * layer.in_dim].iter().enumerate() {
                    if xi != 0.0 {
                        axpy(xi, layer.weight_row(i), out);
                    }
                }
            }
            if li != last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mlp input"));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.forward_cached(x, 1).pop().unwrap()[0])
    }

    /// Batch prediction over rows of `input_dim` values.
    pub fn forward_batch(&self, xs: &[[f64; FEATURE_DIM]]) -> Result<Vec<f64>> {
        if self.input_dim() != FEATURE_DIM {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: FEATURE_DIM,
            });
        }
        let flat: Vec<f64> = xs.iter().flatten().copied().collect();
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mlp input"));
        }
        Ok(self.forward_cached(&flat, xs.len()).pop().unwrap())
    }

    /// Accumulates the gradient of the batch-mean squared error into `grads`
    /// and returns the batch-mean loss.
    fn accumulate_gradients(
        &self,
        inputs: &[f64],
        targets: &[f64],
        grads: &mut Gradients,
    ) -> f64 {
        let batch = targets.len();
        let acts = self.forward_cached(inputs, batch);
        let pred = acts.last().unwrap();
        let mut loss = 0.0;
        let mut delta: Vec<f64> = pred
            .iter()
            .zip(targets)
            .map(|(p, t)| {
                let e = p - t;
                loss += e * e;
                2.0 * e / batch as f64
            })
            .collect();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let x = &acts[li];
            let (gw, gb) = (&mut grads.weights[li], &mut grads.biases[li]);
            for b in 0..batch {
                let d = &delta[b * layer.out_dim..(b + 1) * layer.out_dim];
                axpy(1.0, d, gb);
                for (i, &xi) in x[b * layer.in_dim..(b + 1) * layer.in_dim].iter().enumerate() {
                    if xi != 0.0 {
                        axpy(xi, d, &mut gw[i * layer.out_dim..(i + 1) * layer.out_dim]);
                    }
                }
            }
            if li == 0 {
                break;
            }
            // x holds rectified activations: x > 0 exactly where the unit is active
            let mut prev = vec![0.0; batch * layer.in_dim];
            for b in 0..batch {
                let d = &delta[b * layer.out_dim..(b + 1) * layer.out_dim];
                for i in 0..layer.in_dim {
                    if x[b * layer.in_dim + i] > 0.0 {
                        prev[b * layer.in_dim + i] = dot(layer.weight_row(i), d);
                    }
                }
            }
            delta = prev;
        }
        loss / batch as f64
    }

    /// Gradient of the batch-mean squared error.
    pub fn gradients(&self, xs: &[[f64; FEATURE_DIM]], targets: &[f64]) -> (f64, Gradients) {
        let flat: Vec<f64> = xs.iter().flatten().copied().collect();
        let mut g = Gradients::zeros_like(self);
        let loss = self.accumulate_gradients(&flat, targets, &mut g);
        (loss, g)
    }

    /// Mean squared error over a data set.
    pub fn mse(&self, xs: &[[f64; FEATURE_DIM]], targets: &[f64]) -> Result<f64> {
        let pred = self.forward_batch(xs)?;
        Ok(pred
            .iter()
            .zip(targets)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / targets.len().max(1) as f64)
    }

    /// Minibatch SGD with momentum on mean squared error.
    ///
    /// `on_epoch(epoch, model, mean_loss)` runs after every epoch (1-based).
    /// A non-finite loss restores the weights from the end of the previous
    /// epoch and returns [`Error::Diverged`].
    pub fn train(
        &mut self,
        xs: &[[f64; FEATURE_DIM]],
        targets: &[f64],
        cfg: &TrainConfig,
        mut on_epoch: impl FnMut(usize, &MlpModel, f64) -> Result<()>,
    ) -> Result<TrainReport> {
        if xs.is_empty() || xs.len() != targets.len() {
            return Err(Error::Validation {
                field: "training data",
                reason: format!("{} inputs / {} targets", xs.len(), targets.len()),
            });
        }
        if cfg.batch_size == 0 {
            return Err(Error::Validation {
                field: "batch_size",
                reason: "must be positive".into(),
            });
        }
        if xs.iter().flatten().chain(targets).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training data"));
        }
        let mut rng = seed::rng(seed::derive(cfg.seed, "mlp-shuffle"));
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let mut grads = Gradients::zeros_like(self);
        let mut velocity = Gradients::zeros_like(self);
        let mut losses = Vec::with_capacity(cfg.epochs);
        let mut batch_x = Vec::with_capacity(cfg.batch_size * FEATURE_DIM);
        let mut batch_y = Vec::with_capacity(cfg.batch_size);
        let start_epoch = self.train_meta.epochs;

        for epoch in 1..=cfg.epochs {
            let snapshot = self.layers.clone();
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for chunk in order.chunks(cfg.batch_size) {
                batch_x.clear();
                batch_y.clear();
                for &i in chunk {
                    batch_x.extend_from_slice(&xs[i]);
                    batch_y.push(targets[i]);
                }
                grads.clear();
                let loss = self.accumulate_gradients(&batch_x, &batch_y, &mut grads);
                if !loss.is_finite() {
                    self.layers = snapshot;
                    return Err(Error::Diverged { epoch, loss });
                }
                total += loss * chunk.len() as f64;
                self.apply_momentum_step(&grads, &mut velocity, cfg);
            }
            let mean = total / xs.len() as f64;
            if !mean.is_finite() || self.has_non_finite_params() {
                self.layers = snapshot;
                return Err(Error::Diverged { epoch, loss: mean });
            }
            losses.push(mean);
            self.train_meta.epochs = start_epoch + epoch;
            self.train_meta.final_loss = Some(mean);
            self.train_meta.seed = cfg.seed;
            on_epoch(epoch, self, mean)?;
        }
        Ok(TrainReport { losses })
    }

    fn apply_momentum_step(&mut self, grads: &Gradients, velocity: &mut Gradients, cfg: &TrainConfig) {
        let step = |params: &mut [f64], g: &[f64], v: &mut [f64]| {
            for ((p, gi), vi) in params.iter_mut().zip(g).zip(v.iter_mut()) {
                *vi = cfg.momentum * *vi + gi;
                *p -= cfg.learning_rate * *vi;
            }
        };
        for (li, layer) in self.layers.iter_mut().enumerate() {
            step(&mut layer.weights, &grads.weights[li], &mut velocity.weights[li]);
            step(&mut layer.biases, &grads.biases[li], &mut velocity.biases[li]);
        }
    }

    fn has_non_finite_params(&self) -> bool {
        self.layers
            .iter()
            .any(|l| l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()))
    }

    /// Upper bound on the Lipschitz constant: product of layer spectral norms.
    pub fn lipschitz_bound(&self) -> f64 {
        self.layers.iter().map(Layer::spectral_norm).product()
    }

    /// Compares backpropagated gradients of `(f(x) - target)^2` against
    /// central finite differences (`h = 1e-5`) over every parameter.
    pub fn gradient_check(&self, x: &[f64], target: f64) -> Result<GradCheck> {
        self.check_input(x)?;
        let mut g = Gradients::zeros_like(self);
        self.accumulate_gradients(x, &[target], &mut g);
        Ok(self.gradient_check_against(x, target, &g))
    }

    /// Finite-difference check of caller-supplied analytic gradients.
    pub fn gradient_check_against(&self, x: &[f64], target: f64, analytic: &Gradients) -> GradCheck {
        const H: f64 = 1e-5;
        // relative error denominator floor; FD round-off is ~1e-11 absolute
        const FLOOR: f64 = 1e-6;
        let acts = self.forward_cached(x, 1);
        // pre-activations are needed to detect kink crossings
        let pre: Vec<Vec<f64>> = self
            .layers
            .iter()
            .enumerate()
            .map(|(li, layer)| {
                let mut z = layer.biases.clone();
                for (i, &xi) in acts[li].iter().enumerate() {
                    axpy(xi, layer.weight_row(i), &mut z);
                }
                z
            })
            .collect();
        let pred = acts.last().unwrap()[0];

        let mut report = GradCheck {
            max_relative_error: 0.0,
            checked: 0,
            skipped_at_kink: 0,
        };
        let mut consider = |numeric: Option<f64>, analytic: f64| match numeric {
            None => report.skipped_at_kink += 1,
            Some(n) => {
                let err = (n - analytic).abs() / n.abs().max(analytic.abs()).max(FLOOR);
                report.max_relative_error = report.max_relative_error.max(err);
                report.checked += 1;
            }
        };
        for li in 0..self.layers.len() {
            let layer = &self.layers[li];
            for i in 0..layer.in_dim {
                for o in 0..layer.out_dim {
                    let xi = acts[li][i];
                    let num = self.fd_unit(&pre, &acts, li, o, H * xi, pred, target, H);
                    consider(num, analytic.weights[li][i * layer.out_dim + o]);
                }
            }
            for o in 0..layer.out_dim {
                let num = self.fd_unit(&pre, &acts, li, o, H, pred, target, H);
                consider(num, analytic.biases[li][o]);
            }
        }
        report
    }

    /// Central difference of the loss when pre-activation `z[layer][unit]`
    /// moves by `±dz`. Returns `None` if either side crosses a rectifier kink.
    #[allow(clippy::too_many_arguments)]
    fn fd_unit(
        &self,
        pre: &[Vec<f64>],
        acts: &[Vec<f64>],
        layer: usize,
        unit: usize,
        dz: f64,
        pred: f64,
        target: f64,
        h: f64,
    ) -> Option<f64> {
        let plus = self.propagate_delta(pre, acts, layer, unit, dz)?;
        let minus = self.propagate_delta(pre, acts, layer, unit, -dz)?;
        let lp = (pred + plus - target).powi(2);
        let lm = (pred + minus - target).powi(2);
        Some((lp - lm) / (2.0 * h))
    }

    /// Output change caused by shifting one pre-activation, propagated
    /// through the remaining layers as sparse deltas.
    fn propagate_delta(
        &self,
        pre: &[Vec<f64>],
        acts: &[Vec<f64>],
        layer: usize,
        unit: usize,
        dz: f64,
    ) -> Option<f64> {
        let last = self.layers.len() - 1;
        let mut dz_vec = vec![0.0; self.layers[layer].out_dim];
        dz_vec[unit] = dz;
        let mut li = layer;
        loop {
            if li == last {
                return Some(dz_vec[0]);
            }
            // rectify: delta of activation
            let mut da = vec![0.0; dz_vec.len()];
            for (j, &d) in dz_vec.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let z0 = pre[li][j];
                let z1 = z0 + d;
                if z0 == 0.0 || (z0 > 0.0) != (z1 > 0.0) {
                    return None;
                }
                da[j] = z1.max(0.0) - acts[li + 1][j];
            }
            let next = &self.layers[li + 1];
            let mut nz = vec![0.0; next.out_dim];
            for (j, &d) in da.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, next.weight_row(j), &mut nz);
                }
            }
            dz_vec = nz;
            li += 1;
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Envelope<'a> {
            format: &'a str,
            version: u32,
            model: &'a MlpModel,
        }
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        let mut w = BufWriter::new(fs::File::create(path)?);
        serde_json::to_writer(
            &mut w,
            &Envelope {
                format: FORMAT_NAME,
                version: FORMAT_VERSION,
                model: self,
            },
        )?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Envelope {
            format: String,
            version: u32,
            model: MlpModel,
        }
        let env: Envelope = serde_json::from_str(&fs::read_to_string(path)?)?;
        if env.format != FORMAT_NAME {
            return Err(Error::Config(format!(
                "{}: not a model file (format {:?})",
                path.display(),
                env.format
            )));
        }
        if env.version != FORMAT_VERSION {
            return Err(Error::SchemaVersion {
                found: env.version,
                expected: FORMAT_VERSION,
            });
        }
        env.model.validate_shapes()?;
        Ok(env.model)
    }

    fn validate_shapes(&self) -> Result<()> {
        if self.layers.len() + 1 != self.layer_dims.len() {
            return Err(Error::Config("layer count does not match layer_dims".into()));
        }
        for (l, w) in self.layers.iter().zip(self.layer_dims.windows(2)) {
            if l.in_dim != w[0]
                || l.out_dim != w[1]
                || l.weights.len() != w[0] * w[1]
                || l.biases.len() != w[1]
            {
                return Err(Error::Config(format!(
                    "layer shape {}x{} inconsistent with layer_dims {:?}",
                    l.in_dim, l.out_dim, self.layer_dims
                )));
            }
        }
        Ok(())
    }
}
