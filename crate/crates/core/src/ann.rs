//! Feed-forward classifier trained from scratch: tanh hidden layers, softmax
//! output, mean cross-entropy, mini-batch Adam or SGD with per-epoch
//! learning-rate decay.
//!
//! With only a few frames per device, a free network memorises the
//! channel-driven features instead of resolving the fine device structure.
//! `augment_copies` counters this: every epoch, each training row is also
//! presented that many times with Gaussian jitter whose per-feature standard
//! deviation is the pooled within-class spread of the training set, which
//! stands in for extra frames of the same device.

#[allow(unused_imports)]
use crate::math::{exp, ln, powi, sqrt, tanh};
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::ensure;
use crate::seed;
use crate::{Error, Result};

/// One dense layer. `weights` is row-major `n_out x n_in`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.n_out {
            let row = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            out.push(self.biases[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub init_seed: u64,
}

/// Update rule applied to each mini-batch gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Optimizer {
    /// `w -= lr * g`.
    Sgd,
    /// Adam with beta1 0.9, beta2 0.999, eps 1e-8.
    #[default]
    Adam,
}

/// Hyper-parameters for [`train`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub hidden_sizes: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub seed: u64,
    pub shuffle: bool,
    pub optimizer: Optimizer,
    /// Jittered copies of each training row per epoch; 0 disables.
    pub augment_copies: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_sizes: alloc::vec![50],
            epochs: 200,
            batch_size: 32,
            learning_rate: 0.02,
            lr_decay: 0.99,
            seed: 0,
            shuffle: true,
            optimizer: Optimizer::default(),
            augment_copies: 19,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            !self.hidden_sizes.is_empty() && self.hidden_sizes.iter().all(|h| *h >= 1),
            InvalidConfig,
            "hidden_sizes must be a nonempty list of widths >= 1"
        );
        ensure!(
            self.batch_size >= 1,
            InvalidConfig,
            "batch_size must be >= 1"
        );
        ensure!(
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            InvalidConfig,
            "learning_rate must be > 0"
        );
        ensure!(
            self.lr_decay > 0.0 && self.lr_decay <= 1.0,
            InvalidConfig,
            "lr_decay must lie in (0, 1]"
        );
        Ok(())
    }
}

/// Per-epoch training trace.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    /// Mean cross-entropy over the training set after each epoch.
    pub loss: Vec<f64>,
    /// Accuracy after each epoch on the validation set, or on the training
    /// set when none was given.
    pub val_accuracy: Vec<f64>,
    /// Filled in by callers that have a clock.
    pub wall_time_secs: Option<f64>,
}

/// Row-major labelled feature matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledSet {
    pub n_features: usize,
    pub inputs: Vec<f64>,
    pub labels: Vec<usize>,
}

impl LabeledSet {
    pub fn new(n_features: usize) -> Self {
        LabeledSet {
            n_features,
            inputs: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, x: &[f64], label: usize) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: x.len(),
            });
        }
        self.inputs.extend_from_slice(x);
        self.labels.push(label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.n_features..(i + 1) * self.n_features]
    }
}

/// Anything that maps a feature vector to a class index.
pub trait Classifier {
    fn n_classes(&self) -> usize;
    fn predict(&self, x: &[f64]) -> Result<usize>;
}

/// Glorot-uniform weights, zero biases.
pub fn init_mlp(
    n_in: usize,
    hidden_sizes: &[usize],
    n_classes: usize,
    seed: u64,
) -> Result<MlpModel> {
    ensure!(
        n_in >= 1 && n_classes >= 1,
        InvalidInput,
        "input and class counts must be >= 1"
    );
    ensure!(
        hidden_sizes.iter().all(|h| *h >= 1),
        InvalidInput,
        "hidden widths must be >= 1"
    );
    let mut rng = seed::rng(seed);
    let mut dims = alloc::vec![n_in];
    dims.extend_from_slice(hidden_sizes);
    dims.push(n_classes);
    let layers = dims
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = sqrt(6.0 / (fan_in + fan_out) as f64);
            let weights = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..=limit))
                .collect();
            Layer {
                n_in: fan_in,
                n_out: fan_out,
                weights,
                biases: alloc::vec![0.0; fan_out],
            }
        })
        .collect();
    Ok(MlpModel {
        layers,
        init_seed: seed,
    })
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let exps: Vec<f64> = logits.iter().map(|v| exp(v - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

impl MlpModel {
    pub fn n_inputs(&self) -> usize {
        self.layers.first().map_or(0, |l| l.n_in)
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().map_or(0, |l| l.n_out)
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers[..self.layers.len().saturating_sub(1)]
            .iter()
            .map(|l| l.n_out)
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.layers.is_empty(), InvalidInput, "model has no layers");
        for (i, l) in self.layers.iter().enumerate() {
            ensure!(
                l.weights.len() == l.n_in * l.n_out && l.biases.len() == l.n_out,
                InvalidInput,
                "layer {} has inconsistent parameter counts",
                i
            );
            if i > 0 {
                ensure!(
                    self.layers[i - 1].n_out == l.n_in,
                    InvalidInput,
                    "layer {} input width {} does not match previous output {}",
                    i,
                    l.n_in,
                    self.layers[i - 1].n_out
                );
            }
        }
        ensure!(
            self.layers
                .iter()
                .all(|l| l.weights.iter().chain(&l.biases).all(|p| p.is_finite())),
            InvalidInput,
            "model has non-finite parameters"
        );
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Pre-softmax outputs; `activations[0]` is the input and each later
    /// entry the post-activation output of a layer (logits for the last).
    fn trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.n_out);
            layer.affine(&acts[i], &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = tanh(*v));
            }
            acts.push(out);
        }
        acts
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.trace(x).pop().unwrap_or_default())
    }

    /// Class probabilities.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(x)?))
    }

    /// Cross-entropy `-ln p(label)` computed through log-softmax.
    pub fn loss(&self, x: &[f64], label: usize) -> Result<f64> {
        let logits = self.logits(x)?;
        ensure!(
            label < logits.len(),
            InvalidInput,
            "label {} out of range",
            label
        );
        let max = logits.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        let lse = max + ln(logits.iter().map(|v| exp(v - max)).sum::<f64>());
        Ok(lse - logits[label])
    }

    pub fn mean_loss(&self, data: &LabeledSet) -> Result<f64> {
        let mut total = 0.0;
        for i in 0..data.len() {
            total += self.loss(data.row(i), data.labels[i])?;
        }
        Ok(total / data.len() as f64)
    }

    pub fn accuracy(&self, data: &LabeledSet) -> Result<f64> {
        let mut hits = 0usize;
        for i in 0..data.len() {
            if self.predict(data.row(i))? == data.labels[i] {
                hits += 1;
            }
        }
        Ok(hits as f64 / data.len().max(1) as f64)
    }

    /// Adds `scale * d(loss)/d(params)` for one sample into `grads`, which has
    /// the same layout as the model's parameters.
    fn accumulate_gradient(&self, x: &[f64], label: usize, scale: f64, grads: &mut [Layer]) {
        let acts = self.trace(x);
        let last = self.layers.len() - 1;
        let mut delta = softmax(&acts[last + 1]);
        delta[label] -= 1.0;
        for li in (0..=last).rev() {
            let layer = &self.layers[li];
            let input = &acts[li];
            let g = &mut grads[li];
            for o in 0..layer.n_out {
                let d = delta[o] * scale;
                g.biases[o] += d;
                let row = &mut g.weights[o * layer.n_in..(o + 1) * layer.n_in];
                for (gw, v) in row.iter_mut().zip(input) {
                    *gw += d * v;
                }
            }
            if li > 0 {
                let mut prev = alloc::vec![0.0; layer.n_in];
                for o in 0..layer.n_out {
                    let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += w * delta[o];
                    }
                }
                // tanh'(z) = 1 - tanh(z)^2
                for (p, a) in prev.iter_mut().zip(input) {
                    *p *= 1.0 - a * a;
                }
                delta = prev;
            }
        }
    }

    fn zeros_like(&self) -> Vec<Layer> {
        self.layers
            .iter()
            .map(|l| Layer {
                n_in: l.n_in,
                n_out: l.n_out,
                weights: alloc::vec![0.0; l.weights.len()],
                biases: alloc::vec![0.0; l.biases.len()],
            })
            .collect()
    }

    /// Analytic gradient of the single-sample cross-entropy, flattened layer
    /// by layer (weights then biases).
    pub fn gradient(&self, x: &[f64], label: usize) -> Result<Vec<f64>> {
        self.check_input(x)?;
        ensure!(
            label < self.n_outputs(),
            InvalidInput,
            "label {} out of range",
            label
        );
        let mut grads = self.zeros_like();
        self.accumulate_gradient(x, label, 1.0, &mut grads);
        Ok(grads
            .into_iter()
            .flat_map(|l| l.weights.into_iter().chain(l.biases))
            .collect())
    }

    fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for l in &mut self.layers {
            if index < l.weights.len() {
                return &mut l.weights[index];
            }
            index -= l.weights.len();
            if index < l.biases.len() {
                return &mut l.biases[index];
            }
            index -= l.biases.len();
        }
        panic!("parameter index out of range");
    }
}

impl Classifier for MlpModel {
    fn n_classes(&self) -> usize {
        self.n_outputs()
    }

    /// Argmax of [`MlpModel::forward`], lowest index on ties.
    fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }
}

/// Pooled within-class standard deviation of each feature, the jitter scale
/// used by `augment_copies`. Zero when no class has two rows.
pub fn within_class_spread(data: &LabeledSet) -> Vec<f64> {
    let d = data.n_features;
    let n_classes = data.labels.iter().max().map_or(0, |m| m + 1);
    let mut sums = alloc::vec![0.0; n_classes * d];
    let mut counts = alloc::vec![0usize; n_classes];
    for i in 0..data.len() {
        let c = data.labels[i];
        counts[c] += 1;
        for (s, v) in sums[c * d..(c + 1) * d].iter_mut().zip(data.row(i)) {
            *s += v;
        }
    }
    let mut acc = alloc::vec![0.0; d];
    for i in 0..data.len() {
        let c = data.labels[i];
        for f in 0..d {
            let mean = sums[c * d + f] / counts[c] as f64;
            acc[f] += powi(data.row(i)[f] - mean, 2);
        }
    }
    let present = counts.iter().filter(|c| **c > 0).count();
    let dof = data.len().saturating_sub(present);
    if dof == 0 {
        return alloc::vec![0.0; d];
    }
    acc.iter().map(|a| sqrt(a / dof as f64)).collect()
}

/// Mini-batch training on mean cross-entropy. Epoch `e` uses learning rate
/// `learning_rate * lr_decay^e`; batches are drawn from a permutation seeded by
/// `cfg.seed` when `cfg.shuffle` is set. Each epoch visits every row once
/// clean and `augment_copies` times jittered (see the module docs). The
/// reported loss is always over the clean training rows.
pub fn train(
    mut model: MlpModel,
    data: &LabeledSet,
    validation: Option<&LabeledSet>,
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainReport)> {
    cfg.validate()?;
    model.validate()?;
    ensure!(!data.is_empty(), InvalidInput, "training set is empty");
    if data.n_features != model.n_inputs() {
        return Err(Error::DimensionMismatch {
            expected: model.n_inputs(),
            actual: data.n_features,
        });
    }
    let n_classes = model.n_outputs();
    ensure!(
        data.labels.iter().all(|l| *l < n_classes),
        InvalidInput,
        "labels must lie in [0, {})",
        n_classes
    );
    let mut report = TrainReport::default();
    let copies = cfg.augment_copies;
    let jitter = if copies > 0 {
        within_class_spread(data)
    } else {
        Vec::new()
    };
    let mut order: Vec<usize> = (0..data.len() * (1 + copies)).collect();
    let mut rng = seed::rng(cfg.seed);
    let mut row = alloc::vec![0.0; data.n_features];
    let mut grads = model.zeros_like();
    let mut first = model.zeros_like();
    let mut second = model.zeros_like();
    let mut step = 0i32;
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let lr = cfg.learning_rate * powi(cfg.lr_decay, epoch as i32);
        for batch in order.chunks(cfg.batch_size) {
            for g in grads.iter_mut() {
                g.weights.iter_mut().for_each(|v| *v = 0.0);
                g.biases.iter_mut().for_each(|v| *v = 0.0);
            }
            let scale = 1.0 / batch.len() as f64;
            for &v in batch {
                let i = v % data.len();
                if v < data.len() {
                    model.accumulate_gradient(data.row(i), data.labels[i], scale, &mut grads);
                } else {
                    for ((r, x), s) in row.iter_mut().zip(data.row(i)).zip(&jitter) {
                        let z: f64 = seed::standard_normal(&mut rng);
                        *r = x + s * z;
                    }
                    model.accumulate_gradient(&row, data.labels[i], scale, &mut grads);
                }
            }
            step += 1;
            for (li, layer) in model.layers.iter_mut().enumerate() {
                let g = &grads[li];
                match cfg.optimizer {
                    Optimizer::Sgd => {
                        for (w, d) in layer.weights.iter_mut().zip(&g.weights) {
                            *w -= lr * d;
                        }
                        for (b, d) in layer.biases.iter_mut().zip(&g.biases) {
                            *b -= lr * d;
                        }
                    }
                    Optimizer::Adam => {
                        let (m, v) = (&mut first[li], &mut second[li]);
                        adam_update(
                            &mut layer.weights,
                            &g.weights,
                            &mut m.weights,
                            &mut v.weights,
                            lr,
                            step,
                        );
                        adam_update(
                            &mut layer.biases,
                            &g.biases,
                            &mut m.biases,
                            &mut v.biases,
                            lr,
                            step,
                        );
                    }
                }
            }
        }
        let loss = model.mean_loss(data)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        report.loss.push(loss);
        report
            .val_accuracy
            .push(model.accuracy(validation.unwrap_or(data))?);
    }
    Ok((model, report))
}

fn adam_update(params: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, step: i32) {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;
    let c1 = 1.0 - powi(B1, step);
    let c2 = 1.0 - powi(B2, step);
    for i in 0..params.len() {
        m[i] = B1 * m[i] + (1.0 - B1) * grad[i];
        v[i] = B2 * v[i] + (1.0 - B2) * grad[i] * grad[i];
        params[i] -= lr * (m[i] / c1) / (sqrt(v[i] / c2) + EPS);
    }
}

/// Largest relative discrepancy between the backprop gradient and a central
/// finite difference (step `1e-5`) over every parameter. The relative error
/// of a pair `(a, n)` is `|a - n| / max(|a|, |n|, 1e-6)`; the floor keeps
/// parameters with vanishing gradient from amplifying rounding noise.
pub fn gradient_check(model: &MlpModel, x: &[f64], label: usize) -> Result<f64> {
    const STEP: f64 = 1e-5;
    const FLOOR: f64 = 1e-6;
    let analytic = model.gradient(x, label)?;
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for (i, a) in analytic.iter().enumerate() {
        let original = *probe.param_mut(i);
        *probe.param_mut(i) = original + STEP;
        let up = probe.loss(x, label)?;
        *probe.param_mut(i) = original - STEP;
        let down = probe.loss(x, label)?;
        *probe.param_mut(i) = original;
        let numeric = (up - down) / (2.0 * STEP);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
        worst = worst.max(rel);
    }
    Ok(worst)
}
