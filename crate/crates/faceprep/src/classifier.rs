//! Desk-scale softmax classifier over pooled image features.
//!
//! The feature extractor average-pools each tensor channel to 32×32 and
//! flattens, standing in for the high-level embedding of a large
//! pretrained network: the harness measures *relative* preprocessor
//! effects, not absolute accuracies. Training is plain multinomial
//! logistic regression: mini-batch Adam with a step-decay learning-rate
//! schedule (0.003 decayed every 29 iterations, floored at 0.0001), the
//! best-on-validation checkpoint retained, Top-1 evaluation.
//!
//! All arithmetic is `f64` internally so the analytic gradient can be
//! checked against central finite differences; parameters serialize to
//! `f32` tensors in the `FPP1` container.

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::seeded_shuffle;
use crate::raster::{RasterError, TensorF32};

/// Output grid of the average-pool feature proxy (per channel).
pub const FEATURE_POOL: usize = 32;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("dimension mismatch: model expects {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty {0} split")]
    EmptySplit(&'static str),
    #[error("label {label} outside the {classes}-class range")]
    BadLabel { label: usize, classes: usize },
    #[error("model i/o error: {0}")]
    Io(#[from] RasterError),
    #[error("model header error: {0}")]
    Header(String),
}

/// Average-pool each channel to a 32×32 grid and flatten channel-major.
/// A 3-channel input yields `3 · 32 · 32 = 3072` features.
pub fn extract_features(t: &TensorF32) -> Vec<f32> {
    let (h, w) = (t.height() as usize, t.width() as usize);
    let out = FEATURE_POOL;
    let mut features = Vec::with_capacity(t.channels() as usize * out * out);
    for c in 0..t.channels() {
        let plane = t.plane(c);
        for oy in 0..out {
            let y0 = oy * h / out;
            let y1 = ((oy + 1) * h).div_ceil(out).max(y0 + 1);
            for ox in 0..out {
                let x0 = ox * w / out;
                let x1 = ((ox + 1) * w).div_ceil(out).max(x0 + 1);
                let mut sum = 0f64;
                for y in y0..y1 {
                    for x in x0..x1 {
                        sum += plane[y * w + x] as f64;
                    }
                }
                features.push((sum / ((y1 - y0) * (x1 - x0)) as f64) as f32);
            }
        }
    }
    features
}

/// A labeled feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f32>,
    pub label: usize,
}

/// Features grouped by split, ready for training.
#[derive(Debug, Clone, Default)]
pub struct FeatureSet {
    pub dim: usize,
    pub num_classes: usize,
    pub train: Vec<FeatureVector>,
    pub val: Vec<FeatureVector>,
    pub test: Vec<FeatureVector>,
}

/// Multinomial logistic regression parameters: a `K×D` weight matrix and
/// `K` biases, stored as one flat `f64` vector (weights first).
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel {
    num_classes: usize,
    dim: usize,
    params: Vec<f64>,
}

impl SoftmaxModel {
    pub fn zeros(num_classes: usize, dim: usize) -> SoftmaxModel {
        SoftmaxModel { num_classes, dim, params: vec![0.0; num_classes * dim + num_classes] }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.params[..self.num_classes * self.dim]
    }

    pub fn biases(&self) -> &[f64] {
        &self.params[self.num_classes * self.dim..]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn logits(&self, x: &[f32]) -> Vec<f64> {
        let d = self.dim;
        let mut logits = self.biases().to_vec();
        for (j, logit) in logits.iter_mut().enumerate() {
            let row = &self.params[j * d..(j + 1) * d];
            let mut acc = 0f64;
            for i in 0..d {
                acc += row[i] * x[i] as f64;
            }
            *logit += acc;
        }
        logits
    }

    /// Class probabilities `softmax(Wx + b)`, computed with max
    /// subtraction so huge logits cannot overflow.
    pub fn forward(&self, x: &[f32]) -> Result<Vec<f64>, ClassifierError> {
        if x.len() != self.dim {
            return Err(ClassifierError::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        let mut logits = self.logits(x);
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for l in logits.iter_mut() {
            *l = (*l - max).exp();
            sum += *l;
        }
        for l in logits.iter_mut() {
            *l /= sum;
        }
        Ok(logits)
    }

    /// Predicted class: argmax probability, ties broken toward the lowest
    /// class index.
    pub fn predict(&self, x: &[f32]) -> Result<usize, ClassifierError> {
        if x.len() != self.dim {
            return Err(ClassifierError::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        let logits = self.logits(x);
        let mut best = 0;
        for (j, &l) in logits.iter().enumerate() {
            if l > logits[best] {
                best = j;
            }
        }
        Ok(best)
    }

    /// Write `model.toml` (header), `weights.fpp1`, and `biases.fpp1`
    /// into a directory.
    pub fn save(&self, dir: &Path, cfg: &TrainConfig) -> Result<(), ClassifierError> {
        fs::create_dir_all(dir).map_err(RasterError::from)?;
        let header = ModelHeader {
            version: 1,
            num_classes: self.num_classes,
            dim: self.dim,
            train: cfg.clone(),
        };
        let text = toml::to_string(&header).expect("header serializes");
        fs::write(dir.join("model.toml"), text).map_err(RasterError::from)?;
        let weights: Vec<f32> = self.weights().iter().map(|&v| v as f32).collect();
        TensorF32::new(1, self.num_classes as u32, self.dim as u32, weights)?
            .write_file(&dir.join("weights.fpp1"))?;
        let biases: Vec<f32> = self.biases().iter().map(|&v| v as f32).collect();
        TensorF32::new(1, 1, self.num_classes as u32, biases)?
            .write_file(&dir.join("biases.fpp1"))?;
        Ok(())
    }

    /// Load a model saved by [`SoftmaxModel::save`]. Parameters come back
    /// at `f32` precision.
    pub fn load(dir: &Path) -> Result<(SoftmaxModel, TrainConfig), ClassifierError> {
        let text = fs::read_to_string(dir.join("model.toml")).map_err(RasterError::from)?;
        let header: ModelHeader =
            toml::from_str(&text).map_err(|e| ClassifierError::Header(e.to_string()))?;
        if header.version != 1 {
            return Err(ClassifierError::Header(format!(
                "unsupported model version {}",
                header.version
            )));
        }
        let weights = TensorF32::read_file(&dir.join("weights.fpp1"))?;
        let biases = TensorF32::read_file(&dir.join("biases.fpp1"))?;
        if weights.data().len() != header.num_classes * header.dim
            || biases.data().len() != header.num_classes
        {
            return Err(ClassifierError::Header("tensor shapes disagree with header".into()));
        }
        let mut params: Vec<f64> = weights.data().iter().map(|&v| v as f64).collect();
        params.extend(biases.data().iter().map(|&v| v as f64));
        Ok((
            SoftmaxModel { num_classes: header.num_classes, dim: header.dim, params },
            header.train,
        ))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelHeader {
    version: u32,
    num_classes: usize,
    dim: usize,
    train: TrainConfig,
}

/// Adam hyperparameters and the step-decay learning-rate schedule
/// `lr_t = max(lr_floor, lr0 · γ^⌊t/decay_step⌋)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr0: f64,
    pub lr_floor: f64,
    pub decay_step: u64,
    pub decay_factor: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr0: 0.003,
            lr_floor: 0.0001,
            decay_step: 29,
            decay_factor: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Learning rate at iteration `t` (1-based): monotone non-increasing,
/// never below the floor.
pub fn learning_rate(cfg: &AdamConfig, t: u64) -> f64 {
    let k = (t / cfg.decay_step) as i32;
    (cfg.lr0 * cfg.decay_factor.powi(k)).max(cfg.lr_floor)
}

/// First/second moment estimates plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> AdamState {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update with bias correction; advances the step counter and
/// applies the scheduled learning rate.
pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut AdamState, cfg: &AdamConfig) {
    assert_eq!(params.len(), grad.len());
    assert_eq!(params.len(), state.m.len());
    state.t += 1;
    let t = state.t;
    let lr = learning_rate(cfg, t);
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..params.len() {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Mean cross-entropy over a batch and its analytic gradient
/// `(p − onehot) xᵀ`, flattened in model parameter layout.
pub fn loss_and_grad(
    model: &SoftmaxModel,
    batch: &[FeatureVector],
) -> Result<(f64, Vec<f64>), ClassifierError> {
    if batch.is_empty() {
        return Err(ClassifierError::EmptyBatch);
    }
    let (k, d) = (model.num_classes, model.dim);
    let mut grad = vec![0.0; k * d + k];
    let mut loss = 0.0;
    for sample in batch {
        if sample.label >= k {
            return Err(ClassifierError::BadLabel { label: sample.label, classes: k });
        }
        let probs = model.forward(&sample.values)?;
        loss += -(probs[sample.label].max(f64::MIN_POSITIVE)).ln();
        for j in 0..k {
            let delta = probs[j] - (j == sample.label) as u64 as f64;
            let row = &mut grad[j * d..(j + 1) * d];
            for i in 0..d {
                row[i] += delta * sample.values[i] as f64;
            }
            grad[k * d + j] += delta;
        }
    }
    let scale = 1.0 / batch.len() as f64;
    loss *= scale;
    for g in &mut grad {
        *g *= scale;
    }
    Ok((loss, grad))
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { adam: AdamConfig::default(), epochs: 30, batch_size: 32, seed: 42 }
    }
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// The best-on-validation checkpoint.
    pub model: SoftmaxModel,
    pub best_val_top1: f64,
    pub final_train_loss: f64,
    pub iterations: u64,
}

fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Mini-batch training over the train split, keeping the checkpoint with
/// the best validation Top-1. Fully deterministic for a fixed seed.
pub fn train(data: &FeatureSet, cfg: &TrainConfig) -> Result<TrainOutcome, ClassifierError> {
    if data.train.is_empty() {
        return Err(ClassifierError::EmptySplit("train"));
    }
    if data.val.is_empty() {
        return Err(ClassifierError::EmptySplit("val"));
    }
    let (k, d) = (data.num_classes, data.dim);
    let mut model = SoftmaxModel::zeros(k, d);
    // biases stay zero; weights start at seeded uniform(-0.01, 0.01)
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for w in model.params_mut().iter_mut().take(k * d) {
        let unit = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        *w = unit * 0.02 - 0.01;
    }

    let mut state = AdamState::new(k * d + k);
    let mut best = model.clone();
    let mut best_val = -1.0;
    let mut last_loss = f64::NAN;
    let mut indices: Vec<usize> = (0..data.train.len()).collect();
    let mut batch: Vec<FeatureVector> = Vec::with_capacity(cfg.batch_size.max(1));
    for epoch in 0..cfg.epochs {
        seeded_shuffle(&mut indices, mix_seed(cfg.seed, epoch as u64 + 1));
        for chunk in indices.chunks(cfg.batch_size.max(1)) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data.train[i].clone()));
            let (loss, grad) = loss_and_grad(&model, &batch)?;
            adam_step(model.params_mut(), &grad, &mut state, &cfg.adam);
            last_loss = loss;
        }
        let val_top1 = evaluate(&model, &data.val)?;
        if val_top1 > best_val {
            best_val = val_top1;
            best = model.clone();
        }
    }
    Ok(TrainOutcome {
        model: best,
        best_val_top1: best_val,
        final_train_loss: last_loss,
        iterations: state.t,
    })
}

/// Top-1 accuracy of a model on a split, in percent.
pub fn evaluate(model: &SoftmaxModel, samples: &[FeatureVector]) -> Result<f64, ClassifierError> {
    if samples.is_empty() {
        return Err(ClassifierError::EmptySplit("requested"));
    }
    let mut correct = 0usize;
    for s in samples {
        if model.predict(&s.values)? == s.label {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(rng: &mut ChaCha8Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Two well-separated Gaussian-ish blobs in D dimensions.
    fn blobs(n_per: usize, dim: usize, seed: u64) -> Vec<FeatureVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for label in 0..2usize {
            let center = if label == 0 { -1.0 } else { 1.0 };
            for _ in 0..n_per {
                let values = (0..dim)
                    .map(|_| (center + (unit(&mut rng) - 0.5) * 0.2) as f32)
                    .collect();
                out.push(FeatureVector { values, label });
            }
        }
        out
    }

    #[test]
    fn pooled_features_shape_and_constant() {
        let t = TensorF32::new(3, 299, 299, vec![0.5; 3 * 299 * 299]).unwrap();
        let f = extract_features(&t);
        assert_eq!(f.len(), 3072);
        assert!(f.iter().all(|&v| (v - 0.5).abs() < 1e-6));
    }

    #[test]
    fn pooled_features_block_means() {
        // 1x64x64 tensor with 32x32 blocks of distinct values: pooling with
        // a 2x2 window must return each block's value exactly
        let mut data = vec![0f32; 64 * 64];
        for y in 0..64 {
            for x in 0..64 {
                data[y * 64 + x] = ((y / 2) * 32 + (x / 2)) as f32 / 1024.0;
            }
        }
        let t = TensorF32::new(1, 64, 64, data).unwrap();
        let f = extract_features(&t);
        for (i, &v) in f.iter().enumerate() {
            assert!((v - i as f32 / 1024.0).abs() < 1e-6);
        }
    }

    #[test]
    fn pooled_features_small_input() {
        // inputs smaller than the pool grid are upsampled by repetition
        let t = TensorF32::new(1, 2, 2, vec![0.0, 0.25, 0.5, 0.75]).unwrap();
        let f = extract_features(&t);
        assert_eq!(f.len(), 1024);
        assert_eq!(f[0], 0.0);
        assert_eq!(f[31], 0.25);
        assert_eq!(f[1023], 0.75);
    }

    #[test]
    fn forward_uniform_for_zero_model() {
        let m = SoftmaxModel::zeros(4, 3);
        let p = m.forward(&[0.3, -0.7, 2.0]).unwrap();
        for v in &p {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_is_stable_for_huge_logits() {
        let mut m = SoftmaxModel::zeros(2, 1);
        m.params_mut()[0] = 1000.0; // w[0][0]
        let p = m.forward(&[1.0]).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert!(p[0] > 0.999999);
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn forward_shift_invariance_of_argmax() {
        let mut m = SoftmaxModel::zeros(3, 2);
        for (i, w) in [0.5, -0.2, 0.1, 0.9, -0.7, 0.3].iter().enumerate() {
            m.params_mut()[i] = *w;
        }
        let x = [0.4f32, -1.2];
        let before = m.predict(&x).unwrap();
        let k = m.num_classes();
        for j in 0..k {
            m.params_mut()[3 * 2 + j] += 5.0; // add a constant to every bias
        }
        assert_eq!(m.predict(&x).unwrap(), before);
    }

    #[test]
    fn forward_matches_independent_softmax() {
        // oracle: probabilities via the log-sum-exp identity, logits
        // accumulated in reverse order
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let k = 2 + (rng.next_u64() % 5) as usize;
            let d = 1 + (rng.next_u64() % 8) as usize;
            let mut m = SoftmaxModel::zeros(k, d);
            for p in m.params_mut() {
                *p = unit(&mut rng) * 6.0 - 3.0;
            }
            let x: Vec<f32> = (0..d).map(|_| (unit(&mut rng) * 2.0 - 1.0) as f32).collect();
            let probs = m.forward(&x).unwrap();

            let logits: Vec<f64> = (0..k)
                .map(|j| {
                    let mut acc = m.biases()[j];
                    for i in (0..d).rev() {
                        acc += m.weights()[j * d + i] * x[i] as f64;
                    }
                    acc
                })
                .collect();
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let log_z = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
            for j in 0..k {
                let expected = (logits[j] - log_z).exp();
                assert!((probs[j] - expected).abs() <= 1e-9, "{} vs {expected}", probs[j]);
            }
            let sum: f64 = probs.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
            assert!(probs.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn loss_vanishes_for_confident_correct_model() {
        let mut m = SoftmaxModel::zeros(2, 1);
        m.params_mut()[0] = 50.0; // class 0 strongly favored for x > 0
        m.params_mut()[1] = -50.0;
        let batch = vec![FeatureVector { values: vec![1.0], label: 0 }];
        let (loss, _) = loss_and_grad(&m, &batch).unwrap();
        assert!(loss >= 0.0 && loss < 1e-6, "loss {loss}");
    }

    #[test]
    fn forward_dimension_mismatch() {
        let m = SoftmaxModel::zeros(2, 3);
        assert!(matches!(
            m.forward(&[1.0]),
            Err(ClassifierError::DimensionMismatch { expected: 3, found: 1 })
        ));
    }

    #[test]
    fn loss_of_zero_model_is_ln_k() {
        for k in [2usize, 5, 10] {
            let m = SoftmaxModel::zeros(k, 4);
            let batch = vec![FeatureVector { values: vec![0.1, 0.2, 0.3, 0.4], label: k - 1 }];
            let (loss, _) = loss_and_grad(&m, &batch).unwrap();
            assert!((loss - (k as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_batch_rejected() {
        let m = SoftmaxModel::zeros(2, 2);
        assert!(matches!(loss_and_grad(&m, &[]), Err(ClassifierError::EmptyBatch)));
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for case in 0..25 {
            let k = 2 + (rng.next_u64() % 4) as usize; // K in 2..=5
            let d = 2 + (rng.next_u64() % 9) as usize; // D in 2..=10
            let mut model = SoftmaxModel::zeros(k, d);
            for p in model.params_mut() {
                *p = unit(&mut rng) * 2.0 - 1.0;
            }
            let batch: Vec<FeatureVector> = (0..3)
                .map(|_| FeatureVector {
                    values: (0..d).map(|_| (unit(&mut rng) * 2.0 - 1.0) as f32).collect(),
                    label: (rng.next_u64() % k as u64) as usize,
                })
                .collect();
            let (_, grad) = loss_and_grad(&model, &batch).unwrap();
            let h = 1e-5;
            for i in 0..model.params().len() {
                let mut plus = model.clone();
                plus.params_mut()[i] += h;
                let mut minus = model.clone();
                minus.params_mut()[i] -= h;
                let (lp, _) = loss_and_grad(&plus, &batch).unwrap();
                let (lm, _) = loss_and_grad(&minus, &batch).unwrap();
                let fd = (lp - lm) / (2.0 * h);
                let denom = grad[i].abs().max(fd.abs()).max(1e-8);
                assert!(
                    (grad[i] - fd).abs() / denom <= 1e-4,
                    "case {case}: param {i}: analytic {} vs fd {fd}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn adam_zero_gradient_is_identity() {
        let mut params = vec![0.5, -0.25, 1.5];
        let mut state = AdamState::new(3);
        adam_step(&mut params, &[0.0; 3], &mut state, &AdamConfig::default());
        assert_eq!(params, vec![0.5, -0.25, 1.5]);
    }

    #[test]
    fn adam_first_step_magnitude() {
        // bias-corrected first step is lr * g / (|g| + eps') ~ lr * sign(g)
        let cfg = AdamConfig::default();
        let mut params = vec![0.0];
        let mut state = AdamState::new(1);
        adam_step(&mut params, &[0.37], &mut state, &cfg);
        assert!((params[0] + cfg.lr0).abs() < 1e-6, "step {} vs lr {}", params[0], cfg.lr0);
    }

    #[test]
    fn schedule_steps_down_and_floors() {
        let cfg = AdamConfig::default();
        for t in 1..29 {
            assert_eq!(learning_rate(&cfg, t), 0.003);
        }
        for k in 1..40u64 {
            let lr = learning_rate(&cfg, 29 * k);
            assert!((lr - (0.003 * 0.9f64.powi(k as i32)).max(0.0001)).abs() < 1e-15);
        }
        let mut prev = f64::INFINITY;
        for t in 1..2000 {
            let lr = learning_rate(&cfg, t);
            assert!(lr <= prev && lr >= 0.0001);
            prev = lr;
        }
    }

    #[test]
    fn training_reduces_loss_on_convex_problem() {
        let samples = blobs(40, 3, 5);
        let data = FeatureSet {
            dim: 3,
            num_classes: 2,
            val: samples.clone(),
            test: vec![],
            train: samples,
        };
        let m0 = SoftmaxModel::zeros(2, 3);
        let (initial, _) = loss_and_grad(&m0, &data.train).unwrap();
        let cfg = TrainConfig { epochs: 80, batch_size: 32, ..TrainConfig::default() };
        let outcome = train_and_loss(&data, &cfg);
        assert!(outcome.1 < initial, "final {} vs initial {initial}", outcome.1);
    }

    fn train_and_loss(data: &FeatureSet, cfg: &TrainConfig) -> (TrainOutcome, f64) {
        let outcome = train(data, cfg).unwrap();
        let (loss, _) = loss_and_grad(&outcome.model, &data.train).unwrap();
        (outcome, loss)
    }

    #[test]
    fn separable_blobs_reach_perfect_train_accuracy() {
        let samples = blobs(100, 4, 9);
        let data = FeatureSet {
            dim: 4,
            num_classes: 2,
            val: samples.clone(),
            test: samples.clone(),
            train: samples,
        };
        // 200 samples / batch 32 = 7 iterations per epoch; 70 epochs = 490
        let cfg = TrainConfig { epochs: 70, batch_size: 32, ..TrainConfig::default() };
        let outcome = train(&data, &cfg).unwrap();
        assert!(outcome.iterations <= 500);
        assert_eq!(evaluate(&outcome.model, &data.train).unwrap(), 100.0);
    }

    #[test]
    fn training_is_bit_deterministic() {
        let samples = blobs(30, 5, 77);
        let data = FeatureSet {
            dim: 5,
            num_classes: 2,
            val: samples.clone(),
            test: vec![],
            train: samples,
        };
        let cfg = TrainConfig { epochs: 10, ..TrainConfig::default() };
        let a = train(&data, &cfg).unwrap();
        let b = train(&data, &cfg).unwrap();
        assert_eq!(a.model.params(), b.model.params());
    }

    #[test]
    fn evaluate_degenerate_single_class() {
        let m = SoftmaxModel::zeros(1, 2);
        let samples = vec![FeatureVector { values: vec![0.0, 1.0], label: 0 }];
        assert_eq!(evaluate(&m, &samples).unwrap(), 100.0);
    }

    #[test]
    fn permuting_features_and_columns_together_is_invariant() {
        let samples = blobs(20, 6, 13);
        let data = FeatureSet {
            dim: 6,
            num_classes: 2,
            val: samples.clone(),
            test: samples.clone(),
            train: samples,
        };
        let cfg = TrainConfig { epochs: 5, ..TrainConfig::default() };
        let outcome = train(&data, &cfg).unwrap();
        let perm = [3usize, 0, 5, 1, 4, 2];
        let mut permuted = SoftmaxModel::zeros(2, 6);
        for j in 0..2 {
            for (new_i, &old_i) in perm.iter().enumerate() {
                permuted.params_mut()[j * 6 + new_i] = outcome.model.params()[j * 6 + old_i];
            }
        }
        for j in 0..2 {
            permuted.params_mut()[12 + j] = outcome.model.params()[12 + j];
        }
        let shuffled: Vec<FeatureVector> = data
            .test
            .iter()
            .map(|f| FeatureVector {
                values: perm.iter().map(|&i| f.values[i]).collect(),
                label: f.label,
            })
            .collect();
        assert_eq!(
            evaluate(&outcome.model, &data.test).unwrap(),
            evaluate(&permuted, &shuffled).unwrap()
        );
    }

    #[test]
    fn model_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let samples = blobs(15, 3, 3);
        let data = FeatureSet {
            dim: 3,
            num_classes: 2,
            val: samples.clone(),
            test: vec![],
            train: samples,
        };
        let cfg = TrainConfig { epochs: 3, ..TrainConfig::default() };
        let outcome = train(&data, &cfg).unwrap();
        outcome.model.save(dir.path(), &cfg).unwrap();
        let (loaded, loaded_cfg) = SoftmaxModel::load(dir.path()).unwrap();
        assert_eq!(loaded_cfg, cfg);
        // parameters survive at f32 precision
        for (a, b) in outcome.model.params().iter().zip(loaded.params()) {
            assert!((a - b).abs() <= (*a as f32).abs() as f64 * 1e-6 + 1e-9);
        }
        assert_eq!(
            evaluate(&outcome.model, &data.val).unwrap(),
            evaluate(&loaded, &data.val).unwrap()
        );
    }
}
