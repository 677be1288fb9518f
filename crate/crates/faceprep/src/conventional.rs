//! The conventional preprocessors: translation augmentation and dataset
//! standardization.
//!
//! These are the two switches of the evaluation grid: WA/NA toggles the
//! four shifted training copies, WN/NN toggles zero-mean unit-variance
//! standardization with statistics taken from the training split only.

use thiserror::Error;

use crate::raster::{Raster8, TensorF32};

/// Shift distance of the four augmented copies, in pixels.
pub const AUGMENT_SHIFT: i32 = 30;

#[derive(Debug, Error)]
pub enum ConventionalError {
    #[error("raster {width}x{height} too small to translate by {shift} pixels")]
    TooSmall { width: u32, height: u32, shift: i32 },
    #[error("cannot compute statistics over an empty training set")]
    EmptyTrainingSet,
    #[error("channel mismatch: stats cover {stats} channels, tensor has {tensor}")]
    ChannelMismatch { stats: usize, tensor: u32 },
}

/// Translate a raster by `(dx, dy)` pixels (content moves right/down for
/// positive values); exposed borders are filled by edge replication.
pub fn translate(r: &Raster8, dx: i32, dy: i32) -> Raster8 {
    let (w, h) = (r.width() as i64, r.height() as i64);
    let ch = r.channels() as usize;
    let mut data = vec![0u8; r.data().len()];
    for y in 0..h {
        let sy = (y - dy as i64).clamp(0, h - 1) as u32;
        for x in 0..w {
            let sx = (x - dx as i64).clamp(0, w - 1) as u32;
            for c in 0..ch {
                data[(y as usize * w as usize + x as usize) * ch + c] =
                    r.sample(sx, sy, c as u32);
            }
        }
    }
    Raster8::new(r.width(), r.height(), r.channels(), data, r.space()).expect("same dimensions")
}

/// The four augmented copies: content shifted right, left, down, and up by
/// [`AUGMENT_SHIFT`] pixels, dimensions unchanged.
pub fn translate_augment(r: &Raster8) -> Result<[Raster8; 4], ConventionalError> {
    if r.width() <= AUGMENT_SHIFT as u32 || r.height() <= AUGMENT_SHIFT as u32 {
        return Err(ConventionalError::TooSmall {
            width: r.width(),
            height: r.height(),
            shift: AUGMENT_SHIFT,
        });
    }
    Ok([
        translate(r, AUGMENT_SHIFT, 0),
        translate(r, -AUGMENT_SHIFT, 0),
        translate(r, 0, AUGMENT_SHIFT),
        translate(r, 0, -AUGMENT_SHIFT),
    ])
}

/// Per-channel mean and population standard deviation of a training set,
/// on the `[0, 1]` tensor scale.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationStats {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl StandardizationStats {
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }
}

/// Streaming accumulator behind [`compute_stats`]; tensors must be pushed
/// in manifest order for reproducible results.
#[derive(Debug, Clone, Default)]
pub struct StatsAccumulator {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    count: Vec<u64>,
}

impl StatsAccumulator {
    pub fn new() -> StatsAccumulator {
        StatsAccumulator::default()
    }

    pub fn push(&mut self, t: &TensorF32) {
        let ch = t.channels() as usize;
        if self.sum.len() < ch {
            self.sum.resize(ch, 0.0);
            self.sum_sq.resize(ch, 0.0);
            self.count.resize(ch, 0);
        }
        for c in 0..ch {
            let mut s = 0.0;
            let mut s2 = 0.0;
            for &v in t.plane(c as u32) {
                let v = v as f64;
                s += v;
                s2 += v * v;
            }
            self.sum[c] += s;
            self.sum_sq[c] += s2;
            self.count[c] += t.plane(c as u32).len() as u64;
        }
    }

    /// Fold another accumulator in; equivalent to having pushed its
    /// tensors after this one's.
    pub fn merge(&mut self, other: &StatsAccumulator) {
        let ch = other.sum.len();
        if self.sum.len() < ch {
            self.sum.resize(ch, 0.0);
            self.sum_sq.resize(ch, 0.0);
            self.count.resize(ch, 0);
        }
        for c in 0..ch {
            self.sum[c] += other.sum[c];
            self.sum_sq[c] += other.sum_sq[c];
            self.count[c] += other.count[c];
        }
    }

    /// Finish with population statistics; the standard deviation is
    /// floored at `1e-6` so standardization stays finite.
    pub fn finish(self) -> Result<StandardizationStats, ConventionalError> {
        if self.count.is_empty() || self.count.contains(&0) {
            return Err(ConventionalError::EmptyTrainingSet);
        }
        let mut mean = Vec::with_capacity(self.sum.len());
        let mut std = Vec::with_capacity(self.sum.len());
        for c in 0..self.sum.len() {
            let n = self.count[c] as f64;
            let m = self.sum[c] / n;
            let var = (self.sum_sq[c] / n - m * m).max(0.0);
            mean.push(m);
            std.push(var.sqrt().max(1e-6));
        }
        Ok(StandardizationStats { mean, std })
    }
}

/// Per-channel mean and population standard deviation over all pixels of
/// all tensors, accumulated in the given order.
pub fn compute_stats(tensors: &[TensorF32]) -> Result<StandardizationStats, ConventionalError> {
    let mut acc = StatsAccumulator::new();
    for t in tensors {
        acc.push(t);
    }
    acc.finish()
}

/// Standardize a tensor: per channel, `(x − mean) / std`.
pub fn standardize(
    t: &TensorF32,
    stats: &StandardizationStats,
) -> Result<TensorF32, ConventionalError> {
    if stats.channels() != t.channels() as usize {
        return Err(ConventionalError::ChannelMismatch {
            stats: stats.channels(),
            tensor: t.channels(),
        });
    }
    let plane = t.height() as usize * t.width() as usize;
    let mut data = Vec::with_capacity(t.data().len());
    for c in 0..t.channels() as usize {
        let mean = stats.mean[c] as f32;
        let std = stats.std[c] as f32;
        data.extend(t.data()[c * plane..(c + 1) * plane].iter().map(|v| (v - mean) / std));
    }
    TensorF32::new(t.channels(), t.height(), t.width(), data)
        .map_err(|_| ConventionalError::EmptyTrainingSet)
}
