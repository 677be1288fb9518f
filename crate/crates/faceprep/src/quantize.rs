//! Grey-level resolution reduction via multilevel Otsu thresholding.
//!
//! A level count `L` selects `L` thresholds `t₁ < … < t_L` in `[0, 254]`
//! that maximize the between-class variance `Σ wₖ(μₖ − μ_T)²` of the
//! `L + 1` classes `{v ≤ t₁}, {t₁ < v ≤ t₂}, …, {v > t_L}`. Each class is
//! then replaced by its mean grey level, so an 8-bit channel collapses to
//! at most `L + 1` distinct values.
//!
//! Two scopes are provided: [`quantize_full`] pools every channel into one
//! histogram and applies one threshold vector everywhere, while
//! [`quantize_plane`] thresholds each channel independently.
//!
//! The optimizer is a dynamic program over interval costs (`O(L·256²)`);
//! exhaustive search is infeasible at `L = 7`. Ties are broken toward the
//! lexicographically smallest threshold vector, so results are
//! platform-deterministic.

use thiserror::Error;

use crate::raster::{ColorSpace, QuantMode, Raster8};

#[derive(Debug, Error)]
pub enum QuantizeError {
    #[error("quantization level {0} outside [1, 254]")]
    InvalidLevel(usize),
    #[error("cannot threshold an empty histogram")]
    EmptyHistogram,
    #[error("plane quantization requires 3 channels, found {0}")]
    WrongChannelCount(u32),
}

/// Occurrence counts of the 256 grey levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram256 {
    counts: [u64; 256],
}

impl Default for Histogram256 {
    fn default() -> Self {
        Histogram256 { counts: [0; 256] }
    }
}

impl Histogram256 {
    pub fn new() -> Histogram256 {
        Histogram256::default()
    }

    pub fn push(&mut self, value: u8) {
        self.counts[value as usize] += 1;
    }

    /// Merge another histogram into this one (bin-wise addition).
    pub fn merge(&mut self, other: &Histogram256) {
        for (a, b) in self.counts.iter_mut().zip(other.counts.iter()) {
            *a += b;
        }
    }

    pub fn counts(&self) -> &[u64; 256] {
        &self.counts
    }

    pub fn count(&self, value: u8) -> u64 {
        self.counts[value as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Number of bins with nonzero count.
    pub fn distinct(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

/// Build a histogram from a sample sequence. Empty input is allowed.
pub fn histogram256(samples: impl IntoIterator<Item = u8>) -> Histogram256 {
    let mut h = Histogram256::new();
    for v in samples {
        h.push(v);
    }
    h
}

/// Strictly increasing grey-level thresholds in `[0, 254]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdVector {
    thresholds: Vec<u8>,
}

impl ThresholdVector {
    pub fn new(thresholds: Vec<u8>) -> Result<ThresholdVector, QuantizeError> {
        if thresholds.is_empty() || thresholds.len() > 254 {
            return Err(QuantizeError::InvalidLevel(thresholds.len()));
        }
        let increasing = thresholds.windows(2).all(|w| w[0] < w[1]);
        if !increasing || *thresholds.last().unwrap() > 254 {
            return Err(QuantizeError::InvalidLevel(thresholds.len()));
        }
        Ok(ThresholdVector { thresholds })
    }

    pub fn thresholds(&self) -> &[u8] {
        &self.thresholds
    }

    /// The level count `L` (number of thresholds; classes are `L + 1`).
    pub fn levels(&self) -> usize {
        self.thresholds.len()
    }

    /// Class index of a grey value: the number of thresholds strictly
    /// below it.
    pub fn class_of(&self, value: u8) -> usize {
        self.thresholds.partition_point(|&t| t < value)
    }

    /// Inclusive `[lo, hi]` bin range of class `k`.
    pub fn class_interval(&self, k: usize) -> (u8, u8) {
        let lo = if k == 0 { 0 } else { self.thresholds[k - 1] as u16 + 1 };
        let hi = if k == self.thresholds.len() { 255 } else { self.thresholds[k] as u16 };
        (lo as u8, hi as u8)
    }
}

/// Cumulative zeroth/first moments of a histogram, giving O(1) interval
/// mass and weighted-sum lookups.
struct Moments {
    count: [u64; 257],
    sum: [u64; 257],
}

impl Moments {
    fn new(h: &Histogram256) -> Moments {
        let mut count = [0u64; 257];
        let mut sum = [0u64; 257];
        for v in 0..256 {
            count[v + 1] = count[v] + h.counts[v];
            sum[v + 1] = sum[v] + h.counts[v] * v as u64;
        }
        Moments { count, sum }
    }

    fn mass(&self, lo: usize, hi: usize) -> u64 {
        self.count[hi + 1] - self.count[lo]
    }

    /// Contribution `s²/n` of the class covering bins `[lo, hi]`; an empty
    /// class contributes 0.
    #[inline]
    fn cost(&self, lo: usize, hi: usize) -> f64 {
        let n = self.count[hi + 1] - self.count[lo];
        if n == 0 {
            return 0.0;
        }
        let s = (self.sum[hi + 1] - self.sum[lo]) as f64;
        s * s / n as f64
    }
}

/// Evenly spaced fallback thresholds for degenerate (single-valued)
/// histograms: `tᵢ = (i·256)/(L+1) − 1`.
fn evenly_spaced(levels: usize) -> ThresholdVector {
    let thresholds = (1..=levels)
        .map(|i| ((i * 256) / (levels + 1) - 1) as u8)
        .collect();
    ThresholdVector::new(thresholds).expect("evenly spaced thresholds are valid")
}

/// Select the `levels` thresholds maximizing between-class variance.
///
/// The returned vector is the lexicographically smallest maximizer. A
/// histogram with a single occupied bin has between-class variance 0 for
/// every choice; it gets the evenly spaced fallback so constant images
/// pass through unchanged.
pub fn otsu_multilevel(
    h: &Histogram256,
    levels: usize,
) -> Result<ThresholdVector, QuantizeError> {
    if levels == 0 || levels > 254 {
        return Err(QuantizeError::InvalidLevel(levels));
    }
    if h.total() == 0 {
        return Err(QuantizeError::EmptyHistogram);
    }
    if h.distinct() == 1 {
        return Ok(evenly_spaced(levels));
    }
    let m = Moments::new(h);

    // suffix[k][t] (k in 1..=L, 0-indexed as k-1) = best total contribution
    // of classes k+1..=L+1 given that threshold k sits at t. Sums are
    // accumulated right-to-left, so the value for any chain equals the
    // right-associated sum of its class costs — the same expression the
    // brute-force oracle evaluates, which makes tie comparisons exact.
    let l = levels;
    let mut suffix = vec![[f64::NEG_INFINITY; 255]; l];
    for t in (l - 1)..=254 {
        suffix[l - 1][t] = m.cost(t + 1, 255);
    }
    for k in (0..l - 1).rev() {
        // threshold k+1 (1-based) at t; next threshold ranges over
        // (t, 254 - remaining]
        let hi = 254 - (l - 2 - k);
        for t in k..=(hi - 1) {
            let mut best = f64::NEG_INFINITY;
            for next in (t + 1)..=hi {
                let v = m.cost(t + 1, next) + suffix[k + 1][next];
                if v > best {
                    best = v;
                }
            }
            suffix[k][t] = best;
        }
    }

    let mut best = f64::NEG_INFINITY;
    for t in 0..=(254 - (l - 1)) {
        let v = m.cost(0, t) + suffix[0][t];
        if v > best {
            best = v;
        }
    }

    // Forward reconstruction: at each position take the smallest threshold
    // whose completion attains the running optimum; this yields the
    // lexicographically smallest maximizing vector.
    let mut thresholds = Vec::with_capacity(l);
    let mut target = best;
    let mut prev: isize = -1;
    for k in 0..l {
        let hi = 254 - (l - 1 - k);
        let mut chosen = None;
        for t in (prev + 1) as usize..=hi {
            let lo = (prev + 1) as usize;
            let v = m.cost(lo, t) + suffix[k][t];
            if v == target {
                chosen = Some(t);
                target = suffix[k][t];
                break;
            }
        }
        let t = chosen.expect("dp optimum must be attainable");
        thresholds.push(t as u8);
        prev = t as isize;
    }
    ThresholdVector::new(thresholds)
}

/// Between-class variance `Σ wₖ(μₖ − μ_T)²` of a histogram under a
/// threshold vector.
pub fn between_class_variance(h: &Histogram256, tv: &ThresholdVector) -> f64 {
    let m = Moments::new(h);
    let total = m.mass(0, 255);
    if total == 0 {
        return 0.0;
    }
    let sum_contrib: f64 = (0..=tv.levels())
        .map(|k| {
            let (lo, hi) = tv.class_interval(k);
            m.cost(lo as usize, hi as usize)
        })
        .sum();
    let grand_mean = m.sum[256] as f64 / total as f64;
    sum_contrib / total as f64 - grand_mean * grand_mean
}

/// Reconstruction value per class: the rounded in-class mean, or the
/// interval midpoint for empty classes. The result is non-decreasing.
pub fn representatives(h: &Histogram256, tv: &ThresholdVector) -> Vec<u8> {
    let m = Moments::new(h);
    (0..=tv.levels())
        .map(|k| {
            let (lo, hi) = tv.class_interval(k);
            let (lo, hi) = (lo as usize, hi as usize);
            let n = m.mass(lo, hi);
            if n == 0 {
                ((lo + hi) / 2) as u8
            } else {
                let s = m.sum[hi + 1] - m.sum[lo];
                (s as f64 / n as f64).round() as u8
            }
        })
        .collect()
}

fn value_map(h: &Histogram256, tv: &ThresholdVector) -> [u8; 256] {
    let reps = representatives(h, tv);
    let mut lut = [0u8; 256];
    for (v, slot) in lut.iter_mut().enumerate() {
        *slot = reps[tv.class_of(v as u8)];
    }
    lut
}

/// Quantize with one histogram pooled over all channels and one threshold
/// vector applied to every channel.
pub fn quantize_full(r: &Raster8, levels: usize) -> Result<Raster8, QuantizeError> {
    let hist = histogram256(r.data().iter().copied());
    let tv = otsu_multilevel(&hist, levels)?;
    let lut = value_map(&hist, &tv);
    let data = r.data().iter().map(|&v| lut[v as usize]).collect();
    Ok(Raster8::new(
        r.width(),
        r.height(),
        r.channels(),
        data,
        ColorSpace::Quant { mode: QuantMode::Full, levels: levels as u8 },
    )
    .expect("same dimensions"))
}

/// Quantize each channel with its own histogram, threshold vector, and
/// representatives.
pub fn quantize_plane(r: &Raster8, levels: usize) -> Result<Raster8, QuantizeError> {
    if r.channels() != 3 {
        return Err(QuantizeError::WrongChannelCount(r.channels()));
    }
    let ch = r.channels() as usize;
    let mut luts = Vec::with_capacity(ch);
    for c in 0..r.channels() {
        let hist = histogram256(r.channel(c));
        let tv = otsu_multilevel(&hist, levels)?;
        luts.push(value_map(&hist, &tv));
    }
    let data = r
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| luts[i % ch][v as usize])
        .collect();
    Ok(Raster8::new(
        r.width(),
        r.height(),
        r.channels(),
        data,
        ColorSpace::Quant { mode: QuantMode::Plane, levels: levels as u8 },
    )
    .expect("same dimensions"))
}
