//! Illumination normalization: per-channel histogram equalization and
//! Gaussian local contrast normalization.
//!
//! Both operate channel-plane by channel-plane, so color images are
//! processed as three independent grey images.

use thiserror::Error;

use crate::raster::Raster8;

#[derive(Debug, Error)]
pub enum IllumError {
    #[error("invalid LCN parameters: {0}")]
    InvalidParams(String),
}

/// Parameters of [`local_contrast_normalize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcnParams {
    /// Odd kernel width in pixels.
    pub window: usize,
    /// Gaussian width in pixels.
    pub sigma: f64,
    /// Floor for the divisive term, on the `[0, 1]` intensity scale.
    pub eps: f64,
}

impl Default for LcnParams {
    fn default() -> Self {
        LcnParams { window: 9, sigma: 9.0 / 4.0, eps: 0.01 }
    }
}

impl LcnParams {
    pub fn validate(&self) -> Result<(), IllumError> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(IllumError::InvalidParams(format!(
                "window must be odd and at least 3, got {}",
                self.window
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(IllumError::InvalidParams(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.eps > 0.0) {
            return Err(IllumError::InvalidParams(format!("eps must be positive, got {}", self.eps)));
        }
        Ok(())
    }
}

/// Histogram-equalize every channel independently.
///
/// Per channel: `v' = round((cdf(v) − cdf_min) / (N − cdf_min) · 255)`,
/// where `cdf` is the channel's cumulative histogram, `cdf_min` its
/// smallest nonzero value, and `N` the pixel count. A constant channel is
/// returned unchanged.
pub fn hist_equalize(r: &Raster8) -> Raster8 {
    let mut out = r.clone();
    let n = r.pixel_count() as u64;
    let ch = r.channels() as usize;
    for c in 0..ch {
        let mut counts = [0u64; 256];
        for v in r.data().iter().skip(c).step_by(ch) {
            counts[*v as usize] += 1;
        }
        let mut cdf = [0u64; 256];
        let mut acc = 0;
        for (v, &count) in counts.iter().enumerate() {
            acc += count;
            cdf[v] = acc;
        }
        let cdf_min = counts
            .iter()
            .zip(cdf.iter())
            .find(|(&count, _)| count > 0)
            .map(|(_, &c)| c)
            .unwrap_or(0);
        if cdf_min == n {
            continue; // constant channel
        }
        let scale = 255.0 / (n - cdf_min) as f64;
        let mut lut = [0u8; 256];
        for (v, slot) in lut.iter_mut().enumerate() {
            *slot = ((cdf[v].saturating_sub(cdf_min)) as f64 * scale).round() as u8;
        }
        for v in out.data_mut().iter_mut().skip(c).step_by(ch) {
            *v = lut[*v as usize];
        }
    }
    out
}

/// Normalized 1-D Gaussian taps over an odd window.
fn gaussian_kernel(window: usize, sigma: f64) -> Vec<f64> {
    let radius = (window / 2) as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Separable convolution with replicate padding.
fn convolve_replicate(plane: &[f64], width: usize, height: usize, taps: &[f64]) -> Vec<f64> {
    let radius = (taps.len() / 2) as isize;
    let mut rows = vec![0.0; plane.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (i, &t) in taps.iter().enumerate() {
                let sx = (x as isize + i as isize - radius).clamp(0, width as isize - 1);
                acc += t * plane[y * width + sx as usize];
            }
            rows[y * width + x] = acc;
        }
    }
    let mut out = vec![0.0; plane.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (i, &t) in taps.iter().enumerate() {
                let sy = (y as isize + i as isize - radius).clamp(0, height as isize - 1);
                acc += t * rows[sy as usize * width + x];
            }
            out[y * width + x] = acc;
        }
    }
    out
}

/// Continuous-domain LCN response of one plane with values on `[0, 1]`:
/// subtract the Gaussian local mean, then divide by the Gaussian local
/// standard deviation floored at `eps`.
///
/// Exposed separately so the divisive invariance (scaling the input leaves
/// the response unchanged when `eps` is negligible) is directly testable.
pub fn lcn_response(
    plane: &[f64],
    width: usize,
    height: usize,
    params: &LcnParams,
) -> Result<Vec<f64>, IllumError> {
    params.validate()?;
    assert_eq!(plane.len(), width * height, "plane length mismatch");
    let taps = gaussian_kernel(params.window, params.sigma);
    let local_mean = convolve_replicate(plane, width, height, &taps);
    let centered: Vec<f64> = plane.iter().zip(&local_mean).map(|(x, m)| x - m).collect();
    let squared: Vec<f64> = centered.iter().map(|v| v * v).collect();
    let local_var = convolve_replicate(&squared, width, height, &taps);
    Ok(centered
        .iter()
        .zip(&local_var)
        .map(|(v, var)| v / var.max(0.0).sqrt().max(params.eps))
        .collect())
}

/// Local contrast normalization of every channel, re-encoded to 8 bits as
/// `clamp(round(response · 64 + 128), 0, 255)`. A constant raster maps to
/// all-128.
pub fn local_contrast_normalize(r: &Raster8, params: &LcnParams) -> Result<Raster8, IllumError> {
    params.validate()?;
    let (w, h) = (r.width() as usize, r.height() as usize);
    let mut out = r.clone();
    let ch = r.channels() as usize;
    for c in 0..ch {
        let plane: Vec<f64> = r
            .data()
            .iter()
            .skip(c)
            .step_by(ch)
            .map(|&v| v as f64 / 255.0)
            .collect();
        let response = lcn_response(&plane, w, h, params)?;
        for (slot, y) in out.data_mut().iter_mut().skip(c).step_by(ch).zip(&response) {
            *slot = (y * 64.0 + 128.0).round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}
