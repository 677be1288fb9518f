//! Seeded synthetic face-like dataset generator.
//!
//! Real face data cannot ship with the repository, so the end-to-end tests
//! and the CLI demo run on procedurally generated portraits: a shaded
//! ellipse head with eyes and mouth over a background gradient, with
//! class-specific geometry and per-image pose/illumination jitter. The
//! images are smooth with a few strong edges, which is enough structure
//! for the preprocessors and the classifier to have something to do.

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::dataset::{ingest_directory, DatasetManifest, DatasetError};
use crate::raster::{save_image, ColorSpace, Raster8, RasterError};

#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub classes: usize,
    pub images_per_class: usize,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { classes: 10, images_per_class: 30, width: 48, height: 48, seed: 7 }
    }
}

fn unit_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 over the packed identifiers
    let mut z = seed ^ a.wrapping_mul(0x9e3779b97f4a7c15) ^ b.wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Per-class appearance parameters drawn once from the class stream.
struct ClassParams {
    skin: [f64; 3],
    bg: [f64; 3],
    face_rx: f64,
    face_ry: f64,
    eye_dx: f64,
    eye_y: f64,
    mouth_y: f64,
    mouth_w: f64,
}

impl ClassParams {
    fn derive(seed: u64, class: usize) -> ClassParams {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, class as u64, 0xface));
        let mut r = |lo: f64, hi: f64| lo + unit_f64(&mut rng) * (hi - lo);
        ClassParams {
            skin: [r(0.45, 0.95), r(0.35, 0.75), r(0.25, 0.65)],
            bg: [r(0.05, 0.5), r(0.05, 0.5), r(0.05, 0.5)],
            face_rx: r(0.26, 0.38),
            face_ry: r(0.32, 0.44),
            eye_dx: r(0.10, 0.17),
            eye_y: r(-0.14, -0.06),
            mouth_y: r(0.12, 0.22),
            mouth_w: r(0.10, 0.20),
        }
    }
}

/// Render one synthetic portrait. Deterministic in `(seed, class, index)`.
pub fn synth_image(cfg: &SynthConfig, class: usize, index: usize) -> Raster8 {
    let p = ClassParams::derive(cfg.seed, class);
    let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, class as u64, index as u64 + 1));
    let mut r = |lo: f64, hi: f64| lo + unit_f64(&mut rng) * (hi - lo);

    // per-image jitter
    let (cx, cy) = (r(-0.06, 0.06), r(-0.06, 0.06));
    let light = r(0.7, 1.3);
    let tilt = r(-0.3, 0.3);
    let noise_amp = r(0.0, 0.02);

    let (w, h) = (cfg.width, cfg.height);
    let mut data = Vec::with_capacity(w as usize * h as usize * 3);
    let mut noise_state = mix(cfg.seed, class as u64 ^ 0xbeef, index as u64);
    for y in 0..h {
        for x in 0..w {
            // normalized coordinates in [-0.5, 0.5]
            let nx = x as f64 / w as f64 - 0.5 - cx;
            let ny = y as f64 / h as f64 - 0.5 - cy;
            let gradient = 0.5 + tilt * nx + 0.25 * ny;
            let mut color = [
                p.bg[0] * gradient + 0.05,
                p.bg[1] * gradient + 0.05,
                p.bg[2] * gradient + 0.05,
            ];
            // head: shaded ellipse with a soft edge
            let d = (nx / p.face_rx) * (nx / p.face_rx) + (ny / p.face_ry) * (ny / p.face_ry);
            if d < 1.0 {
                let shade = 1.0 - 0.35 * d;
                for (c, slot) in color.iter_mut().enumerate() {
                    *slot = p.skin[c] * shade;
                }
                // eyes
                for side in [-1.0, 1.0] {
                    let ex = nx - side * p.eye_dx;
                    let ey = ny - p.eye_y;
                    if ex * ex / 0.0016 + ey * ey / 0.0009 < 1.0 {
                        for slot in color.iter_mut() {
                            *slot *= 0.2;
                        }
                    }
                }
                // mouth
                let mx = nx / p.mouth_w;
                let my = (ny - p.mouth_y) / 0.03;
                if mx * mx + my * my < 1.0 {
                    color[0] *= 0.6;
                    color[1] *= 0.3;
                    color[2] *= 0.3;
                }
            }
            for slot in color {
                noise_state = noise_state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                let noise = ((noise_state >> 40) as f64 / (1u64 << 24) as f64 - 0.5) * noise_amp;
                let v = ((slot * light + noise) * 255.0).round().clamp(0.0, 255.0);
                data.push(v as u8);
            }
        }
    }
    Raster8::new(w, h, 3, data, ColorSpace::Rgb).expect("synthetic raster dimensions")
}

/// Write a full synthetic dataset tree (`root/person_XX/img_XXXX.png`) and
/// return its ingested manifest.
pub fn generate_dataset(root: &Path, cfg: &SynthConfig) -> Result<DatasetManifest, SynthError> {
    for class in 0..cfg.classes {
        let dir = root.join(format!("person_{class:02}"));
        fs::create_dir_all(&dir).map_err(DatasetError::from)?;
        for index in 0..cfg.images_per_class {
            let img = synth_image(cfg, class, index);
            save_image(&dir.join(format!("img_{index:04}.png")), &img)?;
        }
    }
    Ok(ingest_directory(root)?)
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn images_are_deterministic() {
        let cfg = SynthConfig::default();
        assert_eq!(synth_image(&cfg, 3, 14), synth_image(&cfg, 3, 14));
        assert_ne!(synth_image(&cfg, 3, 14), synth_image(&cfg, 3, 15));
        assert_ne!(synth_image(&cfg, 3, 14), synth_image(&cfg, 4, 14));
    }

    #[test]
    fn images_have_structure() {
        // a portrait is neither constant nor white noise: expect a decent
        // fraction of equal 4-neighbors from the smooth regions
        let cfg = SynthConfig { width: 64, height: 64, ..SynthConfig::default() };
        let img = synth_image(&cfg, 0, 0);
        let frac =
            crate::analysis::equal_neighbor_fraction(&img, 0, crate::analysis::Connectivity::Four)
                .unwrap();
        assert!(frac > 0.05 && frac < 0.999, "equal-neighbor fraction {frac}");
    }

    #[test]
    fn dataset_tree_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig {
            classes: 3,
            images_per_class: 4,
            width: 16,
            height: 16,
            seed: 11,
        };
        let m = generate_dataset(dir.path(), &cfg).unwrap();
        assert_eq!(m.classes.len(), 3);
        assert_eq!(m.entries.len(), 12);
    }
}
