//! Dataset ingestion and deterministic stratified splits.
//!
//! A [`DatasetManifest`] lists class directories and image files plus the
//! train/val/test assignment. Splits are a pure function of the sorted
//! entry paths, the seed, and the ratios: each class is shuffled by a
//! ChaCha8 stream seeded with `seed XOR fnv1a64(class name)` and cut by
//! the floor rule (`n_val = ⌊r_val·n⌋`, `n_test = ⌊r_test·n⌋`, remainder
//! to train). Manifests serialize to versioned TOML, byte-identically for
//! identical inputs.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::ImageFormat;

pub const MANIFEST_VERSION: u32 = 1;

/// Default class-size threshold: keep identities with more than this many
/// images.
pub const DEFAULT_MIN_IMAGES: usize = 50;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no classes with images found under {0}")]
    EmptyDataset(PathBuf),
    #[error("cannot read {path}: {source}")]
    UnreadablePath { path: PathBuf, source: std::io::Error },
    #[error("no classes remain after filtering at threshold {0}")]
    NoClassesRemain(usize),
    #[error("class {class} has {count} images; splitting requires at least 3")]
    ClassTooSmall { class: String, count: usize },
    #[error("split ratios {0:?} do not sum to 1")]
    BadRatios([f64; 3]),
    #[error("manifest parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Train,
    Val,
    Test,
}

impl fmt::Display for SplitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitKind::Train => write!(f, "train"),
            SplitKind::Val => write!(f, "val"),
            SplitKind::Test => write!(f, "test"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the manifest root, forward-slash separated.
    pub path: String,
    pub class: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitKind>,
    /// For augmented copies: the source entry's path.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derived_from: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub root: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratios: Option<[f64; 3]>,
    pub classes: Vec<String>,
    #[serde(rename = "entry", default)]
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn class_index(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }

    /// Image count per class, in class order.
    pub fn class_counts(&self) -> Vec<(String, usize)> {
        self.classes
            .iter()
            .map(|c| (c.clone(), self.entries.iter().filter(|e| &e.class == c).count()))
            .collect()
    }

    /// (train, val, test) count per class, in class order.
    pub fn split_counts(&self) -> Vec<(String, [usize; 3])> {
        self.classes
            .iter()
            .map(|c| {
                let mut counts = [0usize; 3];
                for e in self.entries.iter().filter(|e| &e.class == c) {
                    match e.split {
                        Some(SplitKind::Train) => counts[0] += 1,
                        Some(SplitKind::Val) => counts[1] += 1,
                        Some(SplitKind::Test) => counts[2] += 1,
                        None => {}
                    }
                }
                (c.clone(), counts)
            })
            .collect()
    }

    pub fn entries_in(&self, split: SplitKind) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == Some(split))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn from_toml_str(text: &str) -> Result<DatasetManifest, DatasetError> {
        let m: DatasetManifest =
            toml::from_str(text).map_err(|e| DatasetError::Parse(e.to_string()))?;
        if m.version != MANIFEST_VERSION {
            return Err(DatasetError::Parse(format!(
                "unsupported manifest version {}",
                m.version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        fs::write(path, self.to_toml_string())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<DatasetManifest, DatasetError> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    /// Absolute path of an entry.
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        Path::new(&self.root).join(&entry.path)
    }
}

/// Scan `root/<class>/<image>` and build an unsplit manifest. Entries are
/// sorted lexicographically by path, so the result is independent of
/// filesystem enumeration order.
pub fn ingest_directory(root: &Path) -> Result<DatasetManifest, DatasetError> {
    let read = |p: &Path| {
        fs::read_dir(p).map_err(|source| DatasetError::UnreadablePath { path: p.to_path_buf(), source })
    };
    let mut classes = Vec::new();
    let mut entries = Vec::new();
    let mut dirs: Vec<PathBuf> = read(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    for dir in dirs {
        let class = dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let mut files: Vec<String> = read(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && ImageFormat::from_extension(p).is_some())
            .map(|p| format!("{}/{}", class, p.file_name().unwrap().to_string_lossy()))
            .collect();
        if files.is_empty() {
            continue;
        }
        files.sort();
        classes.push(class.clone());
        entries.extend(files.into_iter().map(|path| ManifestEntry {
            path,
            class: class.clone(),
            split: None,
            derived_from: None,
        }));
    }
    if entries.is_empty() {
        return Err(DatasetError::EmptyDataset(root.to_path_buf()));
    }
    Ok(DatasetManifest {
        version: MANIFEST_VERSION,
        root: root.to_string_lossy().into_owned(),
        seed: None,
        ratios: None,
        classes,
        entries,
    })
}

/// Keep classes with strictly more than `threshold` images.
pub fn filter_min_images(
    m: &DatasetManifest,
    threshold: usize,
) -> Result<DatasetManifest, DatasetError> {
    let keep: Vec<String> = m
        .class_counts()
        .into_iter()
        .filter(|(_, count)| *count > threshold)
        .map(|(class, _)| class)
        .collect();
    if keep.is_empty() {
        return Err(DatasetError::NoClassesRemain(threshold));
    }
    Ok(DatasetManifest {
        version: m.version,
        root: m.root.clone(),
        seed: m.seed,
        ratios: m.ratios,
        entries: m.entries.iter().filter(|e| keep.contains(&e.class)).cloned().collect(),
        classes: keep,
    })
}

/// 64-bit FNV-1a, used to derive a per-class shuffle stream from the
/// global seed.
pub(crate) fn fnv1a64(text: &str) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for b in text.as_bytes() {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Unbiased `[0, bound)` sample by rejection.
fn uniform_below(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    let zone = u64::MAX - u64::MAX % bound;
    loop {
        let r = rng.next_u64();
        if r < zone {
            return r % bound;
        }
    }
}

/// In-place Fisher–Yates shuffle driven by a ChaCha8 stream.
pub(crate) fn seeded_shuffle<T>(items: &mut [T], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..items.len()).rev() {
        let j = uniform_below(&mut rng, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// Assign stratified train/val/test splits.
///
/// Ratios are `(train, val, test)` and must sum to 1. Per class, entries
/// are shuffled deterministically and cut as `n_val = ⌊r_val·n⌋`,
/// `n_test = ⌊r_test·n⌋`, remainder to train.
pub fn split(
    m: &DatasetManifest,
    ratios: [f64; 3],
    seed: u64,
) -> Result<DatasetManifest, DatasetError> {
    if (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 || ratios.iter().any(|&r| r < 0.0) {
        return Err(DatasetError::BadRatios(ratios));
    }
    let mut out = m.clone();
    out.seed = Some(seed);
    out.ratios = Some(ratios);
    for class in &m.classes {
        let mut indices: Vec<usize> = m
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| &e.class == class)
            .map(|(i, _)| i)
            .collect();
        let n = indices.len();
        if n < 3 {
            return Err(DatasetError::ClassTooSmall { class: class.clone(), count: n });
        }
        seeded_shuffle(&mut indices, seed ^ fnv1a64(class));
        let n_val = (ratios[1] * n as f64).floor() as usize;
        let n_test = (ratios[2] * n as f64).floor() as usize;
        for (pos, &idx) in indices.iter().enumerate() {
            out.entries[idx].split = Some(if pos < n_val {
                SplitKind::Val
            } else if pos < n_val + n_test {
                SplitKind::Test
            } else {
                SplitKind::Train
            });
        }
    }
    Ok(out)
}
