//! Config-driven pipeline composition, the augmentation × normalization
//! grid runner, and report assembly.
//!
//! A pipeline is an ordered stage list (color conversion, quantization,
//! equalization, LCN, resize) plus two switches: WA/NA adds the four
//! shifted copies to the training split, WN/NN standardizes every split
//! with statistics computed from the training split. [`run_pipeline`]
//! materializes processed images, `[0, 1]`-scaled `FPP1` tensors, a
//! per-image homogeneity report, and an augmented manifest into an output
//! directory. [`run_grid`] evaluates a list of preprocessor presets under
//! all four switch settings with the softmax classifier and fills a
//! Table-style report.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::analysis::{homogeneity_report, Connectivity};
use crate::classifier::{
    evaluate, extract_features, train, ClassifierError, FeatureSet, FeatureVector, TrainConfig,
};
use crate::colorspace::{rgb_to_hsv, rgb_to_lab, rgb_to_ycbcr, ColorSpaceError};
use crate::conventional::{
    standardize, translate_augment, ConventionalError, StandardizationStats, StatsAccumulator,
};
use crate::dataset::{DatasetError, DatasetManifest, ManifestEntry, SplitKind};
use crate::illum::{hist_equalize, local_contrast_normalize, IllumError, LcnParams};
use crate::quantize::{quantize_full, quantize_plane, QuantizeError};
use crate::raster::{load_image, resize_bilinear, save_image, to_unit_tensor, Raster8, RasterError, TensorF32};
use crate::report::{ReportRow, RunReport};

pub const CONFIG_VERSION: u32 = 1;

/// Rendered into every grid report header.
pub const FEATURE_NOTE: &str =
    "32x32 average-pool flatten (desk-scale stand-in feature extractor; accuracies are not comparable to published transfer-learning results)";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("unknown stage: {0}")]
    UnknownStage(String),
    #[error("invalid stage parameter: {0}")]
    InvalidParam(String),
    #[error("manifest has entries without a split assignment; run `split` first")]
    UnsplitManifest,
    #[error("while processing {path}: {source}")]
    At { path: String, source: Box<PipelineError> },
    #[error(transparent)]
    ColorSpace(#[from] ColorSpaceError),
    #[error(transparent)]
    Quantize(#[from] QuantizeError),
    #[error(transparent)]
    Illum(#[from] IllumError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Conventional(#[from] ConventionalError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("analysis failed: {0}")]
    Analysis(#[from] crate::analysis::AnalysisError),
}

fn at(path: &str, e: PipelineError) -> PipelineError {
    PipelineError::At { path: path.to_string(), source: Box::new(e) }
}

/// One preprocessing stage.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Resize { width: u32, height: u32 },
    ToHsv,
    ToLab,
    ToYcbcr,
    QuantizeFull { levels: usize },
    QuantizePlane { levels: usize },
    HistEq,
    Lcn { params: LcnParams },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Augmentation {
    /// With translation augmentation of the training split.
    Wa,
    /// Without augmentation.
    Na,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// With zero-mean/unit-std standardization (training statistics).
    Wn,
    /// Without normalization.
    Nn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub stages: Vec<Stage>,
    pub augmentation: Augmentation,
    pub normalization: Normalization,
    pub seed: u64,
    pub ratios: [f64; 3],
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            stages: Vec::new(),
            augmentation: Augmentation::Na,
            normalization: Normalization::Nn,
            seed: 42,
            ratios: [0.70, 0.05, 0.25],
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    version: u32,
    #[serde(default)]
    augmentation: Option<String>,
    #[serde(default)]
    normalization: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    ratios: Option<[f64; 3]>,
    #[serde(default, rename = "stage")]
    stages: Vec<RawStage>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStage {
    name: String,
    width: Option<u32>,
    height: Option<u32>,
    levels: Option<usize>,
    window: Option<usize>,
    sigma: Option<f64>,
    eps: Option<f64>,
}

fn require<T>(v: Option<T>, stage: &str, field: &str) -> Result<T, PipelineError> {
    v.ok_or_else(|| PipelineError::InvalidParam(format!("stage {stage} requires `{field}`")))
}

fn quant_levels(raw: &RawStage) -> Result<usize, PipelineError> {
    let levels = require(raw.levels, &raw.name, "levels")?;
    if !(1..=254).contains(&levels) {
        return Err(PipelineError::InvalidParam(format!(
            "stage {}: levels {levels} outside [1, 254]",
            raw.name
        )));
    }
    Ok(levels)
}

fn typed_stage(raw: &RawStage) -> Result<Stage, PipelineError> {
    let stage = match raw.name.as_str() {
        "resize" => {
            let width = require(raw.width, "resize", "width")?;
            let height = require(raw.height, "resize", "height")?;
            if width == 0 || height == 0 {
                return Err(PipelineError::InvalidParam(
                    "resize targets must be at least 1".into(),
                ));
            }
            Stage::Resize { width, height }
        }
        "to_hsv" => Stage::ToHsv,
        "to_lab" => Stage::ToLab,
        "to_ycbcr" => Stage::ToYcbcr,
        "quantize_full" => Stage::QuantizeFull { levels: quant_levels(raw)? },
        "quantize_plane" => Stage::QuantizePlane { levels: quant_levels(raw)? },
        "hist_eq" => Stage::HistEq,
        "lcn" => {
            let defaults = LcnParams::default();
            let window = raw.window.unwrap_or(defaults.window);
            let params = LcnParams {
                window,
                sigma: raw.sigma.unwrap_or(window as f64 / 4.0),
                eps: raw.eps.unwrap_or(defaults.eps),
            };
            params
                .validate()
                .map_err(|e| PipelineError::InvalidParam(e.to_string()))?;
            Stage::Lcn { params }
        }
        other => return Err(PipelineError::UnknownStage(other.to_string())),
    };
    Ok(stage)
}

fn parse_augmentation(text: &str) -> Result<Augmentation, PipelineError> {
    match text.to_ascii_uppercase().as_str() {
        "WA" => Ok(Augmentation::Wa),
        "NA" => Ok(Augmentation::Na),
        other => Err(PipelineError::InvalidParam(format!("augmentation must be WA or NA, got {other}"))),
    }
}

fn parse_normalization(text: &str) -> Result<Normalization, PipelineError> {
    match text.to_ascii_uppercase().as_str() {
        "WN" => Ok(Normalization::Wn),
        "NN" => Ok(Normalization::Nn),
        other => Err(PipelineError::InvalidParam(format!("normalization must be WN or NN, got {other}"))),
    }
}

/// Parse a versioned TOML pipeline config. Unknown stage names and
/// out-of-range parameters are rejected; an empty stage list is the
/// identity (raw RGB) pipeline.
pub fn parse_config(text: &str) -> Result<PipelineConfig, PipelineError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| PipelineError::Parse(e.to_string()))?;
    if raw.version != CONFIG_VERSION {
        return Err(PipelineError::Parse(format!("unsupported config version {}", raw.version)));
    }
    let defaults = PipelineConfig::default();
    let stages: Vec<Stage> = raw.stages.iter().map(typed_stage).collect::<Result<_, _>>()?;
    let conversions = stages
        .iter()
        .filter(|s| matches!(s, Stage::ToHsv | Stage::ToLab | Stage::ToYcbcr))
        .count();
    if conversions > 1 {
        return Err(PipelineError::InvalidParam(
            "at most one color-space conversion per pipeline".into(),
        ));
    }
    Ok(PipelineConfig {
        stages,
        augmentation: raw
            .augmentation
            .as_deref()
            .map(parse_augmentation)
            .transpose()?
            .unwrap_or(defaults.augmentation),
        normalization: raw
            .normalization
            .as_deref()
            .map(parse_normalization)
            .transpose()?
            .unwrap_or(defaults.normalization),
        seed: raw.seed.unwrap_or(defaults.seed),
        ratios: raw.ratios.unwrap_or(defaults.ratios),
    })
}

/// Run a raster through a stage list, in order.
pub fn apply_stages(r: &Raster8, stages: &[Stage]) -> Result<Raster8, PipelineError> {
    let mut current = r.clone();
    for stage in stages {
        current = match stage {
            Stage::Resize { width, height } => resize_bilinear(&current, *width, *height),
            Stage::ToHsv => rgb_to_hsv(&current)?,
            Stage::ToLab => rgb_to_lab(&current)?,
            Stage::ToYcbcr => rgb_to_ycbcr(&current)?,
            Stage::QuantizeFull { levels } => quantize_full(&current, *levels)?,
            Stage::QuantizePlane { levels } => quantize_plane(&current, *levels)?,
            Stage::HistEq => hist_equalize(&current),
            Stage::Lcn { params } => local_contrast_normalize(&current, params)?,
        };
    }
    Ok(current)
}

/// Tensor file path corresponding to a processed image path
/// (`images/<class>/<stem>.png` → `tensors/<class>/<stem>.fpp1`).
pub fn tensor_relpath(image_relpath: &str) -> String {
    let trimmed = image_relpath.strip_prefix("images/").unwrap_or(image_relpath);
    let stem = trimmed.rsplit_once('.').map(|(s, _)| s).unwrap_or(trimmed);
    format!("tensors/{stem}.fpp1")
}

/// Everything a pipeline run leaves behind.
#[derive(Debug)]
pub struct PipelineOutput {
    /// Augmented manifest rooted at the output directory.
    pub manifest: DatasetManifest,
    /// Training statistics (present when normalization = WN).
    pub stats: Option<StandardizationStats>,
}

struct WorkItem {
    source_rel: String,
    class: String,
    split: SplitKind,
    augment: bool,
}

struct ProcessedEntry {
    entry: ManifestEntry,
    analysis_rows: Vec<String>,
    stats: Option<StatsAccumulator>,
}

const SHIFT_NAMES: [&str; 4] = ["right", "left", "down", "up"];

fn process_one(
    raster: &Raster8,
    out_root: &Path,
    image_rel: String,
    class: &str,
    split: SplitKind,
    derived_from: Option<String>,
    stages: &[Stage],
) -> Result<ProcessedEntry, PipelineError> {
    let processed = apply_stages(raster, stages)?;
    save_image(&out_root.join(&image_rel), &processed)?;
    let mut analysis_rows = Vec::new();
    for c in 0..processed.channels() {
        let rep = homogeneity_report(&processed, c, Connectivity::Four)?;
        let base = format!("{image_rel},{c}");
        analysis_rows.push(format!("{base},equal_neighbor_fraction,{:.6}", rep.equal_neighbor_fraction));
        analysis_rows.push(format!("{base},glcm_homogeneity,{:.6}", rep.glcm_homogeneity));
        analysis_rows.push(format!("{base},distinct_levels,{}", rep.distinct_levels));
        analysis_rows.push(format!("{base},effective_bits,{}", rep.effective_bits));
        analysis_rows.push(format!("{base},entropy_bits,{:.6}", rep.entropy_bits));
    }
    let tensor = to_unit_tensor(&processed);
    tensor.write_file(&out_root.join(tensor_relpath(&image_rel)))?;
    let stats = if split == SplitKind::Train {
        let mut acc = StatsAccumulator::new();
        acc.push(&tensor);
        Some(acc)
    } else {
        None
    };
    Ok(ProcessedEntry {
        entry: ManifestEntry {
            path: image_rel,
            class: class.to_string(),
            split: Some(split),
            derived_from,
        },
        analysis_rows,
        stats,
    })
}

fn process_work_item(
    manifest: &DatasetManifest,
    item: &WorkItem,
    out_root: &Path,
    stages: &[Stage],
) -> Result<Vec<ProcessedEntry>, PipelineError> {
    let source_abs = Path::new(&manifest.root).join(&item.source_rel);
    let raster = load_image(&source_abs).map_err(|e| at(&item.source_rel, e.into()))?;
    let stem = item
        .source_rel
        .rsplit('/')
        .next()
        .unwrap_or(&item.source_rel)
        .rsplit_once('.')
        .map(|(s, _)| s.to_string())
        .unwrap_or_else(|| item.source_rel.clone());
    let mut out = Vec::with_capacity(if item.augment { 5 } else { 1 });
    let image_rel = format!("images/{}/{}.png", item.class, stem);
    out.push(
        process_one(&raster, out_root, image_rel, &item.class, item.split, None, stages)
            .map_err(|e| at(&item.source_rel, e))?,
    );
    if item.augment {
        let shifted = translate_augment(&raster).map_err(|e| at(&item.source_rel, e.into()))?;
        for (raster, name) in shifted.iter().zip(SHIFT_NAMES) {
            let image_rel = format!("images/{}/{}.{}.png", item.class, stem, name);
            out.push(
                process_one(
                    raster,
                    out_root,
                    image_rel,
                    &item.class,
                    item.split,
                    Some(item.source_rel.clone()),
                    stages,
                )
                .map_err(|e| at(&item.source_rel, e))?,
            );
        }
    }
    Ok(out)
}

/// Process every manifest entry through the stage list and write the
/// results under `out_dir`:
///
/// * `images/<class>/…png` — processed rasters (pre-tensor);
/// * `tensors/<class>/…fpp1` — `[0, 1]`-scaled (and, under WN,
///   standardized) planar tensors;
/// * `analysis.csv` — one row per image per channel per metric;
/// * `manifest.toml` — the augmented manifest rooted at `out_dir`.
///
/// WA appends the four shifted copies of each training image; WN
/// standardizes all splits with training statistics accumulated in
/// manifest order. Identical inputs produce byte-identical outputs.
pub fn run_pipeline(
    manifest: &DatasetManifest,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<PipelineOutput, PipelineError> {
    if manifest.entries.iter().any(|e| e.split.is_none()) {
        return Err(PipelineError::UnsplitManifest);
    }
    for class in &manifest.classes {
        fs::create_dir_all(out_dir.join("images").join(class)).map_err(RasterError::from)?;
        fs::create_dir_all(out_dir.join("tensors").join(class)).map_err(RasterError::from)?;
    }
    let work: Vec<WorkItem> = manifest
        .entries
        .iter()
        .map(|e| WorkItem {
            source_rel: e.path.clone(),
            class: e.class.clone(),
            split: e.split.expect("checked above"),
            augment: config.augmentation == Augmentation::Wa && e.split == Some(SplitKind::Train),
        })
        .collect();

    let processed: Vec<Vec<ProcessedEntry>> = work
        .par_iter()
        .map(|item| process_work_item(manifest, item, out_dir, &config.stages))
        .collect::<Result<_, _>>()?;

    let mut entries: Vec<ManifestEntry> = Vec::new();
    let mut analysis = String::from("path,channel,metric,value\n");
    let mut acc = StatsAccumulator::new();
    let mut seen = std::collections::HashSet::new();
    for group in processed {
        for p in group {
            // sources like img.png and img.ppm would land on one output
            if !seen.insert(p.entry.path.clone()) {
                return Err(PipelineError::InvalidParam(format!(
                    "output filename collision at {}",
                    p.entry.path
                )));
            }
            entries.push(p.entry);
            for row in &p.analysis_rows {
                analysis.push_str(row);
                analysis.push('\n');
            }
            if let Some(partial) = p.stats {
                acc.merge(&partial);
            }
        }
    }
    fs::write(out_dir.join("analysis.csv"), analysis).map_err(RasterError::from)?;

    let out_manifest = DatasetManifest {
        version: manifest.version,
        root: out_dir.to_string_lossy().into_owned(),
        seed: manifest.seed,
        ratios: manifest.ratios,
        classes: manifest.classes.clone(),
        entries,
    };

    let stats = if config.normalization == Normalization::Wn {
        let stats = acc.finish()?;
        out_manifest
            .entries
            .par_iter()
            .try_for_each(|e| -> Result<(), PipelineError> {
                let path = out_dir.join(tensor_relpath(&e.path));
                let tensor = TensorF32::read_file(&path).map_err(|err| at(&e.path, err.into()))?;
                let standardized = standardize(&tensor, &stats).map_err(|err| at(&e.path, err.into()))?;
                standardized.write_file(&path).map_err(|err| at(&e.path, err.into()))?;
                Ok(())
            })?;
        Some(stats)
    } else {
        None
    };

    out_manifest.save(&out_dir.join("manifest.toml"))?;
    Ok(PipelineOutput { manifest: out_manifest, stats })
}

/// Load the tensors of a pipeline output back as labeled feature vectors,
/// grouped by split.
pub fn load_feature_set(manifest: &DatasetManifest) -> Result<FeatureSet, PipelineError> {
    let root = Path::new(&manifest.root);
    let mut set = FeatureSet {
        num_classes: manifest.classes.len(),
        ..FeatureSet::default()
    };
    for entry in &manifest.entries {
        let split = entry.split.ok_or(PipelineError::UnsplitManifest)?;
        let tensor = TensorF32::read_file(&root.join(tensor_relpath(&entry.path)))
            .map_err(|e| at(&entry.path, e.into()))?;
        let values = extract_features(&tensor);
        if set.dim == 0 {
            set.dim = values.len();
        } else if set.dim != values.len() {
            return Err(PipelineError::InvalidParam(format!(
                "inconsistent feature dimension at {}: {} vs {}",
                entry.path,
                values.len(),
                set.dim
            )));
        }
        let label = manifest
            .class_index(&entry.class)
            .ok_or_else(|| PipelineError::InvalidParam(format!("unknown class {}", entry.class)))?;
        let fv = FeatureVector { values, label };
        match split {
            SplitKind::Train => set.train.push(fv),
            SplitKind::Val => set.val.push(fv),
            SplitKind::Test => set.test.push(fv),
        }
    }
    Ok(set)
}

// ---------------------------------------------------------------------------
// Preprocessor presets and the grid runner

/// Stage list of a named preprocessor preset, or `None` for presets the
/// toolkit knows but cannot run (their defining references give no
/// formula).
pub fn preset_stages(name: &str) -> Result<Option<(String, Vec<Stage>)>, PipelineError> {
    let upper = name.to_ascii_uppercase();
    let known = |canonical: &str, stages: Vec<Stage>| Ok(Some((canonical.to_string(), stages)));
    match upper.as_str() {
        "RGB" => known("RGB", vec![]),
        "HSV" => known("HSV", vec![Stage::ToHsv]),
        "CIELAB" | "LAB" => known("CIELAB", vec![Stage::ToLab]),
        "YCBCR" => known("YCBCR", vec![Stage::ToYcbcr]),
        "HE" => known("HE", vec![Stage::HistEq]),
        "LN" | "LCN" => known("LN", vec![Stage::Lcn { params: LcnParams::default() }]),
        "RGBGELOG" | "CFSP" => Ok(None),
        _ => {
            if let Some(rest) = upper.strip_prefix("F-").or_else(|| upper.strip_prefix("P-")) {
                let digits = rest.strip_suffix("-LEVEL").unwrap_or(rest);
                let levels: usize = digits
                    .parse()
                    .map_err(|_| PipelineError::UnknownStage(name.to_string()))?;
                if !(1..=254).contains(&levels) {
                    return Err(PipelineError::InvalidParam(format!(
                        "preset {name}: levels {levels} outside [1, 254]"
                    )));
                }
                let canonical = format!("{}-{levels}-Level", &upper[..1]);
                let stage = if upper.starts_with('F') {
                    Stage::QuantizeFull { levels }
                } else {
                    Stage::QuantizePlane { levels }
                };
                Ok(Some((canonical, vec![stage])))
            } else {
                Err(PipelineError::UnknownStage(name.to_string()))
            }
        }
    }
}

/// Grid-run parameters: which presets to evaluate and how to train.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub presets: Vec<String>,
    pub seed: u64,
    /// Applied after the preset's own stages.
    pub resize: Option<(u32, u32)>,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            presets: vec!["RGB".into()],
            seed: 42,
            resize: None,
            epochs: 30,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGridConfig {
    version: u32,
    presets: Vec<String>,
    seed: Option<u64>,
    resize: Option<[u32; 2]>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
}

pub fn parse_grid_config(text: &str) -> Result<GridConfig, PipelineError> {
    let raw: RawGridConfig =
        toml::from_str(text).map_err(|e| PipelineError::Parse(e.to_string()))?;
    if raw.version != CONFIG_VERSION {
        return Err(PipelineError::Parse(format!("unsupported config version {}", raw.version)));
    }
    let defaults = GridConfig::default();
    if raw.presets.is_empty() {
        return Err(PipelineError::InvalidParam("grid needs at least one preset".into()));
    }
    for preset in &raw.presets {
        preset_stages(preset)?; // validate names up front
    }
    Ok(GridConfig {
        presets: raw.presets,
        seed: raw.seed.unwrap_or(defaults.seed),
        resize: raw.resize.map(|[w, h]| (w, h)),
        epochs: raw.epochs.unwrap_or(defaults.epochs),
        batch_size: raw.batch_size.unwrap_or(defaults.batch_size),
    })
}

const GRID_SETUPS: [(Augmentation, Normalization, &str); 4] = [
    (Augmentation::Wa, Normalization::Wn, "wa_wn"),
    (Augmentation::Wa, Normalization::Nn, "wa_nn"),
    (Augmentation::Na, Normalization::Wn, "na_wn"),
    (Augmentation::Na, Normalization::Nn, "na_nn"),
];

fn sanitize_dir(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

/// Run every preset × {WA, NA} × {WN, NN} cell: pipeline, training, Top-1
/// on the test split. Rows keep the preset order; unavailable presets
/// render as such instead of being dropped.
pub fn run_grid(
    manifest: &DatasetManifest,
    config: &GridConfig,
    work_dir: &Path,
) -> Result<RunReport, PipelineError> {
    let mut rows = Vec::with_capacity(config.presets.len());
    for preset in &config.presets {
        let Some((canonical, stages)) = preset_stages(preset)? else {
            rows.push(ReportRow::unavailable(preset.to_ascii_uppercase()));
            continue;
        };
        let mut cells = [0f64; 4];
        for (i, (augmentation, normalization, setup_name)) in GRID_SETUPS.iter().enumerate() {
            let mut all_stages = stages.clone();
            if let Some((w, h)) = config.resize {
                all_stages.push(Stage::Resize { width: w, height: h });
            }
            let cell_config = PipelineConfig {
                stages: all_stages,
                augmentation: *augmentation,
                normalization: *normalization,
                seed: config.seed,
                ratios: manifest.ratios.unwrap_or([0.70, 0.05, 0.25]),
            };
            let cell_dir = work_dir.join(sanitize_dir(&canonical)).join(setup_name);
            fs::create_dir_all(&cell_dir).map_err(RasterError::from)?;
            let output = run_pipeline(manifest, &cell_config, &cell_dir)?;
            let features = load_feature_set(&output.manifest)?;
            let train_cfg = TrainConfig {
                epochs: config.epochs,
                batch_size: config.batch_size,
                seed: config.seed,
                ..TrainConfig::default()
            };
            let outcome = train(&features, &train_cfg)?;
            cells[i] = evaluate(&outcome.model, &features.test)?;
        }
        rows.push(ReportRow::new(canonical, cells));
    }
    Ok(RunReport::new(rows, config.seed, FEATURE_NOTE))
}
