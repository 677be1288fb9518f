//! Command-line front end for the faceprep toolkit.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data errors
//! (unreadable files, malformed configs, failed runs).

use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use faceprep::analysis::{homogeneity_report, Connectivity};
use faceprep::classifier::{evaluate, train, SoftmaxModel, TrainConfig};
use faceprep::dataset::{self, DatasetManifest, SplitKind};
use faceprep::pipeline::{
    load_feature_set, parse_config, parse_grid_config, run_grid, run_pipeline,
};
use faceprep::raster::load_image;
use faceprep::report::{
    check_reported_means, published_grey_level_table, render_report, ReportFormat, RunReport,
};

#[derive(Parser)]
#[command(name = "faceprep", version, about = "Face-identification preprocessing toolkit")]
struct Cli {
    /// Worker threads (defaults to the available parallelism)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for SplitKind {
    fn from(s: SplitArg) -> SplitKind {
        match s {
            SplitArg::Train => SplitKind::Train,
            SplitArg::Val => SplitKind::Val,
            SplitArg::Test => SplitKind::Test,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Markdown,
}

fn parse_ratios(text: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err("expected three comma-separated fractions, e.g. 0.70,0.05,0.25".into()),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Scan a class-per-directory image tree into a manifest
    Ingest {
        /// Dataset root: one subdirectory per identity
        #[arg(long)]
        root: PathBuf,
        /// Manifest file to write
        #[arg(long)]
        out: PathBuf,
        /// Keep only classes with strictly more than this many images
        #[arg(long)]
        min_images: Option<usize>,
    },
    /// Assign deterministic stratified train/val/test splits
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// train,val,test fractions
        #[arg(long, value_parser = parse_ratios, default_value = "0.70,0.05,0.25")]
        ratios: [f64; 3],
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Run a stage pipeline over a split manifest
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
        /// Pipeline config (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Homogeneity / bit-depth metrics for a directory of images
    Analyze {
        /// Directory scanned recursively for PNG/PPM/PGM files
        #[arg(long)]
        root: PathBuf,
        /// CSV file to write
        #[arg(long)]
        out: PathBuf,
        /// Neighbor structure: 4 or 8
        #[arg(long, default_value_t = 4)]
        connectivity: u32,
    },
    /// Train the softmax classifier on a preprocess output
    Train {
        /// Preprocess output directory (holds tensors/ and manifest.toml)
        #[arg(long)]
        features: PathBuf,
        /// Manifest override (defaults to <features>/manifest.toml)
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Model output directory
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
    },
    /// Top-1 accuracy of a saved model on one split
    Evaluate {
        /// Model directory written by `train`
        #[arg(long)]
        model: PathBuf,
        /// Preprocess output directory
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
    },
    /// Evaluate preprocessor presets under all four WA/NA x WN/NN setups
    Grid {
        #[arg(long)]
        manifest: PathBuf,
        /// Grid config (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Output directory for per-cell artifacts and the report
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a saved grid report (or the published reference table)
    Report {
        /// Report file written by `grid` (report.toml)
        #[arg(long, conflicts_with = "published")]
        input: Option<PathBuf>,
        /// Render the published grey-level reference table instead
        #[arg(long)]
        published: bool,
        #[arg(long, value_enum, default_value_t = FormatArg::Markdown)]
        format: FormatArg,
        /// Write to a file instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Check reported means against recomputed ones
        #[arg(long)]
        check: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), Box<dyn Error>> {
    match command {
        Command::Ingest { root, out, min_images } => {
            let mut manifest = dataset::ingest_directory(&root)?;
            let ingested = (manifest.classes.len(), manifest.entries.len());
            if let Some(threshold) = min_images {
                manifest = dataset::filter_min_images(&manifest, threshold)?;
            }
            manifest.save(&out)?;
            println!("ingested {} classes, {} images", ingested.0, ingested.1);
            if let Some(threshold) = min_images {
                println!(
                    "kept {} classes / {} images with more than {threshold} images",
                    manifest.classes.len(),
                    manifest.entries.len()
                );
                if threshold == dataset::DEFAULT_MIN_IMAGES
                    && (manifest.classes.len(), manifest.entries.len()) != (10, 1456)
                {
                    println!(
                        "note: the reference face-identification protocol reports 10 classes / 1456 images \
                         at this threshold; this dataset yields {} / {}",
                        manifest.classes.len(),
                        manifest.entries.len()
                    );
                }
            }
            for (class, count) in manifest.class_counts() {
                println!("  {class}: {count}");
            }
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Split { manifest, out, ratios, seed } => {
            let m = DatasetManifest::load(&manifest)?;
            let split = dataset::split(&m, ratios, seed)?;
            split.save(&out)?;
            println!("class            train   val  test");
            for (class, [train, val, test]) in split.split_counts() {
                println!("  {class:<14} {train:>5} {val:>5} {test:>5}");
            }
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Preprocess { manifest, config, out } => {
            let m = DatasetManifest::load(&manifest)?;
            let cfg = parse_config(&fs::read_to_string(&config)?)?;
            fs::create_dir_all(&out)?;
            let result = run_pipeline(&m, &cfg, &out)?;
            println!(
                "processed {} entries into {}",
                result.manifest.entries.len(),
                out.display()
            );
            if let Some(stats) = &result.stats {
                println!("standardized with training stats: mean {:?}", stats.mean());
            }
            Ok(())
        }
        Command::Analyze { root, out, connectivity } => {
            let conn = match connectivity {
                4 => Connectivity::Four,
                8 => Connectivity::Eight,
                other => return Err(format!("connectivity must be 4 or 8, got {other}").into()),
            };
            let mut files = Vec::new();
            collect_images(&root, &mut files)?;
            files.sort();
            let mut csv = String::from("path,channel,metric,value\n");
            for path in &files {
                let img = load_image(path)?;
                let rel = path.strip_prefix(&root).unwrap_or(path).to_string_lossy().into_owned();
                for c in 0..img.channels() {
                    let rep = homogeneity_report(&img, c, conn)?;
                    let base = format!("{rel},{c}");
                    csv.push_str(&format!("{base},equal_neighbor_fraction,{:.6}\n", rep.equal_neighbor_fraction));
                    csv.push_str(&format!("{base},glcm_homogeneity,{:.6}\n", rep.glcm_homogeneity));
                    csv.push_str(&format!("{base},distinct_levels,{}\n", rep.distinct_levels));
                    csv.push_str(&format!("{base},effective_bits,{}\n", rep.effective_bits));
                    csv.push_str(&format!("{base},entropy_bits,{:.6}\n", rep.entropy_bits));
                }
            }
            fs::write(&out, csv)?;
            println!("analyzed {} images into {}", files.len(), out.display());
            Ok(())
        }
        Command::Train { features, manifest, out, seed, epochs, batch_size } => {
            let manifest_path = manifest.unwrap_or_else(|| features.join("manifest.toml"));
            let m = DatasetManifest::load(&manifest_path)?;
            let data = load_feature_set(&m)?;
            let cfg = TrainConfig { epochs, batch_size, seed, ..TrainConfig::default() };
            let outcome = train(&data, &cfg)?;
            println!(
                "trained {} iterations; best validation top1 = {:.4}",
                outcome.iterations, outcome.best_val_top1
            );
            outcome.model.save(&out, &cfg)?;
            println!("wrote model to {}", out.display());
            Ok(())
        }
        Command::Evaluate { model, features, manifest, split } => {
            let manifest_path = manifest.unwrap_or_else(|| features.join("manifest.toml"));
            let m = DatasetManifest::load(&manifest_path)?;
            let data = load_feature_set(&m)?;
            let (model, _) = SoftmaxModel::load(&model)?;
            let samples = match SplitKind::from(split) {
                SplitKind::Train => &data.train,
                SplitKind::Val => &data.val,
                SplitKind::Test => &data.test,
            };
            let top1 = evaluate(&model, samples)?;
            println!("top1 = {top1:.4}");
            Ok(())
        }
        Command::Grid { manifest, config, out } => {
            let m = DatasetManifest::load(&manifest)?;
            let cfg = parse_grid_config(&fs::read_to_string(&config)?)?;
            fs::create_dir_all(&out)?;
            let report = run_grid(&m, &cfg, &out)?;
            fs::write(out.join("report.toml"), report.to_toml_string())?;
            fs::write(out.join("report.csv"), render_report(&report, ReportFormat::Csv))?;
            fs::write(out.join("report.md"), render_report(&report, ReportFormat::Markdown))?;
            print!("{}", render_report(&report, ReportFormat::Markdown));
            println!("wrote report.toml / report.csv / report.md to {}", out.display());
            Ok(())
        }
        Command::Report { input, published, format, out, check } => {
            let report: RunReport = if published {
                published_grey_level_table()
            } else {
                let path = input.ok_or("pass --input <report.toml> or --published")?;
                RunReport::from_toml_str(&fs::read_to_string(&path)?)?
            };
            let fmt = match format {
                FormatArg::Csv => ReportFormat::Csv,
                FormatArg::Markdown => ReportFormat::Markdown,
            };
            let text = render_report(&report, fmt);
            match out {
                Some(path) => {
                    fs::write(&path, text)?;
                    println!("wrote {}", path.display());
                }
                None => print!("{text}"),
            }
            if check {
                let flags = check_reported_means(&report);
                if flags.is_empty() {
                    println!("all reported means match the recomputed values");
                } else {
                    for flag in flags {
                        println!("mean discrepancy: {flag}");
                    }
                }
            }
            Ok(())
        }
    }
}

fn collect_images(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_images(&path, out)?;
        } else if faceprep::raster::ImageFormat::from_extension(&path).is_some() {
            out.push(path);
        }
    }
    Ok(())
}
