//! Manifest-driven batch runs and report files behind the `lgca` binary.
//!
//! A manifest is JSON:
//!
//! ```json
//! {
//!   "descriptions_path": "descriptions.json",
//!   "entries": [
//!     {"image_path": "img/tern.png", "true_label": "tern", "candidate_labels": ["swan", "tern"]}
//!   ]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory. The description
//! file maps each label to its description strings:
//! `{"swan": ["...", "..."], "tern": ["..."]}`.
//!
//! `classify` writes three files into the output directory:
//!
//! - `predictions.csv` with columns `image_id,true_label,predicted_label,correct,scores`,
//!   where `scores` is `label=sim` pairs joined by `;` in candidate order and
//!   every float has 9 significant digits;
//! - `traces.jsonl`, one `{"image_id","label","sim","steps"}` object per pair;
//! - `summary.json` with counts, accuracy and a `complete` flag.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::WeightedDescriptionSet;
use crate::bench::{csv_error, format_sig9, verify_bound, BenchMode, OpCounters};
use crate::config::RunConfig;
use crate::embedding::{EncoderHandle, EncoderSpec, RemoteOptions};
use crate::error::{Error, Result};
use crate::geometry::ImageFrame;
use crate::pipeline::{Lgca, LabelScore, SimilarityReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ENCODER: i32 = 3;
pub const EXIT_MANIFEST: i32 = 4;
pub const EXIT_BOUND: i32 = 5;

/// Environment variable that takes precedence over `--encoder`.
pub const ENCODER_ENV: &str = "LGCA_ENCODER";

/// An error paired with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: Error,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.error)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    fn config(error: Error) -> Self {
        Self { code: EXIT_CONFIG, error }
    }

    fn manifest(error: Error) -> Self {
        Self { code: EXIT_MANIFEST, error }
    }

    /// Classifies an error raised while running, by its root cause.
    fn runtime(error: Error) -> Self {
        let code = match error.root() {
            Error::EncoderUnavailable(_) | Error::Protocol(_) | Error::DimMismatch { .. } => EXIT_ENCODER,
            Error::Image { .. } | Error::Manifest(_) => EXIT_MANIFEST,
            Error::BoundViolated { .. } => EXIT_BOUND,
            Error::Config(_) | Error::DegenerateN(_) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        };
        Self { code, error }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub image_path: PathBuf,
    #[serde(default)]
    pub true_label: Option<String>,
    pub candidate_labels: Vec<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    pub descriptions_path: PathBuf,
}

pub type Descriptions = BTreeMap<String, Vec<String>>;

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl Manifest {
    /// Reads a manifest and resolves its paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Manifest(format!("cannot read manifest {}: {e}", path.display())))?;
        let mut manifest: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        manifest.descriptions_path = resolve(base, &manifest.descriptions_path);
        for entry in &mut manifest.entries {
            entry.image_path = resolve(base, &entry.image_path);
        }
        Ok(manifest)
    }

    /// Checks every entry against `descriptions` and the filesystem.
    pub fn validate(&self, descriptions: &Descriptions) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Manifest("manifest has no entries".into()));
        }
        for (i, entry) in self.entries.iter().enumerate() {
            if !entry.image_path.is_file() {
                return Err(Error::Manifest(format!(
                    "entry {i}: image not found: {}",
                    entry.image_path.display()
                )));
            }
            if entry.candidate_labels.is_empty() {
                return Err(Error::Manifest(format!("entry {i}: no candidate labels")));
            }
            for label in &entry.candidate_labels {
                match descriptions.get(label) {
                    Some(d) if !d.is_empty() => {}
                    Some(_) => return Err(Error::Manifest(format!("label '{label}' has no descriptions"))),
                    None => {
                        return Err(Error::Manifest(format!(
                            "entry {i}: label '{label}' missing from {}",
                            self.descriptions_path.display()
                        )))
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn load_descriptions(path: impl AsRef<Path>) -> Result<Descriptions> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Manifest(format!("cannot read descriptions {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))
}

/// Picks the encoder spec: environment first, then flag, then config.
pub fn resolve_encoder(flag: Option<&str>, config: &RunConfig) -> CliResult<EncoderSpec> {
    let env = std::env::var(ENCODER_ENV).ok().filter(|s| !s.is_empty());
    let chosen = env
        .as_deref()
        .or(flag)
        .or(config.encoder.as_deref())
        .ok_or_else(|| {
            CliError::config(Error::Config(format!(
                "no encoder given; pass --encoder or set {ENCODER_ENV}"
            )))
        })?;
    chosen.parse().map_err(CliError::config)
}

fn open_encoder(spec: &EncoderSpec, config: &RunConfig) -> CliResult<EncoderHandle> {
    let options = RemoteOptions {
        out_size: config.out_size,
        ..RemoteOptions::default()
    };
    EncoderHandle::open(spec, options).map_err(|e| match e {
        Error::Config(_) | Error::Json(_) | Error::InvalidParams(_) | Error::DimMismatch { .. } => {
            CliError::config(e)
        }
        other => CliError {
            code: EXIT_ENCODER,
            error: other,
        },
    })
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).map_err(CliError::config),
        None => Ok(RunConfig::default()),
    }
}

#[derive(Debug, Clone, Default)]
pub struct ClassifyArgs {
    pub manifest: PathBuf,
    pub config: Option<PathBuf>,
    pub encoder: Option<String>,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub complete: bool,
    pub images: usize,
    pub processed: usize,
    pub labeled: usize,
    pub correct: usize,
    pub accuracy: Option<f64>,
    pub encoder: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    image_id: &'a str,
    label: &'a str,
    sim: f64,
    steps: &'a [crate::pipeline::StepTrace],
}

pub const PREDICTIONS_HEADER: [&str; 5] = ["image_id", "true_label", "predicted_label", "correct", "scores"];

fn format_scores(scores: &[LabelScore]) -> String {
    scores
        .iter()
        .map(|s| format!("{}={}", s.label, format_sig9(s.sim)))
        .collect::<Vec<_>>()
        .join(";")
}

struct Outputs {
    predictions: csv::Writer<BufWriter<File>>,
    traces: BufWriter<File>,
}

impl Outputs {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let mut predictions = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("predictions.csv"))?));
        predictions.write_record(PREDICTIONS_HEADER).map_err(csv_error)?;
        let traces = BufWriter::new(File::create(dir.join("traces.jsonl"))?);
        Ok(Self { predictions, traces })
    }

    fn write(&mut self, entry: &ManifestEntry, report: &SimilarityReport) -> Result<Option<bool>> {
        let correct = entry.true_label.as_ref().map(|t| *t == report.predicted);
        self.predictions
            .write_record([
                report.image_id.as_str(),
                entry.true_label.as_deref().unwrap_or(""),
                report.predicted.as_str(),
                match correct {
                    Some(true) => "1",
                    Some(false) => "0",
                    None => "",
                },
                &format_scores(&report.scores),
            ])
            .map_err(csv_error)?;
        for s in &report.scores {
            let line = TraceLine {
                image_id: &report.image_id,
                label: &s.label,
                sim: s.sim,
                steps: &s.steps,
            };
            serde_json::to_writer(&mut self.traces, &line)?;
            self.traces.write_all(b"\n")?;
        }
        Ok(correct)
    }

    fn finish(mut self) -> Result<()> {
        self.predictions.flush()?;
        self.traces.flush()?;
        Ok(())
    }
}

fn write_summary(dir: &Path, summary: &Summary) -> Result<()> {
    let mut f = BufWriter::new(File::create(dir.join("summary.json"))?);
    serde_json::to_writer_pretty(&mut f, summary)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

/// Classifies every manifest entry and writes the report files.
///
/// Entries run on a worker pool; results are written in manifest order. On
/// the first failing entry, everything before it is still written and
/// `summary.json` records `"complete": false` with the error.
pub fn cmd_classify(args: &ClassifyArgs) -> CliResult<Summary> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate().map_err(CliError::config)?;
    let spec = resolve_encoder(args.encoder.as_deref(), &config)?;

    let manifest = Manifest::load(&args.manifest).map_err(CliError::manifest)?;
    let descriptions = load_descriptions(&manifest.descriptions_path).map_err(CliError::manifest)?;
    manifest.validate(&descriptions).map_err(CliError::manifest)?;

    let encoder = open_encoder(&spec, &config)?;
    let lgca = Lgca::new(config.lgca(), &encoder).map_err(CliError::config)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::config(Error::Config(format!("worker pool: {e}"))))?;

    let mut outputs = Outputs::create(&args.out).map_err(CliError::runtime)?;
    let mut summary = Summary {
        complete: false,
        images: manifest.entries.len(),
        processed: 0,
        labeled: 0,
        correct: 0,
        accuracy: None,
        encoder: spec.to_string(),
        seed: config.seed,
        error: None,
    };

    // descriptions depend only on the label, so embed each label once
    let used: std::collections::BTreeSet<&String> =
        manifest.entries.iter().flat_map(|e| &e.candidate_labels).collect();
    let described: Result<BTreeMap<&String, WeightedDescriptionSet>> = pool.install(|| {
        used.par_iter()
            .map(|&label| {
                let set = lgca.describe(label, &descriptions[label], &mut OpCounters::default())?;
                Ok((label, set))
            })
            .collect()
    });

    let failure = match described {
        Err(e) => Some(CliError::runtime(e)),
        Ok(described) => {
            let results: Vec<Result<SimilarityReport>> = pool.install(|| {
                manifest
                    .entries
                    .par_iter()
                    .map(|entry| {
                        let image = ImageFrame::load(&entry.image_path)?;
                        let candidates: Vec<(String, WeightedDescriptionSet)> = entry
                            .candidate_labels
                            .iter()
                            .map(|l| (l.clone(), described[l].clone()))
                            .collect();
                        lgca.classify(&image, &candidates, &mut OpCounters::default())
                    })
                    .collect()
            });
            let mut failure = None;
            for (entry, result) in manifest.entries.iter().zip(results) {
                match result.and_then(|report| outputs.write(entry, &report)) {
                    Ok(correct) => {
                        summary.processed += 1;
                        if let Some(c) = correct {
                            summary.labeled += 1;
                            summary.correct += usize::from(c);
                        }
                    }
                    Err(e) => {
                        failure = Some(CliError::runtime(e));
                        break;
                    }
                }
            }
            failure
        }
    };

    outputs.finish().map_err(CliError::runtime)?;
    summary.accuracy = (summary.labeled > 0).then(|| summary.correct as f64 / summary.labeled as f64);
    summary.complete = failure.is_none();
    summary.error = failure.as_ref().map(|f| f.error.to_string());
    write_summary(&args.out, &summary).map_err(CliError::runtime)?;
    match failure {
        Some(f) => Err(f),
        None => Ok(summary),
    }
}

#[derive(Debug, Clone)]
pub struct BenchArgs {
    pub n_grid: Vec<usize>,
    pub m_grid: Vec<usize>,
    pub trials: u64,
    pub mode: BenchMode,
    pub out: PathBuf,
}

impl Default for BenchArgs {
    fn default() -> Self {
        Self {
            n_grid: crate::bench::DEFAULT_N_GRID.to_vec(),
            m_grid: crate::bench::DEFAULT_M_GRID.to_vec(),
            trials: 1,
            mode: BenchMode::Lgca,
            out: PathBuf::from("."),
        }
    }
}

/// Runs the complexity check and writes `complexity.json` and `complexity.csv`.
pub fn cmd_bench(args: &BenchArgs) -> CliResult<crate::bench::ComplexityReport> {
    if let Some(&n) = args.n_grid.iter().find(|&&n| n < 2) {
        return Err(CliError::config(Error::DegenerateN(n)));
    }
    if args.m_grid.contains(&0) || args.trials == 0 || args.n_grid.is_empty() || args.m_grid.is_empty() {
        return Err(CliError::config(Error::Config(
            "bench needs non-empty grids, M >= 1 and trials >= 1".into(),
        )));
    }
    let report = verify_bound(&args.n_grid, &args.m_grid, args.trials, args.mode).map_err(CliError::runtime)?;
    let write = || -> Result<()> {
        fs::create_dir_all(&args.out)?;
        let mut json = BufWriter::new(File::create(args.out.join("complexity.json"))?);
        serde_json::to_writer_pretty(&mut json, &report)?;
        json.write_all(b"\n")?;
        json.flush()?;
        report.write_csv(BufWriter::new(File::create(args.out.join("complexity.csv"))?))
    };
    write().map_err(CliError::runtime)?;
    Ok(report)
}

#[derive(Debug, Clone, Default)]
pub struct TraceArgs {
    pub image: PathBuf,
    pub label: String,
    pub descriptions: PathBuf,
    pub config: Option<PathBuf>,
    pub encoder: Option<String>,
}

/// Scores one (image, label) pair and prints its step table.
pub fn cmd_trace<W: Write>(args: &TraceArgs, out: &mut W) -> CliResult<LabelScore> {
    let config = load_config(args.config.as_deref())?;
    let spec = resolve_encoder(args.encoder.as_deref(), &config)?;
    let descriptions = load_descriptions(&args.descriptions).map_err(CliError::manifest)?;
    let texts = descriptions.get(&args.label).ok_or_else(|| {
        CliError::manifest(Error::Manifest(format!(
            "label '{}' missing from {}",
            args.label,
            args.descriptions.display()
        )))
    })?;
    let image = ImageFrame::load(&args.image).map_err(CliError::manifest)?;
    let encoder = open_encoder(&spec, &config)?;
    let lgca = Lgca::new(config.lgca(), &encoder).map_err(CliError::config)?;

    let mut counters = OpCounters::default();
    let mut run = || -> Result<LabelScore> {
        let prepared = lgca.prepare(&image, &mut counters)?;
        let descs = lgca.describe(&args.label, texts, &mut counters)?;
        lgca.similarity(&prepared, &args.label, &descs, &mut counters)
    };
    let score = run().map_err(CliError::runtime)?;

    let print = |out: &mut W| -> std::io::Result<()> {
        writeln!(out, "image {}  label {}", image.id(), args.label)?;
        writeln!(out, "{:>4} {:>6} {:>6} {:>6} {:>14}", "j", "topK", "|C|in", "|C|out", "score")?;
        for s in &score.steps {
            writeln!(
                out,
                "{:>4} {:>6} {:>6} {:>6} {:>14}",
                s.step,
                s.topk,
                s.crops_in,
                s.crops_out,
                format_sig9(s.score)
            )?;
        }
        writeln!(out, "Sim = {}", format_sig9(score.sim))
    };
    print(out).map_err(|e| CliError::runtime(Error::Io(e)))?;
    Ok(score)
}
