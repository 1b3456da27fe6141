//! Options, configuration files and report writing shared by subcommands.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use eyescreen::imagecore::PreprocessConfig;
use eyescreen::pupilgeom::LocateConfig;
use eyescreen::ringrefraction::RingConfig;
use eyescreen::seglosses::LossWeights;
use eyescreen::{Error, LabelMask};
use serde::{Deserialize, Serialize};

pub const OUT_DIR_ENV: &str = "EYESCREEN_OUT_DIR";

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Directory for reports and generated files.
    #[arg(long, env = OUT_DIR_ENV, default_value = "eyescreen-out")]
    pub out_dir: PathBuf,

    /// TOML run configuration; command-line flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Worker threads for per-image processing (0 = all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    /// Present when input images are preprocessed before edge detection.
    pub preprocess: Option<PreprocessConfig>,
    pub locate: LocateConfig,
    pub ring: RingConfig,
    pub losses: LossWeights,
    pub mm_per_px: Option<f64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Invalid combination of arguments; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Errors that make a run fail rather than being recorded per image.
pub fn is_hard(e: &Error) -> bool {
    matches!(e.root(), Error::Io { .. } | Error::Codec { .. })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// Analysis ran but produced no result.
    Failed,
    /// Input could not be read.
    Error,
}

pub fn status_of(e: &Error) -> Status {
    if is_hard(e) {
        Status::Error
    } else {
        Status::Failed
    }
}

/// Error text including the stage chain.
pub fn describe(e: &Error) -> String {
    e.to_string()
}

pub fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .context("building thread pool")
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// One image to process: where to read it and how to name it in reports.
#[derive(Debug, Clone)]
pub struct Input<T> {
    pub path: PathBuf,
    pub label: String,
    pub truth: Option<T>,
}

/// Positional paths followed by manifest entries, in order. Manifest paths
/// are resolved against the manifest's directory.
pub fn collect_inputs<T>(
    paths: &[PathBuf],
    manifest: Option<&Path>,
    truth_of: impl Fn(&eyescreen::synthgen::SynthTruth) -> Option<T>,
) -> Result<Vec<Input<T>>> {
    let mut out: Vec<Input<T>> = paths
        .iter()
        .map(|p| Input {
            path: p.clone(),
            label: p.display().to_string(),
            truth: None,
        })
        .collect();
    if let Some(m) = manifest {
        let records = eyescreen::synthgen::read_manifest(m)?;
        let base = m.parent().unwrap_or_else(|| Path::new(""));
        for r in records {
            out.push(Input {
                path: base.join(&r.path),
                label: r.path.clone(),
                truth: truth_of(&r.truth),
            });
        }
    }
    Ok(out)
}

/// File stem used for per-input artifacts.
pub fn artifact_name(index: usize, path: &Path, suffix: &str) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("input");
    format!("{index:04}_{stem}{suffix}")
}

/// Label mask from JSON `{width, height, num_classes, labels}` or from a
/// PNG/PGM of class indices.
pub fn load_mask(path: &Path, classes: usize) -> Result<LabelMask> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
    } else {
        Ok(LabelMask::load_image(path, classes)?)
    }
}
