//! `quality`: per-image quality metrics with a CSV corpus table.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use eyescreen::evalmetrics::{quality_report, HIGH_BAND_FRACTION};
use eyescreen::imagecore::io::load_gray;
use eyescreen::scalar::pairwise_sum;
use eyescreen::QualityReport;
use rayon::prelude::*;
use serde::Serialize;

use crate::common::{
    collect_inputs, describe, ensure_dir, is_hard, print_json, status_of, thread_pool, usage, write_json, write_jsonl,
    CommonArgs, Input, RunConfig, Status,
};

#[derive(Debug, Args)]
pub struct QualityArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Input images (PNG or PGM).
    pub inputs: Vec<PathBuf>,

    /// JSON-lines manifest from `synth`; adds its images.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Record {
    path: String,
    status: Status,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    quality: Option<QualityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct Means {
    brightness: f64,
    rms_contrast: f64,
    /// Mean over images with a defined SNR.
    snr_db: Option<f64>,
    spatial_sharpness: f64,
    frequency_sharpness: f64,
}

#[derive(Debug, Serialize)]
struct Config {
    high_band_fraction_of_nyquist: f64,
}

#[derive(Debug, Serialize)]
struct Summary {
    command: &'static str,
    config: Config,
    count: usize,
    succeeded: usize,
    failed: usize,
    hard_failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean: Option<Means>,
}

fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

fn write_csv(path: &Path, records: &[Record]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record([
        "path",
        "status",
        "brightness",
        "rms_contrast",
        "snr_db",
        "spatial_sharpness",
        "frequency_sharpness",
    ])?;
    for r in records {
        let status = match r.status {
            Status::Ok => "ok",
            Status::Failed => "failed",
            Status::Error => "error",
        };
        let mut row = vec![r.path.clone(), status.to_string()];
        match &r.quality {
            Some(q) => row.extend([
                q.brightness.to_string(),
                q.rms_contrast.to_string(),
                q.snr_db.map_or_else(|| "undefined".to_string(), |v| v.to_string()),
                q.spatial_sharpness.to_string(),
                q.frequency_sharpness.to_string(),
            ]),
            None => row.extend(std::iter::repeat_n(String::new(), 5)),
        }
        w.write_record(&row)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn run_one(input: &Input<()>) -> (Record, bool) {
    match load_gray::<f64>(&input.path).and_then(|img| quality_report(&img)) {
        Ok(q) => (
            Record {
                path: input.label.clone(),
                status: Status::Ok,
                quality: Some(q),
                error: None,
            },
            false,
        ),
        Err(e) => (
            Record {
                path: input.label.clone(),
                status: status_of(&e),
                quality: None,
                error: Some(describe(&e)),
            },
            is_hard(&e),
        ),
    }
}

pub fn run(args: QualityArgs) -> Result<bool> {
    let file = RunConfig::load(args.common.config.as_deref())?;
    let inputs = collect_inputs(&args.inputs, args.manifest.as_deref(), |_| Some(()))?;
    if inputs.is_empty() {
        return Err(usage("quality needs at least one image or --manifest"));
    }
    let out = &args.common.out_dir;
    ensure_dir(out)?;
    let pool = thread_pool(args.common.jobs.or(file.jobs))?;
    let results: Vec<(Record, bool)> = pool.install(|| inputs.par_iter().map(run_one).collect());

    let mut hard = 0;
    let mut records = Vec::with_capacity(results.len());
    for (r, h) in results {
        if h {
            eprintln!("error: {}", r.error.as_deref().unwrap_or("unknown"));
            hard += 1;
        }
        records.push(r);
    }
    let ok: Vec<&QualityReport> = records.iter().filter_map(|r| r.quality.as_ref()).collect();
    let field = |f: fn(&QualityReport) -> f64| mean(&ok.iter().map(|q| f(q)).collect::<Vec<_>>());
    let snrs: Vec<f64> = ok.iter().filter_map(|q| q.snr_db).collect();
    let means = (!ok.is_empty()).then(|| Means {
        brightness: field(|q| q.brightness),
        rms_contrast: field(|q| q.rms_contrast),
        snr_db: (!snrs.is_empty()).then(|| mean(&snrs)),
        spatial_sharpness: field(|q| q.spatial_sharpness),
        frequency_sharpness: field(|q| q.frequency_sharpness),
    });
    let summary = Summary {
        command: "quality",
        config: Config {
            high_band_fraction_of_nyquist: HIGH_BAND_FRACTION,
        },
        count: records.len(),
        succeeded: ok.len(),
        failed: records.len() - ok.len(),
        hard_failures: hard,
        mean: means,
    };
    write_jsonl(&out.join("quality.jsonl"), &records)?;
    write_csv(&out.join("quality.csv"), &records)?;
    write_json(&out.join("quality_summary.json"), &summary)?;
    print_json(&summary)?;
    Ok(hard == 0)
}
