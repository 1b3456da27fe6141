//! `synth`: deterministic synthetic corpora with a JSON-lines manifest.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use eyescreen::synthgen::{
    corpus_file_name, corpus_spec, regenerate_from_manifest, write_manifest, write_record, CorpusConfig, CorpusKind,
    CorpusSummary, ImageFormat, ManifestRecord, MANIFEST_FILE,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::common::{ensure_dir, print_json, thread_pool, usage, write_json, CommonArgs, RunConfig};

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Corpus TOML (`kind`, `count`, `seed`, `format`, `[eye]`, `[ring]`).
    #[arg(long)]
    pub corpus: Option<PathBuf>,

    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<CorpusKind>,

    #[arg(long)]
    pub count: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Additive Gaussian noise sigma for the selected kind.
    #[arg(long)]
    pub noise_sigma: Option<f64>,

    #[arg(long, value_parser = parse_format)]
    pub format: Option<ImageFormat>,

    /// Re-render every record of an existing manifest into the output directory.
    #[arg(long, conflicts_with_all = ["corpus", "kind", "count", "seed", "noise_sigma", "format"])]
    pub regenerate: Option<PathBuf>,
}

fn parse_kind(s: &str) -> std::result::Result<CorpusKind, String> {
    match s {
        "eye" => Ok(CorpusKind::Eye),
        "ring" => Ok(CorpusKind::Ring),
        _ => Err(format!("unknown corpus kind `{s}` (eye, ring)")),
    }
}

fn parse_format(s: &str) -> std::result::Result<ImageFormat, String> {
    match s {
        "png" => Ok(ImageFormat::Png),
        "pgm" => Ok(ImageFormat::Pgm),
        _ => Err(format!("unknown image format `{s}` (png, pgm)")),
    }
}

#[derive(Debug, Serialize)]
struct Generated {
    command: &'static str,
    #[serde(flatten)]
    summary: CorpusSummary,
}

#[derive(Debug, Serialize)]
struct Regenerated {
    command: &'static str,
    source: String,
    manifest: &'static str,
    manifest_sha256: String,
}

pub fn run(args: SynthArgs) -> Result<bool> {
    let out = &args.common.out_dir;
    ensure_dir(out)?;
    if let Some(src) = &args.regenerate {
        if src
            .parent()
            .is_some_and(|p| p.canonicalize().ok() == out.canonicalize().ok())
        {
            return Err(usage(
                "--regenerate needs an output directory other than the manifest's",
            ));
        }
        let hash = regenerate_from_manifest(src, out)?;
        let report = Regenerated {
            command: "synth",
            source: src.display().to_string(),
            manifest: MANIFEST_FILE,
            manifest_sha256: hash,
        };
        write_json(&out.join("corpus.json"), &report)?;
        print_json(&report)?;
        return Ok(true);
    }

    let file = RunConfig::load(args.common.config.as_deref())?;
    let mut cfg = match &args.corpus {
        Some(p) => CorpusConfig::load(p)?,
        None => CorpusConfig::default(),
    };
    if let Some(k) = args.kind {
        cfg.kind = k;
    }
    if let Some(c) = args.count {
        cfg.count = c;
    }
    if let Some(s) = args.seed.or(file.seed) {
        cfg.seed = s;
    }
    if let Some(f) = args.format {
        cfg.format = f;
    }
    if let Some(n) = args.noise_sigma {
        match cfg.kind {
            CorpusKind::Eye => cfg.eye.noise_sigma = n,
            CorpusKind::Ring => cfg.ring.noise_sigma = n,
        }
    }
    cfg.validate()?;

    let pool = thread_pool(args.common.jobs.or(file.jobs))?;
    let records: Vec<ManifestRecord> = pool.install(|| {
        (0..cfg.count)
            .into_par_iter()
            .map(|i| write_record(&corpus_spec(&cfg, i), out, &corpus_file_name(&cfg, i)))
            .collect::<eyescreen::Result<Vec<_>>>()
    })?;
    let hash = write_manifest(out, &records)?;
    let summary = Generated {
        command: "synth",
        summary: CorpusSummary {
            count: records.len(),
            manifest: MANIFEST_FILE.to_string(),
            manifest_sha256: hash,
            config: cfg,
        },
    };
    write_json(&out.join("corpus.json"), &summary)?;
    print_json(&summary)?;
    Ok(true)
}
