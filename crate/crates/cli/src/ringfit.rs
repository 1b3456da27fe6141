//! `ring-fit`: photorefraction ring measurement and diopter calibration.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use eyescreen::imagecore::io::load_gray;
use eyescreen::ringrefraction::{
    fit_refraction_model, measure_refraction, RefractionMeasurement, RingConfig, RingDiagnostics, DEFAULT_FEATURE_SCALE,
};
use eyescreen::synthgen::SynthTruth;
use eyescreen::{GrayImage, RefractionModel, RingGeometry};
use rayon::prelude::*;
use serde::Serialize;

use crate::common::{
    artifact_name, collect_inputs, describe, ensure_dir, is_hard, print_json, status_of, thread_pool, usage,
    write_json, write_jsonl, CommonArgs, Input, RunConfig, Status,
};
use crate::overlay::{Canvas, BLUE, GREEN, RED, YELLOW};

#[derive(Debug, Args)]
pub struct RingFitArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Ring images (PNG or PGM).
    pub inputs: Vec<PathBuf>,

    /// JSON-lines manifest from `synth`; adds its images and truth.
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    /// Refraction model file.
    #[arg(long, conflicts_with_all = ["fit", "fit_file", "published_model"])]
    pub model: Option<PathBuf>,

    /// Use the published coefficients (slope 0.1136, intercept 24.4738).
    #[arg(long, conflicts_with_all = ["fit", "fit_file"])]
    pub published_model: bool,

    /// Calibration pair `D,R`; repeat for each pair.
    #[arg(long, value_name = "D,R", allow_hyphen_values = true, value_parser = parse_pair)]
    pub fit: Vec<(f64, f64)>,

    /// JSON file holding an array of `[D, R]` calibration pairs.
    #[arg(long)]
    pub fit_file: Option<PathBuf>,

    /// Where to write the fitted model (default: `<out-dir>/model.json`).
    #[arg(long)]
    pub model_out: Option<PathBuf>,

    /// Feature units per pixel for a fitted model.
    #[arg(long)]
    pub feature_scale: Option<f64>,

    #[arg(long)]
    pub n_rays: Option<usize>,

    #[arg(long)]
    pub peak_fraction: Option<f64>,

    #[arg(long)]
    pub blur_sigma: Option<f64>,

    /// Skip Gauss-Newton refinement of the ellipse.
    #[arg(long)]
    pub no_refine: bool,

    /// Write an overlay PNG per input.
    #[arg(long)]
    pub overlay: bool,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (d, r) = s.split_once(',').ok_or_else(|| format!("expected D,R, got `{s}`"))?;
    let d: f64 = d.trim().parse().map_err(|e| format!("bad diopter `{d}`: {e}"))?;
    let r: f64 = r.trim().parse().map_err(|e| format!("bad feature `{r}`: {e}"))?;
    Ok((d, r))
}

#[derive(Debug, Serialize)]
struct EffectiveConfig {
    ring: RingConfig,
    model: RefractionModel,
}

#[derive(Debug, Serialize)]
struct CalibrationEcho {
    model_file: String,
    abs_errors: Vec<f64>,
    mean_abs_error: f64,
}

#[derive(Debug, Serialize)]
struct Record {
    path: String,
    status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    diopters: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    feature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    geometry: Option<RingGeometry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostics: Option<RingDiagnostics<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truth_diopters: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    abs_error: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Summary {
    command: &'static str,
    config: EffectiveConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    calibration: Option<CalibrationEcho>,
    count: usize,
    succeeded: usize,
    failed: usize,
    hard_failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_abs_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_abs_error: Option<f64>,
}

fn draw(img: &GrayImage, m: &RefractionMeasurement<f64>) -> Canvas {
    let mut c = Canvas::from_gray(img);
    let g = &m.geometry;
    for s in &g.samples {
        c.line(m.diagnostics.seed, s.peak_point, GREEN);
    }
    c.ellipse(g.center, g.semi_major, g.semi_minor, g.rotation, BLUE);
    for s in &g.samples {
        c.set(s.peak_point.0.round() as i64, s.peak_point.1.round() as i64, RED);
    }
    c.cross(g.center, 5.0, YELLOW);
    c
}

type Outcome = (Record, bool, Option<Canvas>);

fn run_one(input: &Input<f64>, cfg: &EffectiveConfig, overlay: bool) -> Outcome {
    let mut rec = Record {
        path: input.label.clone(),
        status: Status::Ok,
        diopters: None,
        feature: None,
        geometry: None,
        diagnostics: None,
        error: None,
        truth_diopters: input.truth,
        abs_error: None,
    };
    let result = load_gray::<f64>(&input.path).and_then(|img| {
        let m = measure_refraction(&img, &cfg.model, &cfg.ring)?;
        Ok((img, m))
    });
    match result {
        Ok((img, m)) => {
            let canvas = overlay.then(|| draw(&img, &m));
            rec.abs_error = input.truth.map(|t| (m.diopters - t).abs());
            rec.diopters = Some(m.diopters);
            rec.feature = Some(m.feature);
            rec.geometry = Some(m.geometry);
            rec.diagnostics = Some(m.diagnostics);
            (rec, false, canvas)
        }
        Err(e) => {
            rec.status = status_of(&e);
            rec.error = Some(describe(&e));
            (rec, is_hard(&e), None)
        }
    }
}

pub fn run(args: RingFitArgs) -> Result<bool> {
    let file = RunConfig::load(args.common.config.as_deref())?;
    let mut ring = file.ring;
    if let Some(v) = args.n_rays {
        ring.scan.n_rays = v;
    }
    if let Some(v) = args.peak_fraction {
        ring.scan.peak_fraction = v;
    }
    if let Some(v) = args.blur_sigma {
        ring.blur_sigma = v;
    }
    if args.no_refine {
        ring.refine = false;
    }
    ring.validate()?;
    let out = &args.common.out_dir;
    ensure_dir(out)?;

    let mut pairs = args.fit.clone();
    if let Some(path) = &args.fit_file {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let more: Vec<(f64, f64)> =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        pairs.extend(more);
    }
    let mut calibration = None;
    let model = if !pairs.is_empty() {
        let scale = args.feature_scale.unwrap_or(DEFAULT_FEATURE_SCALE);
        let c = fit_refraction_model(&pairs, scale)?;
        let path = args.model_out.clone().unwrap_or_else(|| out.join("model.json"));
        c.model.save(&path)?;
        calibration = Some(CalibrationEcho {
            model_file: path
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default(),
            abs_errors: c.abs_errors,
            mean_abs_error: c.mean_abs_error,
        });
        c.model
    } else if let Some(path) = &args.model {
        RefractionModel::load(path)?
    } else if args.published_model {
        let mut m = RefractionModel::published();
        if let Some(s) = args.feature_scale {
            m.feature_scale = s;
        }
        m
    } else {
        return Err(usage(
            "ring-fit needs --model, --published-model, or calibration pairs via --fit/--fit-file",
        ));
    };
    let cfg = EffectiveConfig { ring, model };

    let inputs = collect_inputs(&args.inputs, args.manifest.as_deref(), |t| match t {
        SynthTruth::Ring(r) => Some(r.diopters),
        SynthTruth::Eye(_) => None,
    })?;
    let pool = thread_pool(args.common.jobs.or(file.jobs))?;
    let results: Vec<Outcome> = pool.install(|| inputs.par_iter().map(|i| run_one(i, &cfg, args.overlay)).collect());

    let mut records = Vec::with_capacity(results.len());
    let mut hard = 0;
    for (i, (rec, h, canvas)) in results.into_iter().enumerate() {
        if let Some(c) = canvas {
            c.save(&out.join(artifact_name(i, &inputs[i].path, "_overlay.png")))?;
        }
        if h {
            eprintln!("error: {}", rec.error.as_deref().unwrap_or("unknown"));
            hard += 1;
        }
        records.push(rec);
    }
    let errs: Vec<f64> = records.iter().filter_map(|r| r.abs_error).collect();
    let succeeded = records.iter().filter(|r| r.status == Status::Ok).count();
    let summary = Summary {
        command: "ring-fit",
        config: cfg,
        calibration,
        count: records.len(),
        succeeded,
        failed: records.len() - succeeded,
        hard_failures: hard,
        mean_abs_error: (!errs.is_empty()).then(|| eyescreen::scalar::pairwise_sum(&errs) / errs.len() as f64),
        max_abs_error: errs.iter().copied().reduce(f64::max),
    };
    if !records.is_empty() {
        write_jsonl(&out.join("ring.jsonl"), &records)?;
    }
    write_json(&out.join("ring_summary.json"), &summary)?;
    print_json(&summary)?;
    Ok(hard == 0)
}
