//! `locate`: pupil center estimation over images or a synthetic corpus.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use eyescreen::evalmetrics::{ede, normalized_error, summarize_localization, LocalizationRecord, LocalizationSummary};
use eyescreen::imagecore::io::load_gray;
use eyescreen::imagecore::PreprocessConfig;
use eyescreen::pupilgeom::{alignment_offset, calibrate_scale, image_center, locate_pupil, LocateConfig, PupilReport};
use eyescreen::synthgen::SynthTruth;
use eyescreen::{GrayImage, PupilEstimate};
use rayon::prelude::*;
use serde::Serialize;

use crate::common::{
    artifact_name, collect_inputs, describe, ensure_dir, is_hard, print_json, status_of, thread_pool, write_json,
    write_jsonl, CommonArgs, Input, RunConfig, Status,
};
use crate::overlay::{Canvas, BLUE, GREEN, RED};

#[derive(Debug, Args)]
pub struct LocateArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Input images (PNG or PGM).
    pub inputs: Vec<PathBuf>,

    /// JSON-lines manifest from `synth`; adds its images and truth.
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    /// Write an overlay PNG per input.
    #[arg(long)]
    pub overlay: bool,

    #[arg(long)]
    pub canny_high_quantile: Option<f64>,

    #[arg(long)]
    pub canny_low_ratio: Option<f64>,

    #[arg(long)]
    pub canny_median_kernel: Option<usize>,

    #[arg(long)]
    pub min_contour_length: Option<usize>,

    /// Apply gamma correction and histogram equalization before edge
    /// detection (config `[preprocess]` supplies the parameters).
    #[arg(long)]
    pub preprocess: bool,

    /// Report radii in millimetres as well.
    #[arg(long)]
    pub mm_per_px: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct PreprocessEcho {
    #[serde(flatten)]
    params: PreprocessConfig,
    chain: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
struct EffectiveConfig {
    preprocess: Option<PreprocessEcho>,
    locate: LocateConfig,
    mm_per_px: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct TruthPoint {
    cx: f64,
    cy: f64,
    radius: f64,
}

#[derive(Debug, Serialize)]
struct Record {
    path: String,
    status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimate: Option<PupilReport<f64>>,
    /// Shift that brings the pupil center onto the image center.
    #[serde(skip_serializing_if = "Option::is_none")]
    offset: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truth: Option<TruthPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ede: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ne: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Summary {
    command: &'static str,
    config: EffectiveConfig,
    count: usize,
    succeeded: usize,
    failed: usize,
    hard_failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    localization: Option<LocalizationSummary<f64>>,
}

fn run_one(input: &Input<TruthPoint>, cfg: &EffectiveConfig) -> (Record, Option<(GrayImage, PupilEstimate)>, bool) {
    let mut rec = Record {
        path: input.label.clone(),
        status: Status::Ok,
        estimate: None,
        offset: None,
        error: None,
        truth: input.truth,
        ede: None,
        ne: None,
    };
    let result = load_gray::<f64>(&input.path).and_then(|img| {
        let work = match &cfg.preprocess {
            Some(p) => p.params.apply(&img)?,
            None => img,
        };
        let est = locate_pupil(&work, &cfg.locate)?;
        Ok((work, est))
    });
    match result {
        Ok((img, est)) => {
            let scale = cfg.mm_per_px.map(|s| calibrate_scale(1.0, s)).transpose();
            let scale = scale.ok().flatten();
            rec.estimate = Some(est.report(scale.as_ref()));
            rec.offset = Some(alignment_offset(&est, image_center(img.width(), img.height())));
            if let Some(t) = input.truth {
                let e = ede(&LocalizationRecord {
                    predicted: est.center,
                    truth: (t.cx, t.cy),
                    truth_radius: t.radius,
                });
                rec.ede = Some(e);
                rec.ne = normalized_error(e, t.radius).ok();
            }
            (rec, Some((img, est)), false)
        }
        Err(e) => {
            rec.status = status_of(&e);
            rec.error = Some(describe(&e));
            (rec, None, is_hard(&e))
        }
    }
}

fn draw(img: &GrayImage, est: &PupilEstimate) -> Canvas {
    let mut c = Canvas::from_gray(img);
    for &(x, y) in &est.contour.points {
        c.set(x as i64, y as i64, RED);
    }
    c.cross(est.center, 6.0, GREEN);
    c.cross(image_center(img.width(), img.height()), 4.0, BLUE);
    c
}

pub fn run(args: LocateArgs) -> Result<bool> {
    let file = RunConfig::load(args.common.config.as_deref())?;
    let mut locate = file.locate.clone();
    if let Some(v) = args.canny_high_quantile {
        locate.canny.high_quantile = v;
    }
    if let Some(v) = args.canny_low_ratio {
        locate.canny.low_ratio = v;
    }
    if let Some(v) = args.canny_median_kernel {
        locate.canny.median_kernel = v;
    }
    if let Some(v) = args.min_contour_length {
        locate.min_contour_length = v;
    }
    locate.canny.validate()?;
    let preprocess = match (&file.preprocess, args.preprocess) {
        (Some(p), _) => Some(p.clone()),
        (None, true) => Some(PreprocessConfig::default()),
        (None, false) => None,
    };
    if let Some(p) = &preprocess {
        p.validate()?;
    }
    let cfg = EffectiveConfig {
        preprocess: preprocess.map(|p| PreprocessEcho {
            chain: p.chain(),
            params: p,
        }),
        locate,
        mm_per_px: args.mm_per_px.or(file.mm_per_px),
    };

    let inputs = collect_inputs(&args.inputs, args.manifest.as_deref(), |t| match t {
        SynthTruth::Eye(e) => Some(TruthPoint {
            cx: e.pupil_center.0,
            cy: e.pupil_center.1,
            radius: e.pupil_radius,
        }),
        SynthTruth::Ring(_) => None,
    })?;
    if inputs.is_empty() {
        return Err(crate::common::usage("locate needs at least one image or --manifest"));
    }
    let out = &args.common.out_dir;
    ensure_dir(out)?;
    let pool = thread_pool(args.common.jobs.or(file.jobs))?;
    let overlay = args.overlay;
    let results: Vec<(Record, bool, Option<String>)> = pool.install(|| {
        inputs
            .par_iter()
            .enumerate()
            .map(|(i, input)| {
                let (rec, found, hard) = run_one(input, &cfg);
                let mut overlay_err = None;
                if overlay {
                    if let Some((img, est)) = &found {
                        let path = out.join(artifact_name(i, &input.path, "_overlay.png"));
                        if let Err(e) = draw(img, est).save(&path) {
                            overlay_err = Some(e.to_string());
                        }
                    }
                }
                (rec, hard, overlay_err)
            })
            .collect()
    });

    let mut records = Vec::with_capacity(results.len());
    let mut hard = 0;
    for (rec, h, overlay_err) in results {
        if let Some(e) = overlay_err {
            anyhow::bail!("writing overlay: {e}");
        }
        if h {
            eprintln!("error: {}", rec.error.as_deref().unwrap_or("unknown"));
            hard += 1;
        }
        records.push(rec);
    }
    let loc: Vec<LocalizationRecord<f64>> = records
        .iter()
        .filter_map(|r| {
            let (t, e) = (r.truth?, r.estimate.as_ref()?);
            Some(LocalizationRecord {
                predicted: (e.cx, e.cy),
                truth: (t.cx, t.cy),
                truth_radius: t.radius,
            })
        })
        .collect();
    let succeeded = records.iter().filter(|r| r.status == Status::Ok).count();
    let summary = Summary {
        command: "locate",
        config: cfg,
        count: records.len(),
        succeeded,
        failed: records.len() - succeeded,
        hard_failures: hard,
        localization: if loc.is_empty() {
            None
        } else {
            Some(summarize_localization(&loc)?)
        },
    };
    write_jsonl(&out.join("locate.jsonl"), &records)?;
    write_json(&out.join("locate_summary.json"), &summary)?;
    print_json(&summary)?;
    Ok(hard == 0)
}
