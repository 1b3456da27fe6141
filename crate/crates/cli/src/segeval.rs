//! `segeval`: F1 and mIoU of a predicted label mask against ground truth.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use eyescreen::evalmetrics::{evaluate_segmentation, SegmentationReport};
use eyescreen::EyeClass;
use serde::Serialize;

use crate::common::{ensure_dir, load_mask, print_json, write_json, CommonArgs};

#[derive(Debug, Args)]
pub struct SegevalArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Predicted mask: JSON `{width, height, num_classes, labels}` or a
    /// PNG/PGM of class indices.
    #[arg(long)]
    pub pred: PathBuf,

    /// Ground-truth mask, same formats as `--pred`.
    #[arg(long)]
    pub truth: PathBuf,

    /// Class count for image masks.
    #[arg(long, default_value_t = EyeClass::COUNT)]
    pub num_classes: usize,
}

#[derive(Debug, Serialize)]
struct Report {
    command: &'static str,
    pred: String,
    truth: String,
    num_classes: usize,
    #[serde(flatten)]
    metrics: SegmentationReport<f64>,
}

pub fn run(args: SegevalArgs) -> Result<bool> {
    let pred = load_mask(&args.pred, args.num_classes)?;
    let truth = load_mask(&args.truth, args.num_classes)?;
    let metrics = evaluate_segmentation(&pred, &truth)?;
    let out = &args.common.out_dir;
    ensure_dir(out)?;
    let report = Report {
        command: "segeval",
        pred: args.pred.display().to_string(),
        truth: args.truth.display().to_string(),
        num_classes: pred.num_classes().max(truth.num_classes()),
        metrics,
    };
    write_json(&out.join("segeval.json"), &report)?;
    print_json(&report)?;
    Ok(true)
}
