//! `losses`: combined segmentation loss report and gradient verification.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use eyescreen::seglosses::{
    combined_loss, gradcheck, random_instance, signed_distance_map, GradcheckReport, LossBreakdown, LossWeights,
};
use eyescreen::ProbMap;
use serde::Serialize;

use crate::common::{ensure_dir, load_mask, print_json, usage, write_json, CommonArgs, RunConfig};

pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
pub const SURROGATE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Args)]
pub struct LossesArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Probability map JSON `{width, height, classes, values}`.
    #[arg(long)]
    pub pred: Option<PathBuf>,

    /// Ground-truth mask: JSON `{width, height, num_classes, labels}` or a
    /// PNG/PGM of class indices.
    #[arg(long)]
    pub truth: Option<PathBuf>,

    #[arg(long, default_value_t = 0)]
    pub epoch: usize,

    /// Total training epochs of the schedule.
    #[arg(long, default_value_t = 150)]
    pub total: usize,

    #[arg(long)]
    pub lambda1: Option<f64>,

    #[arg(long)]
    pub lambda2: Option<f64>,

    #[arg(long)]
    pub alpha_max: Option<f64>,

    #[arg(long)]
    pub band_tau: Option<f64>,

    #[arg(long)]
    pub target_class: Option<usize>,

    /// Write the target-class signed distance map as an SDM1 grid.
    #[arg(long)]
    pub sdm_out: Option<PathBuf>,

    /// Verify analytic gradients against central finite differences.
    #[arg(long)]
    pub gradcheck: bool,

    /// Seed for random gradient-check instances.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Number of random 8x8x4 instances checked when no inputs are given.
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
}

#[derive(Debug, Serialize)]
struct GradcheckEcho {
    step: f64,
    tolerance: f64,
    surrogate_tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    instances: Vec<GradcheckReport<f64>>,
    max_relative_error: f64,
    max_surrogate_error: Option<f64>,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct Report {
    command: &'static str,
    config: LossWeights,
    total_epochs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    losses: Option<LossBreakdown<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gradcheck: Option<GradcheckEcho>,
}

fn load_pred(path: &Path) -> Result<ProbMap> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn run(args: LossesArgs) -> Result<bool> {
    let file = RunConfig::load(args.common.config.as_deref())?;
    let mut w = file.losses;
    if let Some(v) = args.lambda1 {
        w.lambda1 = v;
    }
    if let Some(v) = args.lambda2 {
        w.lambda2 = v;
    }
    if let Some(v) = args.alpha_max {
        w.alpha_max = v;
    }
    if let Some(v) = args.band_tau {
        w.band_tau = v;
    }
    if let Some(v) = args.target_class {
        w.target_class = v;
    }
    w.validate()?;

    let inputs = match (&args.pred, &args.truth) {
        (Some(p), Some(t)) => {
            let pred = load_pred(p)?;
            let truth = load_mask(t, pred.classes())?;
            Some((pred, truth))
        }
        (None, None) => None,
        _ => return Err(usage("--pred and --truth must be given together")),
    };
    if inputs.is_none() && !args.gradcheck {
        return Err(usage("losses needs --pred and --truth, or --gradcheck"));
    }
    let out = &args.common.out_dir;
    ensure_dir(out)?;

    let mut losses = None;
    if let Some((pred, truth)) = &inputs {
        if w.target_class >= truth.num_classes() {
            return Err(usage(format!(
                "target class {} out of range for {} classes",
                w.target_class,
                truth.num_classes()
            )));
        }
        losses = Some(combined_loss(pred, truth, &w, args.epoch, args.total)?);
        if let Some(path) = &args.sdm_out {
            let mask = truth.class_mask(w.target_class);
            signed_distance_map::<f64>(&mask, truth.width(), truth.height())?.write_f32_grid(path)?;
        }
    } else if args.sdm_out.is_some() {
        return Err(usage("--sdm-out needs --truth"));
    }

    let mut check = None;
    if args.gradcheck {
        let (seed, reports) = match &inputs {
            Some((pred, truth)) => (None, vec![gradcheck(pred, truth, &w, GRADCHECK_STEP)?]),
            None => {
                if args.instances == 0 {
                    return Err(usage("--instances must be at least 1"));
                }
                let seed = args.seed.or(file.seed).unwrap_or(0);
                let reports = (0..args.instances as u64)
                    .map(|i| {
                        let (p, t) = random_instance(seed.wrapping_add(i), 8, 8, 4)?;
                        gradcheck(&p, &t, &w, GRADCHECK_STEP)
                    })
                    .collect::<eyescreen::Result<Vec<_>>>()?;
                (Some(seed), reports)
            }
        };
        let max_rel = reports.iter().map(|r| r.max_relative()).fold(0.0, f64::max);
        let max_sur = reports.iter().filter_map(|r| r.surrogate_abs).reduce(f64::max);
        let passed = max_rel <= GRADCHECK_TOLERANCE && max_sur.is_none_or(|s| s <= SURROGATE_TOLERANCE);
        check = Some(GradcheckEcho {
            step: GRADCHECK_STEP,
            tolerance: GRADCHECK_TOLERANCE,
            surrogate_tolerance: SURROGATE_TOLERANCE,
            seed,
            instances: reports,
            max_relative_error: max_rel,
            max_surrogate_error: max_sur,
            passed,
        });
    }
    let ok = check.as_ref().is_none_or(|c| c.passed);
    let report = Report {
        command: "losses",
        config: w,
        total_epochs: args.total,
        losses,
        gradcheck: check,
    };
    write_json(&out.join("losses.json"), &report)?;
    print_json(&report)?;
    if !ok {
        eprintln!("error: gradient check exceeded tolerance");
    }
    Ok(ok)
}
