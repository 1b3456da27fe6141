//! `eyescreen`: batch pupil localization, photorefraction, loss and metric
//! reports over images and synthetic corpora.

mod common;
mod locate;
mod losses;
mod overlay;
mod quality;
mod ringfit;
mod segeval;
mod synth;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::common::UsageError;

#[derive(Debug, Parser)]
#[command(name = "eyescreen", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate pupil centers; with a manifest, score them against truth.
    Locate(locate::LocateArgs),
    /// Measure photorefraction rings and convert them to diopters.
    RingFit(ringfit::RingFitArgs),
    /// Report the combined segmentation loss or check its gradients.
    Losses(losses::LossesArgs),
    /// Brightness, contrast, SNR and sharpness per image.
    Quality(quality::QualityArgs),
    /// F1 and mIoU of a predicted mask.
    Segeval(segeval::SegevalArgs),
    /// Generate a synthetic corpus or regenerate one from its manifest.
    Synth(synth::SynthArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Locate(a) => locate::run(a),
        Command::RingFit(a) => ringfit::run(a),
        Command::Losses(a) => losses::run(a),
        Command::Quality(a) => quality::run(a),
        Command::Segeval(a) => segeval::run(a),
        Command::Synth(a) => synth::run(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
