use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use lenspose_core::numerics::{AlignMode, Padding};

use crate::commands::{self, EvaluateArgs, GenToyArgs, ReconstructArgs, RunContext, SimulateArgs};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PaddingArg {
    Linear,
    Circular,
}

impl From<PaddingArg> for Padding {
    fn from(p: PaddingArg) -> Self {
        match p {
            PaddingArg::Linear => Padding::Linear,
            PaddingArg::Circular => Padding::Circular,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AlignArg {
    Similarity,
    Rigid,
}

#[derive(Debug, Parser)]
#[command(name = "lenspose", version, about = "Lensless human pose and shape pipelines")]
pub struct Cli {
    /// Pipeline config (`key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Convolution boundary handling; overrides the config.
    #[arg(long, global = true, value_enum)]
    pub padding: Option<PaddingArg>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate lensless measurements for every scene in a directory.
    Simulate {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        psf: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Gaussian noise standard deviation.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Wiener-deconvolve a measurement file or a directory of them.
    Reconstruct {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        psf: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1e6)]
        snr: f64,
        /// Also write an 8-bit PNG next to each output.
        #[arg(long)]
        png: bool,
    },
    /// Run the regression pipeline on one measurement.
    Infer {
        #[arg(long)]
        measurement: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare predictions with ground truth, paired by file name.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value = "lenspose")]
        label: String,
        #[arg(long, value_enum, default_value = "similarity")]
        align: AlignArg,
    },
    /// Finite-difference checks of every loss gradient.
    Gradcheck {
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
    /// Write the synthetic body model.
    GenToyModel {
        #[arg(long)]
        out: PathBuf,
        /// Also write toy decoder, regressors, PSF and a config here.
        #[arg(long)]
        pipeline_out: Option<PathBuf>,
        /// Use zero-residual regressors in the written pipeline.
        #[arg(long)]
        zero_regressors: bool,
        #[arg(long, default_value_t = 32)]
        psf_size: usize,
    },
}

/// Executes a parsed command line and returns its standard output.
pub fn run(cli: Cli) -> anyhow::Result<String> {
    let ctx = RunContext::new(cli.config, cli.seed, cli.padding.map(Padding::from))?;
    match &cli.command {
        Command::Simulate {
            scenes,
            psf,
            out,
            noise,
        } => commands::simulate(
            &ctx,
            &SimulateArgs {
                scenes,
                psf: psf.as_deref(),
                out,
                noise: *noise,
            },
        ),
        Command::Reconstruct {
            input,
            psf,
            out,
            snr,
            png,
        } => commands::reconstruct(
            &ctx,
            &ReconstructArgs {
                input,
                psf: psf.as_deref(),
                out,
                snr: *snr,
                png: *png,
            },
        ),
        Command::Infer { measurement, out } => commands::infer(&ctx, measurement, out),
        Command::Evaluate { pred, gt, label, align } => commands::evaluate(&EvaluateArgs {
            pred,
            gt,
            label,
            align: match align {
                AlignArg::Similarity => AlignMode::Similarity,
                AlignArg::Rigid => AlignMode::Rigid,
            },
        }),
        Command::Gradcheck {
            trials,
            corrupt_gradient,
        } => commands::gradcheck(&ctx, *trials, *corrupt_gradient),
        Command::GenToyModel {
            out,
            pipeline_out,
            zero_regressors,
            psf_size,
        } => commands::gen_toy_model(
            &ctx,
            &GenToyArgs {
                out,
                pipeline_out: pipeline_out.as_deref(),
                zero_regressors: *zero_regressors,
                psf_size: *psf_size,
            },
        ),
    }
}
