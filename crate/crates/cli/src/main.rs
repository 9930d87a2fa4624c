mod commands;
mod setup;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eccfm::backbone::BackboneKind;
use eccfm::channel::ChannelKind;
use eccfm::harness::DecoderKind;
use eccfm::trainer::{ConditionKind, Objective};

/// Desk-scale consistency-flow decoding of binary linear block codes.
#[derive(Debug, Parser)]
#[command(name = "eccfm", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a neural decoder and write a checkpoint.
    Train(TrainArgs),
    /// Monte-Carlo BER/FER of one decoder.
    Eval(EvalArgs),
    /// Throughput table and DDECC step statistics.
    Bench(BenchArgs),
    /// Per-step (e_hard, e_soft) trajectories of a DDECC decoder.
    Trace(TraceArgs),
    /// Run the built-in property checks.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML experiment config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in code id (hamming74, rep2) or a path to an alist or dense matrix file.
    #[arg(long)]
    pub code: Option<String>,
    #[arg(long)]
    pub channel: Option<ChannelKind>,
    #[arg(long)]
    pub ebn0: Option<f64>,
    /// Noise standard deviation, bypassing the Eb/N0 conversion.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; defaults to $ECCFM_OUT_DIR, then the config value.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DecoderArgs {
    #[arg(long)]
    pub decoder: Option<DecoderKind>,
    /// Checkpoint of the neural decoder.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub condition: Option<ConditionKind>,
    #[arg(long)]
    pub bp_iters: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub n_steps: Option<usize>,
    #[arg(long)]
    pub renoise_fraction: Option<f64>,
    /// Diffusion step increment used by multi-step and DDECC decoding.
    /// Defaults to the value saved beside the checkpoint.
    #[arg(long)]
    pub beta_step: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lr_final: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub ema_decay: Option<f64>,
    #[arg(long)]
    pub objective: Option<Objective>,
    #[arg(long)]
    pub condition: Option<ConditionKind>,
    #[arg(long)]
    pub backbone: Option<BackboneKind>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// A number, or `auto` for the smallest increment whose schedule covers
    /// the channel noise at --ebn0. Without a config file the default is `auto`.
    #[arg(long)]
    pub beta_step: Option<String>,
    #[arg(long)]
    pub steps_override: Option<usize>,
    #[arg(long)]
    pub syndrome_sigma: Option<f64>,
    /// Train on random codewords instead of the all-zero word.
    #[arg(long)]
    pub random_codewords: bool,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Also write the checkpoint every this many epochs.
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub decoder: DecoderArgs,
    #[arg(long)]
    pub min_frame_errors: Option<u64>,
    #[arg(long)]
    pub max_frames: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub chunk: Option<usize>,
    #[arg(long)]
    pub zero_codeword: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub decoder: DecoderArgs,
    /// Decoders to time, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "eccfm,ddecc,bp")]
    pub decoders: Vec<DecoderKind>,
    /// Noise-head checkpoint for DDECC when --checkpoint holds the one-step model.
    #[arg(long)]
    pub noise_checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub frames: Option<u64>,
    #[arg(long)]
    pub warmup_frames: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Eb/N0 points for the DDECC step statistics, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2,4,6")]
    pub sweep: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub decoder: DecoderArgs,
    #[arg(long, default_value_t = 16)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Random triples for the consistency bound.
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,
    /// Parameter coordinates probed by the gradient check.
    #[arg(long, default_value_t = 25)]
    pub coords: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Trace(a) => commands::trace(&a),
        Command::Check(a) => commands::check(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::FAILURE
        }
    }
}
