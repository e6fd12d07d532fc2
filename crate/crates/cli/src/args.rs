use std::path::PathBuf;

use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand, ValueEnum};
use efnet_core::blocks::BlockKind;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(args_override_self = true)]
#[command(
    name = "efnet",
    version,
    about = "Train, ensemble and evaluate chest X-ray pneumonia classifiers"
)]
#[command(
    after_help = "Exit status: 0 on success, 1 on any error, 2 on bad usage, 3 when training diverges.\n\
Every subcommand accepts --config FILE with key=value lines named after its long flags; \
flags given on the command line win."
)]
pub struct Cli {
    /// Root for default output directories.
    #[arg(long, global = true, env = "EFNET_OUTPUT_ROOT", default_value = "runs")]
    pub output_root: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build train/val/test record files from image folders or the synthetic corpus.
    DatasetBuild(DatasetBuildArgs),
    /// Train one architecture and keep the checkpoint with the best validation loss.
    Train(TrainArgs),
    /// Fit ensemble weights over trained checkpoints on the validation records.
    Ensemble(EnsembleArgs),
    /// Score a checkpoint, an ensemble manifest or a predictions file.
    Eval(EvalArgs),
    /// Collect evaluation runs into count, metric and weight tables.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct DatasetBuildArgs {
    /// key=value file of defaults for this command.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Output directory [default: <output-root>/dataset].
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Generate the synthetic two-class corpus instead of reading images.
    #[arg(long, conflicts_with_all = ["normal", "pneumonia"])]
    pub synthetic: bool,

    /// Synthetic images per class.
    #[arg(long, default_value_t = 32)]
    pub per_class: usize,

    /// Folder of NORMAL images (PNG or JPEG).
    #[arg(long, requires = "pneumonia", required_unless_present = "synthetic")]
    pub normal: Option<PathBuf>,

    /// Folder of PNEUMONIA images (PNG or JPEG).
    #[arg(long, requires = "normal", required_unless_present = "synthetic")]
    pub pneumonia: Option<PathBuf>,

    /// Side length images are resized to.
    #[arg(long, default_value_t = 224)]
    pub size: usize,

    /// Seed for the synthetic corpus and the split shuffle.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Explicit train,val,test counts [default: 3748:936:1172 proportions of the corpus].
    #[arg(long, value_parser = parse_split)]
    pub split: Option<SplitCounts>,

    /// Fail on the first undecodable image instead of skipping it.
    #[arg(long)]
    pub strict_decode: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitCounts(pub [usize; 3]);

impl Serialize for SplitCounts {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let [a, b, c] = self.0;
        s.serialize_str(&format!("{a},{b},{c}"))
    }
}

fn parse_split(s: &str) -> Result<SplitCounts, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| format!("`{p}` is not a count")))
        .collect::<Result<_, _>>()?;
    <[usize; 3]>::try_from(parts)
        .map(SplitCounts)
        .map_err(|_| "expected three counts: train,val,test".to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    /// Reduce on validation-loss plateau.
    Plateau,
    /// Keep the initial learning rate.
    Constant,
}

fn arch_names() -> PossibleValuesParser {
    PossibleValuesParser::new(BlockKind::ALL.map(BlockKind::as_str))
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    /// key=value file of defaults for this command.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Directory holding train.efrc and val.efrc.
    #[arg(long)]
    pub data: PathBuf,

    /// Block family of the toy model.
    #[arg(long, value_parser = arch_names())]
    pub arch: String,

    /// Output directory [default: <output-root>/train-<arch>].
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Number of blocks.
    #[arg(long, default_value_t = 3)]
    pub depth: usize,

    /// Stem width in channels.
    #[arg(long, default_value_t = 8)]
    pub width: usize,

    /// Seed for initialization, shuffling and augmentation.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,

    /// Initial Adam learning rate.
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,

    #[arg(long, value_enum, default_value_t = LrSchedule::Plateau)]
    pub lr_schedule: LrSchedule,

    /// Learning-rate multiplier applied on a plateau.
    #[arg(long, default_value_t = 0.3)]
    pub plateau_factor: f64,

    /// Epochs without validation improvement before a reduction.
    #[arg(long, default_value_t = 5)]
    pub plateau_patience: usize,

    /// Floor for the plateau schedule.
    #[arg(long, default_value_t = 0.0)]
    pub min_lr: f64,

    /// Epochs without training-loss improvement before stopping.
    #[arg(long, default_value_t = 20)]
    pub early_stop_patience: usize,

    /// Epoch cap.
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,

    /// Linear warm-up length in epochs (0 disables it).
    #[arg(long, default_value_t = 0)]
    pub warmup_epochs: usize,

    /// Per-image probability of a horizontal flip.
    #[arg(long, default_value_t = 0.5)]
    pub flip_probability: f64,

    /// Stop once an epoch reaches this training accuracy.
    #[arg(long)]
    pub target_train_accuracy: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct EnsembleArgs {
    /// key=value file of defaults for this command.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Directory holding the records the weights are fitted on.
    #[arg(long)]
    pub data: PathBuf,

    /// Which record file to fit on.
    #[arg(long, default_value = "val")]
    pub split: String,

    /// Member checkpoint as PATH or NAME=PATH; repeat for each member.
    #[arg(long = "member", required = true)]
    pub members: Vec<String>,

    /// Output directory [default: <output-root>/ensemble].
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Adam learning rate for the weight logits.
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,

    /// Full-batch optimization steps.
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
#[command(group = clap::ArgGroup::new("model").required(true).args(["checkpoint", "manifest", "predictions"]))]
pub struct EvalArgs {
    /// key=value file of defaults for this command.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Single-model checkpoint.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,

    /// Ensemble manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    /// CSV of `label,p_normal,p_pneumonia` rows scored without a model.
    #[arg(long)]
    pub predictions: Option<PathBuf>,

    /// Directory holding the record files (needed with --checkpoint or --manifest).
    #[arg(long, required_unless_present = "predictions")]
    pub data: Option<PathBuf>,

    /// Which record file to score.
    #[arg(long, default_value = "test")]
    pub split: String,

    /// Row label in the tables [default: derived from the input].
    #[arg(long)]
    pub name: Option<String>,

    /// Output directory [default: <output-root>/eval].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct ReportArgs {
    /// key=value file of defaults for this command.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Evaluation output directory; repeat for each row.
    #[arg(long = "run", required = true)]
    pub runs: Vec<PathBuf>,

    /// Output directory [default: <output-root>/report].
    #[arg(long)]
    pub out: Option<PathBuf>,
}
