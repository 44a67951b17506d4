//! Command-line front end: difficulty scoring, surrogate training, trajectory
//! evaluation, plotting and DDPG policy inspection.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use curvo::curriculum::SchedulerMode;
use curvo::io::TrajectoryFormat;

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;
pub mod table;

pub use config::{Overrides, RunConfig};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "curvo", version, about = "Curriculum scheduling and trajectory evaluation toolkit")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory [default: runs].
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Trajectory file format: tum or tartanair [default: tum].
    #[arg(long, global = true, value_name = "FORMAT")]
    pub format: Option<TrajectoryFormat>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every trajectory in a directory and partition into difficulty levels.
    Difficulty(DifficultyArgs),
    /// Train the surrogate model under a curriculum scheduler.
    Train(TrainArgs),
    /// ATE of an estimate against ground truth; updates the error list and its AUC.
    Evaluate(EvaluateArgs),
    /// Render a CSV produced by another command as SVG.
    Plot(PlotArgs),
    /// Dump the weights a DDPG agents checkpoint emits over a state grid.
    AgentInspect(AgentInspectArgs),
}

#[derive(Debug, Args)]
pub struct DifficultyArgs {
    pub input_dir: PathBuf,
    /// Fixed level cut points, comma separated (e.g. 0.44,0.64).
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    /// Component weights tx,ty,tz,rx,ry,rz.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ModeArg {
    Baseline,
    Staged,
    SelfPaced,
    Ddpg,
}

impl From<ModeArg> for SchedulerMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Baseline => SchedulerMode::Baseline,
            ModeArg::Staged => SchedulerMode::Staged,
            ModeArg::SelfPaced => SchedulerMode::SelfPaced,
            ModeArg::Ddpg => SchedulerMode::Ddpg,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub steps: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub estimate: PathBuf,
    pub ground_truth: PathBuf,
    /// Further estimate files of the same sequence; the median ATE over all runs is reported.
    #[arg(long, num_args = 1..)]
    pub runs: Vec<PathBuf>,
    /// Use the similarity-aligned ATE for the headline value and the AUC.
    #[arg(long)]
    pub align: bool,
    /// Sequence id for the error list [default: ground-truth file stem].
    #[arg(long)]
    pub sequence_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum PlotKind {
    TrainingCurves,
    WeightTrace,
    DifficultyHist,
    AucCurve,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::TrainingCurves => "training_curves",
            PlotKind::WeightTrace => "weight_trace",
            PlotKind::DifficultyHist => "difficulty_hist",
            PlotKind::AucCurve => "auc_curve",
        }
    }
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    pub csv: PathBuf,
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    /// SVG path [default: <out>/<kind>.svg].
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Threshold rules for difficulty_hist; read from a sibling difficulty_thresholds.csv otherwise.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    /// Error column for auc_curve.
    #[arg(long, default_value = "ate_aligned")]
    pub column: String,
}

#[derive(Debug, Args)]
pub struct AgentInspectArgs {
    pub checkpoint: PathBuf,
    /// Progress grid points over [0, 1].
    #[arg(long, default_value_t = 11)]
    pub points: usize,
    /// Loss values to probe, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,1,10")]
    pub losses: Vec<f64>,
}

/// Parses `args` (program name first) and runs the command, writing the report to `stdout`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            write!(stdout, "{e}")?;
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        format: cli.format,
    };
    let cfg = RunConfig::load(cli.config.as_deref())?.resolve(&overrides);
    match &cli.command {
        Command::Difficulty(a) => commands::difficulty::run(cfg, a, stdout),
        Command::Train(a) => commands::train::run(cfg, a, stdout),
        Command::Evaluate(a) => commands::evaluate::run(cfg, a, stdout),
        Command::Plot(a) => commands::plot::run(cfg, a, stdout),
        Command::AgentInspect(a) => commands::inspect::run(cfg, a, stdout),
    }
}
