use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use wslabel::{Method, SolverOptions};

#[derive(Debug, Parser)]
#[command(
    name = "wslabel",
    version,
    about = "Aggregate weak labeling rules into soft labels",
    after_help = "Environment:\n  WSLABEL_TOL  default gradient tolerance for the adversarial solver (overridden by --tol)\n\n\
                  Exit codes: 0 success, 1 usage error, 2 data error, 3 solver did not converge."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Adversarial prediction from interval bounds on rule accuracies and class frequencies.
    Solve(SolveArgs),
    /// Closest member of the prediction family to known labels.
    BestApprox(BestApproxArgs),
    /// One-coin Dawid-Skene EM.
    DsEm(DsEmArgs),
    /// Majority vote, ties split evenly.
    Mv(MvArgs),
    /// Log, 0-1 and Brier loss of a prediction against labels.
    Eval(EvalArgs),
    /// KL decompositions of a prediction into model and approximation parts.
    Decompose(DecomposeArgs),
    /// Wilson-interval bounds from a labeled pool.
    Estimate(EstimateArgs),
    /// Sample a one-coin dataset and optionally run the consistency experiment.
    Synth(SynthArgs),
    /// Built-in two-rule instance on which EM moves away from the best approximator.
    DemoInconsistency(DemoArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Vote matrix: n rows of p integers, 0 = abstain, 1..k = class.
    #[arg(long)]
    pub preds: PathBuf,
    /// Number of classes; inferred from the largest vote when omitted.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Newton,
    Pg,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Stop once the projected gradient's infinity norm is at most this.
    #[arg(long, env = "WSLABEL_TOL", default_value_t = 1e-8)]
    pub tol: f64,
    /// Give up after this many solver iterations.
    #[arg(long, default_value_t = 50_000)]
    pub max_iter: usize,
    /// Dual optimizer: projected Newton or projected gradient.
    #[arg(long, value_enum, default_value_t = MethodArg::Newton)]
    pub method: MethodArg,
}

impl SolverArgs {
    pub fn options(&self) -> SolverOptions {
        let method = match self.method {
            MethodArg::Newton => Method::Newton,
            MethodArg::Pg => Method::ProjectedGradient,
        };
        SolverOptions { tol: self.tol, max_iter: self.max_iter, method, ..SolverOptions::default() }
    }
}

#[derive(Debug, Args)]
pub struct PoolArgs {
    /// Labeled pool: the p votes of each point followed by its class in 1..k.
    #[arg(long)]
    pub labeled: Option<PathBuf>,
    /// Two-sided confidence of each Wilson interval.
    #[arg(long, default_value_t = 0.95)]
    pub conf: f64,
    /// Use a random subset of this many pool points.
    #[arg(long)]
    pub sample_size: Option<usize>,
    /// Seed for --sample-size.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("constraints").required(true).args(["bounds", "labeled"])))]
pub struct SolveArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// TOML file with arrays `b` and `eps`.
    #[arg(long)]
    pub bounds: Option<PathBuf>,
    #[command(flatten)]
    pub pool: PoolArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Labels to score the prediction against in the report.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Write the n x k prediction here instead of stdout.
    #[arg(long)]
    pub out_pred: Option<PathBuf>,
    /// Write a TOML run report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BestApproxArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Hard labels (one column) or k probability columns.
    #[arg(long)]
    pub labels: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write the n x k prediction here instead of stdout.
    #[arg(long)]
    pub out_pred: Option<PathBuf>,
    /// Write a TOML run report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitArg {
    Mv,
    Uniform,
}

#[derive(Debug, Args)]
pub struct DsEmArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Starting posterior: majority vote or uniform.
    #[arg(long, value_enum, default_value_t = InitArg::Mv)]
    pub init: InitArg,
    /// Stop when no probability moves by more than this.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Give up after this many EM rounds.
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Hard labels (one column) or k probability columns.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Write the n x k prediction here instead of stdout.
    #[arg(long)]
    pub out_pred: Option<PathBuf>,
    /// Write the fitted class prior and accuracies as TOML.
    #[arg(long)]
    pub out_params: Option<PathBuf>,
    /// Write a TOML run report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Hard labels (one column) or k probability columns.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Write the n x k prediction here instead of stdout.
    #[arg(long)]
    pub out_pred: Option<PathBuf>,
    /// Write a TOML run report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Prediction file with k probability columns.
    #[arg(long)]
    pub pred: PathBuf,
    /// Hard labels (one column) or k probability columns.
    #[arg(long)]
    pub labels: PathBuf,
    /// Write a TOML run report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Hard labels (one column) or k probability columns.
    #[arg(long)]
    pub labels: PathBuf,
    /// Adversarial prediction to decompose.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// One-coin parameters written by `ds-em --out-params`.
    #[arg(long)]
    pub ds_params: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write a TOML run report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub pool: PoolArgs,
    /// Write the bounds here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of points.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Number of rules.
    #[arg(long, default_value_t = 3)]
    pub p: usize,
    /// Number of classes.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Seed of the generator.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dirichlet concentration of the class prior, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    /// First Beta shape of the rule accuracies.
    #[arg(long, default_value_t = 2.0)]
    pub beta_a: f64,
    /// Second Beta shape of the rule accuracies.
    #[arg(long, default_value_t = 4.0 / 3.0)]
    pub beta_b: f64,
    /// Prefix lengths of the consistency run, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub prefixes: Option<Vec<usize>>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write the vote matrix here.
    #[arg(long)]
    pub out_preds: Option<PathBuf>,
    /// True classes, one per line.
    #[arg(long)]
    pub out_labels: Option<PathBuf>,
    /// Generating posterior of each point.
    #[arg(long)]
    pub out_eta: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write preds.csv, labels.csv and labeled.csv for the instance into this directory.
    #[arg(long)]
    pub export: Option<PathBuf>,
    /// Write a TOML run report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}
