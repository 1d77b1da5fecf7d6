use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use varsphere::DistanceKind;

use crate::manifest::CriterionKind;

#[derive(Debug, Parser)]
#[command(name = "varsphere", version, about = "Cluster and average variables as points of the operator sphere")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// K-means clustering of the variables around rank-H centroids.
    Cluster(ClusterArgs),
    /// Spectrum and rank-H average of all variables.
    Average(AverageArgs),
    /// Simulation benchmark over a grid of (n, β, σ², θ).
    Simulate(SimulateArgs),
    /// Classical MDS coordinates of the centroids of a fitted model.
    Mds(MdsArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct InputArgs {
    /// CSV file with a header row; overrides the manifest's `data`.
    #[arg(long)]
    pub data: Option<PathBuf>,

    /// TOML manifest declaring columns, blocks, weights and defaults.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RankArgs {
    /// Rank-selection rule for the averages.
    #[arg(long, value_enum)]
    pub criterion: Option<CriterionKind>,

    /// Trace share θ for the `trace` criterion.
    #[arg(long)]
    pub theta: Option<f64>,

    /// Rank for the `fixed` criterion.
    #[arg(long = "H")]
    pub h: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub rank: RankArgs,

    /// Number of clusters.
    #[arg(long = "L")]
    pub clusters: Option<usize>,

    /// chord or geodesic.
    #[arg(long)]
    pub distance: Option<DistanceKind>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Number of random starts.
    #[arg(long)]
    pub starts: Option<usize>,

    #[arg(long)]
    pub max_iter: Option<usize>,

    /// Also fit L = 1..=LMAX and report the between/total inertia curve.
    #[arg(long, value_name = "LMAX")]
    pub ratio_curve: Option<usize>,

    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct AverageArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub rank: RankArgs,

    /// chord or geodesic.
    #[arg(long)]
    pub distance: Option<DistanceKind>,

    /// Largest H of the geodesic inertia profile (default: the chosen H).
    #[arg(long)]
    pub hmax: Option<usize>,

    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Sample sizes.
    #[arg(long = "n", value_delimiter = ',', default_values_t = [30, 40])]
    pub ns: Vec<usize>,

    /// Angles between clusters A and B, e.g. `pi/4,pi/3,pi/2` or radians.
    #[arg(long = "beta", value_delimiter = ',', default_values = ["pi/4", "pi/3", "pi/2"])]
    pub betas: Vec<String>,

    /// Noise variances.
    #[arg(long = "sigma2", value_delimiter = ',', default_values_t = [0.1, 0.15])]
    pub sigma2s: Vec<f64>,

    /// Trace-ratio thresholds.
    #[arg(long = "theta", value_delimiter = ',', default_values_t = [0.0, 0.25, 0.5, 0.75, 1.0])]
    pub thetas: Vec<f64>,

    /// Replications per cell.
    #[arg(long, default_value_t = 10)]
    pub reps: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Random starts of each K-means fit.
    #[arg(long, default_value_t = 10)]
    pub starts: usize,

    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct MdsArgs {
    /// `model.json` written by `cluster`.
    #[arg(long)]
    pub model: PathBuf,

    #[arg(long, default_value_t = 2)]
    pub dims: usize,

    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}
