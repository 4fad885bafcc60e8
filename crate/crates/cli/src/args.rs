use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "percolab", version, about = "Supercritical bond percolation laboratory")]
pub struct Cli {
    /// Worker threads for replicate loops [default: all cores]
    #[arg(long, global = true, env = "PERCOLAB_WORKERS", value_parser = clap::value_parser!(usize))]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a configuration and write it in PERCCFG1 format
    Sample(SampleArgs),
    /// Chemical, modified or renormalized distance on a stored configuration
    Dist(DistArgs),
    /// Estimate the time constant along one or more directions
    Mu(MuArgs),
    /// Check how closely a norm tracks a table of mean distances
    Gap(GapArgs),
    /// Run an experiment plan and write its report
    Experiment(ExperimentArgs),
    /// Summarize a PERCCFG1 file
    Inspect {
        /// PERCCFG1 file
        config: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Lattice dimension
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Side length of the centered cubic box
    #[arg(long)]
    pub size: usize,
    /// Edge-opening probability in [0, 1]
    #[arg(long, value_parser = probability)]
    pub p: f64,
    #[arg(long, env = "PERCOLAB_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output file
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    /// PERCCFG1 file
    #[arg(long)]
    pub config: PathBuf,
    /// Source point, e.g. 0,0
    #[arg(long, value_parser = vector, allow_hyphen_values = true)]
    pub from: Ints,
    /// Target point, e.g. 3,-4
    #[arg(long, value_parser = vector, allow_hyphen_values = true)]
    pub to: Option<Ints>,
    /// Project both endpoints onto the crossing cluster first
    #[arg(long, conflicts_with = "renorm")]
    pub star: bool,
    /// Renormalized distance with scale t and red-edge multiplier K, e.g. 4,17
    #[arg(long, value_parser = scheme)]
    pub renorm: Option<(u32, f64)>,
    /// Good-box constant; K must exceed 4 rho
    #[arg(long, default_value_t = 4.0)]
    pub rho: f64,
    /// Write the distance field from --from as a CSV grid (d = 2)
    #[arg(long)]
    pub field_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MuArgs {
    /// Direction; repeat for several
    #[arg(long = "dir", value_parser = vector, allow_hyphen_values = true, required = true)]
    pub direction: Vec<Ints>,
    /// Multipliers n: at least four, comma-separated and increasing
    #[arg(long, value_parser = schedule, default_value = "16,32,64,128")]
    pub ns: Ints,
    #[arg(long, value_parser = probability)]
    pub p: f64,
    /// Replicates per multiplier (at least 30)
    #[arg(long, default_value_t = 60)]
    pub replicates: usize,
    #[arg(long, env = "PERCOLAB_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Do not add the lattice images of each direction to the norm
    #[arg(long)]
    pub no_symmetry: bool,
    /// Write the norm estimate as JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GapArgs {
    /// Norm JSON written by `mu --out`
    #[arg(long)]
    pub norm: PathBuf,
    /// Table JSON of mean distances; sampled when absent
    #[arg(long, conflicts_with_all = ["radius", "p"])]
    pub table: Option<PathBuf>,
    /// l1 radius of the sampled table
    #[arg(long)]
    pub radius: Option<u64>,
    #[arg(long, value_parser = probability)]
    pub p: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    #[arg(long, env = "PERCOLAB_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Only vectors with l1 norm at least this are checked
    #[arg(long, default_value_t = 8)]
    pub threshold: u64,
    /// Approximation constant C
    #[arg(long, default_value_t = 1.0)]
    pub constant: f64,
    /// Bootstrap draws for the minimal constant
    #[arg(long, default_value_t = 400)]
    pub resamples: usize,
    /// Save the sampled table as JSON
    #[arg(long)]
    pub table_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// variance | tail | gap | shape | renorm | efron-stein | skeleton | cluster-tails | distance-tail | rho
    pub kind: String,
    /// Plan JSON
    #[arg(long)]
    pub plan: PathBuf,
    /// Report JSON
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for CSV tables
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Overrides the plan seed
    #[arg(long, env = "PERCOLAB_SEED")]
    pub seed: Option<u64>,
}

/// Comma-separated integers such as `3,-4`.
#[derive(Clone, Debug)]
pub struct Ints(pub Vec<i64>);

fn probability(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|_| format!("'{s}' is not a decimal"))?;
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(format!("{p} is outside [0, 1]"))
    }
}

fn vector(s: &str) -> Result<Ints, String> {
    if s.is_empty() || s.contains(char::is_whitespace) {
        return Err("expected comma-separated integers without spaces".into());
    }
    s.split(',')
        .map(|c| c.parse::<i64>().map_err(|_| format!("'{c}' is not an integer")))
        .collect::<Result<_, _>>()
        .map(Ints)
}

fn schedule(s: &str) -> Result<Ints, String> {
    let v = vector(s)?.0;
    if v.iter().any(|&n| n <= 0) || v.windows(2).any(|w| w[0] >= w[1]) {
        return Err("schedule must be positive and strictly increasing".into());
    }
    Ok(Ints(v))
}

fn scheme(s: &str) -> Result<(u32, f64), String> {
    let (t, k) = s.split_once(',').ok_or("expected t,K")?;
    Ok((
        t.parse().map_err(|_| format!("'{t}' is not a positive integer"))?,
        k.parse().map_err(|_| format!("'{k}' is not a number"))?,
    ))
}
