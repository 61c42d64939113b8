mod commands;
mod manifest;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;
use solidify::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "perc-solidify", version, about = "Random walks and potential theory on percolation clusters")]
pub struct Cli {
    /// Worker threads; 0 picks the number of CPUs. Never changes any emitted number.
    #[arg(long, global = true, env = "PERC_SOLIDIFY_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Output file. JSON summaries go to stdout when absent. A `<out>.manifest.json`
    /// sidecar records parameters, input digests and timestamps.
    #[arg(long, short = 'o', global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ConfigSource {
    /// Read a configuration written by `generate`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "site")]
    pub model: String,
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    #[arg(long, default_value_t = 64)]
    pub side: u64,
    #[arg(long, default_value_t = 0.75)]
    pub p: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

/// U₁ for density-based commands: a vertex-set file, or a half-space ⟨normal, x⟩ ≥ offset.
#[derive(Args, Debug, Clone, Serialize)]
pub struct U1Source {
    #[arg(long)]
    pub u1: Option<PathBuf>,
    /// Comma-separated normal of the half-space.
    #[arg(long, value_delimiter = ',', default_value = "1,0.37,0.21")]
    pub normal: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub offset: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantArg {
    Sigma,
    SigmaTilde,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SizeArg {
    Quick,
    Full,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Sample a configuration and write it in binary form (requires --out).
    Generate {
        #[command(flatten)]
        src: ConfigSource,
    },
    /// Cluster statistics; optionally export the largest cluster's edge list.
    Cluster {
        #[command(flatten)]
        src: ConfigSource,
        #[arg(long)]
        edges: Option<PathBuf>,
    },
    /// Local density field of U₁ on the largest cluster.
    Density {
        #[command(flatten)]
        src: ConfigSource,
        #[command(flatten)]
        u1: U1Source,
        #[arg(long)]
        ell: u32,
        #[arg(long, value_enum, default_value = "sigma")]
        variant: VariantArg,
        /// Per-vertex values as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Scale schedule for a given J.
    Schedule {
        #[arg(long = "J")]
        j: u32,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 0.7)]
        eta: f64,
        #[arg(long, default_value_t = 0)]
        ell_star: u64,
        #[arg(long, default_value_t = 0.5)]
        c2: f64,
        #[arg(long, default_value_t = 1.0)]
        delta_s: f64,
        #[arg(long, default_value_t = 1.0)]
        kappa_reg: f64,
        #[arg(long = "L")]
        l: Option<u32>,
        #[arg(long = "I")]
        i: Option<u64>,
    },
    /// Resonance set for the given scales, with an optional escape estimate from starts.
    Resonance {
        #[command(flatten)]
        src: ConfigSource,
        #[command(flatten)]
        u1: U1Source,
        #[arg(long, value_delimiter = ',', required = true)]
        scales: Vec<u32>,
        #[arg(long = "J")]
        j: usize,
        #[arg(long)]
        alpha_tilde: Option<f64>,
        /// Estimate the probability of never reaching the set from this many starts near the origin.
        #[arg(long, default_value_t = 0)]
        starts: usize,
        #[arg(long, default_value_t = 1000)]
        replicas: u64,
        /// Write the resonance set as a vertex-set file.
        #[arg(long)]
        set_out: Option<PathBuf>,
    },
    /// Escape-from-interface sweep over the perforated-shell family.
    Absorb {
        #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
        n: Vec<u64>,
        #[arg(long, default_value_t = 0.5)]
        hole_fraction: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 0.2)]
        chi: f64,
        #[arg(long, default_value_t = 32)]
        starts: usize,
        #[arg(long, default_value_t = 2000)]
        replicas: u64,
        #[arg(long, default_value_t = 1.0)]
        delta_s: f64,
    },
    /// Capacity with killing on the window face: of a vertex-set file on a configuration,
    /// or of the centre site of full-lattice windows with extrapolation in the side.
    Capacity {
        #[command(flatten)]
        src: ConfigSource,
        #[arg(long)]
        set: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        singleton_sides: Vec<u64>,
    },
    /// One-step hitting experiment for the density level set.
    Onestep {
        #[command(flatten)]
        src: ConfigSource,
        #[command(flatten)]
        u1: U1Source,
        #[arg(long)]
        ell: u32,
        #[arg(long)]
        ell_prime: u32,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 20)]
        probes: usize,
        #[arg(long, default_value_t = 1000)]
        replicas: u64,
        /// Probes are drawn from the box of this half-width around the origin.
        #[arg(long, default_value_t = 8)]
        probe_half: i64,
    },
    /// Cascade of nested density events.
    Cascade {
        #[command(flatten)]
        src: ConfigSource,
        #[command(flatten)]
        u1: U1Source,
        /// Strictly decreasing scales ℓ₀ > … > ℓ_J.
        #[arg(long, value_delimiter = ',', default_value = "4,2,0")]
        ells: Vec<u32>,
        #[arg(long, default_value_t = 20)]
        probes: usize,
        #[arg(long, default_value_t = 100)]
        replicas: u64,
        #[arg(long, default_value_t = 16)]
        probe_half: i64,
        #[arg(long, default_value_t = 10_000_000)]
        step_budget: u64,
    },
    /// Frequencies of the two seed events over cube sides L₀.
    SeedEvents {
        #[command(flatten)]
        src: ConfigSource,
        #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
        l0: Vec<u64>,
        #[arg(long, default_value_t = 0.2)]
        alpha: f64,
    },
    /// Run a named verification suite; exit 2 when it fails.
    Verify {
        suite: String,
        #[arg(long, value_enum, default_value = "quick")]
        size: SizeArg,
    },
}

/// What a command produced: its summary and whether every check passed.
pub struct Outcome {
    pub summary: Value,
    pub pass: bool,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 3,
        Error::Structural(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: thread pool: {e}");
        return ExitCode::from(1);
    }
    match commands::run(&cli) {
        Ok(pass) => {
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
