use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rsmulticast::config::{parse_modes, parse_schemes, ConfigFile};
use rsmulticast::harness::{self, ExperimentConfig};
use rsmulticast::{channels, harness::snr_to_power};
use rsmulticast_core::ao::{self, CC_ALPHA};
use rsmulticast_core::model::{GroupLayout, MmfProblem};
use rsmulticast_core::{metrics, subproblem};

/// Rate-splitting multigroup multicast precoder design and Monte Carlo sweeps.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write rows.csv and aggregate.csv.
    Run {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
    },
    /// Print the precoder subproblem at the initial point of one instance.
    Dump {
        #[command(flatten)]
        sweep: SweepArgs,
        /// Realization index.
        #[arg(long, default_value_t = 0)]
        realization: u64,
        /// Power split for SC and MC.
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
}

/// Flags override the values read from `--config`.
#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated subset of SC, CC, MC.
    #[arg(long, value_delimiter = ',')]
    scheme: Option<Vec<String>>,
    /// Comma-separated subset of RS, NoRS.
    #[arg(long, value_delimiter = ',')]
    mode: Option<Vec<String>>,
    /// Comma-separated transmit SNRs in dB.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Comma-separated power splits searched for SC and MC.
    #[arg(long, value_delimiter = ',')]
    alpha_grid: Option<Vec<f64>>,
    #[arg(long)]
    rc_th: Option<f64>,
    #[arg(long)]
    antennas: Option<usize>,
    /// Comma-separated group sizes.
    #[arg(long, value_delimiter = ',')]
    groups: Option<Vec<usize>>,
}

impl SweepArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Box<dyn std::error::Error>> {
        let mut config = ExperimentConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            ConfigFile::parse(&text)?.apply(&mut config)?;
        }
        if let Some(v) = &self.scheme {
            config.schemes = parse_schemes(v)?;
        }
        if let Some(v) = &self.mode {
            config.modes = parse_modes(v)?;
        }
        if let Some(v) = &self.snr {
            config.snr_grid_db = v.clone();
        }
        if let Some(v) = self.seed {
            config.master_seed = v;
        }
        if let Some(v) = self.realizations {
            config.realizations = v;
        }
        if let Some(v) = &self.alpha_grid {
            config.ao.alpha_grid = v.clone();
        }
        if let Some(v) = self.rc_th {
            config.common_threshold = v;
        }
        if let Some(v) = self.antennas {
            config.antennas = v;
        }
        if let Some(v) = &self.groups {
            config.group_sizes = v.clone();
        }
        Ok(config)
    }
}

fn run(sweep: &SweepArgs, out_dir: &PathBuf) -> Result<(), Box<dyn std::error::Error>> {
    let config = sweep.resolve()?;
    let rows = harness::run_experiment(&config)?;
    let aggregate = harness::aggregate(&rows);
    for a in &aggregate {
        let total = a.n_ok + a.n_infeasible + a.n_max_iters;
        if a.n_infeasible > 0 {
            eprintln!(
                "{} {} {} dB: {} of {total} rows infeasible, excluded from the mean",
                a.scheme,
                a.mode.as_str(),
                a.snr_db,
                a.n_infeasible,
            );
        }
        if a.n_max_iters > 0 {
            eprintln!(
                "{} {} {} dB: {} of {total} rows stopped at max_iters before converging",
                a.scheme,
                a.mode.as_str(),
                a.snr_db,
                a.n_max_iters,
            );
        }
    }
    let (rows_path, agg_path) = harness::emit_csv(&rows, &aggregate, out_dir)?;
    println!("wrote {} and {}", rows_path.display(), agg_path.display());
    Ok(())
}

fn dump(sweep: &SweepArgs, realization: u64, alpha: f64) -> Result<(), Box<dyn std::error::Error>> {
    let config = sweep.resolve()?;
    let layout: GroupLayout = config.validate()?;
    let (Some(&scheme), Some(&mode), Some(&snr)) = (config.schemes.first(), config.modes.first(), config.snr_grid_db.first())
    else {
        return Err("need a scheme, a mode and an SNR".into());
    };
    let channel = channels::channel_realization(config.antennas, layout.num_users(), config.master_seed, realization);
    let alpha = if scheme.uses_alpha() { alpha } else { CC_ALPHA };
    let problem = MmfProblem {
        channel: &channel,
        layout: &layout,
        scheme,
        tx_budget: snr_to_power(snr),
        common_threshold: config.common_threshold,
        mode,
    };
    let init = ao::initialize_precoder(
        &channel,
        &layout,
        scheme,
        alpha,
        problem.tx_budget,
        config.ao.init,
        config.ao.seed,
    )?;
    let rx = metrics::receiver_state(&channel, &init, &layout)?;
    let sp = subproblem::assemble(&problem, alpha, &rx)?;
    print!("{}", sp.program);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { sweep, out_dir } => run(sweep, out_dir),
        Command::Dump {
            sweep,
            realization,
            alpha,
        } => dump(sweep, *realization, *alpha),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
