//! Command-line front end: run Monte-Carlo campaigns and write their
//! ECDF/sweep/trial tables.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fdiab::allocation::StrategyKind;
use fdiab::montecarlo::{run_campaign_with, write_outputs, CampaignOptions, OutputFormat};
use fdiab::scenario::{load_config, validate_config};

#[derive(Parser)]
#[command(
    name = "fdiab",
    version,
    about = "Monte-Carlo simulator for joint UL/DL power allocation in \
             full-duplex integrated access and backhaul networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign: draw random network realizations, solve every
    /// requested power-allocation strategy on each, and write ECDF,
    /// sweep, and per-trial tables.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON config file; defaults apply to omitted keys, and FDIAB_*
    /// environment variables override both.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trials per sweep point.
    #[arg(long, default_value_t = 200)]
    trials: u64,
    /// Comma-separated strategies: uniform, maxmin, maxsum.
    #[arg(long, default_value = "uniform,maxmin,maxsum")]
    strategies: String,
    /// Comma-separated relay-UE counts to sweep (default: the config's
    /// k_iab).
    #[arg(long)]
    ktilde: Option<String>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// csv, or json to also mirror the full results into results.json.
    #[arg(long, default_value = "csv")]
    format: String,
    /// AM-GM re-weighting rounds per GP solve (0 = one-shot program).
    #[arg(long, default_value_t = 0)]
    condense_iters: usize,
    /// Also write each sweep point's trial-0 GP program listing.
    #[arg(long)]
    dump_gp: bool,
    /// Run trials on one core; results are identical to the parallel
    /// default, byte for byte.
    #[arg(long)]
    serial: bool,
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let report = validate_config(&cfg);
    if !report.is_valid() {
        anyhow::bail!("invalid config:\n  {}", report.violations.join("\n  "));
    }
    let strategies: Vec<StrategyKind> = args
        .strategies
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    let ktilde_list: Vec<usize> = match &args.ktilde {
        Some(list) => list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| anyhow::anyhow!("bad ktilde value '{s}': {e}"))
            })
            .collect::<anyhow::Result<_>>()?,
        None => Vec::new(),
    };
    let format: OutputFormat = args.format.parse()?;
    let options = CampaignOptions {
        ktilde_list,
        parallel: !args.serial,
        condense_iters: args.condense_iters,
        dump_gp: args.dump_gp,
    };
    let result = run_campaign_with(&cfg, args.trials, &strategies, &options)?;
    let solved = result.records.len();
    let unverified = result.records.iter().filter(|r| !r.verified).count();
    let files = write_outputs(&result, &args.out, format)?;
    println!(
        "{} records over {} sweep point(s), seed {}",
        solved,
        result.ktilde_list.len(),
        result.seed
    );
    if unverified > 0 {
        println!("warning: {unverified} record(s) failed allocation verification");
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
