use clap::{Parser, Subcommand};
use solwave_cli::commands::Job;
use solwave_cli::config::RunConfig;
use solwave_cli::context::Context;
use solwave_cli::error::{CliError, CliResult};
use solwave_cli::manifest::{self, DEFAULT_REL_TOL};
use std::path::PathBuf;
use std::process::ExitCode;

/// Numerical experiments on the radial energy-critical wave equation around its
/// ground state.
#[derive(Parser)]
#[command(name = "solwave", version)]
struct Cli {
    /// TOML configuration; `./solwave.toml` is used when present, built-in defaults otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; takes precedence over `[output] dir` without changing the recorded config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bound state, negative-eigenvalue count and zero-resonance diagnostics.
    Spectrum,
    /// Jost table, scattering coefficient and symbol bounds.
    Jost,
    /// Isometry, Bernstein and coercivity checks of the distorted transform.
    DftCheck,
    /// Sampled kernels `K_k` against their pointwise decay bound.
    KernelCheck,
    /// A batch of randomized data with their norms.
    Randomize {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        batch: Option<usize>,
        /// `s,s1,nu,eps`.
        #[arg(long, value_parser = parse_params)]
        params: Option<[f64; 4]>,
    },
    /// Continuous-spectrum flow of smooth data with its energy.
    Evolve,
    /// Monte-Carlo tail of the `Z` norm of the randomized linear flow.
    Tails {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        draws: Option<usize>,
    },
    /// Picard iteration for the modulated perturbation.
    Modulate {
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        window: Option<f64>,
    },
    /// The acceptance suite; exits 1 if any criterion fails.
    All {
        /// Smaller samples with every check kept.
        #[arg(long)]
        quick: bool,
    },
    /// Re-runs a manifest and compares its artifacts.
    Reproduce {
        manifest: PathBuf,
        /// Relative tolerance for floating fields of artifacts that are not byte-identical.
        #[arg(long, default_value_t = DEFAULT_REL_TOL)]
        rel_tol: f64,
        /// Require byte-identical artifacts.
        #[arg(long, conflicts_with = "rel_tol")]
        bit: bool,
    },
    /// Prints the effective configuration as TOML.
    PrintConfig,
}

fn parse_params(text: &str) -> Result<[f64; 4], String> {
    let values: Vec<f64> = text
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<Result<_, _>>()?;
    values.try_into().map_err(|v: Vec<f64>| format!("expected four values s,s1,nu,eps, got {}", v.len()))
}

fn configure_threads() -> CliResult<()> {
    let Ok(text) = std::env::var("SOLWAVE_THREADS") else {
        return Ok(());
    };
    let threads: usize = text
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("SOLWAVE_THREADS must be a positive integer, got {text:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn job(command: Command, cfg: &RunConfig) -> Job {
    match command {
        Command::Spectrum => Job::Spectrum,
        Command::Jost => Job::Jost,
        Command::DftCheck => Job::DftCheck,
        Command::KernelCheck => Job::KernelCheck,
        Command::Randomize { seed, batch, params } => {
            let r = &cfg.randomize;
            let [s, s1, nu, eps] = params.unwrap_or([r.s, r.s1, r.nu, r.eps]);
            Job::Randomize { seed: seed.unwrap_or(r.seed), batch: batch.unwrap_or(r.batch), s, s1, nu, eps }
        }
        Command::Evolve => Job::Evolve,
        Command::Tails { seed, draws } => {
            Job::Tails { seed: seed.unwrap_or(cfg.tails.seed), draws: draws.unwrap_or(cfg.tails.draws) }
        }
        Command::Modulate { eps, seed, window } => {
            let m = &cfg.modulation;
            Job::Modulate { eps: eps.unwrap_or(m.eps0), seed: seed.unwrap_or(m.seed), window: window.unwrap_or(m.window) }
        }
        Command::All { quick } => Job::All { quick },
        Command::Reproduce { .. } | Command::PrintConfig => unreachable!("handled before dispatch"),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    // A manifest carries its own config.
    if let Command::Reproduce { manifest, rel_tol, bit } = &cli.command {
        let report = manifest::reproduce(manifest, (!bit).then_some(*rel_tol))?;
        println!("{}", serde_json::to_string_pretty(&report)?);
        return if report.pass {
            Ok(())
        } else {
            Err(CliError::Invariant(format!("{} does not reproduce", manifest.display())))
        };
    }
    let cfg = RunConfig::load(cli.config.as_deref())?;
    // `--out` picks a location only; the recorded config stays as loaded.
    let dir = cli.out.unwrap_or_else(|| cfg.output.dir.clone());
    match cli.command {
        Command::PrintConfig => {
            print!("{}", cfg.to_toml());
            Ok(())
        }
        command => {
            let job = job(command, &cfg);
            let ctx = Context::new(cfg);
            let m = manifest::execute(&ctx, &job, &dir)?;
            for o in &m.outputs {
                println!("wrote {}", dir.join(&o.file).display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
