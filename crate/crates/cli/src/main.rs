//! Command line front end: runs scenarios, the published experiments, and
//! the width sweep; validates builds; re-renders plots from emitted CSVs.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use selfwiring::io::{
    self, config_hash, emit_outputs, emit_sweep, ensure_writable, parse_config_file, RunManifest,
    SweepRecord,
};
use selfwiring::limit::sweep_epsilon;
use selfwiring::scenario::{build_experiment, run_simulation, ExperimentOverrides, ScenarioConfig};

/// Output root precedence: --out flag, then the config's own output_dir,
/// then $SELFWIRING_OUT, then ./out. Every run writes into a subdirectory
/// keyed by its config hash, so concurrent runs never collide.
const OUTPUT_ENV: &str = "SELFWIRING_OUT";

#[derive(Parser)]
#[command(name = "selfwiring", version, about = "Coupled walker / reaction-diffusion simulator")]
struct Cli {
    /// Output root (overrides config and SELFWIRING_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print only errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunFlags {
    /// Replace the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Record a field snapshot every this many steps.
    #[arg(long)]
    snapshot_every: Option<usize>,
    /// Read sigma as the literal per-step standard deviation.
    #[arg(long)]
    literal_noise: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run one of the published experiments with its defaults.
    Experiment {
        #[arg(value_parser = clap::value_parser!(u32).range(1..=4))]
        number: u32,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        cones_per_soma: Option<usize>,
        #[arg(long)]
        horizon: Option<f64>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Solve the asymptotic-speed fixed point across trail widths.
    EpsilonSweep {
        /// Comma-separated widths (default: the published figure's set).
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        #[arg(long, default_value_t = 1.0)]
        force: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Run the built-in oracle and invariant checks.
    Validate,
    /// Re-render the trajectory SVG from an emitted run directory.
    ReplayPlot {
        /// Directory holding trajectory.csv and config.json.
        dir: PathBuf,
        /// Where to write the SVG (default: <dir>/replay.svg).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { ref config, ref flags } => {
            let mut config = parse_config_file(config)
                .with_context(|| format!("loading {}", config.display()))?;
            apply_flags(&mut config, flags);
            execute_run(config, &cli)
        }
        Command::Experiment {
            number,
            epsilon,
            sigma,
            beta,
            gamma,
            cones_per_soma,
            horizon,
            ref flags,
        } => {
            let overrides = ExperimentOverrides {
                sigma,
                epsilon,
                beta,
                gamma,
                cones_per_soma,
                horizon,
                seed: flags.seed,
            };
            let mut config = build_experiment(number, &overrides, flags.seed.unwrap_or(0))?;
            apply_flags(&mut config, flags);
            execute_run(config, &cli)
        }
        Command::EpsilonSweep { ref epsilons, amplitude, force, tol } => {
            let widths = epsilons
                .clone()
                .unwrap_or_else(|| vec![0.038, 0.041, 0.044, 0.047, 0.05]);
            let rows = sweep_epsilon(&widths, amplitude, force, tol)?;
            let record = SweepRecord { amplitude, force, tol, rows: &rows };
            let params = serde_json::to_string(&record).expect("sweep serializes");
            let dir =
                output_root(&cli, None).join(format!("sweep-{}", &io::content_hash(&params)[..12]));
            ensure_writable(&dir)?;
            emit_sweep(&record, &dir)?;
            if !cli.quiet {
                for r in &rows {
                    println!("epsilon {:<10} v {:<22} iterations {}", r.epsilon, r.v_eps, r.iterations);
                }
                println!("{}", dir.display());
            }
            Ok(())
        }
        Command::Validate => {
            let mut failed = 0usize;
            for (name, run) in selfwiring::checks::all() {
                match run() {
                    Ok(()) => {
                        if !cli.quiet {
                            println!("ok    {name}");
                        }
                    }
                    Err(msg) => {
                        failed += 1;
                        eprintln!("FAIL  {name}: {msg}");
                    }
                }
            }
            if failed > 0 {
                bail!("{failed} check(s) failed");
            }
            if !cli.quiet {
                println!("all checks passed");
            }
            Ok(())
        }
        Command::ReplayPlot { dir, output } => {
            let csv_path = dir.join("trajectory.csv");
            let text = fs::read_to_string(&csv_path)
                .with_context(|| format!("reading {}", csv_path.display()))?;
            let samples = io::parse_trajectory_csv(&text)?;
            let config = parse_config_file(&dir.join("config.json"))?;
            let svg = io::trajectory_svg(&samples, config.half_length);
            let target = output.unwrap_or_else(|| dir.join("replay.svg"));
            fs::write(&target, svg)
                .with_context(|| format!("writing {}", target.display()))?;
            if !cli.quiet {
                println!("{}", target.display());
            }
            Ok(())
        }
    }
}

fn apply_flags(config: &mut ScenarioConfig, flags: &RunFlags) {
    if let Some(seed) = flags.seed {
        config.seed = seed;
    }
    if flags.snapshot_every.is_some() {
        config.snapshot_every = flags.snapshot_every;
    }
    if flags.literal_noise {
        config.literal_noise = true;
    }
}

fn output_root(cli: &Cli, config_dir: Option<&str>) -> PathBuf {
    if let Some(out) = &cli.out {
        return out.clone();
    }
    if let Some(dir) = config_dir {
        return PathBuf::from(dir);
    }
    if let Some(env) = std::env::var_os(OUTPUT_ENV) {
        return PathBuf::from(env);
    }
    PathBuf::from("out")
}

fn execute_run(config: ScenarioConfig, cli: &Cli) -> Result<()> {
    config.validate()?;
    let root = output_root(cli, config.output_dir.as_deref());
    let dir = root.join(format!("run-{}", &config_hash(&config)[..12]));
    // fail on an unwritable destination before the simulation burns time
    ensure_writable(&dir)?;
    let mut manifest = RunManifest::begin(&config);
    let artifact = run_simulation(&config)?;
    emit_outputs(&artifact, &mut manifest, &dir)?;
    if !cli.quiet {
        let s = &artifact.summary;
        println!(
            "somas {} cones {} connections {} active at end {}",
            s.soma_count, s.cone_count, s.connection_count, s.final_active_cones
        );
        println!("{}", dir.display());
    }
    Ok(())
}
