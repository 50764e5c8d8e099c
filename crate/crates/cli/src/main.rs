use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qsync_cli::{exit_code, load_scenario, output_dir, sweep_sync_time, sync_time_csv, PRESETS};
use qsync_core::chain::ChainParams;
use qsync_core::report::dfs_report;
use qsync_core::scenario::run_scenario;
use qsync_core::{Error, Result};

#[derive(Parser)]
#[command(name = "qsync", version, about = "Monitored spin-chain trajectory ensembles")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or preset.
    Run {
        /// Path to a TOML scenario, or a preset name.
        scenario: String,
        /// Output directory (overrides the scenario and the environment).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        ensemble_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        t_final: Option<f64>,
    },
    /// Print the decoherence-free subspaces of a chain as JSON.
    Analyze {
        #[arg(long)]
        n: usize,
        /// Monitored site, 1-based.
        #[arg(long)]
        site: usize,
        /// Reduced measurement strength Γ/J.
        #[arg(long, default_value_t = 0.7 / std::f64::consts::PI)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        j: f64,
        #[arg(long, default_value_t = 1.0)]
        h: f64,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean and variance of the synchronization time across measurement strengths.
    SweepSyncTime {
        scenario: String,
        /// Comma-separated list of Γ/J values.
        #[arg(long, value_delimiter = ',', required = true)]
        gammas: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        ensemble_size: Option<usize>,
    },
    /// Shipped scenario presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// List preset names and descriptions.
    List,
    /// Print a preset's TOML.
    Show { name: String },
}

fn write_file(path: &std::path::Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Run {
            scenario,
            out,
            ensemble_size,
            seed,
            t_final,
        } => {
            let mut cfg = load_scenario(&scenario)?;
            if let Some(m) = ensemble_size {
                cfg.ensemble_size = m;
            }
            if let Some(s) = seed {
                cfg.integrator.seed = s;
            }
            if let Some(t) = t_final {
                cfg.integrator.t_final = t;
            }
            cfg.validate()?;
            let dir = output_dir(out, &cfg);
            let outcome = run_scenario(&cfg, Some(&dir))?;
            for p in &outcome.summary.points {
                let tag = p.point.tag();
                let trap = p
                    .trapping
                    .as_ref()
                    .map(|h| {
                        h.labels
                            .iter()
                            .zip(&h.fractions)
                            .map(|(l, f)| format!("{l}={f:.3}"))
                            .collect::<Vec<_>>()
                            .join(" ")
                    })
                    .unwrap_or_default();
                println!(
                    "{} {tag} M={} trapped[{trap}] synchronized={}",
                    p.scenario, p.ensemble_size, p.synchronized
                );
            }
            println!(
                "wrote {} files to {} in {:.1} s",
                outcome.manifest.files.len() + 1,
                dir.display(),
                outcome.manifest.wall_clock_seconds
            );
        }
        Command::Analyze {
            n,
            site,
            gamma,
            j,
            h,
            out,
        } => {
            let params = ChainParams {
                n,
                j,
                h,
                gamma,
                measured_site: site,
            };
            let report = dfs_report(params)?;
            let text = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::Serialization(e.to_string()))?;
            println!("{text}");
            if let Some(path) = out {
                write_file(&path, &text)?;
            }
        }
        Command::SweepSyncTime {
            scenario,
            gammas,
            out,
            ensemble_size,
        } => {
            let mut cfg = load_scenario(&scenario)?;
            if let Some(m) = ensemble_size {
                cfg.ensemble_size = m;
            }
            let dir = output_dir(out, &cfg);
            let (rows, _) = sweep_sync_time(&cfg, &gammas, Some(&dir))?;
            let csv = sync_time_csv(&rows);
            print!("{csv}");
            write_file(&dir.join("sync_time.csv"), &csv)?;
        }
        Command::Presets { action } => match action {
            PresetAction::List => {
                for (name, _) in PRESETS {
                    let cfg = qsync_cli::preset(name)?;
                    println!("{name:20} {}", cfg.description);
                }
            }
            PresetAction::Show { name } => {
                let text = qsync_cli::preset_text(&name)
                    .ok_or_else(|| Error::config(format!("unknown preset '{name}'")))?;
                print!("{text}");
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
