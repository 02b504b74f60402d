use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use thzlink::config::{parse_config, resolve_arms, Preset};
use thzlink::emit::{emit_results, EmitFormat};
use thzlink::simcore::{complexity_report, min_storage_bits, sweep};
use thzlink::Error;

#[derive(Parser)]
#[command(name = "thzlink", version, about = "Link-level Monte Carlo simulator for parallel THz baseband processing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a BLER sweep for every arm of a preset.
    Run {
        /// fig2, fig3, fig4 or custom (defaults to the config's `preset` key).
        #[arg(long)]
        preset: Option<Preset>,
        /// TOML overrides merged onto the preset.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long, default_value = "both")]
        emit: EmitFormat,
        /// Overrides `base_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (defaults to the available cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Only run arms with these labels.
        #[arg(long = "arm")]
        arms: Vec<String>,
    },
    /// Compare the cost counters of two configurations.
    Report {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        variant: PathBuf,
        /// SNR in dB (defaults to the baseline's first grid point).
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long, default_value_t = 200)]
        blocks: u64,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Minimum physical-layer storage `throughput * latency` in bits.
    Storage {
        /// Bits per second.
        #[arg(long)]
        throughput: f64,
        /// Seconds.
        #[arg(long)]
        latency: f64,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn read_config(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { preset, config, out, emit, seed, workers, arms } => {
            let text = match &config {
                Some(p) => read_config(p)?,
                None => String::new(),
            };
            let mut resolved = resolve_arms(&text, preset)?;
            if !arms.is_empty() {
                resolved.retain(|a| arms.contains(&a.label));
                if resolved.is_empty() {
                    return Err(Error::Config(format!("no arm matches {arms:?}")).into());
                }
            }
            let workers = workers.unwrap_or_else(default_workers);
            for mut arm in resolved {
                if let Some(s) = seed {
                    arm.config.base_seed = s;
                }
                eprintln!("running {} ({} SNR points)", arm.label, arm.config.snr_grid_db.len());
                let records = sweep(&arm.config, workers).with_context(|| format!("arm {}", arm.label))?;
                for r in &records {
                    println!(
                        "{:<16} snr {:>6} dB  bler {:<10.4e} ({}/{})  ber {:.3e}",
                        arm.label, r.snr_db, r.bler, r.block_errors, r.blocks, r.ber
                    );
                }
                for p in emit_results(&records, &arm.label, &arm.config, &out, emit)? {
                    eprintln!("wrote {}", p.display());
                }
            }
            Ok(())
        }
        Command::Report { baseline, variant, snr, blocks, workers } => {
            let b = parse_config(&read_config(&baseline)?)?;
            let v = parse_config(&read_config(&variant)?)?;
            let snr = snr.unwrap_or(b.snr_grid_db[0]);
            let report = complexity_report(&b, &v, snr, blocks, workers.unwrap_or_else(default_workers))?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Storage { throughput, latency } => {
            println!("{}", min_storage_bits(throughput, latency)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Config(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
