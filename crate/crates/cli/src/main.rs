use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hrlab::harness::{
    prepare_segments, prove_means, synthetic_bars, write_outputs, MarketConfig, RunConfig,
    SweepConfig, SweepOutput,
};

#[derive(Parser)]
#[command(version, about = "Harmonic reward-rate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the mixed-sign harmonic mean against the general-mean axioms
    ProveMeans {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        cases: usize,
    },
    /// Two-state SMDP sweep from the `[two_state]` table
    SimTwoState(RunArgs),
    /// Market backtest of a bar file using the `[market]` table
    Backtest {
        /// CSV with timestamp, open and close columns
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Every experiment the config describes
    Sweep(RunArgs),
    /// Write seeded synthetic minute bars as CSV
    SynthBars {
        #[arg(long, default_value_t = 350_000)]
        rows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads, 0 for all cores
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn load(args: &RunArgs) -> Result<(RunConfig, String)> {
    RunConfig::load(&args.config).with_context(|| format!("reading {}", args.config.display()))
}

fn two_state(cfg: &SweepConfig, text: &str, jobs: usize, out: &Path) -> Result<()> {
    let output = SweepOutput::two_state(cfg, text, jobs)?;
    write_outputs(&output, out).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "{:<14} {:>10} {:>6} {:>8}",
        "variant", "log_scale", "runs", "success"
    );
    for p in &output.success_curve {
        println!(
            "{:<14} {:>10.3e} {:>6} {:>8.3}",
            p.variant.to_string(),
            p.log_scale,
            p.runs,
            p.success_rate
        );
    }
    report(&output, out);
    Ok(())
}

fn market(cfg: &MarketConfig, data: &Path, text: &str, jobs: usize, out: &Path) -> Result<()> {
    let (segments, repairs) =
        prepare_segments(data, cfg).with_context(|| format!("loading {}", data.display()))?;
    println!("{} segments, {repairs} gaps repaired", segments.len());
    let output = SweepOutput::market(cfg, &segments, text, jobs)?;
    write_outputs(&output, out).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "{:<14} {:<14} {:>3} {:<7} {:>6} {:>10}",
        "variant", "opponent", "k", "mode", "beta", "win_ratio"
    );
    for a in output.aggregates.iter().filter(|a| a.win_ratio.is_some()) {
        println!(
            "{:<14} {:<14} {:>3} {:<7} {:>6} {:>10.3}",
            a.variant.to_string(),
            a.opponent.map(|o| o.to_string()).unwrap_or_default(),
            a.window_size.unwrap_or(0),
            a.duration_mode
                .map(|m| format!("{m:?}").to_lowercase())
                .unwrap_or_default(),
            a.beta.unwrap_or(f64::NAN),
            a.win_ratio.unwrap_or(f64::NAN),
        );
    }
    report(&output, out);
    Ok(())
}

fn report(output: &SweepOutput, out: &Path) {
    let m = &output.manifest;
    println!(
        "{} runs, {} failed, written to {}",
        m.runs,
        m.failures,
        out.display()
    );
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::ProveMeans { seed, cases } => {
            let checks = prove_means(seed, cases);
            println!(
                "{:<44} {:>7} {:>10} {:>10}",
                "property", "cases", "violations", "worst"
            );
            for c in &checks {
                println!(
                    "{:<44} {:>7} {:>10} {:>10.3e}",
                    c.name, c.cases, c.violations, c.worst
                );
            }
            for c in checks.iter().filter(|c| !c.passed()) {
                if let Some(x) = &c.counterexample {
                    println!("{}: {x}", c.name);
                }
            }
            return Ok(if checks.iter().all(|c| c.passed()) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            });
        }
        Command::SimTwoState(args) => {
            let (cfg, text) = load(&args)?;
            let sweep = cfg.two_state.unwrap_or_default();
            two_state(&sweep, &text, args.jobs, &args.out)?;
        }
        Command::Backtest { data, run } => {
            let (cfg, text) = load(&run)?;
            let m = cfg.market.unwrap_or_default();
            market(&m, &data, &text, run.jobs, &run.out)?;
        }
        Command::Sweep(args) => {
            let (cfg, text) = load(&args)?;
            if cfg.two_state.is_none() && cfg.market.is_none() {
                bail!(
                    "{} has neither [two_state] nor [market]",
                    args.config.display()
                );
            }
            if let Some(s) = &cfg.two_state {
                two_state(s, &text, args.jobs, &args.out.join("two_state"))?;
            }
            if let Some(m) = &cfg.market {
                let Some(data) = &cfg.data else {
                    bail!("[market] needs a top-level `data` path");
                };
                // Relative data paths are taken from the config's directory.
                let data = args.config.parent().unwrap_or(Path::new(".")).join(data);
                market(m, &data, &text, args.jobs, &args.out.join("market"))?;
            }
        }
        Command::SynthBars { rows, seed, out } => {
            let file = std::fs::File::create(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            let mut w = std::io::BufWriter::new(file);
            writeln!(w, "timestamp,open,close")?;
            for b in synthetic_bars(rows, seed) {
                writeln!(w, "{},{},{}", b.timestamp, b.open, b.close)?;
            }
            w.flush()?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
