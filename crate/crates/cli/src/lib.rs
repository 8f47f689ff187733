//! Command-line driver: parses flags and config files, runs the harness and
//! writes results into an output directory.

pub mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use ssdfrc_core::experiments::{
    compare_ssr, default_m_grid, default_snr_grid, default_snr_m_grid, rate_report, run_grid, sweep_m, sweep_snr,
    write_sweep_csv, write_trial_csv, ExperimentError, Method, SweepPoint,
};

use config::{keys_help, parse_config, ReadError, RunConfig};

pub const SWEEP_M_FILE: &str = "sweep_m.csv";
pub const SWEEP_SNR_FILE: &str = "sweep_snr.csv";
pub const COMPARE_FILE: &str = "compare_ssr.csv";
pub const TRIALS_FILE: &str = "trials.csv";
pub const RATE_FILE: &str = "rate_report.txt";

/// SNR grid of the method comparison when none is configured.
pub const COMPARE_SNR_DEFAULT: [f64; 6] = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0];
/// Receive antennas of the method comparison when none is configured.
pub const COMPARE_M_DEFAULT: usize = 28;

#[derive(Debug, Parser)]
#[command(name = "ssdfrc", version, about = "Subcarrier-sharing DFRC index-modulation link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Runs trials at one operating point and writes trials.csv.
    Simulate(Common),
    /// Detection probability and runtime versus receive antennas (sweep_m.csv).
    SweepM(Common),
    /// Detection probability versus SNR for several receive-antenna counts (sweep_snr.csv).
    SweepSnr(Common),
    /// Projection detector against sparse recovery on paired realizations (compare_ssr.csv).
    CompareSsr(Common),
    /// Index capacity and sharing rate loss in bit/s (rate_report.txt).
    RateReport(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one key; repeatable. Wins over the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Trials per grid point.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; 1 runs serially.
    #[arg(long)]
    workers: Option<usize>,
    /// Base seed. Without it, SSDFRC_SEED is used when no config sets one.
    #[arg(long)]
    seed: Option<String>,
    /// Directory for result files.
    #[arg(long, value_name = "DIR", default_value = ".")]
    output_dir: PathBuf,
}

const SUBCOMMANDS: [&str; 5] = ["simulate", "sweep-m", "sweep-snr", "compare-ssr", "rate-report"];

fn command() -> clap::Command {
    let mut cmd = Cli::command();
    for name in SUBCOMMANDS {
        cmd = cmd.mut_subcommand(name, |s| s.after_help(keys_help()));
    }
    cmd
}

/// Help text of one subcommand, as printed by `--help`.
pub fn subcommand_help(name: &str) -> Option<String> {
    let mut cmd = command();
    cmd.build();
    cmd.find_subcommand_mut(name).map(|s| s.render_long_help().to_string())
}

pub fn subcommand_names() -> &'static [&'static str] {
    &SUBCOMMANDS
}

fn load(common: &Common) -> anyhow::Result<RunConfig> {
    let env_seed = std::env::var("SSDFRC_SEED").ok();
    let mut overrides = common.overrides.clone();
    if let Some(n) = common.trials {
        overrides.push(format!("n_trials={n}"));
    }
    if let Some(w) = common.workers {
        overrides.push(format!("workers={w}"));
    }
    if let Some(s) = &common.seed {
        overrides.push(format!("base_seed={s}"));
    }
    parse_config(common.config.as_deref(), &overrides, env_seed.as_deref())
}

fn prepare_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    Ok(())
}

fn progress_line(p: &SweepPoint) {
    eprintln!(
        "  M={:<3} snr={:>6.2} dB {:<10} P={:.4} [{:.4}, {:.4}] runtime={:.3e}s",
        p.m,
        p.snr_db,
        p.method.as_str(),
        p.detection_probability,
        p.ci_low,
        p.ci_high,
        p.mean_runtime_s
    );
}

fn announce(path: &Path) {
    println!("{}", path.display());
}

fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Simulate(c) => {
            let cfg = load(&c)?;
            prepare_dir(&c.output_dir)?;
            let method = Method::parse(&cfg.method).context("method")?;
            let s = &cfg.system;
            eprintln!(
                "simulate: M={} snr={} dB method={} trials={} seed={:#x}",
                s.n_receive,
                s.snr_db,
                method.as_str(),
                cfg.harness.n_trials,
                s.base_seed
            );
            let out = run_grid(s, &[(s.n_receive, s.snr_db)], &[method], &cfg.harness)?;
            out.points.iter().for_each(progress_line);
            let path = c.output_dir.join(TRIALS_FILE);
            write_trial_csv(&out.records, &path)?;
            announce(&path);
        }
        Command::SweepM(c) => {
            let cfg = load(&c)?;
            prepare_dir(&c.output_dir)?;
            let grid = cfg.m_values.clone().unwrap_or_else(default_m_grid);
            eprintln!("sweep-m: {} points x {} trials at {} dB", grid.len(), cfg.harness.n_trials, cfg.system.snr_db);
            let out = sweep_m(&cfg.system, &grid, &cfg.harness)?;
            out.points.iter().for_each(progress_line);
            let path = c.output_dir.join(SWEEP_M_FILE);
            write_sweep_csv(&out.points, &path)?;
            announce(&path);
        }
        Command::SweepSnr(c) => {
            let cfg = load(&c)?;
            prepare_dir(&c.output_dir)?;
            let snr = cfg.snr_values.clone().unwrap_or_else(default_snr_grid);
            let ms = cfg.m_values.clone().unwrap_or_else(default_snr_m_grid);
            eprintln!("sweep-snr: {} x {} points x {} trials", ms.len(), snr.len(), cfg.harness.n_trials);
            let out = sweep_snr(&cfg.system, &snr, &ms, &cfg.harness)?;
            out.points.iter().for_each(progress_line);
            let path = c.output_dir.join(SWEEP_SNR_FILE);
            write_sweep_csv(&out.points, &path)?;
            announce(&path);
        }
        Command::CompareSsr(c) => {
            let mut cfg = load(&c)?;
            if !cfg.receive_set {
                cfg.system.n_receive = COMPARE_M_DEFAULT;
                cfg.system.validate()?;
            }
            prepare_dir(&c.output_dir)?;
            let snr = cfg.snr_values.clone().unwrap_or_else(|| COMPARE_SNR_DEFAULT.to_vec());
            eprintln!(
                "compare-ssr: M={} over {} SNR points x {} paired trials",
                cfg.system.n_receive,
                snr.len(),
                cfg.harness.n_trials
            );
            let cmp = compare_ssr(&cfg.system, &snr, &cfg.harness)?;
            cmp.output.points.iter().for_each(progress_line);
            for (s, r) in &cmp.runtime_ratios {
                eprintln!("  snr={s:>6.2} dB runtime ratio ssr/projection = {r:.1}");
            }
            eprintln!("  (ratio measured against the in-repo accelerated proximal solver)");
            if !cmp.paired {
                bail!("internal error: methods saw different channels");
            }
            let path = c.output_dir.join(COMPARE_FILE);
            write_sweep_csv(&cmp.output.points, &path)?;
            announce(&path);
        }
        Command::RateReport(c) => {
            let cfg = load(&c)?;
            prepare_dir(&c.output_dir)?;
            let text = rate_report(&cfg.system)?.to_text();
            eprint!("{text}");
            let path = c.output_dir.join(RATE_FILE);
            std::fs::write(&path, &text).map_err(|source| ExperimentError::Io {
                path: path.clone(),
                source,
            })?;
            announce(&path);
        }
    }
    Ok(())
}

fn is_io(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.is::<std::io::Error>()
            || e.is::<ReadError>()
            || matches!(
                e.downcast_ref::<ExperimentError>(),
                Some(ExperimentError::Io { .. } | ExperimentError::Csv { .. })
            )
    })
}

/// Exit status: 0 success, 1 usage or validation error, 2 I/O error.
pub fn run<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_io(&e) { 2 } else { 1 })
        }
    }
}
