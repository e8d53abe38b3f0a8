//! `shsm` command-line front end.
//!
//! Exit status is 0 on success, 1 for configuration, usage or I/O errors and
//! 2 when more than 5% of the channel draws of a point fail.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shsm_core::precoders::PrecoderKind;
use shsm_core::tass::{self, TassMethod};
use shsm_harness::config::{parse_config, parse_grid, ConfigError, ExperimentSpec};
use shsm_harness::experiment::{self, ResultRecord, RunError};
use shsm_harness::output;

#[derive(Debug, Parser)]
#[command(name = "shsm", version, about = "Secure hybrid spatial modulation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mean secrecy rate over an SNR grid
    Sweep,
    /// Per-draw secrecy-rate distribution at the first SNR of the grid
    Cdf,
    /// Every TASS method on shared channel draws
    Compare,
    /// FLOP estimates of the TASS methods
    Flops,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment file with `key = value` lines
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Channel draws per SNR point
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Monte-Carlo noise samples per draw
    #[arg(long, global = true)]
    noise_samples: Option<usize>,
    /// SNR grid in dB, `min:max:step` or a single value
    #[arg(long, global = true)]
    snr: Option<String>,
    /// max-asr-ga, max-asr-admm or sdr-altmin
    #[arg(long, global = true)]
    precoder: Option<String>,
    /// max-asr, max-ev, max-p-sinr-ansnr, leakage or random
    #[arg(long, global = true)]
    tass: Option<String>,
    /// Output CSV path
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Eavesdropper antennas
    #[arg(long, global = true)]
    ne: Option<usize>,
    /// Write measured wall times instead of zeros
    #[arg(long, global = true)]
    timing: bool,
}

enum Failure {
    Config(String),
    Budget(RunError),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure::Budget(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("cannot write output: {e}"))
    }
}

fn build_spec(c: &Common) -> Result<ExperimentSpec, Failure> {
    let mut spec = match &c.config {
        Some(path) => parse_config(path)?,
        None => ExperimentSpec::with_defaults(7),
    };
    if let Some(s) = c.seed {
        spec.seed = s;
    }
    if let Some(n) = c.trials {
        spec.n_channel_draws = n;
    }
    if let Some(n) = c.noise_samples {
        spec.n_noise_samples = n;
    }
    if let Some(g) = &c.snr {
        spec.snr_grid_db = parse_grid(g).map_err(|e| Failure::Config(format!("--snr: {e}")))?;
    }
    if let Some(p) = &c.precoder {
        spec.precoder =
            PrecoderKind::from_name(p).ok_or_else(|| Failure::Config(format!("unknown precoder `{p}`")))?;
    }
    if let Some(t) = &c.tass {
        spec.tass = TassMethod::from_name(t).ok_or_else(|| Failure::Config(format!("unknown TASS method `{t}`")))?;
    }
    if let Some(ne) = c.ne {
        spec.cfg.n_e = ne;
    }
    if let Some(out) = &c.out {
        spec.output_path = out.to_string_lossy().into_owned();
    }
    spec.validate()?;
    Ok(spec)
}

fn report(records: &[ResultRecord]) {
    for r in records {
        for (d, e) in r.failures() {
            eprintln!("warning: draw {d} at {} dB ({}, {}) failed: {e}", r.snr_db, r.precoder.name(), r.tass.name());
        }
        println!(
            "{:>6} dB  {:<13} {:<17} asr {:.4}  sr {:.4} +- {:.4}  ({} ok, {} failed)",
            r.snr_db,
            r.precoder.name(),
            r.tass.name(),
            r.mean_asr,
            r.mean_sr_mc,
            r.std_err,
            r.n_draws,
            r.n_failed
        );
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let spec = build_spec(&cli.common)?;
    let out = PathBuf::from(&spec.output_path);
    let timing = cli.common.timing;
    match cli.command {
        Command::Sweep => {
            let records = experiment::run_sweep(&spec)?;
            report(&records);
            output::write_records(&out, &records, timing)?;
        }
        Command::Compare => {
            let records = experiment::run_compare(&spec)?;
            report(&records);
            output::write_records(&out, &records, timing)?;
        }
        Command::Cdf => {
            let (record, curve) = experiment::run_cdf(&spec, spec.snr_grid_db[0])?;
            let records = [record];
            report(&records);
            output::write_records(&out, &records, timing)?;
            output::write_cdf(&out, &curve)?;
        }
        Command::Flops => {
            let rows = tass::flops_table(&spec.cfg);
            println!("method,flops");
            for r in &rows {
                println!("{},{}", r.method, r.flops);
            }
            if cli.common.out.is_some() {
                output::write_flops(&out, &rows)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Budget(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
