//! `dualfp`: scans, oracle verification, spectral analysis and Monte Carlo
//! runs for the dual-channel Fabry-Pérot interferometer.
//!
//! Exit status: 0 success, 1 verification or statistical failure, 2 invalid
//! input (including unreadable or unwritable files).

mod config;
mod output;
mod scan;
mod spectral;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use output::{emit, json_bytes, write_sidecar, Format, Meta};

#[derive(Debug, Parser)]
#[command(name = "dualfp", version, about = "Dual-channel Fabry-Perot interferometry of entangled photon pairs")]
struct Cli {
    /// TOML file with one section per subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted. An `.effective.toml` sidecar is
    /// written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the `seed` key of the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output format; scans default to csv, reports to json.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Rate over the (d_L, d_R) plane for one post-selection channel.
    Scan2d,
    /// Transmission coincidence of the single-cavity geometry versus d.
    ScanSingle,
    /// Cavity-length scan with a finite-bandwidth pair envelope.
    SpectralScan,
    /// Recover spectral components from a spectral-scan CSV.
    SpectralReadout,
    /// Compare closed-form amplitudes with brute-force path sums.
    OracleCheck,
    /// Monte Carlo click streams and the closure test against the closed forms.
    Simulate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Scan2d => "scan2d",
            Command::ScanSingle => "scan-single",
            Command::SpectralScan => "spectral-scan",
            Command::SpectralReadout => "spectral-readout",
            Command::OracleCheck => "oracle-check",
            Command::Simulate => "simulate",
        }
    }
}

enum Verdict {
    Pass,
    Fail(String),
}

/// Effective config holding only the section for `command`, defaults filled.
fn effective(loaded: RunConfig, command: Command, seed: u64) -> RunConfig {
    let mut cfg = RunConfig { seed, ..RunConfig::default() };
    match command {
        Command::Scan2d => cfg.scan2d = Some(loaded.scan2d.unwrap_or_default()),
        Command::ScanSingle => cfg.scan_single = Some(loaded.scan_single.unwrap_or_default()),
        Command::SpectralScan => cfg.spectral_scan = Some(loaded.spectral_scan.unwrap_or_default()),
        Command::SpectralReadout => cfg.spectral_readout = Some(loaded.spectral_readout.unwrap_or_default()),
        Command::OracleCheck => cfg.oracle_check = Some(loaded.oracle_check.unwrap_or_default()),
        Command::Simulate => cfg.simulate = Some(loaded.simulate.unwrap_or_default()),
    }
    cfg
}

fn execute(cli: &Cli, cfg: &RunConfig) -> anyhow::Result<(Vec<u8>, Verdict)> {
    let meta = Meta::new(cli.command.name(), cfg.seed);
    let table_format = cli.format.unwrap_or(Format::Csv);
    let report_format = cli.format.unwrap_or(Format::Json);
    let section = "section filled by effective()";
    Ok(match cli.command {
        Command::Scan2d => (scan::scan2d(cfg.scan2d.as_ref().expect(section))?.render(&meta, table_format)?, Verdict::Pass),
        Command::ScanSingle => {
            (scan::scan_single(cfg.scan_single.as_ref().expect(section))?.render(&meta, table_format)?, Verdict::Pass)
        }
        Command::SpectralScan => (
            spectral::spectral_scan(cfg.spectral_scan.as_ref().expect(section))?.render(&meta, table_format)?,
            Verdict::Pass,
        ),
        Command::SpectralReadout => {
            let report = spectral::readout(cfg.spectral_readout.as_ref().expect(section))?;
            let bytes = match report_format {
                Format::Json => json_bytes(&serde_json::json!({ "meta": meta, "readout": report }))?,
                Format::Csv => report.table().render(&meta, Format::Csv)?,
            };
            (bytes, Verdict::Pass)
        }
        Command::OracleCheck => {
            let report = verify::oracle_check(cfg.oracle_check.as_ref().expect(section), meta.clone())?;
            let verdict = if report.passed {
                Verdict::Pass
            } else {
                let mut msg = format!("oracle check failed for {}", report.failing_outcomes().join(", "));
                if let Some(e) = report.cases.iter().find_map(|c| c.explanation.as_ref()) {
                    msg.push_str(&format!("\n  {e}"));
                }
                Verdict::Fail(msg)
            };
            let bytes = match report_format {
                Format::Json => json_bytes(&report)?,
                Format::Csv => report.table().render(&meta, Format::Csv)?,
            };
            (bytes, verdict)
        }
        Command::Simulate => {
            let report = verify::simulate(cfg.simulate.as_ref().expect(section), meta.clone())?;
            let verdict = if report.passed {
                Verdict::Pass
            } else {
                Verdict::Fail(format!("channels outside 5σ: {}", report.failing_channels().join(", ")))
            };
            let bytes = match report_format {
                Format::Json => json_bytes(&report)?,
                Format::Csv => report.table().render(&meta, Format::Csv)?,
            };
            (bytes, verdict)
        }
    })
}

fn run(cli: &Cli) -> anyhow::Result<Verdict> {
    if let Some(n) = cli.threads {
        anyhow::ensure!(n >= 1, "--threads must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let loaded = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.unwrap_or(loaded.seed);
    let cfg = effective(loaded, cli.command, seed);
    let (bytes, verdict) = execute(cli, &cfg)?;
    emit(cli.out.as_deref(), &bytes)?;
    if let Some(out) = &cli.out {
        write_sidecar(out, &cfg)?;
    }
    Ok(verdict)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail(msg)) => {
            eprintln!("dualfp {}: {msg}", cli.command.name());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("dualfp {}: error: {e:#}", cli.command.name());
            ExitCode::from(2)
        }
    }
}
