use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cpqsim::config::{ExperimentConfig, CONFIG_ENV};
use cpqsim::experiment::{self, SweepSpec};
use cpqsim::gamma::{self, KeyCheck, DEFAULT_THRESHOLD_US};
use cpqsim::trace::load_trace;
use cpqsim::{Error, Result};

/// Quorum-replicated key-value store simulator and consistency analyzer.
#[derive(Parser, Debug)]
#[command(name = "cpqsim", version, about)]
struct Cli {
    /// Config file (INI-style key = value).
    #[arg(long, short, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. `--set policy.kind=cpq`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one configuration; write its trace and report.
    Run {
        /// Trace CSV path (overrides out.trace).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Report JSON path (overrides out.report).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a configuration for every value of one parameter; emit CSV.
    Sweep {
        /// Config key to vary, e.g. policy.p or policy.read_delay_ms.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        /// Seeds per value, counting up from the configured seed.
        #[arg(long, default_value_t = 1)]
        seeds: u32,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score an existing trace file.
    Analyze {
        trace: PathBuf,
        /// Scores above this many microseconds count as positive.
        #[arg(long, default_value_t = DEFAULT_THRESHOLD_US)]
        threshold_us: i64,
        /// Report JSON path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare zone scores with the exhaustive minimal-stretch search, per key.
    Oracle { trace: PathBuf },
    /// Print the effective configuration.
    Config,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::desk(),
    };
    for pair in &cli.overrides {
        cfg.set_pair(pair)?;
    }
    Ok(cfg)
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run { trace, report } => {
            let mut cfg = load_config(cli)?;
            if let Some(p) = trace {
                cfg.set("out.trace", &p.to_string_lossy())?;
            }
            if let Some(p) = report {
                cfg.set("out.report", &p.to_string_lossy())?;
            }
            let outcome = experiment::run_to_files(&cfg)?;
            let r = &outcome.report;
            eprintln!(
                "{} ops, {:.1} ops/s (target {:.0}){}, read p95 {} us, proportion_positive {:.5}",
                r.completed_ops,
                r.throughput_ops_s,
                r.target_ops_s,
                if r.throughput_shortfall { " SHORTFALL" } else { "" },
                r.read_p95_us().map_or("-".into(), |v| format!("{v:.0}")),
                r.gamma.proportion_positive,
            );
            Ok(())
        }
        Command::Sweep { param, values, seeds, out } => {
            let cfg = load_config(cli)?;
            let spec = SweepSpec::new(param.clone(), SweepSpec::parse_values(values), *seeds)?;
            let rows = experiment::sweep(&cfg, &spec)?;
            let mut buf = Vec::new();
            experiment::write_sweep_csv(&rows, &mut buf)?;
            emit(&String::from_utf8(buf).expect("csv output is UTF-8"), out.as_deref())
        }
        Command::Analyze { trace, threshold_us, out } => {
            if *threshold_us < 0 {
                return Err(Error::config("threshold must be nonnegative"));
            }
            let trace = load_trace(trace)?;
            let report = gamma::analyze(&trace, *threshold_us);
            emit(&experiment::report_json(&report)?, out.as_deref())
        }
        Command::Oracle { trace } => {
            let trace = load_trace(trace)?;
            let mut text = String::new();
            let mut disagreements = 0;
            for check in gamma::oracle_check(&trace) {
                match check {
                    KeyCheck::Checked { key, ops, oracle_us, zone_us } => {
                        let verdict = if oracle_us == zone_us { "agree" } else { "DISAGREE" };
                        if oracle_us != zone_us {
                            disagreements += 1;
                        }
                        text += &format!("key {key}: ops={ops} delta_us={oracle_us} zone_us={zone_us} {verdict}\n");
                    }
                    KeyCheck::Skipped { key, ops } => {
                        text += &format!(
                            "key {key}: ops={ops} skipped (oracle limit {})\n",
                            gamma::ORACLE_MAX_OPS
                        );
                    }
                }
            }
            text += &format!("disagreements: {disagreements}\n");
            emit(&text, None)
        }
        Command::Config => {
            let cfg = load_config(cli)?;
            cfg.resolve()?;
            emit(&format!("{cfg}# digest={}\n", cfg.digest()?), None)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
