//! Single runs and parameter sweeps over [`ExperimentConfig`]s.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::{ExperimentConfig, Resolved};
use crate::error::{Error, Result};
use crate::gamma::analyze;
use crate::metrics::{per_host_p95, sla_check, summarize, throughput, RunReport};
use crate::par;
use crate::sim::simulate;
use crate::trace::{save_trace, Trace};
use crate::types::OpKind;

/// Relative throughput shortfall beyond which a run is flagged.
pub const SHORTFALL_TOLERANCE: f64 = 0.01;

pub struct RunOutcome {
    pub trace: Trace,
    pub report: RunReport,
}

/// Simulates and analyzes one configuration entirely in memory.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    run_resolved(&cfg.resolve()?)
}

pub fn run_resolved(cfg: &Resolved) -> Result<RunOutcome> {
    let sim = &cfg.sim;
    let out = simulate(sim.clone()).map_err(Error::Config)?;
    let mut trace = out.trace;
    trace.meta.config_digest = cfg.digest.clone();

    let latency = summarize(&trace);
    let gamma = analyze(&trace, cfg.threshold_us);
    let achieved = throughput(&trace);
    let target = sim.workload.target_ops_per_host_per_s * sim.cluster.hosts as f64;
    let (per_host_read_p95_us, per_host_write_p95_us) = if cfg.per_host_avg {
        let cph = sim.workload.clients_per_host;
        (per_host_p95(&trace, OpKind::Read, cph), per_host_p95(&trace, OpKind::Write, cph))
    } else {
        (None, None)
    };
    let sla = cfg.sla.as_ref().map(|s| {
        let mut v = sla_check(&latency, &gamma, s);
        if let Some(p) = per_host_read_p95_us {
            v = crate::metrics::sla_check_values(Some(p / 1000.0), v.stale_fraction, s);
        }
        v
    });
    let report = RunReport {
        seed: sim.seed,
        config_digest: cfg.digest.clone(),
        policy: sim.policy.to_string(),
        duration_s: sim.workload.duration_s,
        completed_ops: out.completed_ops,
        throughput_ops_s: achieved,
        target_ops_s: target,
        throughput_shortfall: achieved < target * (1.0 - SHORTFALL_TOLERANCE),
        latency,
        per_host_read_p95_us,
        per_host_write_p95_us,
        gamma,
        sla,
    };
    Ok(RunOutcome { trace, report })
}

/// Report JSON as written to disk: pretty-printed with a trailing newline.
pub fn report_json<T: Serialize>(report: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, report_json(value)?).map_err(|e| Error::io(path, e))
}

/// Runs `cfg` and writes its trace and report to the configured paths.
pub fn run_to_files(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let resolved = cfg.resolve()?;
    let outcome = run_resolved(&resolved)?;
    save_trace(&outcome.trace, &resolved.trace_path)?;
    write_json(&outcome.report, &resolved.report_path)?;
    Ok(outcome)
}

/// One parameter swept over a list of values, each run with `seeds`
/// consecutive seeds starting at the base config's seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: String,
    pub values: Vec<String>,
    pub seeds: u32,
}

impl SweepSpec {
    pub fn new(param: impl Into<String>, values: Vec<String>, seeds: u32) -> Result<Self> {
        let param = param.into();
        if values.is_empty() {
            return Err(Error::config(format!("sweep over `{param}` has no values")));
        }
        if seeds == 0 {
            return Err(Error::config("sweep needs at least one seed"));
        }
        if param == "seed" {
            return Err(Error::config("sweep seeds with the seed count, not as a parameter"));
        }
        Ok(SweepSpec { param, values, seeds })
    }

    /// Splits a comma-separated value list.
    pub fn parse_values(list: &str) -> Vec<String> {
        list.split(',').map(str::trim).filter(|v| !v.is_empty()).map(String::from).collect()
    }

    /// The config of every sweep point, in output order (value-major).
    pub fn points(&self, base: &ExperimentConfig) -> Result<Vec<(String, u64, ExperimentConfig)>> {
        let base_seed: u64 = base
            .get("seed")?
            .parse()
            .map_err(|e| Error::config(format!("seed: {e}")))?;
        let mut points = Vec::with_capacity(self.values.len() * self.seeds as usize);
        for value in &self.values {
            for i in 0..self.seeds as u64 {
                let mut cfg = base.clone();
                cfg.set(&self.param, value)?;
                let seed = base_seed + i;
                cfg.set("seed", &seed.to_string())?;
                cfg.resolve()?;
                points.push((value.clone(), seed, cfg));
            }
        }
        Ok(points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: String,
    pub value: String,
    pub seed: u64,
    pub proportion_positive: f64,
    pub stale_read_fraction: f64,
    pub read_p95_us: Option<f64>,
    pub write_p95_us: Option<f64>,
    pub throughput_ops_s: f64,
}

impl SweepRow {
    pub fn from_report(param: &str, value: &str, report: &RunReport) -> Self {
        SweepRow {
            param: param.to_string(),
            value: value.to_string(),
            seed: report.seed,
            proportion_positive: report.gamma.proportion_positive,
            stale_read_fraction: report.gamma.stale_read_fraction,
            read_p95_us: report.read_p95_us(),
            write_p95_us: report.write_p95_us(),
            throughput_ops_s: report.throughput_ops_s,
        }
    }
}

/// Runs every sweep point (in parallel when enabled); rows come back in point order.
pub fn sweep(base: &ExperimentConfig, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    sweep_with(par::Strategy::default(), base, spec)
}

pub fn sweep_with(strategy: par::Strategy, base: &ExperimentConfig, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let points = spec.points(base)?;
    par::map_with(strategy, &points, |(value, _, cfg)| {
        run(cfg).map(|o| SweepRow::from_report(&spec.param, value, &o.report))
    })
    .into_iter()
    .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::config(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::io("<sweep output>", e))?;
    Ok(())
}
