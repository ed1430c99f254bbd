//! Latency and throughput summaries, SLA evaluation and the per-run report.

use serde::Serialize;
use thiserror::Error;

use crate::gamma::ScoreReport;
use crate::trace::Trace;
use crate::types::{OpKind, OperationRecord};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("percentile of an empty sample")]
    Empty,
    #[error("percentile rank {0} outside (0, 100]")]
    BadRank(f64),
}

/// Nearest-rank percentile: the `ceil(q/100 * n)`-th smallest sample.
pub fn percentile(samples: &[i64], q: f64) -> Result<i64, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    percentile_sorted(&sorted, q)
}

fn percentile_sorted(sorted: &[i64], q: f64) -> Result<i64, MetricsError> {
    if !(q > 0.0 && q <= 100.0) {
        return Err(MetricsError::BadRank(q));
    }
    if sorted.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = sorted.len();
    // small epsilon keeps exact ranks such as 95% of 100 from rounding up
    let rank = ((q / 100.0 * n as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(n) - 1])
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct KindStats {
    pub count: usize,
    pub mean_us: Option<f64>,
    pub p50_us: Option<i64>,
    pub p95_us: Option<i64>,
    pub p99_us: Option<i64>,
    pub max_us: Option<i64>,
}

impl KindStats {
    pub fn from_latencies(mut lat: Vec<i64>) -> Self {
        if lat.is_empty() {
            return KindStats::default();
        }
        lat.sort_unstable();
        let p = |q| percentile_sorted(&lat, q).ok();
        KindStats {
            count: lat.len(),
            mean_us: Some(lat.iter().sum::<i64>() as f64 / lat.len() as f64),
            p50_us: p(50.0),
            p95_us: p(95.0),
            p99_us: p(99.0),
            max_us: lat.last().copied(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LatencyStats {
    pub read: KindStats,
    pub write: KindStats,
}

fn latencies<'a>(records: impl Iterator<Item = &'a OperationRecord>, kind: OpKind) -> Vec<i64> {
    records.filter(|r| r.kind == kind).map(OperationRecord::latency_us).collect()
}

/// Latency per op kind over the transaction records of `trace`. Latency is
/// `response - invoke`, which includes injected delays.
pub fn summarize(trace: &Trace) -> LatencyStats {
    let recs = trace.transaction_records();
    LatencyStats {
        read: KindStats::from_latencies(latencies(recs.iter(), OpKind::Read)),
        write: KindStats::from_latencies(latencies(recs.iter(), OpKind::Write)),
    }
}

/// Completed transaction operations per second of virtual duration.
pub fn throughput(trace: &Trace) -> f64 {
    if trace.meta.duration_us <= 0 {
        return 0.0;
    }
    trace.transaction_records().len() as f64 * 1e6 / trace.meta.duration_us as f64
}

/// Average over hosts of each host's 95th-percentile latency for `kind`.
/// Clients `h * clients_per_host .. (h + 1) * clients_per_host` belong to host `h`.
pub fn per_host_p95(trace: &Trace, kind: OpKind, clients_per_host: u32) -> Option<f64> {
    let mut per_host: std::collections::BTreeMap<u32, Vec<i64>> = Default::default();
    for r in trace.transaction_records().iter().filter(|r| r.kind == kind) {
        per_host.entry(r.client_id / clients_per_host).or_default().push(r.latency_us());
    }
    if per_host.is_empty() {
        return None;
    }
    let sum: i64 = per_host
        .values()
        .map(|lat| percentile(lat, 95.0).expect("nonempty per-host sample"))
        .sum();
    Some(sum as f64 / per_host.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlaSpec {
    /// Bound on the 95th-percentile read latency, in milliseconds.
    pub latency_ms: f64,
    /// Bound on the stale-read fraction.
    pub stale_fraction: f64,
}

impl SlaSpec {
    pub fn new(latency_ms: f64, stale_fraction: f64) -> Result<Self, String> {
        if latency_ms.is_nan() || latency_ms <= 0.0 {
            return Err(format!("SLA latency bound must be positive, got {latency_ms}"));
        }
        if !(0.0..1.0).contains(&stale_fraction) {
            return Err(format!("SLA stale fraction must lie in [0, 1), got {stale_fraction}"));
        }
        Ok(SlaSpec { latency_ms, stale_fraction })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlaVerdict {
    pub latency_ok: bool,
    pub staleness_ok: bool,
    pub read_p95_ms: Option<f64>,
    pub stale_fraction: f64,
}

impl SlaVerdict {
    pub fn passed(&self) -> bool {
        self.latency_ok && self.staleness_ok
    }
}

/// Evaluates each SLA clause. The staleness clause uses the read-weighted
/// stale fraction. With no reads the latency clause holds vacuously.
pub fn sla_check(stats: &LatencyStats, score: &ScoreReport, sla: &SlaSpec) -> SlaVerdict {
    let read_p95_ms = stats.read.p95_us.map(|us| us as f64 / 1000.0);
    sla_check_values(read_p95_ms, score.stale_read_fraction, sla)
}

pub fn sla_check_values(read_p95_ms: Option<f64>, stale_fraction: f64, sla: &SlaSpec) -> SlaVerdict {
    SlaVerdict {
        latency_ok: read_p95_ms.is_none_or(|p| p <= sla.latency_ms),
        staleness_ok: stale_fraction <= sla.stale_fraction,
        read_p95_ms,
        stale_fraction,
    }
}

/// Joint output of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub config_digest: String,
    pub policy: String,
    pub duration_s: f64,
    pub completed_ops: usize,
    pub throughput_ops_s: f64,
    pub target_ops_s: f64,
    /// Achieved throughput fell more than 1% short of the target.
    pub throughput_shortfall: bool,
    pub latency: LatencyStats,
    /// Average of per-host read 95th percentiles, when enabled.
    pub per_host_read_p95_us: Option<f64>,
    pub per_host_write_p95_us: Option<f64>,
    pub gamma: ScoreReport,
    pub sla: Option<SlaVerdict>,
}

impl RunReport {
    /// Read 95th percentile in microseconds, honoring per-host averaging when enabled.
    pub fn read_p95_us(&self) -> Option<f64> {
        self.per_host_read_p95_us.or(self.latency.read.p95_us.map(|v| v as f64))
    }

    pub fn write_p95_us(&self) -> Option<f64> {
        self.per_host_write_p95_us.or(self.latency.write.p95_us.map(|v| v as f64))
    }
}
