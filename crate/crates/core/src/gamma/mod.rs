//! Client-centric consistency analysis with per-value Γ scores.
//!
//! A trace is clustered by `(key, value)`: the write of a value plus every
//! read that returned it. Each cluster has a zone bounded by its earliest
//! response (`low`) and latest invoke (`high`). When `high > low` the zone is
//! *forward*: some operation of the value finished before another began, so
//! the value must stay current across the whole zone and no other value of
//! the key may be linearized inside it.
//!
//! The per-value score of a forward cluster `C` is
//!
//! ```text
//! γ(C) = max(0,
//!            write.invoke - min over reads of read.response,
//!            max over sibling clusters U of min(len(C), U.high - C.low, C.high - U.low))
//! ```
//!
//! where `len(C) = C.high - C.low`; backward clusters score 0. The second
//! term measures a read that finished before its own write began. The sibling
//! term is the stretch at which `C` and `U` stop forcing each other to come
//! first. The maximum score on a key equals the minimal uniform stretch that
//! makes that key's history linearizable; [`min_stretch_oracle`] checks this
//! by brute force.

mod oracle;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::par;
use crate::trace::Trace;
use crate::types::{ConsistencyLevel, OpKind, OperationRecord, SimTime};

pub use oracle::{linearizable, min_stretch_oracle, OracleOp, ORACLE_MAX_OPS};

/// Scores at or below this many microseconds are treated as clock noise.
pub const DEFAULT_THRESHOLD_US: i64 = 2000;

/// Client id used for synthetic initial writes.
pub const SYNTHETIC_CLIENT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Member {
    pub op_id: u64,
    pub kind: OpKind,
    pub invoke: SimTime,
    pub response: SimTime,
}

impl From<&OperationRecord> for Member {
    fn from(r: &OperationRecord) -> Self {
        Member { op_id: r.op_id, kind: r.kind, invoke: r.invoke, response: r.response }
    }
}

/// All operations of one `(key, value)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub key: u64,
    pub value_id: u64,
    pub write: Option<Member>,
    pub reads: Vec<Member>,
}

impl Cluster {
    pub fn members(&self) -> impl Iterator<Item = &Member> {
        self.write.iter().chain(self.reads.iter())
    }

    pub fn len(&self) -> usize {
        self.reads.len() + usize::from(self.write.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterZone {
    /// Earliest response among members.
    pub low: SimTime,
    /// Latest invoke among members.
    pub high: SimTime,
    pub polarity: Polarity,
}

impl ClusterZone {
    pub fn interval(&self) -> (SimTime, SimTime) {
        (self.low.min(self.high), self.low.max(self.high))
    }

    /// Signed zone length: positive for forward zones.
    pub fn span(&self) -> i64 {
        self.high - self.low
    }
}

/// Groups a trace by `(key, value_id)`, ordered by key then value.
///
/// Fails when a read returns a value with no write in the trace; see
/// [`insert_synthetic_initial_writes`].
pub fn build_clusters(trace: &Trace) -> Result<Vec<Cluster>> {
    let mut map: BTreeMap<(u64, u64), Cluster> = BTreeMap::new();
    for r in &trace.records {
        let c = map.entry((r.key, r.value_id)).or_insert_with(|| Cluster {
            key: r.key,
            value_id: r.value_id,
            write: None,
            reads: Vec::new(),
        });
        match r.kind {
            OpKind::Write => c.write = Some(Member::from(r)),
            OpKind::Read => c.reads.push(Member::from(r)),
        }
    }
    let mut dangling = map.values().filter(|c| c.write.is_none());
    if let Some(first) = dangling.next() {
        return Err(Error::DanglingReads {
            count: 1 + dangling.count(),
            key: first.key,
            value_id: first.value_id,
        });
    }
    Ok(map.into_values().collect())
}

pub fn compute_zone(cluster: &Cluster) -> ClusterZone {
    let low = cluster.members().map(|m| m.response).min().expect("nonempty cluster");
    let high = cluster.members().map(|m| m.invoke).max().expect("nonempty cluster");
    let polarity = if high > low { Polarity::Forward } else { Polarity::Backward };
    ClusterZone { low, high, polarity }
}

#[derive(Debug, Clone, Copy)]
struct ZoneSummary {
    low: i64,
    high: i64,
    /// `write.invoke - min read response`, or `i64::MIN` without reads.
    write_lead: i64,
}

fn summarize_cluster(c: &Cluster) -> ZoneSummary {
    let z = compute_zone(c);
    let write_lead = match (&c.write, c.reads.iter().map(|r| r.response).min()) {
        (Some(w), Some(first_finish)) => w.invoke - first_finish,
        _ => i64::MIN,
    };
    ZoneSummary { low: z.low.micros(), high: z.high.micros(), write_lead }
}

/// Scores for the clusters of one key, in input order.
fn score_key(zones: &[ZoneSummary]) -> Vec<i64> {
    // Siblings sorted by low; only those with U.low < C.high can contribute.
    let mut by_low: Vec<usize> = (0..zones.len()).collect();
    by_low.sort_by_key(|&i| zones[i].low);
    let lows: Vec<i64> = by_low.iter().map(|&i| zones[i].low).collect();
    let prefix_max_high: Vec<i64> = by_low
        .iter()
        .scan(i64::MIN, |m, &i| {
            *m = (*m).max(zones[i].high);
            Some(*m)
        })
        .collect();

    zones
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let len = c.high - c.low;
            if len <= 0 {
                return 0;
            }
            let mut best = c.write_lead.max(0);
            let end = lows.partition_point(|&l| l < c.high);
            for j in (0..end).rev() {
                if best >= len || prefix_max_high[j] - c.low <= best {
                    break;
                }
                let ui = by_low[j];
                if ui == ci {
                    continue;
                }
                let u = &zones[ui];
                let term = len.min(u.high - c.low).min(c.high - u.low);
                best = best.max(term);
            }
            best
        })
        .collect()
}

/// Per-value Γ scores keyed by `(key, value_id)`.
pub fn per_value_scores(clusters: &[Cluster]) -> BTreeMap<(u64, u64), i64> {
    per_value_scores_with(par::Strategy::default(), clusters)
}

pub fn per_value_scores_with(strategy: par::Strategy, clusters: &[Cluster]) -> BTreeMap<(u64, u64), i64> {
    let mut by_key: Vec<&[Cluster]> = Vec::new();
    let mut start = 0;
    for i in 1..=clusters.len() {
        if i == clusters.len() || clusters[i].key != clusters[start].key {
            if i > start {
                by_key.push(&clusters[start..i]);
            }
            start = i;
        }
    }
    debug_assert!(
        clusters.windows(2).all(|w| w[0].key <= w[1].key),
        "clusters must be grouped by key"
    );
    let scored: Vec<Vec<((u64, u64), i64)>> = par::map_with(strategy, &by_key, |group| {
        let zones: Vec<ZoneSummary> = group.iter().map(summarize_cluster).collect();
        group
            .iter()
            .zip(score_key(&zones))
            .map(|(c, g)| ((c.key, c.value_id), g))
            .collect()
    });
    scored.into_iter().flatten().collect()
}

/// Fraction of scores strictly above `threshold_us`; 0 for no scores.
pub fn proportion_positive<'a>(scores: impl IntoIterator<Item = &'a i64>, threshold_us: i64) -> f64 {
    let (mut total, mut positive) = (0usize, 0usize);
    for &g in scores {
        total += 1;
        positive += usize::from(g > threshold_us);
    }
    if total == 0 {
        0.0
    } else {
        positive as f64 / total as f64
    }
}

/// Prepends a zero-length write, one microsecond before the earliest invoke,
/// for every `(key, value)` that is read but never written. Idempotent.
pub fn insert_synthetic_initial_writes(trace: &Trace) -> Trace {
    let written: HashSet<(u64, u64)> = trace
        .records
        .iter()
        .filter(|r| r.is_write())
        .map(|r| (r.key, r.value_id))
        .collect();
    let missing: BTreeSet<(u64, u64)> = trace
        .records
        .iter()
        .filter(|r| r.is_read() && !written.contains(&(r.key, r.value_id)))
        .map(|r| (r.key, r.value_id))
        .collect();
    if missing.is_empty() {
        return trace.clone();
    }
    let t0 = trace.records.iter().map(|r| r.invoke).min().expect("reads exist") - 1;
    let first_id = trace.records.iter().map(|r| r.op_id).max().unwrap_or(0) + 1;
    let mut records = Vec::with_capacity(trace.len() + missing.len());
    for (op_id, &(key, value_id)) in (first_id..).zip(&missing) {
        records.push(OperationRecord {
            op_id,
            client_id: SYNTHETIC_CLIENT,
            key,
            kind: OpKind::Write,
            value_id,
            invoke: t0,
            response: t0,
            level: ConsistencyLevel::One,
            pre_delay_us: 0,
            post_delay_us: 0,
        });
    }
    records.extend(trace.records.iter().cloned());
    let mut meta = trace.meta.clone();
    meta.load_ops += missing.len();
    Trace { meta, records }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HistogramBucket {
    /// Inclusive upper bound in microseconds; `None` for the overflow bucket.
    pub le_us: Option<i64>,
    pub count: usize,
}

const HISTOGRAM_BOUNDS_US: [i64; 9] = [0, 1000, 2000, 5000, 10_000, 20_000, 50_000, 100_000, 1_000_000];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueScore {
    pub key: u64,
    pub value_id: u64,
    pub gamma_us: i64,
}

/// Outcome of analyzing one trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub scores_histogram: Vec<HistogramBucket>,
    /// Fraction of values (clusters) whose score exceeds the threshold.
    pub proportion_positive: f64,
    /// Fraction of reads that belong to a value scoring above the threshold.
    pub stale_read_fraction: f64,
    pub threshold_us: i64,
    pub clusters: usize,
    pub reads: usize,
    /// Values scoring above the threshold.
    pub positive_clusters: usize,
    /// Values scoring above zero.
    pub raw_positive_clusters: usize,
    pub max_gamma_us: i64,
    /// Every value with a nonzero score, ordered by key then value.
    pub positive_scores: Vec<ValueScore>,
    #[serde(skip)]
    pub scores: BTreeMap<(u64, u64), i64>,
}

impl ScoreReport {
    pub fn from_clusters(clusters: &[Cluster], threshold_us: i64) -> Self {
        let scores = per_value_scores(clusters);
        let reads: usize = clusters.iter().map(|c| c.reads.len()).sum();
        let stale_reads: usize = clusters
            .iter()
            .filter(|c| scores[&(c.key, c.value_id)] > threshold_us)
            .map(|c| c.reads.len())
            .sum();
        let mut histogram: Vec<HistogramBucket> = HISTOGRAM_BOUNDS_US
            .iter()
            .map(|&b| HistogramBucket { le_us: Some(b), count: 0 })
            .chain(std::iter::once(HistogramBucket { le_us: None, count: 0 }))
            .collect();
        for &g in scores.values() {
            let idx = HISTOGRAM_BOUNDS_US.partition_point(|&b| b < g);
            histogram[idx].count += 1;
        }
        ScoreReport {
            scores_histogram: histogram,
            proportion_positive: proportion_positive(scores.values(), threshold_us),
            stale_read_fraction: if reads == 0 { 0.0 } else { stale_reads as f64 / reads as f64 },
            threshold_us,
            clusters: clusters.len(),
            reads,
            positive_clusters: scores.values().filter(|&&g| g > threshold_us).count(),
            raw_positive_clusters: scores.values().filter(|&&g| g > 0).count(),
            max_gamma_us: scores.values().copied().max().unwrap_or(0),
            positive_scores: scores
                .iter()
                .filter(|(_, &g)| g > 0)
                .map(|(&(key, value_id), &gamma_us)| ValueScore { key, value_id, gamma_us })
                .collect(),
            scores,
        }
    }
}

/// Full analysis pipeline: synthetic writes where needed, clustering, scoring.
pub fn analyze(trace: &Trace, threshold_us: i64) -> ScoreReport {
    let prepared = insert_synthetic_initial_writes(trace);
    let clusters = build_clusters(&prepared).expect("synthetic writes cover every read");
    ScoreReport::from_clusters(&clusters, threshold_us)
}

/// Per-key comparison of the oracle against the zone scores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeyCheck {
    Checked { key: u64, ops: usize, oracle_us: i64, zone_us: i64 },
    Skipped { key: u64, ops: usize },
}

impl KeyCheck {
    pub fn agrees(&self) -> bool {
        match self {
            KeyCheck::Checked { oracle_us, zone_us, .. } => oracle_us == zone_us,
            KeyCheck::Skipped { .. } => true,
        }
    }
}

/// Runs the oracle on every key small enough for it.
pub fn oracle_check(trace: &Trace) -> Vec<KeyCheck> {
    let prepared = insert_synthetic_initial_writes(trace);
    let mut per_key: BTreeMap<u64, Vec<&OperationRecord>> = BTreeMap::new();
    for r in &prepared.records {
        per_key.entry(r.key).or_default().push(r);
    }
    let keys: Vec<(u64, Vec<&OperationRecord>)> = per_key.into_iter().collect();
    par::map(&keys, |(key, ops)| {
        if ops.len() > ORACLE_MAX_OPS {
            return KeyCheck::Skipped { key: *key, ops: ops.len() };
        }
        let oracle_ops: Vec<OracleOp> = ops
            .iter()
            .map(|r| OracleOp { kind: r.kind, value_id: r.value_id, invoke: r.invoke, response: r.response })
            .collect();
        let oracle_us = min_stretch_oracle(&oracle_ops).expect("size and coverage checked");
        let sub = Trace::new(ops.iter().map(|r| (*r).clone()).collect());
        let clusters = build_clusters(&sub).expect("synthetic writes cover every read");
        let zone_us = per_value_scores(&clusters).values().copied().max().unwrap_or(0);
        KeyCheck::Checked { key: *key, ops: ops.len(), oracle_us, zone_us }
    })
}
