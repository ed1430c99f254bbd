#![allow(dead_code)]

use std::collections::BTreeMap;

use proptest::prelude::*;

use cpqsim::config::ExperimentConfig;
use cpqsim::gamma::{build_clusters, min_stretch_oracle, per_value_scores, OracleOp};
use cpqsim::netmodel::{LatencyModel, NetworkProfile, ServiceModel};
use cpqsim::policy::PolicySpec;
use cpqsim::sim::{ClusterConfig, SimConfig};
use cpqsim::trace::Trace;
use cpqsim::workload::{KeyDistribution, WorkloadConfig};
use cpqsim::{ConsistencyLevel, OpKind, OperationRecord, SimTime};

pub fn record(id: u64, kind: OpKind, value: u64, s: i64, f: i64) -> OperationRecord {
    OperationRecord {
        op_id: id,
        client_id: id as u32,
        key: 1,
        kind,
        value_id: value,
        invoke: SimTime(s),
        response: SimTime(f),
        level: ConsistencyLevel::One,
        pre_delay_us: 0,
        post_delay_us: 0,
    }
}

/// Random single-key history of 1..=8 operations: every write has a fresh
/// value and every read returns some written value. Small time ranges make
/// ties and nesting common.
pub fn history() -> impl Strategy<Value = Vec<OperationRecord>> {
    (1usize..=8).prop_flat_map(|n| {
        (1usize..=n).prop_flat_map(move |writes| {
            let interval = (0i64..30, 0i64..10);
            (
                proptest::collection::vec(interval.clone(), writes),
                proptest::collection::vec((interval, 0..writes), n - writes),
            )
                .prop_map(move |(ws, rs)| {
                    let mut ops = Vec::new();
                    for (i, (s, d)) in ws.into_iter().enumerate() {
                        ops.push(record(i as u64, OpKind::Write, i as u64 + 1, s, s + d));
                    }
                    for (i, ((s, d), v)) in rs.into_iter().enumerate() {
                        ops.push(record((writes + i) as u64, OpKind::Read, v as u64 + 1, s, s + d));
                    }
                    ops
                })
        })
    })
}

pub fn scores(ops: &[OperationRecord]) -> BTreeMap<(u64, u64), i64> {
    per_value_scores(&build_clusters(&Trace::new(ops.to_vec())).unwrap())
}

pub fn max_score(ops: &[OperationRecord]) -> i64 {
    scores(ops).values().copied().max().unwrap_or(0)
}

pub fn oracle(ops: &[OperationRecord]) -> i64 {
    let oracle_ops: Vec<OracleOp> = ops
        .iter()
        .map(|r| OracleOp { kind: r.kind, value_id: r.value_id, invoke: r.invoke, response: r.response })
        .collect();
    min_stretch_oracle(&oracle_ops).unwrap()
}

pub fn widen(ops: &[OperationRecord], delta: i64) -> Vec<OperationRecord> {
    ops.iter()
        .cloned()
        .map(|mut o| {
            o.invoke = o.invoke - delta;
            o.response = o.response + delta;
            o
        })
        .collect()
}

/// Small simulation config with the default network and the given levels.
pub fn sim_config(read: ConsistencyLevel, write: ConsistencyLevel) -> SimConfig {
    SimConfig {
        seed: 7,
        cluster: ClusterConfig { hosts: 2, rf: 3, ..ClusterConfig::default() },
        net: NetworkProfile::default(),
        workload: WorkloadConfig {
            clients_per_host: 16,
            target_ops_per_host_per_s: 1000.0,
            duration_s: 2.0,
            dist: KeyDistribution::latest(50),
            ..WorkloadConfig::default()
        },
        policy: PolicySpec::fixed(read, write),
        keep_ledger: true,
    }
}

/// Fully deterministic delays: every message and service time is a constant.
pub fn constant_network() -> NetworkProfile {
    NetworkProfile {
        one_way: LatencyModel::Constant(175),
        local_hop: LatencyModel::Constant(50),
        service: ServiceModel { read: LatencyModel::Constant(600), write: LatencyModel::Constant(300) },
    }
}

/// The desk profile with `key=value` overrides applied.
pub fn desk(overrides: &[(&str, &str)]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::desk();
    for (k, v) in overrides {
        cfg.set(k, v).unwrap();
    }
    cfg
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
