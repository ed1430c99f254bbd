//! Brute-force minimal-stretch oracle.
//!
//! Finds the smallest Δ such that widening every operation interval `[s, f]`
//! to `[s - Δ/2, f + Δ/2]` makes a single-key register history linearizable.
//! Under such a stretch, `a` precedes `b` in real time iff `s_b - f_a > Δ`,
//! so linearizability only changes at Δ equal to some boundary gap
//! `s_b - f_a`. The oracle searches those candidates and checks each one by
//! exhaustive search over linearization orders. It shares no code with the
//! zone-based scores and exists to validate them.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::types::{OpKind, SimTime};

pub const ORACLE_MAX_OPS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleOp {
    pub kind: OpKind,
    pub value_id: u64,
    pub invoke: SimTime,
    pub response: SimTime,
}

impl OracleOp {
    pub fn write(value_id: u64, invoke: i64, response: i64) -> Self {
        OracleOp { kind: OpKind::Write, value_id, invoke: SimTime(invoke), response: SimTime(response) }
    }

    pub fn read(value_id: u64, invoke: i64, response: i64) -> Self {
        OracleOp { kind: OpKind::Read, value_id, invoke: SimTime(invoke), response: SimTime(response) }
    }
}

/// Minimal uniform stretch (in microseconds) that makes `ops` linearizable.
///
/// Requires unique write values and a write for every value read.
pub fn min_stretch_oracle(ops: &[OracleOp]) -> Result<i64> {
    if ops.len() > ORACLE_MAX_OPS {
        return Err(Error::OracleTooLarge(ops.len()));
    }
    let written: HashSet<u64> = ops
        .iter()
        .filter(|o| o.kind == OpKind::Write)
        .map(|o| o.value_id)
        .collect();
    if let Some(r) = ops
        .iter()
        .find(|o| o.kind == OpKind::Read && !written.contains(&o.value_id))
    {
        return Err(Error::DanglingReads { count: 1, key: 0, value_id: r.value_id });
    }

    let mut candidates: Vec<i64> = ops
        .iter()
        .flat_map(|a| ops.iter().map(move |b| b.invoke - a.response))
        .filter(|&g| g > 0)
        .collect();
    candidates.push(0);
    candidates.sort_unstable();
    candidates.dedup();

    // Feasibility is monotone in Δ; the largest candidate removes every
    // precedence constraint, and with a write per read value that is always
    // linearizable.
    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    debug_assert!(linearizable(ops, candidates[hi]));
    while lo < hi {
        let mid = (lo + hi) / 2;
        if linearizable(ops, candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(candidates[lo])
}

/// Whether the history stretched by `delta` has a legal register linearization.
pub fn linearizable(ops: &[OracleOp], delta: i64) -> bool {
    let n = ops.len();
    let mut preds = vec![0u32; n];
    for (i, a) in ops.iter().enumerate() {
        for (j, b) in ops.iter().enumerate() {
            if i != j && b.invoke - a.response > delta {
                preds[j] |= 1 << i;
            }
        }
    }
    // `current` is the index of the last linearized write, or n for none
    let mut dead = vec![false; (1usize << n) * (n + 1)];
    search(ops, &preds, 0, n, &mut dead)
}

fn search(ops: &[OracleOp], preds: &[u32], done: u32, current: usize, dead: &mut [bool]) -> bool {
    let n = ops.len();
    if done == (1u32 << n) - 1 {
        return true;
    }
    let state = done as usize * (n + 1) + current;
    if dead[state] {
        return false;
    }
    for (x, op) in ops.iter().enumerate() {
        if done >> x & 1 == 1 || preds[x] & !done != 0 {
            continue;
        }
        let next = match op.kind {
            OpKind::Write => x,
            OpKind::Read => {
                if current == n || ops[current].value_id != op.value_id {
                    continue;
                }
                current
            }
        };
        if search(ops, preds, done | 1 << x, next, dead) {
            return true;
        }
    }
    dead[state] = true;
    false
}
