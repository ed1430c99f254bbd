//! Quorum-replicated last-write-wins register.
//!
//! This module holds the protocol state: replica key maps, write stamps and
//! the per-operation ack accounting at coordinators. Message timing lives in
//! [`crate::sim`].

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::types::{ConsistencyLevel, OpKind, SimTime, INITIAL_VALUE};

/// Conflict-resolution stamp: coordinator clock at dispatch, tie-broken by a
/// globally unique writer sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WriteStamp {
    pub ts: SimTime,
    pub writer_seq: u64,
}

impl WriteStamp {
    /// Stamp of a never-written key; smaller than every real stamp.
    pub const INITIAL: WriteStamp = WriteStamp {
        ts: SimTime::MIN,
        writer_seq: 0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Versioned {
    pub value_id: u64,
    pub stamp: WriteStamp,
}

impl Versioned {
    pub const INITIAL: Versioned = Versioned {
        value_id: INITIAL_VALUE,
        stamp: WriteStamp::INITIAL,
    };

    /// Last-write-wins: the version with the greater stamp.
    pub fn newer(self, other: Versioned) -> Versioned {
        if other.stamp > self.stamp {
            other
        } else {
            self
        }
    }
}

pub fn required_acks(level: ConsistencyLevel, rf: usize) -> usize {
    level.required_acks(rf)
}

/// The `rf` consecutive nodes (mod `nodes`) that hold `key`.
pub fn replicas_for(key: u64, nodes: usize, rf: usize) -> impl Iterator<Item = usize> {
    assert!(rf <= nodes, "replication factor {rf} exceeds node count {nodes}");
    let first = (key % nodes as u64) as usize;
    (0..rf).map(move |i| (first + i) % nodes)
}

/// Per-node key map.
#[derive(Debug, Clone, Default)]
pub struct ReplicaState {
    entries: HashMap<u64, Versioned>,
}

impl ReplicaState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies a write, keeping whichever version has the greater stamp.
    /// Returns whether the incoming version replaced the stored one.
    pub fn apply_write(&mut self, key: u64, incoming: Versioned) -> bool {
        let slot = self.entries.entry(key).or_insert(Versioned::INITIAL);
        let before = slot.stamp;
        let replaced = incoming.stamp > before;
        if replaced {
            *slot = incoming;
        }
        assert!(slot.stamp >= before, "LWW stamp regressed on key {key}");
        replaced
    }

    pub fn serve_read(&self, key: u64) -> Versioned {
        self.entries.get(&key).copied().unwrap_or(Versioned::INITIAL)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, Versioned)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicaResponse {
    pub node: usize,
    pub version: Versioned,
}

/// Coordinator-side accounting for one in-flight client operation.
#[derive(Debug, Clone)]
pub struct PendingOp {
    pub op_id: u64,
    pub kind: OpKind,
    pub key: u64,
    pub required_acks: usize,
    pub received: Vec<ReplicaResponse>,
    pub completed: bool,
    /// Version returned to the client (reads) or written (writes), set at completion.
    pub outcome: Option<Versioned>,
}

impl PendingOp {
    pub fn new(op_id: u64, kind: OpKind, key: u64, required_acks: usize) -> Self {
        assert!(required_acks >= 1);
        PendingOp {
            op_id,
            kind,
            key,
            required_acks,
            received: Vec::with_capacity(required_acks),
            completed: false,
            outcome: None,
        }
    }

    /// Records one replica response. Returns the operation outcome exactly
    /// once: on the response that brings the count to `required_acks`. For
    /// reads the outcome is the newest version among those responses.
    pub fn record(&mut self, resp: ReplicaResponse) -> Option<Versioned> {
        self.received.push(resp);
        if self.completed || self.received.len() < self.required_acks {
            return None;
        }
        self.completed = true;
        let newest = self
            .received
            .iter()
            .map(|r| r.version)
            .reduce(Versioned::newer)
            .expect("at least one response");
        self.outcome = Some(newest);
        Some(newest)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReadRepair {
    #[default]
    None,
    /// Fire-and-forget write-back of the newest version to replicas that
    /// answered with an older one.
    Async,
}

impl FromStr for ReadRepair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "off" => Ok(ReadRepair::None),
            "async" => Ok(ReadRepair::Async),
            other => Err(format!("unknown read repair mode `{other}`")),
        }
    }
}

impl fmt::Display for ReadRepair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReadRepair::None => "none",
            ReadRepair::Async => "async",
        })
    }
}
