use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Virtual time in integer microseconds since simulation start.
///
/// Signed so that synthetic writes placed before the first recorded operation
/// and negative clock-skew offsets remain representable.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub i64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MIN: SimTime = SimTime(i64::MIN);

    pub fn micros(self) -> i64 {
        self.0
    }

    pub fn from_secs(secs: f64) -> Self {
        SimTime((secs * 1e6).round() as i64)
    }
}

impl Add<i64> for SimTime {
    type Output = SimTime;
    fn add(self, us: i64) -> SimTime {
        SimTime(self.0 + us)
    }
}

impl Sub<i64> for SimTime {
    type Output = SimTime;
    fn sub(self, us: i64) -> SimTime {
        SimTime(self.0 - us)
    }
}

impl Sub for SimTime {
    type Output = i64;
    fn sub(self, other: SimTime) -> i64 {
        self.0 - other.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

/// Client-side consistency level: the number of replica responses an
/// operation waits for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConsistencyLevel {
    #[serde(rename = "ONE")]
    One,
    #[serde(rename = "QUORUM")]
    Quorum,
    #[serde(rename = "ALL")]
    All,
}

impl ConsistencyLevel {
    /// Required ack count for replication factor `rf`.
    pub fn required_acks(self, rf: usize) -> usize {
        assert!(rf >= 1, "replication factor must be positive");
        match self {
            ConsistencyLevel::One => 1,
            ConsistencyLevel::Quorum => rf / 2 + 1,
            ConsistencyLevel::All => rf,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConsistencyLevel::One => "ONE",
            ConsistencyLevel::Quorum => "QUORUM",
            ConsistencyLevel::All => "ALL",
        }
    }
}

impl fmt::Display for ConsistencyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConsistencyLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ONE" | "1" => Ok(ConsistencyLevel::One),
            "QUORUM" | "QUO" => Ok(ConsistencyLevel::Quorum),
            "ALL" => Ok(ConsistencyLevel::All),
            other => Err(format!("unknown consistency level `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    #[serde(rename = "R")]
    Read,
    #[serde(rename = "W")]
    Write,
}

/// One client-observed storage operation.
///
/// `invoke` and `response` are the client's recorded timestamps. Under an
/// artificial-delay policy they include the injected delays.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationRecord {
    pub op_id: u64,
    pub client_id: u32,
    pub key: u64,
    pub kind: OpKind,
    pub value_id: u64,
    #[serde(rename = "invoke_us")]
    pub invoke: SimTime,
    #[serde(rename = "response_us")]
    pub response: SimTime,
    pub level: ConsistencyLevel,
    #[serde(rename = "pre_delay_us")]
    pub pre_delay_us: i64,
    #[serde(rename = "post_delay_us")]
    pub post_delay_us: i64,
}

impl OperationRecord {
    pub fn latency_us(&self) -> i64 {
        self.response - self.invoke
    }

    pub fn is_read(&self) -> bool {
        self.kind == OpKind::Read
    }

    pub fn is_write(&self) -> bool {
        self.kind == OpKind::Write
    }
}

/// Value id returned by reads of a key that has never been written.
pub const INITIAL_VALUE: u64 = 0;
