//! Client-side consistency-latency tuning policies.

use std::fmt;

use crate::rng::RngStream;
use crate::types::{ConsistencyLevel, OpKind, SimTime};

#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    /// One fixed level for reads and one for writes.
    Fixed {
        read: ConsistencyLevel,
        write: ConsistencyLevel,
    },
    /// Continuous partial quorums: every operation independently uses `high`
    /// with probability `p`, otherwise `low`.
    Cpq {
        p: f64,
        low: ConsistencyLevel,
        high: ConsistencyLevel,
    },
    /// Artificial delays: a wait before each read and/or after each write.
    Ad {
        read_pre_delay_us: i64,
        write_post_delay_us: i64,
        read: ConsistencyLevel,
        write: ConsistencyLevel,
    },
}

impl PolicySpec {
    pub fn fixed(read: ConsistencyLevel, write: ConsistencyLevel) -> Self {
        PolicySpec::Fixed { read, write }
    }

    pub fn cpq(p: f64) -> Self {
        PolicySpec::Cpq {
            p,
            low: ConsistencyLevel::One,
            high: ConsistencyLevel::Quorum,
        }
    }

    pub fn read_delay(delay_us: i64) -> Self {
        PolicySpec::Ad {
            read_pre_delay_us: delay_us,
            write_post_delay_us: 0,
            read: ConsistencyLevel::One,
            write: ConsistencyLevel::One,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            PolicySpec::Fixed { .. } => Ok(()),
            PolicySpec::Cpq { p, low, high } => {
                if !(0.0..=1.0).contains(&p) {
                    Err(format!("CPQ probability {p} outside [0, 1]"))
                } else if low == high {
                    Err("CPQ low and high levels must differ".into())
                } else {
                    Ok(())
                }
            }
            PolicySpec::Ad { read_pre_delay_us, write_post_delay_us, .. } => {
                if read_pre_delay_us < 0 || write_post_delay_us < 0 {
                    Err("artificial delays must be nonnegative".into())
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Chooses the level and injected delays for one operation.
    pub fn select(&self, kind: OpKind, rng: &mut RngStream) -> Decision {
        match *self {
            PolicySpec::Fixed { read, write } => Decision::plain(match kind {
                OpKind::Read => read,
                OpKind::Write => write,
            }),
            PolicySpec::Cpq { p, low, high } => {
                Decision::plain(if rng.chance(p) { high } else { low })
            }
            PolicySpec::Ad { read_pre_delay_us, write_post_delay_us, read, write } => match kind {
                OpKind::Read => Decision {
                    level: read,
                    pre_delay_us: read_pre_delay_us,
                    post_delay_us: 0,
                },
                OpKind::Write => Decision {
                    level: write,
                    pre_delay_us: 0,
                    post_delay_us: write_post_delay_us,
                },
            },
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Fixed { read, write } => write!(f, "fixed {read}-{write}"),
            PolicySpec::Cpq { p, low, high } => write!(f, "cpq p={p} {low}/{high}"),
            PolicySpec::Ad { read_pre_delay_us, write_post_delay_us, read, write } => write!(
                f,
                "ad read+{read_pre_delay_us}us write+{write_post_delay_us}us {read}-{write}"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub level: ConsistencyLevel,
    pub pre_delay_us: i64,
    pub post_delay_us: i64,
}

impl Decision {
    pub fn plain(level: ConsistencyLevel) -> Self {
        Decision { level, pre_delay_us: 0, post_delay_us: 0 }
    }

    /// Recorded operation interval. The client starts its pre-delay at
    /// `dispatch`; the store answers at `store_response`; any post-delay is
    /// counted inside the interval.
    pub fn recorded_interval(&self, dispatch: SimTime, store_response: SimTime) -> (SimTime, SimTime) {
        (dispatch, store_response + self.post_delay_us)
    }
}

/// Recorded `(invoke, response)` for an operation under `decision`.
pub fn apply_delay_accounting(
    decision: &Decision,
    true_dispatch: SimTime,
    true_store_response: SimTime,
) -> (SimTime, SimTime) {
    decision.recorded_interval(true_dispatch, true_store_response)
}
