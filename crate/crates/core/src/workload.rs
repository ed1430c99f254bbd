//! YCSB-style workload parameters and sampling.

use std::fmt;

use rand_distr::{Distribution, Zipf};

use crate::rng::RngStream;
use crate::types::OpKind;

/// Default zipfian skew (YCSB's default constant).
pub const DEFAULT_THETA: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub enum KeyDistribution {
    Uniform { n: u64 },
    /// Zipfian over key index: key 0 is the most popular.
    Zipfian { n: u64, theta: f64 },
    /// Zipfian over recency: the highest key index is the most popular.
    Latest { n: u64, theta: f64 },
    /// `hot_op_fraction` of draws land uniformly in the first
    /// `ceil(hot_fraction * n)` keys, the rest uniformly in the remainder.
    Hotspot { n: u64, hot_fraction: f64, hot_op_fraction: f64 },
}

impl KeyDistribution {
    pub fn latest(n: u64) -> Self {
        KeyDistribution::Latest { n, theta: DEFAULT_THETA }
    }

    pub fn hotspot(n: u64) -> Self {
        KeyDistribution::Hotspot { n, hot_fraction: 0.2, hot_op_fraction: 0.8 }
    }

    pub fn keyspace(&self) -> u64 {
        match *self {
            KeyDistribution::Uniform { n }
            | KeyDistribution::Zipfian { n, .. }
            | KeyDistribution::Latest { n, .. }
            | KeyDistribution::Hotspot { n, .. } => n,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KeyDistribution::Uniform { .. } => "uniform",
            KeyDistribution::Zipfian { .. } => "zipfian",
            KeyDistribution::Latest { .. } => "latest",
            KeyDistribution::Hotspot { .. } => "hotspot",
        }
    }

    pub fn sampler(&self) -> Result<KeySampler, String> {
        if self.keyspace() == 0 {
            return Err("key distribution needs a nonempty keyspace".into());
        }
        let zipf = |n: u64, theta: f64| {
            Zipf::new(n as f64, theta).map_err(|e| format!("zipfian(n={n}, theta={theta}): {e}"))
        };
        Ok(match *self {
            KeyDistribution::Uniform { n } => KeySampler::Uniform(n),
            KeyDistribution::Zipfian { n, theta } => KeySampler::Zipfian(n, zipf(n, theta)?),
            KeyDistribution::Latest { n, theta } => KeySampler::Latest(n, zipf(n, theta)?),
            KeyDistribution::Hotspot { n, hot_fraction, hot_op_fraction } => {
                if !(0.0..=1.0).contains(&hot_fraction) || !(0.0..=1.0).contains(&hot_op_fraction) {
                    return Err("hotspot fractions must lie in [0, 1]".into());
                }
                let hot = ((hot_fraction * n as f64).ceil() as u64).min(n);
                KeySampler::Hotspot { n, hot, hot_op_fraction }
            }
        })
    }
}

impl fmt::Display for KeyDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub enum KeySampler {
    Uniform(u64),
    Zipfian(u64, Zipf<f64>),
    Latest(u64, Zipf<f64>),
    Hotspot { n: u64, hot: u64, hot_op_fraction: f64 },
}

impl KeySampler {
    pub fn next_key(&self, rng: &mut RngStream) -> u64 {
        match self {
            KeySampler::Uniform(n) => uniform(rng, 0, *n),
            // Zipf samples are integral floats in [1, n]
            KeySampler::Zipfian(n, z) => (z.sample(rng) as u64).clamp(1, *n) - 1,
            KeySampler::Latest(n, z) => *n - (z.sample(rng) as u64).clamp(1, *n),
            KeySampler::Hotspot { n, hot, hot_op_fraction } => {
                let pick_hot = *hot == *n || (*hot > 0 && rng.chance(*hot_op_fraction));
                if pick_hot {
                    uniform(rng, 0, *hot)
                } else {
                    uniform(rng, *hot, *n)
                }
            }
        }
    }
}

fn uniform(rng: &mut RngStream, lo: u64, hi: u64) -> u64 {
    debug_assert!(lo < hi);
    rng.range_inclusive(lo as i64, hi as i64 - 1) as u64
}

pub fn next_op_kind(read_fraction: f64, rng: &mut RngStream) -> OpKind {
    if rng.chance(read_fraction) {
        OpKind::Read
    } else {
        OpKind::Write
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadConfig {
    pub read_fraction: f64,
    /// Informational; payloads are represented by value ids.
    pub value_size_bytes: u32,
    pub clients_per_host: u32,
    pub target_ops_per_host_per_s: f64,
    pub duration_s: f64,
    pub dist: KeyDistribution,
    /// Each client's recorded clock is offset by a fixed draw from `[-bound, +bound]`.
    pub skew_bound_us: i64,
}

impl WorkloadConfig {
    /// Per-client dispatch interval implied by the target rate.
    pub fn interval_us(&self) -> f64 {
        self.clients_per_host as f64 * 1e6 / self.target_ops_per_host_per_s
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.read_fraction) {
            return Err(format!("read_fraction {} outside [0, 1]", self.read_fraction));
        }
        if self.clients_per_host == 0 {
            return Err("clients per host must be positive".into());
        }
        if self.target_ops_per_host_per_s.is_nan() || self.target_ops_per_host_per_s <= 0.0 {
            return Err("target throughput must be positive".into());
        }
        if self.duration_s.is_nan() || self.duration_s < 0.0 {
            return Err("duration must be nonnegative".into());
        }
        if self.skew_bound_us < 0 {
            return Err("skew bound must be nonnegative".into());
        }
        if self.dist.keyspace() == 0 {
            return if self.duration_s > 0.0 {
                Err("a transaction phase needs a nonempty keyspace".into())
            } else {
                Ok(())
            };
        }
        self.dist.sampler().map(|_| ())
    }
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            read_fraction: 0.8,
            value_size_bytes: 128,
            clients_per_host: 128,
            target_ops_per_host_per_s: 5000.0,
            duration_s: 60.0,
            dist: KeyDistribution::latest(1000),
            skew_bound_us: 0,
        }
    }
}
