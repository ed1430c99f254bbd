//! Message-delay and replica service-time models.
//!
//! Models are written in config files as `const:<us>`, `lognormal:<median_us>:<sigma>`
//! or `empirical:<us>,<us>,...`.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, LogNormal};

use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub enum LatencyModel {
    Constant(i64),
    /// Log-normal parameterized by its median and the sigma of the underlying normal.
    LogNormal { median_us: f64, sigma: f64 },
    /// Uniform resampling of the given observations.
    Empirical(Vec<i64>),
}

impl LatencyModel {
    pub fn lognormal(median_us: f64, sigma: f64) -> Self {
        LatencyModel::LogNormal { median_us, sigma }
    }

    /// Draws one delay in microseconds; always at least 1.
    pub fn sample(&self, rng: &mut RngStream) -> i64 {
        let raw = match self {
            LatencyModel::Constant(d) => *d,
            LatencyModel::LogNormal { median_us, sigma } => {
                let dist = LogNormal::new(median_us.ln(), *sigma)
                    .expect("lognormal parameters validated at construction");
                dist.sample(rng).round() as i64
            }
            LatencyModel::Empirical(samples) => {
                samples[rng.range_inclusive(0, samples.len() as i64 - 1) as usize]
            }
        };
        raw.max(1)
    }

    fn validate(&self) -> Result<(), String> {
        match self {
            LatencyModel::Constant(d) if *d <= 0 => Err(format!("constant delay must be positive, got {d}")),
            LatencyModel::LogNormal { median_us, sigma }
                if !(median_us.is_finite() && *median_us > 0.0 && sigma.is_finite() && *sigma >= 0.0) =>
            {
                Err(format!("invalid lognormal median {median_us} / sigma {sigma}"))
            }
            LatencyModel::Empirical(s) if s.is_empty() => Err("empirical model needs samples".into()),
            LatencyModel::Empirical(s) if s.iter().any(|&d| d <= 0) => {
                Err("empirical samples must be positive".into())
            }
            _ => Ok(()),
        }
    }
}

impl FromStr for LatencyModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (kind, rest) = s.split_once(':').ok_or_else(|| format!("bad latency model `{s}`"))?;
        let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
        let int = |v: &str| v.trim().parse::<i64>().map_err(|e| format!("`{v}`: {e}"));
        let model = match kind.trim().to_ascii_lowercase().as_str() {
            "const" | "constant" => LatencyModel::Constant(int(rest)?),
            "lognormal" => {
                let (m, sg) = rest
                    .split_once(':')
                    .ok_or_else(|| format!("lognormal needs median:sigma, got `{rest}`"))?;
                LatencyModel::lognormal(num(m)?, num(sg)?)
            }
            "empirical" => LatencyModel::Empirical(rest.split(',').map(int).collect::<Result<_, _>>()?),
            other => return Err(format!("unknown latency model `{other}`")),
        };
        model.validate()?;
        Ok(model)
    }
}

impl fmt::Display for LatencyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatencyModel::Constant(d) => write!(f, "const:{d}"),
            LatencyModel::LogNormal { median_us, sigma } => write!(f, "lognormal:{median_us}:{sigma}"),
            LatencyModel::Empirical(s) => {
                let parts: Vec<String> = s.iter().map(i64::to_string).collect();
                write!(f, "empirical:{}", parts.join(","))
            }
        }
    }
}

/// Per-replica processing time for reads and writes.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceModel {
    pub read: LatencyModel,
    pub write: LatencyModel,
}

/// All delay models used by one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkProfile {
    /// Coordinator to replica (and back), one way.
    pub one_way: LatencyModel,
    /// Client to its local coordinator, one way.
    pub local_hop: LatencyModel,
    pub service: ServiceModel,
}

impl Default for NetworkProfile {
    /// Calibrated defaults: one-way 175us median, so ping RTTs land mostly in
    /// 300-450us; heavy-tailed replica service with reads slower than writes.
    fn default() -> Self {
        NetworkProfile {
            one_way: LatencyModel::lognormal(175.0, 0.15),
            local_hop: LatencyModel::Constant(50),
            service: ServiceModel {
                read: LatencyModel::lognormal(DEFAULT_READ_MEDIAN_US, DEFAULT_SERVICE_SIGMA),
                write: LatencyModel::lognormal(DEFAULT_WRITE_MEDIAN_US, DEFAULT_SERVICE_SIGMA),
            },
        }
    }
}

pub const DEFAULT_READ_MEDIAN_US: f64 = 600.0;
pub const DEFAULT_WRITE_MEDIAN_US: f64 = 300.0;
pub const DEFAULT_SERVICE_SIGMA: f64 = 1.5;
