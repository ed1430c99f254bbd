//! Experiment configuration: a flat `key = value` file with optional
//! `[section]` headers, layered over a named profile and `--set` overrides.
//!
//! ```text
//! # comment
//! seed = 7
//! [policy]
//! kind = cpq
//! p = 0.5
//! ```
//!
//! Inside `[policy]`, `kind` means `policy.kind`. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::SlaSpec;
use crate::netmodel::{LatencyModel, NetworkProfile, ServiceModel};
use crate::policy::PolicySpec;
use crate::sim::{ClusterConfig, SimConfig};
use crate::store::ReadRepair;
use crate::types::ConsistencyLevel;
use crate::workload::{KeyDistribution, WorkloadConfig};

/// Environment variable naming the config file used when none is given.
pub const CONFIG_ENV: &str = "CPQSIM_CONFIG";

/// Every accepted key with its `desk` profile default. An empty default
/// means "unset"; for `wl.keyspace` it means "depends on `wl.dist`".
const KEYS: &[(&str, &str)] = &[
    ("seed", "42"),
    ("profile", "desk"),
    ("cluster.hosts", "2"),
    ("store.rf", "3"),
    ("store.read_repair", "none"),
    ("net.one_way", "lognormal:175:0.15"),
    ("local.hop", "const:50"),
    ("svc.read", "lognormal:600:1.5"),
    ("svc.write", "lognormal:300:1.5"),
    ("wl.read_fraction", "0.8"),
    ("wl.dist", "latest"),
    ("wl.keyspace", ""),
    ("wl.theta", "0.99"),
    ("wl.hot_fraction", "0.2"),
    ("wl.hot_op_fraction", "0.8"),
    ("wl.clients", "64"),
    ("wl.target_kops", "1"),
    ("wl.duration_s", "10"),
    ("wl.skew_us", "0"),
    ("wl.value_size_bytes", "128"),
    ("policy.kind", "fixed"),
    ("policy.read", "ONE"),
    ("policy.write", "ONE"),
    ("policy.p", "0"),
    ("policy.low", "ONE"),
    ("policy.high", "QUORUM"),
    ("policy.read_delay_ms", "0"),
    ("policy.write_delay_ms", "0"),
    ("gamma.threshold_us", "2000"),
    ("metrics.per_host_avg", "false"),
    ("sla.latency_ms", ""),
    ("sla.stale_fraction", ""),
    ("out.trace", "trace.csv"),
    ("out.report", "report.json"),
];

/// Keys that name output files; they do not affect results and are left out
/// of the config digest.
const OUTPUT_PREFIX: &str = "out.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// 2 hosts x 64 clients, 1 kops/s per host, 10 s.
    Desk,
    /// 6 hosts x 128 clients, 5 kops/s per host, 60 s.
    Paper,
}

impl Profile {
    fn overrides(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Profile::Desk => &[],
            Profile::Paper => &[
                ("cluster.hosts", "6"),
                ("wl.clients", "128"),
                ("wl.target_kops", "5"),
                ("wl.duration_s", "60"),
            ],
        }
    }
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(format!("unknown profile `{other}` (expected desk or paper)")),
        }
    }
}

/// Raw settings for one experiment. Values stay textual until [`resolve`]
/// so the canonical dump and digest reflect exactly what was configured.
///
/// [`resolve`]: ExperimentConfig::resolve
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExperimentConfig {
    explicit: BTreeMap<String, String>,
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

impl ExperimentConfig {
    /// The desk profile with no overrides.
    pub fn desk() -> Self {
        Self::default()
    }

    pub fn paper() -> Self {
        let mut c = Self::default();
        c.set("profile", "paper").expect("known key");
        c
    }

    /// Sets one key, rejecting unknown names. Values are checked by [`resolve`].
    ///
    /// [`resolve`]: ExperimentConfig::resolve
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        if !known(key) {
            return Err(Error::config(format!("unknown key `{key}`")));
        }
        self.explicit.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override `{pair}` is not key=value")))?;
        self.set(k, v)
    }

    /// Parses config text; `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |msg: String| Error::Parse { path: origin.to_path_buf(), line: idx as u64 + 1, msg };
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| err(format!("bad section header `{line}`")))?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got `{line}`")))?;
            let k = k.trim();
            let key = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
            cfg.set(&key, v).map_err(|e| err(e.to_string()))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn profile(&self) -> Result<Profile> {
        self.explicit
            .get("profile")
            .map_or(Ok(Profile::Desk), |p| p.parse().map_err(Error::Config))
    }

    /// Effective value of `key` after profile defaults and overrides.
    pub fn get(&self, key: &str) -> Result<String> {
        if let Some(v) = self.explicit.get(key) {
            return Ok(v.clone());
        }
        if let Some((_, v)) = self.profile()?.overrides().iter().find(|(k, _)| *k == key) {
            return Ok(v.to_string());
        }
        KEYS.iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.to_string())
            .ok_or_else(|| Error::config(format!("unknown key `{key}`")))
    }

    /// Every key with its effective value, one `key=value` per line, in a fixed order.
    pub fn canonical(&self) -> Result<String> {
        let mut out = String::new();
        for (k, _) in KEYS {
            out.push_str(k);
            out.push('=');
            out.push_str(&self.get(k)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// SHA-256 of the canonical dump without output paths, as lowercase hex.
    pub fn digest(&self) -> Result<String> {
        let canonical = self.canonical()?;
        let mut h = Sha256::new();
        for line in canonical.lines().filter(|l| !l.starts_with(OUTPUT_PREFIX)) {
            h.update(line.as_bytes());
            h.update(b"\n");
        }
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Parses and validates every setting.
    pub fn resolve(&self) -> Result<Resolved> {
        let cfg = Resolver { cfg: self }.resolve()?;
        cfg.sim.validate().map_err(Error::Config)?;
        Ok(cfg)
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.canonical() {
            Ok(s) => f.write_str(&s),
            Err(e) => write!(f, "# invalid config: {e}"),
        }
    }
}

/// A fully typed, validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub sim: SimConfig,
    pub threshold_us: i64,
    pub per_host_avg: bool,
    pub sla: Option<SlaSpec>,
    pub trace_path: PathBuf,
    pub report_path: PathBuf,
    pub digest: String,
}

struct Resolver<'a> {
    cfg: &'a ExperimentConfig,
}

impl Resolver<'_> {
    fn parse<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let raw = self.cfg.get(key)?;
        raw.parse::<T>().map_err(|e| Error::config(format!("{key} = `{raw}`: {e}")))
    }

    fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        if self.cfg.get(key)?.is_empty() {
            Ok(None)
        } else {
            self.parse(key).map(Some)
        }
    }

    fn delay_us(&self, key: &str) -> Result<i64> {
        let ms: f64 = self.parse(key)?;
        if !(ms.is_finite() && ms >= 0.0) {
            return Err(Error::config(format!("{key} must be a nonnegative number of ms")));
        }
        Ok((ms * 1000.0).round() as i64)
    }

    fn level(&self, key: &str) -> Result<ConsistencyLevel> {
        self.parse(key)
    }

    fn resolve(&self) -> Result<Resolved> {
        let dist_name: String = self.cfg.get("wl.dist")?.to_ascii_lowercase();
        let keyspace: u64 = match self.optional("wl.keyspace")? {
            Some(n) => n,
            None if dist_name == "latest" => 1000,
            None => 10_000,
        };
        let theta: f64 = self.parse("wl.theta")?;
        let dist = match dist_name.as_str() {
            "uniform" => KeyDistribution::Uniform { n: keyspace },
            "zipfian" => KeyDistribution::Zipfian { n: keyspace, theta },
            "latest" => KeyDistribution::Latest { n: keyspace, theta },
            "hotspot" => KeyDistribution::Hotspot {
                n: keyspace,
                hot_fraction: self.parse("wl.hot_fraction")?,
                hot_op_fraction: self.parse("wl.hot_op_fraction")?,
            },
            other => return Err(Error::config(format!("wl.dist = `{other}`: expected hotspot, latest, uniform or zipfian"))),
        };
        let target_kops: f64 = self.parse("wl.target_kops")?;
        let workload = WorkloadConfig {
            read_fraction: self.parse("wl.read_fraction")?,
            value_size_bytes: self.parse("wl.value_size_bytes")?,
            clients_per_host: self.parse("wl.clients")?,
            target_ops_per_host_per_s: target_kops * 1000.0,
            duration_s: self.parse("wl.duration_s")?,
            dist,
            skew_bound_us: self.parse("wl.skew_us")?,
        };

        let policy = match self.cfg.get("policy.kind")?.to_ascii_lowercase().as_str() {
            "fixed" => PolicySpec::Fixed { read: self.level("policy.read")?, write: self.level("policy.write")? },
            "cpq" => PolicySpec::Cpq {
                p: self.parse("policy.p")?,
                low: self.level("policy.low")?,
                high: self.level("policy.high")?,
            },
            "ad" => PolicySpec::Ad {
                read_pre_delay_us: self.delay_us("policy.read_delay_ms")?,
                write_post_delay_us: self.delay_us("policy.write_delay_ms")?,
                read: self.level("policy.read")?,
                write: self.level("policy.write")?,
            },
            other => return Err(Error::config(format!("policy.kind = `{other}`: expected fixed, cpq or ad"))),
        };

        let net = NetworkProfile {
            one_way: self.parse::<LatencyModel>("net.one_way")?,
            local_hop: self.parse::<LatencyModel>("local.hop")?,
            service: ServiceModel { read: self.parse("svc.read")?, write: self.parse("svc.write")? },
        };

        let sla = match (self.optional::<f64>("sla.latency_ms")?, self.optional::<f64>("sla.stale_fraction")?) {
            (None, None) => None,
            (Some(l), Some(x)) => Some(SlaSpec::new(l, x).map_err(Error::Config)?),
            _ => return Err(Error::config("sla.latency_ms and sla.stale_fraction must be set together")),
        };

        let threshold_us: i64 = self.parse("gamma.threshold_us")?;
        if threshold_us < 0 {
            return Err(Error::config("gamma.threshold_us must be nonnegative"));
        }

        Ok(Resolved {
            sim: SimConfig {
                seed: self.parse("seed")?,
                cluster: ClusterConfig {
                    hosts: self.parse("cluster.hosts")?,
                    rf: self.parse("store.rf")?,
                    read_repair: self.parse::<ReadRepair>("store.read_repair")?,
                },
                net,
                workload,
                policy,
                keep_ledger: false,
            },
            threshold_us,
            per_host_avg: self.parse("metrics.per_host_avg")?,
            sla,
            trace_path: PathBuf::from(self.cfg.get("out.trace")?),
            report_path: PathBuf::from(self.cfg.get("out.report")?),
            digest: self.cfg.digest()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_defaults_resolve() {
        let r = ExperimentConfig::desk().resolve().unwrap();
        assert_eq!(r.sim.seed, 42);
        assert_eq!(r.sim.cluster.hosts, 2);
        assert_eq!(r.sim.workload.clients_per_host, 64);
        assert_eq!(r.sim.workload.target_ops_per_host_per_s, 1000.0);
        assert_eq!(r.sim.workload.duration_s, 10.0);
        assert_eq!(r.sim.net, NetworkProfile::default());
        assert_eq!(r.sim.workload.dist, KeyDistribution::latest(1000));
        assert_eq!(r.threshold_us, 2000);
        assert!(r.sla.is_none());
    }

    #[test]
    fn paper_profile() {
        let r = ExperimentConfig::paper().resolve().unwrap();
        assert_eq!(r.sim.cluster.hosts, 6);
        assert_eq!(r.sim.workload.clients_per_host * 6, 768);
        assert_eq!(r.sim.workload.target_ops_per_host_per_s, 5000.0);
        assert_eq!(r.sim.workload.duration_s, 60.0);
    }

    #[test]
    fn explicit_beats_profile() {
        let mut c = ExperimentConfig::paper();
        c.set("wl.duration_s", "2").unwrap();
        assert_eq!(c.resolve().unwrap().sim.workload.duration_s, 2.0);
    }

    #[test]
    fn sections_and_comments() {
        let text = "# c\nseed = 7\n; other\n[policy]\nkind = cpq\np=0.25\n[wl]\ndist = hotspot\n";
        let r = ExperimentConfig::parse(text, Path::new("x.ini")).unwrap().resolve().unwrap();
        assert_eq!(r.sim.seed, 7);
        assert_eq!(r.sim.policy, PolicySpec::cpq(0.25));
        assert_eq!(r.sim.workload.dist, KeyDistribution::hotspot(10_000));
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let err = ExperimentConfig::parse("seed=1\nbogus=2\n", Path::new("x.ini")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other}"),
        }
        assert!(ExperimentConfig::desk().set("policy.q", "1").is_err());
        assert!(ExperimentConfig::desk().set_pair("seed").is_err());
    }

    #[test]
    fn bad_values_rejected() {
        for (k, v) in [
            ("seed", "x"),
            ("policy.kind", "magic"),
            ("wl.dist", "pareto"),
            ("net.one_way", "lognormal:-1:0.1"),
            ("store.rf", "0"),
            ("wl.read_fraction", "1.5"),
            ("profile", "huge"),
            ("sla.latency_ms", "5"),
        ] {
            let mut c = ExperimentConfig::desk();
            c.set(k, v).unwrap();
            assert!(matches!(c.resolve(), Err(Error::Config(_))), "{k}={v}");
        }
    }

    #[test]
    fn ad_delays_in_ms() {
        let mut c = ExperimentConfig::desk();
        c.set("policy.kind", "ad").unwrap();
        c.set("policy.read_delay_ms", "20").unwrap();
        assert_eq!(c.resolve().unwrap().sim.policy, PolicySpec::read_delay(20_000));
    }

    #[test]
    fn digest_ignores_output_paths() {
        let a = ExperimentConfig::desk();
        let mut b = a.clone();
        b.set("out.trace", "elsewhere.csv").unwrap();
        assert_eq!(a.digest().unwrap(), b.digest().unwrap());
        b.set("seed", "43").unwrap();
        assert_ne!(a.digest().unwrap(), b.digest().unwrap());
        assert_eq!(a.digest().unwrap().len(), 64);
    }

    #[test]
    fn canonical_round_trips() {
        let mut c = ExperimentConfig::desk();
        c.set("policy.kind", "cpq").unwrap();
        let dumped = c.canonical().unwrap();
        let back = ExperimentConfig::parse(&dumped, Path::new("dump")).unwrap();
        assert_eq!(back.resolve().unwrap(), c.resolve().unwrap());
        assert_eq!(back.digest().unwrap(), c.digest().unwrap());
    }
}
