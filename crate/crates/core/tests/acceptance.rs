//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

mod common;

use std::time::{Duration, Instant};

use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use common::{desk, history, max_score, mean, oracle, scores, widen};
use cpqsim::config::ExperimentConfig;
use cpqsim::experiment::{run, run_to_files, sweep, SweepRow, SweepSpec};
use cpqsim::gamma::{analyze, build_clusters, per_value_scores};
use cpqsim::rng::RngStream;
use cpqsim::trace::Trace;
use cpqsim::workload::{next_op_kind, KeyDistribution};
use cpqsim::OpKind;

const SEEDS: u32 = 3;
const PROPERTY_CASES: u32 = 1000;
const ORACLE_TIME_LIMIT: Duration = Duration::from_secs(60);
const STRONG_MAX_PROPORTION: f64 = 0.001;
const EVENTUAL_MAX_PROPORTION: f64 = 0.01;
const EVENTUAL_MAX_P95_RATIO: f64 = 0.6;
const CPQ_P95_STEP_SLACK: f64 = 0.05;
const CPQ_ENDPOINT_BAND: f64 = 0.20;
const AD_DELAY_MS: f64 = 20.0;
const AD_P95_RANGE_US: (f64, f64) = (20_000.0, 26_000.0);
const AD_PROPORTION_SLACK: f64 = 0.002;
const AD_SWEEP_MS: &str = "0,5,10,15,20,25,30,35,40,50,60";
const DOMINANCE_FACTOR: f64 = 2.0;
const HOT_FRACTION: (f64, f64) = (0.8, 0.02);
const READ_FRACTION: (f64, f64) = (0.8, 0.01);
const THROUGHPUT_TOLERANCE: f64 = 0.01;
const SAMPLES: usize = 100_000;
const THRESHOLD_US: i64 = 2000;
/// Offsets in [-1000, 1000] us keep any two clients' clocks within 2 ms.
const SKEW_BOUND_US: &str = "1000";

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

/// Desk profile with async read repair, the baseline for all trend criteria.
fn baseline(overrides: &[(&str, &str)]) -> ExperimentConfig {
    let mut cfg = desk(&[("store.read_repair", "async")]);
    for (k, v) in overrides {
        cfg.set(k, v).unwrap();
    }
    cfg
}

fn seed_sweep(base: &ExperimentConfig, param: &str, values: &str) -> Vec<Vec<SweepRow>> {
    let values = SweepSpec::parse_values(values);
    let rows = sweep(base, &SweepSpec::new(param, values.clone(), SEEDS).unwrap()).unwrap();
    rows.chunks(SEEDS as usize).map(<[SweepRow]>::to_vec).collect()
}

fn avg_proportion(rows: &[SweepRow]) -> f64 {
    mean(&rows.iter().map(|r| r.proportion_positive).collect::<Vec<_>>())
}

fn avg_read_p95(rows: &[SweepRow]) -> f64 {
    mean(&rows.iter().map(|r| r.read_p95_us.unwrap()).collect::<Vec<_>>())
}

fn fixed(level: &str) -> Vec<SweepRow> {
    let base = baseline(&[("policy.write", level)]);
    seed_sweep(&base, "policy.read", level).remove(0)
}

fn property_runner() -> TestRunner {
    TestRunner::new_with_rng(
        Config { cases: PROPERTY_CASES, failure_persistence: None, ..Config::default() },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn oracle_equivalence() -> Verdict {
    let started = Instant::now();
    let result = property_runner().run(&history(), |ops| {
        let (zone, exact) = (max_score(&ops), oracle(&ops));
        if zone == exact {
            Ok(())
        } else {
            Err(TestCaseError::fail(format!("zone {zone} vs oracle {exact}")))
        }
    });
    let elapsed = started.elapsed();
    match result {
        Ok(()) => verdict(
            elapsed <= ORACLE_TIME_LIMIT,
            format!("{PROPERTY_CASES} histories agree in {:.2}s (limit {}s)", elapsed.as_secs_f64(), ORACLE_TIME_LIMIT.as_secs()),
        ),
        Err(e) => verdict(false, format!("counterexample: {e}")),
    }
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let files = |tag: &str| {
        let mut cfg = ExperimentConfig::desk();
        let (t, r) = (dir.path().join(format!("{tag}.csv")), dir.path().join(format!("{tag}.json")));
        cfg.set("out.trace", t.to_str().unwrap()).unwrap();
        cfg.set("out.report", r.to_str().unwrap()).unwrap();
        run_to_files(&cfg).unwrap();
        (std::fs::read(t).unwrap(), std::fs::read(r).unwrap())
    };
    let (a, b) = (files("first"), files("second"));
    verdict(a == b, format!("trace {} bytes, report {} bytes, identical: {}", a.0.len(), a.1.len(), a == b))
}

fn strong_endpoint(quo: &[SweepRow]) -> Verdict {
    let worst = quo.iter().map(|r| r.proportion_positive).fold(0.0, f64::max);
    verdict(
        worst <= STRONG_MAX_PROPORTION,
        format!("QUORUM-QUORUM worst proportion over {SEEDS} seeds {worst:.5} (bound {STRONG_MAX_PROPORTION})"),
    )
}

fn eventual_endpoint(one: &[SweepRow], quo: &[SweepRow]) -> Verdict {
    let prop = avg_proportion(one);
    let ratio = avg_read_p95(one) / avg_read_p95(quo);
    verdict(
        prop > 0.0 && prop < EVENTUAL_MAX_PROPORTION && ratio <= EVENTUAL_MAX_P95_RATIO,
        format!(
            "ONE-ONE mean proportion {prop:.5} in (0, {EVENTUAL_MAX_PROPORTION}); read p95 {:.0}us vs {:.0}us, ratio {ratio:.3} (bound {EVENTUAL_MAX_P95_RATIO})",
            avg_read_p95(one),
            avg_read_p95(quo)
        ),
    )
}

fn within_band(x: f64, a: f64, b: f64) -> bool {
    let (lo, hi) = (a.min(b), a.max(b));
    let slack = CPQ_ENDPOINT_BAND * (hi - lo);
    x >= lo - slack && x <= hi + slack
}

fn cpq_continuity(points: &[Vec<SweepRow>]) -> Verdict {
    let p95: Vec<f64> = points.iter().map(|p| avg_read_p95(p)).collect();
    let prop: Vec<f64> = points.iter().map(|p| avg_proportion(p)).collect();
    let n = points.len();
    let monotone = p95.windows(2).all(|w| w[1] >= w[0] * (1.0 - CPQ_P95_STEP_SLACK));
    let improves = prop[n - 1] < prop[0];
    let between = (1..n - 1).all(|i| {
        within_band(p95[i], p95[0], p95[n - 1]) && within_band(prop[i], prop[0], prop[n - 1])
    });
    verdict(
        monotone && improves && between,
        format!("read p95 {p95:.0?}, proportion {prop:.5?}; monotone {monotone}, improves {improves}, intermediate {between}"),
    )
}

fn ad_accounting() -> Verdict {
    let base = baseline(&[("policy.kind", "ad")]);
    let rows = seed_sweep(&base, "policy.read_delay_ms", &AD_DELAY_MS.to_string()).remove(0);
    let p95s: Vec<f64> = rows.iter().map(|r| r.read_p95_us.unwrap()).collect();
    let prop = avg_proportion(&rows);
    let bound = STRONG_MAX_PROPORTION + AD_PROPORTION_SLACK;
    let p95_ok = p95s.iter().all(|p| (AD_P95_RANGE_US.0..=AD_P95_RANGE_US.1).contains(p));
    verdict(
        p95_ok && prop <= bound,
        format!("{AD_DELAY_MS}ms delay: read p95 {p95s:.0?}us in {AD_P95_RANGE_US:?}; mean proportion {prop:.5} (bound {bound})"),
    )
}

fn cpq_dominates_ad(cpq_high: &[SweepRow]) -> Verdict {
    let target = avg_proportion(cpq_high);
    let cpq_p95 = avg_read_p95(cpq_high);
    let base = baseline(&[("policy.kind", "ad")]);
    let points = seed_sweep(&base, "policy.read_delay_ms", AD_SWEEP_MS);
    let Some(matched) = points.iter().find(|p| avg_proportion(p) <= target) else {
        return verdict(false, format!("no delay in {AD_SWEEP_MS} ms reaches proportion {target:.5}"));
    };
    let ad_p95 = avg_read_p95(matched);
    verdict(
        ad_p95 >= DOMINANCE_FACTOR * cpq_p95,
        format!(
            "CPQ p=1 proportion {target:.5}, read p95 {cpq_p95:.0}us; AD matches at {}ms with p95 {ad_p95:.0}us ({:.1}x, need {DOMINANCE_FACTOR}x)",
            matched[0].value,
            ad_p95 / cpq_p95
        ),
    )
}

fn widening() -> Verdict {
    let strategy = (history(), 0i64..10);
    let result = property_runner().run(&strategy, |(ops, delta)| {
        let before = scores(&ops);
        let after = scores(&widen(&ops, delta));
        for (k, g) in &before {
            let expected = g - (*g).min(2 * delta);
            if after[k] != expected {
                return Err(TestCaseError::fail(format!("value {k:?}: {g} widened by {delta} gave {}", after[k])));
            }
        }
        Ok(())
    });
    if let Err(e) = result {
        return verdict(false, format!("counterexample: {e}"));
    }
    let trace = run(&baseline(&[("wl.duration_s", "2")])).unwrap().trace;
    let score = |t: &Trace| per_value_scores(&build_clusters(t).unwrap());
    let before = score(&trace);
    let mut reduced = 0;
    for delta in [100, 500, 2000] {
        let widened = Trace { meta: trace.meta.clone(), records: widen(&trace.records, delta) };
        let after = score(&widened);
        for (k, g) in &before {
            if after[k] != g - (*g).min(2 * delta) {
                return verdict(false, format!("simulated value {k:?} widened by {delta}: {g} -> {}", after[k]));
            }
            reduced += usize::from(*g > 0);
        }
    }
    verdict(true, format!("{PROPERTY_CASES} histories exact; simulated trace exact at 3 widths ({reduced} positive scores checked)"))
}

fn workload_statistics() -> Verdict {
    let sampler = KeyDistribution::hotspot(10_000).sampler().unwrap();
    let mut rng = RngStream::new(42, "acceptance/hotspot");
    let hot = (0..SAMPLES).filter(|_| sampler.next_key(&mut rng) < 2000).count() as f64 / SAMPLES as f64;

    let mut rng = RngStream::new(42, "acceptance/mix");
    let reads = (0..SAMPLES).filter(|_| next_op_kind(READ_FRACTION.0, &mut rng) == OpKind::Read).count();
    let drawn_fraction = reads as f64 / SAMPLES as f64;

    // 2 hosts x 1000 ops/s x 50 s = 10^5 operations
    let report = run(&desk(&[("wl.duration_s", "50")])).unwrap().report;
    let traced = report.latency.read.count as f64 / report.completed_ops as f64;
    let rel = (report.throughput_ops_s - report.target_ops_s).abs() / report.target_ops_s;

    let hot_ok = (hot - HOT_FRACTION.0).abs() <= HOT_FRACTION.1;
    let mix_ok = (drawn_fraction - READ_FRACTION.0).abs() <= READ_FRACTION.1
        && (traced - READ_FRACTION.0).abs() <= READ_FRACTION.1;
    let tput_ok = report.completed_ops >= SAMPLES && rel <= THROUGHPUT_TOLERANCE;
    verdict(
        hot_ok && mix_ok && tput_ok,
        format!(
            "hot fraction {hot:.4}; read fraction {drawn_fraction:.4} drawn, {traced:.4} traced; {} ops at {:.1} ops/s vs {:.0} target ({:.3}% off)",
            report.completed_ops,
            report.throughput_ops_s,
            report.target_ops_s,
            rel * 100.0
        ),
    )
}

fn threshold_filter() -> Verdict {
    let mut details = Vec::new();
    let mut pass = true;
    for seed in 42..42 + u64::from(SEEDS) {
        let seed = seed.to_string();
        let cfg = |skew: &str| {
            desk(&[("seed", &seed), ("policy.read", "ALL"), ("policy.write", "ALL"), ("wl.skew_us", skew)])
        };
        let clean = analyze(&run(&cfg("0")).unwrap().trace, THRESHOLD_US);
        let skewed = analyze(&run(&cfg(SKEW_BOUND_US)).unwrap().trace, THRESHOLD_US);
        pass &= clean.max_gamma_us == 0
            && skewed.raw_positive_clusters > 0
            && skewed.proportion_positive == 0.0;
        details.push(format!(
            "seed {seed}: {} raw positive (max {}us), proportion {}",
            skewed.raw_positive_clusters, skewed.max_gamma_us, skewed.proportion_positive
        ));
    }
    verdict(pass, format!("skew within +/-{SKEW_BOUND_US}us: {}", details.join("; ")))
}

fn main() {
    let started = Instant::now();
    let one = fixed("ONE");
    let quo = fixed("QUORUM");
    let cpq = seed_sweep(&baseline(&[("policy.kind", "cpq")]), "policy.p", "0,0.25,0.5,0.75,1");

    let results: Vec<(&str, Verdict)> = vec![
        ("oracle equivalence", oracle_equivalence()),
        ("determinism", determinism()),
        ("strong-consistency endpoint", strong_endpoint(&quo)),
        ("eventual-consistency endpoint", eventual_endpoint(&one, &quo)),
        ("CPQ continuity", cpq_continuity(&cpq)),
        ("AD latency accounting", ad_accounting()),
        ("CPQ dominates AD", cpq_dominates_ad(cpq.last().unwrap())),
        ("stretching mechanism", widening()),
        ("workload statistics", workload_statistics()),
        ("threshold filter", threshold_filter()),
    ];

    let mut failed = 0;
    for (i, (name, v)) in results.iter().enumerate() {
        println!("[{}] {:>2}. {name}: {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
        failed += usize::from(!v.pass);
    }
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        results.len() - failed,
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
