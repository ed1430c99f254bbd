mod common;

use common::desk;
use cpqsim::config::ExperimentConfig;
use cpqsim::experiment::{run, sweep, sweep_with, write_sweep_csv, SweepRow, SweepSpec};
use cpqsim::par::Strategy;
use cpqsim::Error;

fn short() -> ExperimentConfig {
    desk(&[("wl.duration_s", "2"), ("policy.kind", "cpq")])
}

#[test]
fn sweep_equals_independent_runs() {
    let base = short();
    let spec = SweepSpec::new("policy.p", SweepSpec::parse_values("0, 0.5,1"), 2).unwrap();
    let rows = sweep(&base, &spec).unwrap();
    assert_eq!(rows.len(), 6);
    let mut i = 0;
    for value in ["0", "0.5", "1"] {
        for seed in [42u64, 43] {
            let mut cfg = base.clone();
            cfg.set("policy.p", value).unwrap();
            cfg.set("seed", &seed.to_string()).unwrap();
            let report = run(&cfg).unwrap().report;
            assert_eq!(rows[i], SweepRow::from_report("policy.p", value, &report));
            assert_eq!((rows[i].value.as_str(), rows[i].seed), (value, seed));
            i += 1;
        }
    }
}

#[test]
fn sweep_is_strategy_independent() {
    let spec = SweepSpec::new("wl.read_fraction", vec!["0.5".into(), "0.9".into()], 2).unwrap();
    let a = sweep_with(Strategy::Parallel, &short(), &spec).unwrap();
    let b = sweep_with(Strategy::Sequential, &short(), &spec).unwrap();
    assert_eq!(a, b);
}

#[test]
fn cpq_endpoints_match_fixed_levels() {
    let spec = SweepSpec::new("policy.p", vec!["0".into(), "1".into()], 1).unwrap();
    let rows = sweep(&short(), &spec).unwrap();
    for (row, level) in rows.iter().zip(["ONE", "QUORUM"]) {
        let fixed = run(&desk(&[("wl.duration_s", "2"), ("policy.read", level), ("policy.write", level)]))
            .unwrap()
            .report;
        let fixed_row = SweepRow::from_report("policy.p", &row.value, &fixed);
        assert_eq!(row.proportion_positive, fixed_row.proportion_positive);
        assert_eq!(row.read_p95_us, fixed_row.read_p95_us);
    }
}

#[test]
fn ad_sweep_shifts_read_latency_by_the_delay() {
    let base = desk(&[("wl.duration_s", "2"), ("policy.kind", "ad")]);
    let spec = SweepSpec::new("policy.read_delay_ms", SweepSpec::parse_values("0,5,10,15,20"), 1).unwrap();
    let rows = sweep(&base, &spec).unwrap();
    let baseline = rows[0].read_p95_us.unwrap();
    for (row, ms) in rows.iter().zip([0.0, 5.0, 10.0, 15.0, 20.0]) {
        assert_eq!(row.read_p95_us.unwrap(), baseline + ms * 1000.0);
    }
}

#[test]
fn sweep_spec_validation() {
    assert!(matches!(SweepSpec::new("policy.p", vec![], 1), Err(Error::Config(_))));
    assert!(matches!(SweepSpec::new("policy.p", SweepSpec::parse_values(" , "), 1), Err(Error::Config(_))));
    assert!(SweepSpec::new("policy.p", vec!["1".into()], 0).is_err());
    let bad_param = SweepSpec::new("policy.nope", vec!["1".into()], 1).unwrap();
    assert!(sweep(&short(), &bad_param).is_err());
    let bad_value = SweepSpec::new("policy.p", vec!["2".into()], 1).unwrap();
    assert!(sweep(&short(), &bad_value).is_err());
}

#[test]
fn sweep_csv_layout() {
    let spec = SweepSpec::new("policy.p", vec!["0.5".into()], 1).unwrap();
    let rows = sweep(&short(), &spec).unwrap();
    let mut buf = Vec::new();
    write_sweep_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "param,value,seed,proportion_positive,stale_read_fraction,read_p95_us,write_p95_us,throughput_ops_s"
    );
    assert!(lines.next().unwrap().starts_with("policy.p,0.5,42,"));
    assert!(!text.contains('\r'));
}

#[test]
fn reports_are_deterministic_and_complete() {
    let a = run(&short()).unwrap();
    let b = run(&short()).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.report, b.report);
    let r = &a.report;
    assert_eq!(r.config_digest, short().digest().unwrap());
    assert_eq!(r.throughput_ops_s, r.completed_ops as f64 / 2.0);
    assert!(!r.throughput_shortfall);
    assert!(r.sla.is_none());
}

#[test]
fn shortfall_is_flagged_not_fatal() {
    let cfg = desk(&[("wl.duration_s", "1"), ("wl.clients", "1"), ("wl.target_kops", "2"), ("policy.read", "ALL")]);
    let r = run(&cfg).unwrap().report;
    assert!(r.throughput_shortfall);
}

#[test]
fn sla_verdicts_reported_per_clause() {
    let cfg = desk(&[("wl.duration_s", "1"), ("sla.latency_ms", "0.5"), ("sla.stale_fraction", "0.5")]);
    let sla = run(&cfg).unwrap().report.sla.unwrap();
    assert!(!sla.latency_ok);
    assert!(sla.staleness_ok);
}

#[test]
fn per_host_mode_fills_per_host_percentiles() {
    let r = run(&desk(&[("wl.duration_s", "1"), ("metrics.per_host_avg", "true")])).unwrap().report;
    let p = r.per_host_read_p95_us.unwrap();
    let global = r.latency.read.p95_us.unwrap() as f64;
    assert!((p - global).abs() < 0.2 * global);
    assert_eq!(r.read_p95_us(), Some(p));
}
