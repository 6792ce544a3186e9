use drivesim::analysis::{
    aggregate, horizon_sweep, objective_gap, paired_one_sided, scaling_experiment, summary_csv, ExperimentSpec, SuiteRef,
    SUMMARY_COLUMNS,
};
use drivesim::engine::{run_episode, EngineConfig, EpisodeReport, Scorer};
use drivesim::policy::PolicySpec;
use drivesim::procgen::{generate_scenario, Layout, ProcGenConfig};
use drivesim::traffic::TrafficMode;

fn report(seed: u64) -> EpisodeReport {
    let s = generate_scenario(&ProcGenConfig::default(), seed).unwrap();
    run_episode(&s, &PolicySpec::Expert, &EngineConfig::default()).unwrap()
}

fn small_spec() -> ExperimentSpec {
    ExperimentSpec {
        suite: SuiteRef::Procgen {
            configs: vec![ProcGenConfig { layout: Layout::Straight, lead_vehicle: true, ..Default::default() }],
            count: 3,
            seed: 4,
        },
        policies: vec![PolicySpec::NoisyExpert { sigma: 0.8, n: 6, drift: 0.5, accel_spread: 0.5 }],
        horizons: vec![40, 80],
        ks: vec![5, 20],
        ns: vec![1, 4],
        scorers: vec![Scorer::NativeBest, Scorer::TruncatedQ],
        seeds: vec![0],
        engine: EngineConfig { traffic: TrafficMode::Idm, ..Default::default() },
        ol_horizon: 40,
        fixed_horizon: 60,
    }
}

#[test]
fn aggregate_of_one_report_is_that_report() {
    let r = report(1);
    let s = aggregate(std::slice::from_ref(&r)).unwrap();
    assert_eq!(s.episodes, 1);
    assert_eq!(s.ds, r.ds);
    assert_eq!(s.rc, r.rc);
    assert_eq!(s.epdms, r.epdms_mean);
    assert_eq!(s.collisions, r.collisions);
}

#[test]
fn aggregate_averages_ds() {
    let mut a = report(1);
    let mut b = report(2);
    a.ds = 40.0;
    b.ds = 60.0;
    let s = aggregate(&[a, b]).unwrap();
    assert_eq!(s.episodes, 2);
    assert!((s.ds - 50.0).abs() < 1e-12);
    assert!(aggregate(&[]).is_err());
}

#[test]
fn summary_csv_columns_are_fixed() {
    let s = aggregate(&[report(3)]).unwrap();
    let text = String::from_utf8(summary_csv(&s).unwrap()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), SUMMARY_COLUMNS.join(","));
    assert_eq!(lines.next().unwrap().split(',').count(), SUMMARY_COLUMNS.len());
    assert!(lines.next().is_none());
}

#[test]
fn paired_test_edge_cases() {
    assert!(paired_one_sided(&[1.0, 2.0], &[1.0]).is_err());
    assert!(paired_one_sided(&[], &[]).is_err());
    assert_eq!(paired_one_sided(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    assert_eq!(paired_one_sided(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap(), 1.0);
}

#[test]
fn sweep_has_an_oracle_row_at_the_smallest_k() {
    let rows = horizon_sweep(&small_spec()).unwrap();
    assert_eq!(rows.len(), 2 * 2 + 1);
    let last = rows.last().unwrap();
    assert_eq!((last.k, last.scorer), (5, Scorer::OracleEpdms));
    for r in &rows {
        assert_eq!(r.episodes, 3);
        assert!(r.min_ds <= r.mean_ds && r.mean_ds <= r.max_ds);
    }
}

#[test]
fn gap_rows_follow_horizons() {
    let rows = objective_gap(&small_spec()).unwrap();
    assert_eq!(rows.iter().map(|r| r.horizon).collect::<Vec<_>>(), [40, 80]);
    for r in &rows {
        assert!((r.gap - (r.cl_selected - r.ol_selected)).abs() < 1e-9);
        assert!((0.0..=1.0).contains(&r.p_dominance));
    }
    assert_eq!(rows[0].p_widening, 1.0);
}

#[test]
fn one_candidate_scales_identically() {
    let rows = scaling_experiment(&small_spec()).unwrap();
    assert_eq!(rows.len(), 4);
    let single: Vec<_> = rows.iter().filter(|r| r.n == 1).collect();
    assert_eq!(single[0].mean_ds, single[1].mean_ds);
}

#[test]
fn experiment_validation() {
    let mut bad = small_spec();
    bad.horizons.clear();
    assert!(horizon_sweep(&bad).is_err());
    let mut bad = small_spec();
    bad.policies = vec![PolicySpec::Expert];
    assert!(scaling_experiment(&bad).is_err());
}
