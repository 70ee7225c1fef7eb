mod common;

use aemod::simulator::{compare_sim_vs_analytic, simulate_traced};
use aemod::zone::decreasing_soc;
use aemod::{simulate, DecisionSet, SimConfig, SimMode, ZoneConfig};
use common::{pinned, pinned_optimum};

fn pinned_decisions() -> DecisionSet {
    let (q, pi) = pinned_optimum();
    DecisionSet::new(q, pi).unwrap()
}

fn sim(mode: SimMode, horizon: u64, reps: usize) -> SimConfig {
    SimConfig {
        horizon_customers: horizon,
        warmup_fraction: 0.1,
        replications: reps,
        seed: 7,
        mode,
    }
}

#[test]
fn mm1_mode_matches_queueing_formula() {
    // Both classes have λ_vs - λ_c = 0.45, so W = 1 / 0.45 = 2.2222 min.
    let report = simulate(
        &pinned(),
        &pinned_decisions(),
        &sim(SimMode::AnalyticalMM1, 400_000, 4),
    )
    .unwrap();
    for w in &report.mean_response {
        assert!(
            (w - 1.0 / 0.45).abs() / (1.0 / 0.45) < 0.03,
            "mean response {w}"
        );
    }
    assert!(!report.unstable);
    assert!(report.censored.iter().all(|c| !c));
}

#[test]
fn littles_law_holds_per_customer_queue() {
    let cfg = pinned();
    let report = simulate(
        &cfg,
        &pinned_decisions(),
        &sim(SimMode::AnalyticalMM1, 400_000, 4),
    )
    .unwrap();
    for i in 0..2 {
        let l = report.queue_stats.customer[i].mean_length;
        let lw = cfg.lambda_c()[i] * report.mean_response[i];
        assert!((l - lw).abs() / lw < 0.03, "class {i}: L {l} vs λW {lw}");
    }
}

#[test]
fn ready_vehicle_flow_matches_fleet_rate() {
    let cfg = pinned();
    let report = simulate(
        &cfg,
        &pinned_decisions(),
        &sim(SimMode::VehicleFlow, 400_000, 4),
    )
    .unwrap();
    let rel = (report.ready_vehicle_rate - cfg.lambda_v()).abs() / cfg.lambda_v();
    assert!(rel < 0.01, "ready rate {}", report.ready_vehicle_rate);
    for (i, a) in report.arrival_rate.iter().enumerate() {
        assert!((a - cfg.lambda_c()[i]).abs() / cfg.lambda_c()[i] < 0.01);
    }
}

#[test]
fn partial_charging_utilisation_matches_offered_load() {
    // Every vehicle charges partially: offered load 8 against capacity
    // C n μ_c = 40 * 7 * 0.033 = 9.24.
    let n = 7;
    let lc = vec![0.5; n];
    let cfg = ZoneConfig::new(n, 8.0, decreasing_soc(n), lc, 0.033, 40).unwrap();
    let d = DecisionSet::same_class(vec![0.0; n]).unwrap();
    let report = simulate(&cfg, &d, &sim(SimMode::VehicleFlow, 200_000, 2)).unwrap();
    let u = report.queue_stats.partial_charging.utilization;
    assert!(
        (u - 8.0 / 9.24).abs() / (8.0 / 9.24) < 0.02,
        "utilisation {u}"
    );
    assert_eq!(report.queue_stats.full_station.utilization, 0.0);
}

#[test]
fn pooling_vehicles_never_slows_customers() {
    let div = compare_sim_vs_analytic(
        &pinned(),
        &pinned_decisions(),
        &sim(SimMode::AnalyticalMM1, 200_000, 4),
    )
    .unwrap();
    for i in 0..2 {
        assert!(div.vehicle_flow.mean_response[i] <= div.analytical_mm1.mean_response[i]);
        assert!(div.analytical_mm1_error[i] < 0.03);
        assert!(div.vehicle_flow_error[i].is_finite());
    }
}

#[test]
fn equal_seeds_give_identical_reports_and_traces() {
    let s = sim(SimMode::AnalyticalMM1, 20_000, 3);
    let a = simulate(&pinned(), &pinned_decisions(), &s).unwrap();
    let b = simulate(&pinned(), &pinned_decisions(), &s).unwrap();
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    let mut ta = Vec::new();
    let mut tb = Vec::new();
    simulate_traced(&pinned(), &pinned_decisions(), &s, &mut ta).unwrap();
    simulate_traced(&pinned(), &pinned_decisions(), &s, &mut tb).unwrap();
    assert_eq!(ta, tb);
    let other = simulate(&pinned(), &pinned_decisions(), &SimConfig { seed: 8, ..s }).unwrap();
    assert_ne!(format!("{a:?}"), format!("{other:?}"));
}

#[test]
fn trace_times_never_decrease() {
    let mut out = Vec::new();
    simulate_traced(
        &pinned(),
        &pinned_decisions(),
        &sim(SimMode::VehicleFlow, 5_000, 1),
        &mut out,
    )
    .unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut last = 0.0;
    for line in text.lines() {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 4, "{line}");
        let t: f64 = fields[0].parse().unwrap();
        assert!(t >= last);
        last = t;
    }
}

#[test]
fn tiny_runs_without_warmup_still_report() {
    let s = SimConfig {
        horizon_customers: 1000,
        warmup_fraction: 0.0,
        replications: 2,
        seed: 1,
        mode: SimMode::AnalyticalMM1,
    };
    let report = simulate(&pinned(), &pinned_decisions(), &s).unwrap();
    assert!(report.mean_response.iter().all(|w| w.is_finite()));
    assert!(report
        .ci95_halfwidth
        .iter()
        .all(|h| h.is_finite() && *h >= 0.0));
}

#[test]
fn unstable_decisions_are_flagged() {
    // No vehicle ever becomes ready in class 2; the run still ends on
    // class-1 services alone.
    let cfg = pinned();
    let d = DecisionSet::same_class(vec![0.0, 1.0]).unwrap();
    let report = simulate(&cfg, &d, &sim(SimMode::VehicleFlow, 5_000, 1)).unwrap();
    assert!(report.unstable);
}
