mod common;

use aemod::optimizer::{
    brute_force_oracle, certify, closed_form_branch_candidates, solve, Hypotheses, Q0Branch,
    RBranch, SolverConfig,
};
use aemod::{check_stability, Error};
use common::{pinned, pinned_optimum, random_config, rng, starved, EPS};

#[test]
fn pinned_optimum_is_certified() {
    let (q, pi) = pinned_optimum();
    let cert = certify(&pinned(), &q, &pi, 0.45, EPS).unwrap();
    assert!(cert.certified, "{:?}", cert.residuals);
    assert!(cert.residuals.stationarity <= 1e-5);
    assert!(cert.residuals.complementarity <= 1e-5);
    assert!(cert.residuals.feasibility <= 1e-5);
}

#[test]
fn perturbed_point_is_not_certified() {
    let (mut q, pi) = pinned_optimum();
    q[0] += 0.05;
    let r = aemod::objective_min_margin(
        &pinned(),
        &aemod::DecisionSet::new(q.clone(), pi.clone()).unwrap(),
    )
    .unwrap();
    let cert = certify(&pinned(), &q, &pi, r, EPS).unwrap();
    assert!(!cert.certified);
    assert!(cert.residuals.max() > 1e-3, "{:?}", cert.residuals);
}

#[test]
fn solver_optimum_is_certified() {
    let res = solve(&pinned(), &SolverConfig::default()).unwrap();
    assert!((res.r_star - 0.45).abs() < 1e-6);
    let cert = certify(
        &pinned(),
        res.decisions.q(),
        res.decisions.pi(),
        res.r_star,
        EPS,
    )
    .unwrap();
    assert!(cert.residuals.stationarity <= 1e-5, "{:?}", cert.residuals);
}

#[test]
fn best_branch_matches_solver() {
    let cfg = pinned();
    let sc = SolverConfig::default();
    let cands = closed_form_branch_candidates(&cfg, &Hypotheses::default(), &sc).unwrap();
    assert_eq!(cands.len(), 12 * 6);
    let best = cands
        .iter()
        .filter(|c| c.feasible)
        .map(|c| c.objective)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((best - 0.45).abs() < 1e-6);
    assert!(cands
        .iter()
        .any(|c| c.feasible && c.certified && !c.dominated && c.hypothesis.r == RBranch::Bound));
    assert!(cands
        .iter()
        .filter(|c| c.feasible && !c.dominated)
        .all(|c| c.objective >= best - 1e-9));
    let eps_rows: Vec<_> = cands
        .iter()
        .filter(|c| c.hypothesis.r == RBranch::Epsilon && c.feasible)
        .collect();
    assert!(eps_rows.iter().all(|c| c.dominated));
    assert!(cands
        .iter()
        .any(|c| c.hypothesis.q0 == Q0Branch::StationCap));
}

#[test]
fn enumeration_is_guarded() {
    let cfg = random_config(&mut rng(3), 6);
    let err = closed_form_branch_candidates(&cfg, &Hypotheses::default(), &SolverConfig::default())
        .unwrap_err();
    assert!(err.is_validation(), "{err}");
}

#[test]
fn solver_never_trails_the_oracle() {
    let mut g = rng(21);
    let mut compared = 0;
    for case in 0..30 {
        let n = 2 + case % 2;
        let cfg = random_config(&mut g, n);
        let grid = if n == 2 { 101 } else { 11 };
        let sc = SolverConfig {
            grid_steps: grid,
            starts: 16,
            ..SolverConfig::default()
        };
        match (solve(&cfg, &sc), brute_force_oracle(&cfg, &sc)) {
            (Ok(s), Ok(o)) => {
                compared += 1;
                assert!(
                    s.r_star >= o.r_star - 1e-9,
                    "case {case}: {} < {}",
                    s.r_star,
                    o.r_star
                );
                if o.feasible {
                    assert!(check_stability(&cfg, &o.decisions, 0.0)
                        .unwrap()
                        .is_stable());
                }
            }
            (Err(a), Err(b)) => {
                assert!(a.is_infeasible() && b.is_infeasible(), "{a} / {b}");
            }
            (Ok(s), Err(Error::NoFeasiblePoint { .. })) => {
                // A coarse grid can miss a thin feasible sliver.
                assert!(s.feasible || s.r_star < EPS);
            }
            (a, b) => panic!("case {case}: solver {a:?} vs oracle {b:?}"),
        }
    }
    assert!(compared >= 10);
}

#[test]
fn starved_zone_is_infeasible_everywhere() {
    let cfg = starved();
    let sc = SolverConfig::default();
    assert!(matches!(
        solve(&cfg, &sc),
        Err(Error::NoFeasiblePoint { .. })
    ));
    assert!(matches!(
        brute_force_oracle(&cfg, &sc),
        Err(Error::NoFeasiblePoint { .. })
    ));
    let (q, pi) = pinned_optimum();
    let d = aemod::DecisionSet::new(q, pi).unwrap();
    let report = check_stability(&cfg, &d, 0.0).unwrap();
    assert!(!report.partial_charging_stable);
}
