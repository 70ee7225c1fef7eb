//! Max-min optimisation of the charging vector `q` and dispatch matrix `Π`.
//!
//! [`solve`] runs a multi-start trust-region ascent (see the `ascent`
//! module) from the fixed baseline policies, the same-class optimum, a
//! bound-seeking seed and random points, and keeps the best result.
//! [`kkt`] fits Lagrange multipliers and reports KKT residuals,
//! [`branches`] enumerates the closed-form active-set candidates and
//! [`brute_force_oracle`] grids the whole decision space for small zones.

mod ascent;
pub mod branches;
pub mod kkt;
mod oracle;
mod region;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policies::{fixed_policy, proportional_rows, PolicyKind};
use crate::zone::{
    check_stability_eps, fleet_rate_bound, identity_rows, min_margin_raw, DecisionSet, ZoneConfig,
};

pub use branches::{
    closed_form_branch_candidates, ActiveSet, BranchCandidate, Hypotheses, PiRowBranch, Q0Branch,
    QBranch, RBranch,
};
pub use kkt::{
    certify, fit_multipliers, kkt_residuals, lagrangian, lagrangian_gradient, KktCertificate,
    KktMultipliers, KktResiduals,
};
pub use oracle::brute_force_oracle;

use ascent::{ascend, AscentOutcome};
use region::Region;

/// Starts used for the same-class sub-problem when it seeds the joint solve.
const SAME_CLASS_SEED_STARTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub starts: usize,
    pub max_iters: usize,
    pub step_tol: f64,
    pub eps_strict: f64,
    pub seed: u64,
    pub grid_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            starts: 64,
            max_iters: 5000,
            step_tol: 1e-8,
            eps_strict: 1e-6,
            seed: 0,
            grid_steps: 101,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.starts == 0 {
            return Err(Error::invalid("solver.starts", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("solver.max_iters", "must be positive"));
        }
        if !(self.step_tol > 0.0 && self.step_tol.is_finite()) {
            return Err(Error::invalid(
                "solver.step_tol",
                "must be a positive number",
            ));
        }
        if !(self.eps_strict > 0.0 && self.eps_strict.is_finite()) {
            return Err(Error::invalid(
                "solver.eps_strict",
                "must be a positive number",
            ));
        }
        if self.grid_steps < 2 {
            return Err(Error::invalid("solver.grid_steps", "must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub decisions: DecisionSet,
    /// Minimum margin `min_i (λ_vs_i - λ_c_i)` at `decisions`.
    pub r_star: f64,
    /// Charging constraints hold with slack and `r_star >= eps_strict`.
    pub feasible: bool,
    /// `fleet_rate_bound(cfg) - r_star`.
    pub bound_gap: f64,
    pub starts_used: usize,
    pub iterations: usize,
    pub converged_starts: usize,
}

/// A possibly infeasible point handed to [`suggest_and_improve`]. Entries may
/// lie outside `[0, 1]` and rows need not sum to one, but the shape must be
/// lower-triangular with `n` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub q: Vec<f64>,
    pub pi: Vec<Vec<f64>>,
}

impl From<&DecisionSet> for Suggestion {
    fn from(d: &DecisionSet) -> Self {
        Self {
            q: d.q().to_vec(),
            pi: d.pi().to_vec(),
        }
    }
}

/// Minimum response-rate margin; negative when some class is unstable.
pub fn objective_min_margin(cfg: &ZoneConfig, d: &DecisionSet) -> Result<f64> {
    d.check_dims(cfg)?;
    Ok(min_margin_raw(cfg, d.q(), d.pi()))
}

/// Jointly optimises `q` and `Π`.
pub fn solve(cfg: &ZoneConfig, sc: &SolverConfig) -> Result<SolveResult> {
    sc.validate()?;
    guard_bound(cfg)?;
    let region = Region::joint(cfg, sc.eps_strict);
    region.check_feasible()?;

    let mut starts = Vec::with_capacity(sc.starts + 6);
    for kind in PolicyKind::FIXED {
        let d = fixed_policy(kind, cfg).expect("fixed policy");
        starts.push(region.restore(d.q(), d.pi())?);
    }
    let same_sc = SolverConfig {
        starts: sc.starts.min(SAME_CLASS_SEED_STARTS),
        ..sc.clone()
    };
    let same_region = Region::same_class(cfg, sc.eps_strict);
    let same = run_multistart(
        &same_region,
        &same_sc,
        same_class_starts(&same_region, &same_sc)?,
    );
    starts.push(same.point);
    starts.push(bound_seed(&region)?);

    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    while starts.len() < sc.starts {
        let q: Vec<f64> = (0..cfg.n()).map(|_| rng.random::<f64>()).collect();
        let pi = random_rows(&mut rng, cfg.n());
        starts.push(region.restore(&q, &pi)?);
    }

    let best = run_multistart(&region, sc, starts);
    Ok(finish(cfg, &region, sc, best))
}

/// Optimises `q` with same-class dispatch (`Π = I`).
pub fn solve_same_class(cfg: &ZoneConfig, sc: &SolverConfig) -> Result<SolveResult> {
    sc.validate()?;
    guard_bound(cfg)?;
    let region = Region::same_class(cfg, sc.eps_strict);
    region.check_feasible()?;
    let starts = same_class_starts(&region, sc)?;
    let best = run_multistart(&region, sc, starts);
    Ok(finish(cfg, &region, sc, best))
}

/// Projects a suggested point onto the feasible set and improves it by
/// local ascent. The result is never worse than the suggestion when the
/// suggestion was already feasible.
pub fn suggest_and_improve(
    cfg: &ZoneConfig,
    suggestion: &Suggestion,
    sc: &SolverConfig,
) -> Result<SolveResult> {
    sc.validate()?;
    let n = cfg.n();
    if suggestion.q.len() != n {
        return Err(Error::DimensionMismatch {
            what: "suggested q",
            expected: n,
            found: suggestion.q.len(),
        });
    }
    if suggestion.pi.len() != n {
        return Err(Error::DimensionMismatch {
            what: "suggested pi rows",
            expected: n,
            found: suggestion.pi.len(),
        });
    }
    for (i, row) in suggestion.pi.iter().enumerate() {
        if row.len() != i + 1 {
            return Err(Error::DimensionMismatch {
                what: "suggested pi row length",
                expected: i + 1,
                found: row.len(),
            });
        }
    }
    let region = Region::joint(cfg, sc.eps_strict);
    let start = region.restore(&suggestion.q, &suggestion.pi)?;
    let best = run_multistart(&region, sc, vec![start]);
    Ok(finish(cfg, &region, sc, best))
}

fn guard_bound(cfg: &ZoneConfig) -> Result<()> {
    let bound = fleet_rate_bound(cfg);
    if bound <= 0.0 {
        return Err(Error::InfeasibleZone { bound });
    }
    Ok(())
}

fn same_class_starts(region: &Region<'_>, sc: &SolverConfig) -> Result<Vec<DecisionSet>> {
    let n = region.n();
    let rows = identity_rows(n);
    let mut starts = vec![
        region.restore(&vec![0.0; n], &rows)?,
        region.restore(&vec![0.5; n], &rows)?,
        region.restore(&vec![1.0; n], &rows)?,
    ];
    // Salt the stream so the same-class starts differ from the joint ones.
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed ^ 0x5a5a_5a5a_5a5a_5a5a);
    while starts.len() < sc.starts {
        let q: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        starts.push(region.restore(&q, &rows)?);
    }
    Ok(starts)
}

/// Depleted vehicles fully charge as much as the station allows, the other
/// classes split evenly and dispatch follows demand.
fn bound_seed(region: &Region<'_>) -> Result<DecisionSet> {
    let cfg = region.cfg;
    let mut q = vec![0.5; cfg.n()];
    q[0] = region.q_upper[0].max(0.0);
    region.restore(&q, &proportional_rows(cfg.lambda_c()))
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..=i).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
            row
        })
        .collect()
}

struct MultiStart {
    point: DecisionSet,
    objective: f64,
    starts: usize,
    iterations: usize,
    converged: usize,
}

fn run_multistart(region: &Region<'_>, sc: &SolverConfig, starts: Vec<DecisionSet>) -> MultiStart {
    let outcomes: Vec<AscentOutcome> = starts
        .into_par_iter()
        .map(|s| ascend(region, s, sc.max_iters, sc.step_tol))
        .collect();
    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.objective > outcomes[best].objective {
            best = i;
        }
    }
    MultiStart {
        starts: outcomes.len(),
        iterations: outcomes.iter().map(|o| o.iterations).sum(),
        converged: outcomes.iter().filter(|o| o.converged).count(),
        objective: outcomes[best].objective,
        point: outcomes
            .into_iter()
            .nth(best)
            .expect("at least one start")
            .point,
    }
}

fn finish(
    cfg: &ZoneConfig,
    region: &Region<'_>,
    sc: &SolverConfig,
    best: MultiStart,
) -> SolveResult {
    let charging_ok = check_stability_eps(cfg, &best.point, 0.0, sc.eps_strict)
        .map(|r| r.charging_stable())
        .unwrap_or(false);
    let feasible = best.objective >= sc.eps_strict
        && charging_ok
        && region.contains(best.point.q(), best.point.pi(), 1e-12);
    SolveResult {
        r_star: best.objective,
        feasible,
        bound_gap: fleet_rate_bound(cfg) - best.objective,
        decisions: best.point,
        starts_used: best.starts,
        iterations: best.iterations,
        converged_starts: best.converged,
    }
}
