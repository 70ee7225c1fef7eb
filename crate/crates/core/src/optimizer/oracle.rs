//! Exhaustive grid search over every charging probability and every free
//! dispatch entry. Only meant for tiny zones, where it pins reference values
//! for the ascent.

use rayon::prelude::*;

use super::region::Region;
use super::{SolveResult, SolverConfig};
use crate::error::{Error, Result};
use crate::zone::{class_rates_into, fleet_rate_bound, DecisionSet, ZoneConfig};

pub const MAX_ORACLE_FREE_VARS: usize = 6;

struct Best {
    objective: f64,
    q_index: usize,
    q: Vec<f64>,
    rows: Vec<usize>,
    evaluated: usize,
    any_feasible_q: bool,
}

/// Grid points `k / (steps - 1)` for a row with `free` free entries; the
/// diagonal entry takes the remainder.
fn row_options(free: usize, steps: usize) -> Vec<Vec<f64>> {
    let top = steps - 1;
    let scale = top as f64;
    let mut out = Vec::new();
    let mut ks = vec![0usize; free];
    loop {
        let used: usize = ks.iter().sum();
        if used <= top {
            let mut row: Vec<f64> = ks.iter().map(|&k| k as f64 / scale).collect();
            row.push((top - used) as f64 / scale);
            out.push(row);
        }
        // Odometer increment.
        let mut pos = 0;
        loop {
            if pos == free {
                return out;
            }
            ks[pos] += 1;
            if ks[pos] <= top {
                break;
            }
            ks[pos] = 0;
            pos += 1;
        }
    }
}

/// Best grid point of the joint program.
pub fn brute_force_oracle(cfg: &ZoneConfig, sc: &SolverConfig) -> Result<SolveResult> {
    sc.validate()?;
    let n = cfg.n();
    let free = n + n * (n - 1) / 2;
    if free > MAX_ORACLE_FREE_VARS {
        return Err(Error::OracleGuard {
            free,
            max: MAX_ORACLE_FREE_VARS,
        });
    }
    let steps = sc.grid_steps;
    let scale = (steps - 1) as f64;
    let region = Region::joint(cfg, sc.eps_strict);
    let options: Vec<Vec<Vec<f64>>> = (0..n).map(|r| row_options(r, steps)).collect();
    let inner_q = steps.pow((n - 1) as u32);

    let slices: Vec<Best> = (0..steps)
        .into_par_iter()
        .map(|k0| {
            let mut best = Best {
                objective: f64::NEG_INFINITY,
                q_index: usize::MAX,
                q: Vec::new(),
                rows: Vec::new(),
                evaluated: 0,
                any_feasible_q: false,
            };
            let mut q = vec![0.0; n];
            let mut rates = vec![0.0; n];
            let mut choice = vec![0usize; n];
            for t in 0..inner_q {
                q[0] = k0 as f64 / scale;
                let mut code = t;
                for qi in q.iter_mut().skip(1) {
                    *qi = (code % steps) as f64 / scale;
                    code /= steps;
                }
                if !region.contains(&q, &[], 0.0) {
                    continue;
                }
                best.any_feasible_q = true;
                class_rates_into(cfg, &q, &mut rates);
                // Each margin is at most the flow of every class able to serve it.
                let mut tail = 0.0;
                let mut upper = f64::INFINITY;
                for i in (0..n).rev() {
                    tail += rates[i];
                    upper = upper.min(tail - cfg.lambda_c()[i]);
                }
                if upper <= best.objective {
                    continue;
                }
                choice.iter_mut().for_each(|c| *c = 0);
                loop {
                    best.evaluated += 1;
                    let mut worst = f64::INFINITY;
                    for i in 0..n {
                        let served: f64 = (i..n).map(|k| rates[k] * options[k][choice[k]][i]).sum();
                        worst = worst.min(served - cfg.lambda_c()[i]);
                    }
                    if worst > best.objective {
                        best.objective = worst;
                        best.q_index = k0 * inner_q + t;
                        best.q = q.clone();
                        best.rows = choice.clone();
                    }
                    let mut pos = 1;
                    loop {
                        if pos == n {
                            break;
                        }
                        choice[pos] += 1;
                        if choice[pos] < options[pos].len() {
                            break;
                        }
                        choice[pos] = 0;
                        pos += 1;
                    }
                    if pos == n {
                        break;
                    }
                }
            }
            best
        })
        .collect();

    let evaluated: usize = slices.iter().map(|b| b.evaluated).sum();
    let any_feasible = slices.iter().any(|b| b.any_feasible_q);
    let winner = slices
        .into_iter()
        .filter(|b| !b.q.is_empty())
        .reduce(|a, b| {
            if b.objective > a.objective || (b.objective == a.objective && b.q_index < a.q_index) {
                b
            } else {
                a
            }
        });
    let Some(best) = winner.filter(|_| any_feasible) else {
        region.check_feasible()?;
        return Err(Error::NoFeasiblePoint {
            constraint: format!(
                "no grid point with {steps} steps per variable satisfies the charging constraints"
            ),
        });
    };
    let pi: Vec<Vec<f64>> = (0..n).map(|r| options[r][best.rows[r]].clone()).collect();
    let decisions = DecisionSet::from_parts(best.q, pi);
    Ok(SolveResult {
        feasible: best.objective >= sc.eps_strict,
        r_star: best.objective,
        bound_gap: fleet_rate_bound(cfg) - best.objective,
        decisions,
        starts_used: 0,
        iterations: evaluated,
        converged_starts: 0,
    })
}
