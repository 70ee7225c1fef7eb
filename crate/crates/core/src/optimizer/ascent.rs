//! Trust-region local ascent on the minimum margin.
//!
//! Every margin is bilinear in `(q, Π)`. Each iteration linearises all of
//! them around the current point and solves the small epigraph LP
//!
//! ```text
//! maximize t  s.t.  m_i + ∇m_i·Δ >= t,  point + Δ in the region,  |Δ|_inf <= ρ
//! ```
//!
//! The step is kept when the true minimum margin improves by at least a
//! tenth of the predicted gain; otherwise the radius shrinks. The region's
//! constraints are linear, so every LP step stays feasible and no penalty
//! terms are needed.

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Variable};

use super::region::Region;
use crate::zone::{class_rates_into, min_margin_raw, service_rates_into, DecisionSet};

const ACCEPT_RATIO: f64 = 0.1;
const EXPAND_RATIO: f64 = 0.75;
const INITIAL_RADIUS: f64 = 0.25;
const PREDICTED_GAIN_TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
pub(crate) struct AscentOutcome {
    pub point: DecisionSet,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn objective(region: &Region<'_>, d: &DecisionSet) -> f64 {
    min_margin_raw(region.cfg, d.q(), d.pi())
}

/// Runs the ascent from a point already inside `region`.
pub(crate) fn ascend(
    region: &Region<'_>,
    start: DecisionSet,
    max_iters: usize,
    step_tol: f64,
) -> AscentOutcome {
    let mut x = start;
    let mut fx = objective(region, &x);
    let mut radius = INITIAL_RADIUS;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iters {
        iterations += 1;
        let Some(step) = linearized_step(region, &x, radius) else {
            converged = true;
            break;
        };
        let predicted = step.t - fx;
        if predicted <= PREDICTED_GAIN_TOL * fx.abs().max(1.0) {
            converged = true;
            break;
        }
        let trial = match region.restore(&step.q, &step.pi) {
            Ok(d) => d,
            Err(_) => break,
        };
        let f_trial = objective(region, &trial);
        let actual = f_trial - fx;
        if actual > 0.0 && actual >= ACCEPT_RATIO * predicted {
            let moved = max_abs_diff(&x, &trial);
            x = trial;
            fx = f_trial;
            if actual >= EXPAND_RATIO * predicted && step.hit_radius {
                radius = (2.0 * radius).min(1.0);
            }
            if moved < step_tol {
                converged = true;
                break;
            }
        } else {
            radius *= 0.25;
            if radius < step_tol {
                converged = true;
                break;
            }
        }
    }

    AscentOutcome {
        point: x,
        objective: fx,
        iterations,
        converged,
    }
}

fn max_abs_diff(a: &DecisionSet, b: &DecisionSet) -> f64 {
    let dq = a
        .q()
        .iter()
        .zip(b.q())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let dp = a
        .pi()
        .iter()
        .zip(b.pi())
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    dq.max(dp)
}

struct Step {
    q: Vec<f64>,
    pi: Vec<Vec<f64>>,
    t: f64,
    hit_radius: bool,
}

fn linearized_step(region: &Region<'_>, x: &DecisionSet, radius: f64) -> Option<Step> {
    let cfg = region.cfg;
    let n = cfg.n();
    let lv = cfg.lambda_v();
    let p = cfg.p();
    let q = x.q();
    let pi = x.pi();

    let mut rates = vec![0.0; n];
    let mut vs = vec![0.0; n];
    class_rates_into(cfg, q, &mut rates);
    service_rates_into(&rates, pi, &mut vs);

    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let dq: Vec<Option<Variable>> = (0..n)
        .map(|i| {
            region.q_free(i).then(|| {
                let lo = (-radius).max(-q[i]);
                let hi = radius.min(region.q_upper[i] - q[i]).max(lo);
                lp.add_var(0.0, (lo, hi))
            })
        })
        .collect();
    let dpi: Vec<Option<Vec<Variable>>> = (0..n)
        .map(|r| {
            region.row_free(r).then(|| {
                pi[r]
                    .iter()
                    .map(|&v| {
                        let lo = (-radius).max(-v);
                        let hi = radius.min(1.0 - v).max(lo);
                        lp.add_var(0.0, (lo, hi))
                    })
                    .collect()
            })
        })
        .collect();
    if dq.iter().all(Option::is_none) && dpi.iter().all(Option::is_none) {
        return None;
    }
    let t = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));

    for i in 0..n {
        // d m_i / d q_j, accumulated over every vehicle class k >= i.
        let mut grad_q = vec![0.0; n];
        for k in i..n {
            let w = pi[k][i];
            if w == 0.0 {
                continue;
            }
            let s = (k + 1) % n;
            grad_q[k] -= lv * p[k] * w;
            grad_q[s] += lv * p[s] * w;
        }
        let mut expr = LinearExpr::empty();
        for (j, var) in dq.iter().enumerate() {
            if let Some(v) = var {
                if grad_q[j] != 0.0 {
                    expr.add(*v, grad_q[j]);
                }
            }
        }
        for (k, row) in dpi.iter().enumerate().skip(i) {
            if let Some(vars) = row {
                expr.add(vars[i], rates[k]);
            }
        }
        expr.add(t, -1.0);
        lp.add_constraint(expr, ComparisonOp::Ge, -(vs[i] - cfg.lambda_c()[i]));
    }

    if dq.iter().any(Option::is_some) {
        let served: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
        let mut expr = LinearExpr::empty();
        for (j, var) in dq.iter().enumerate() {
            if let Some(v) = var {
                expr.add(*v, p[j]);
            }
        }
        lp.add_constraint(
            expr,
            ComparisonOp::Ge,
            (region.min_served_share - served).min(0.0),
        );
    }
    for vars in dpi.iter().flatten() {
        let terms: Vec<(Variable, f64)> = vars.iter().map(|v| (*v, 1.0)).collect();
        lp.add_constraint(&terms[..], ComparisonOp::Eq, 0.0);
    }

    let solution = lp.solve().ok()?.into_solution().ok()?;
    let mut hit_radius = false;
    let mut note = |delta: f64| {
        if delta.abs() >= radius * (1.0 - 1e-9) {
            hit_radius = true;
        }
        delta
    };
    let q_new: Vec<f64> = (0..n)
        .map(|i| match dq[i] {
            Some(v) => q[i] + note(solution.var_value(v)),
            None => q[i],
        })
        .collect();
    let pi_new: Vec<Vec<f64>> = (0..n)
        .map(|r| match &dpi[r] {
            Some(vars) => pi[r]
                .iter()
                .zip(vars)
                .map(|(x, v)| x + note(solution.var_value(*v)))
                .collect(),
            None => pi[r].clone(),
        })
        .collect();
    Some(Step {
        q: q_new,
        pi: pi_new,
        t: solution.var_value(t),
        hit_radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zone::ZoneConfig;

    #[test]
    fn climbs_to_fleet_bound_on_small_zone() {
        let cfg = ZoneConfig::new(2, 2.0, vec![0.4, 0.6], vec![0.5, 0.6], 0.5, 2).unwrap();
        let region = Region::joint(&cfg, 1e-6);
        let start = region
            .restore(&[0.0, 0.0], &[vec![1.0], vec![0.0, 1.0]])
            .unwrap();
        let out = ascend(&region, start, 500, 1e-10);
        assert!((out.objective - 0.45).abs() < 1e-9, "got {}", out.objective);
        assert!(out.converged);
    }

    #[test]
    fn pinned_rows_do_not_move() {
        let cfg =
            ZoneConfig::new(3, 3.0, vec![0.3, 0.4, 0.3], vec![0.5, 0.6, 0.4], 0.5, 3).unwrap();
        let region = Region::same_class(&cfg, 1e-6);
        let start = region
            .restore(&[0.5; 3], &crate::zone::identity_rows(3))
            .unwrap();
        let out = ascend(&region, start, 500, 1e-10);
        assert_eq!(out.point.pi(), &crate::zone::identity_rows(3)[..]);
        assert!(out.objective >= min_margin_raw(&cfg, &[0.5; 3], &crate::zone::identity_rows(3)));
    }
}
