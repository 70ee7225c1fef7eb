//! Shared fixtures and an exact reference optimum for the joint program.
//!
//! For a fixed charging vector, vehicles of class `k` can serve any class
//! `j <= k`, so the best dispatch reaches margin `t` exactly when every
//! suffix of classes `m..=n` has enough supply:
//! `S_v(m) >= S_c(m) + (n - m + 1) t`. Telescoping the class rates gives
//! `S_v(m) = λ_v (P_{>=m} + p_{m-1} (1 - q_{m-1}) + p_0 q_0)` for `m >= 2`
//! and `S_v(1) = λ_v`. Every suffix prefers `q_0` as large as the station
//! allows, while each other `q_{m-1}` appears in one suffix only, so a level
//! `t` is reachable iff setting every `q_{m-1}` to its largest admissible
//! value still meets the partial-charging capacity. The optimum is found by
//! bisection on `t`.

#![allow(dead_code)]

use aemod::ZoneConfig;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: f64 = 1e-6;

pub fn pinned() -> ZoneConfig {
    ZoneConfig::new(2, 2.0, vec![0.4, 0.6], vec![0.5, 0.6], 0.5, 2).unwrap()
}

pub fn starved() -> ZoneConfig {
    ZoneConfig::new(2, 2.0, vec![0.4, 0.6], vec![0.5, 0.6], 0.05, 2).unwrap()
}

pub fn pinned_optimum() -> (Vec<f64>, Vec<Vec<f64>>) {
    (vec![0.5, 11.0 / 24.0], vec![vec![1.0], vec![0.0, 1.0]])
}

/// Largest charging probability of each class compatible with level `t`,
/// or `None` when some suffix cannot reach `t` at all.
fn q_at_level(cfg: &ZoneConfig, u0: f64, t: f64) -> Option<Vec<f64>> {
    let n = cfg.n();
    let p = cfg.p();
    let lv = cfg.lambda_v();
    let lc = cfg.lambda_c();
    let mut q = vec![0.0; n];
    q[0] = u0;
    for m in 2..=n {
        let p_tail: f64 = p[m..].iter().sum();
        let demand: f64 = lc[m - 1..].iter().sum::<f64>() + (n - m + 1) as f64 * t;
        let h = p_tail + p[m - 1] + p[0] * u0 - demand / lv;
        if h < 0.0 {
            return None;
        }
        q[m - 1] = if p[m - 1] > 0.0 {
            (h / p[m - 1]).min(1.0)
        } else {
            1.0
        };
    }
    Some(q)
}

/// Exact optimum `(R*, q*)` of the joint program with the charging
/// constraints tightened by `eps`, or `None` when no charging vector meets
/// them or no positive level is reachable.
pub fn exact_joint_optimum(cfg: &ZoneConfig, eps: f64) -> Option<(f64, Vec<f64>)> {
    let n = cfg.n();
    let p = cfg.p();
    let lv = cfg.lambda_v();
    let u0 = if p[0] > 0.0 {
        ((cfg.mu_c() - eps) / (lv * p[0])).min(1.0)
    } else {
        1.0
    };
    if u0 < 0.0 {
        return None;
    }
    let capacity = cfg.c_points() as f64 * n as f64 * cfg.mu_c();
    let min_share = 1.0 - (capacity - eps) / lv;
    let bound = (lv - cfg.lambda_c().iter().sum::<f64>()) / n as f64;
    let ok = |t: f64| -> bool {
        if t > bound {
            return false;
        }
        match q_at_level(cfg, u0, t) {
            Some(q) => p.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>() >= min_share,
            None => false,
        }
    };
    // Every charging vector at the station cap with all q = 1 is the most
    // permissive point for the capacity constraint.
    let share_max = p[0] * u0 + p[1..].iter().sum::<f64>();
    if share_max < min_share {
        return None;
    }
    let mut lo = -cfg.lambda_c().iter().sum::<f64>() - 1.0;
    if !ok(lo) {
        return None;
    }
    let mut hi = bound;
    if ok(hi) {
        lo = hi;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-15 * (1.0 + hi.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some((lo, q_at_level(cfg, u0, lo).unwrap()))
}

/// Random zone with `n` classes. Demand stays below supply; charging
/// capacity is drawn wide enough that some configurations are infeasible.
pub fn random_config(rng: &mut ChaCha8Rng, n: usize) -> ZoneConfig {
    let lambda_v = rng.random_range(1.0..10.0);
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|x| x / s).collect();
    let tail: f64 = p[1..].iter().sum();
    p[0] = 1.0 - tail;
    let total = lambda_v * rng.random_range(0.3..0.95);
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let ws: f64 = w.iter().sum();
    let lambda_c: Vec<f64> = w.iter().map(|x| total * x / ws).collect();
    let c_points = rng.random_range(1..=10u32);
    let mu_c = lambda_v * rng.random_range(0.02..0.6) / (n as f64 * c_points as f64).sqrt();
    ZoneConfig::new(n, lambda_v, p, lambda_c, mu_c, c_points).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
