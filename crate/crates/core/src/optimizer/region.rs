//! Feasible set of the charging/dispatch program: box bounds on `q`, the
//! full-station cap on `q_0`, the linear partial-charging capacity constraint
//! and one simplex per dispatch row. Some coordinates can be pinned, which is
//! how the same-class restriction and active-set hypotheses are expressed.

use crate::error::{Error, Result};
use crate::zone::{identity_rows, DecisionSet, ZoneConfig};

#[derive(Debug, Clone)]
pub(crate) struct Region<'a> {
    pub cfg: &'a ZoneConfig,
    pub eps: f64,
    /// Upper bound on each free `q_i`; only `q_0` can be below one.
    pub q_upper: Vec<f64>,
    pub q_fixed: Vec<Option<f64>>,
    /// Pinned dispatch rows.
    pub pi_fixed: Vec<Option<Vec<f64>>>,
    /// Lower bound on `Σ p_i q_i` implied by the partial-charging capacity.
    pub min_served_share: f64,
}

impl<'a> Region<'a> {
    pub fn joint(cfg: &'a ZoneConfig, eps: f64) -> Self {
        let n = cfg.n();
        let lv = cfg.lambda_v();
        let p0 = cfg.p()[0];
        // A few ulps of extra slack keep rounded loads strictly inside.
        let station_slack = eps + 1e-12 * (1.0 + cfg.mu_c());
        let partial_slack = eps + 1e-12 * (1.0 + cfg.partial_capacity());
        let mut q_upper = vec![1.0; n];
        if p0 > 0.0 {
            q_upper[0] = ((cfg.mu_c() - station_slack) / (lv * p0)).min(1.0);
        }
        Self {
            cfg,
            eps,
            q_upper,
            q_fixed: vec![None; n],
            pi_fixed: vec![None; n],
            min_served_share: 1.0 - (cfg.partial_capacity() - partial_slack) / lv,
        }
    }

    /// Dispatch pinned to the identity; only `q` moves.
    pub fn same_class(cfg: &'a ZoneConfig, eps: f64) -> Self {
        let mut region = Self::joint(cfg, eps);
        region.pi_fixed = identity_rows(cfg.n()).into_iter().map(Some).collect();
        region
    }

    pub fn n(&self) -> usize {
        self.cfg.n()
    }

    pub fn q_free(&self, i: usize) -> bool {
        self.q_fixed[i].is_none()
    }

    pub fn row_free(&self, r: usize) -> bool {
        self.pi_fixed[r].is_none() && r > 0
    }

    fn q_lo_hi(&self, i: usize) -> (f64, f64) {
        match self.q_fixed[i] {
            Some(v) => (v, v),
            None => (0.0, self.q_upper[i]),
        }
    }

    /// Checks that some point satisfies both charging constraints.
    pub fn check_feasible(&self) -> Result<()> {
        let cfg = self.cfg;
        let p = cfg.p();
        let lowest_q0 = self.q_lo_hi(0).0;
        let station_ok = if p[0] > 0.0 {
            lowest_q0 <= self.q_upper[0]
        } else {
            cfg.mu_c() >= self.eps
        };
        if !station_ok {
            return Err(Error::NoFeasiblePoint {
                constraint: format!(
                    "full-charging station: load {:.6} cannot stay below mu_c = {} minus slack {}",
                    cfg.lambda_v() * p[0] * lowest_q0,
                    cfg.mu_c(),
                    self.eps
                ),
            });
        }
        let best: f64 = (0..self.n()).map(|i| p[i] * self.q_lo_hi(i).1).sum();
        if best < self.min_served_share {
            let min_flow = cfg.lambda_v() * (1.0 - best);
            return Err(Error::NoFeasiblePoint {
                constraint: format!(
                    "partial-charging points: minimum charging flow {:.6} exceeds capacity {:.6} minus slack {}",
                    min_flow,
                    cfg.partial_capacity(),
                    self.eps
                ),
            });
        }
        Ok(())
    }

    /// True when `d` satisfies every constraint of the region up to `tol`.
    pub fn contains(&self, q: &[f64], pi: &[Vec<f64>], tol: f64) -> bool {
        let p = self.cfg.p();
        let served: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
        if served < self.min_served_share - tol {
            return false;
        }
        for (i, &qi) in q.iter().enumerate() {
            let (lo, hi) = match self.q_fixed[i] {
                Some(v) => (v, v),
                None => (0.0, self.q_upper[i]),
            };
            if qi < lo - tol || qi > hi + tol {
                return false;
            }
        }
        pi.iter().all(|row| {
            row.iter().all(|&x| (-tol..=1.0 + tol).contains(&x))
                && (row.iter().sum::<f64>() - 1.0).abs() <= tol
        })
    }

    /// Moves an arbitrary `(q, Π)` into the region: clamp `q`, project every
    /// free dispatch row onto the simplex, then, if the partial-charging
    /// points are overloaded, shrink every charging flow `1 - q_i` by a common
    /// factor until the load fits.
    pub fn restore(&self, q: &[f64], pi: &[Vec<f64>]) -> Result<DecisionSet> {
        self.check_feasible()?;
        let n = self.n();
        let mut q_new: Vec<f64> = (0..n)
            .map(|i| {
                let (lo, hi) = self.q_lo_hi(i);
                let v = if q[i].is_finite() { q[i] } else { 0.0 };
                v.clamp(lo.min(hi), hi.max(lo)).clamp(0.0, 1.0)
            })
            .collect();
        let pi_new: Vec<Vec<f64>> = (0..n)
            .map(|r| match &self.pi_fixed[r] {
                Some(row) => row.clone(),
                None if r == 0 => vec![1.0],
                None => project_simplex(&pi[r]),
            })
            .collect();

        let p = self.cfg.p();
        let share = |qs: &[f64]| -> f64 { p.iter().zip(qs).map(|(a, b)| a * b).sum() };
        if share(&q_new) < self.min_served_share {
            let base = q_new.clone();
            let scaled = |s: f64| -> Vec<f64> {
                (0..n)
                    .map(|i| {
                        if self.q_free(i) {
                            (1.0 - s * (1.0 - base[i])).min(self.q_upper[i])
                        } else {
                            base[i]
                        }
                    })
                    .collect()
            };
            let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if share(&scaled(mid)) >= self.min_served_share {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            q_new = scaled(lo);
        }
        Ok(DecisionSet::from_parts(q_new, pi_new))
    }
}

/// Euclidean projection onto the probability simplex (sort-based).
pub(crate) fn project_simplex(v: &[f64]) -> Vec<f64> {
    let clean: Vec<f64> = v
        .iter()
        .map(|x| if x.is_finite() { *x } else { 0.0 })
        .collect();
    let mut u = clean.clone();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumsum += uk;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    let mut out: Vec<f64> = clean.iter().map(|x| (x - theta).max(0.0)).collect();
    // Renormalise away the last ulp of drift so the row sums to one.
    let s: f64 = out.iter().sum();
    if s > 0.0 {
        out.iter_mut().for_each(|x| *x /= s);
    } else {
        let k = out.len() - 1;
        out[k] = 1.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pinned() -> ZoneConfig {
        ZoneConfig::new(2, 2.0, vec![0.4, 0.6], vec![0.5, 0.6], 0.5, 2).unwrap()
    }

    #[test]
    fn simplex_projection_basics() {
        assert_eq!(project_simplex(&[0.2, 0.8]), vec![0.2, 0.8]);
        let p = project_simplex(&[2.0, 0.0]);
        assert_eq!(p, vec![1.0, 0.0]);
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        for x in &p {
            assert!((x - 1.0 / 3.0).abs() < 1e-12);
        }
        let p = project_simplex(&[-1.0, -2.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn full_station_cap() {
        let cfg = pinned();
        let region = Region::joint(&cfg, 1e-6);
        assert!((region.q_upper[0] - (0.5 - 1e-6) / 0.8).abs() < 1e-11);
        let d = region
            .restore(&[0.9, 0.2], &[vec![1.0], vec![0.5, 0.5]])
            .unwrap();
        assert!(cfg.lambda_v() * 0.4 * d.q()[0] <= cfg.mu_c() - 1e-6 + 1e-15);
    }

    #[test]
    fn partial_capacity_restoration() {
        // Capacity C n mu_c = 1 * 2 * 0.3 = 0.6; all-partial load would be 2.
        let cfg = ZoneConfig::new(2, 2.0, vec![0.4, 0.6], vec![0.5, 0.6], 0.3, 1).unwrap();
        let region = Region::joint(&cfg, 1e-6);
        let d = region
            .restore(&[0.0, 0.0], &[vec![1.0], vec![0.5, 0.5]])
            .unwrap();
        let load = crate::zone::partial_load(&cfg, d.q());
        assert!(load <= cfg.partial_capacity() - 1e-6 + 1e-12, "load {load}");
        assert!(
            load >= cfg.partial_capacity() - 1e-6 - 1e-9,
            "restoration overshoots: {load}"
        );
        assert!(region.contains(d.q(), d.pi(), 1e-12));
    }

    #[test]
    fn infeasible_partial_capacity_is_reported() {
        let cfg = ZoneConfig::new(2, 2.0, vec![0.4, 0.6], vec![0.5, 0.6], 0.05, 2).unwrap();
        let region = Region::joint(&cfg, 1e-6);
        match region.check_feasible() {
            Err(Error::NoFeasiblePoint { constraint }) => {
                assert!(constraint.starts_with("partial-charging"), "{constraint}")
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }
}
