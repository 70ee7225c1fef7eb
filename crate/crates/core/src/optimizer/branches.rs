//! Closed-form active-set candidates.
//!
//! An [`ActiveSet`] names, for `R`, `q_0`, every other `q_i` and every
//! dispatch row, which constraint is assumed binding. Bound branches pin the
//! variable to the constraint's value; interior branches leave it free and
//! are resolved by the trust-region ascent restricted to the hypothesis.
//! Every candidate is then scored and screened through fitted KKT residuals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ascent::ascend;
use super::kkt::{certify, KktResiduals};
use super::region::Region;
use super::SolverConfig;
use crate::error::{Error, Result};
use crate::zone::{fleet_rate_bound, identity_rows, min_margin_raw, DecisionSet, ZoneConfig};

/// Largest zone enumerated when no explicit hypotheses are supplied.
pub const MAX_ENUMERATED_CLASSES: usize = 4;

pub const DEFAULT_HYPOTHESIS_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RBranch {
    /// Upper bound active: `R = (λ_v - Σλ_c) / n`.
    Bound,
    /// Positivity active: `R = eps`.
    Epsilon,
    /// Neither bound active: `R` is the resulting minimum margin.
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Q0Branch {
    Zero,
    One,
    /// Full-station constraint active: `λ_v p_0 q_0 = μ_c - eps`.
    StationCap,
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QBranch {
    Zero,
    One,
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PiRowBranch {
    /// `Π_ii = 1`, every other entry of the row at its lower bound.
    SameClass,
    Free,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveSet {
    pub r: RBranch,
    pub q0: Q0Branch,
    /// Branches for `q_1 .. q_{n-1}`.
    pub q: Vec<QBranch>,
    /// Branches for dispatch rows `2..=n`; the first row has a single entry.
    pub rows: Vec<PiRowBranch>,
}

impl ActiveSet {
    /// Nothing assumed binding except the given `R` branch.
    pub fn interior(n: usize, r: RBranch) -> Self {
        Self {
            r,
            q0: Q0Branch::Interior,
            q: vec![QBranch::Interior; n.saturating_sub(1)],
            rows: vec![PiRowBranch::Free; n.saturating_sub(1)],
        }
    }

    pub fn with_q0(mut self, q0: Q0Branch) -> Self {
        self.q0 = q0;
        self
    }

    fn check_dims(&self, n: usize) -> Result<()> {
        if self.q.len() != n - 1 {
            return Err(Error::DimensionMismatch {
                what: "hypothesis q branches",
                expected: n - 1,
                found: self.q.len(),
            });
        }
        if self.rows.len() != n - 1 {
            return Err(Error::DimensionMismatch {
                what: "hypothesis dispatch-row branches",
                expected: n - 1,
                found: self.rows.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Hypotheses {
    /// Every combination of branches, refused above `cap` hypotheses or
    /// beyond [`MAX_ENUMERATED_CLASSES`] classes.
    Enumerate {
        cap: usize,
    },
    Explicit(Vec<ActiveSet>),
}

impl Default for Hypotheses {
    fn default() -> Self {
        Hypotheses::Enumerate {
            cap: DEFAULT_HYPOTHESIS_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchCandidate {
    pub hypothesis: ActiveSet,
    pub decisions: DecisionSet,
    /// `R` as set by the hypothesis.
    pub r: f64,
    /// Minimum margin actually achieved by `decisions`.
    pub objective: f64,
    /// Charging constraints hold and every margin reaches `r`.
    pub feasible: bool,
    pub residuals: KktResiduals,
    pub certified: bool,
    /// Another feasible candidate reaches a strictly larger `r`.
    pub dominated: bool,
}

fn hypothesis_count(n: usize) -> usize {
    // R: 3 branches, q_0: 4, other q: 3 each, free rows: 2 each.
    let mut size: usize = 12;
    for _ in 1..n {
        size = size.saturating_mul(6);
    }
    size
}

fn enumerate(n: usize) -> Vec<ActiveSet> {
    let mut out = Vec::with_capacity(hypothesis_count(n));
    let q_opts = [QBranch::Zero, QBranch::One, QBranch::Interior];
    let row_opts = [PiRowBranch::SameClass, PiRowBranch::Free];
    let tail = n - 1;
    let combos = 6usize.pow(tail as u32);
    for r in [RBranch::Bound, RBranch::Epsilon, RBranch::Stationary] {
        for q0 in [
            Q0Branch::Zero,
            Q0Branch::One,
            Q0Branch::StationCap,
            Q0Branch::Interior,
        ] {
            for mut code in 0..combos {
                let mut q = Vec::with_capacity(tail);
                let mut rows = Vec::with_capacity(tail);
                for _ in 0..tail {
                    q.push(q_opts[code % 3]);
                    code /= 3;
                    rows.push(row_opts[code % 2]);
                    code /= 2;
                }
                out.push(ActiveSet { r, q0, q, rows });
            }
        }
    }
    out
}

/// Generates and screens one candidate per hypothesis.
pub fn closed_form_branch_candidates(
    cfg: &ZoneConfig,
    hypotheses: &Hypotheses,
    sc: &SolverConfig,
) -> Result<Vec<BranchCandidate>> {
    sc.validate()?;
    let n = cfg.n();
    let list = match hypotheses {
        Hypotheses::Explicit(list) => {
            for h in list {
                h.check_dims(n)?;
            }
            list.clone()
        }
        Hypotheses::Enumerate { cap } => {
            let size = hypothesis_count(n);
            if n > MAX_ENUMERATED_CLASSES || size > *cap {
                return Err(Error::EnumerationTooLarge { size, cap: *cap });
            }
            enumerate(n)
        }
    };

    let mut out: Vec<BranchCandidate> = list
        .into_par_iter()
        .map(|h| candidate(cfg, h, sc))
        .collect::<Result<_>>()?;

    let best_feasible = out
        .iter()
        .filter(|c| c.feasible)
        .map(|c| c.r)
        .fold(f64::NEG_INFINITY, f64::max);
    for c in &mut out {
        c.dominated = c.feasible && c.r < best_feasible;
    }
    Ok(out)
}

fn candidate(cfg: &ZoneConfig, h: ActiveSet, sc: &SolverConfig) -> Result<BranchCandidate> {
    let n = cfg.n();
    let eps = sc.eps_strict;
    let mut region = Region::joint(cfg, eps);
    let p0 = cfg.p()[0];
    region.q_fixed[0] = match h.q0 {
        Q0Branch::Zero => Some(0.0),
        Q0Branch::One => Some(1.0),
        Q0Branch::StationCap => Some(if p0 > 0.0 {
            ((cfg.mu_c() - eps) / (cfg.lambda_v() * p0)).clamp(0.0, 1.0)
        } else {
            1.0
        }),
        Q0Branch::Interior => None,
    };
    for (i, b) in h.q.iter().enumerate() {
        region.q_fixed[i + 1] = match b {
            QBranch::Zero => Some(0.0),
            QBranch::One => Some(1.0),
            QBranch::Interior => None,
        };
    }
    let same = identity_rows(n);
    for (i, b) in h.rows.iter().enumerate() {
        if *b == PiRowBranch::SameClass {
            region.pi_fixed[i + 1] = Some(same[i + 1].clone());
        }
    }

    // Free coordinates start mid-range and rows start uniform.
    let q_start: Vec<f64> = (0..n)
        .map(|i| region.q_fixed[i].unwrap_or(0.5 * region.q_upper[i].max(0.0)))
        .collect();
    let pi_start: Vec<Vec<f64>> = (0..n)
        .map(|i| match &region.pi_fixed[i] {
            Some(row) => row.clone(),
            None => vec![1.0 / (i + 1) as f64; i + 1],
        })
        .collect();

    let decisions = match region.restore(&q_start, &pi_start) {
        Ok(start) => ascend(&region, start, sc.max_iters, sc.step_tol).point,
        Err(Error::NoFeasiblePoint { .. }) => DecisionSet::from_parts(q_start, pi_start),
        Err(e) => return Err(e),
    };

    let objective = min_margin_raw(cfg, decisions.q(), decisions.pi());
    let r = match h.r {
        RBranch::Bound => fleet_rate_bound(cfg),
        RBranch::Epsilon => eps,
        RBranch::Stationary => objective,
    };
    let full_region = Region::joint(cfg, eps);
    let feasible = full_region.contains(decisions.q(), decisions.pi(), 1e-12)
        && objective >= r - 1e-9
        && r >= eps;
    let cert = certify(cfg, decisions.q(), decisions.pi(), r, eps)?;
    Ok(BranchCandidate {
        hypothesis: h,
        certified: feasible && cert.certified,
        residuals: cert.residuals,
        decisions,
        r,
        objective,
        feasible,
        dominated: false,
    })
}
