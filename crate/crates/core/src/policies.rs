//! Baseline charging/dispatch policies and the two optimised ones.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{solve, solve_same_class, SolverConfig};
use crate::zone::{identity_rows, DecisionSet, ZoneConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    /// Jointly optimised charging and dispatch.
    #[serde(rename = "optimal")]
    OptimalJoint,
    /// Optimised charging with same-class dispatch.
    #[serde(rename = "opt-charge-same-class")]
    OptimizedChargeSameClass,
    #[serde(rename = "partial-same-class")]
    AlwaysPartialSameClass,
    #[serde(rename = "split-same-class")]
    EqualSplitSameClass,
    #[serde(rename = "partial-proportional")]
    AlwaysPartialProportional,
    #[serde(rename = "split-proportional")]
    EqualSplitProportional,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::OptimalJoint,
        PolicyKind::OptimizedChargeSameClass,
        PolicyKind::AlwaysPartialSameClass,
        PolicyKind::EqualSplitSameClass,
        PolicyKind::AlwaysPartialProportional,
        PolicyKind::EqualSplitProportional,
    ];

    /// The four policies that need no optimisation.
    pub const FIXED: [PolicyKind; 4] = [
        PolicyKind::AlwaysPartialSameClass,
        PolicyKind::EqualSplitSameClass,
        PolicyKind::AlwaysPartialProportional,
        PolicyKind::EqualSplitProportional,
    ];

    /// Stable identifier used on the command line and in CSV output.
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::OptimalJoint => "optimal",
            PolicyKind::OptimizedChargeSameClass => "opt-charge-same-class",
            PolicyKind::AlwaysPartialSameClass => "partial-same-class",
            PolicyKind::EqualSplitSameClass => "split-same-class",
            PolicyKind::AlwaysPartialProportional => "partial-proportional",
            PolicyKind::EqualSplitProportional => "split-proportional",
        }
    }

    pub fn is_optimized(self) -> bool {
        matches!(
            self,
            PolicyKind::OptimalJoint | PolicyKind::OptimizedChargeSameClass
        )
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = PolicyKind::ALL.iter().map(|k| k.name()).collect();
                Error::invalid(
                    "policy",
                    format!("unknown policy `{s}`, expected one of {}", names.join(", ")),
                )
            })
    }
}

/// Dispatch rows proportional to the demand of every reachable sub-class:
/// `Π_ij = λ_c_j / Σ_{k<=i} λ_c_k`.
pub fn proportional_rows(lambda_c: &[f64]) -> Vec<Vec<f64>> {
    let mut rows = Vec::with_capacity(lambda_c.len());
    let mut acc = 0.0;
    for i in 0..lambda_c.len() {
        acc += lambda_c[i];
        rows.push(lambda_c[..=i].iter().map(|c| c / acc).collect());
    }
    rows
}

/// Builds a non-optimised policy; `None` for the optimised kinds.
pub fn fixed_policy(kind: PolicyKind, cfg: &ZoneConfig) -> Option<DecisionSet> {
    let n = cfg.n();
    let (q, pi) = match kind {
        PolicyKind::AlwaysPartialSameClass => (vec![0.0; n], identity_rows(n)),
        PolicyKind::EqualSplitSameClass => (vec![0.5; n], identity_rows(n)),
        PolicyKind::AlwaysPartialProportional => (vec![0.0; n], proportional_rows(cfg.lambda_c())),
        PolicyKind::EqualSplitProportional => (vec![0.5; n], proportional_rows(cfg.lambda_c())),
        PolicyKind::OptimalJoint | PolicyKind::OptimizedChargeSameClass => return None,
    };
    Some(DecisionSet::from_parts(q, pi))
}

pub fn build_policy(kind: PolicyKind, cfg: &ZoneConfig, sc: &SolverConfig) -> Result<DecisionSet> {
    match kind {
        PolicyKind::OptimalJoint => Ok(solve(cfg, sc)?.decisions),
        PolicyKind::OptimizedChargeSameClass => Ok(solve_same_class(cfg, sc)?.decisions),
        _ => Ok(fixed_policy(kind, cfg).expect("fixed policy")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg2() -> ZoneConfig {
        ZoneConfig::new(2, 2.0, vec![0.4, 0.6], vec![0.5, 0.6], 0.5, 2).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.name().parse::<PolicyKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert!("greedy".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn equal_split_same_class() {
        let d = build_policy(
            PolicyKind::EqualSplitSameClass,
            &cfg2(),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(d.q(), &[0.5, 0.5]);
        assert_eq!(d.pi(), &identity_rows(2)[..]);
    }

    #[test]
    fn proportional_dispatch_two_classes() {
        let d = fixed_policy(PolicyKind::AlwaysPartialProportional, &cfg2()).unwrap();
        assert_eq!(d.pi()[0], vec![1.0]);
        assert!((d.pi()[1][0] - 0.5 / 1.1).abs() < 1e-12);
        assert!((d.pi()[1][1] - 0.6 / 1.1).abs() < 1e-12);
        assert!((d.pi()[1][0] - 0.4545).abs() < 1e-4);
        assert_eq!(d.q(), &[0.0, 0.0]);
    }

    #[test]
    fn every_fixed_policy_is_a_valid_decision_set() {
        let cfg = ZoneConfig::new(
            4,
            8.0,
            vec![0.4, 0.3, 0.2, 0.1],
            vec![1.0, 2.0, 0.5, 0.25],
            0.033,
            40,
        )
        .unwrap();
        for k in PolicyKind::FIXED {
            let d = fixed_policy(k, &cfg).unwrap();
            DecisionSet::new(d.q().to_vec(), d.pi().to_vec()).unwrap();
        }
    }
}
