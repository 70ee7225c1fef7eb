//! Zone parameters, decision variables and the analytical flow/stability
//! relations of the multi-class charging and dispatching model.
//!
//! Indexing is zero-based throughout the Rust API:
//!
//! * `p[i]` and `q[i]` refer to SoC class `i` (`0..n`), class 0 being depleted.
//! * `lambda_c[i]`, rate vectors and `pi[i]` refer to customer/vehicle class
//!   `i + 1`, so `pi[i][j]` is the probability that a service-ready class
//!   `i + 1` vehicle serves sub-class `j + 1` (`j <= i`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used to turn the strict stability inequalities into `lhs <= rhs - eps`.
pub const DEFAULT_STRICT_EPS: f64 = 1e-6;

/// Tolerance on probability vectors and dispatch row sums.
pub const PROB_TOL: f64 = 1e-9;

/// Exogenous parameters of one service zone. Rates are per minute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawZoneConfig", into = "RawZoneConfig")]
pub struct ZoneConfig {
    n: usize,
    lambda_v: f64,
    p: Vec<f64>,
    lambda_c: Vec<f64>,
    mu_c: f64,
    c_points: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawZoneConfig {
    n: usize,
    lambda_v: f64,
    p: Vec<f64>,
    lambda_c: Vec<f64>,
    mu_c: f64,
    c_points: u32,
}

impl TryFrom<RawZoneConfig> for ZoneConfig {
    type Error = Error;

    fn try_from(raw: RawZoneConfig) -> Result<Self> {
        ZoneConfig::new(
            raw.n,
            raw.lambda_v,
            raw.p,
            raw.lambda_c,
            raw.mu_c,
            raw.c_points,
        )
    }
}

impl From<ZoneConfig> for RawZoneConfig {
    fn from(cfg: ZoneConfig) -> Self {
        RawZoneConfig {
            n: cfg.n,
            lambda_v: cfg.lambda_v,
            p: cfg.p,
            lambda_c: cfg.lambda_c,
            mu_c: cfg.mu_c,
            c_points: cfg.c_points,
        }
    }
}

fn positive_finite(field: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            field,
            format!("must be a positive finite rate, got {x}"),
        ))
    }
}

impl ZoneConfig {
    /// Builds a validated zone. `p` has one entry per SoC class `0..n`,
    /// `lambda_c` one entry per customer class `1..=n`.
    pub fn new(
        n: usize,
        lambda_v: f64,
        p: Vec<f64>,
        lambda_c: Vec<f64>,
        mu_c: f64,
        c_points: u32,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(
                "n",
                format!("need at least 2 classes, got {n}"),
            ));
        }
        positive_finite("lambda_v", lambda_v)?;
        positive_finite("mu_c", mu_c)?;
        if c_points == 0 {
            return Err(Error::invalid(
                "c_points",
                "need at least one charging point",
            ));
        }
        if p.len() != n {
            return Err(Error::invalid(
                "p",
                format!("expected {n} entries, got {}", p.len()),
            ));
        }
        if let Some(bad) = p.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::invalid("p", format!("entry {bad} outside [0, 1]")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::invalid(
                "p",
                format!("entries sum to {total}, expected 1"),
            ));
        }
        if lambda_c.len() != n {
            return Err(Error::invalid(
                "lambda_c",
                format!("expected {n} entries, got {}", lambda_c.len()),
            ));
        }
        if let Some((i, bad)) = lambda_c
            .iter()
            .enumerate()
            .find(|(_, &x)| !(x.is_finite() && x > 0.0))
        {
            return Err(Error::invalid(
                "lambda_c",
                format!(
                    "class {} has rate {bad}; every class needs positive demand",
                    i + 1
                ),
            ));
        }
        Ok(Self {
            n,
            lambda_v,
            p,
            lambda_c,
            mu_c,
            c_points,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda_v(&self) -> f64 {
        self.lambda_v
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn lambda_c(&self) -> &[f64] {
        &self.lambda_c
    }

    pub fn mu_c(&self) -> f64 {
        self.mu_c
    }

    pub fn c_points(&self) -> u32 {
        self.c_points
    }

    /// Total customer demand over all classes.
    pub fn total_demand(&self) -> f64 {
        self.lambda_c.iter().sum()
    }

    /// Service capacity of the partial-charging points, `C * n * mu_c`.
    pub fn partial_capacity(&self) -> f64 {
        f64::from(self.c_points) * self.n as f64 * self.mu_c
    }

    /// Copy of this zone with a different demand vector.
    pub fn with_lambda_c(&self, lambda_c: Vec<f64>) -> Result<Self> {
        Self::new(
            self.n,
            self.lambda_v,
            self.p.clone(),
            lambda_c,
            self.mu_c,
            self.c_points,
        )
    }

    /// Copy of this zone with a different number of partial-charging points.
    pub fn with_c_points(&self, c_points: u32) -> Result<Self> {
        Self::new(
            self.n,
            self.lambda_v,
            self.p.clone(),
            self.lambda_c.clone(),
            self.mu_c,
            c_points,
        )
    }
}

/// Charging vector `q` and lower-triangular dispatch matrix `Π`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDecisionSet", into = "RawDecisionSet")]
pub struct DecisionSet {
    q: Vec<f64>,
    pi: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDecisionSet {
    q: Vec<f64>,
    pi: Vec<Vec<f64>>,
}

impl TryFrom<RawDecisionSet> for DecisionSet {
    type Error = Error;

    fn try_from(raw: RawDecisionSet) -> Result<Self> {
        DecisionSet::new(raw.q, raw.pi)
    }
}

impl From<DecisionSet> for RawDecisionSet {
    fn from(d: DecisionSet) -> Self {
        RawDecisionSet { q: d.q, pi: d.pi }
    }
}

impl DecisionSet {
    /// Validated constructor. Row `i` of `pi` must hold exactly `i + 1`
    /// probabilities summing to one.
    pub fn new(q: Vec<f64>, pi: Vec<Vec<f64>>) -> Result<Self> {
        let n = q.len();
        if pi.len() != n {
            return Err(Error::DimensionMismatch {
                what: "pi rows",
                expected: n,
                found: pi.len(),
            });
        }
        if let Some(bad) = q.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::invalid("q", format!("entry {bad} outside [0, 1]")));
        }
        for (i, row) in pi.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(Error::DimensionMismatch {
                    what: "pi row length",
                    expected: i + 1,
                    found: row.len(),
                });
            }
            if let Some(bad) = row.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
                return Err(Error::invalid(
                    "pi",
                    format!("row {} entry {bad} outside [0, 1]", i + 1),
                ));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > PROB_TOL {
                return Err(Error::invalid(
                    "pi",
                    format!("row {} sums to {s}, expected 1", i + 1),
                ));
            }
        }
        Ok(Self { q, pi })
    }

    /// Skips validation; callers guarantee the invariants up to rounding.
    pub(crate) fn from_parts(q: Vec<f64>, pi: Vec<Vec<f64>>) -> Self {
        Self { q, pi }
    }

    /// Same-class dispatch (`Π = I`) with the given charging vector.
    pub fn same_class(q: Vec<f64>) -> Result<Self> {
        let n = q.len();
        Self::new(q, identity_rows(n))
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn pi(&self) -> &[Vec<f64>] {
        &self.pi
    }

    pub(crate) fn check_dims(&self, cfg: &ZoneConfig) -> Result<()> {
        if self.n() != cfg.n() {
            return Err(Error::DimensionMismatch {
                what: "decision classes",
                expected: cfg.n(),
                found: self.n(),
            });
        }
        Ok(())
    }
}

pub(crate) fn identity_rows(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut row = vec![0.0; i + 1];
            row[i] = 1.0;
            row
        })
        .collect()
}

/// Derived per-class rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateProfile {
    /// Service-ready vehicle rate per class.
    pub lambda_v_class: Vec<f64>,
    /// Rate of vehicles dispatched to each customer class.
    pub lambda_vs: Vec<f64>,
    /// `lambda_vs - lambda_c` per class.
    pub margins: Vec<f64>,
}

/// Outcome of the customer-queue and charging-queue stability checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub per_class_stable: Vec<bool>,
    pub response_limit_met: Vec<bool>,
    pub partial_charging_stable: bool,
    pub full_station_stable: bool,
    /// Largest admissible response-rate margin `(lambda_v - Σ lambda_c) / n`.
    pub fleet_rate_bound: f64,
    pub margins: Vec<f64>,
    /// Vehicle flow into the partial-charging points.
    pub partial_charging_load: f64,
    /// Vehicle flow into the full-charging station.
    pub full_station_load: f64,
}

impl StabilityReport {
    /// Every customer queue and both charging queues are stable.
    pub fn is_stable(&self) -> bool {
        self.per_class_stable.iter().all(|&b| b)
            && self.partial_charging_stable
            && self.full_station_stable
    }

    /// Both charging queues are stable.
    pub fn charging_stable(&self) -> bool {
        self.partial_charging_stable && self.full_station_stable
    }
}

/// Per-class expected response times and the worst class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseTimes {
    pub per_class: Vec<f64>,
    pub max: f64,
    /// Zero-based index of the class with the largest response time
    /// (lowest index on ties).
    pub argmax: usize,
}

// Unchecked kernels shared with the optimizer and simulator.

/// Rate of vehicles becoming ready in class `r + 1`. Class `r + 1` is fed by
/// SoC class `r` vehicles that charge one level and by SoC class `(r + 1) % n`
/// vehicles that serve as they are (for the top class this is the depleted
/// class after a full charge).
#[inline]
pub(crate) fn class_rates_into(cfg: &ZoneConfig, q: &[f64], out: &mut [f64]) {
    let n = cfg.n;
    let lv = cfg.lambda_v;
    for r in 0..n {
        let s = (r + 1) % n;
        out[r] = lv * (cfg.p[r] * (1.0 - q[r]) + cfg.p[s] * q[s]);
    }
}

#[inline]
pub(crate) fn service_rates_into(class_rates: &[f64], pi: &[Vec<f64>], out: &mut [f64]) {
    let n = class_rates.len();
    for (i, slot) in out.iter_mut().enumerate().take(n) {
        *slot = (i..n).map(|k| class_rates[k] * pi[k][i]).sum();
    }
}

pub(crate) fn margins_raw(cfg: &ZoneConfig, q: &[f64], pi: &[Vec<f64>]) -> Vec<f64> {
    let n = cfg.n;
    let mut rates = vec![0.0; n];
    let mut vs = vec![0.0; n];
    class_rates_into(cfg, q, &mut rates);
    service_rates_into(&rates, pi, &mut vs);
    vs.iter().zip(&cfg.lambda_c).map(|(a, b)| a - b).collect()
}

pub(crate) fn min_margin_raw(cfg: &ZoneConfig, q: &[f64], pi: &[Vec<f64>]) -> f64 {
    margins_raw(cfg, q, pi)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// Vehicle flow sent to the partial-charging points.
pub(crate) fn partial_load(cfg: &ZoneConfig, q: &[f64]) -> f64 {
    cfg.lambda_v * cfg.p.iter().zip(q).map(|(p, q)| p * (1.0 - q)).sum::<f64>()
}

/// Vehicle flow sent to the full-charging station.
pub(crate) fn full_load(cfg: &ZoneConfig, q: &[f64]) -> f64 {
    cfg.lambda_v * cfg.p[0] * q[0]
}

/// Service-ready vehicle rate per class.
pub fn vehicle_class_rates(cfg: &ZoneConfig, d: &DecisionSet) -> Result<Vec<f64>> {
    d.check_dims(cfg)?;
    let mut out = vec![0.0; cfg.n];
    class_rates_into(cfg, &d.q, &mut out);
    Ok(out)
}

/// Effective dispatch rate to every customer class plus the margins over demand.
pub fn effective_service_rates(cfg: &ZoneConfig, d: &DecisionSet) -> Result<RateProfile> {
    let lambda_v_class = vehicle_class_rates(cfg, d)?;
    let mut lambda_vs = vec![0.0; cfg.n];
    service_rates_into(&lambda_v_class, &d.pi, &mut lambda_vs);
    let margins = lambda_vs
        .iter()
        .zip(&cfg.lambda_c)
        .map(|(vs, c)| vs - c)
        .collect();
    Ok(RateProfile {
        lambda_v_class,
        lambda_vs,
        margins,
    })
}

/// Stability checks with the default strict-inequality slack.
pub fn check_stability(cfg: &ZoneConfig, d: &DecisionSet, r: f64) -> Result<StabilityReport> {
    check_stability_eps(cfg, d, r, DEFAULT_STRICT_EPS)
}

/// Stability checks; strict inequalities hold when `lhs <= rhs - eps`.
pub fn check_stability_eps(
    cfg: &ZoneConfig,
    d: &DecisionSet,
    r: f64,
    eps: f64,
) -> Result<StabilityReport> {
    if !(r >= 0.0) {
        return Err(Error::invalid(
            "r",
            format!("response-rate target must be >= 0, got {r}"),
        ));
    }
    if !(eps >= 0.0) {
        return Err(Error::invalid(
            "eps",
            format!("slack must be >= 0, got {eps}"),
        ));
    }
    let rates = effective_service_rates(cfg, d)?;
    let partial = partial_load(cfg, &d.q);
    let full = full_load(cfg, &d.q);
    Ok(StabilityReport {
        per_class_stable: rates
            .lambda_vs
            .iter()
            .zip(&cfg.lambda_c)
            .map(|(vs, c)| *c <= vs - eps)
            .collect(),
        response_limit_met: rates.margins.iter().map(|m| *m >= r).collect(),
        partial_charging_stable: partial <= cfg.partial_capacity() - eps,
        full_station_stable: full <= cfg.mu_c - eps,
        fleet_rate_bound: fleet_rate_bound(cfg),
        margins: rates.margins,
        partial_charging_load: partial,
        full_station_load: full,
    })
}

/// Largest response-rate margin any decision can achieve,
/// `(lambda_v - Σ lambda_c) / n`. Negative when demand exceeds supply.
pub fn fleet_rate_bound(cfg: &ZoneConfig) -> f64 {
    (cfg.lambda_v - cfg.total_demand()) / cfg.n as f64
}

/// Expected M/M/1 response time `1 / (lambda_vs - lambda_c)` per class.
pub fn analytic_response_times(cfg: &ZoneConfig, d: &DecisionSet) -> Result<ResponseTimes> {
    let rates = effective_service_rates(cfg, d)?;
    if let Some((i, &m)) = rates.margins.iter().enumerate().find(|(_, &m)| !(m > 0.0)) {
        return Err(Error::Unstable {
            class: i + 1,
            margin: m,
        });
    }
    let per_class: Vec<f64> = rates.margins.iter().map(|m| 1.0 / m).collect();
    let (argmax, max) = argmax_first(&per_class);
    Ok(ResponseTimes {
        per_class,
        max,
        argmax,
    })
}

/// Class with the smallest margin (zero-based, lowest index on ties). When
/// every margin is positive this is also the class with the largest
/// response time.
pub fn binding_class(cfg: &ZoneConfig, d: &DecisionSet) -> Result<usize> {
    Ok(argmin_first(&effective_service_rates(cfg, d)?.margins).0)
}

/// Index and value of the maximum, lowest index on ties.
pub(crate) fn argmax_first(xs: &[f64]) -> (usize, f64) {
    let mut best = (0, xs[0]);
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}

/// Index and value of the minimum, lowest index on ties.
pub(crate) fn argmin_first(xs: &[f64]) -> (usize, f64) {
    let mut best = (0, xs[0]);
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x < best.1 {
            best = (i, x);
        }
    }
    best
}

/// Normalised SoC distribution `p_i ∝ (n - i)` for `i = 0..n`.
pub fn decreasing_soc(n: usize) -> Vec<f64> {
    let total = (n * (n + 1) / 2) as f64;
    (0..n).map(|i| (n - i) as f64 / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn zone(n: usize, lv: f64, p: Vec<f64>, lc: Vec<f64>, mu: f64, c: u32) -> ZoneConfig {
        ZoneConfig::new(n, lv, p, lc, mu, c).unwrap()
    }

    #[test]
    fn class_rates_trivial_all_partial() {
        let cfg = zone(2, 1.0, vec![0.5, 0.5], vec![0.2, 0.2], 0.5, 2);
        let d = DecisionSet::same_class(vec![0.0, 0.0]).unwrap();
        assert_eq!(vehicle_class_rates(&cfg, &d).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn class_rates_three_classes() {
        // Hand substitution: 8*(0.2*0.5 + 0.5*0.4), 8*(0.5*0.6 + 0.3*0.6), 8*(0.3*0.4 + 0.2*0.5).
        let cfg = zone(3, 8.0, vec![0.2, 0.5, 0.3], vec![1.0, 1.0, 1.0], 0.5, 2);
        let d = DecisionSet::same_class(vec![0.5, 0.4, 0.6]).unwrap();
        let r = vehicle_class_rates(&cfg, &d).unwrap();
        for (got, want) in r.iter().zip([2.4, 3.84, 1.76]) {
            assert!(close(*got, want, 1e-12), "{got} vs {want}");
        }
        assert!(close(r.iter().sum(), 8.0, 1e-12));
    }

    #[test]
    fn service_rates_with_subclass_dispatch() {
        let cfg = zone(2, 1.0, vec![0.5, 0.5], vec![0.5, 0.6], 0.5, 2);
        let d = DecisionSet::new(vec![0.0, 0.0], vec![vec![1.0], vec![0.3, 0.7]]).unwrap();
        let rp = effective_service_rates(&cfg, &d).unwrap();
        assert!(close(rp.lambda_vs[0], 0.65, 1e-12));
        assert!(close(rp.lambda_vs[1], 0.35, 1e-12));
        assert!(close(rp.margins[0], 0.15, 1e-12));
        assert!(close(rp.margins[1], -0.25, 1e-12));
    }

    #[test]
    fn identity_dispatch_passes_rates_through() {
        let cfg = zone(3, 8.0, vec![0.2, 0.5, 0.3], vec![1.0, 1.0, 1.0], 0.5, 2);
        let d = DecisionSet::same_class(vec![0.5, 0.4, 0.6]).unwrap();
        let rp = effective_service_rates(&cfg, &d).unwrap();
        assert_eq!(rp.lambda_v_class, rp.lambda_vs);
    }

    #[test]
    fn stability_with_fleet_constants() {
        let n = 7;
        let cfg = zone(n, 8.0, decreasing_soc(n), vec![0.5; n], 0.033, 40);
        let d = DecisionSet::same_class(vec![0.0; n]).unwrap();
        let rep = check_stability(&cfg, &d, 0.0).unwrap();
        assert!(rep.partial_charging_stable);
        assert!(close(cfg.partial_capacity(), 9.24, 1e-12));
        assert!(close(rep.partial_charging_load, 8.0, 1e-12));
    }

    #[test]
    fn full_station_boundary_is_unstable() {
        // lambda_v * p0 * q0 = 2 * 0.5 * 0.25 = 0.25 = mu_c.
        let cfg = zone(2, 2.0, vec![0.5, 0.5], vec![0.1, 0.1], 0.25, 5);
        let d = DecisionSet::same_class(vec![0.25, 0.5]).unwrap();
        let rep = check_stability(&cfg, &d, 0.0).unwrap();
        assert!(!rep.full_station_stable);
        assert!(!rep.is_stable());
    }

    #[test]
    fn response_limits_follow_margins() {
        let cfg = zone(2, 2.0, vec![0.4, 0.6], vec![0.5, 0.6], 0.5, 2);
        let d = DecisionSet::same_class(vec![0.5, 11.0 / 24.0]).unwrap();
        let rep = check_stability(&cfg, &d, 0.3).unwrap();
        assert!(rep.response_limit_met.iter().all(|&b| b));
        let rep = check_stability(&cfg, &d, 0.46).unwrap();
        assert!(rep.response_limit_met.iter().all(|&b| !b));
        assert!(check_stability(&cfg, &d, -0.1).is_err());
    }

    #[test]
    fn fleet_bound_cases() {
        let n = 7;
        let lc: Vec<f64> = vec![7.3 / 7.0; 7];
        let cfg = zone(n, 8.0, decreasing_soc(n), lc, 0.033, 40);
        assert!(close(fleet_rate_bound(&cfg), 0.1, 1e-12));
        let cfg = zone(2, 1.0, vec![0.5, 0.5], vec![0.5, 0.5], 0.1, 1);
        assert_eq!(fleet_rate_bound(&cfg), 0.0);
        let cfg = zone(2, 1.0, vec![0.5, 0.5], vec![0.6, 0.5], 0.1, 1);
        assert!(fleet_rate_bound(&cfg) < 0.0);
    }

    #[test]
    fn response_times_and_ties() {
        let cfg = zone(2, 2.0, vec![0.4, 0.6], vec![0.5, 0.6], 0.5, 2);
        let d = DecisionSet::same_class(vec![0.5, 11.0 / 24.0]).unwrap();
        let rt = analytic_response_times(&cfg, &d).unwrap();
        assert!(close(rt.per_class[0], 1.0 / 0.45, 1e-9));
        assert!(close(rt.max, 2.2222222, 1e-6));
        assert_eq!(rt.argmax, 0);
    }

    #[test]
    fn zero_margin_is_an_error() {
        // lambda_vs = (1, 1), demand (1, 0.5): class 1 sits exactly at zero margin.
        let cfg = zone(2, 2.0, vec![0.5, 0.5], vec![1.0, 0.5], 0.5, 2);
        let d = DecisionSet::same_class(vec![0.0, 0.0]).unwrap();
        match analytic_response_times(&cfg, &d) {
            Err(Error::Unstable { class, .. }) => assert_eq!(class, 1),
            other => panic!("expected instability, got {other:?}"),
        }
    }

    #[test]
    fn config_validation_names_fields() {
        let e = ZoneConfig::new(2, 1.0, vec![0.5, 0.6], vec![0.1, 0.1], 0.1, 1).unwrap_err();
        assert!(e.to_string().contains("`p`"));
        let e = ZoneConfig::new(2, 1.0, vec![0.5, 0.5], vec![0.1, 0.0], 0.1, 1).unwrap_err();
        assert!(e.to_string().contains("`lambda_c`"));
        let e = ZoneConfig::new(1, 1.0, vec![1.0], vec![0.1], 0.1, 1).unwrap_err();
        assert!(e.to_string().contains("`n`"));
        assert!(ZoneConfig::new(2, 1.0, vec![0.5, 0.5], vec![0.1, 0.1], 0.1, 0).is_err());
    }

    #[test]
    fn decision_validation() {
        assert!(DecisionSet::new(vec![0.0, 0.0], vec![vec![1.0], vec![0.5, 0.4]]).is_err());
        assert!(DecisionSet::new(vec![0.0, 1.2], vec![vec![1.0], vec![0.5, 0.5]]).is_err());
        assert!(DecisionSet::new(vec![0.0, 0.0], vec![vec![1.0], vec![1.0]]).is_err());
        let cfg = zone(3, 8.0, vec![0.2, 0.5, 0.3], vec![1.0, 1.0, 1.0], 0.5, 2);
        let d = DecisionSet::same_class(vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            vehicle_class_rates(&cfg, &d),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn decision_json_round_trip_validates() {
        let d: DecisionSet =
            serde_json::from_str(r#"{"q":[0.1,0.2],"pi":[[1.0],[0.25,0.75]]}"#).unwrap();
        assert_eq!(d.pi()[1], vec![0.25, 0.75]);
        let bad = serde_json::from_str::<DecisionSet>(r#"{"q":[0.1,0.2],"pi":[[1.0],[0.25,0.7]]}"#);
        assert!(bad.is_err());
    }
}
