//! JSON experiment specs, policy sweeps and CSV output.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{solve, solve_same_class, SolverConfig};
use crate::policies::{fixed_policy, PolicyKind};
use crate::simulator::{simulate, SimConfig};
use crate::zone::{
    check_stability_eps, decreasing_soc, fleet_rate_bound, min_margin_raw, DecisionSet, ZoneConfig,
};

pub const CSV_HEADER: [&str; 7] = [
    "sweep_value",
    "policy",
    "r_star",
    "max_response_min",
    "feasible",
    "bound_gap",
    "error",
];

pub const SIM_CSV_COLUMNS: [&str; 2] = ["sim_max_response_min", "sim_ci95"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Sweep the total customer demand `Σλ_c`.
    LoadSweep,
    /// Sweep the number of partial-charging points `C`.
    ChargingSweep,
    PolicyCompare,
    SingleSolve,
    SingleSim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedShape {
    Decreasing,
    Uniform,
}

/// SoC distribution: explicit probabilities or a named shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SocSpec {
    Values(Vec<f64>),
    Shape(NamedShape),
}

/// How a demand total is spread over the classes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaShape {
    /// `λ_c_i ∝ n + 1 - i` for classes `i = 1..=n`.
    #[default]
    Decreasing,
    Uniform,
    /// Weights, rescaled to the requested total.
    Custom(Vec<f64>),
}

impl LambdaShape {
    pub fn spread(&self, n: usize, total: f64) -> Result<Vec<f64>> {
        let weights: Vec<f64> = match self {
            LambdaShape::Decreasing => (1..=n).map(|i| (n + 1 - i) as f64).collect(),
            LambdaShape::Uniform => vec![1.0; n],
            LambdaShape::Custom(w) => {
                if w.len() != n {
                    return Err(Error::DimensionMismatch {
                        what: "lambda_c_shape.custom",
                        expected: n,
                        found: w.len(),
                    });
                }
                if w.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                    return Err(Error::invalid(
                        "lambda_c_shape.custom",
                        "weights must be positive and finite",
                    ));
                }
                w.clone()
            }
        };
        let s: f64 = weights.iter().sum();
        Ok(weights.iter().map(|w| total * w / s).collect())
    }
}

/// Zone parameters as written in a spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneSpec {
    pub n: usize,
    pub lambda_v: f64,
    pub p: SocSpec,
    /// Per-class demand. When absent, `lambda_c_total` is spread with the
    /// spec's `lambda_c_shape`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_c_total: Option<f64>,
    pub mu_c: f64,
    pub c_points: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub base: ZoneSpec,
    #[serde(default)]
    pub sweep_values: Vec<f64>,
    /// Defaults depend on `kind`, see [`ExperimentSpec::policy_list`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policies: Option<Vec<PolicyKind>>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
    #[serde(default)]
    pub lambda_c_shape: LambdaShape,
}

impl ExperimentSpec {
    pub fn policy_list(&self) -> Vec<PolicyKind> {
        if let Some(p) = &self.policies {
            return p.clone();
        }
        match self.kind {
            ExperimentKind::LoadSweep | ExperimentKind::PolicyCompare => PolicyKind::ALL.to_vec(),
            ExperimentKind::ChargingSweep => vec![
                PolicyKind::OptimalJoint,
                PolicyKind::OptimizedChargeSameClass,
            ],
            ExperimentKind::SingleSolve | ExperimentKind::SingleSim => {
                vec![PolicyKind::OptimalJoint]
            }
        }
    }

    fn soc(&self) -> Result<Vec<f64>> {
        let n = self.base.n;
        Ok(match &self.base.p {
            SocSpec::Values(v) => v.clone(),
            SocSpec::Shape(NamedShape::Decreasing) => decreasing_soc(n),
            SocSpec::Shape(NamedShape::Uniform) => vec![1.0 / n as f64; n],
        })
    }

    fn base_demand(&self) -> Result<Vec<f64>> {
        match (&self.base.lambda_c, self.base.lambda_c_total) {
            (Some(v), None) => Ok(v.clone()),
            (None, Some(total)) => self.lambda_c_shape.spread(self.base.n, total),
            (Some(_), Some(_)) => Err(Error::invalid(
                "base.lambda_c_total",
                "give either lambda_c or lambda_c_total, not both",
            )),
            (None, None) => Err(Error::invalid(
                "base.lambda_c",
                "missing; give lambda_c or lambda_c_total",
            )),
        }
    }

    /// Zone configuration without any sweep applied.
    pub fn base_config(&self) -> Result<ZoneConfig> {
        if self.base.n < 2 {
            return Err(Error::invalid("base.n", "need at least 2 classes"));
        }
        let b = &self.base;
        ZoneConfig::new(
            b.n,
            b.lambda_v,
            self.soc()?,
            self.base_demand()?,
            b.mu_c,
            b.c_points,
        )
    }

    /// Zone configuration for one sweep value.
    pub fn config_at(&self, value: f64) -> Result<ZoneConfig> {
        let b = &self.base;
        let soc = self.soc()?;
        match self.kind {
            ExperimentKind::LoadSweep => {
                let lc = self.lambda_c_shape.spread(b.n, value)?;
                ZoneConfig::new(b.n, b.lambda_v, soc, lc, b.mu_c, b.c_points)
            }
            ExperimentKind::ChargingSweep => {
                if value.fract() != 0.0 || value < 1.0 || value > u32::MAX as f64 {
                    return Err(Error::invalid(
                        "sweep_values",
                        format!("charging-point count {value} is not a positive integer"),
                    ));
                }
                ZoneConfig::new(
                    b.n,
                    b.lambda_v,
                    soc,
                    self.base_demand()?,
                    b.mu_c,
                    value as u32,
                )
            }
            _ => self.base_config(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if let Some(sim) = &self.sim {
            sim.validate()?;
        }
        if self.policy_list().is_empty() {
            return Err(Error::invalid("policies", "list is empty"));
        }
        let sweeping = matches!(
            self.kind,
            ExperimentKind::LoadSweep | ExperimentKind::ChargingSweep
        );
        if sweeping {
            if self.sweep_values.is_empty() {
                return Err(Error::invalid(
                    "sweep_values",
                    "a sweep needs at least one value",
                ));
            }
            if let Some(w) = self.sweep_values.windows(2).find(|w| !(w[0] < w[1])) {
                return Err(Error::invalid(
                    "sweep_values",
                    format!("must be strictly increasing, found {} then {}", w[0], w[1]),
                ));
            }
            if self.kind == ExperimentKind::LoadSweep {
                if let Some(v) = self
                    .sweep_values
                    .iter()
                    .find(|v| !(**v < self.base.lambda_v && **v > 0.0))
                {
                    return Err(Error::invalid(
                        "sweep_values",
                        format!(
                            "demand total {v} must lie in (0, lambda_v = {})",
                            self.base.lambda_v
                        ),
                    ));
                }
            }
            // Surface malformed zone fields once, before any cell runs.
            self.config_at(self.sweep_values[0])?;
        } else {
            self.base_config()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub policy: PolicyKind,
    pub r_star: Option<f64>,
    pub max_response_min: Option<f64>,
    pub feasible: bool,
    pub bound_gap: Option<f64>,
    pub error: Option<String>,
    pub sim_max_response_min: Option<f64>,
    pub sim_ci95: Option<f64>,
    pub decisions: Option<DecisionSet>,
    pub config: Option<ZoneConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub with_sim: bool,
    pub rows: Vec<ResultRow>,
}

/// Reads and validates a JSON experiment spec.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentSpec> {
    let path = path.as_ref();
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    let spec: ExperimentSpec =
        serde_json::from_str(text).map_err(|e| Error::invalid("config", e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

fn sweep_points(spec: &ExperimentSpec) -> Vec<f64> {
    match spec.kind {
        ExperimentKind::LoadSweep | ExperimentKind::ChargingSweep => spec.sweep_values.clone(),
        _ => {
            let total = spec
                .base_config()
                .map(|c| c.total_demand())
                .unwrap_or(f64::NAN);
            vec![total]
        }
    }
}

/// Runs every (sweep value, policy) cell. Cells run in parallel; rows come
/// back in sweep order, policies in the order listed.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let policies = spec.policy_list();
    let cells: Vec<(f64, PolicyKind)> = sweep_points(spec)
        .into_iter()
        .flat_map(|v| policies.iter().map(move |p| (v, *p)))
        .collect();
    let rows = cells
        .into_par_iter()
        .map(|(v, p)| run_cell(spec, v, p))
        .collect();
    Ok(ResultTable {
        with_sim: spec.sim.is_some() || spec.kind == ExperimentKind::SingleSim,
        rows,
    })
}

fn run_cell(spec: &ExperimentSpec, value: f64, policy: PolicyKind) -> ResultRow {
    let mut row = ResultRow {
        sweep_value: value,
        policy,
        r_star: None,
        max_response_min: None,
        feasible: false,
        bound_gap: None,
        error: None,
        sim_max_response_min: None,
        sim_ci95: None,
        decisions: None,
        config: None,
    };
    let outcome = (|| -> Result<()> {
        let cfg = spec.config_at(value)?;
        row.config = Some(cfg.clone());
        let d = match policy {
            PolicyKind::OptimalJoint => solve(&cfg, &spec.solver)?.decisions,
            PolicyKind::OptimizedChargeSameClass => solve_same_class(&cfg, &spec.solver)?.decisions,
            kind => fixed_policy(kind, &cfg).expect("fixed policy"),
        };
        let r = min_margin_raw(&cfg, d.q(), d.pi());
        row.r_star = Some(r);
        row.max_response_min = Some(if r > 0.0 { 1.0 / r } else { f64::INFINITY });
        let report = check_stability_eps(&cfg, &d, 0.0, spec.solver.eps_strict)?;
        row.feasible = report.is_stable();
        if policy.is_optimized() {
            row.bound_gap = Some(fleet_rate_bound(&cfg) - r);
        }
        let sim = spec
            .sim
            .clone()
            .or_else(|| (spec.kind == ExperimentKind::SingleSim).then(SimConfig::default));
        if let Some(sim) = sim {
            if row.feasible {
                let rep = simulate(&cfg, &d, &sim)?;
                let k = rep.max_class;
                row.sim_max_response_min = Some(rep.mean_response[k]);
                row.sim_ci95 = Some(rep.ci95_halfwidth[k]);
            }
        }
        row.decisions = Some(d);
        Ok(())
    })();
    if let Err(e) = outcome {
        row.error = Some(e.to_string());
    }
    row
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the table as CSV with the fixed header (plus simulation columns
/// when the table carries them).
pub fn write_csv(table: &ResultTable, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    let mut header: Vec<&str> = CSV_HEADER.to_vec();
    if table.with_sim {
        header.extend(SIM_CSV_COLUMNS);
    }
    w.write_record(&header).map_err(csv_err)?;
    for r in &table.rows {
        let mut rec = vec![
            r.sweep_value.to_string(),
            r.policy.name().to_string(),
            fmt_opt(r.r_star),
            fmt_opt(r.max_response_min),
            r.feasible.to_string(),
            fmt_opt(r.bound_gap),
            r.error.clone().unwrap_or_default(),
        ];
        if table.with_sim {
            rec.push(fmt_opt(r.sim_max_response_min));
            rec.push(fmt_opt(r.sim_ci95));
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(table: &ResultTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_csv(table, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PINNED: &str = r#"{
        "kind": "single_solve",
        "base": {"n": 2, "lambda_v": 2.0, "p": [0.4, 0.6], "lambda_c": [0.5, 0.6],
                 "mu_c": 0.5, "c_points": 2},
        "solver": {"starts": 8}
    }"#;

    #[test]
    fn bad_soc_names_the_field() {
        let text = PINNED.replace("[0.4, 0.6]", "[0.4, 0.7]");
        match parse_config(&text) {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "p"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_named() {
        let text = PINNED.replace("\"mu_c\"", "\"muc\"");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("muc"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn spec_round_trips() {
        let spec = parse_config(PINNED).unwrap();
        let again = parse_config(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn single_solve_without_sim_has_fixed_header() {
        let spec = parse_config(PINNED).unwrap();
        let table = run_experiment(&spec).unwrap();
        let mut buf = Vec::new();
        write_csv(&table, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "sweep_value,policy,r_star,max_response_min,feasible,bound_gap,error"
        );
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[1], "optimal");
        assert!((row[2].parse::<f64>().unwrap() - 0.45).abs() < 1e-7);
        assert_eq!(row[4], "true");
    }

    #[test]
    fn shapes() {
        let lc = LambdaShape::Decreasing.spread(3, 6.0).unwrap();
        assert_eq!(lc, vec![3.0, 2.0, 1.0]);
        assert_eq!(LambdaShape::Uniform.spread(2, 1.0).unwrap(), vec![0.5, 0.5]);
        assert!(LambdaShape::Custom(vec![1.0]).spread(2, 1.0).is_err());
        let s: LambdaShape = serde_json::from_str(r#"{"custom": [1, 3]}"#).unwrap();
        assert_eq!(s.spread(2, 2.0).unwrap(), vec![0.5, 1.5]);
    }

    #[test]
    fn sweep_values_must_increase() {
        let text = r#"{
            "kind": "charging_sweep",
            "base": {"n": 3, "lambda_v": 8.0, "p": "decreasing", "lambda_c_total": 6.0,
                     "mu_c": 0.033, "c_points": 40},
            "sweep_values": [20, 10]
        }"#;
        assert!(matches!(
            parse_config(text),
            Err(Error::InvalidConfig { .. })
        ));
    }

    #[test]
    fn infeasible_cell_is_recorded_not_fatal() {
        let text = r#"{
            "kind": "charging_sweep",
            "base": {"n": 2, "lambda_v": 2.0, "p": [0.4, 0.6], "lambda_c": [0.5, 0.6],
                     "mu_c": 0.05, "c_points": 2},
            "sweep_values": [2, 40],
            "solver": {"starts": 4}
        }"#;
        let table = run_experiment(&parse_config(text).unwrap()).unwrap();
        assert_eq!(table.rows.len(), 4);
        assert!(table.rows[0]
            .error
            .as_deref()
            .unwrap()
            .contains("no feasible point"));
        assert!(table.rows[2].error.is_none());
    }
}
