//! Lagrangian of the epigraph program, its gradient and KKT residuals.
//!
//! Inequalities are written `g_k <= 0` with nonnegative multipliers:
//!
//! | multiplier | constraint |
//! |---|---|
//! | `alpha[i]` | `λ_c_i + R - λ_vs_i <= 0` |
//! | `beta[0]` | partial-charging load `- C n μ_c + eps <= 0` |
//! | `beta[1]` | full-station load `- μ_c + eps <= 0` |
//! | `gamma[i]`, `i < n` | `q_i - 1 <= 0` |
//! | `gamma[n]` | `R - (λ_v - Σλ_c) / n <= 0` |
//! | `omega[i]`, `i < n` | `-q_i <= 0` |
//! | `omega[n]` | `eps - R <= 0` |
//! | `nu[i][j]` | `Π_ij - 1 <= 0` |
//! | `mu[i][j]` | `-Π_ij <= 0` |
//!
//! and `delta[i]` is free, attached to `Σ_j Π_ij - 1 = 0`. The same `eps`
//! is used for both charging queues and for the positivity of `R`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zone::{class_rates_into, fleet_rate_bound, margins_raw, partial_load, ZoneConfig};

/// Residual level under which a point counts as KKT-certified.
pub const KKT_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktMultipliers {
    pub alpha: Vec<f64>,
    pub beta: [f64; 2],
    pub gamma: Vec<f64>,
    pub omega: Vec<f64>,
    pub nu: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
    pub delta: Vec<f64>,
}

impl KktMultipliers {
    pub fn zeros(n: usize) -> Self {
        let tri: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0; i + 1]).collect();
        Self {
            alpha: vec![0.0; n],
            beta: [0.0; 2],
            gamma: vec![0.0; n + 1],
            omega: vec![0.0; n + 1],
            nu: tri.clone(),
            mu: tri,
            delta: vec![0.0; n],
        }
    }

    fn check_dims(&self, n: usize) -> Result<()> {
        let dims = [
            ("alpha", self.alpha.len(), n),
            ("gamma", self.gamma.len(), n + 1),
            ("omega", self.omega.len(), n + 1),
            ("nu rows", self.nu.len(), n),
            ("mu rows", self.mu.len(), n),
            ("delta", self.delta.len(), n),
        ];
        for (what, found, expected) in dims {
            if found != expected {
                return Err(Error::DimensionMismatch {
                    what,
                    expected,
                    found,
                });
            }
        }
        for i in 0..n {
            for (what, row) in [
                ("nu row length", &self.nu[i]),
                ("mu row length", &self.mu[i]),
            ] {
                if row.len() != i + 1 {
                    return Err(Error::DimensionMismatch {
                        what,
                        expected: i + 1,
                        found: row.len(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Partial derivatives of the Lagrangian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangianGradient {
    pub dq: Vec<f64>,
    pub dpi: Vec<Vec<f64>>,
    pub dr: f64,
}

impl LagrangianGradient {
    pub fn max_abs(&self) -> f64 {
        self.dq
            .iter()
            .chain(self.dpi.iter().flatten())
            .chain(std::iter::once(&self.dr))
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// Largest absolute partial derivative of the Lagrangian.
    pub stationarity: f64,
    /// Largest `|multiplier * constraint|`.
    pub complementarity: f64,
    /// Largest primal constraint violation.
    pub feasibility: f64,
    /// Largest negative part of an inequality multiplier.
    pub dual: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.complementarity)
            .max(self.feasibility)
            .max(self.dual)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktCertificate {
    pub multipliers: KktMultipliers,
    pub residuals: KktResiduals,
    pub certified: bool,
}

fn check_point(cfg: &ZoneConfig, q: &[f64], pi: &[Vec<f64>]) -> Result<()> {
    let n = cfg.n();
    if q.len() != n {
        return Err(Error::DimensionMismatch {
            what: "q",
            expected: n,
            found: q.len(),
        });
    }
    if pi.len() != n {
        return Err(Error::DimensionMismatch {
            what: "pi rows",
            expected: n,
            found: pi.len(),
        });
    }
    for (i, row) in pi.iter().enumerate() {
        if row.len() != i + 1 {
            return Err(Error::DimensionMismatch {
                what: "pi row length",
                expected: i + 1,
                found: row.len(),
            });
        }
    }
    Ok(())
}

/// Every inequality value `g_k` paired with its multiplier, in a fixed order.
fn inequalities(
    cfg: &ZoneConfig,
    q: &[f64],
    pi: &[Vec<f64>],
    r: f64,
    m: &KktMultipliers,
    eps: f64,
) -> Vec<(f64, f64)> {
    let n = cfg.n();
    let margins = margins_raw(cfg, q, pi);
    let mut out = Vec::with_capacity(4 * n + 4 + n * (n + 1));
    for i in 0..n {
        out.push((r - margins[i], m.alpha[i]));
    }
    out.push((
        partial_load(cfg, q) - cfg.partial_capacity() + eps,
        m.beta[0],
    ));
    out.push((
        cfg.lambda_v() * cfg.p()[0] * q[0] - cfg.mu_c() + eps,
        m.beta[1],
    ));
    for i in 0..n {
        out.push((q[i] - 1.0, m.gamma[i]));
        out.push((-q[i], m.omega[i]));
    }
    out.push((r - fleet_rate_bound(cfg), m.gamma[n]));
    out.push((eps - r, m.omega[n]));
    for i in 0..n {
        for j in 0..=i {
            out.push((pi[i][j] - 1.0, m.nu[i][j]));
            out.push((-pi[i][j], m.mu[i][j]));
        }
    }
    out
}

/// Lagrangian value at `(q, Π, R)`. The point need not be feasible.
pub fn lagrangian(
    cfg: &ZoneConfig,
    q: &[f64],
    pi: &[Vec<f64>],
    r: f64,
    m: &KktMultipliers,
    eps: f64,
) -> Result<f64> {
    check_point(cfg, q, pi)?;
    m.check_dims(cfg.n())?;
    let ineq: f64 = inequalities(cfg, q, pi, r, m, eps)
        .into_iter()
        .map(|(g, w)| g * w)
        .sum();
    let eq: f64 = pi
        .iter()
        .zip(&m.delta)
        .map(|(row, d)| d * (row.iter().sum::<f64>() - 1.0))
        .sum();
    Ok(-r + ineq + eq)
}

/// Closed-form gradient of [`lagrangian`].
pub fn lagrangian_gradient(
    cfg: &ZoneConfig,
    q: &[f64],
    pi: &[Vec<f64>],
    m: &KktMultipliers,
) -> Result<LagrangianGradient> {
    check_point(cfg, q, pi)?;
    let n = cfg.n();
    m.check_dims(n)?;
    let lv = cfg.lambda_v();
    let p = cfg.p();
    let a = &m.alpha;
    let [b0, b1] = m.beta;

    let mut dq = vec![0.0; n];
    dq[0] =
        lv * p[0] * (a[0] * pi[0][0] - (0..n).map(|j| a[j] * pi[n - 1][j]).sum::<f64>() - b0 + b1)
            - m.omega[0]
            + m.gamma[0];
    for i in 1..n {
        // pi[i] is the row of the class fed by SoC class i when it serves as is.
        let shift: f64 = (0..i).map(|j| a[j] * (pi[i][j] - pi[i - 1][j])).sum();
        dq[i] = lv * p[i] * (shift + a[i] * pi[i][i] - b0) - m.omega[i] + m.gamma[i];
    }

    let mut rates = vec![0.0; n];
    class_rates_into(cfg, q, &mut rates);
    let mut dpi: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let row_rate = if i + 1 < n {
            lv * (p[i] - p[i] * q[i] + p[i + 1] * q[i + 1])
        } else {
            lv * (p[n - 1] - p[n - 1] * q[n - 1] + p[0] * q[0])
        };
        debug_assert!((row_rate - rates[i]).abs() <= 1e-12 * (1.0 + rates[i].abs()));
        dpi.push(
            (0..=i)
                .map(|j| -a[j] * row_rate + m.delta[i] + m.nu[i][j] - m.mu[i][j])
                .collect(),
        );
    }

    let dr = -1.0 + a.iter().sum::<f64>() - m.omega[n] + m.gamma[n];
    Ok(LagrangianGradient { dq, dpi, dr })
}

/// Stationarity, complementarity, primal and dual residuals.
pub fn kkt_residuals(
    cfg: &ZoneConfig,
    q: &[f64],
    pi: &[Vec<f64>],
    r: f64,
    m: &KktMultipliers,
    eps: f64,
) -> Result<KktResiduals> {
    let grad = lagrangian_gradient(cfg, q, pi, m)?;
    let ineq = inequalities(cfg, q, pi, r, m, eps);
    let row_gaps: Vec<f64> = pi.iter().map(|row| row.iter().sum::<f64>() - 1.0).collect();
    let mut comp = 0.0_f64;
    let mut feas = 0.0_f64;
    let mut dual = 0.0_f64;
    for (g, w) in &ineq {
        comp = comp.max((g * w).abs());
        feas = feas.max(g.max(0.0));
        dual = dual.max((-w).max(0.0));
    }
    for (h, d) in row_gaps.iter().zip(&m.delta) {
        comp = comp.max((h * d).abs());
        feas = feas.max(h.abs());
    }
    Ok(KktResiduals {
        stationarity: grad.max_abs(),
        complementarity: comp,
        feasibility: feas,
        dual,
    })
}

// Column layout of the stacked multiplier vector used by the fit.
struct Layout {
    n: usize,
    tri: usize,
}

impl Layout {
    fn new(n: usize) -> Self {
        Self {
            n,
            tri: n * (n + 1) / 2,
        }
    }

    /// Inequality multipliers followed by `delta+` and `delta-`.
    fn cols(&self) -> usize {
        self.ineq() + 2 * self.n
    }

    fn ineq(&self) -> usize {
        self.n + 2 + 2 * (self.n + 1) + 2 * self.tri
    }

    fn unpack(&self, x: &[f64]) -> KktMultipliers {
        let n = self.n;
        let mut m = KktMultipliers::zeros(n);
        let mut k = 0;
        let mut take = || {
            k += 1;
            x[k - 1]
        };
        for i in 0..n {
            m.alpha[i] = take();
        }
        m.beta[0] = take();
        m.beta[1] = take();
        for i in 0..=n {
            m.gamma[i] = take();
        }
        for i in 0..=n {
            m.omega[i] = take();
        }
        for i in 0..n {
            for j in 0..=i {
                m.nu[i][j] = take();
            }
        }
        for i in 0..n {
            for j in 0..=i {
                m.mu[i][j] = take();
            }
        }
        for i in 0..n {
            m.delta[i] = take();
        }
        for i in 0..n {
            m.delta[i] -= take();
        }
        m
    }

    /// Inequality values in the same order as the multiplier columns.
    fn constraint_values(
        &self,
        cfg: &ZoneConfig,
        q: &[f64],
        pi: &[Vec<f64>],
        r: f64,
        eps: f64,
    ) -> Vec<f64> {
        let n = self.n;
        let margins = margins_raw(cfg, q, pi);
        let mut g = Vec::with_capacity(self.ineq());
        g.extend((0..n).map(|i| r - margins[i]));
        g.push(partial_load(cfg, q) - cfg.partial_capacity() + eps);
        g.push(cfg.lambda_v() * cfg.p()[0] * q[0] - cfg.mu_c() + eps);
        g.extend((0..n).map(|i| q[i] - 1.0));
        g.push(r - fleet_rate_bound(cfg));
        g.extend((0..n).map(|i| -q[i]));
        g.push(eps - r);
        for row in pi {
            g.extend(row.iter().map(|x| x - 1.0));
        }
        for row in pi {
            g.extend(row.iter().map(|x| -x));
        }
        g
    }
}

fn flatten(g: &LagrangianGradient) -> Vec<f64> {
    let mut v = g.dq.clone();
    v.extend(g.dpi.iter().flatten());
    v.push(g.dr);
    v
}

/// Fits multipliers at `(q, Π, R)` by nonnegative least squares on the
/// stationarity equations stacked with the complementarity products.
pub fn fit_multipliers(
    cfg: &ZoneConfig,
    q: &[f64],
    pi: &[Vec<f64>],
    r: f64,
    eps: f64,
) -> Result<KktMultipliers> {
    check_point(cfg, q, pi)?;
    let layout = Layout::new(cfg.n());
    let cols = layout.cols();
    let base = flatten(&lagrangian_gradient(
        cfg,
        q,
        pi,
        &KktMultipliers::zeros(cfg.n()),
    )?);
    let g = layout.constraint_values(cfg, q, pi, r, eps);
    let row_gaps: Vec<f64> = pi.iter().map(|row| row.iter().sum::<f64>() - 1.0).collect();
    let stat_rows = base.len();
    let rows = stat_rows + cols;

    let mut a = DMatrix::<f64>::zeros(rows, cols);
    let mut unit = vec![0.0; cols];
    for k in 0..cols {
        unit[k] = 1.0;
        let m = layout.unpack(&unit);
        unit[k] = 0.0;
        let col = flatten(&lagrangian_gradient(cfg, q, pi, &m)?);
        for (row, (c, b)) in col.iter().zip(&base).enumerate() {
            a[(row, k)] = c - b;
        }
        let product = if k < layout.ineq() {
            g[k]
        } else {
            row_gaps[(k - layout.ineq()) % cfg.n()]
        };
        a[(stat_rows + k, k)] = product;
    }
    let mut y = DVector::<f64>::zeros(rows);
    for (i, b) in base.iter().enumerate() {
        y[i] = -b;
    }
    let x = nnls(&a, &y);
    Ok(layout.unpack(x.as_slice()))
}

/// Fits multipliers and reports residuals against [`KKT_TOL`].
pub fn certify(
    cfg: &ZoneConfig,
    q: &[f64],
    pi: &[Vec<f64>],
    r: f64,
    eps: f64,
) -> Result<KktCertificate> {
    let multipliers = fit_multipliers(cfg, q, pi, r, eps)?;
    let residuals = kkt_residuals(cfg, q, pi, r, &multipliers, eps)?;
    Ok(KktCertificate {
        certified: residuals.within(KKT_TOL),
        multipliers,
        residuals,
    })
}

/// Lawson-Hanson active-set solver for `min |Ax - y|, x >= 0`.
pub(crate) fn nnls(a: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let cols = a.ncols();
    let scale = a.amax().max(y.amax()).max(1.0);
    let tol = 1e-12 * scale * scale * (cols as f64);
    let mut x = DVector::<f64>::zeros(cols);
    let mut passive = vec![false; cols];
    let mut blocked = vec![false; cols];

    for _ in 0..3 * cols.max(1) {
        let w = a.transpose() * (y - a * &x);
        let candidate = (0..cols)
            .filter(|&j| !passive[j] && !blocked[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]).then(j.cmp(&i)));
        let Some(j) = candidate else { break };
        if w[j] <= tol {
            break;
        }
        passive[j] = true;

        let mut inner = 0;
        loop {
            inner += 1;
            let Some(z) = solve_passive(a, y, &passive) else {
                passive[j] = false;
                blocked[j] = true;
                break;
            };
            if (0..cols).all(|k| !passive[k] || z[k] > 0.0) {
                x = z;
                break;
            }
            let mut step = 1.0_f64;
            for k in 0..cols {
                if passive[k] && z[k] <= 0.0 {
                    let denom = x[k] - z[k];
                    if denom > 0.0 {
                        step = step.min(x[k] / denom);
                    }
                }
            }
            x = &x + (&z - &x) * step;
            for k in 0..cols {
                if passive[k] && x[k] <= 1e-15 {
                    passive[k] = false;
                    x[k] = 0.0;
                }
            }
            if inner > 3 * cols {
                break;
            }
        }
        // A column whose entry made no progress would be picked forever.
        if !passive[j] && x[j] == 0.0 {
            blocked[j] = true;
        }
    }
    x
}

fn solve_passive(a: &DMatrix<f64>, y: &DVector<f64>, passive: &[bool]) -> Option<DVector<f64>> {
    let idx: Vec<usize> = (0..passive.len()).filter(|&k| passive[k]).collect();
    let sub = a.select_columns(idx.iter());
    let sol = sub.svd(true, true).solve(y, 1e-13).ok()?;
    let mut z = DVector::<f64>::zeros(passive.len());
    for (pos, &k) in idx.iter().enumerate() {
        z[k] = sol[pos];
    }
    Some(z)
}
