//! Boundary values `T_{lambda + i0}` as numeric limits `y -> 0+`.
//!
//! Samples are taken on a geometric grid `y_j = y0 q^j` and extrapolated to
//! `y = 0` entrywise with Neville's scheme. Convergence is judged in operator
//! norm on the sequence of extrapolants; failing that, the growth rate of
//! `||T(y)||` is fitted to detect pole-type blow-up.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matkit::{self, CMat, Tolerances};
use crate::models::{HalfPlanePoint, SandwichedResolvent};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LapError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("need at least 4 samples, got {0}")]
    TooFewSamples(usize),
    #[error("samples share the abscissa y = {0}")]
    DuplicateAbscissa(f64),
    #[error("samples have inconsistent shapes")]
    ShapeMismatch,
    #[error("evaluation failed at y = {y}: {message}")]
    Evaluation { y: f64, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YGrid {
    pub y0: f64,
    pub q: f64,
    pub n: usize,
}

impl Default for YGrid {
    fn default() -> Self {
        Self {
            y0: 0.1,
            q: 0.5,
            n: 20,
        }
    }
}

impl YGrid {
    pub fn new(y0: f64, q: f64, n: usize) -> Result<Self, LapError> {
        let g = Self { y0, q, n };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), LapError> {
        if !(self.y0 > 0.0 && self.y0.is_finite()) {
            return Err(LapError::InvalidGrid(format!("y0 = {} must be positive", self.y0)));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(LapError::InvalidGrid(format!("q = {} must lie in (0, 1)", self.q)));
        }
        if self.n < 4 {
            return Err(LapError::InvalidGrid(format!("n = {} must be at least 4", self.n)));
        }
        if self.y0 * self.q.powi(self.n as i32 - 1) <= 1e-12 {
            return Err(LapError::InvalidGrid("smallest y falls below 1e-12".into()));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.y0 * self.q.powi(j as i32)).collect()
    }

    /// Same range resolved twice as finely in `log y`.
    pub fn doubled(&self) -> Self {
        Self {
            y0: self.y0,
            q: self.q.sqrt(),
            n: 2 * self.n - 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitMethod {
    Exact,
    Extrapolated,
}

/// Outcome of a `y -> 0+` limit.
///
/// `error_estimate` is the last Neville increment, a heuristic and not a
/// rigorous bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BoundaryLimit {
    Converged {
        #[serde(with = "matkit::serde_cmat")]
        value: CMat,
        error_estimate: f64,
        method: LimitMethod,
    },
    Diverged {
        blowup_exponent: f64,
        norms_trace: Vec<(f64, f64)>,
    },
    Inconclusive {
        last_delta: f64,
        fitted_exponent: f64,
        norms_trace: Vec<(f64, f64)>,
    },
}

impl BoundaryLimit {
    pub fn exact(value: CMat) -> Self {
        BoundaryLimit::Converged {
            value,
            error_estimate: 0.0,
            method: LimitMethod::Exact,
        }
    }

    pub fn value(&self) -> Option<&CMat> {
        match self {
            BoundaryLimit::Converged { value, .. } => Some(value),
            _ => None,
        }
    }

    pub fn is_converged(&self) -> bool {
        matches!(self, BoundaryLimit::Converged { .. })
    }

    pub fn is_diverged(&self) -> bool {
        matches!(self, BoundaryLimit::Diverged { .. })
    }
}

/// Evaluates `t_of_z` at `lambda + i y_j` for every grid point, in grid order.
pub fn evaluate_on_grid<F, E>(t_of_z: F, lambda: f64, grid: &YGrid) -> Result<Vec<(f64, CMat)>, LapError>
where
    F: Fn(HalfPlanePoint) -> Result<SandwichedResolvent, E>,
    E: std::fmt::Display,
{
    grid.validate()?;
    grid.points()
        .into_iter()
        .map(|y| {
            let point = HalfPlanePoint::new(lambda, y).map_err(|e| LapError::Evaluation {
                y,
                message: e.to_string(),
            })?;
            t_of_z(point)
                .map(|t| (y, t.value))
                .map_err(|e| LapError::Evaluation {
                    y,
                    message: e.to_string(),
                })
        })
        .collect()
}

pub fn extrapolate_limit(samples: &[(f64, CMat)], tol: f64) -> Result<BoundaryLimit, LapError> {
    let t = Tolerances {
        limit: tol,
        ..Tolerances::default()
    };
    extrapolate_limit_with(samples, &t)
}

/// Neville extrapolation to `y = 0` with a Converged / Diverged /
/// Inconclusive classification.
pub fn extrapolate_limit_with(
    samples: &[(f64, CMat)],
    tol: &Tolerances,
) -> Result<BoundaryLimit, LapError> {
    if samples.len() < 4 {
        return Err(LapError::TooFewSamples(samples.len()));
    }
    let shape = samples[0].1.shape();
    if samples.iter().any(|(_, m)| m.shape() != shape) {
        return Err(LapError::ShapeMismatch);
    }
    let mut sorted: Vec<&(f64, CMat)> = samples.iter().collect();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    for w in sorted.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(LapError::DuplicateAbscissa(w[0].0));
        }
    }

    let ys: Vec<f64> = sorted.iter().map(|s| s.0).collect();
    let mut table: Vec<CMat> = Vec::with_capacity(sorted.len());
    let mut extrapolants: Vec<CMat> = Vec::with_capacity(sorted.len());
    for (j, (yj, fj)) in sorted.iter().map(|s| (s.0, &s.1)).enumerate() {
        table.push(fj.clone());
        for i in (0..j).rev() {
            let yi = ys[i];
            let updated = (table[i + 1].scale(yi) - table[i].scale(yj)).unscale(yi - yj);
            table[i] = updated;
        }
        extrapolants.push(table[0].clone());
    }

    let deltas: Vec<f64> = extrapolants
        .windows(2)
        .map(|w| matkit::op_norm(&(&w[1] - &w[0])))
        .collect();
    let last = extrapolants.last().expect("nonempty");
    let threshold = tol.limit * matkit::op_norm(last).max(1.0);
    let d1 = deltas[deltas.len() - 1];
    let d2 = deltas[deltas.len() - 2];
    let finite = last.iter().all(|c| c.re.is_finite() && c.im.is_finite());

    let norms_trace: Vec<(f64, f64)> = sorted.iter().map(|(y, m)| (*y, matkit::op_norm(m))).collect();
    if finite && d1 < threshold && d2 < threshold {
        return Ok(BoundaryLimit::Converged {
            value: last.clone(),
            error_estimate: d1,
            method: LimitMethod::Extrapolated,
        });
    }

    let tail = &norms_trace[norms_trace.len() / 2..];
    let tail = if tail.len() < 4 {
        &norms_trace[norms_trace.len() - 4..]
    } else {
        tail
    };
    let exponent = fit_blowup_exponent(tail);
    let increasing = tail.windows(2).all(|w| w[1].1 >= w[0].1 * (1.0 - 1e-12));
    if increasing && exponent >= tol.divergence_exponent {
        Ok(BoundaryLimit::Diverged {
            blowup_exponent: exponent,
            norms_trace,
        })
    } else {
        Ok(BoundaryLimit::Inconclusive {
            last_delta: d1,
            fitted_exponent: exponent,
            norms_trace,
        })
    }
}

/// Least-squares slope of `log ||T||` against `-log y`.
pub fn fit_blowup_exponent(trace: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = trace
        .iter()
        .filter(|(y, n)| *y > 0.0 && *n > 0.0)
        .map(|(y, n)| (-y.ln(), n.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Evaluates on the grid and extrapolates.
pub fn numeric_limit<F, E>(
    t_of_z: F,
    lambda: f64,
    grid: &YGrid,
    tol: &Tolerances,
) -> Result<BoundaryLimit, LapError>
where
    F: Fn(HalfPlanePoint) -> Result<SandwichedResolvent, E>,
    E: std::fmt::Display,
{
    let samples = evaluate_on_grid(t_of_z, lambda, grid)?;
    extrapolate_limit_with(&samples, tol)
}
