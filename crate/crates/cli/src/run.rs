//! Command dispatch and report assembly.

use rayon::prelude::*;
use regdir_core::lap::{self, BoundaryLimit};
use regdir_core::matkit::{self, CMat, Hermitian};
use regdir_core::models::{HalfPlanePoint, SandwichedResolvent};
use regdir_core::perturb::{
    self, CoupledOperator, Dip, Direction, PerturbError, RegularityVerdict, Resonance,
};
use regdir_core::verify::{self, SweepSummary, TheoremCertificate, VerifyError};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::scenario::{Axis, ModelScenario, RandomScenario, Scenario, ScenarioKind, SchemaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Limit,
    Scan,
    VerifyThm,
    VerifyCorAbs,
    VerifyCorMono,
    Flow,
    Sweep,
    VerifySweep,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Limit => "limit",
            Command::Scan => "scan",
            Command::VerifyThm => "verify-thm",
            Command::VerifyCorAbs => "verify-cor-abs",
            Command::VerifyCorMono => "verify-cor-mono",
            Command::Flow => "flow",
            Command::Sweep => "sweep",
            Command::VerifySweep => "verify-sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
    Inconclusive,
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Failed => 1,
            Status::Inconclusive => 3,
        }
    }
}

/// Anything that stops a run before a report exists. Always exit code 2.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Schema(#[from] SchemaError),
    #[error("{0}")]
    Compute(String),
}

impl From<PerturbError> for RunError {
    fn from(e: PerturbError) -> Self {
        RunError::Compute(e.to_string())
    }
}

impl From<VerifyError> for RunError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::InvalidPremise(msg) => RunError::Schema(SchemaError {
                path: "/J_tilde".into(),
                message: msg,
            }),
            other => RunError::Compute(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub status: Status,
    pub scenario: Value,
    pub result: CommandResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandResult {
    Limit(LimitResult),
    Scan(ScanResult),
    Verify(Box<TheoremCertificate>),
    Flow(FlowResult),
    Sweep(SweepResult),
    VerifySweep(SweepSummary),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitResult {
    pub lambda: f64,
    pub coupling: f64,
    pub limit: BoundaryLimit,
    /// `(y, ||T||)` along the grid; empty for exact boundary values.
    pub norms_trace: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub lambda: f64,
    pub verdict: RegularityVerdict,
    pub resonances: Vec<Resonance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    pub lambda: f64,
    pub r_from: f64,
    pub r_to: f64,
    pub flow: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub value: f64,
    pub t_norm: Option<f64>,
    pub im_min_eig: Option<f64>,
    pub sigma_min: Option<f64>,
    pub converged: bool,
    pub near_resonance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: Axis,
    pub lambda: f64,
    pub coupling: f64,
    /// Anchor coupling of the `r` and `t` sweeps.
    pub anchor: Option<f64>,
    /// Refined minima of `sigma_min` below the dip threshold (`r`, `t` axes).
    pub dips: Vec<Dip>,
    /// Fitted growth exponent of `||T||` as `y -> 0` (`y` axis).
    pub blowup_exponent: Option<f64>,
    pub rows: Vec<GridRow>,
}

pub fn run(scenario: &Scenario, command: Command) -> Result<Report, RunError> {
    let (status, result) = match (&scenario.kind, command) {
        (ScenarioKind::Random(r), Command::VerifySweep) => verify_sweep(scenario, r),
        (ScenarioKind::Random(_), _) => {
            return Err(SchemaError {
                path: "/claim".into(),
                message: format!("generated scenarios only support verify-sweep, not {}", command.name()),
            }
            .into())
        }
        (ScenarioKind::Model(_), Command::VerifySweep) => {
            return Err(SchemaError {
                path: "/claim".into(),
                message: "verify-sweep needs a \"claim\" scenario".into(),
            }
            .into())
        }
        (ScenarioKind::Model(m), cmd) => run_model(scenario, m, cmd)?,
    };
    Ok(Report {
        tool: "regdir".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command,
        status,
        scenario: scenario.echo.clone(),
        result,
        wall_clock_seconds: None,
    })
}

fn verify_sweep(scenario: &Scenario, r: &RandomScenario) -> (Status, CommandResult) {
    let summary = verify::sweep(r.claim, scenario.seed, r.count, &scenario.config);
    let status = if !summary.all_pass() {
        Status::Failed
    } else if summary.established == 0 {
        Status::Inconclusive
    } else {
        Status::Ok
    };
    (status, CommandResult::VerifySweep(summary))
}

fn run_model(scenario: &Scenario, m: &ModelScenario, cmd: Command) -> Result<(Status, CommandResult), RunError> {
    let cfg = &scenario.config;
    match cmd {
        Command::Limit => {
            let limit = limit(m, scenario)?;
            let status = match limit.limit {
                BoundaryLimit::Inconclusive { .. } => Status::Inconclusive,
                _ => Status::Ok,
            };
            Ok((status, CommandResult::Limit(limit)))
        }
        Command::Scan => {
            let verdict = perturb::regular_direction(&m.model, m.lambda, &m.j, cfg)?;
            let resonances = verdict.resonances().map(|r| r.resonances.clone()).unwrap_or_default();
            let status = if verdict.is_regular() {
                Status::Ok
            } else {
                Status::Inconclusive
            };
            Ok((
                status,
                CommandResult::Scan(ScanResult {
                    lambda: m.lambda,
                    verdict,
                    resonances,
                }),
            ))
        }
        Command::VerifyThm | Command::VerifyCorAbs | Command::VerifyCorMono => {
            let cert = match cmd {
                Command::VerifyThm => verify::verify_identity_direction(&m.model, m.lambda, &m.j, cfg)?,
                Command::VerifyCorAbs => verify::verify_abs_direction(&m.model, m.lambda, &m.j, cfg)?,
                _ => {
                    let jt = m.j_tilde.as_ref().ok_or_else(|| SchemaError {
                        path: "/J_tilde".into(),
                        message: "verify-cor-mono needs J_tilde".into(),
                    })?;
                    verify::verify_monotone_direction(&m.model, m.lambda, &m.j, jt, cfg)?
                }
            };
            let status = if !cert.pass {
                Status::Failed
            } else if cert.vacuous {
                Status::Inconclusive
            } else {
                Status::Ok
            };
            Ok((status, CommandResult::Verify(Box::new(cert))))
        }
        Command::Flow => {
            let (from, to) = m.flow.ok_or_else(|| SchemaError {
                path: "/flow".into(),
                message: "flow needs {\"from\", \"to\"}".into(),
            })?;
            let (h, f) = m.model.as_finite().ok_or_else(|| SchemaError {
                path: "/model/type".into(),
                message: "flow needs a finite_hermitian model".into(),
            })?;
            let v = Hermitian::new(f.adjoint() * m.j.matrix() * f).map_err(|e| RunError::Compute(e.to_string()))?;
            let flow = perturb::spectral_flow_finite(h.matrix(), &v, m.lambda, from, to)?;
            Ok((
                Status::Ok,
                CommandResult::Flow(FlowResult {
                    lambda: m.lambda,
                    r_from: from,
                    r_to: to,
                    flow,
                }),
            ))
        }
        Command::Sweep => sweep(scenario, m),
        Command::VerifySweep => unreachable!("handled by the caller"),
    }
}

fn limit(m: &ModelScenario, scenario: &Scenario) -> Result<LimitResult, RunError> {
    let tol = &scenario.config.tol;
    let op = CoupledOperator::new(m.model.clone(), m.j.clone(), m.coupling)?;
    if m.model.boundary_exact(m.lambda).is_some() {
        let limit = perturb::coupled_boundary_limit(&op, m.lambda, &scenario.config.grid, tol)?;
        return Ok(LimitResult {
            lambda: m.lambda,
            coupling: m.coupling,
            limit,
            norms_trace: Vec::new(),
        });
    }
    let samples = lap::evaluate_on_grid(|p| perturb::coupled_t(&op, p), m.lambda, &scenario.config.grid)
        .map_err(|e| RunError::Compute(e.to_string()))?;
    let norms_trace = samples.iter().map(|(y, t)| (*y, matkit::op_norm(t))).collect();
    let limit = lap::extrapolate_limit_with(&samples, tol).map_err(|e| RunError::Compute(e.to_string()))?;
    Ok(LimitResult {
        lambda: m.lambda,
        coupling: m.coupling,
        limit,
        norms_trace,
    })
}

fn describe(t: &CMat) -> (Option<f64>, Option<f64>) {
    let im = matkit::im_part(t).ok().map(|h| h.min_eigenvalue());
    (Some(matkit::op_norm(t)), im)
}

fn sweep(scenario: &Scenario, m: &ModelScenario) -> Result<(Status, CommandResult), RunError> {
    let spec = m.sweep.as_ref().ok_or_else(|| SchemaError {
        path: "/sweep".into(),
        message: "sweep needs {\"axis\", \"range\"}".into(),
    })?;
    let cfg = &scenario.config;
    let tol = &cfg.tol;
    let values = spec.values();
    let mut result = SweepResult {
        axis: spec.axis,
        lambda: m.lambda,
        coupling: m.coupling,
        anchor: None,
        dips: Vec::new(),
        blowup_exponent: None,
        rows: Vec::new(),
    };
    let k = m.model.channels();
    let sigma_of = |t0: &CMat| -> f64 {
        let a = m.j.matrix() * num_complex::Complex64::new(m.coupling, 0.0);
        matkit::smallest_singular(&(CMat::identity(k, k) + t0 * a))
    };
    let mut status = Status::Ok;

    match spec.axis {
        Axis::Lambda => {
            let op = CoupledOperator::new(m.model.clone(), m.j.clone(), m.coupling)?;
            let base = CoupledOperator::new(m.model.clone(), Direction::zeros(k), 0.0)?;
            result.rows = values
                .par_iter()
                .map(|&lambda| {
                    let coupled = perturb::coupled_boundary_limit(&op, lambda, &cfg.grid, tol).ok();
                    let value = coupled.as_ref().and_then(BoundaryLimit::value);
                    let (t_norm, im_min_eig) = value.map_or((None, None), describe);
                    let sigma_min = perturb::coupled_boundary_limit(&base, lambda, &cfg.grid, tol)
                        .ok()
                        .and_then(|l| l.value().map(&sigma_of));
                    GridRow {
                        value: lambda,
                        t_norm,
                        im_min_eig,
                        sigma_min,
                        converged: value.is_some(),
                        near_resonance: sigma_min.is_some_and(|s| s < tol.dip),
                    }
                })
                .collect();
        }
        Axis::Y => {
            let op = CoupledOperator::new(m.model.clone(), m.j.clone(), m.coupling)?;
            result.rows = values
                .par_iter()
                .map(|&y| {
                    let point = HalfPlanePoint::new(m.lambda, y).ok();
                    let t = point.and_then(|p| perturb::coupled_t(&op, p).ok());
                    let (t_norm, im_min_eig) = t.as_ref().map_or((None, None), |t| describe(&t.value));
                    let sigma_min = point
                        .and_then(|p| m.model.sandwiched_resolvent(p).ok())
                        .map(|t0| sigma_of(&t0.value));
                    GridRow {
                        value: y,
                        t_norm,
                        im_min_eig,
                        sigma_min,
                        converged: t.is_some(),
                        near_resonance: sigma_min.is_some_and(|s| s < tol.dip),
                    }
                })
                .collect();
            let trace: Vec<(f64, f64)> = result
                .rows
                .iter()
                .filter_map(|r| r.t_norm.map(|n| (r.value, n)))
                .collect();
            result.blowup_exponent = Some(lap::fit_blowup_exponent(&trace));
        }
        Axis::R | Axis::T => {
            let dir = if spec.axis == Axis::R {
                m.j.clone()
            } else {
                Direction::identity(k)
            };
            let verdict = perturb::regular_direction(&m.model, m.lambda, &dir, cfg)?;
            match verdict.witness() {
                Some((r0, t0)) => {
                    let tj = t0 * dir.matrix();
                    let base = SandwichedResolvent {
                        value: t0.clone(),
                        point: HalfPlanePoint::boundary(m.lambda),
                    };
                    result.anchor = Some(r0);
                    result.rows = values
                        .par_iter()
                        .map(|&r| {
                            let sigma = perturb::criterion_sigma(&tj, r0, r);
                            let t = perturb::perturbed_resolvent_with(&base, &dir.hermitian().scale(r - r0), tol).ok();
                            let (t_norm, im_min_eig) = t.as_ref().map_or((None, None), |t| describe(&t.value));
                            GridRow {
                                value: r,
                                t_norm,
                                im_min_eig,
                                sigma_min: Some(sigma),
                                converged: t.is_some(),
                                near_resonance: sigma < tol.dip,
                            }
                        })
                        .collect();
                    if spec.points > 1 {
                        result.dips = perturb::sigma_dips(&tj, r0, (spec.start, spec.stop), tol);
                    }
                }
                None => {
                    status = Status::Inconclusive;
                    result.rows = values
                        .iter()
                        .map(|&r| GridRow {
                            value: r,
                            t_norm: None,
                            im_min_eig: None,
                            sigma_min: None,
                            converged: false,
                            near_resonance: false,
                        })
                        .collect();
                }
            }
        }
    }
    Ok((status, CommandResult::Sweep(result)))
}
