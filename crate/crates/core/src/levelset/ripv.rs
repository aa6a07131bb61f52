//! Robustness-invariant pulse variation: repeated GOV steps that walk the
//! gate angle across a range while holding the constraint values fixed.

use serde::{Deserialize, Serialize};

use crate::dynamics::SystemModel;
use crate::error::{Error, Result};
use crate::gradients::{evaluate, Evaluation, ScalarFunctional};
use crate::levelset::correct::correcting_step;
use crate::levelset::gov::{gov_step, DEFAULT_EPS_IRR};
use crate::operators::HermitianOp;

/// A functional held at its beginning-pulse value.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub label: String,
    pub functional: ScalarFunctional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Correction {
    #[default]
    Off,
    On {
        max_inner: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraversalConfig {
    /// Ideal angle advance per step; only its magnitude is used, the
    /// direction of each pass follows from the range.
    pub dtheta: f64,
    /// `[theta_L, theta_R]`.
    pub theta_range: [f64; 2],
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_eps_irr")]
    pub eps_irr: f64,
    /// Allowed `|dtheta_measured - dtheta| / |dtheta|`.
    #[serde(default = "default_step_tol")]
    pub step_tol: f64,
    #[serde(default)]
    pub correction: Correction,
}

fn default_max_iters() -> usize {
    100_000
}

fn default_eps_irr() -> f64 {
    DEFAULT_EPS_IRR
}

fn default_step_tol() -> f64 {
    0.1
}

impl TraversalConfig {
    pub fn new(dtheta: f64, theta_range: [f64; 2]) -> Self {
        TraversalConfig {
            dtheta,
            theta_range,
            max_iters: default_max_iters(),
            eps_irr: default_eps_irr(),
            step_tol: default_step_tol(),
            correction: Correction::Off,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dtheta == 0.0 || !self.dtheta.is_finite() {
            return Err(Error::invalid("dtheta must be finite and nonzero"));
        }
        if !(self.eps_irr > 0.0 && self.eps_irr < 1.0) {
            return Err(Error::invalid("eps_irr must lie in (0, 1)"));
        }
        if self.theta_range[0] > self.theta_range[1] {
            return Err(Error::invalid("theta_range must be ordered [lo, hi]"));
        }
        if self.step_tol.is_nan() || self.step_tol <= 0.0 {
            return Err(Error::invalid("step_tol must be positive"));
        }
        Ok(())
    }
}

/// What a traversal walks: the model, the gate axis, the held constraints and
/// the quantities reported in every record.
#[derive(Debug, Clone)]
pub struct TraversalProblem<'a> {
    pub model: &'a SystemModel,
    pub axis: HermitianOp,
    /// Undesired axes reported in every record (and constrained only if they
    /// also appear in `constraints`).
    pub undesired: Vec<HermitianOp>,
    pub constraints: Vec<Constraint>,
    pub nt: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraversalRecord {
    pub index: usize,
    pub theta: f64,
    /// Flat parameter vector (all controls concatenated).
    pub params: Vec<f64>,
    pub constraint_values: Vec<f64>,
    /// `S1` per model noise axis.
    pub s1: Vec<f64>,
    /// `S2` per model noise axis.
    pub s2: Vec<f64>,
    pub undesired: Vec<f64>,
    /// Angle change from the previous record of the same pass (0 for the beginning record).
    pub dtheta_measured: f64,
    /// Orthogonality residual of the step that produced this record.
    pub ortho_residual: f64,
}

#[derive(Debug, Clone)]
pub struct Traversal {
    /// Sorted by increasing `theta`, reindexed from 0.
    pub records: Vec<TraversalRecord>,
    pub constraint_labels: Vec<String>,
    pub targets: Vec<f64>,
    pub theta0: f64,
}

impl Traversal {
    /// `(min, max)` of each constraint over the run.
    pub fn constraint_ranges(&self) -> Vec<(f64, f64)> {
        (0..self.targets.len())
            .map(|i| {
                self.records
                    .iter()
                    .map(|r| r.constraint_values[i])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
            })
            .collect()
    }
}

/// A failed traversal with everything recorded before the failure.
#[derive(Debug, Clone)]
pub struct TraversalError {
    pub source: Error,
    pub records: Vec<TraversalRecord>,
}

impl std::fmt::Display for TraversalError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} records)", self.source, self.records.len())
    }
}

impl std::error::Error for TraversalError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

struct Walker<'p, 'a> {
    problem: &'p TraversalProblem<'a>,
    cfg: &'p TraversalConfig,
    fns: Vec<ScalarFunctional>,
    report: Vec<ScalarFunctional>,
    targets: Vec<f64>,
    iterations: usize,
}

impl Walker<'_, '_> {
    fn eval(&self, params: &[f64], hint: Option<&HermitianOp>) -> Result<Evaluation> {
        evaluate(self.problem.model, &self.fns, params, self.problem.nt, hint, true)
    }

    fn record(
        &self,
        index: usize,
        ev: &Evaluation,
        params: &[f64],
        dtheta: f64,
        ortho: f64,
    ) -> Result<TraversalRecord> {
        let values =
            evaluate(self.problem.model, &self.report, params, self.problem.nt, ev.eta.as_ref(), false)?.values;
        let k = self.problem.model.noises().len();
        Ok(TraversalRecord {
            index,
            theta: ev.values[0],
            params: params.to_vec(),
            constraint_values: ev.values[1..].to_vec(),
            s1: values[..k].to_vec(),
            s2: values[k..2 * k].to_vec(),
            undesired: values[2 * k..].to_vec(),
            dtheta_measured: dtheta,
            ortho_residual: ortho,
        })
    }

    /// Walks from the beginning point towards `stop` in steps of `step`,
    /// appending to `out` (the beginning record is not included).
    fn pass(
        &mut self,
        start: &Evaluation,
        params0: &[f64],
        stop: f64,
        step: f64,
        out: &mut Vec<TraversalRecord>,
    ) -> Result<()> {
        let mut ev = start.clone();
        let mut params = params0.to_vec();
        let slack = 1e-9 * step.abs();
        loop {
            let theta = ev.values[0];
            let next = theta + step;
            if (step > 0.0 && next > stop + slack) || (step < 0.0 && next < stop - slack) {
                return Ok(());
            }
            if self.iterations >= self.cfg.max_iters {
                return Err(Error::MaxItersExceeded(self.cfg.max_iters));
            }
            self.iterations += 1;
            let gov = gov_step(&ev.grads[0], &ev.grads[1..], step, self.cfg.eps_irr).map_err(|e| match e {
                Error::IrregularPoint { ratio, .. } => Error::IrregularPoint { index: out.len(), ratio },
                other => other,
            })?;
            let mut candidate: Vec<f64> = params.iter().zip(&gov.da).map(|(a, d)| a + d).collect();
            if let Correction::On { max_inner } = self.cfg.correction {
                let constraints: Vec<ScalarFunctional> = self.fns[1..].to_vec();
                candidate = correcting_step(
                    self.problem.model,
                    &candidate,
                    &self.problem.axis,
                    next,
                    &constraints,
                    &self.targets,
                    max_inner,
                    self.problem.nt,
                )?
                .params;
            }
            let new_ev = self.eval(&candidate, ev.eta.as_ref())?;
            let measured = new_ev.values[0] - theta;
            if (measured - step).abs() > self.cfg.step_tol * step.abs() {
                return Err(Error::StepDeviation { index: out.len() + 1, measured, ideal: step });
            }
            out.push(self.record(out.len() + 1, &new_ev, &candidate, measured, gov.ortho_residual)?);
            ev = new_ev;
            params = candidate;
        }
    }
}

/// Runs the traversal from `params0`, whose constraint values become the
/// targets, until the gate angle covers `cfg.theta_range`.
///
/// From an interior starting angle two passes are made (down to `theta_L`,
/// then up to `theta_R`) and stitched; records are trimmed to the range.
pub fn ripv_run(
    problem: &TraversalProblem,
    params0: &[f64],
    cfg: &TraversalConfig,
) -> Result<Traversal, TraversalError> {
    let fail = |source: Error| TraversalError { source, records: Vec::new() };
    cfg.validate().map_err(fail)?;
    problem.model.check_params(params0).map_err(fail)?;
    let n = problem.model.n_params();
    let m = problem.constraints.len();
    if n < m + 2 {
        return Err(fail(Error::invalid(format!("{m} constraints need at least {} parameters, got {n}", m + 2))));
    }

    let mut fns = vec![ScalarFunctional::Theta(problem.axis.clone())];
    fns.extend(problem.constraints.iter().map(|c| c.functional.clone()));
    let mut report: Vec<ScalarFunctional> =
        problem.model.noises().iter().map(|n| ScalarFunctional::S1(n.op.clone())).collect();
    report.extend(problem.model.noises().iter().map(|n| ScalarFunctional::S2(n.op.clone())));
    report.extend(problem.undesired.iter().cloned().map(ScalarFunctional::Undesired));

    let mut walker = Walker { problem, cfg, fns, report, targets: Vec::new(), iterations: 0 };
    let start = walker.eval(params0, None).map_err(fail)?;
    walker.targets = start.values[1..].to_vec();
    let beginning = walker.record(0, &start, params0, 0.0, 0.0).map_err(fail)?;
    let theta0 = beginning.theta;
    let [lo, hi] = cfg.theta_range;
    let step = cfg.dtheta.abs();

    let finish = |mut records: Vec<TraversalRecord>| {
        records.sort_by(|a, b| a.theta.total_cmp(&b.theta));
        for (i, r) in records.iter_mut().enumerate() {
            r.index = i;
        }
        records
    };

    if lo == hi {
        return Ok(Traversal {
            records: vec![beginning],
            constraint_labels: problem.constraints.iter().map(|c| c.label.clone()).collect(),
            targets: walker.targets,
            theta0,
        });
    }

    let mut down = Vec::new();
    let mut up = Vec::new();
    let mut result = Ok(());
    if theta0 > lo {
        result = walker.pass(&start, params0, lo, -step, &mut down);
    }
    if result.is_ok() && theta0 < hi {
        result = walker.pass(&start, params0, hi, step, &mut up);
    }
    let mut records = down;
    records.push(beginning);
    records.extend(up);
    let tol = 1e-9 * step;
    let in_range = |r: &TraversalRecord| r.theta >= lo - tol && r.theta <= hi + tol;
    if let Err(source) = result {
        return Err(TraversalError { source, records: finish(records) });
    }
    let records = finish(records.into_iter().filter(in_range).collect());
    Ok(Traversal {
        records,
        constraint_labels: problem.constraints.iter().map(|c| c.label.clone()).collect(),
        targets: walker.targets,
        theta0,
    })
}
