//! Beginning-pulse optimization: gradient descent with Armijo backtracking
//! on weighted squared susceptibilities.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::SystemModel;
use crate::error::{Error, Result};
use crate::gradients::{evaluate, ScalarFunctional};
use crate::operators::HermitianOp;

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;
const POLISH_ITERS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeginningWeights {
    /// Weight of `sum_j (S1_j)^2`.
    pub w1: f64,
    /// Weight of `sum_j (S2_j)^2`.
    #[serde(default)]
    pub w2: f64,
    /// Weight of `sum_u vartheta_u^2`; only used when undesired axes are given.
    #[serde(default)]
    pub w_undesired: f64,
}

impl Default for BeginningWeights {
    fn default() -> Self {
        BeginningWeights { w1: 1.0, w2: 0.0, w_undesired: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopCriteria {
    /// Stop once every noise axis has `S1 <= s1_target`.
    pub s1_target: f64,
    /// If set, also require `S2 <= s2_target` on every noise axis.
    #[serde(default)]
    pub s2_target: Option<f64>,
    pub max_iters: usize,
    /// With undesired axes, also require every `|vartheta_u| <= undesired_tol`.
    #[serde(default = "default_undesired_tol")]
    pub undesired_tol: f64,
    /// When a step crosses the targets, shorten it so the largest
    /// value-to-target ratio lands in `[land_fraction, 1]` instead of far below.
    /// Level sets at very small `S1` are strongly curved (the norm is not
    /// smooth at zero), which inflates traversal drift. `None` disables it.
    #[serde(default)]
    pub land_fraction: Option<f64>,
}

impl StopCriteria {
    pub fn new(s1_target: f64, max_iters: usize) -> Self {
        StopCriteria {
            s1_target,
            s2_target: None,
            max_iters,
            undesired_tol: default_undesired_tol(),
            land_fraction: None,
        }
    }
}

fn default_undesired_tol() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    pub params: Vec<f64>,
    /// Per-noise `S1` at `params`.
    pub s1: Vec<f64>,
    /// Per-noise `S2` at `params`; empty unless `S2` is weighted or targeted.
    pub s2: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Whether the stop criteria were met (otherwise `params` is best-found).
    pub converged: bool,
}

struct Objective<'a> {
    model: &'a SystemModel,
    fns: Vec<ScalarFunctional>,
    weights: Vec<f64>,
    n_noise: usize,
    n_s2: usize,
    n_undesired: usize,
    nt: usize,
}

struct Point {
    params: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
    s1: Vec<f64>,
    s2: Vec<f64>,
    undesired: Vec<f64>,
}

impl Objective<'_> {
    fn eval(&self, params: &[f64], with_grad: bool) -> Result<Point> {
        let ev = evaluate(self.model, &self.fns, params, self.nt, None, with_grad)?;
        let value = ev.values.iter().zip(&self.weights).map(|(v, w)| w * v * v).sum();
        let mut grad = vec![0.0; params.len()];
        if with_grad {
            for ((v, w), row) in ev.values.iter().zip(&self.weights).zip(&ev.grads) {
                grad.iter_mut().zip(row).for_each(|(g, r)| *g += 2.0 * w * v * r);
            }
        }
        let s1 = ev.values[..self.n_noise].to_vec();
        let s2 = ev.values[self.n_noise..self.n_noise + self.n_s2].to_vec();
        let undesired = ev.values[ev.values.len() - self.n_undesired..].to_vec();
        Ok(Point { params: params.to_vec(), value, grad, s1, s2, undesired })
    }
}

/// Largest `S / target` over the targeted susceptibilities.
fn target_ratio(p: &Point, stop: &StopCriteria) -> f64 {
    let ratio = |v: f64, t: f64| {
        if v <= 0.0 {
            0.0
        } else if t > 0.0 {
            v / t
        } else {
            f64::INFINITY
        }
    };
    let r1 = p.s1.iter().map(|&v| ratio(v, stop.s1_target)).fold(0.0, f64::max);
    match stop.s2_target {
        Some(t2) => p.s2.iter().map(|&v| ratio(v, t2)).fold(r1, f64::max),
        None => r1,
    }
}

/// Bisects the step length along `-grad` for a point whose target ratio
/// lies in `[lo, 1]`, keeping the objective below its value at `x`.
fn land(obj: &Objective, stop: &StopCriteria, x: &Point, step: f64, lo: f64) -> Result<Option<Point>> {
    let (mut a, mut b) = (0.0, step);
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        let trial: Vec<f64> = x.params.iter().zip(&x.grad).map(|(p, g)| p - mid * g).collect();
        let p = obj.eval(&trial, false)?;
        let worst = target_ratio(&p, stop);
        if worst > 1.0 {
            a = mid;
        } else if worst < lo {
            b = mid;
        } else if p.value < x.value {
            return Ok(Some(obj.eval(&trial, true)?));
        } else {
            return Ok(None);
        }
    }
    Ok(None)
}

/// Gauss-Newton steps driving the undesired angles to zero along directions
/// that leave every weighted susceptibility unchanged to first order.
fn polish_undesired(obj: &Objective, x: Point, tol: f64) -> Result<Point> {
    let held = obj.n_noise + obj.n_s2;
    let mut params = x.params.clone();
    for _ in 0..POLISH_ITERS {
        let ev = evaluate(obj.model, &obj.fns, &params, obj.nt, None, true)?;
        if ev.values[held..].iter().all(|v| v.abs() <= tol) {
            break;
        }
        let j = DMatrix::from_fn(obj.fns.len(), params.len(), |r, c| ev.grads[r][c]);
        let rhs = DVector::from_fn(obj.fns.len(), |r, _| if r < held { 0.0 } else { -ev.values[r] });
        let da = j.svd(true, true).solve(&rhs, 1e-12).map_err(Error::invalid)?;
        params.iter_mut().zip(da.iter()).for_each(|(p, d)| *p += d);
    }
    let p = obj.eval(&params, true)?;
    Ok(if p.value.is_finite() { p } else { x })
}

/// Minimizes `w1 sum S1^2 + w2 sum S2^2 (+ w_u sum vartheta^2)` over all noise
/// terms of the model. The gate angle is left free.
pub fn optimize_beginning(
    model: &SystemModel,
    init: &[f64],
    undesired: &[HermitianOp],
    weights: &BeginningWeights,
    stop: &StopCriteria,
    nt: usize,
) -> Result<OptimizeOutcome> {
    model.check_params(init)?;
    if weights.w1 < 0.0 || weights.w2 < 0.0 || weights.w_undesired < 0.0 || weights.w1 + weights.w2 == 0.0 {
        return Err(Error::invalid("objective weights must be non-negative with w1 or w2 positive"));
    }
    if model.noises().is_empty() {
        return Err(Error::invalid("beginning-pulse optimization needs at least one noise term"));
    }
    let mut fns = Vec::new();
    let mut w = Vec::new();
    for n in model.noises() {
        fns.push(ScalarFunctional::S1(n.op.clone()));
        w.push(weights.w1);
    }
    let with_s2 = weights.w2 > 0.0 || stop.s2_target.is_some();
    if with_s2 {
        for n in model.noises() {
            fns.push(ScalarFunctional::S2(n.op.clone()));
            w.push(weights.w2);
        }
    }
    let n_undesired = if weights.w_undesired > 0.0 { undesired.len() } else { 0 };
    for u in &undesired[..n_undesired] {
        fns.push(ScalarFunctional::Undesired(u.clone()));
        w.push(weights.w_undesired);
    }
    let n_noise = model.noises().len();
    let n_s2 = if with_s2 { n_noise } else { 0 };
    let obj = Objective { model, fns, weights: w, n_noise, n_s2, n_undesired, nt };

    let targets_ok = |p: &Point| target_ratio(p, stop) <= 1.0;
    let undesired_ok = |p: &Point| p.undesired.iter().all(|v| v.abs() <= stop.undesired_tol);
    let done = |p: &Point| targets_ok(p) && undesired_ok(p);
    let mut x = obj.eval(init, true)?;
    let mut step = 1.0 / x.grad.iter().map(|g| g * g).sum::<f64>().sqrt().max(1e-300) * 1e-3;
    let mut iters = 0;
    while !done(&x) {
        if iters >= stop.max_iters {
            return Ok(OptimizeOutcome {
                s1: x.s1,
                s2: x.s2,
                params: x.params,
                objective: x.value,
                iterations: iters,
                converged: false,
            });
        }
        iters += 1;
        let g2: f64 = x.grad.iter().map(|g| g * g).sum();
        if g2 == 0.0 {
            return Err(Error::NoDescent { iter: iters });
        }
        let mut halvings = 0;
        loop {
            let trial: Vec<f64> = x.params.iter().zip(&x.grad).map(|(p, g)| p - step * g).collect();
            let value = obj.eval(&trial, false)?.value;
            if value <= x.value - ARMIJO_C * step * g2 {
                let next = obj.eval(&trial, true)?;
                x = match stop.land_fraction {
                    Some(frac) if targets_ok(&next) && !targets_ok(&x) => {
                        let landed = land(&obj, stop, &x, step, frac)?.unwrap_or(next);
                        if n_undesired == 0 || undesired_ok(&landed) {
                            landed
                        } else {
                            polish_undesired(&obj, landed, stop.undesired_tol)?
                        }
                    }
                    _ => next,
                };
                step *= 2.0;
                break;
            }
            step *= 0.5;
            halvings += 1;
            if halvings >= MAX_HALVINGS {
                return Err(Error::NoDescent { iter: iters });
            }
        }
        log::debug!("optimize iter {iters}: objective {:.6e}, S1 {:?}", x.value, x.s1);
    }
    Ok(OptimizeOutcome { s1: x.s1, s2: x.s2, params: x.params, objective: x.value, iterations: iters, converged: true })
}
