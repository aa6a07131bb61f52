//! Forward-sensitivity gradients of scalar functionals of the stepped
//! propagator with respect to the flat pulse parameter vector.
//!
//! Each step exponential is differentiated exactly (Daleckii-Krein form in
//! the step Hamiltonian's eigenbasis), so the gradients are those of the
//! discretized functionals, not of their continuum limits.

use serde::{Deserialize, Serialize};

use crate::dynamics::{SystemModel, MIN_NT};
use crate::error::{Error, Result};
use crate::operators::{check_dims, eigh, trace_inner, unitary_log, CMatrix, HermitianOp, UnitaryOp, C64};

/// A scalar quantity of the final propagator or its noise response.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarFunctional {
    /// `theta = Tr(eta^dag sigma)` on the desired axis.
    Theta(HermitianOp),
    /// Undesired rotation `Tr(eta^dag varsigma)`.
    Undesired(HermitianOp),
    /// Frobenius `S1` at unit noise for the given noise operator.
    S1(HermitianOp),
    /// Frobenius `S2` at unit noise.
    S2(HermitianOp),
    /// `|Tr(G^dag U(T))| / d` against a target gate.
    Fidelity(UnitaryOp),
}

/// Serializable name of a functional, as written into traversal records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    Theta,
    Undesired,
    S1,
    S2,
    Fidelity,
}

impl ScalarFunctional {
    pub fn kind(&self) -> FunctionalKind {
        match self {
            ScalarFunctional::Theta(_) => FunctionalKind::Theta,
            ScalarFunctional::Undesired(_) => FunctionalKind::Undesired,
            ScalarFunctional::S1(_) => FunctionalKind::S1,
            ScalarFunctional::S2(_) => FunctionalKind::S2,
            ScalarFunctional::Fidelity(_) => FunctionalKind::Fidelity,
        }
    }

    fn operator_dim(&self) -> usize {
        match self {
            ScalarFunctional::Theta(op) | ScalarFunctional::Undesired(op) => op.dim(),
            ScalarFunctional::S1(op) | ScalarFunctional::S2(op) => op.dim(),
            ScalarFunctional::Fidelity(g) => g.dim(),
        }
    }
}

/// Values and (optionally) gradients of a list of functionals at one point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub values: Vec<f64>,
    /// Row `i` is the gradient of functional `i`; empty when not requested.
    pub grads: Vec<Vec<f64>>,
    pub final_unitary: UnitaryOp,
    /// Generator `eta` used by the angle functionals, if any were requested.
    pub eta: Option<HermitianOp>,
}

/// Per-noise accumulators for `M1`, `M2` and their parameter derivatives.
struct NoiseAccumulator {
    op: CMatrix,
    want_s2: bool,
    m1: CMatrix,
    m2: CMatrix,
    cumulative: CMatrix,
    dm1: Vec<CMatrix>,
    dm2: Vec<CMatrix>,
    dcumulative: Vec<CMatrix>,
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Evaluates `fns` at `params`, with gradients when `with_grad` is set.
///
/// `branch_hint` selects the logarithm branch for the angle functionals;
/// pass the previous generator along a traversal.
pub fn evaluate(
    model: &SystemModel,
    fns: &[ScalarFunctional],
    params: &[f64],
    nt: usize,
    branch_hint: Option<&HermitianOp>,
    with_grad: bool,
) -> Result<Evaluation> {
    model.check_params(params)?;
    if nt < MIN_NT {
        return Err(Error::invalid(format!("Nt must be at least {MIN_NT}, got {nt}")));
    }
    let d = model.dim();
    for f in fns {
        check_dims(d, f.operator_dim())?;
    }
    let n = if with_grad { model.n_params() } else { 0 };
    let dt = model.gate_time() / nt as f64;
    let zero = CMatrix::zeros(d, d);

    // Noise operators, deduplicated so S1 and S2 of one noise share work.
    let mut noise_slot = vec![usize::MAX; fns.len()];
    let mut acc: Vec<NoiseAccumulator> = Vec::new();
    for (i, f) in fns.iter().enumerate() {
        let (op, is_s2) = match f {
            ScalarFunctional::S1(op) => (op, false),
            ScalarFunctional::S2(op) => (op, true),
            _ => continue,
        };
        let slot = match acc.iter().position(|a| &a.op == op.matrix()) {
            Some(s) => s,
            None => {
                acc.push(NoiseAccumulator {
                    op: op.matrix().clone(),
                    want_s2: false,
                    m1: zero.clone(),
                    m2: zero.clone(),
                    cumulative: zero.clone(),
                    dm1: vec![zero.clone(); n],
                    dm2: vec![zero.clone(); n],
                    dcumulative: vec![zero.clone(); n],
                });
                acc.len() - 1
            }
        };
        acc[slot].want_s2 |= is_s2;
        noise_slot[i] = slot;
    }

    let controls = model.controls();
    let owner: Vec<usize> = (0..controls.len()).flat_map(|c| model.param_range(c).map(move |_| c)).collect();
    let mut u = CMatrix::identity(d, d);
    let mut du = vec![zero.clone(); n];
    let mut dw = vec![zero.clone(); n];
    let mut pulse_grad: Vec<Vec<f64>> = controls.iter().map(|c| vec![0.0; c.basis.arity()]).collect();

    for k in 0..nt {
        let t = (k as f64 + 0.5) * dt;
        let h = model.hamiltonian(params, t);
        let eig = eigh(&h);
        let v = eig.exp(0.5 * dt);
        let w = &v * &u;

        if with_grad {
            // d/dA_j of the half-step exponential is g_j(t) F_c with F_c the
            // Frechet derivative along the owning control's operator.
            let frechet: Vec<CMatrix> = controls.iter().map(|c| eig.exp_frechet(0.5 * dt, c.op.matrix())).collect();
            let fu: Vec<CMatrix> = frechet.iter().map(|f| f * &u).collect();
            for (c, ctrl) in controls.iter().enumerate() {
                let range = model.param_range(c);
                ctrl.basis.gradient_into(&params[range], t, &mut pulse_grad[c]);
            }
            for j in 0..n {
                let c = owner[j];
                let g = pulse_grad[c][j - model.param_range(c).start];
                dw[j] = &fu[c] * real(g) + &v * &du[j];
            }
            let fw: Vec<CMatrix> = frechet.iter().map(|f| f * &w).collect();
            for j in 0..n {
                let c = owner[j];
                let g = pulse_grad[c][j - model.param_range(c).start];
                du[j] = &fw[c] * real(g) + &v * &dw[j];
            }
        }

        let w_adj = w.adjoint();
        for a in acc.iter_mut() {
            let left = &w_adj * &a.op;
            let sample = &left * &w;
            if a.want_s2 {
                a.m2 += &sample * &a.cumulative - &a.cumulative * &sample;
            }
            for j in 0..n {
                let x = &left * &dw[j];
                let dsample = &x + x.adjoint();
                a.dm1[j] += &dsample;
                if a.want_s2 {
                    a.dm2[j] += &dsample * &a.cumulative - &a.cumulative * &dsample + &sample * &a.dcumulative[j]
                        - &a.dcumulative[j] * &sample;
                    a.dcumulative[j] += dsample;
                }
            }
            a.m1 += &sample;
            a.cumulative += sample;
        }
        u = &v * &w;
    }

    let final_unitary = UnitaryOp::from_unitary(u.clone());
    let needs_log = fns.iter().any(|f| matches!(f, ScalarFunctional::Theta(_) | ScalarFunctional::Undesired(_)));
    let log = if needs_log { Some(unitary_log(&final_unitary, branch_hint)?) } else { None };
    let deta: Vec<CMatrix> = match &log {
        Some(l) => du.iter().map(|x| l.derivative(x)).collect(),
        None => Vec::new(),
    };

    let mut values = Vec::with_capacity(fns.len());
    let mut grads = Vec::with_capacity(if with_grad { fns.len() } else { 0 });
    for (i, f) in fns.iter().enumerate() {
        let (value, grad): (f64, Vec<f64>) = match f {
            ScalarFunctional::Theta(axis) | ScalarFunctional::Undesired(axis) => {
                let eta = &log.as_ref().expect("log computed for angle functionals").generator;
                let value = trace_inner(eta.matrix(), axis.matrix()).re;
                (value, deta.iter().map(|de| trace_inner(de, axis.matrix()).re).collect())
            }
            ScalarFunctional::S1(_) | ScalarFunctional::S2(_) => {
                let a = &acc[noise_slot[i]];
                let (m, dm, scale) =
                    if matches!(f, ScalarFunctional::S1(_)) { (&a.m1, &a.dm1, dt) } else { (&a.m2, &a.dm2, dt * dt) };
                let raw = m.norm();
                let grad = if raw == 0.0 {
                    vec![0.0; n]
                } else {
                    dm.iter().map(|x| scale * trace_inner(m, x).re / raw).collect()
                };
                (scale * raw, grad)
            }
            ScalarFunctional::Fidelity(g) => {
                let z = trace_inner(g.matrix(), &u);
                let value = z.norm() / d as f64;
                let grad = if z.norm() == 0.0 {
                    vec![0.0; n]
                } else {
                    du.iter().map(|x| (z.conj() * trace_inner(g.matrix(), x)).re / (z.norm() * d as f64)).collect()
                };
                (value, grad)
            }
        };
        values.push(value);
        if with_grad {
            grads.push(grad);
        }
    }
    Ok(Evaluation { values, grads, final_unitary, eta: log.map(|l| l.generator) })
}

/// Values of `fns` without gradients.
pub fn values(
    model: &SystemModel,
    fns: &[ScalarFunctional],
    params: &[f64],
    nt: usize,
    branch_hint: Option<&HermitianOp>,
) -> Result<Evaluation> {
    evaluate(model, fns, params, nt, branch_hint, false)
}

/// Gradients of several functionals from one sensitivity pass; row `i`
/// belongs to `fns[i]`.
pub fn grad_bundle(
    model: &SystemModel,
    fns: &[ScalarFunctional],
    params: &[f64],
    nt: usize,
    branch_hint: Option<&HermitianOp>,
) -> Result<Vec<Vec<f64>>> {
    Ok(evaluate(model, fns, params, nt, branch_hint, true)?.grads)
}

pub fn grad(
    model: &SystemModel,
    f: &ScalarFunctional,
    params: &[f64],
    nt: usize,
    branch_hint: Option<&HermitianOp>,
) -> Result<Vec<f64>> {
    Ok(grad_bundle(model, std::slice::from_ref(f), params, nt, branch_hint)?.remove(0))
}
