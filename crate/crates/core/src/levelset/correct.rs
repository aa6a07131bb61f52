//! Optional correcting step: pulls a pulse back onto the level set and the
//! target gate after a linearized variation.

use crate::dynamics::SystemModel;
use crate::error::{Error, Result};
use crate::gradients::{evaluate, ScalarFunctional};
use crate::operators::{mat_exp, trace_inner, HermitianOp, UnitaryOp};

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionOutcome {
    pub params: Vec<f64>,
    pub residual_before: f64,
    pub residual_after: f64,
    pub iterations: usize,
}

/// `U(theta) = exp(-i theta sigma / Tr(sigma^dag sigma))`, so that the angle
/// read back on `sigma` is `theta`.
pub fn target_gate(axis: &HermitianOp, theta: f64) -> UnitaryOp {
    let norm2 = trace_inner(axis.matrix(), axis.matrix()).re;
    mat_exp(axis, theta / norm2)
}

/// Gradient descent with Armijo backtracking on
/// `(1 - F(U(T), U(theta_target)))^2 + sum_i (R_i - R_i*)^2`.
/// Never returns a point with a larger residual than the entry point.
#[allow(clippy::too_many_arguments)]
pub fn correcting_step(
    model: &SystemModel,
    params: &[f64],
    axis: &HermitianOp,
    theta_target: f64,
    constraints: &[ScalarFunctional],
    targets: &[f64],
    max_inner: usize,
    nt: usize,
) -> Result<CorrectionOutcome> {
    if constraints.len() != targets.len() {
        return Err(Error::invalid("one target per constraint is required"));
    }
    let mut fns = vec![ScalarFunctional::Fidelity(target_gate(axis, theta_target))];
    fns.extend_from_slice(constraints);
    let residual = |p: &[f64], with_grad: bool| -> Result<(f64, Vec<f64>)> {
        let ev = evaluate(model, &fns, p, nt, None, with_grad)?;
        let mut r = vec![1.0 - ev.values[0]];
        r.extend(ev.values[1..].iter().zip(targets).map(|(v, t)| v - t));
        let value = r.iter().map(|x| x * x).sum();
        let mut grad = vec![0.0; p.len()];
        if with_grad {
            // d(1 - F) = -dF for the first residual.
            for (i, row) in ev.grads.iter().enumerate() {
                let coeff = if i == 0 { -2.0 * r[0] } else { 2.0 * r[i] };
                grad.iter_mut().zip(row).for_each(|(g, x)| *g += coeff * x);
            }
        }
        Ok((value, grad))
    };

    let (before, mut grad) = residual(params, true)?;
    let mut x = params.to_vec();
    let mut fx = before;
    let mut step = 1.0;
    let mut iterations = 0;
    while iterations < max_inner {
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        if g2 == 0.0 || fx == 0.0 {
            break;
        }
        if iterations == 0 {
            step = (fx / g2).min(1.0);
        }
        iterations += 1;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
            let (ft, _) = residual(&trial, false)?;
            if ft <= fx - ARMIJO_C * step * g2 {
                x = trial;
                let (v, g) = residual(&x, true)?;
                fx = v;
                grad = g;
                step *= 2.0;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(CorrectionOutcome { params: x, residual_before: before, residual_after: fx, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradients::values;
    use crate::models::{default_basis, preset};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (crate::models::Preset, Vec<f64>, f64, Vec<ScalarFunctional>, Vec<f64>) {
        let p = preset("sq_x_z", &default_basis()).unwrap();
        let a = vec![0.07, 0.01, -0.02, 0.015, 0.005, 0.4, -0.8, 1.3, 2.1];
        let cons = vec![ScalarFunctional::S1(p.model.noises()[0].op.clone())];
        let mut fns = vec![ScalarFunctional::Theta(p.axis.clone())];
        fns.extend(cons.iter().cloned());
        let v = values(&p.model, &fns, &a, 512, None).unwrap().values;
        (p, a, v[0], cons, v[1..].to_vec())
    }

    #[test]
    fn target_gate_reads_back_angle() {
        let axis = crate::models::xy_generator();
        let u = target_gate(&axis, 0.7);
        let th = crate::dynamics::rotation_angles(&u, &axis, &[], None).unwrap().theta;
        assert!((th - 0.7).abs() < 1e-12);
    }

    #[test]
    fn on_level_set_is_unchanged() {
        let (p, a, theta, cons, targets) = setup();
        let out = correcting_step(&p.model, &a, &p.axis, theta, &cons, &targets, 50, 512).unwrap();
        assert!(out.residual_before < 1e-20, "{}", out.residual_before);
        let moved = out.params.iter().zip(&a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(moved < 1e-12, "{moved}");
    }

    #[test]
    fn perturbed_residual_drops_tenfold() {
        let (p, a, theta, cons, targets) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let pert: Vec<f64> = a.iter().map(|x| x + 1e-3 * rng.random_range(-1.0..1.0)).collect();
            let out = correcting_step(&p.model, &pert, &p.axis, theta, &cons, &targets, 200, 512).unwrap();
            assert!(
                out.residual_after * 10.0 <= out.residual_before,
                "{} -> {}",
                out.residual_before,
                out.residual_after
            );
        }
    }

    #[test]
    fn mismatched_targets_rejected() {
        let (p, a, theta, cons, _) = setup();
        assert!(correcting_step(&p.model, &a, &p.axis, theta, &cons, &[], 5, 512).is_err());
    }
}
