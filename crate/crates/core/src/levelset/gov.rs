//! Gradient orthogonal variation: a parameter step orthogonal to every
//! constraint gradient that advances the gate angle by a prescribed amount.

use crate::error::{Error, Result};

/// Constraint gradients whose Gram-Schmidt residual falls below this
/// fraction of their own norm are treated as dependent and dropped.
pub const RANK_TOL: f64 = 1e-10;
pub const DEFAULT_EPS_IRR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GovStep {
    pub da: Vec<f64>,
    /// `max_i |<dA, g_i>| / (|dA| |g_i|)` over all supplied constraint gradients.
    pub ortho_residual: f64,
    /// Number of constraint gradients kept after the rank test.
    pub rank: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Removes the components of `v` along the orthonormal `basis`, twice for
/// numerical orthogonality.
fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(v, q);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
    }
}

pub fn gov_step(grad_theta: &[f64], constraint_grads: &[Vec<f64>], dtheta: f64, eps_irr: f64) -> Result<GovStep> {
    let n = grad_theta.len();
    let m = constraint_grads.len();
    if let Some(g) = constraint_grads.iter().find(|g| g.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: g.len() });
    }
    if n < m + 2 {
        return Err(Error::invalid(format!("{m} constraints need at least {} parameters, got {n}", m + 2)));
    }
    if dtheta == 0.0 || !dtheta.is_finite() {
        return Err(Error::invalid("step size must be finite and nonzero"));
    }
    if !(eps_irr > 0.0 && eps_irr < 1.0) {
        return Err(Error::invalid("irregularity tolerance must lie in (0, 1)"));
    }

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    for g in constraint_grads {
        let g_norm = norm(g);
        let mut v = g.clone();
        project_out(&mut v, &basis);
        let v_norm = norm(&v);
        if g_norm > 0.0 && v_norm >= RANK_TOL * g_norm {
            basis.push(v.into_iter().map(|x| x / v_norm).collect());
        }
    }

    let theta_norm = norm(grad_theta);
    let mut pre = grad_theta.to_vec();
    project_out(&mut pre, &basis);
    let pre_norm = norm(&pre);
    if theta_norm == 0.0 || pre_norm < eps_irr * theta_norm {
        let ratio = if theta_norm == 0.0 { 0.0 } else { pre_norm / theta_norm };
        return Err(Error::IrregularPoint { index: 0, ratio });
    }

    let scale = dtheta / dot(&pre, grad_theta);
    let da: Vec<f64> = pre.iter().map(|x| scale * x).collect();
    let da_norm = norm(&da);
    let ortho_residual = constraint_grads
        .iter()
        .map(|g| {
            let gn = norm(g);
            if gn == 0.0 {
                0.0
            } else {
                dot(&da, g).abs() / (da_norm * gn)
            }
        })
        .fold(0.0, f64::max);
    Ok(GovStep { da, ortho_residual, rank: basis.len() })
}
