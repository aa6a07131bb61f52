//! Infidelity sweeps over quasi-static noise strengths.

use rayon::prelude::*;

use crate::dynamics::{noisy_propagate, propagate, SystemModel};
use crate::error::Result;
use crate::operators::gate_fidelity;

/// One pulse to sweep.
#[derive(Debug, Clone)]
pub struct SweepPulse {
    pub index: usize,
    pub theta: f64,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub theta: f64,
    /// Noise term the strength is applied to (all others are zero).
    pub noise: String,
    /// `delta / Omega_m`, signed.
    pub delta_rel: f64,
    /// `1 - F(U_sc(T), U_scn(T))`, clamped to `[0, 1]`.
    pub infidelity: f64,
}

/// Largest `|Omega_k(t)|` over all controls.
pub fn max_amplitude(model: &SystemModel, params: &[f64]) -> f64 {
    model.controls().iter().zip(model.split_params(params)).map(|(c, p)| c.basis.max_amplitude(p)).fold(0.0, f64::max)
}

/// Rows ordered by pulse, then noise term, then `delta_rel` as given.
/// Every `(pulse, noise, delta)` cell is computed independently in parallel.
pub fn infidelity_sweep(model: &SystemModel, pulses: &[SweepPulse], grid: &[f64], nt: usize) -> Result<Vec<SweepRow>> {
    let n_noise = model.noises().len();
    let prepared: Vec<_> = pulses
        .par_iter()
        .map(|p| -> Result<_> {
            let ideal = propagate(model, &p.params, nt)?.final_unitary();
            Ok((ideal, max_amplitude(model, &p.params)))
        })
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, usize, f64)> =
        (0..pulses.len()).flat_map(|i| (0..n_noise).flat_map(move |j| grid.iter().map(move |&d| (i, j, d)))).collect();
    cells
        .par_iter()
        .map(|&(i, j, rel)| {
            let p = &pulses[i];
            let (ideal, omega_m) = &prepared[i];
            let mut deltas = vec![0.0; n_noise];
            deltas[j] = rel * omega_m;
            let noisy = noisy_propagate(model, &p.params, &deltas, nt)?;
            let f = gate_fidelity(ideal, &noisy)?;
            Ok(SweepRow {
                index: p.index,
                theta: p.theta,
                noise: model.noises()[j].label.clone(),
                delta_rel: rel,
                infidelity: (1.0 - f).clamp(0.0, 1.0),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{default_basis, preset};

    #[test]
    fn zero_noise_is_exact_and_signs_mirror() {
        let p = preset("sq_x_z", &default_basis()).unwrap();
        let mut a = vec![0.0; 9];
        a[0] = std::f64::consts::PI.powi(2) / 100.0;
        let pulses = [SweepPulse { index: 0, theta: std::f64::consts::PI, params: a }];
        let grid = [-0.1, -0.01, 0.0, 0.01, 0.1];
        let rows = infidelity_sweep(&p.model, &pulses, &grid, 512).unwrap();
        assert_eq!(rows.len(), 5);
        assert!(rows[2].infidelity <= 1e-9);
        assert!((rows[0].infidelity - rows[4].infidelity).abs() <= 1e-10);
        assert!((rows[1].infidelity - rows[3].infidelity).abs() <= 1e-10);
        assert!(rows[4].infidelity > rows[3].infidelity);
    }
}
