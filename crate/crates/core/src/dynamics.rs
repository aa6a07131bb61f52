//! Time-ordered propagation, interaction-picture noise and rotation-angle
//! extraction.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::operators::{check_dims, eigh, pauli_project, unitary_log, CMatrix, HermitianOp, UnitaryOp, C64};
use crate::pulses::PulseBasis;

pub const DEFAULT_NT: usize = 1024;
pub const MIN_NT: usize = 16;

#[derive(Debug, Clone)]
pub struct ControlTerm {
    pub op: HermitianOp,
    pub basis: PulseBasis,
}

#[derive(Debug, Clone)]
pub struct NoiseTerm {
    pub op: HermitianOp,
    pub label: String,
}

/// `H(t) = H_s + sum_k Omega_k(t; A_k) H_c,k`, plus quasi-static noise terms
/// `sum_j delta_j H_n,j`.
#[derive(Debug, Clone)]
pub struct SystemModel {
    dim: usize,
    drift: HermitianOp,
    controls: Vec<ControlTerm>,
    noises: Vec<NoiseTerm>,
    offsets: Vec<usize>,
}

impl SystemModel {
    pub fn new(drift: HermitianOp, controls: Vec<ControlTerm>, noises: Vec<NoiseTerm>) -> Result<Self> {
        let dim = drift.dim();
        let first = controls.first().ok_or_else(|| Error::invalid("a model needs at least one control"))?;
        let gate_time = first.basis.gate_time();
        for c in &controls {
            check_dims(dim, c.op.dim())?;
            if c.basis.gate_time() != gate_time {
                return Err(Error::invalid("all control bases must share one gate time"));
            }
        }
        for n in &noises {
            check_dims(dim, n.op.dim())?;
        }
        let mut offsets = vec![0];
        for c in &controls {
            offsets.push(offsets.last().unwrap() + c.basis.arity());
        }
        Ok(SystemModel { dim, drift, controls, noises, offsets })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn drift(&self) -> &HermitianOp {
        &self.drift
    }

    pub fn controls(&self) -> &[ControlTerm] {
        &self.controls
    }

    pub fn noises(&self) -> &[NoiseTerm] {
        &self.noises
    }

    pub fn noise(&self, label: &str) -> Option<&NoiseTerm> {
        self.noises.iter().find(|n| n.label == label)
    }

    pub fn gate_time(&self) -> f64 {
        self.controls[0].basis.gate_time()
    }

    /// Total number of parameters across all controls.
    pub fn n_params(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Index range of control `k` inside the flat parameter vector.
    pub fn param_range(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    /// Splits a flat parameter vector into one slice per control.
    pub fn split_params<'a>(&self, params: &'a [f64]) -> Vec<&'a [f64]> {
        (0..self.controls.len()).map(|k| &params[self.param_range(k)]).collect()
    }

    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() == self.n_params() {
            Ok(())
        } else {
            Err(Error::ParamLength { expected: self.n_params(), found: params.len() })
        }
    }

    /// Pulse amplitudes `Omega_k(t)` of every control.
    pub fn amplitudes(&self, params: &[f64], t: f64) -> Vec<f64> {
        self.controls.iter().enumerate().map(|(k, c)| c.basis.eval(&params[self.param_range(k)], t)).collect()
    }

    /// `H(t)` without noise.
    pub fn hamiltonian(&self, params: &[f64], t: f64) -> CMatrix {
        let mut h = self.drift.matrix().clone();
        for (c, omega) in self.controls.iter().zip(self.amplitudes(params, t)) {
            h += c.op.matrix() * C64::new(omega, 0.0);
        }
        h
    }
}

/// Propagator samples on a uniform grid `t_k = k T / Nt`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    gate_time: f64,
    /// `U(t_k)`, `k = 0..=Nt`.
    us: Vec<CMatrix>,
    /// Half-step propagators `exp(-i dt/2 H(t_k + dt/2)) U(t_k)`, `k = 0..Nt`.
    mids: Vec<CMatrix>,
    params: Vec<f64>,
}

impl Trajectory {
    pub fn nt(&self) -> usize {
        self.mids.len()
    }

    pub fn dim(&self) -> usize {
        self.us[0].nrows()
    }

    pub fn gate_time(&self) -> f64 {
        self.gate_time
    }

    pub fn dt(&self) -> f64 {
        self.gate_time / self.nt() as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..=self.nt()).map(|k| k as f64 * dt).collect()
    }

    pub fn unitary(&self, k: usize) -> &CMatrix {
        &self.us[k]
    }

    pub fn unitaries(&self) -> &[CMatrix] {
        &self.us
    }

    pub fn midpoint_unitaries(&self) -> &[CMatrix] {
        &self.mids
    }

    pub fn final_unitary(&self) -> UnitaryOp {
        UnitaryOp::from_unitary(self.us[self.nt()].clone())
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }
}

fn check_nt(nt: usize) -> Result<()> {
    if nt < MIN_NT {
        return Err(Error::invalid(format!("Nt must be at least {MIN_NT}, got {nt}")));
    }
    Ok(())
}

/// Midpoint-rule propagation `U_{k+1} = exp(-i dt H(t_k + dt/2)) U_k`.
pub fn propagate(model: &SystemModel, params: &[f64], nt: usize) -> Result<Trajectory> {
    model.check_params(params)?;
    check_nt(nt)?;
    let tt = model.gate_time();
    let dt = tt / nt as f64;
    let d = model.dim();
    let mut us = Vec::with_capacity(nt + 1);
    let mut mids = Vec::with_capacity(nt);
    us.push(CMatrix::identity(d, d));
    for k in 0..nt {
        let h = model.hamiltonian(params, (k as f64 + 0.5) * dt);
        let eig = eigh(&h);
        let half = eig.exp(0.5 * dt);
        let mid = &half * &us[k];
        us.push(&half * &mid);
        mids.push(mid);
    }
    Ok(Trajectory { gate_time: tt, us, mids, params: params.to_vec() })
}

/// Final propagator under `H + sum_j delta_j H_n,j`.
pub fn noisy_propagate(model: &SystemModel, params: &[f64], deltas: &[f64], nt: usize) -> Result<UnitaryOp> {
    model.check_params(params)?;
    check_nt(nt)?;
    if deltas.len() != model.noises().len() {
        return Err(Error::invalid(format!("expected {} noise strengths, got {}", model.noises().len(), deltas.len())));
    }
    let dt = model.gate_time() / nt as f64;
    let d = model.dim();
    let mut noise = CMatrix::zeros(d, d);
    for (n, delta) in model.noises().iter().zip(deltas) {
        noise += n.op.matrix() * C64::new(*delta, 0.0);
    }
    let mut u = CMatrix::identity(d, d);
    for k in 0..nt {
        let h = model.hamiltonian(params, (k as f64 + 0.5) * dt) + &noise;
        u = eigh(&h).exp(dt) * u;
    }
    Ok(UnitaryOp::from_unitary(u))
}

/// `U_sc^dag H_n0 U_sc` at every grid midpoint.
pub fn interaction_noise(traj: &Trajectory, noise: &HermitianOp) -> Result<Vec<HermitianOp>> {
    check_dims(traj.dim(), noise.dim())?;
    Ok(interaction_samples(traj, noise.matrix()).into_iter().map(HermitianOp::from_hermitian).collect())
}

pub(crate) fn interaction_samples(traj: &Trajectory, noise: &CMatrix) -> Vec<CMatrix> {
    traj.mids.iter().map(|w| w.adjoint() * noise * w).collect()
}

/// Error propagator `U_n^sc(T)`: the time-ordered product of
/// `exp(-i dt delta H_n^sc(t_k + dt/2))`.
pub fn error_propagator(traj: &Trajectory, noise: &HermitianOp, delta: f64) -> Result<UnitaryOp> {
    check_dims(traj.dim(), noise.dim())?;
    let d = traj.dim();
    let dt = traj.dt();
    let mut u = CMatrix::identity(d, d);
    for sample in interaction_samples(traj, noise.matrix()) {
        u = eigh(&(sample * C64::new(delta, 0.0))).exp(dt) * u;
    }
    Ok(UnitaryOp::from_unitary(u))
}

/// Rotation angles read off the generator `eta = i logm U`.
#[derive(Debug, Clone, Serialize)]
pub struct RotationAngles {
    /// `Tr(eta^dag sigma)` on the desired axis.
    pub theta: f64,
    /// `Tr(eta^dag varsigma_j)` on each undesired axis.
    pub undesired: Vec<f64>,
    #[serde(skip)]
    pub eta: HermitianOp,
}

/// `theta = Tr(eta^dag sigma)` and `vartheta_j = Tr(eta^dag varsigma_j)`.
///
/// A single `sigma_x / 2` control of area `a` yields `theta = a` on the axis
/// `sigma_x`. Passing the previous generator as `branch_hint` keeps `theta`
/// continuous past `2 pi`.
pub fn rotation_angles(
    u: &UnitaryOp,
    axis: &HermitianOp,
    undesired: &[HermitianOp],
    branch_hint: Option<&HermitianOp>,
) -> Result<RotationAngles> {
    let eta = unitary_log(u, branch_hint)?.generator;
    let theta = pauli_project(&eta, axis)?;
    let undesired = undesired.iter().map(|s| pauli_project(&eta, s)).collect::<Result<Vec<_>>>()?;
    Ok(RotationAngles { theta, undesired, eta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{gate_fidelity, mat_exp, pauli_x, pauli_y, pauli_z, unitarity_defect};
    use crate::pulses::{BasisKind, PulseBasis};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const T: f64 = 50.0;

    fn x_model(basis: PulseBasis) -> SystemModel {
        SystemModel::new(
            HermitianOp::zeros(2),
            vec![ControlTerm { op: pauli_x().scale(0.5), basis }],
            vec![NoiseTerm { op: pauli_z(), label: "z".into() }],
        )
        .unwrap()
    }

    fn fourier_model() -> SystemModel {
        x_model(PulseBasis::fourier_sin(4, T).unwrap())
    }

    fn random_params(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()
    }

    fn dist(a: &CMatrix, b: &CMatrix) -> f64 {
        (a - b).norm()
    }

    #[test]
    fn zero_pulse_stays_at_identity() {
        let m = fourier_model();
        let traj = propagate(&m, &[0.0; 9], 64).unwrap();
        for u in traj.unitaries() {
            assert_eq!(dist(u, &CMatrix::identity(2, 2)), 0.0);
        }
    }

    #[test]
    fn constant_pulse_is_exact_rotation() {
        let theta = 1.3;
        let m = x_model(PulseBasis::new(BasisKind::PiecewiseConstant { segments: 1 }, T).unwrap());
        let u = propagate(&m, &[theta / T], 100).unwrap().final_unitary();
        let expected = mat_exp(&pauli_x().scale(0.5), theta);
        assert!(dist(u.matrix(), expected.matrix()) < 1e-13);
    }

    #[test]
    fn rejects_short_grids_and_wrong_lengths() {
        let m = fourier_model();
        assert!(propagate(&m, &[0.0; 9], 8).is_err());
        assert_eq!(propagate(&m, &[0.0; 4], 64).unwrap_err(), Error::ParamLength { expected: 9, found: 4 });
        assert!(SystemModel::new(HermitianOp::zeros(2), vec![], vec![]).is_err());
    }

    #[test]
    fn second_order_self_convergence() {
        // A 2 pi baseline amplitude with modest harmonic content.
        let m = fourier_model();
        let a = [PI * PI / T, -0.04, 0.03, 0.02, -0.01, 0.3, -1.0, 2.0, 0.4];
        let reference = propagate(&m, &a, 8192).unwrap().final_unitary().into_matrix();
        let err = |nt| dist(propagate(&m, &a, nt).unwrap().final_unitary().matrix(), &reference);
        let ratio = err(512) / err(1024);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn grid_doubling_matches_leading_error_term() {
        // For a single commuting control the midpoint rule only misses the
        // area, by dt^2/24 (Omega'(T) - Omega'(0)) to leading order. For the
        // 2 pi baseline at T = 50 that is about 1e-5 at Nt = 512, so the
        // 512 -> 1024 change is bounded by the same analytic estimate.
        let m = fourier_model();
        let mut a = [0.0; 9];
        a[0] = PI * PI / T;
        let slope_jump = -2.0 * PI.powi(3) / (T * T);
        let u = |nt: usize| propagate(&m, &a, nt).unwrap().final_unitary().into_matrix();
        let area_err = |nt: usize| (T / nt as f64).powi(2) / 24.0 * slope_jump;
        let predicted = 2f64.sqrt() * 0.5 * (area_err(512) - area_err(1024)).abs();
        let change = dist(&u(512), &u(1024));
        assert!((change / predicted - 1.0).abs() < 0.05, "change {change} predicted {predicted}");
        assert!(change <= 1e-5);
    }

    #[test]
    fn trajectory_stays_unitary() {
        let m = fourier_model();
        let a = [0.5, -0.3, 0.45, 0.25, -0.38, 0.3, -1.0, 2.0, 0.4];
        let traj = propagate(&m, &a, 1024).unwrap();
        let worst = traj.unitaries().iter().map(unitarity_defect).fold(0.0, f64::max);
        assert!(worst <= 2e-10, "{worst}");
    }

    #[test]
    fn noisy_propagation_limits() {
        let m = fourier_model();
        let a = [0.2, -0.1, 0.15, 0.05, -0.08, 0.3, -1.0, 2.0, 0.4];
        let clean = propagate(&m, &a, 256).unwrap().final_unitary();
        let noisy = noisy_propagate(&m, &a, &[0.0], 256).unwrap();
        assert!(dist(clean.matrix(), noisy.matrix()) < 1e-14);

        let delta = 0.013;
        let u = noisy_propagate(&m, &[0.0; 9], &[delta], 64).unwrap();
        let expected = mat_exp(&pauli_z(), delta * T);
        assert!(dist(u.matrix(), expected.matrix()) < 1e-12);
        assert!(noisy_propagate(&m, &a, &[0.0, 1.0], 64).is_err());
    }

    #[test]
    fn picture_identity_on_random_draws() {
        // Midpoint sampling of the interaction picture carries an O(dt^2)
        // mismatch, so the grid is fine enough to push it below 1e-8.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let gate_time = 1.0;
        let basis = PulseBasis::fourier_sin(2, gate_time).unwrap();
        let h0 = HermitianOp::new(pauli_z().matrix() * C64::new(0.3, 0.0) + pauli_y().matrix() * C64::new(0.2, 0.0))
            .unwrap();
        let m = SystemModel::new(
            h0,
            vec![ControlTerm { op: pauli_x().scale(0.5), basis }],
            vec![NoiseTerm { op: pauli_z(), label: "z".into() }],
        )
        .unwrap();
        let nt = 4096;
        for _ in 0..50 {
            let a = random_params(&mut rng, 5, 3.0);
            let delta = rng.random_range(-0.1..0.1);
            let traj = propagate(&m, &a, nt).unwrap();
            let un = error_propagator(&traj, &pauli_z(), delta).unwrap();
            let composed = traj.final_unitary().matrix() * un.matrix();
            let direct = noisy_propagate(&m, &a, &[delta], nt).unwrap();
            assert!(dist(&composed, direct.matrix()) <= 1e-8);
        }
    }

    #[test]
    fn interaction_noise_properties() {
        let m = fourier_model();
        let zero = propagate(&m, &[0.0; 9], 32).unwrap();
        for s in interaction_noise(&zero, &pauli_z()).unwrap() {
            assert_eq!(dist(s.matrix(), pauli_z().matrix()), 0.0);
        }
        let a = [0.3, -0.1, 0.15, 0.05, -0.08, 0.3, -1.0, 2.0, 0.4];
        let traj = propagate(&m, &a, 128).unwrap();
        for s in interaction_noise(&traj, &pauli_z()).unwrap() {
            let ev = s.eigenvalues();
            let (lo, hi) = (ev.iter().copied().fold(f64::MAX, f64::min), ev.iter().copied().fold(f64::MIN, f64::max));
            assert!((lo + 1.0).abs() < 1e-10 && (hi - 1.0).abs() < 1e-10);
        }
        assert!(interaction_noise(&traj, &HermitianOp::zeros(3)).is_err());
    }

    #[test]
    fn interaction_noise_closed_form_for_x_rotation() {
        // Constant Omega: phi(t) = Omega t, and U^dag sigma_z U = cos(phi) sigma_z + sin(phi) sigma_y.
        let omega = 0.07;
        let m = x_model(PulseBasis::new(BasisKind::PiecewiseConstant { segments: 1 }, T).unwrap());
        let traj = propagate(&m, &[omega], 200).unwrap();
        let dt = traj.dt();
        for (k, s) in interaction_noise(&traj, &pauli_z()).unwrap().iter().enumerate() {
            let phi = omega * (k as f64 + 0.5) * dt;
            let expected =
                pauli_z().matrix() * C64::new(phi.cos(), 0.0) + pauli_y().matrix() * C64::new(phi.sin(), 0.0);
            assert!(dist(s.matrix(), &expected) < 1e-12);
        }
    }

    #[test]
    fn error_propagator_limits_and_fidelity() {
        let m = fourier_model();
        let a = [0.3, -0.1, 0.15, 0.05, -0.08, 0.3, -1.0, 2.0, 0.4];
        let traj = propagate(&m, &a, 2048).unwrap();
        let un = error_propagator(&traj, &pauli_z(), 0.0).unwrap();
        assert!(dist(un.matrix(), &CMatrix::identity(2, 2)) < 1e-14);

        let zero = propagate(&m, &[0.0; 9], 64).unwrap();
        let un = error_propagator(&zero, &pauli_z(), 0.02).unwrap();
        assert!(dist(un.matrix(), mat_exp(&pauli_z(), 0.02 * T).matrix()) < 1e-12);

        let delta = 0.01;
        let un = error_propagator(&traj, &pauli_z(), delta).unwrap();
        let from_trace = un.matrix().trace().norm() / 2.0;
        let direct = noisy_propagate(&m, &a, &[delta], 2048).unwrap();
        let fidelity = gate_fidelity(&traj.final_unitary(), &direct).unwrap();
        assert!((from_trace - fidelity).abs() <= 1e-8);
    }

    #[test]
    fn rotation_angle_examples() {
        let rx = mat_exp(&pauli_x().scale(0.5), PI / 3.0);
        let angles = rotation_angles(&rx, &pauli_x(), &[pauli_y(), pauli_z()], None).unwrap();
        assert!((angles.theta - PI / 3.0).abs() < 1e-12);
        assert!(angles.undesired.iter().all(|v| v.abs() < 1e-12));

        let id = rotation_angles(&UnitaryOp::identity(2), &pauli_x(), &[pauli_y(), pauli_z()], None).unwrap();
        assert_eq!(id.theta, 0.0);
        assert!(id.undesired.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn hint_carries_theta_past_two_pi() {
        let hint = pauli_x().scale(0.5 * 2.0 * PI);
        let u = mat_exp(&pauli_x().scale(0.5), 2.0 * PI + 0.3);
        let angles = rotation_angles(&u, &pauli_x(), &[], Some(&hint)).unwrap();
        assert!((angles.theta - (2.0 * PI + 0.3)).abs() < 1e-10);
        let minus_identity = mat_exp(&pauli_x().scale(0.5), 2.0 * PI);
        assert_eq!(rotation_angles(&minus_identity, &pauli_x(), &[], None).unwrap_err(), Error::BranchAmbiguity);
    }

    #[test]
    fn theta_matches_pulse_area() {
        // The midpoint rule's area error is O(dt^2); 1e-6 needs a fine grid.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = fourier_model();
        let basis = &m.controls()[0].basis;
        for _ in 0..5 {
            let mut a = random_params(&mut rng, 9, 1.0);
            a[..5].iter_mut().for_each(|x| *x *= 0.04);
            let area = basis.area(&a);
            let u = propagate(&m, &a, 1 << 16).unwrap().final_unitary();
            let hint = pauli_x().scale(0.5 * area);
            let theta = rotation_angles(&u, &pauli_x(), &[], Some(&hint)).unwrap().theta;
            assert!((theta - area).abs() <= 1e-6, "theta {theta} area {area}");
        }
    }
}
