//! Robustness metrics: Magnus susceptibilities, order-n robustness, a
//! derivative-based cross-check, Monte-Carlo integral robustness and QEED
//! error curves.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, interaction_samples, SystemModel, Trajectory};
use crate::error::{Error, Result};
use crate::operators::{
    check_dims, gate_fidelity, matrix_norm, pauli_x, pauli_y, pauli_z, trace_inner, CMatrix, HermitianOp, NormKind,
    C64, SUSCEPTIBILITY_NORM,
};

/// `M1 = int_0^T U^dag H_n0 U dt` by midpoint quadrature.
pub(crate) fn m1_matrix(samples: &[CMatrix], dt: f64) -> CMatrix {
    let d = samples[0].nrows();
    let mut acc = CMatrix::zeros(d, d);
    for s in samples {
        acc += s;
    }
    acc * C64::new(dt, 0.0)
}

/// `M2 = int_0^T [H~(t), int_0^t H~] dt` with the inner integral as a
/// cumulative midpoint sum. The half-cell self term commutes away.
pub(crate) fn m2_matrix(samples: &[CMatrix], dt: f64) -> CMatrix {
    let d = samples[0].nrows();
    let mut cumulative = CMatrix::zeros(d, d);
    let mut acc = CMatrix::zeros(d, d);
    for s in samples {
        acc += s * &cumulative - &cumulative * s;
        cumulative += s;
    }
    acc * C64::new(dt * dt, 0.0)
}

/// First-order susceptibility `S1 = ||M1||` and `M1` itself, at unit noise.
pub fn s1(traj: &Trajectory, noise: &HermitianOp) -> Result<(f64, HermitianOp)> {
    s1_with_norm(traj, noise, SUSCEPTIBILITY_NORM)
}

pub fn s1_with_norm(traj: &Trajectory, noise: &HermitianOp, norm: NormKind) -> Result<(f64, HermitianOp)> {
    check_dims(traj.dim(), noise.dim())?;
    let m1 = m1_matrix(&interaction_samples(traj, noise.matrix()), traj.dt());
    Ok((matrix_norm(&m1, norm), HermitianOp::from_hermitian(m1)))
}

/// Second-order susceptibility `S2 = ||M2||`. `M2` is anti-Hermitian; it is
/// returned as the Hermitian `K` with `M2 = i K`.
pub fn s2(traj: &Trajectory, noise: &HermitianOp) -> Result<(f64, HermitianOp)> {
    s2_with_norm(traj, noise, SUSCEPTIBILITY_NORM)
}

pub fn s2_with_norm(traj: &Trajectory, noise: &HermitianOp, norm: NormKind) -> Result<(f64, HermitianOp)> {
    check_dims(traj.dim(), noise.dim())?;
    let m2 = m2_matrix(&interaction_samples(traj, noise.matrix()), traj.dt());
    let k = m2 * C64::new(0.0, -1.0);
    Ok((matrix_norm(&k, norm), HermitianOp::from_hermitian(k)))
}

/// `log10 T - log10(Sn) / n`, or unbounded when `Sn = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Robustness {
    Finite(f64),
    Unbounded,
}

impl Robustness {
    pub fn value(self) -> f64 {
        match self {
            Robustness::Finite(v) => v,
            Robustness::Unbounded => f64::INFINITY,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, Robustness::Unbounded)
    }
}

pub fn robustness_order_n(gate_time: f64, n: u32, sn: f64) -> Result<Robustness> {
    if n == 0 || gate_time.is_nan() || gate_time <= 0.0 || sn < 0.0 || sn.is_nan() {
        return Err(Error::invalid(format!(
            "robustness needs n >= 1, T > 0, Sn >= 0 (got n={n}, T={gate_time}, Sn={sn})"
        )));
    }
    if sn == 0.0 {
        return Ok(Robustness::Unbounded);
    }
    Ok(Robustness::Finite(gate_time.log10() - sn.log10() / n as f64))
}

#[derive(Debug, Clone)]
pub struct AxisSusceptibility {
    pub label: String,
    pub s1: f64,
    pub s2: f64,
    pub r1: Robustness,
    pub r2: Robustness,
    pub m1: HermitianOp,
    /// Hermitian `K` with `M2 = i K`.
    pub m2: HermitianOp,
}

#[derive(Debug, Clone)]
pub struct SusceptibilityReport {
    pub axes: Vec<AxisSusceptibility>,
    pub norm_kind: NormKind,
}

impl SusceptibilityReport {
    pub fn s1(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.s1).collect()
    }

    pub fn s2(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.s2).collect()
    }
}

/// S1, S2, R1, R2 for every noise term of the model.
pub fn susceptibility_report(traj: &Trajectory, model: &SystemModel, norm: NormKind) -> Result<SusceptibilityReport> {
    let axes = model
        .noises()
        .iter()
        .map(|n| {
            let samples = interaction_samples(traj, n.op.matrix());
            let m1 = m1_matrix(&samples, traj.dt());
            let k = m2_matrix(&samples, traj.dt()) * C64::new(0.0, -1.0);
            let (s1, s2) = (matrix_norm(&m1, norm), matrix_norm(&k, norm));
            Ok(AxisSusceptibility {
                label: n.label.clone(),
                s1,
                s2,
                r1: robustness_order_n(traj.gate_time(), 1, s1)?,
                r2: robustness_order_n(traj.gate_time(), 2, s2)?,
                m1: HermitianOp::from_hermitian(m1),
                m2: HermitianOp::from_hermitian(k),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SusceptibilityReport { axes, norm_kind: norm })
}

/// Finite-difference susceptibilities of the error propagator next to the
/// Magnus values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeCheck {
    /// `||dU_n^sc/d delta||` at `delta = 0`.
    pub s1_d: f64,
    pub s1_m: f64,
    pub rel_gap: f64,
    /// Norm of the `delta^2` Taylor coefficient of `U_n^sc`, which is what
    /// the bound `S2_D <= S1^2 / 2 + S2_M` constrains.
    pub s2_d: f64,
    pub s2_m: f64,
}

/// Central differences of `U_n^sc(delta)` at step `h`, Richardson-extrapolated
/// with `h / 2`.
pub fn s1_derivative_check(
    model: &SystemModel,
    params: &[f64],
    noise: &HermitianOp,
    h: f64,
    nt: usize,
) -> Result<DerivativeCheck> {
    if !(1e-6..=1e-3).contains(&h) {
        return Err(Error::invalid(format!("finite-difference step must lie in [1e-6, 1e-3], got {h}")));
    }
    let traj = dynamics::propagate(model, params, nt)?;
    let un = |delta: f64| -> Result<CMatrix> { Ok(dynamics::error_propagator(&traj, noise, delta)?.into_matrix()) };
    let d = traj.dim();
    let identity = CMatrix::identity(d, d);
    let (p1, m1, p2, m2) = (un(h)?, un(-h)?, un(0.5 * h)?, un(-0.5 * h)?);
    let first = |p: &CMatrix, m: &CMatrix, step: f64| (p - m) * C64::new(0.5 / step, 0.0);
    let second = |p: &CMatrix, m: &CMatrix, step: f64| {
        (p + m - &identity * C64::new(2.0, 0.0)) * C64::new(0.5 / (step * step), 0.0)
    };
    let richardson = |coarse: CMatrix, fine: CMatrix| (fine * C64::new(4.0, 0.0) - coarse) * C64::new(1.0 / 3.0, 0.0);
    let s1_d = richardson(first(&p1, &m1, h), first(&p2, &m2, 0.5 * h)).norm();
    let s2_d = richardson(second(&p1, &m1, h), second(&p2, &m2, 0.5 * h)).norm();
    let (s1_m, _) = s1(&traj, noise)?;
    let (s2_m, _) = s2(&traj, noise)?;
    let rel_gap = (s1_d - s1_m).abs() / s1_m.max(f64::EPSILON);
    Ok(DerivativeCheck { s1_d, s1_m, rel_gap, s2_d, s2_m })
}

/// Quasi-static law of one noise strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseLaw {
    Fixed {
        delta: f64,
    },
    /// Uniform on `[-b, b]`.
    Uniform {
        b: f64,
    },
    /// Zero-mean normal with standard deviation `s`.
    Gaussian {
        s: f64,
    },
}

impl NoiseLaw {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            NoiseLaw::Fixed { delta } => delta,
            NoiseLaw::Uniform { b } => {
                if b == 0.0 {
                    0.0
                } else {
                    rng.random_range(-b..=b)
                }
            }
            NoiseLaw::Gaussian { s } => Normal::new(0.0, s).expect("validated standard deviation").sample(rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseDistribution {
    /// One law per noise term of the model.
    pub laws: Vec<NoiseLaw>,
    pub samples: usize,
    pub seed: u64,
}

impl NoiseDistribution {
    pub fn validate(&self, n_noises: usize) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::invalid("noise distribution needs at least one sample"));
        }
        if self.laws.len() != n_noises {
            return Err(Error::invalid(format!("expected {n_noises} noise laws, got {}", self.laws.len())));
        }
        for law in &self.laws {
            let ok = match *law {
                NoiseLaw::Fixed { delta } => delta.is_finite(),
                NoiseLaw::Uniform { b } => b >= 0.0 && b.is_finite(),
                NoiseLaw::Gaussian { s } => s >= 0.0 && s.is_finite(),
            };
            if !ok {
                return Err(Error::invalid(format!("invalid noise law {law:?}")));
            }
        }
        Ok(())
    }

    /// The noise strengths of draw `i`; each draw has its own stream, so the
    /// result does not depend on evaluation order.
    pub fn draw(&self, i: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i as u64);
        self.laws.iter().map(|law| law.sample(&mut rng)).collect()
    }
}

/// Per-draw fidelities of `U_scn(T; delta_i)` against `U_sc(T)`, in draw order.
pub fn fidelity_samples(model: &SystemModel, params: &[f64], dist: &NoiseDistribution, nt: usize) -> Result<Vec<f64>> {
    dist.validate(model.noises().len())?;
    let ideal = dynamics::propagate(model, params, nt)?.final_unitary();
    (0..dist.samples)
        .into_par_iter()
        .map(|i| {
            let noisy = dynamics::noisy_propagate(model, params, &dist.draw(i), nt)?;
            gate_fidelity(&ideal, &noisy)
        })
        .collect()
}

/// Monte-Carlo expectation of the gate fidelity under `dist`.
pub fn integral_robustness(model: &SystemModel, params: &[f64], dist: &NoiseDistribution, nt: usize) -> Result<f64> {
    let samples = fidelity_samples(model, params, dist, nt)?;
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Quasi-static error curve `r(t)`, the Pauli coordinates of the running
/// first-order Magnus term.
#[derive(Debug, Clone, PartialEq)]
pub struct QeedCurve {
    pub t: Vec<f64>,
    pub r: Vec<[f64; 3]>,
}

impl QeedCurve {
    pub fn end(&self) -> [f64; 3] {
        *self.r.last().expect("curve has at least one point")
    }

    pub fn closure(&self) -> f64 {
        let [x, y, z] = self.end();
        (x * x + y * y + z * z).sqrt()
    }

    /// `t,rx,ry,rz` with 17 significant digits.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "t,rx,ry,rz")?;
        for (t, [x, y, z]) in self.t.iter().zip(&self.r) {
            writeln!(out, "{t:.16e},{x:.16e},{y:.16e},{z:.16e}")?;
        }
        Ok(())
    }
}

pub fn qeed_curve(traj: &Trajectory, noise: &HermitianOp) -> Result<QeedCurve> {
    if traj.dim() != 2 || noise.dim() != 2 {
        return Err(Error::Unsupported("QEED curves are defined for single qubits only".into()));
    }
    if noise.matrix().trace().norm() > 1e-12 * noise.matrix().norm().max(1.0) {
        return Err(Error::invalid("QEED curve needs a traceless noise operator"));
    }
    let dt = traj.dt();
    let paulis = [pauli_x(), pauli_y(), pauli_z()];
    let mut m1 = CMatrix::zeros(2, 2);
    let mut r = vec![[0.0; 3]];
    for s in interaction_samples(traj, noise.matrix()) {
        m1 += s * C64::new(dt, 0.0);
        r.push([0, 1, 2].map(|j| 0.5 * trace_inner(&m1, paulis[j].matrix()).re));
    }
    Ok(QeedCurve { t: traj.times(), r })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiSourceS1 {
    pub per_source: Vec<f64>,
    /// `S1` of the summed noise operator.
    pub combined: f64,
    /// Sum of the per-source values; never below `combined`.
    pub bound: f64,
}

pub fn multi_source_s1(traj: &Trajectory, noises: &[HermitianOp]) -> Result<MultiSourceS1> {
    let first = noises.first().ok_or_else(|| Error::invalid("need at least one noise source"))?;
    let mut total = HermitianOp::zeros(first.dim());
    let mut per_source = Vec::with_capacity(noises.len());
    for n in noises {
        per_source.push(s1(traj, n)?.0);
        total = total.add(n)?;
    }
    let combined = s1(traj, &total)?.0;
    Ok(MultiSourceS1 { bound: per_source.iter().sum(), per_source, combined })
}
