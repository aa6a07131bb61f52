//! Prebuilt system models: on-resonance single-qubit control and the
//! two-qubit XY interaction on the `{|01>, |10>}` subspace.

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlTerm, NoiseTerm, SystemModel};
use crate::error::{Error, Result};
use crate::operators::{kron, mat_exp, pauli_x, pauli_y, pauli_z, CMatrix, HermitianOp, UnitaryOp, C64};
use crate::pulses::PulseBasis;

pub const DEFAULT_GATE_TIME: f64 = 50.0;
pub const DEFAULT_HARMONICS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub fn op(self) -> HermitianOp {
        match self {
            PauliAxis::X => pauli_x(),
            PauliAxis::Y => pauli_y(),
            PauliAxis::Z => pauli_z(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PauliAxis::X => "x",
            PauliAxis::Y => "y",
            PauliAxis::Z => "z",
        }
    }
}

/// Controls `(Omega_k / 2) sigma_k`, noises `delta_j sigma_j`, no drift.
/// Every control uses its own copy of `basis`.
pub fn build_single_qubit(controls: &[PauliAxis], noises: &[PauliAxis], basis: &PulseBasis) -> Result<SystemModel> {
    if controls.is_empty() {
        return Err(Error::invalid("at least one control axis is required"));
    }
    if noises.is_empty() {
        return Err(Error::invalid("at least one noise axis is required"));
    }
    let controls = controls.iter().map(|a| ControlTerm { op: a.op().scale(0.5), basis: basis.clone() }).collect();
    let noises = noises.iter().map(|a| NoiseTerm { op: a.op(), label: a.label().to_string() }).collect();
    SystemModel::new(HermitianOp::zeros(2), controls, noises)
}

/// `(XX + YY) / 2`; acts as `sigma_x` on `{|01>, |10>}` and as zero elsewhere.
pub fn xy_generator() -> HermitianOp {
    let xx = kron(pauli_x().matrix(), pauli_x().matrix());
    let yy = kron(pauli_y().matrix(), pauli_y().matrix());
    HermitianOp::new((xx + yy) * C64::new(0.5, 0.0)).expect("sum of Hermitian Kronecker products")
}

/// `(ZI - IZ) / 2`; acts as `sigma_z` on `{|01>, |10>}` and as zero elsewhere.
pub fn detuning_noise() -> HermitianOp {
    HermitianOp::from_real_diagonal(&[0.0, 1.0, -1.0, 0.0])
}

/// Control `(Omega / 2)(XX + YY)/2`, noise `(delta / 2)(ZI - IZ)`, `d = 4`.
pub fn build_two_qubit_xy(basis: &PulseBasis) -> Result<SystemModel> {
    SystemModel::new(
        HermitianOp::zeros(4),
        vec![ControlTerm { op: xy_generator().scale(0.5), basis: basis.clone() }],
        vec![NoiseTerm { op: detuning_noise(), label: "detuning".into() }],
    )
}

/// `R_XY(theta) = exp(-i (theta / 2) (XX + YY) / 2)`.
pub fn rxy(theta: f64) -> UnitaryOp {
    mat_exp(&xy_generator(), 0.5 * theta)
}

/// The standard iSWAP gate (`|01> -> i|10>`, `|10> -> i|01>`).
pub fn iswap() -> UnitaryOp {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    UnitaryOp::new(CMatrix::from_row_slice(4, 4, &[o, z, z, z, z, z, i, z, z, i, z, z, z, z, z, o]))
        .expect("iSWAP is unitary")
}

/// Restriction of a two-qubit operator to `{|01>, |10>}`.
pub fn restrict_01_10(m: &CMatrix) -> CMatrix {
    CMatrix::from_fn(2, 2, |r, c| m[(r + 1, c + 1)])
}

/// A named model together with its gate axis and undesired axes.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub model: SystemModel,
    /// Axis `sigma` the gate angle is read on.
    pub axis: HermitianOp,
    pub undesired: Vec<HermitianOp>,
    pub undesired_labels: Vec<String>,
}

pub const PRESET_NAMES: [&str; 3] = ["sq_x_z", "sq_xy_xyz", "tq_xy_detuning"];

/// Looks up `sq_x_z`, `sq_xy_xyz` or `tq_xy_detuning`.
pub fn preset(name: &str, basis: &PulseBasis) -> Result<Preset> {
    use PauliAxis::*;
    match name {
        "sq_x_z" => Ok(Preset {
            name: "sq_x_z",
            model: build_single_qubit(&[X], &[Z], basis)?,
            axis: pauli_x(),
            undesired: vec![],
            undesired_labels: vec![],
        }),
        "sq_xy_xyz" => Ok(Preset {
            name: "sq_xy_xyz",
            model: build_single_qubit(&[X, Y], &[X, Y, Z], basis)?,
            axis: pauli_x(),
            undesired: vec![pauli_y(), pauli_z()],
            undesired_labels: vec!["y".into(), "z".into()],
        }),
        "tq_xy_detuning" => Ok(Preset {
            name: "tq_xy_detuning",
            model: build_two_qubit_xy(basis)?,
            axis: xy_generator(),
            undesired: vec![],
            undesired_labels: vec![],
        }),
        other => Err(Error::invalid(format!("unknown model preset `{other}` (expected one of {PRESET_NAMES:?})"))),
    }
}

pub fn default_basis() -> PulseBasis {
    PulseBasis::fourier_sin(DEFAULT_HARMONICS, DEFAULT_GATE_TIME).expect("valid default basis")
}
