//! Shared oracles for the integration and acceptance tests.
#![allow(dead_code)]

use qcrl::dynamics::{ControlTerm, NoiseTerm, SystemModel};
use qcrl::gradients::{evaluate, FunctionalKind, ScalarFunctional};
use qcrl::operators::{mat_exp, pauli_x, pauli_y, pauli_z, HermitianOp};
use qcrl::pulses::{BasisKind, FourierForm, PulseBasis, Window};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NT: usize = 128;

pub fn richardson(f: &dyn Fn(&[f64]) -> f64, a: &[f64], j: usize, h: f64) -> f64 {
    let central = |step: f64| {
        let (mut p, mut m) = (a.to_vec(), a.to_vec());
        p[j] += step;
        m[j] -= step;
        (f(&p) - f(&m)) / (2.0 * step)
    };
    (4.0 * central(0.5 * h) - central(h)) / 3.0
}

pub fn random_model(rng: &mut ChaCha8Rng, draw: usize) -> SystemModel {
    let t = rng.random_range(20.0..60.0);
    let basis = match draw % 3 {
        0 => PulseBasis::fourier_sin(3, t).unwrap(),
        1 => PulseBasis::new(BasisKind::Morlet { orders: 4, ratio: 2.0 }, t).unwrap(),
        _ => PulseBasis::new(
            BasisKind::WindowedFourier { harmonics: 2, window: Window::SinSquared, form: FourierForm::Quadrature },
            t,
        )
        .unwrap(),
    };
    let mut controls = vec![ControlTerm { op: pauli_x().scale(0.5), basis: basis.clone() }];
    if draw % 2 == 1 {
        controls.push(ControlTerm { op: pauli_y().scale(0.5), basis });
    }
    // A generic drift; a purely real one makes vartheta_y vanish identically
    // for time-symmetric pulses, leaving nothing but roundoff to compare.
    let drift =
        pauli_z().scale(rng.random_range(-0.02..0.02)).add(&pauli_y().scale(rng.random_range(-0.02..0.02))).unwrap();
    SystemModel::new(drift, controls, vec![NoiseTerm { op: pauli_z(), label: "z".into() }]).unwrap()
}

/// Worst relative gradient error of each draw and functional against
/// Richardson-extrapolated central differences (`h = 1e-5`).
pub fn gradient_errors(draws: usize, seed: u64) -> Vec<(usize, FunctionalKind, f64)> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for draw in 0..draws {
        let model = random_model(&mut rng, draw);
        let n = model.n_params();
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-0.08..0.08)).collect();
        let noise = HermitianOp::new(
            pauli_z().matrix() * qcrl::operators::C64::new(1.0, 0.0)
                + pauli_x().matrix() * qcrl::operators::C64::new(rng.random_range(-0.5..0.5), 0.0),
        )
        .unwrap();
        let fns = vec![
            ScalarFunctional::Theta(pauli_x()),
            ScalarFunctional::Undesired(pauli_y()),
            ScalarFunctional::Undesired(pauli_z()),
            ScalarFunctional::S1(noise.clone()),
            ScalarFunctional::S2(noise),
            ScalarFunctional::Fidelity(mat_exp(&pauli_x().scale(0.5), 0.7)),
        ];
        let base = evaluate(&model, &fns, &a, NT, None, true).unwrap();
        let hint = base.eta.clone();
        for (i, f) in fns.iter().enumerate() {
            let value =
                |p: &[f64]| evaluate(&model, std::slice::from_ref(f), p, NT, hint.as_ref(), false).unwrap().values[0];
            let fd: Vec<f64> = (0..n).map(|j| richardson(&value, &a, j, 1e-5)).collect();
            let err = base.grads[i].iter().zip(&fd).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let scale = fd.iter().map(|x| x * x).sum::<f64>().sqrt();
            let rel = err / (scale + 1e-12);
            out.push((draw, f.kind(), rel));
        }
    }
    out
}
