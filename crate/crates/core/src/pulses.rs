//! Pulse bases: parameter vector to waveform `Omega(t; A)` in rad/ns, with
//! analytic derivatives in the parameters.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

pub const DEFAULT_MORLET_RATIO: f64 = 2.0;

/// Relative accuracy requested from pulse-area quadrature.
const AREA_REL_TOL: f64 = 1e-12;

fn default_morlet_ratio() -> f64 {
    DEFAULT_MORLET_RATIO
}

/// Envelope multiplying a truncated Fourier series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Window {
    /// `sin(pi t/T)`.
    Sin,
    /// `sin^2(pi t/T)`.
    SinSquared,
    /// Normalized Gaussian centred on `T/2` with standard deviation `sigma` (ns).
    Gaussian { sigma: f64 },
}

/// How the harmonics of a windowed Fourier pulse are parametrized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FourierForm {
    /// `(a0, a1..an, phi1..phin)`: `a_k cos(2 pi k t/T + phi_k)`.
    #[default]
    Phase,
    /// `(a0, a1..an, b1..bn)`: `a_k cos(2 pi k t/T) + b_k sin(2 pi k t/T)`.
    Quadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisKind {
    /// `segments` equal-width constant pieces.
    PiecewiseConstant { segments: usize },
    /// `(sum_k a_k s^k)(sum_k b_k (1-s)^k)`, `k = 1..terms`, `s = t/T`.
    TaylorProduct { terms: usize },
    WindowedFourier {
        harmonics: usize,
        window: Window,
        #[serde(default)]
        form: FourierForm,
    },
    /// Truncated Morlet wavelets of orders `0..orders`, each normalized to unit area.
    Morlet {
        orders: usize,
        #[serde(default = "default_morlet_ratio")]
        ratio: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PulseBasisSpec {
    gate_time: f64,
    basis: BasisKind,
}

/// A pulse basis over a fixed gate time `T` (ns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PulseBasisSpec", into = "PulseBasisSpec")]
pub struct PulseBasis {
    kind: BasisKind,
    gate_time: f64,
    morlet_norms: Vec<f64>,
}

impl TryFrom<PulseBasisSpec> for PulseBasis {
    type Error = Error;

    fn try_from(spec: PulseBasisSpec) -> Result<Self> {
        PulseBasis::new(spec.basis, spec.gate_time)
    }
}

impl From<PulseBasis> for PulseBasisSpec {
    fn from(b: PulseBasis) -> Self {
        PulseBasisSpec { gate_time: b.gate_time, basis: b.kind }
    }
}

impl PulseBasis {
    pub fn new(kind: BasisKind, gate_time: f64) -> Result<Self> {
        if !(gate_time > 0.0 && gate_time.is_finite()) {
            return Err(Error::invalid(format!("gate_time must be positive, got {gate_time}")));
        }
        let count = match &kind {
            BasisKind::PiecewiseConstant { segments } => *segments,
            BasisKind::TaylorProduct { terms } => *terms,
            BasisKind::WindowedFourier { harmonics, window, .. } => {
                if let Window::Gaussian { sigma } = window {
                    if sigma.is_nan() || *sigma <= 0.0 {
                        return Err(Error::invalid("gaussian window sigma must be positive"));
                    }
                }
                *harmonics
            }
            BasisKind::Morlet { orders, ratio } => {
                if ratio.is_nan() || *ratio <= 0.0 {
                    return Err(Error::invalid("morlet ratio must be positive"));
                }
                *orders
            }
        };
        if count == 0 {
            return Err(Error::invalid("pulse basis needs at least one term"));
        }
        let morlet_norms = match &kind {
            BasisKind::Morlet { orders, ratio } => (0..*orders).map(|k| morlet_norm(k, *ratio, gate_time)).collect(),
            _ => Vec::new(),
        };
        Ok(PulseBasis { kind, gate_time, morlet_norms })
    }

    /// Windowed Fourier in phase form on a `sin` window; the default for the
    /// single-qubit presets (`2n + 1` parameters).
    pub fn fourier_sin(harmonics: usize, gate_time: f64) -> Result<Self> {
        Self::new(BasisKind::WindowedFourier { harmonics, window: Window::Sin, form: FourierForm::Phase }, gate_time)
    }

    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    pub fn gate_time(&self) -> f64 {
        self.gate_time
    }

    /// Number of parameters this basis consumes.
    pub fn arity(&self) -> usize {
        match &self.kind {
            BasisKind::PiecewiseConstant { segments } => *segments,
            BasisKind::TaylorProduct { terms } => 2 * terms,
            BasisKind::WindowedFourier { harmonics, .. } => 2 * harmonics + 1,
            BasisKind::Morlet { orders, .. } => *orders,
        }
    }

    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() == self.arity() {
            Ok(())
        } else {
            Err(Error::ParamLength { expected: self.arity(), found: params.len() })
        }
    }

    /// `Omega(t; A)`; zero outside `[0, T]`.
    pub fn eval(&self, params: &[f64], t: f64) -> f64 {
        debug_assert_eq!(params.len(), self.arity());
        let tt = self.gate_time;
        if !(0.0..=tt).contains(&t) {
            return 0.0;
        }
        let s = t / tt;
        match &self.kind {
            BasisKind::PiecewiseConstant { segments } => params[segment_index(s, *segments)],
            BasisKind::TaylorProduct { terms } => {
                let (left, right) = taylor_factors(params, s, *terms);
                left * right
            }
            BasisKind::WindowedFourier { harmonics, window, form } => {
                let n = *harmonics;
                let mut series = params[0];
                for k in 1..=n {
                    let arg = 2.0 * PI * k as f64 * s;
                    series += match form {
                        FourierForm::Phase => params[k] * (arg + params[n + k]).cos(),
                        FourierForm::Quadrature => params[k] * arg.cos() + params[n + k] * arg.sin(),
                    };
                }
                window_value(*window, s, tt) * series
            }
            BasisKind::Morlet { ratio, .. } => params
                .iter()
                .zip(&self.morlet_norms)
                .enumerate()
                .map(|(k, (a, c))| a * c * morlet_shape(k, *ratio, s))
                .sum(),
        }
    }

    /// Writes `dOmega/dA_j` at `t` into `out` (length = arity).
    pub fn gradient_into(&self, params: &[f64], t: f64, out: &mut [f64]) {
        debug_assert_eq!(params.len(), self.arity());
        debug_assert_eq!(out.len(), self.arity());
        out.iter_mut().for_each(|g| *g = 0.0);
        let tt = self.gate_time;
        if !(0.0..=tt).contains(&t) {
            return;
        }
        let s = t / tt;
        match &self.kind {
            BasisKind::PiecewiseConstant { segments } => out[segment_index(s, *segments)] = 1.0,
            BasisKind::TaylorProduct { terms } => {
                let n = *terms;
                let (left, right) = taylor_factors(params, s, n);
                for k in 1..=n {
                    out[k - 1] = s.powi(k as i32) * right;
                    out[n + k - 1] = left * (1.0 - s).powi(k as i32);
                }
            }
            BasisKind::WindowedFourier { harmonics, window, form } => {
                let n = *harmonics;
                let w = window_value(*window, s, tt);
                out[0] = w;
                for k in 1..=n {
                    let arg = 2.0 * PI * k as f64 * s;
                    match form {
                        FourierForm::Phase => {
                            let phase = arg + params[n + k];
                            out[k] = w * phase.cos();
                            out[n + k] = -w * params[k] * phase.sin();
                        }
                        FourierForm::Quadrature => {
                            out[k] = w * arg.cos();
                            out[n + k] = w * arg.sin();
                        }
                    }
                }
            }
            BasisKind::Morlet { ratio, .. } => {
                for (k, (g, c)) in out.iter_mut().zip(&self.morlet_norms).enumerate() {
                    *g = c * morlet_shape(k, *ratio, s);
                }
            }
        }
    }

    pub fn gradient(&self, params: &[f64], t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.arity()];
        self.gradient_into(params, t, &mut out);
        out
    }

    /// `int_0^T Omega(t; A) dt`.
    pub fn area(&self, params: &[f64]) -> f64 {
        if let BasisKind::PiecewiseConstant { segments } = self.kind {
            return params.iter().sum::<f64>() * self.gate_time / segments as f64;
        }
        quadrature::integrate(|t| self.eval(params, t), 0.0, self.gate_time, AREA_REL_TOL)
    }

    /// `max_t |Omega(t)|`, from a dense sample refined by golden-section search.
    pub fn max_amplitude(&self, params: &[f64]) -> f64 {
        const SAMPLES: usize = 2048;
        let tt = self.gate_time;
        let h = tt / SAMPLES as f64;
        let f = |t: f64| self.eval(params, t).abs();
        let (best_i, _) =
            (0..=SAMPLES)
                .map(|i| (i, f(i as f64 * h)))
                .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        let (mut lo, mut hi) = (((best_i as f64) - 1.0).max(0.0) * h, ((best_i as f64) + 1.0).min(SAMPLES as f64) * h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let a = hi - g * (hi - lo);
            let b = lo + g * (hi - lo);
            if f(a) >= f(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        f(0.5 * (lo + hi)).max(f(best_i as f64 * h))
    }
}

fn segment_index(s: f64, segments: usize) -> usize {
    ((s * segments as f64) as usize).min(segments - 1)
}

fn taylor_factors(params: &[f64], s: f64, n: usize) -> (f64, f64) {
    let (mut left, mut right) = (0.0, 0.0);
    let (mut sp, mut rp) = (1.0, 1.0);
    for k in 0..n {
        sp *= s;
        rp *= 1.0 - s;
        left += params[k] * sp;
        right += params[n + k] * rp;
    }
    (left, right)
}

fn window_value(window: Window, s: f64, gate_time: f64) -> f64 {
    match window {
        Window::Sin => (PI * s).sin(),
        Window::SinSquared => (PI * s).sin().powi(2),
        Window::Gaussian { sigma } => {
            let dt = (s - 0.5) * gate_time;
            (-dt * dt / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt())
        }
    }
}

/// Unnormalized Morlet shape `e^{-2 r^2 tau^2} cos((2k+1) pi tau)`, `tau = s - 1/2`.
fn morlet_shape(k: usize, ratio: f64, s: f64) -> f64 {
    let tau = s - 0.5;
    (-2.0 * ratio * ratio * tau * tau).exp() * ((2 * k + 1) as f64 * PI * tau).cos()
}

fn morlet_norm(k: usize, ratio: f64, gate_time: f64) -> f64 {
    let raw = quadrature::integrate(|t| morlet_shape(k, ratio, t / gate_time), 0.0, gate_time, 1e-14);
    1.0 / raw
}

/// Unit-area Morlet basis function of order `k` with ratio `r = (T/2)/sigma`.
///
/// For `r = 2` the truncated raw integral is negative at some odd orders
/// (`k = 3, 5`), so the normalization constant, and hence the value at
/// `T/2`, is negative there.
pub fn morlet_basis_fn(k: usize, ratio: f64, gate_time: f64, t: f64) -> f64 {
    if !(0.0..=gate_time).contains(&t) {
        return 0.0;
    }
    morlet_norm(k, ratio, gate_time) * morlet_shape(k, ratio, t / gate_time)
}

pub fn eval_pulse(basis: &PulseBasis, params: &[f64], t: f64) -> Result<f64> {
    basis.check_params(params)?;
    Ok(basis.eval(params, t))
}

pub fn pulse_param_gradient(basis: &PulseBasis, params: &[f64], t: f64) -> Result<Vec<f64>> {
    basis.check_params(params)?;
    Ok(basis.gradient(params, t))
}

pub fn pulse_area(basis: &PulseBasis, params: &[f64]) -> Result<f64> {
    basis.check_params(params)?;
    Ok(basis.area(params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const T: f64 = 50.0;

    fn fourier(window: Window, form: FourierForm) -> PulseBasis {
        PulseBasis::new(BasisKind::WindowedFourier { harmonics: 4, window, form }, T).unwrap()
    }

    #[test]
    fn fourier_midpoint_value() {
        let b = fourier(Window::Sin, FourierForm::Phase);
        let mut a = vec![0.0; 9];
        a[0] = 1.0;
        assert!((eval_pulse(&b, &a, T / 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((pulse_param_gradient(&b, &a, T / 2.0).unwrap()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fourier_vanishes_at_boundaries() {
        let b = fourier(Window::Sin, FourierForm::Phase);
        let a = [0.3, -1.2, 0.5, 0.8, 2.0, 0.1, 0.7, -2.0, 1.3];
        assert_eq!(b.eval(&a, 0.0), 0.0);
        assert!(b.eval(&a, T).abs() < 1e-14);
    }

    #[test]
    fn phase_derivative_vanishes_with_zero_amplitude() {
        let b = fourier(Window::Sin, FourierForm::Phase);
        let a = [0.3, 0.0, 0.5, 0.8, 2.0, 0.1, 0.7, -2.0, 1.3];
        assert_eq!(b.gradient(&a, 13.0)[5], 0.0);
        let t = 13.0;
        let expected = -(PI * t / T).sin() * a[2] * (2.0 * PI * 2.0 * t / T + a[6]).sin();
        assert!((b.gradient(&a, t)[6] - expected).abs() < 1e-15);
    }

    #[test]
    fn piecewise_segments() {
        let b = PulseBasis::new(BasisKind::PiecewiseConstant { segments: 3 }, T).unwrap();
        let a = [0.2, 0.5, 0.1];
        assert_eq!(eval_pulse(&b, &a, 0.5 * T).unwrap(), 0.5);
        assert_eq!(b.eval(&a, T), 0.1);
        assert_eq!(b.eval(&a, -1.0), 0.0);
        assert_eq!(b.eval(&a, T + 1.0), 0.0);
        assert!((b.area(&a) - 0.8 * T / 3.0).abs() < 1e-14);
    }

    #[test]
    fn wrong_arity_is_rejected() {
        let b = fourier(Window::Sin, FourierForm::Phase);
        assert_eq!(eval_pulse(&b, &[1.0; 3], 1.0), Err(Error::ParamLength { expected: 9, found: 3 }));
        assert!(PulseBasis::new(BasisKind::Morlet { orders: 0, ratio: 2.0 }, T).is_err());
        assert!(PulseBasis::fourier_sin(4, 0.0).is_err());
    }

    #[test]
    fn area_closed_forms() {
        let b = fourier(Window::Sin, FourierForm::Phase);
        let mut a = vec![0.0; 9];
        assert_eq!(pulse_area(&b, &a).unwrap(), 0.0);
        a[0] = 0.37;
        assert!((b.area(&a) - 0.37 * 2.0 * T / PI).abs() < 1e-12);
        // a0 = pi^2 / T integrates to 2 pi.
        a[0] = PI * PI / T;
        assert!((b.area(&a) - 2.0 * PI).abs() < 1e-12);
    }

    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 40)
    }

    #[test]
    fn morlet_unit_area_against_adaptive_simpson() {
        for k in 0..=5 {
            let integral = adaptive_simpson(&|t| morlet_basis_fn(k, 2.0, T, t), 0.0, T, 1e-12);
            assert!((integral - 1.0).abs() < 1e-8, "k = {k}: {integral}");
        }
    }

    #[test]
    fn morlet_centre_sign_follows_truncated_integral() {
        // Raw truncated integrals of e^{-8 tau^2} cos((2k+1) pi tau) over
        // [-1/2, 1/2] are positive for k = 0, 1, 2, 4 and negative for k = 3, 5.
        let expected = [1.0, 1.0, 1.0, -1.0, 1.0, -1.0];
        for (k, sign) in expected.iter().enumerate() {
            assert_eq!(morlet_basis_fn(k, 2.0, T, T / 2.0).signum(), *sign, "k = {k}");
        }
    }

    #[test]
    fn morlet_is_symmetric() {
        for k in 0..4 {
            for s in [0.1, 3.0, 11.0, 24.9] {
                let l = morlet_basis_fn(k, 2.0, T, T / 2.0 - s);
                let r = morlet_basis_fn(k, 2.0, T, T / 2.0 + s);
                assert!((l - r).abs() <= 1e-13 * l.abs().max(1.0));
            }
        }
    }

    #[test]
    fn sin_squared_window_is_flat_at_boundaries() {
        let b = fourier(Window::SinSquared, FourierForm::Phase);
        let a = [0.3, -1.2, 0.5, 0.8, 2.0, 0.1, 0.7, -2.0, 1.3];
        let h = 1e-6;
        for t in [0.0, T] {
            assert!(b.eval(&a, t).abs() < 1e-14);
            let inside = if t == 0.0 { h } else { T - h };
            let slope = (b.eval(&a, inside) - b.eval(&a, t)).abs() / h;
            assert!(slope < 1e-8, "slope {slope} at {t}");
        }
    }

    #[test]
    fn taylor_vanishes_to_requested_order() {
        let n = 5;
        let b = PulseBasis::new(BasisKind::TaylorProduct { terms: n }, T).unwrap();
        for k in 1..=3usize {
            // a_j = b_j = 0 for j <= k: vanishes like s^{k+1} at both ends.
            let mut a: Vec<f64> = (0..2 * n).map(|i| 0.5 + 0.1 * i as f64).collect();
            for j in 0..k {
                a[j] = 0.0;
                a[n + j] = 0.0;
            }
            let c = 10.0 * (a.iter().map(|x| x.abs()).sum::<f64>()).powi(2);
            for eps in [1e-3 * T, 1e-4 * T] {
                let s = eps / T;
                assert!(b.eval(&a, eps).abs() <= c * s.powi(k as i32 + 1));
                assert!(b.eval(&a, T - eps).abs() <= c * s.powi(k as i32 + 1));
            }
        }
    }

    #[test]
    fn max_amplitude_of_sine() {
        let b = fourier(Window::Sin, FourierForm::Phase);
        let mut a = vec![0.0; 9];
        a[0] = -0.4;
        assert!((b.max_amplitude(&a) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn serde_round_trip() {
        let b = PulseBasis::new(BasisKind::Morlet { orders: 3, ratio: 2.5 }, 40.0).unwrap();
        let text = serde_json::to_string(&b).unwrap();
        let back: PulseBasis = serde_json::from_str(&text).unwrap();
        assert_eq!(b, back);
        let bad = r#"{"gate_time":40.0,"basis":{"kind":"morlet","orders":0}}"#;
        assert!(serde_json::from_str::<PulseBasis>(bad).is_err());
    }

    fn all_bases() -> Vec<PulseBasis> {
        vec![
            fourier(Window::Sin, FourierForm::Phase),
            fourier(Window::SinSquared, FourierForm::Quadrature),
            fourier(Window::Gaussian { sigma: 12.0 }, FourierForm::Phase),
            PulseBasis::new(BasisKind::TaylorProduct { terms: 4 }, T).unwrap(),
            PulseBasis::new(BasisKind::Morlet { orders: 5, ratio: 2.0 }, T).unwrap(),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn gradient_matches_central_differences(
            which in 0usize..5,
            raw in proptest::collection::vec(-1.0f64..1.0, 9),
            t in 0.5f64..49.5,
        ) {
            let basis = &all_bases()[which];
            let a: Vec<f64> = raw.iter().cycle().take(basis.arity()).copied().collect();
            let g = basis.gradient(&a, t);
            let h = 1e-6;
            let fd: Vec<f64> = (0..a.len()).map(|j| {
                let (mut p, mut m) = (a.clone(), a.clone());
                p[j] += h;
                m[j] -= h;
                (basis.eval(&p, t) - basis.eval(&m, t)) / (2.0 * h)
            }).collect();
            let err: f64 = g.iter().zip(&fd).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let scale: f64 = fd.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-8 * scale.max(1.0), "err {} scale {}", err, scale);
        }

        #[test]
        fn amplitudes_enter_linearly(
            a1 in proptest::collection::vec(-1.0f64..1.0, 5),
            a2 in proptest::collection::vec(-1.0f64..1.0, 5),
            phases in proptest::collection::vec(-3.0f64..3.0, 4),
            t in 0.0f64..50.0,
        ) {
            let b = fourier(Window::Sin, FourierForm::Phase);
            let with = |amp: &[f64]| { let mut v = amp.to_vec(); v.extend_from_slice(&phases); v };
            let sum: Vec<f64> = a1.iter().zip(&a2).map(|(x, y)| x + y).collect();
            let lhs = b.eval(&with(&sum), t);
            let rhs = b.eval(&with(&a1), t) + b.eval(&with(&a2), t);
            prop_assert!((lhs - rhs).abs() <= 1e-13);
        }
    }
}
