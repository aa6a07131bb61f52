use std::f64::consts::PI;

use qcrl::dynamics::propagate;
use qcrl::gradients::{values, ScalarFunctional};
use qcrl::levelset::*;
use qcrl::models::{default_basis, preset, Preset};
use qcrl::robustness::s1;
use qcrl::Error;

const NT: usize = 512;

fn sq() -> Preset {
    preset("sq_x_z", &default_basis()).unwrap()
}

fn sine(area: f64) -> Vec<f64> {
    let mut a = vec![0.0; 9];
    a[0] = area * PI / 100.0;
    a
}

fn s1_of(p: &Preset, a: &[f64]) -> f64 {
    s1(&propagate(&p.model, a, NT).unwrap(), &p.model.noises()[0].op).unwrap().0
}

fn theta_of(p: &Preset, a: &[f64]) -> f64 {
    values(&p.model, &[ScalarFunctional::Theta(p.axis.clone())], a, NT, None).unwrap().values[0]
}

fn robust(p: &Preset) -> Vec<f64> {
    let stop = StopCriteria { land_fraction: Some(0.95), ..StopCriteria::new(2.5, 3000) };
    let out = optimize_beginning(&p.model, &sine(PI), &[], &BeginningWeights::default(), &stop, NT).unwrap();
    assert!(out.converged);
    out.params
}

fn problem(p: &Preset) -> TraversalProblem<'_> {
    TraversalProblem {
        model: &p.model,
        axis: p.axis.clone(),
        undesired: vec![],
        constraints: vec![Constraint {
            label: "s1_z".into(),
            functional: ScalarFunctional::S1(p.model.noises()[0].op.clone()),
        }],
        nt: NT,
    }
}

#[test]
fn already_robust_start_is_returned_unchanged() {
    let p = sq();
    let a = robust(&p);
    let s = s1_of(&p, &a);
    let out =
        optimize_beginning(&p.model, &a, &[], &BeginningWeights::default(), &StopCriteria::new(s * 1.01, 100), NT)
            .unwrap();
    assert!(out.converged);
    assert_eq!(out.iterations, 0);
    assert_eq!(out.params, a);
}

#[test]
fn first_accepted_step_lowers_s1() {
    let p = sq();
    let a = sine(PI);
    let before = s1_of(&p, &a);
    let out =
        optimize_beginning(&p.model, &a, &[], &BeginningWeights::default(), &StopCriteria::new(1e-3, 1), NT).unwrap();
    assert!(!out.converged);
    assert!(out.s1[0] < before, "{} !< {before}", out.s1[0]);
}

#[test]
fn degenerate_range_records_beginning_only() {
    let p = sq();
    let a = robust(&p);
    let th = theta_of(&p, &a);
    let t = ripv_run(&problem(&p), &a, &TraversalConfig::new(0.01, [th, th])).unwrap();
    assert_eq!(t.records.len(), 1);
    assert_eq!(t.records[0].params, a);
    assert_eq!(t.records[0].dtheta_measured, 0.0);
}

#[test]
fn short_span_both_directions_hold_s1() {
    let p = sq();
    let a = robust(&p);
    let th = theta_of(&p, &a);
    let t = ripv_run(&problem(&p), &a, &TraversalConfig::new(-0.005, [th - 0.05, th + 0.05])).unwrap();
    assert_eq!(t.records.len(), 21);
    assert!(t.records.windows(2).all(|w| w[0].theta < w[1].theta));
    assert!(t.records.iter().enumerate().all(|(i, r)| r.index == i));
    let target = t.targets[0];
    for r in &t.records {
        assert!((r.constraint_values[0] - target).abs() <= 1e-3 * target);
        assert!(r.ortho_residual <= 1e-10);
        assert!((s1_of(&p, &r.params) - r.s1[0]).abs() <= 1e-12);
    }
    assert!((t.records[0].theta - (th - 0.05)).abs() < 0.005);
    assert!((t.records[20].theta - (th + 0.05)).abs() < 0.005);
}

#[test]
fn interpolated_pulse_hits_requested_angle() {
    let p = sq();
    let a = robust(&p);
    let th = theta_of(&p, &a);
    let t = ripv_run(&problem(&p), &a, &TraversalConfig::new(0.01, [th, th + 0.2])).unwrap();
    let knot = &t.records[7];
    assert_eq!(interpolate(&t.records, knot.theta).unwrap(), knot.params);
    for w in t.records.windows(2) {
        let mid = 0.5 * (w[0].theta + w[1].theta);
        let q = interpolate(&t.records, mid).unwrap();
        assert!((theta_of(&p, &q) - mid).abs() < 1e-4);
        assert!((s1_of(&p, &q) - t.targets[0]).abs() < 1e-3 * t.targets[0]);
    }
    let hi = t.records.last().unwrap().theta;
    assert!(matches!(interpolate(&t.records, hi + 0.1), Err(Error::OutOfRange { .. })));
}

#[test]
fn correction_keeps_constraints_at_least_as_tight() {
    let p = sq();
    let a = robust(&p);
    let th = theta_of(&p, &a);
    let drift = |c: Correction| {
        let cfg = TraversalConfig { correction: c, ..TraversalConfig::new(0.02, [th, th + 0.3]) };
        let t = ripv_run(&problem(&p), &a, &cfg).unwrap();
        t.records.iter().map(|r| (r.constraint_values[0] - t.targets[0]).abs()).fold(0.0, f64::max)
    };
    let off = drift(Correction::Off);
    let on = drift(Correction::On { max_inner: 20 });
    assert!(on <= off * 1.0001 + 1e-12, "{on} > {off}");
}

#[test]
fn range_away_from_beginning_keeps_only_in_range_records() {
    let p = sq();
    let a = robust(&p);
    let th = theta_of(&p, &a);
    let t = ripv_run(&problem(&p), &a, &TraversalConfig::new(0.01, [th + 0.1, th + 0.2])).unwrap();
    assert!(t.records.iter().all(|r| r.theta >= th + 0.1 - 1e-9 && r.theta <= th + 0.2 + 1e-9));
    assert!((10..=12).contains(&t.records.len()), "{}", t.records.len());
    assert!(ripv_run(&problem(&p), &a, &TraversalConfig::new(0.01, [th + 0.1, th - 0.1])).is_err());
}
