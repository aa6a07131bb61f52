//! Run configuration (TOML). Unknown keys are rejected everywhere.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::DEFAULT_NT;
use crate::error::{Error, Result};
use crate::gradients::ScalarFunctional;
use crate::levelset::{BeginningWeights, Constraint, Correction, StopCriteria, TraversalConfig};
use crate::models::{build_single_qubit, default_basis, preset, PauliAxis, Preset};
use crate::pulses::{BasisKind, PulseBasis};
use crate::robustness::{NoiseDistribution, NoiseLaw};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Required by any run that draws random numbers.
    pub seed: Option<u64>,
    #[serde(default = "default_nt")]
    pub nt: usize,
    /// Output directory; `--out` takes precedence.
    pub out: Option<PathBuf>,
    #[serde(default = "default_select_every")]
    pub select_every: usize,
    pub model: ModelSection,
    /// Defaults to a 4-harmonic windowed Fourier basis on a sin window, `T = 50`.
    pub basis: Option<PulseBasis>,
    #[serde(default)]
    pub optimize: OptimizeSection,
    pub traverse: Option<TraverseSection>,
    pub noise: Option<NoiseSection>,
    #[serde(default)]
    pub sweep: SweepGrid,
}

fn default_nt() -> usize {
    DEFAULT_NT
}

fn default_select_every() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub preset: String,
    /// Single-qubit presets only: replace the control axes.
    pub controls: Option<Vec<PauliAxis>>,
    /// Single-qubit presets only: replace the noise axes.
    pub noises: Option<Vec<PauliAxis>>,
    /// Single-qubit presets only: replace the undesired axes.
    pub undesired: Option<Vec<PauliAxis>>,
}

/// Initial pulse for `optimize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// Only the first control is on, shaped by its lowest basis function and
    /// scaled to the given area.
    Baseline {
        #[serde(default = "default_area")]
        area: f64,
    },
    /// Uniform in `[-scale, scale]`, then (optionally) the baseline area
    /// added on top.
    Random {
        #[serde(default = "default_scale")]
        scale: f64,
        area: Option<f64>,
    },
    /// Flat parameter vector, all controls concatenated.
    Params { values: Vec<f64> },
}

fn default_area() -> f64 {
    PI
}

fn default_scale() -> f64 {
    0.05
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec::Baseline { area: PI }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    /// Defaults to `0.05 T`.
    pub s1_target: Option<f64>,
    /// Also require `S2 <= s2_target` (enables the `S2` terms even with `w2 = 0`).
    pub s2_target: Option<f64>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_w1")]
    pub w1: f64,
    #[serde(default)]
    pub w2: f64,
    /// Defaults to 100 when the model has undesired axes, else 0.
    pub w_undesired: Option<f64>,
    #[serde(default = "default_undesired_tol")]
    pub undesired_tol: f64,
    /// 0 disables landing.
    #[serde(default = "default_land_fraction")]
    pub land_fraction: f64,
    #[serde(default)]
    pub init: InitSpec,
}

fn default_max_iters() -> usize {
    5000
}

fn default_w1() -> f64 {
    1.0
}

fn default_undesired_tol() -> f64 {
    1e-4
}

fn default_land_fraction() -> f64 {
    0.95
}

impl Default for OptimizeSection {
    fn default() -> Self {
        OptimizeSection {
            s1_target: None,
            s2_target: None,
            max_iters: default_max_iters(),
            w1: default_w1(),
            w2: 0.0,
            w_undesired: None,
            undesired_tol: default_undesired_tol(),
            land_fraction: default_land_fraction(),
            init: InitSpec::default(),
        }
    }
}

/// Which functionals a traversal holds at their beginning values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hold {
    /// `S1` of every noise axis.
    S1,
    /// `S2` of every noise axis.
    S2,
    /// Every undesired rotation angle.
    Undesired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraverseSection {
    pub dtheta: f64,
    /// Absolute `[theta_L, theta_R]`.
    pub theta_range: Option<[f64; 2]>,
    /// `[theta_L, theta_R]` relative to the beginning angle.
    pub span: Option<[f64; 2]>,
    #[serde(default = "default_hold")]
    pub hold: Vec<Hold>,
    pub max_iters: Option<usize>,
    pub eps_irr: Option<f64>,
    pub step_tol: Option<f64>,
    #[serde(default)]
    pub correction: Correction,
}

fn default_hold() -> Vec<Hold> {
    vec![Hold::S1, Hold::Undesired]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub laws: Vec<NoiseLaw>,
    pub samples: usize,
}

/// Signed `delta / Omega_m` values of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    /// Explicit grid; overrides the log-spaced one.
    pub delta_rel: Option<Vec<f64>>,
    #[serde(default = "default_rel_min")]
    pub min: f64,
    #[serde(default = "default_rel_max")]
    pub max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_true")]
    pub both_signs: bool,
    #[serde(default = "default_true")]
    pub include_zero: bool,
}

fn default_rel_min() -> f64 {
    1e-4
}

fn default_rel_max() -> f64 {
    0.3
}

fn default_points() -> usize {
    61
}

fn default_true() -> bool {
    true
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            delta_rel: None,
            min: default_rel_min(),
            max: default_rel_max(),
            points: default_points(),
            both_signs: true,
            include_zero: true,
        }
    }
}

impl SweepGrid {
    /// Sorted ascending.
    pub fn values(&self) -> Result<Vec<f64>> {
        let mut v = match &self.delta_rel {
            Some(list) => {
                if list.iter().any(|x| !x.is_finite()) {
                    return Err(Error::invalid("sweep.delta_rel values must be finite"));
                }
                list.clone()
            }
            None => {
                if !(self.min > 0.0 && self.max >= self.min && self.max.is_finite()) || self.points == 0 {
                    return Err(Error::invalid("sweep grid needs 0 < min <= max and points >= 1"));
                }
                let (l0, l1) = (self.min.ln(), self.max.ln());
                let mut v: Vec<f64> = (0..self.points)
                    .map(|k| {
                        if self.points == 1 {
                            self.min
                        } else {
                            (l0 + (l1 - l0) * k as f64 / (self.points - 1) as f64).exp()
                        }
                    })
                    .collect();
                if self.both_signs {
                    let neg: Vec<f64> = v.iter().map(|x| -x).collect();
                    v.extend(neg);
                }
                if self.include_zero {
                    v.push(0.0);
                }
                v
            }
        };
        v.sort_by(f64::total_cmp);
        v.dedup();
        Ok(v)
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.nt < crate::dynamics::MIN_NT {
            return Err(Error::invalid(format!("nt: must be at least {}", crate::dynamics::MIN_NT)));
        }
        if self.select_every == 0 {
            return Err(Error::invalid("select_every: must be positive"));
        }
        if let Some(t) = &self.traverse {
            if t.theta_range.is_some() == t.span.is_some() {
                return Err(Error::invalid("traverse: give exactly one of theta_range or span"));
            }
        }
        self.sweep.values()?;
        Ok(())
    }

    pub fn basis(&self) -> PulseBasis {
        self.basis.clone().unwrap_or_else(default_basis)
    }

    /// The preset with any single-qubit overrides applied.
    pub fn preset(&self) -> Result<Preset> {
        let basis = self.basis();
        let mut p = preset(&self.model.preset, &basis)?;
        let m = &self.model;
        if m.controls.is_none() && m.noises.is_none() && m.undesired.is_none() {
            return Ok(p);
        }
        if p.model.dim() != 2 {
            return Err(Error::invalid(format!(
                "model: axis overrides apply to single-qubit presets, not `{}`",
                m.preset
            )));
        }
        let controls = match &m.controls {
            Some(c) => c.clone(),
            None => p.model.controls().iter().map(|c| axis_of(&c.op.scale(2.0))).collect::<Result<_>>()?,
        };
        let noises = match &m.noises {
            Some(n) => n.clone(),
            None => p.model.noises().iter().map(|n| axis_of(&n.op)).collect::<Result<_>>()?,
        };
        p.model = build_single_qubit(&controls, &noises, &basis)?;
        if let Some(u) = &m.undesired {
            p.undesired = u.iter().map(|a| a.op()).collect();
            p.undesired_labels = u.iter().map(|a| a.label().to_string()).collect();
        }
        Ok(p)
    }

    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf).or_else(|| self.out.clone()).unwrap_or_else(|| PathBuf::from("qcrl-out"))
    }

    fn require_seed(&self, what: &str) -> Result<u64> {
        self.seed.ok_or_else(|| Error::invalid(format!("seed: required for {what}")))
    }

    /// Initial parameters for `optimize`.
    pub fn initial_params(&self, p: &Preset) -> Result<Vec<f64>> {
        let n = p.model.n_params();
        match &self.optimize.init {
            InitSpec::Params { values } => {
                if values.len() != n {
                    return Err(Error::invalid(format!(
                        "optimize.init.values: expected {n} parameters, got {}",
                        values.len()
                    )));
                }
                Ok(values.clone())
            }
            InitSpec::Baseline { area } => baseline(p, *area),
            InitSpec::Random { scale, area } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.require_seed("a random initial pulse")?);
                let mut a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
                if let Some(area) = area {
                    a.iter_mut().zip(baseline(p, *area)?).for_each(|(x, b)| *x += b);
                }
                Ok(a)
            }
        }
    }

    pub fn beginning_weights(&self, p: &Preset) -> BeginningWeights {
        let o = &self.optimize;
        let w_undesired = o.w_undesired.unwrap_or(if p.undesired.is_empty() { 0.0 } else { 100.0 });
        BeginningWeights { w1: o.w1, w2: o.w2, w_undesired }
    }

    pub fn stop_criteria(&self, p: &Preset) -> StopCriteria {
        let o = &self.optimize;
        let target = o.s1_target.unwrap_or(0.05 * p.model.gate_time());
        StopCriteria {
            s1_target: target,
            s2_target: o.s2_target,
            max_iters: o.max_iters,
            undesired_tol: o.undesired_tol,
            land_fraction: (o.land_fraction > 0.0).then_some(o.land_fraction),
        }
    }

    pub fn noise_distribution(&self) -> Result<Option<NoiseDistribution>> {
        match &self.noise {
            None => Ok(None),
            Some(n) => Ok(Some(NoiseDistribution {
                laws: n.laws.clone(),
                samples: n.samples,
                seed: self.require_seed("a noise distribution")?,
            })),
        }
    }

    pub fn traverse_section(&self) -> Result<&TraverseSection> {
        self.traverse.as_ref().ok_or_else(|| Error::invalid("traverse: section missing"))
    }
}

impl TraverseSection {
    /// Held functionals, labelled `s1_<noise>`, `s2_<noise>`, `vartheta_<axis>`.
    pub fn constraints(&self, p: &Preset) -> Vec<Constraint> {
        let mut out = Vec::new();
        for hold in [Hold::S1, Hold::S2, Hold::Undesired] {
            if !self.hold.contains(&hold) {
                continue;
            }
            match hold {
                Hold::S1 | Hold::S2 => {
                    for n in p.model.noises() {
                        let (prefix, f) = match hold {
                            Hold::S1 => ("s1", ScalarFunctional::S1(n.op.clone())),
                            _ => ("s2", ScalarFunctional::S2(n.op.clone())),
                        };
                        out.push(Constraint { label: format!("{prefix}_{}", n.label), functional: f });
                    }
                }
                Hold::Undesired => {
                    for (u, label) in p.undesired.iter().zip(&p.undesired_labels) {
                        out.push(Constraint {
                            label: format!("vartheta_{label}"),
                            functional: ScalarFunctional::Undesired(u.clone()),
                        });
                    }
                }
            }
        }
        out
    }

    pub fn config(&self, theta0: f64) -> TraversalConfig {
        let range = match (self.theta_range, self.span) {
            (Some(r), _) => r,
            (None, Some([a, b])) => [theta0 + a, theta0 + b],
            (None, None) => [theta0, theta0],
        };
        let mut cfg = TraversalConfig::new(self.dtheta, range);
        cfg.max_iters = self.max_iters.unwrap_or(cfg.max_iters);
        cfg.eps_irr = self.eps_irr.unwrap_or(cfg.eps_irr);
        cfg.step_tol = self.step_tol.unwrap_or(cfg.step_tol);
        cfg.correction = self.correction;
        cfg
    }
}

fn axis_of(op: &crate::operators::HermitianOp) -> Result<PauliAxis> {
    [PauliAxis::X, PauliAxis::Y, PauliAxis::Z]
        .into_iter()
        .find(|a| (a.op().matrix() - op.matrix()).norm() < 1e-12)
        .ok_or_else(|| Error::invalid("model term is not a Pauli axis"))
}

/// First control on with its lowest basis function, scaled to `area`.
fn baseline(p: &Preset, area: f64) -> Result<Vec<f64>> {
    let mut a = vec![0.0; p.model.n_params()];
    let basis = &p.model.controls()[0].basis;
    let arity = basis.arity();
    let mut unit = vec![0.0; arity];
    match basis.kind() {
        BasisKind::PiecewiseConstant { .. } => unit.iter_mut().for_each(|x| *x = 1.0),
        BasisKind::WindowedFourier { .. } | BasisKind::Morlet { .. } => unit[0] = 1.0,
        BasisKind::TaylorProduct { .. } => {
            return Err(Error::invalid("optimize.init: baseline is not defined for the taylor_product basis"))
        }
    }
    let unit_area = basis.area(&unit);
    if unit_area.abs() < 1e-12 {
        return Err(Error::invalid("optimize.init: lowest basis function has zero area"));
    }
    a[..arity].iter_mut().zip(&unit).for_each(|(x, u)| *x = u * area / unit_area);
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "[model]\npreset = \"sq_x_z\"\n";

    #[test]
    fn default_grid_is_61_log_points_each_sign() {
        let v = SweepGrid::default().values().unwrap();
        assert_eq!(v.len(), 123);
        assert!((v[0] + 0.3).abs() < 1e-15 && (v[122] - 0.3).abs() < 1e-15);
        assert_eq!(v[61], 0.0);
        assert!((v[62] - 1e-4).abs() < 1e-18);
        let ratio = v[63] / v[62];
        assert!(v[62..].windows(2).all(|w| (w[1] / w[0] - ratio).abs() < 1e-12));
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.nt, DEFAULT_NT);
        assert_eq!(cfg.select_every, 100);
        let p = cfg.preset().unwrap();
        assert_eq!(p.model.n_params(), 9);
        assert_eq!(cfg.stop_criteria(&p).s1_target, 2.5);
        let a = cfg.initial_params(&p).unwrap();
        assert!((p.model.controls()[0].basis.area(&a) - PI).abs() < 1e-10);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml(&format!("{BASE}bogus = 1\n")).unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
        let err = RunConfig::from_toml(&format!("{BASE}[traverse]\ndtheta = 0.1\nspan = [0, 1]\nwat = 2\n"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("wat"), "{err}");
    }

    #[test]
    fn traverse_needs_one_range() {
        assert!(RunConfig::from_toml(&format!("{BASE}[traverse]\ndtheta = 0.1\n")).is_err());
        let both = format!("{BASE}[traverse]\ndtheta = 0.1\nspan = [0, 1]\ntheta_range = [0, 1]\n");
        assert!(RunConfig::from_toml(&both).is_err());
        let cfg = RunConfig::from_toml(&format!("{BASE}[traverse]\ndtheta = 0.1\nspan = [-1, 2]\n")).unwrap();
        assert_eq!(cfg.traverse.unwrap().config(3.0).theta_range, [2.0, 5.0]);
    }

    #[test]
    fn axis_overrides() {
        let cfg = RunConfig::from_toml(
            "[model]\npreset = \"sq_x_z\"\ncontrols = [\"x\", \"y\"]\nnoises = [\"z\"]\nundesired = [\"z\"]\n",
        )
        .unwrap();
        let p = cfg.preset().unwrap();
        assert_eq!(p.model.n_params(), 18);
        assert_eq!(p.undesired_labels, vec!["z"]);
        let cfg = RunConfig::from_toml("[model]\npreset = \"tq_xy_detuning\"\nnoises = [\"z\"]\n").unwrap();
        assert!(cfg.preset().is_err());
    }

    #[test]
    fn hold_labels() {
        let cfg = RunConfig::from_toml(
            "[model]\npreset = \"sq_xy_xyz\"\n[traverse]\ndtheta = 5e-4\nspan = [0, 1]\nhold = [\"undesired\", \"s1\"]\n",
        )
        .unwrap();
        let p = cfg.preset().unwrap();
        let labels: Vec<String> = cfg.traverse.as_ref().unwrap().constraints(&p).into_iter().map(|c| c.label).collect();
        assert_eq!(labels, ["s1_x", "s1_y", "s1_z", "vartheta_y", "vartheta_z"]);
        assert_eq!(cfg.beginning_weights(&p).w_undesired, 100.0);
    }

    #[test]
    fn explicit_basis_and_noise() {
        let text = r#"
seed = 4
[model]
preset = "sq_x_z"
[basis]
gate_time = 40.0
[basis.basis]
kind = "morlet"
orders = 3
[noise]
samples = 10
laws = [{ law = "uniform", b = 0.01 }]
"#;
        let cfg = RunConfig::from_toml(text).unwrap();
        assert_eq!(cfg.preset().unwrap().model.n_params(), 3);
        assert_eq!(cfg.noise_distribution().unwrap().unwrap().seed, 4);
        let cfg = RunConfig::from_toml(&text.replace("seed = 4", "")).unwrap();
        assert!(cfg.noise_distribution().is_err());
    }
}
