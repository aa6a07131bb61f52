//! The `qcrl` command line: `optimize`, `traverse`, `sweep`, `qeed`, `interp`.
//!
//! Exit codes: 0 success, 1 config or I/O error, 2 optimization stopped
//! before meeting its target, 3 traversal aborted, 4 QEED requested for a
//! model that is not a single qubit, 5 interpolation angle out of range.

pub mod config;
pub mod io;
pub mod sweep;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::dynamics::propagate;
use crate::error::Error;
use crate::gradients::{values, ScalarFunctional};
use crate::levelset::{optimize_beginning, ripv_run, PulseInterpolator, TraversalProblem, TraversalRecord};
use crate::models::Preset;
use crate::operators::{trace_inner, HermitianOp};
use crate::robustness::{integral_robustness, qeed_curve};

pub use config::RunConfig;
use io::{fmt_f64, Labels, OptimizeSummary, PulseFile, RecordLine};
use sweep::{infidelity_sweep, SweepPulse};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_BEST_EFFORT: i32 = 2;
pub const EXIT_TRAVERSAL: i32 = 3;
pub const EXIT_NOT_QUBIT: i32 = 4;
pub const EXIT_OUT_OF_RANGE: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "qcrl", version, about = "Noise-robust control pulses by level-set traversal")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Random seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Time steps per propagation (overrides the config).
    #[arg(long, global = true)]
    pub nt: Option<usize>,
    /// Use every n-th record for `sweep` and `qeed` (overrides the config).
    #[arg(long, global = true)]
    pub select_every: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize a beginning pulse; writes `beginning.json`.
    Optimize,
    /// Walk the level set of the beginning pulse; writes `records.jsonl` and `summary.json`.
    Traverse {
        /// Beginning pulse (default `<out>/beginning.json`).
        #[arg(long)]
        pulse: Option<PathBuf>,
    },
    /// Infidelity against noise strength for selected records; writes `sweep.csv`.
    Sweep {
        /// Records file (default `<out>/records.jsonl`).
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Error curves for selected records; writes `qeed/` and `qeed/manifest.csv`.
    Qeed {
        /// Records file (default `<out>/records.jsonl`).
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Interpolated pulse at one angle; writes `interp.json`.
    Interp {
        /// Rotation angle; must lie inside the recorded range.
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        /// Records file (default `<out>/records.jsonl`).
        #[arg(long)]
        records: Option<PathBuf>,
    },
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_CONFIG, message: e.to_string() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::OutOfRange { .. } => EXIT_OUT_OF_RANGE,
            _ => EXIT_CONFIG,
        };
        Failure { code, message: e.to_string() }
    }
}

/// Parses `args` and runs the command, printing diagnostics to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

/// Angle, then `S1`, `S2` and undesired angles.
type Described = (f64, Vec<f64>, Vec<f64>, Vec<f64>);

struct Ctx {
    cfg: RunConfig,
    preset: Preset,
    out: PathBuf,
    labels: Labels,
}

impl Ctx {
    fn load(cli: &Cli) -> Result<Self, Failure> {
        let path = cli.config.as_ref().ok_or_else(|| Failure::config("--config is required"))?;
        let mut cfg = RunConfig::load(path)?;
        if let Some(s) = cli.seed {
            cfg.seed = Some(s);
        }
        if let Some(nt) = cli.nt {
            if nt < crate::dynamics::MIN_NT {
                return Err(Failure::config(format!("--nt must be at least {}", crate::dynamics::MIN_NT)));
            }
            cfg.nt = nt;
        }
        if let Some(k) = cli.select_every {
            if k == 0 {
                return Err(Failure::config("--select-every must be positive"));
            }
            cfg.select_every = k;
        }
        let preset = cfg.preset()?;
        let out = cfg.out_dir(cli.out.as_deref());
        std::fs::create_dir_all(&out).map_err(|e| Failure::config(format!("{}: {e}", out.display())))?;
        let constraints = match &cfg.traverse {
            Some(t) => t.constraints(&preset).into_iter().map(|c| c.label).collect(),
            None => Vec::new(),
        };
        let labels = Labels {
            noises: preset.model.noises().iter().map(|n| n.label.clone()).collect(),
            undesired: preset.undesired_labels.clone(),
            constraints,
        };
        Ok(Ctx { cfg, preset, out, labels })
    }

    fn path_or(&self, given: &Option<PathBuf>, default: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.out.join(default))
    }

    /// Angle, per-noise `S1`/`S2` and undesired angles of one pulse.
    fn describe(&self, params: &[f64], hint: Option<&HermitianOp>) -> Result<Described, Failure> {
        let p = &self.preset;
        let mut fns = vec![ScalarFunctional::Theta(p.axis.clone())];
        fns.extend(p.model.noises().iter().map(|n| ScalarFunctional::S1(n.op.clone())));
        fns.extend(p.model.noises().iter().map(|n| ScalarFunctional::S2(n.op.clone())));
        fns.extend(p.undesired.iter().cloned().map(ScalarFunctional::Undesired));
        let v = values(&p.model, &fns, params, self.cfg.nt, hint)?.values;
        let k = p.model.noises().len();
        Ok((v[0], v[1..1 + k].to_vec(), v[1 + k..1 + 2 * k].to_vec(), v[1 + 2 * k..].to_vec()))
    }

    fn pulse_file(&self, params: &[f64], hint: Option<&HermitianOp>) -> Result<PulseFile, Failure> {
        let (theta, s1, s2, und) = self.describe(params, hint)?;
        Ok(PulseFile {
            preset: self.preset.name.to_string(),
            a: io::split(&self.preset.model, params),
            theta,
            s1: RecordLine::keyed(&self.labels.noises, &s1),
            s2: RecordLine::keyed(&self.labels.noises, &s2),
            undesired: RecordLine::keyed(&self.labels.undesired, &und),
            optimize: None,
            theta_requested: None,
        })
    }

    fn read_records(&self, path: &Path) -> Result<Vec<TraversalRecord>, Failure> {
        let lines = io::read_records(path)?;
        let n = self.preset.model.n_params();
        let mut out = Vec::with_capacity(lines.len());
        for line in &lines {
            // The constraint set comes from the record itself, so sweeps and
            // interpolation do not depend on the [traverse] section.
            let labels = Labels { constraints: line.constraints.keys().cloned().collect(), ..self.labels.clone() };
            let r = line.to_record(&labels)?;
            if r.params.len() != n {
                return Err(Failure::config(format!(
                    "{}: record {} has {} parameters, the model needs {n}",
                    path.display(),
                    r.index,
                    r.params.len()
                )));
            }
            out.push(r);
        }
        Ok(out)
    }

    fn selected<'r>(&self, records: &'r [TraversalRecord]) -> Vec<&'r TraversalRecord> {
        records.iter().step_by(self.cfg.select_every).collect()
    }
}

pub fn run(cli: &Cli) -> Result<i32, Failure> {
    let ctx = Ctx::load(cli)?;
    match &cli.command {
        Command::Optimize => cmd_optimize(&ctx),
        Command::Traverse { pulse } => cmd_traverse(&ctx, &ctx.path_or(pulse, "beginning.json")),
        Command::Sweep { records } => cmd_sweep(&ctx, &ctx.path_or(records, "records.jsonl")),
        Command::Qeed { records } => cmd_qeed(&ctx, &ctx.path_or(records, "records.jsonl")),
        Command::Interp { theta, records } => cmd_interp(&ctx, &ctx.path_or(records, "records.jsonl"), *theta),
    }
}

fn cmd_optimize(ctx: &Ctx) -> Result<i32, Failure> {
    let p = &ctx.preset;
    let init = ctx.cfg.initial_params(p)?;
    let stop = ctx.cfg.stop_criteria(p);
    let outcome = optimize_beginning(&p.model, &init, &p.undesired, &ctx.cfg.beginning_weights(p), &stop, ctx.cfg.nt)?;
    let integral = match ctx.cfg.noise_distribution()? {
        Some(dist) => Some(integral_robustness(&p.model, &outcome.params, &dist, ctx.cfg.nt)?),
        None => None,
    };
    let mut file = ctx.pulse_file(&outcome.params, None)?;
    file.optimize = Some(OptimizeSummary {
        s1_target: stop.s1_target,
        converged: outcome.converged,
        iterations: outcome.iterations,
        objective: outcome.objective,
        integral_robustness: integral,
    });
    let path = ctx.out.join("beginning.json");
    io::write_json(&path, &file)?;
    log::info!("wrote {} (S1 {:?}, {} iterations)", path.display(), outcome.s1, outcome.iterations);
    if outcome.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "warning: S1 target {} not met after {} iterations; wrote best found",
            stop.s1_target, outcome.iterations
        );
        Ok(EXIT_BEST_EFFORT)
    }
}

#[derive(Serialize)]
struct ConstraintSummary {
    label: String,
    target: f64,
    min: f64,
    max: f64,
    /// `max |value - target| / |target|` (absolute when the target is 0).
    drift: f64,
}

#[derive(Serialize)]
struct TraverseSummary {
    records: usize,
    theta0: f64,
    theta_min: f64,
    theta_max: f64,
    constraints: Vec<ConstraintSummary>,
    max_ortho_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    last_good_index: Option<usize>,
}

fn cmd_traverse(ctx: &Ctx, pulse: &Path) -> Result<i32, Failure> {
    let section = ctx.cfg.traverse_section()?;
    let beginning: PulseFile = io::read_json(pulse)?;
    if beginning.preset != ctx.preset.name {
        return Err(Failure::config(format!(
            "{}: pulse was made for preset `{}`, config uses `{}`",
            pulse.display(),
            beginning.preset,
            ctx.preset.name
        )));
    }
    let params0 = beginning.flat_params();
    ctx.preset.model.check_params(&params0)?;
    let p = &ctx.preset;
    let constraints = section.constraints(p);
    let theta0 = values(&p.model, &[ScalarFunctional::Theta(p.axis.clone())], &params0, ctx.cfg.nt, None)?.values[0];
    let problem = TraversalProblem {
        model: &p.model,
        axis: p.axis.clone(),
        undesired: p.undesired.clone(),
        constraints,
        nt: ctx.cfg.nt,
    };
    let (records, error) = match ripv_run(&problem, &params0, &section.config(theta0)) {
        Ok(t) => (t.records, None),
        Err(e) => (e.records, Some(e.source)),
    };
    let lines: Vec<RecordLine> = records.iter().map(|r| RecordLine::from_record(&p.model, &ctx.labels, r)).collect();
    io::write_records(&ctx.out.join("records.jsonl"), &lines)?;

    let targets = match records.iter().find(|r| r.dtheta_measured == 0.0) {
        Some(r) => r.constraint_values.clone(),
        None => vec![f64::NAN; ctx.labels.constraints.len()],
    };
    let constraints = ctx
        .labels
        .constraints
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let vals = records.iter().map(|r| r.constraint_values[i]);
            let (min, max) = vals.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            let scale = if targets[i] != 0.0 { targets[i].abs() } else { 1.0 };
            let drift = vals.map(|v| (v - targets[i]).abs() / scale).fold(0.0, f64::max);
            ConstraintSummary { label: label.clone(), target: targets[i], min, max, drift }
        })
        .collect();
    let summary = TraverseSummary {
        records: records.len(),
        theta0,
        theta_min: records.iter().map(|r| r.theta).fold(f64::INFINITY, f64::min),
        theta_max: records.iter().map(|r| r.theta).fold(f64::NEG_INFINITY, f64::max),
        constraints,
        max_ortho_residual: records.iter().map(|r| r.ortho_residual).fold(0.0, f64::max),
        error: error.as_ref().map(|e| e.to_string()),
        last_good_index: error.as_ref().and_then(|_| records.last().map(|r| r.index)),
    };
    io::write_json(&ctx.out.join("summary.json"), &summary)?;
    match error {
        None => {
            log::info!("traversal wrote {} records", records.len());
            Ok(EXIT_OK)
        }
        Some(e) => Err(Failure {
            code: EXIT_TRAVERSAL,
            message: format!("traversal aborted: {e}; {} records written", records.len()),
        }),
    }
}

fn cmd_sweep(ctx: &Ctx, path: &Path) -> Result<i32, Failure> {
    let records = ctx.read_records(path)?;
    let pulses: Vec<SweepPulse> = ctx
        .selected(&records)
        .into_iter()
        .map(|r| SweepPulse { index: r.index, theta: r.theta, params: r.params.clone() })
        .collect();
    let grid = ctx.cfg.sweep.values()?;
    let rows = infidelity_sweep(&ctx.preset.model, &pulses, &grid, ctx.cfg.nt)?;
    io::write_csv(
        &ctx.out.join("sweep.csv"),
        "index,theta,noise,delta_rel,infidelity",
        rows.iter().map(|r| {
            format!("{},{},{},{},{}", r.index, fmt_f64(r.theta), r.noise, fmt_f64(r.delta_rel), fmt_f64(r.infidelity))
        }),
    )?;
    Ok(EXIT_OK)
}

fn cmd_qeed(ctx: &Ctx, path: &Path) -> Result<i32, Failure> {
    if ctx.preset.model.dim() != 2 {
        return Err(Failure {
            code: EXIT_NOT_QUBIT,
            message: format!(
                "qeed needs a single-qubit model, `{}` has dimension {}",
                ctx.preset.name,
                ctx.preset.model.dim()
            ),
        });
    }
    let records = ctx.read_records(path)?;
    let dir = ctx.out.join("qeed");
    std::fs::create_dir_all(&dir).map_err(|e| Failure::config(format!("{}: {e}", dir.display())))?;
    let mut manifest = Vec::new();
    for r in ctx.selected(&records) {
        let traj = propagate(&ctx.preset.model, &r.params, ctx.cfg.nt)?;
        for noise in ctx.preset.model.noises() {
            let curve = qeed_curve(&traj, &noise.op)?;
            let name = format!("qeed_{:06}_{}.csv", r.index, noise.label);
            let file = dir.join(&name);
            let mut buf = Vec::new();
            curve.write_csv(&mut buf).map_err(|e| Failure::config(e.to_string()))?;
            std::fs::write(&file, buf).map_err(|e| Failure::config(format!("{}: {e}", file.display())))?;
            manifest.push(format!(
                "{},{},{},{},{}",
                r.index,
                fmt_f64(r.theta),
                noise.label,
                name,
                fmt_f64(curve.closure())
            ));
        }
    }
    io::write_csv(&dir.join("manifest.csv"), "index,theta,noise,file,closure", manifest)?;
    Ok(EXIT_OK)
}

fn cmd_interp(ctx: &Ctx, path: &Path, theta: f64) -> Result<i32, Failure> {
    let records = ctx.read_records(path)?;
    let interp = PulseInterpolator::new(&records)?;
    let params = interp.eval(theta)?;
    // Angles past the principal branch are read back next to the request.
    let axis = &ctx.preset.axis;
    let hint = axis.scale(theta / trace_inner(axis.matrix(), axis.matrix()).re);
    let mut file = ctx.pulse_file(&params, Some(&hint))?;
    file.theta_requested = Some(theta);
    io::write_json(&ctx.out.join("interp.json"), &file)?;
    Ok(EXIT_OK)
}
