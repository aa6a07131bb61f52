//! Result files: pulse JSON, line-delimited records and CSV tables. Floats
//! are written with 17 significant digits.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::SystemModel;
use crate::error::{Error, Result};
use crate::levelset::TraversalRecord;

/// `serde_json` formatter printing every float as `{:.16e}`.
#[derive(Debug, Default, Clone, Copy)]
pub struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// A float field for CSV rows.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    value.serialize(&mut ser).map_err(|e| Error::invalid(format!("serialization failed: {e}")))?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::invalid(format!("{}: {e}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut line = to_json_line(value)?;
    line.push('\n');
    std::fs::write(path, line).map_err(|e| io_err(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

/// Writes `header` and then one line per row.
pub fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let go = || -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        for row in rows {
            writeln!(w, "{row}")?;
        }
        w.flush()
    };
    go().map_err(|e| io_err(path, e))
}

/// A single pulse with its robustness summary; produced by `optimize` and
/// `interp`, consumed by `traverse`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseFile {
    pub preset: String,
    /// Parameters per control.
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub theta: f64,
    pub s1: BTreeMap<String, f64>,
    pub s2: BTreeMap<String, f64>,
    pub undesired: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeSummary>,
    /// Angle asked of `interp`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_requested: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSummary {
    pub s1_target: f64,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integral_robustness: Option<f64>,
}

impl PulseFile {
    pub fn flat_params(&self) -> Vec<f64> {
        self.a.iter().flatten().copied().collect()
    }
}

/// Parameters split per control.
pub fn split(model: &SystemModel, params: &[f64]) -> Vec<Vec<f64>> {
    model.split_params(params).into_iter().map(<[f64]>::to_vec).collect()
}

/// One line of the records file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordLine {
    pub index: usize,
    pub theta: f64,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub constraints: BTreeMap<String, f64>,
    pub s1: BTreeMap<String, f64>,
    pub s2: BTreeMap<String, f64>,
    pub undesired: BTreeMap<String, f64>,
    pub dtheta_measured: f64,
    pub ortho_residual: f64,
}

/// Labels used to key the per-axis maps of records and pulse files.
#[derive(Debug, Clone)]
pub struct Labels {
    pub noises: Vec<String>,
    pub undesired: Vec<String>,
    pub constraints: Vec<String>,
}

fn keyed(labels: &[String], values: &[f64]) -> BTreeMap<String, f64> {
    labels.iter().cloned().zip(values.iter().copied()).collect()
}

impl RecordLine {
    pub fn from_record(model: &SystemModel, labels: &Labels, r: &TraversalRecord) -> Self {
        RecordLine {
            index: r.index,
            theta: r.theta,
            a: split(model, &r.params),
            constraints: keyed(&labels.constraints, &r.constraint_values),
            s1: keyed(&labels.noises, &r.s1),
            s2: keyed(&labels.noises, &r.s2),
            undesired: keyed(&labels.undesired, &r.undesired),
            dtheta_measured: r.dtheta_measured,
            ortho_residual: r.ortho_residual,
        }
    }

    /// Back to a record; map values come out in `labels` order.
    pub fn to_record(&self, labels: &Labels) -> Result<TraversalRecord> {
        let pick = |map: &BTreeMap<String, f64>, keys: &[String]| -> Result<Vec<f64>> {
            keys.iter()
                .map(|k| {
                    map.get(k).copied().ok_or_else(|| Error::invalid(format!("record {}: missing `{k}`", self.index)))
                })
                .collect()
        };
        Ok(TraversalRecord {
            index: self.index,
            theta: self.theta,
            params: self.a.iter().flatten().copied().collect(),
            constraint_values: pick(&self.constraints, &labels.constraints)?,
            s1: pick(&self.s1, &labels.noises)?,
            s2: pick(&self.s2, &labels.noises)?,
            undesired: pick(&self.undesired, &labels.undesired)?,
            dtheta_measured: self.dtheta_measured,
            ortho_residual: self.ortho_residual,
        })
    }

    pub fn keyed(labels: &[String], values: &[f64]) -> BTreeMap<String, f64> {
        keyed(labels, values)
    }
}

pub fn write_records(path: &Path, lines: &[RecordLine]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for line in lines {
        writeln!(w, "{}", to_json_line(line)?).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<RecordLine>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| io_err(path, format!("line {}: {e}", i + 1)))?);
    }
    if out.is_empty() {
        return Err(io_err(path, "no records"));
    }
    Ok(out)
}
