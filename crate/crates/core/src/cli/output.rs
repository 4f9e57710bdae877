//! Result records, aggregates and their CSV / JSON encodings.

use std::io::Write;
use std::path::Path;

use serde::{Serialize, Serializer};

use super::CliError;
use crate::optimizer::TraceRecord;

/// Version token written in the `schema` column of every CSV.
pub const SCHEMA: &str = "bdris.v1";

/// A power ratio in dB; `-inf` when the linear value is not positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Db(pub f64);

impl Db {
    pub fn from_linear(x: f64) -> Self {
        Db(if x > 0.0 {
            10.0 * x.log10()
        } else {
            f64::NEG_INFINITY
        })
    }
}

impl Serialize for Db {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str("-inf")
        }
    }
}

/// Outcome of one architecture on one channel realization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub schema: &'static str,
    pub axis: String,
    pub value: String,
    pub trial_index: u64,
    pub architecture: String,
    pub beta: f64,
    #[serde(rename = "L")]
    pub l: usize,
    /// Alphabet size, `continuous`, or empty for architectures without one.
    #[serde(rename = "M")]
    pub m: String,
    pub snr_c: f64,
    pub snr_c_db: Db,
    pub snr_r: f64,
    pub snr_r_db: Db,
    pub snr_t: f64,
    pub snr_t_db: Db,
    pub outer_iterations: usize,
    pub converged: bool,
    pub unitarity_residual: Option<f64>,
    pub res_phi0: Option<f64>,
    pub res_phi1: Option<f64>,
    #[serde(rename = "res_U")]
    pub res_u: Option<f64>,
    pub seed: u64,
    /// Left out of the CSV files so that they are reproducible byte for byte.
    #[serde(skip)]
    pub wall_time_seconds: f64,
}

impl ResultRecord {
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("record serializes");
        v["wall_time_seconds"] = serde_json::json!(self.wall_time_seconds);
        v
    }
}

/// Mean, sample standard deviation and count of one (value, architecture)
/// cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub schema: &'static str,
    pub axis: String,
    pub value: String,
    pub architecture: String,
    pub count: usize,
    pub snr_c_mean: f64,
    pub snr_c_std: f64,
    pub snr_r_mean: f64,
    pub snr_r_std: f64,
    pub snr_t_mean: f64,
    pub snr_t_std: f64,
    pub snr_c_mean_db: Db,
    pub snr_r_mean_db: Db,
    pub snr_t_mean_db: Db,
    pub converged_fraction: f64,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups records by (value, architecture) in order of first appearance.
pub fn aggregate(records: &[ResultRecord]) -> Vec<AggregateRow> {
    let mut keys: Vec<(&str, &str, &str)> = Vec::new();
    for r in records {
        let k = (r.axis.as_str(), r.value.as_str(), r.architecture.as_str());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(axis, value, arch)| {
            let cell: Vec<&ResultRecord> = records
                .iter()
                .filter(|r| r.axis == axis && r.value == value && r.architecture == arch)
                .collect();
            let col = |f: fn(&ResultRecord) -> f64| {
                mean_std(&cell.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            let (c, cs) = col(|r| r.snr_c);
            let (rr, rs) = col(|r| r.snr_r);
            let (t, ts) = col(|r| r.snr_t);
            AggregateRow {
                schema: SCHEMA,
                axis: axis.to_string(),
                value: value.to_string(),
                architecture: arch.to_string(),
                count: cell.len(),
                snr_c_mean: c,
                snr_c_std: cs,
                snr_r_mean: rr,
                snr_r_std: rs,
                snr_t_mean: t,
                snr_t_std: ts,
                snr_c_mean_db: Db::from_linear(c),
                snr_r_mean_db: Db::from_linear(rr),
                snr_t_mean_db: Db::from_linear(t),
                converged_fraction: cell.iter().filter(|r| r.converged).count() as f64
                    / cell.len() as f64,
            }
        })
        .collect()
}

/// Row of a per-iteration trace file.
#[derive(Serialize)]
struct TraceRow {
    outer_iter: usize,
    snr_t: f64,
    lagrangian: f64,
    res_phi0: f64,
    res_phi1: Option<f64>,
    #[serde(rename = "res_U")]
    res_u: Option<f64>,
    unitarity_residual: f64,
}

fn output_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output(format!("{}: {e}", path.display()))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| output_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| output_error(path, e))?;
    }
    w.flush().map_err(|e| output_error(path, e))
}

pub fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| output_error(path, e))?;
    for t in trace {
        w.serialize(TraceRow {
            outer_iter: t.outer_iter,
            snr_t: t.snr_t,
            lagrangian: t.lagrangian,
            res_phi0: t.res_phi0,
            res_phi1: t.res_phi1,
            res_u: t.res_u,
            unitarity_residual: t.unitarity_residual,
        })
        .map_err(|e| output_error(path, e))?;
    }
    if trace.is_empty() {
        w.write_record([
            "outer_iter",
            "snr_t",
            "lagrangian",
            "res_phi0",
            "res_phi1",
            "res_U",
            "unitarity_residual",
        ])
        .map_err(|e| output_error(path, e))?;
    }
    w.flush().map_err(|e| output_error(path, e))
}

pub fn write_jsonl(path: &Path, records: &[ResultRecord]) -> Result<(), CliError> {
    let mut f =
        std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| output_error(path, e))?);
    for r in records {
        writeln!(f, "{}", r.to_json()).map_err(|e| output_error(path, e))?;
    }
    f.flush().map_err(|e| output_error(path, e))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("json value serializes");
    std::fs::write(path, text + "\n").map_err(|e| output_error(path, e))
}
