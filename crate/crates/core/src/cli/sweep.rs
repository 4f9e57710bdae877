//! Single runs and Monte-Carlo sweeps over paired channel realizations.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::input::{Axis, Scenario};
use super::output::{aggregate, write_csv, write_jsonl, write_trace, Db, ResultRecord, SCHEMA};
use super::CliError;
use crate::baselines::{dris_optimize, no_ris_snr, random_baseline_snr};
use crate::channel::{sample_channels, ChannelSet};
use crate::config::{Resolution, SystemConfig};
use crate::model::SnrReport;
use crate::optimizer::{run_algorithm1, DesignOutcome, TraceRecord};

/// A design compared in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Bdris(Resolution),
    Dris(Resolution),
    NoRis,
    /// The random symmetric unitary used to start the fully connected design.
    Random,
}

impl Architecture {
    /// Parses `bdris-continuous`, `bdris-4`, `dris-8`, `no-ris`, `random`;
    /// a bare `bdris` / `dris` takes the configured resolution.
    pub fn parse(label: &str, configured: Resolution) -> Result<Self, String> {
        let label = label.trim();
        let resolution = |rest: Option<&str>| -> Result<Resolution, String> {
            match rest {
                None => Ok(configured),
                Some("continuous") => Ok(Resolution::Continuous),
                Some(m) => match m.parse::<u32>() {
                    Ok(m) if m >= 2 => Ok(Resolution::Discrete(m)),
                    _ => Err(format!("bad resolution {m:?} in architecture {label:?}")),
                },
            }
        };
        let (head, rest) = match label.split_once('-') {
            Some((h, r)) if h == "bdris" || h == "dris" => (h, Some(r)),
            _ => (label, None),
        };
        match head {
            "bdris" => Ok(Architecture::Bdris(resolution(rest)?)),
            "dris" => Ok(Architecture::Dris(resolution(rest)?)),
            "no-ris" => Ok(Architecture::NoRis),
            "random" => Ok(Architecture::Random),
            _ => Err(format!(
                "unknown architecture {label:?} (expected bdris[-M|-continuous], dris[-M|-continuous], no-ris or random)"
            )),
        }
    }

    pub fn resolution(self) -> Option<Resolution> {
        match self {
            Architecture::Bdris(r) | Architecture::Dris(r) => Some(r),
            _ => None,
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Architecture::Bdris(r) => write!(f, "bdris-{r}"),
            Architecture::Dris(r) => write!(f, "dris-{r}"),
            Architecture::NoRis => f.write_str("no-ris"),
            Architecture::Random => f.write_str("random"),
        }
    }
}

/// One point on the swept axis.
#[derive(Debug, Clone, PartialEq)]
pub enum AxisValue {
    Beta(f64),
    Grid(usize, usize),
    Resolution(Resolution),
    Architecture(String),
}

impl AxisValue {
    pub fn label(&self) -> String {
        match self {
            AxisValue::Beta(b) => format!("{b}"),
            AxisValue::Grid(x, y) => format!("{x}x{y}"),
            AxisValue::Resolution(r) => r.to_string(),
            AxisValue::Architecture(a) => a.clone(),
        }
    }

    fn apply(&self, cfg: &mut SystemConfig) {
        match self {
            AxisValue::Beta(b) => cfg.design.beta = *b,
            AxisValue::Grid(x, y) => {
                cfg.array.ris_x = *x;
                cfg.array.ris_y = *y;
            }
            AxisValue::Resolution(r) => cfg.design.resolution = *r,
            AxisValue::Architecture(_) => {}
        }
    }
}

/// A checked sweep description.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<AxisValue>,
    pub trials: u64,
    /// Architecture labels run at every (value, trial); unused on the
    /// architecture axis.
    pub architectures: Vec<String>,
    pub base: SystemConfig,
    pub output_dir: PathBuf,
}

fn parse_value(axis: Axis, v: &toml::Value) -> Result<AxisValue, String> {
    match axis {
        Axis::Beta => {
            let b = v
                .as_float()
                .or_else(|| v.as_integer().map(|i| i as f64))
                .ok_or_else(|| format!("beta values must be numbers, got {v}"))?;
            if !(0.0..=1.0).contains(&b) {
                return Err(format!("beta values must lie in [0, 1], got {b}"));
            }
            Ok(AxisValue::Beta(b))
        }
        Axis::L => {
            let pair = v
                .as_array()
                .filter(|a| a.len() == 2)
                .and_then(|a| Some((a[0].as_integer()?, a[1].as_integer()?)))
                .ok_or_else(|| format!("L values must be [lx, ly] pairs, got {v}"))?;
            if pair.0 < 1 || pair.1 < 1 {
                return Err(format!("grid sides must be >= 1, got {v}"));
            }
            Ok(AxisValue::Grid(pair.0 as usize, pair.1 as usize))
        }
        Axis::M => match v {
            toml::Value::Integer(m) if *m >= 2 && *m <= u32::MAX as i64 => {
                Ok(AxisValue::Resolution(Resolution::Discrete(*m as u32)))
            }
            toml::Value::String(s) if s == "continuous" => {
                Ok(AxisValue::Resolution(Resolution::Continuous))
            }
            _ => Err(format!(
                "M values must be integers >= 2 or \"continuous\", got {v}"
            )),
        },
        Axis::Architecture => {
            let s = v
                .as_str()
                .ok_or_else(|| format!("architecture values must be strings, got {v}"))?;
            Architecture::parse(s, Resolution::Continuous)?;
            Ok(AxisValue::Architecture(s.to_string()))
        }
    }
}

impl SweepSpec {
    pub fn from_scenario(s: &Scenario, out_override: Option<&Path>) -> Result<Self, CliError> {
        let raw = s
            .sweep
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("{}: missing [sweep] table", s.label)))?;
        if raw.values.is_empty() {
            return Err(s.config_error("sweep.values", "must not be empty"));
        }
        if raw.trials == 0 {
            return Err(s.config_error("sweep.trials", "must be >= 1"));
        }
        let values = raw
            .values
            .iter()
            .map(|v| parse_value(raw.axis, v))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| s.config_error("sweep.values", e))?;
        let architectures = match (raw.axis, &raw.architectures) {
            (Axis::Architecture, Some(_)) => {
                return Err(s.config_error(
                    "sweep.architectures",
                    "not used when sweeping the architecture axis",
                ))
            }
            (Axis::Architecture, None) => Vec::new(),
            (_, Some(a)) if a.is_empty() => {
                return Err(s.config_error("sweep.architectures", "must not be empty"))
            }
            (_, Some(a)) => a.clone(),
            (_, None) => vec!["bdris".to_string()],
        };
        for a in &architectures {
            Architecture::parse(a, s.system.design.resolution)
                .map_err(|e| s.config_error("sweep.architectures", e))?;
        }
        let spec = SweepSpec {
            axis: raw.axis,
            values,
            trials: raw.trials,
            architectures,
            base: s.system.clone(),
            output_dir: out_override
                .map(Path::to_path_buf)
                .or_else(|| raw.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("sweep-out")),
        };
        for v in &spec.values {
            spec.config_for(v)
                .validate()
                .map_err(|e| s.config_error("sweep.values", e))?;
        }
        Ok(spec)
    }

    pub fn config_for(&self, value: &AxisValue) -> SystemConfig {
        let mut cfg = self.base.clone();
        value.apply(&mut cfg);
        cfg
    }

    /// Architectures evaluated at `value`, resolved against its config.
    pub fn architectures_for(&self, value: &AxisValue) -> Vec<Architecture> {
        let cfg = self.config_for(value);
        let labels: Vec<&str> = match value {
            AxisValue::Architecture(a) => vec![a.as_str()],
            _ => self.architectures.iter().map(String::as_str).collect(),
        };
        labels
            .into_iter()
            .map(|l| {
                Architecture::parse(l, cfg.design.resolution)
                    .expect("checked when the spec was built")
            })
            .collect()
    }
}

/// Result and optimizer trace of one architecture on one realization.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: ResultRecord,
    pub trace: Vec<TraceRecord>,
}

fn record_from(
    cfg: &SystemConfig,
    trial: u64,
    arch: Architecture,
    report: SnrReport,
    outcome: Option<&DesignOutcome>,
    unitarity: Option<f64>,
) -> ResultRecord {
    let (res0, res1, resu) = match outcome {
        Some(o) => {
            let (a, b, c) = o.consensus_residuals();
            (Some(a), b, c)
        }
        None => (None, None, None),
    };
    ResultRecord {
        schema: SCHEMA,
        axis: String::new(),
        value: String::new(),
        trial_index: trial,
        architecture: arch.to_string(),
        beta: cfg.design.beta,
        l: cfg.n_elements(),
        m: arch.resolution().map(|r| r.to_string()).unwrap_or_default(),
        snr_c: report.snr_c,
        snr_c_db: Db::from_linear(report.snr_c),
        snr_r: report.snr_r,
        snr_r_db: Db::from_linear(report.snr_r),
        snr_t: report.snr_t,
        snr_t_db: Db::from_linear(report.snr_t),
        outer_iterations: outcome.map_or(0, |o| o.outer_iterations),
        // closed-form references have nothing to converge
        converged: outcome.is_none_or(|o| o.converged),
        unitarity_residual: unitarity,
        res_phi0: res0,
        res_phi1: res1,
        res_u: resu,
        seed: cfg.seed,
        wall_time_seconds: 0.0,
    }
}

/// Runs one architecture on the given channels.
pub fn run_architecture(
    cfg: &SystemConfig,
    channels: &ChannelSet,
    arch: Architecture,
) -> crate::Result<RunOutput> {
    let start = Instant::now();
    let eval = |phi: &crate::linalg::CMatrix| {
        crate::model::evaluate(
            channels,
            phi,
            cfg.sigma2_c(),
            cfg.sigma2_r(),
            cfg.design.beta,
        )
    };
    let trial = channels.trial_index;
    let (mut record, trace) = match arch {
        Architecture::Bdris(mode) => {
            let out = run_algorithm1(cfg, channels, mode)?;
            let phi = out.deliverable();
            let rec = record_from(
                cfg,
                trial,
                arch,
                eval(phi.matrix())?,
                Some(&out),
                Some(phi.unitarity_residual()),
            );
            (rec, out.trace)
        }
        Architecture::Dris(mode) => {
            let (_, out) = dris_optimize(cfg, channels, mode)?;
            let phi = out.deliverable();
            let rec = record_from(
                cfg,
                trial,
                arch,
                eval(phi.matrix())?,
                Some(&out),
                Some(phi.unitarity_residual()),
            );
            (rec, out.trace)
        }
        Architecture::NoRis => (
            record_from(cfg, trial, arch, no_ris_snr(cfg, channels), None, None),
            Vec::new(),
        ),
        Architecture::Random => {
            let (phi, report) = random_baseline_snr(cfg, channels)?;
            (
                record_from(
                    cfg,
                    trial,
                    arch,
                    report,
                    None,
                    Some(phi.unitarity_residual()),
                ),
                Vec::new(),
            )
        }
    };
    record.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(RunOutput { record, trace })
}

/// Worker threads: `BDRIS_THREADS` when set to a positive integer, else
/// rayon's default.
pub fn thread_count() -> usize {
    std::env::var("BDRIS_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(0)
}

/// Runs every (value, trial) job; results are ordered by value, then trial,
/// then architecture, regardless of scheduling.
pub fn run_sweep(spec: &SweepSpec) -> crate::Result<Vec<RunOutput>> {
    let jobs: Vec<(usize, u64)> = (0..spec.values.len())
        .flat_map(|v| (0..spec.trials).map(move |t| (v, t)))
        .collect();
    let work = |&(vi, trial): &(usize, u64)| -> crate::Result<Vec<RunOutput>> {
        let value = &spec.values[vi];
        let cfg = spec.config_for(value);
        let channels = sample_channels(&cfg, trial)?;
        spec.architectures_for(value)
            .into_iter()
            .map(|arch| {
                let mut out = run_architecture(&cfg, &channels, arch)?;
                out.record.axis = spec.axis.name().to_string();
                out.record.value = value.label();
                Ok(out)
            })
            .collect()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| crate::Error::Invalid(format!("thread pool: {e}")))?;
    let nested: Vec<Vec<RunOutput>> =
        pool.install(|| jobs.par_iter().map(work).collect::<crate::Result<_>>())?;
    Ok(nested.into_iter().flatten().collect())
}

/// File-name stem of a run's trace.
pub fn trace_id(value_index: Option<usize>, arch: &str, trial: u64) -> String {
    match value_index {
        Some(v) => format!("v{v:02}-{arch}-t{trial:03}"),
        None => format!("{arch}-t{trial:03}"),
    }
}

/// Writes `records.csv`, `results.csv`, `records.jsonl` and one trace per
/// optimized run into `spec.output_dir`.
pub fn write_sweep(spec: &SweepSpec, runs: &[RunOutput]) -> Result<(), CliError> {
    let dir = &spec.output_dir;
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    let records: Vec<ResultRecord> = runs.iter().map(|r| r.record.clone()).collect();
    write_csv(&dir.join("records.csv"), &records)?;
    write_csv(&dir.join("results.csv"), &aggregate(&records))?;
    write_jsonl(&dir.join("records.jsonl"), &records)?;
    let labels: Vec<String> = spec.values.iter().map(AxisValue::label).collect();
    for run in runs.iter().filter(|r| r.record.outer_iterations > 0) {
        let vi = labels.iter().position(|l| *l == run.record.value);
        let id = trace_id(vi, &run.record.architecture, run.record.trial_index);
        write_trace(&dir.join(format!("trace-{id}.csv")), &run.trace)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn architecture_labels_round_trip() {
        let c = Resolution::Discrete(4);
        assert_eq!(
            Architecture::parse("bdris", c).unwrap(),
            Architecture::Bdris(c)
        );
        assert_eq!(
            Architecture::parse("dris-continuous", c).unwrap(),
            Architecture::Dris(Resolution::Continuous)
        );
        assert_eq!(
            Architecture::parse("no-ris", c).unwrap(),
            Architecture::NoRis
        );
        for label in ["bdris-2", "dris-16", "bdris-continuous", "random", "no-ris"] {
            assert_eq!(Architecture::parse(label, c).unwrap().to_string(), label);
        }
        assert!(Architecture::parse("bdris-1", c).is_err());
        assert!(Architecture::parse("gcris", c).is_err());
    }

    #[test]
    fn axis_values_parse() {
        let v: toml::Value = toml::from_str::<toml::Table>("v = [4, 2]").unwrap()["v"].clone();
        assert_eq!(parse_value(Axis::L, &v).unwrap(), AxisValue::Grid(4, 2));
        assert!(parse_value(Axis::Beta, &toml::Value::Float(1.5)).is_err());
        assert_eq!(
            parse_value(Axis::M, &toml::Value::String("continuous".into())).unwrap(),
            AxisValue::Resolution(Resolution::Continuous)
        );
        assert!(parse_value(Axis::M, &toml::Value::Integer(1)).is_err());
    }
}
