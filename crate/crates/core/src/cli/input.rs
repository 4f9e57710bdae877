//! Scenario files: TOML parsing, `--set` overrides and validation with
//! line-numbered messages.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::config::{
    ArrayConfig, CarrierConfig, DesignConfig, GeometryConfig, NoiseConfig, PathLossConfig,
    PenaltyConfig, SystemConfig,
};

/// Same layout as [`SystemConfig`] plus an optional `[sweep]` table.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    seed: u64,
    array: ArrayConfig,
    carrier: CarrierConfig,
    geometry: GeometryConfig,
    noise: NoiseConfig,
    path_loss: PathLossConfig,
    design: DesignConfig,
    #[serde(default)]
    optimizer: PenaltyConfig,
    sweep: Option<SweepSection>,
}

/// Sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "beta")]
    Beta,
    #[serde(rename = "L", alias = "l")]
    L,
    #[serde(rename = "M", alias = "m")]
    M,
    #[serde(rename = "architecture")]
    Architecture,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Beta => "beta",
            Axis::L => "L",
            Axis::M => "M",
            Axis::Architecture => "architecture",
        }
    }
}

/// The `[sweep]` table as written; checked by `SweepSpec::from_scenario`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: Axis,
    pub values: Vec<toml::Value>,
    pub trials: u64,
    #[serde(default)]
    pub architectures: Option<Vec<String>>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// A loaded scenario file.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub system: SystemConfig,
    pub sweep: Option<SweepSection>,
    /// File name used in messages.
    pub label: String,
    /// Effective text after overrides; used to locate keys.
    pub text: String,
}

impl Scenario {
    /// `label:line: message` for the key at dotted path `field`.
    pub fn config_error(&self, field: &str, message: impl std::fmt::Display) -> CliError {
        let at = locate_key(&self.text, field)
            .map(|l| format!(":{l}"))
            .unwrap_or_default();
        CliError::Config(format!("{}{at}: {field}: {message}", self.label))
    }
}

pub fn load_scenario(path: &Path, overrides: &[String]) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text, &path.display().to_string(), overrides)
}

pub fn parse_scenario(text: &str, label: &str, overrides: &[String]) -> Result<Scenario, CliError> {
    let mut table: toml::Table = toml::from_str(text)
        .map_err(|e| CliError::Config(format!("{label}: {}", e.to_string().trim_end())))?;
    let (effective, label) = if overrides.is_empty() {
        (text.to_string(), label.to_string())
    } else {
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let s = toml::to_string(&table).map_err(|e| CliError::Config(format!("{label}: {e}")))?;
        (s, format!("{label} (with overrides)"))
    };
    let doc: Document = toml::from_str(&effective)
        .map_err(|e| CliError::Config(format!("{label}: {}", e.to_string().trim_end())))?;
    let system = SystemConfig {
        seed: doc.seed,
        array: doc.array,
        carrier: doc.carrier,
        geometry: doc.geometry,
        noise: doc.noise,
        path_loss: doc.path_loss,
        design: doc.design,
        optimizer: doc.optimizer,
    };
    let scenario = Scenario {
        system,
        sweep: doc.sweep,
        label,
        text: effective,
    };
    if let Err(e) = scenario.system.validate() {
        return Err(scenario.config_error(&e.field, &e.message));
    }
    Ok(scenario)
}

/// Applies `a.b.c=value`. The value is read as a TOML literal when it
/// parses as one and as a bare string otherwise.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {assignment:?}")))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Config(format!("--set: malformed key {key:?}")));
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("--set {key}: {part} is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// 1-based line of the key at dotted path `field`, if it can be found.
pub fn locate_key(text: &str, field: &str) -> Option<usize> {
    let (section, key) = match field.rsplit_once('.') {
        Some((s, k)) => (s, k),
        None => ("", field),
    };
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            current = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        let lhs = match t.split_once('=') {
            Some((lhs, _)) => lhs.trim(),
            None => continue,
        };
        let dotted = if current.is_empty() {
            lhs.to_string()
        } else {
            format!("{current}.{lhs}")
        };
        if (current == section && lhs == key) || dotted == field {
            return Some(i + 1);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_parse_literals_and_strings() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "design.beta=0.25").unwrap();
        apply_override(&mut t, "design.resolution = continuous").unwrap();
        apply_override(&mut t, "array.ris_x=2").unwrap();
        assert_eq!(t["design"]["beta"].as_float(), Some(0.25));
        assert_eq!(t["design"]["resolution"].as_str(), Some("continuous"));
        assert_eq!(t["array"]["ris_x"].as_integer(), Some(2));
        assert!(apply_override(&mut t, "nonsense").is_err());
        assert!(apply_override(&mut t, "design..beta=1").is_err());
        assert!(apply_override(&mut t, "design.beta.x=1").is_err());
    }

    #[test]
    fn keys_are_located() {
        let text = "seed = 1\n[design]\nresolution = 4\nbeta = 1.5\n[sweep]\ntrials = \"x\"\n";
        assert_eq!(locate_key(text, "design.beta"), Some(4));
        assert_eq!(locate_key(text, "sweep.trials"), Some(6));
        assert_eq!(locate_key(text, "seed"), Some(1));
        assert_eq!(locate_key(text, "array.ris_x"), None);
    }
}
