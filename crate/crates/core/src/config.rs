//! Scenario configuration.
//!
//! The on-disk format is TOML. Noise powers are given in dBm and the
//! reference path loss in dB; accessors return linear watts / gains.

use std::fmt;

use serde::{Deserialize, Serialize};

pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Phase alphabet of the surface elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawResolution", into = "RawResolution")]
pub enum Resolution {
    Continuous,
    /// `M` equally spaced phases `2πm/M`, `m = 0..M`.
    Discrete(u32),
}

impl Resolution {
    pub fn levels(self) -> Option<u32> {
        match self {
            Resolution::Continuous => None,
            Resolution::Discrete(m) => Some(m),
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resolution::Continuous => f.write_str("continuous"),
            Resolution::Discrete(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RawResolution {
    Levels(i64),
    Name(String),
}

impl TryFrom<RawResolution> for Resolution {
    type Error = String;

    fn try_from(raw: RawResolution) -> Result<Self, Self::Error> {
        match raw {
            RawResolution::Levels(m) if (2..=u32::MAX as i64).contains(&m) => {
                Ok(Resolution::Discrete(m as u32))
            }
            RawResolution::Levels(m) => Err(format!("resolution must be >= 2, got {m}")),
            RawResolution::Name(s) if s == "continuous" => Ok(Resolution::Continuous),
            RawResolution::Name(s) => match s.parse::<i64>() {
                Ok(m) => Resolution::try_from(RawResolution::Levels(m)),
                Err(_) => Err(format!(
                    "resolution must be an integer or \"continuous\", got {s:?}"
                )),
            },
        }
    }
}

impl From<Resolution> for RawResolution {
    fn from(r: Resolution) -> Self {
        match r {
            Resolution::Continuous => RawResolution::Name("continuous".into()),
            Resolution::Discrete(m) => RawResolution::Levels(m as i64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecoderKind {
    /// i.i.d. complex Gaussian entries, power normalized.
    Random,
    /// First `K` columns of the `N x N` DFT matrix, power normalized.
    Dft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    /// Antennas at the base station (same count for Tx and Rx).
    pub n_antennas: usize,
    pub n_users: usize,
    pub ris_x: usize,
    pub ris_y: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarrierConfig {
    pub frequency_hz: f64,
    /// Element spacing in meters; half a wavelength when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub dfbs: [f64; 3],
    pub ris: [f64; 3],
    /// One shared position, or one per user.
    pub users: Vec<[f64; 3]>,
    pub target: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma2_c_dbm: f64,
    pub sigma2_r_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossConfig {
    /// Path loss at 1 m, in dB.
    pub p0_db: f64,
    /// DFBS to RIS.
    pub exp_rd: f64,
    /// RIS to users.
    pub exp_ur: f64,
    /// DFBS to users.
    pub exp_ud: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    /// Radar weight in the weighted SNR sum.
    pub beta: f64,
    pub resolution: Resolution,
    #[serde(default = "default_tx_power")]
    pub tx_power_w: f64,
    #[serde(default = "default_precoder")]
    pub precoder: PrecoderKind,
}

fn default_tx_power() -> f64 {
    1.0
}

fn default_precoder() -> PrecoderKind {
    PrecoderKind::Random
}

/// Penalty weights and stopping rules of the alternating optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltyConfig {
    /// `[rho0, rho1, rho2]`; derived from the problem scale when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<[f64; 3]>,
    /// Multiplier on the automatic penalty scale.
    pub rho_scale: f64,
    /// Inner tolerance of the φ block.
    pub eps_inner_phi: f64,
    /// Inner tolerance of the φ₀ block.
    pub eps_inner_phi0: f64,
    /// Outer tolerance on successive φ iterates.
    pub eps_outer: f64,
    pub max_inner_iters: usize,
    pub max_outer_iters: usize,
    /// Multiply all penalties by 1.5 every 10 outer iterations.
    pub penalty_ramp: bool,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            rho: None,
            rho_scale: 10.0,
            eps_inner_phi: 1e-6,
            eps_inner_phi0: 1e-6,
            eps_outer: 1e-4,
            max_inner_iters: 500,
            max_outer_iters: 200,
            penalty_ramp: false,
        }
    }
}

/// A full scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub seed: u64,
    pub array: ArrayConfig,
    pub carrier: CarrierConfig,
    pub geometry: GeometryConfig,
    pub noise: NoiseConfig,
    pub path_loss: PathLossConfig,
    pub design: DesignConfig,
    #[serde(default)]
    pub optimizer: PenaltyConfig,
}

/// A semantic validation failure, naming the offending field by dotted path.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        message: message.into(),
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl SystemConfig {
    /// The desk-scale scenario of the reference experiments: 8 antennas,
    /// 4 users, a 4x4 surface, -100 dBm noise and -30 dB reference loss.
    pub fn reference() -> Self {
        Self {
            seed: 2024,
            array: ArrayConfig {
                n_antennas: 8,
                n_users: 4,
                ris_x: 4,
                ris_y: 4,
            },
            carrier: CarrierConfig {
                frequency_hz: 28e9,
                spacing_m: None,
            },
            geometry: GeometryConfig {
                dfbs: [0.0, 0.0, 0.0],
                ris: [30.0, 30.0, 0.0],
                users: vec![[20.0, 20.0, 0.0]],
                target: [20.0, 20.0, 0.0],
            },
            noise: NoiseConfig {
                sigma2_c_dbm: -100.0,
                sigma2_r_dbm: -100.0,
            },
            path_loss: PathLossConfig {
                p0_db: -30.0,
                exp_rd: 2.0,
                exp_ur: 2.8,
                exp_ud: 4.0,
            },
            design: DesignConfig {
                beta: 0.5,
                resolution: Resolution::Continuous,
                tx_power_w: 1.0,
                precoder: PrecoderKind::Random,
            },
            optimizer: PenaltyConfig::default(),
        }
    }

    pub fn n_antennas(&self) -> usize {
        self.array.n_antennas
    }

    pub fn n_users(&self) -> usize {
        self.array.n_users
    }

    /// Number of surface elements `Lx * Ly`.
    pub fn n_elements(&self) -> usize {
        self.array.ris_x * self.array.ris_y
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier.frequency_hz
    }

    pub fn spacing(&self) -> f64 {
        self.carrier.spacing_m.unwrap_or(0.5 * self.wavelength())
    }

    pub fn sigma2_c(&self) -> f64 {
        dbm_to_watts(self.noise.sigma2_c_dbm)
    }

    pub fn sigma2_r(&self) -> f64 {
        dbm_to_watts(self.noise.sigma2_r_dbm)
    }

    pub fn p0(&self) -> f64 {
        db_to_linear(self.path_loss.p0_db)
    }

    /// Position of user `k`.
    pub fn user_position(&self, k: usize) -> [f64; 3] {
        let users = &self.geometry.users;
        if users.len() == 1 {
            users[0]
        } else {
            users[k]
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let a = &self.array;
        for (name, v) in [
            ("array.n_antennas", a.n_antennas),
            ("array.n_users", a.n_users),
            ("array.ris_x", a.ris_x),
            ("array.ris_y", a.ris_y),
        ] {
            if v == 0 {
                return Err(invalid(name, "must be >= 1"));
            }
        }
        if !(self.carrier.frequency_hz > 0.0 && self.carrier.frequency_hz.is_finite()) {
            return Err(invalid("carrier.frequency_hz", "must be positive"));
        }
        if let Some(d) = self.carrier.spacing_m {
            if !(d > 0.0 && d.is_finite()) {
                return Err(invalid("carrier.spacing_m", "must be positive"));
            }
        }
        let g = &self.geometry;
        if g.users.len() != 1 && g.users.len() != a.n_users {
            return Err(invalid(
                "geometry.users",
                format!(
                    "expected 1 or {} positions, got {}",
                    a.n_users,
                    g.users.len()
                ),
            ));
        }
        let all_points = [
            ("geometry.dfbs", g.dfbs),
            ("geometry.ris", g.ris),
            ("geometry.target", g.target),
        ];
        for (name, p) in all_points
            .iter()
            .copied()
            .chain(g.users.iter().map(|&u| ("geometry.users", u)))
        {
            if p.iter().any(|c| !c.is_finite()) {
                return Err(invalid(name, "coordinates must be finite"));
            }
        }
        if g.target == g.ris {
            return Err(invalid(
                "geometry.target",
                "coincides with the surface position",
            ));
        }
        if g.ris == g.dfbs {
            return Err(invalid("geometry.ris", "coincides with the base station"));
        }
        for u in &g.users {
            if *u == g.ris {
                return Err(invalid(
                    "geometry.users",
                    "a user coincides with the surface position",
                ));
            }
            if *u == g.dfbs {
                return Err(invalid(
                    "geometry.users",
                    "a user coincides with the base station",
                ));
            }
        }
        for (name, v) in [
            ("noise.sigma2_c_dbm", self.noise.sigma2_c_dbm),
            ("noise.sigma2_r_dbm", self.noise.sigma2_r_dbm),
            ("path_loss.p0_db", self.path_loss.p0_db),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        for (name, v) in [
            ("path_loss.exp_rd", self.path_loss.exp_rd),
            ("path_loss.exp_ur", self.path_loss.exp_ur),
            ("path_loss.exp_ud", self.path_loss.exp_ud),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be a nonnegative number"));
            }
        }
        let d = &self.design;
        if !(0.0..=1.0).contains(&d.beta) {
            return Err(invalid(
                "design.beta",
                format!("must lie in [0, 1], got {}", d.beta),
            ));
        }
        if !(d.tx_power_w > 0.0 && d.tx_power_w.is_finite()) {
            return Err(invalid("design.tx_power_w", "must be positive"));
        }
        if d.precoder == PrecoderKind::Dft && a.n_users > a.n_antennas {
            return Err(invalid(
                "design.precoder",
                "dft precoder needs n_users <= n_antennas",
            ));
        }
        self.optimizer.validate()
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(rho) = self.rho {
            if rho.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                return Err(invalid("optimizer.rho", "penalties must be positive"));
            }
        }
        for (name, v) in [
            ("optimizer.rho_scale", self.rho_scale),
            ("optimizer.eps_inner_phi", self.eps_inner_phi),
            ("optimizer.eps_inner_phi0", self.eps_inner_phi0),
            ("optimizer.eps_outer", self.eps_outer),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be positive"));
            }
        }
        if self.max_inner_iters == 0 {
            return Err(invalid("optimizer.max_inner_iters", "must be >= 1"));
        }
        if self.max_outer_iters == 0 {
            return Err(invalid("optimizer.max_outer_iters", "must be >= 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_is_valid() {
        SystemConfig::reference().validate().unwrap();
    }

    #[test]
    fn unit_conversions() {
        assert!((dbm_to_watts(-100.0) - 1e-13).abs() < 1e-25);
        assert!((db_to_linear(-30.0) - 1e-3).abs() < 1e-15);
        let cfg = SystemConfig::reference();
        assert!((cfg.spacing() / cfg.wavelength() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn beta_out_of_range_names_field() {
        let mut cfg = SystemConfig::reference();
        cfg.design.beta = 1.5;
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.field, "design.beta");
    }

    #[test]
    fn resolution_parsing() {
        #[derive(Deserialize)]
        struct W {
            r: Resolution,
        }
        let w: W = toml::from_str("r = 4").unwrap();
        assert_eq!(w.r, Resolution::Discrete(4));
        let w: W = toml::from_str("r = \"continuous\"").unwrap();
        assert_eq!(w.r, Resolution::Continuous);
        assert!(toml::from_str::<W>("r = 1").is_err());
        assert!(toml::from_str::<W>("r = \"fine\"").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = SystemConfig::reference();
        let text = toml::to_string(&cfg).unwrap();
        let back: SystemConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn user_count_mismatch_rejected() {
        let mut cfg = SystemConfig::reference();
        cfg.geometry.users = vec![[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        assert_eq!(cfg.validate().unwrap_err().field, "geometry.users");
    }
}
