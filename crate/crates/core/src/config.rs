//! Run configuration: every physical constant, the drive cycle and the
//! design families, read from one TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::device::{DeviceSet, ThermalModel};
use crate::error::{Error, Result};
use crate::explorer::{default_families, FamilySpec};
use crate::partial::FswPolicy;
use crate::system::{DcLinkSettings, MachineSettings, PwmSettings, SwitchingSettings, SystemModel};
use crate::vehicle::{builtin_cycle, load_cycle, DriveCycle, VehicleParameters};

/// Where the drive cycle comes from; exactly one field is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    /// Relative paths resolve against the configuration file's directory
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

impl Default for CycleSource {
    fn default() -> Self {
        Self { builtin: Some("wltc_class3b".into()), file: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizingSettings {
    /// Envelope speeds per torque sign
    pub envelope_points: usize,
}

impl Default for SizingSettings {
    fn default() -> Self {
        Self { envelope_points: 25 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSettings {
    pub policy: FswPolicy,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        Self { policy: FswPolicy::Fixed(10e3) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryMapSettings {
    pub enabled: bool,
    pub speed_points: usize,
    pub torque_points: usize,
}

impl Default for BoundaryMapSettings {
    fn default() -> Self {
        Self { enabled: true, speed_points: 41, torque_points: 41 }
    }
}

/// Omitted sections take their defaults; `families` defaults to none.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub cycle: CycleSource,
    pub vehicle: VehicleParameters,
    pub motor: MachineSettings,
    pub devices: DeviceSet,
    pub thermal: ThermalModel,
    pub dc_link: DcLinkSettings,
    pub pwm: PwmSettings,
    pub switching: SwitchingSettings,
    pub sizing: SizingSettings,
    pub evaluation: EvaluationSettings,
    pub boundary_map: BoundaryMapSettings,
    pub families: Vec<FamilySpec>,
}

impl Config {
    /// Built-in defaults with the standard six families.
    pub fn standard() -> Self {
        Self { families: default_families(), ..Self::default() }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config { key: "<file>".into(), reason: e.to_string() })?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            Error::Config { key: if key == "." { "<root>".into() } else { key }, reason: e.into_inner().message().to_string() }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(file) = &cfg.cycle.file {
            if file.is_relative() {
                let base = path.parent().unwrap_or_else(|| Path::new("."));
                cfg.cycle.file = Some(base.join(file));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Checks everything a run needs without touching the cycle file.
    pub fn validate(&self) -> Result<SystemModel> {
        let sys = self.system()?;
        match (&self.cycle.builtin, &self.cycle.file) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return Err(Error::Config { key: "cycle".into(), reason: "set exactly one of `builtin` or `file`".into() }),
        }
        if self.sizing.envelope_points < 2 {
            return Err(Error::Config { key: "sizing.envelope_points".into(), reason: "must be at least 2".into() });
        }
        if let FswPolicy::Fixed(f) = self.evaluation.policy {
            if !(f.is_finite() && f > 0.0 && f <= self.switching.escalation_max) {
                return Err(Error::Config {
                    key: "evaluation.policy".into(),
                    reason: format!("fixed frequency {f} must be positive and not above switching.escalation_max"),
                });
            }
        }
        let m = &self.boundary_map;
        if m.enabled && (m.speed_points < 2 || m.torque_points < 2) {
            return Err(Error::Config { key: "boundary_map".into(), reason: "grids need at least 2 points per axis".into() });
        }
        if self.families.is_empty() {
            return Err(Error::Config { key: "families".into(), reason: "at least one family is required".into() });
        }
        for (k, f) in self.families.iter().enumerate() {
            f.validate()?;
            if self.families[..k].iter().any(|g| g.name == f.name) {
                return Err(Error::Config { key: format!("families.{}", f.name), reason: "duplicate family name".into() });
            }
        }
        Ok(sys)
    }

    pub fn system(&self) -> Result<SystemModel> {
        SystemModel::new(
            self.vehicle.clone(),
            &self.motor,
            self.devices.clone(),
            self.thermal.clone(),
            self.dc_link.clone(),
            self.pwm.clone(),
            self.switching.clone(),
        )
    }

    pub fn load_cycle(&self) -> Result<DriveCycle> {
        match (&self.cycle.builtin, &self.cycle.file) {
            (Some(name), None) => builtin_cycle(name),
            (None, Some(path)) => load_cycle(path),
            _ => Err(Error::Config { key: "cycle".into(), reason: "set exactly one of `builtin` or `file`".into() }),
        }
    }

    /// SHA-256 over the canonical JSON form; any value change alters it.
    pub fn hash(&self) -> Result<String> {
        let json = serde_json::to_string(self).map_err(|e| Error::Serialization(e.to_string()))?;
        Ok(hex::encode(Sha256::digest(json.as_bytes())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = Config::standard();
        let text = cfg.to_toml().unwrap();
        assert_eq!(Config::from_toml(&text).unwrap(), cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_key_names_its_path() {
        let mut text = Config::standard().to_toml().unwrap();
        text = text.replacen("t_j_max", "t_j_maximum", 1);
        match Config::from_toml(&text) {
            Err(Error::Config { key, .. }) => assert!(key.starts_with("thermal"), "{key}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hash_tracks_every_value() {
        let a = Config::standard();
        let mut b = a.clone();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.dc_link.c_dc *= 1.0 + 1e-12;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
    }

    #[test]
    fn bad_values_are_rejected_by_key() {
        let mut cfg = Config::standard();
        cfg.dc_link.delta_u_max = -1.0;
        assert!(matches!(cfg.validate(), Err(Error::Config { key, .. }) if key == "dc_link.delta_u_max"));
        let mut cfg = Config::standard();
        cfg.cycle.file = Some("x.csv".into());
        assert!(matches!(cfg.validate(), Err(Error::Config { key, .. }) if key == "cycle"));
    }
}
