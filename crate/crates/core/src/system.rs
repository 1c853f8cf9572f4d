//! Shared physical settings every stage evaluates against.

use serde::{Deserialize, Serialize};

use crate::device::{DeviceSet, ThermalModel};
use crate::error::{Error, Result};
use crate::motor::{scale_motor, HarmonicMotorParameters, MotorModel};
use crate::pwm::{ClampCost, Mode, ModulationConfig, Topology, Variant};
use crate::vehicle::VehicleParameters;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcLinkSettings {
    /// Link voltage (V)
    pub v_dc: f64,
    /// Total link capacitance (F)
    pub c_dc: f64,
    /// Peak-to-peak voltage ripple limit (V)
    pub delta_u_max: f64,
}

impl Default for DcLinkSettings {
    fn default() -> Self {
        Self { v_dc: 800.0, c_dc: 500e-6, delta_u_max: 15.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PwmSettings {
    pub samples_per_carrier: usize,
    /// Fundamental frequency used at standstill (Hz)
    pub min_fundamental: f64,
    /// Chip area (mm²) assumed when weighing zero-state commutation energy
    pub clamp_reference_area: f64,
}

impl Default for PwmSettings {
    fn default() -> Self {
        Self { samples_per_carrier: 500, min_fundamental: 1.0, clamp_reference_area: 25.0 }
    }
}

/// Switching-frequency grid and policies (Hz).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchingSettings {
    /// Frequency of the fixed policy and of full-load sizing
    pub design_f_sw: f64,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_step: f64,
    /// Highest frequency tried when the ripple limit forces escalation
    pub escalation_max: f64,
}

impl Default for SwitchingSettings {
    fn default() -> Self {
        Self { design_f_sw: 10e3, grid_min: 6e3, grid_max: 18e3, grid_step: 1e3, escalation_max: 30e3 }
    }
}

impl SwitchingSettings {
    pub fn validate(&self) -> Result<()> {
        let key = |k: &str| format!("switching.{k}");
        for (k, v) in [
            ("design_f_sw", self.design_f_sw),
            ("grid_min", self.grid_min),
            ("grid_max", self.grid_max),
            ("grid_step", self.grid_step),
            ("escalation_max", self.escalation_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config { key: key(k), reason: format!("must be positive, got {v}") });
            }
        }
        if self.grid_max < self.grid_min {
            return Err(Error::Config { key: key("grid_max"), reason: "must not be below grid_min".into() });
        }
        if self.escalation_max < self.grid_max.max(self.design_f_sw) {
            return Err(Error::Config {
                key: key("escalation_max"),
                reason: "must not be below grid_max or design_f_sw".into(),
            });
        }
        Ok(())
    }

    /// Optimisation grid, ascending.
    pub fn grid(&self) -> Vec<f64> {
        stepped(self.grid_min, self.grid_max, self.grid_step)
    }

    /// `f` followed by ever higher frequencies in grid steps up to the
    /// escalation ceiling.
    pub fn escalation_from(&self, f: f64) -> Vec<f64> {
        stepped(f, self.escalation_max.max(f), self.grid_step)
    }
}

fn stepped(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

/// Reference and open-winding machines with their ripple-loss curves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineSettings {
    pub reference: MotorModel,
    /// Turns ratio κ of the open-winding machine driven by B6²-Y
    pub open_winding_turn_ratio: f64,
    pub harmonic: HarmonicMotorParameters,
}

impl Default for MachineSettings {
    fn default() -> Self {
        Self {
            reference: MotorModel::default(),
            open_winding_turn_ratio: 1.75,
            harmonic: HarmonicMotorParameters::default(),
        }
    }
}

/// Validated physical model shared by sizing and partial-load evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemModel {
    pub vehicle: VehicleParameters,
    pub motor_reference: MotorModel,
    pub motor_open_winding: MotorModel,
    pub harmonic_reference: HarmonicMotorParameters,
    pub harmonic_open_winding: HarmonicMotorParameters,
    pub devices: DeviceSet,
    pub thermal: ThermalModel,
    pub dc_link: DcLinkSettings,
    pub pwm: PwmSettings,
    pub switching: SwitchingSettings,
}

impl Default for SystemModel {
    fn default() -> Self {
        Self::new(
            VehicleParameters::default(),
            &MachineSettings::default(),
            DeviceSet::default(),
            ThermalModel::default(),
            DcLinkSettings::default(),
            PwmSettings::default(),
            SwitchingSettings::default(),
        )
        .expect("defaults are valid")
    }
}

impl SystemModel {
    pub fn new(
        vehicle: VehicleParameters,
        machine: &MachineSettings,
        devices: DeviceSet,
        thermal: ThermalModel,
        dc_link: DcLinkSettings,
        pwm: PwmSettings,
        switching: SwitchingSettings,
    ) -> Result<Self> {
        vehicle.validate()?;
        machine.reference.validate()?;
        machine.harmonic.validate()?;
        devices.validate()?;
        thermal.validate()?;
        switching.validate()?;
        for (k, v) in [("v_dc", dc_link.v_dc), ("c_dc", dc_link.c_dc), ("delta_u_max", dc_link.delta_u_max)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config { key: format!("dc_link.{k}"), reason: format!("must be positive, got {v}") });
            }
        }
        if pwm.samples_per_carrier < 200 {
            return Err(Error::Config { key: "pwm.samples_per_carrier".into(), reason: "must be at least 200".into() });
        }
        for (k, v) in [("min_fundamental", pwm.min_fundamental), ("clamp_reference_area", pwm.clamp_reference_area)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config { key: format!("pwm.{k}"), reason: format!("must be positive, got {v}") });
            }
        }
        let kappa = machine.open_winding_turn_ratio;
        let motor_open_winding = scale_motor(&machine.reference, kappa)
            .map_err(|e| Error::Config { key: "motor.open_winding_turn_ratio".into(), reason: e.to_string() })?;
        Ok(Self {
            vehicle,
            motor_reference: machine.reference.clone(),
            motor_open_winding,
            harmonic_reference: machine.harmonic.clone(),
            harmonic_open_winding: machine.harmonic.scaled(kappa),
            devices,
            thermal,
            dc_link,
            pwm,
            switching,
        })
    }

    /// Machine driven by `topology`.
    pub fn motor(&self, topology: Topology) -> &MotorModel {
        match topology {
            Topology::B6Y => &self.motor_open_winding,
            _ => &self.motor_reference,
        }
    }

    pub fn harmonic(&self, topology: Topology) -> &HarmonicMotorParameters {
        match topology {
            Topology::B6Y => &self.harmonic_open_winding,
            _ => &self.harmonic_reference,
        }
    }

    pub fn modulation(&self, topology: Topology, mode: Mode, variant: Variant, f_sw: f64) -> ModulationConfig {
        ModulationConfig {
            topology,
            mode,
            variant,
            f_sw,
            v_dc: self.dc_link.v_dc,
            samples_per_carrier: self.pwm.samples_per_carrier,
            min_fundamental: self.pwm.min_fundamental,
            clamp_cost: ClampCost::from_devices(&self.devices, self.dc_link.v_dc, self.pwm.clamp_reference_area),
        }
    }
}
