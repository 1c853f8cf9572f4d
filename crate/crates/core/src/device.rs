//! Area-scaled MOSFET loss and heat-balance model.
//!
//! On-resistance scales as 1/A, output charge as A. Switching energies are
//! linear in switched voltage times current. The junction sits above a
//! fixed heat-sink temperature through an area-dependent thermal resistance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-area device technology of one blocking-voltage class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceTech {
    /// Blocking voltage class (V), 750 or 1200
    pub voltage_class: u32,
    /// Specific on-resistance (Ω·mm²)
    pub r_on_specific: f64,
    /// Turn-on energy per switched V·A (J/(V·A))
    pub k_on: f64,
    /// Turn-off energy per switched V·A (J/(V·A))
    pub k_off: f64,
    /// Specific output charge at `v_ref` (C/mm²)
    pub q_oss_specific: f64,
    /// Voltage at which `q_oss_specific` is stated (V)
    pub v_ref: f64,
    /// Linear on-resistance temperature coefficient (1/K)
    pub r_on_temp_coeff: f64,
    /// Temperature at which `r_on_specific` is stated (°C)
    pub t_ref: f64,
}

impl DeviceTech {
    pub fn sic_1200v() -> Self {
        Self {
            voltage_class: 1200,
            r_on_specific: 0.30,
            k_on: 1.5e-8,
            k_off: 0.6e-8,
            q_oss_specific: 12.0e-9,
            v_ref: 800.0,
            r_on_temp_coeff: 0.0,
            t_ref: 25.0,
        }
    }

    pub fn sic_750v() -> Self {
        Self {
            voltage_class: 750,
            r_on_specific: 0.16,
            k_on: 1.2e-8,
            k_off: 0.5e-8,
            q_oss_specific: 10.0e-9,
            v_ref: 400.0,
            r_on_temp_coeff: 0.0,
            t_ref: 25.0,
        }
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        if self.voltage_class != 750 && self.voltage_class != 1200 {
            return Err(Error::invalid(format!("{key}.voltage_class"), "must be 750 or 1200"));
        }
        for (name, v) in [
            ("r_on_specific", self.r_on_specific),
            ("k_on", self.k_on),
            ("k_off", self.k_off),
            ("q_oss_specific", self.q_oss_specific),
            ("v_ref", self.v_ref),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{key}.{name}"), format!("must be positive, got {v}")));
            }
        }
        if !(self.r_on_temp_coeff.is_finite() && self.r_on_temp_coeff >= 0.0 && self.t_ref.is_finite()) {
            return Err(Error::invalid(format!("{key}.r_on_temp_coeff"), "must be finite and non-negative"));
        }
        Ok(())
    }

    /// On-resistance (Ω) of area `area` (mm²) at junction temperature `t_j`.
    pub fn r_on(&self, area: f64, t_j: f64) -> f64 {
        self.r_on_specific / area * (1.0 + self.r_on_temp_coeff * (t_j - self.t_ref))
    }

    /// Energy (J) dissipated by one event of area `area`.
    pub fn event_energy(&self, event: &SwitchEvent, area: f64) -> f64 {
        if !event.hard {
            return 0.0;
        }
        let vi = event.v_sw * event.i_sw.abs();
        if event.turn_on {
            self.k_on * vi + self.qoss_energy_per_area(event.v_sw) * area
        } else {
            self.k_off * vi
        }
    }

    /// Output-charge turn-on energy per unit area (J/mm²): ½·Q_oss·V with
    /// Q_oss linear in the switched voltage.
    pub fn qoss_energy_per_area(&self, v_sw: f64) -> f64 {
        0.5 * self.q_oss_specific * (v_sw / self.v_ref) * v_sw
    }
}

/// Device technologies by voltage class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSet {
    pub v1200: DeviceTech,
    pub v750: DeviceTech,
}

impl Default for DeviceSet {
    fn default() -> Self {
        Self { v1200: DeviceTech::sic_1200v(), v750: DeviceTech::sic_750v() }
    }
}

impl DeviceSet {
    pub fn get(&self, class: VoltageClass) -> &DeviceTech {
        match class {
            VoltageClass::V750 => &self.v750,
            VoltageClass::V1200 => &self.v1200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.v1200.validate("devices.v1200")?;
        self.v750.validate("devices.v750")?;
        if self.v1200.voltage_class != 1200 || self.v750.voltage_class != 750 {
            return Err(Error::invalid("devices", "voltage_class must match its key"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VoltageClass {
    V750,
    V1200,
}

/// Heat-balance constants and chip-area discretisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalModel {
    /// Heat-sink temperature (°C)
    pub t_hs: f64,
    /// Maximum junction temperature (°C)
    pub t_j_max: f64,
    /// R_th = coeff · A^(-exponent), A in mm², R_th in K/W
    pub r_th_coeff: f64,
    pub r_th_exponent: f64,
    /// Chip granule (mm²)
    pub granule: f64,
    /// Largest area tried per switch (mm²)
    pub area_cap: f64,
    /// Re-evaluate on-resistance once at the computed junction temperature
    pub temperature_refinement: bool,
}

impl Default for ThermalModel {
    fn default() -> Self {
        Self {
            t_hs: 65.0,
            t_j_max: 175.0,
            r_th_coeff: 3.0,
            r_th_exponent: 0.4,
            granule: 25.0,
            area_cap: 1000.0,
            temperature_refinement: false,
        }
    }
}

impl ThermalModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r_th_coeff", self.r_th_coeff),
            ("r_th_exponent", self.r_th_exponent),
            ("granule", self.granule),
            ("area_cap", self.area_cap),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("thermal.{name}"), format!("must be positive, got {v}")));
            }
        }
        if self.t_j_max.partial_cmp(&self.t_hs) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::invalid("thermal.t_j_max", "must exceed heat-sink temperature"));
        }
        if self.area_cap < self.granule {
            return Err(Error::invalid("thermal.area_cap", "must be at least one granule"));
        }
        Ok(())
    }

    /// Junction-to-heat-sink thermal resistance (K/W) of `area` mm².
    pub fn r_th(&self, area: f64) -> f64 {
        self.r_th_coeff * area.powf(-self.r_th_exponent)
    }
}

/// Per-switch loss split (W).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SwitchLossBreakdown {
    pub p_con: f64,
    pub p_sw: f64,
    /// Always `p_con + p_sw`
    pub p_mos: f64,
}

impl SwitchLossBreakdown {
    pub fn new(p_con: f64, p_sw: f64) -> Self {
        Self { p_con, p_sw, p_mos: p_con + p_sw }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalResult {
    /// K/W
    pub r_th: f64,
    /// °C
    pub t_j: f64,
    pub feasible: bool,
}

pub fn junction_temperature(p_mos: f64, area: f64, thermal: &ThermalModel) -> ThermalResult {
    let r_th = thermal.r_th(area);
    let t_j = thermal.t_hs + r_th * p_mos;
    ThermalResult { r_th, t_j, feasible: t_j <= thermal.t_j_max }
}

/// Smallest multiple of `granule` not below `raw`.
pub fn quantize_area(raw: f64, granule: f64) -> f64 {
    let k = (raw / granule).ceil();
    // guard against 25.000000001-style representation noise
    let k = if ((k - 1.0) * granule - raw).abs() <= 1e-9 * granule { k - 1.0 } else { k };
    k.max(1.0) * granule
}

/// A switch instance in a topology.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchDesign {
    pub id: String,
    pub class: VoltageClass,
    /// Chip area (mm²), a multiple of the granule
    pub area: f64,
}

/// One gate transition of a switch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    /// Time within the period (s)
    pub time: f64,
    /// Commutated voltage (V)
    pub v_sw: f64,
    /// Commutated current (A)
    pub i_sw: f64,
    pub turn_on: bool,
    /// Hard transitions dissipate energy, soft ones do not
    pub hard: bool,
}

/// Conduction and switching record of one switch over one period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchChannel {
    pub id: String,
    pub class: VoltageClass,
    /// ∫ i² dt over conduction intervals (A²·s)
    pub i2_integral: f64,
    /// Total conduction time (s)
    pub on_time: f64,
    pub events: Vec<SwitchEvent>,
}

impl SwitchChannel {
    pub fn new(id: impl Into<String>, class: VoltageClass) -> Self {
        Self { id: id.into(), class, i2_integral: 0.0, on_time: 0.0, events: Vec::new() }
    }

    /// Channel from uniformly sampled current and gate state.
    pub fn from_samples(id: impl Into<String>, class: VoltageClass, dt: f64, current: &[f64], conducting: &[bool]) -> Self {
        let mut ch = Self::new(id, class);
        for (&i, &on) in current.iter().zip(conducting) {
            if on {
                ch.i2_integral += i * i * dt;
                ch.on_time += dt;
            }
        }
        ch
    }

    pub fn hard_turn_on_count(&self) -> usize {
        self.events.iter().filter(|e| e.turn_on && e.hard).count()
    }
}

/// Mean conduction loss (W) over a period of length `period` (s).
pub fn conduction_loss(sw: &SwitchDesign, tech: &DeviceTech, channel: &SwitchChannel, period: f64) -> f64 {
    channel.i2_integral * tech.r_on(sw.area, tech.t_ref) / period
}

/// Mean switching loss (W) for events repeating at `f_f`.
pub fn switching_loss(sw: &SwitchDesign, tech: &DeviceTech, events: &[SwitchEvent], f_f: f64) -> f64 {
    f_f * events.iter().map(|e| tech.event_energy(e, sw.area)).sum::<f64>()
}

/// Area-separable loss profile of one switch at one operating point:
/// P(A) = R_on,spec · i2_mean / A + p_vi + e_qoss · A.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossProfile {
    /// Mean squared conduction current (A²)
    pub i2_mean: f64,
    /// Switching loss from V·I terms (W)
    pub p_vi: f64,
    /// Output-charge loss per unit area (W/mm²)
    pub p_qoss_per_area: f64,
}

impl LossProfile {
    pub fn from_channel(channel: &SwitchChannel, tech: &DeviceTech, period: f64) -> Self {
        let f = 1.0 / period;
        let mut vi = 0.0;
        let mut qoss = 0.0;
        for e in channel.events.iter().filter(|e| e.hard) {
            let x = e.v_sw * e.i_sw.abs();
            if e.turn_on {
                vi += tech.k_on * x;
                qoss += tech.qoss_energy_per_area(e.v_sw);
            } else {
                vi += tech.k_off * x;
            }
        }
        Self { i2_mean: channel.i2_integral * f, p_vi: vi * f, p_qoss_per_area: qoss * f }
    }

    pub fn losses(&self, tech: &DeviceTech, area: f64, t_j: f64) -> SwitchLossBreakdown {
        let p_con = self.i2_mean * tech.r_on(area, t_j);
        let p_sw = self.p_vi + self.p_qoss_per_area * area;
        SwitchLossBreakdown::new(p_con, p_sw)
    }

    /// Losses and junction temperature at `area`, with the optional
    /// one-step on-resistance temperature refinement.
    pub fn evaluate(&self, tech: &DeviceTech, area: f64, thermal: &ThermalModel) -> (SwitchLossBreakdown, ThermalResult) {
        let loss = self.losses(tech, area, tech.t_ref);
        let th = junction_temperature(loss.p_mos, area, thermal);
        if thermal.temperature_refinement && tech.r_on_temp_coeff > 0.0 {
            let loss = self.losses(tech, area, th.t_j);
            return (loss, junction_temperature(loss.p_mos, area, thermal));
        }
        (loss, th)
    }

    pub fn is_zero(&self) -> bool {
        self.i2_mean == 0.0 && self.p_vi == 0.0 && self.p_qoss_per_area == 0.0
    }
}
