//! Switching-period synthesis for the B6, TNPC and B6²-Y bridges.
//!
//! One fundamental period is built from synchronous, regularly sampled
//! carriers. Switch states are kept as piecewise-constant segments so that
//! conduction integrals, commutation events and the DC-link capacitor charge
//! are evaluated analytically; only the ripple spectrum samples the waveform.

pub mod modulator;
pub mod ripple;
pub mod spectrum;
pub mod trace;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::device::{DeviceSet, VoltageClass};
use crate::error::{Error, Result};

pub use modulator::ClampCost;
pub use ripple::{dc_link_ripple, CapacitorCurrent};
pub use spectrum::{dq_ripple_spectrum, HarmonicBin, HarmonicSpectrum, VoltageWaveform};
pub use trace::{synthesize_period, SwitchingTrace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Topology {
    B6,
    #[serde(rename = "TNPC")]
    Tnpc,
    #[serde(rename = "B6Y")]
    B6Y,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "2L")]
    TwoLevel,
    #[serde(rename = "3L")]
    ThreeLevel,
    /// Left bridge only, star point closed by the T_d switches
    #[serde(rename = "Y")]
    Star,
    /// Both bridges, open winding
    #[serde(rename = "H")]
    Bridge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    A,
    B,
    C,
}

/// Zero-state usage of the three-level modulator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZeroVectorPolicy {
    /// All zero states, centred active vectors
    Unrestricted,
    /// Only [1,1,1]
    UpperOnly,
    /// [1,1,1] or [-1,-1,-1], whichever commutes less energy
    MinSwitchingEnergy,
}

pub const PHASES: [char; 3] = ['a', 'b', 'c'];

impl Topology {
    pub fn name(self) -> &'static str {
        match self {
            Topology::B6 => "B6",
            Topology::Tnpc => "TNPC",
            Topology::B6Y => "B6Y",
        }
    }

    /// Switch identifiers with their blocking-voltage class, in a fixed order.
    pub fn switches(self) -> Vec<(String, VoltageClass)> {
        let mut out = Vec::new();
        for p in PHASES {
            match self {
                Topology::B6 => {
                    for k in 1..=2 {
                        out.push((format!("T_{p}{k}"), VoltageClass::V1200));
                    }
                }
                Topology::Tnpc => {
                    out.push((format!("T_{p}1"), VoltageClass::V1200));
                    out.push((format!("T_{p}2"), VoltageClass::V1200));
                    out.push((format!("T_{p}3"), VoltageClass::V750));
                    out.push((format!("T_{p}4"), VoltageClass::V750));
                }
                Topology::B6Y => {
                    for k in 1..=4 {
                        out.push((format!("T_{p}{k}"), VoltageClass::V1200));
                    }
                }
            }
        }
        if self == Topology::B6Y {
            for k in 1..=3 {
                out.push((format!("T_d{k}"), VoltageClass::V1200));
            }
        }
        out
    }

    /// Switches that receive surplus area in designs beyond the fallback
    /// mode: the TNPC mid-point path, the B6²-Y star switches and left half.
    pub fn is_auxiliary(self, id: &str) -> bool {
        let tail = &id[id.len() - 2..];
        match self {
            Topology::B6 => false,
            Topology::Tnpc => tail.ends_with('3') || tail.ends_with('4'),
            Topology::B6Y => tail.starts_with('d') || tail.ends_with('1') || tail.ends_with('2'),
        }
    }

    pub fn modes(self) -> &'static [Mode] {
        match self {
            Topology::B6 => &[Mode::TwoLevel],
            Topology::Tnpc => &[Mode::TwoLevel, Mode::ThreeLevel],
            Topology::B6Y => &[Mode::Star, Mode::Bridge],
        }
    }

    pub fn variants(self) -> &'static [Variant] {
        match self {
            Topology::B6 => &[Variant::A],
            Topology::Tnpc => &[Variant::A, Variant::B, Variant::C],
            Topology::B6Y => &[Variant::A, Variant::B],
        }
    }
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::TwoLevel => "2L",
            Mode::ThreeLevel => "3L",
            Mode::Star => "Y",
            Mode::Bridge => "H",
        }
    }

    /// Whether the motor sees phase-to-star voltages (limit V_dc/√3) rather
    /// than full bridge voltage.
    pub fn is_star(self) -> bool {
        !matches!(self, Mode::Bridge)
    }

    /// Count of switches carrying current in this mode; ties in loss go to
    /// the smaller count.
    pub fn active_switch_count(self) -> usize {
        match self {
            Mode::TwoLevel => 6,
            Mode::Star => 9,
            Mode::ThreeLevel | Mode::Bridge => 12,
        }
    }

    /// Whether switch `id` conducts or switches in this mode.
    pub fn uses_switch(self, id: &str) -> bool {
        let tail = &id[id.len() - 2..];
        match self {
            Mode::TwoLevel => tail.ends_with('1') || tail.ends_with('2'),
            Mode::ThreeLevel | Mode::Bridge => !tail.starts_with('d'),
            Mode::Star => tail.starts_with('d') || tail.ends_with('1') || tail.ends_with('2'),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2L" => Ok(Mode::TwoLevel),
            "3L" => Ok(Mode::ThreeLevel),
            "Y" => Ok(Mode::Star),
            "H" => Ok(Mode::Bridge),
            other => Err(Error::invalid("mode", format!("unknown mode `{other}`"))),
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Everything the period synthesis needs besides the electrical solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulationConfig {
    pub topology: Topology,
    pub mode: Mode,
    pub variant: Variant,
    /// Nominal switching frequency (Hz)
    pub f_sw: f64,
    /// DC-link voltage (V)
    pub v_dc: f64,
    /// Spectrum samples per carrier period, dt = 1/(samples · f_sw)
    pub samples_per_carrier: usize,
    /// Fundamental frequency substituted below this value (Hz)
    pub min_fundamental: f64,
    /// Commutation-energy weights used by the loss-minimising zero-state choice
    pub clamp_cost: ClampCost,
}

impl ModulationConfig {
    pub fn new(topology: Topology, mode: Mode, variant: Variant, f_sw: f64, v_dc: f64) -> Self {
        Self {
            topology,
            mode,
            variant,
            f_sw,
            v_dc,
            samples_per_carrier: 500,
            min_fundamental: 1.0,
            clamp_cost: ClampCost::from_devices(&DeviceSet::default(), v_dc, 25.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.topology {
            Topology::B6 => self.mode == Mode::TwoLevel && self.variant == Variant::A,
            Topology::Tnpc => matches!(self.mode, Mode::TwoLevel | Mode::ThreeLevel),
            Topology::B6Y => matches!(self.mode, Mode::Star | Mode::Bridge) && self.variant != Variant::C,
        };
        if !ok {
            return Err(Error::Modulation(format!(
                "{} cannot run {} mode with modulator {}",
                self.topology, self.mode, self.variant
            )));
        }
        if !(self.f_sw.is_finite() && self.f_sw > 0.0) {
            return Err(Error::Modulation(format!("switching frequency must be positive, got {}", self.f_sw)));
        }
        if !(self.v_dc.is_finite() && self.v_dc > 0.0) {
            return Err(Error::Modulation(format!("DC-link voltage must be positive, got {}", self.v_dc)));
        }
        if self.samples_per_carrier < 200 {
            return Err(Error::Modulation("at least 200 samples per carrier period required".into()));
        }
        if !(self.min_fundamental.is_finite() && self.min_fundamental > 0.0) {
            return Err(Error::Modulation("minimum fundamental frequency must be positive".into()));
        }
        Ok(())
    }

    /// Voltage-magnitude limit seen by the machine in this mode.
    pub fn voltage_limit(&self) -> f64 {
        voltage_limit(self.mode, self.v_dc)
    }

    pub fn zero_vector_policy(&self) -> ZeroVectorPolicy {
        match self.variant {
            Variant::A => ZeroVectorPolicy::Unrestricted,
            Variant::B => ZeroVectorPolicy::UpperOnly,
            Variant::C => ZeroVectorPolicy::MinSwitchingEnergy,
        }
    }
}

pub fn voltage_limit(mode: Mode, v_dc: f64) -> f64 {
    if mode.is_star() {
        v_dc / 3.0_f64.sqrt()
    } else {
        v_dc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn switch_counts_match_topologies() {
        assert_eq!(Topology::B6.switches().len(), 6);
        assert_eq!(Topology::Tnpc.switches().len(), 12);
        assert_eq!(Topology::B6Y.switches().len(), 15);
        let mid: Vec<_> = Topology::Tnpc.switches().into_iter().filter(|s| s.1 == VoltageClass::V750).collect();
        assert_eq!(mid.len(), 6);
        assert!(mid.iter().all(|(id, _)| id.ends_with('3') || id.ends_with('4')));
    }

    #[test]
    fn invalid_combinations_are_rejected() {
        for (t, m, v) in [
            (Topology::B6, Mode::ThreeLevel, Variant::A),
            (Topology::B6, Mode::TwoLevel, Variant::B),
            (Topology::Tnpc, Mode::Bridge, Variant::A),
            (Topology::B6Y, Mode::TwoLevel, Variant::A),
            (Topology::B6Y, Mode::Bridge, Variant::C),
        ] {
            let err = ModulationConfig::new(t, m, v, 10e3, 800.0).validate().unwrap_err();
            assert!(matches!(err, Error::Modulation(_)));
        }
        for t in [Topology::B6, Topology::Tnpc, Topology::B6Y] {
            for &m in t.modes() {
                for &v in t.variants() {
                    ModulationConfig::new(t, m, v, 10e3, 800.0).validate().unwrap();
                }
            }
        }
    }

    #[test]
    fn mode_switch_usage() {
        assert!(Mode::TwoLevel.uses_switch("T_a1"));
        assert!(!Mode::TwoLevel.uses_switch("T_b3"));
        assert!(Mode::Star.uses_switch("T_d2"));
        assert!(!Mode::Star.uses_switch("T_c4"));
        assert!(!Mode::Bridge.uses_switch("T_d1"));
        assert!(Mode::Bridge.uses_switch("T_c4"));
        for t in [Topology::B6, Topology::Tnpc, Topology::B6Y] {
            for &m in t.modes() {
                let n = t.switches().iter().filter(|(id, _)| m.uses_switch(id)).count();
                assert_eq!(n, m.active_switch_count(), "{t} {m}");
            }
        }
    }

    #[test]
    fn serde_names() {
        assert_eq!(serde_json::to_string(&Mode::TwoLevel).unwrap(), "\"2L\"");
        assert_eq!(serde_json::to_string(&Topology::B6Y).unwrap(), "\"B6Y\"");
        assert_eq!("H".parse::<Mode>().unwrap(), Mode::Bridge);
    }
}
