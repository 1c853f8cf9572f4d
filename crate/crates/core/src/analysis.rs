//! Area-independent evaluation of one operating point under one modulation.
//!
//! Everything here depends on the electrical solution and the switching
//! pattern only; chip areas enter later through the loss profiles, which is
//! what makes the result cacheable across design variants.

use serde::{Deserialize, Serialize};

use crate::device::{LossProfile, VoltageClass};
use crate::error::Result;
use crate::motor::{fundamental_losses, harmonic_losses, solve_operating_point, HarmonicLossBreakdown, Infeasibility, OperatingPointSolution};
use crate::pwm::{dq_ripple_spectrum, synthesize_period, Mode, SwitchingTrace, Topology, Variant};
use crate::system::SystemModel;
use crate::vehicle::OperatingPoint;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchProfile {
    pub id: String,
    pub class: VoltageClass,
    pub profile: LossProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointAnalysis {
    pub topology: Topology,
    pub mode: Mode,
    pub variant: Variant,
    pub f_sw: f64,
    pub speed: f64,
    pub torque: f64,
    pub solution: OperatingPointSolution,
    /// Peak-to-peak link ripple (V)
    pub delta_u: f64,
    /// Loss profiles of the switches this mode uses, in topology order
    pub profiles: Vec<SwitchProfile>,
    /// Ripple-driven motor losses, absent when the spectrum was skipped
    pub harmonic: Option<HarmonicLossBreakdown>,
    pub p_mot_f: f64,
}

impl PointAnalysis {
    pub fn profile(&self, id: &str) -> Option<&SwitchProfile> {
        self.profiles.iter().find(|p| p.id == id)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Analysis {
    Feasible(PointAnalysis),
    /// The machine cannot reach the point within this mode's limits.
    Infeasible(Infeasibility),
}

/// Solves, synthesizes and (optionally) analyses the ripple spectrum of one point.
pub fn analyze_point(
    sys: &SystemModel,
    topology: Topology,
    mode: Mode,
    variant: Variant,
    point: &OperatingPoint,
    f_sw: f64,
    with_spectrum: bool,
) -> Result<Analysis> {
    Ok(match analyze_with_trace(sys, topology, mode, variant, point, f_sw, with_spectrum)? {
        Ok((a, _)) => Analysis::Feasible(a),
        Err(why) => Analysis::Infeasible(why),
    })
}

/// As [`analyze_point`], also returning the synthesized period.
pub fn analyze_with_trace(
    sys: &SystemModel,
    topology: Topology,
    mode: Mode,
    variant: Variant,
    point: &OperatingPoint,
    f_sw: f64,
    with_spectrum: bool,
) -> Result<std::result::Result<(PointAnalysis, SwitchingTrace), Infeasibility>> {
    let cfg = sys.modulation(topology, mode, variant, f_sw);
    cfg.validate()?;
    let motor = sys.motor(topology);
    let solution = match solve_operating_point(motor, point, cfg.voltage_limit()) {
        Ok(s) => s,
        Err(why) => return Ok(Err(why)),
    };
    let trace = synthesize_period(&cfg, &solution)?;
    let delta_u = trace.dc_link_ripple(sys.dc_link.c_dc);
    let profiles = trace
        .channels
        .iter()
        .filter(|c| mode.uses_switch(&c.id))
        .map(|c| SwitchProfile {
            id: c.id.clone(),
            class: c.class,
            profile: LossProfile::from_channel(c, sys.devices.get(c.class), trace.period),
        })
        .collect();
    let harmonic = if with_spectrum {
        let params = sys.harmonic(topology);
        let (lo, hi) = params.window(f_sw);
        let spectrum = dq_ripple_spectrum(&trace.waveform, lo, hi)?;
        Some(harmonic_losses(&spectrum, params)?)
    } else {
        None
    };
    let analysis = PointAnalysis {
        topology,
        mode,
        variant,
        f_sw,
        speed: point.speed,
        torque: point.torque,
        p_mot_f: fundamental_losses(motor, &solution),
        solution,
        delta_u,
        profiles,
        harmonic,
    };
    Ok(Ok((analysis, trace)))
}
