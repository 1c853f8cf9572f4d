//! Full-load chip-area sizing.
//!
//! Each switch gets the smallest granule multiple that keeps its junction
//! below the limit at a point; a topology takes the per-switch maximum over
//! the full-load envelope at the design frequency. Link ripple does not
//! depend on chip area; it is checked at the design frequency after thermal
//! sizing, and the lowest grid frequency meeting it at the worst point is
//! reported alongside.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze_point, Analysis, PointAnalysis};
use crate::device::{DeviceSet, LossProfile, SwitchDesign, ThermalModel, VoltageClass};
use crate::error::{Error, Result};
use crate::pwm::{Mode, Topology, Variant};
use crate::system::SystemModel;
use crate::vehicle::OperatingPoint;

/// A concrete inverter: topology, modulator, chip areas and usable modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverterDesign {
    pub id: String,
    pub family: String,
    pub topology: Topology,
    pub variant: Variant,
    /// Modes the design may run, fallback first
    pub modes: Vec<Mode>,
    /// Mode able to serve the whole full-load envelope
    pub fallback: Mode,
    /// All switches of the topology in fixed order
    pub switches: Vec<SwitchDesign>,
    /// The B6 baseline all area factors refer to
    pub reference: bool,
    pub area_factor: Option<f64>,
    /// Σ switch areas (mm²)
    pub total_area: f64,
}

impl InverterDesign {
    pub fn new(
        id: impl Into<String>,
        family: impl Into<String>,
        topology: Topology,
        variant: Variant,
        modes: Vec<Mode>,
        switches: Vec<SwitchDesign>,
    ) -> Self {
        let total_area = switches.iter().map(|s| s.area).sum();
        let fallback = modes[0];
        Self {
            id: id.into(),
            family: family.into(),
            topology,
            variant,
            modes,
            fallback,
            switches,
            reference: false,
            area_factor: None,
            total_area,
        }
    }

    pub fn area(&self, id: &str) -> Option<f64> {
        self.switches.iter().find(|s| s.id == id).map(|s| s.area)
    }

    pub fn validate(&self, granule: f64) -> Result<()> {
        let expected = self.topology.switches();
        if expected.len() != self.switches.len()
            || expected.iter().zip(&self.switches).any(|((id, class), s)| *id != s.id || *class != s.class)
        {
            return Err(Error::invalid(&self.id, "switch set does not match the topology"));
        }
        for s in &self.switches {
            let k = s.area / granule;
            if !(s.area > 0.0 && (k - k.round()).abs() < 1e-9) {
                return Err(Error::invalid(&self.id, format!("{} area {} is not a positive granule multiple", s.id, s.area)));
            }
        }
        if self.modes.iter().any(|m| !self.topology.modes().contains(m)) {
            return Err(Error::invalid(&self.id, "mode not supported by the topology"));
        }
        Ok(())
    }
}

/// Requirement of one switch at one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchSizing {
    pub id: String,
    pub class: VoltageClass,
    /// Smallest feasible granule multiple (mm²)
    pub area: f64,
    pub t_j: f64,
    pub p_con: f64,
    pub p_sw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSizing {
    pub index: usize,
    pub speed: f64,
    pub torque: f64,
    /// Frequency the point was sized at (Hz)
    pub f_sw: f64,
    pub delta_u: f64,
    pub ripple_ok: bool,
    pub switches: Vec<SwitchSizing>,
    /// Σ P_sw / Σ P_con at the sized areas
    pub p_sw_over_p_con: f64,
}

impl PointSizing {
    pub fn total_area(&self) -> f64 {
        self.switches.iter().map(|s| s.area).sum()
    }
}

/// ΔU over a frequency grid and the first grid frequency within the limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RippleSearch {
    pub curve: Vec<(f64, f64)>,
    pub selected: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub id: String,
    pub area: f64,
    /// Envelope index of the point demanding this area
    pub point: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizingReport {
    pub design_id: String,
    pub topology: Topology,
    pub mode: Mode,
    pub variant: Variant,
    pub f_design: f64,
    pub points: Vec<PointSizing>,
    /// Envelope points the mode cannot reach electrically (skipped on request)
    pub skipped: Vec<usize>,
    pub binding: Vec<Binding>,
    pub total_area: f64,
    /// Envelope index with the largest ripple at the design frequency
    pub worst_ripple_point: usize,
    pub ripple: RippleSearch,
}

/// Smallest granule-multiple area keeping `profile` within the junction limit.
pub fn size_switch(profile: &LossProfile, tech: &crate::device::DeviceTech, thermal: &ThermalModel) -> Option<SwitchSizing> {
    let steps = (thermal.area_cap / thermal.granule + 1e-9).floor() as usize;
    (1..=steps).find_map(|k| {
        let area = k as f64 * thermal.granule;
        let (loss, th) = profile.evaluate(tech, area, thermal);
        th.feasible.then(|| SwitchSizing {
            id: String::new(),
            class: VoltageClass::V1200,
            area,
            t_j: th.t_j,
            p_con: loss.p_con,
            p_sw: loss.p_sw,
        })
    })
}

/// Per-switch minimal areas for an analysed point.
pub fn size_analysis(a: &PointAnalysis, index: usize, devices: &DeviceSet, thermal: &ThermalModel, delta_u_max: f64) -> Result<PointSizing> {
    let mut switches = Vec::with_capacity(a.profiles.len());
    for p in &a.profiles {
        let tech = devices.get(p.class);
        let mut s = size_switch(&p.profile, tech, thermal).ok_or_else(|| Error::NoFeasibleArea {
            switch: p.id.clone(),
            speed: a.speed,
            torque: a.torque,
            cap: thermal.area_cap,
        })?;
        s.id = p.id.clone();
        s.class = p.class;
        switches.push(s);
    }
    let p_con: f64 = switches.iter().map(|s| s.p_con).sum();
    let p_sw: f64 = switches.iter().map(|s| s.p_sw).sum();
    Ok(PointSizing {
        index,
        speed: a.speed,
        torque: a.torque,
        f_sw: a.f_sw,
        delta_u: a.delta_u,
        ripple_ok: a.delta_u <= delta_u_max,
        switches,
        p_sw_over_p_con: if p_con > 0.0 { p_sw / p_con } else { 0.0 },
    })
}

fn analyse(sys: &SystemModel, t: Topology, m: Mode, v: Variant, point: &OperatingPoint, f: f64) -> Result<Option<PointAnalysis>> {
    Ok(match analyze_point(sys, t, m, v, point, f, false)? {
        Analysis::Feasible(a) => Some(a),
        Analysis::Infeasible(_) => None,
    })
}

fn unreachable_point(point: &OperatingPoint, mode: Mode) -> Error {
    Error::InfeasiblePoint { speed: point.speed, torque: point.torque, reason: format!("outside the {mode} mode envelope") }
}

/// Minimal per-switch areas at exactly `f_sw`.
pub fn size_point(
    sys: &SystemModel,
    topology: Topology,
    mode: Mode,
    variant: Variant,
    point: &OperatingPoint,
    f_sw: f64,
) -> Result<PointSizing> {
    let a = analyse(sys, topology, mode, variant, point, f_sw)?.ok_or_else(|| unreachable_point(point, mode))?;
    size_analysis(&a, 0, &sys.devices, &sys.thermal, sys.dc_link.delta_u_max)
}

/// ΔU along `grid` and the first frequency not exceeding `limit`.
pub fn min_feasible_fsw(grid: &[f64], limit: f64, mut ripple: impl FnMut(f64) -> Result<f64>) -> Result<RippleSearch> {
    let mut curve = Vec::with_capacity(grid.len());
    for &f in grid {
        curve.push((f, ripple(f)?));
    }
    let selected = curve.iter().find(|(_, du)| *du <= limit).map(|(f, _)| *f);
    Ok(RippleSearch { curve, selected })
}

/// Sizes every switch of `topology` in `mode` over `envelope`.
///
/// With `skip_unreachable`, envelope points outside the mode's electrical
/// limits are left out instead of failing the design.
pub fn size_topology(
    sys: &SystemModel,
    topology: Topology,
    mode: Mode,
    variant: Variant,
    envelope: &[OperatingPoint],
    f_design: f64,
    skip_unreachable: bool,
) -> Result<(InverterDesign, SizingReport)> {
    if envelope.is_empty() {
        return Err(Error::invalid("envelope", "no points to size for"));
    }
    let analysed: Vec<Option<PointAnalysis>> =
        envelope.par_iter().map(|p| analyse(sys, topology, mode, variant, p, f_design)).collect::<Result<_>>()?;
    let sized: Vec<Option<PointSizing>> = analysed
        .par_iter()
        .enumerate()
        .map(|(k, a)| a.as_ref().map(|a| size_analysis(a, k, &sys.devices, &sys.thermal, sys.dc_link.delta_u_max)).transpose())
        .collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(sized.len());
    let mut skipped = Vec::new();
    for (k, s) in sized.into_iter().enumerate() {
        match s {
            Some(s) => points.push(s),
            None if skip_unreachable => skipped.push(k),
            None => return Err(unreachable_point(&envelope[k], mode)),
        }
    }
    if points.is_empty() {
        return Err(Error::invalid("envelope", format!("no point reachable in {mode} mode")));
    }

    let granule = sys.thermal.granule;
    let mut binding = Vec::new();
    let mut switches = Vec::new();
    for (id, class) in topology.switches() {
        let mut best: Option<(f64, usize)> = None;
        for p in &points {
            if let Some(s) = p.switches.iter().find(|s| s.id == id) {
                if best.is_none_or(|(a, _)| s.area > a) {
                    best = Some((s.area, p.index));
                }
            }
        }
        let area = match best {
            Some((area, point)) => {
                binding.push(Binding { id: id.clone(), area, point });
                area
            }
            None => granule,
        };
        switches.push(SwitchDesign { id, class, area });
    }

    // Worst ripple at the design frequency and its frequency curve.
    let worst = analysed
        .iter()
        .enumerate()
        .filter_map(|(k, a)| a.as_ref().map(|a| (k, a.delta_u)))
        .fold((0, f64::NEG_INFINITY), |acc, (k, du)| if du > acc.1 { (k, du) } else { acc })
        .0;
    let grid = sys.switching.escalation_from(sys.switching.grid_min);
    let worst_point = envelope[worst];
    let curve: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&f| Ok((f, analyse(sys, topology, mode, variant, &worst_point, f)?.map_or(f64::INFINITY, |a| a.delta_u))))
        .collect::<Result<_>>()?;
    let ripple = min_feasible_fsw(&grid, sys.dc_link.delta_u_max, |f| {
        Ok(curve.iter().find(|(g, _)| *g == f).map_or(f64::INFINITY, |c| c.1))
    })?;

    let id = format!("{}_{}({})", topology, variant, mode);
    let design = InverterDesign::new(id.clone(), id.clone(), topology, variant, vec![mode], switches);
    let report = SizingReport {
        design_id: id,
        topology,
        mode,
        variant,
        f_design,
        total_area: design.total_area,
        points,
        skipped,
        binding,
        worst_ripple_point: worst,
        ripple,
    };
    Ok((design, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::DeviceTech;

    fn conduction_only() -> DeviceTech {
        DeviceTech { k_on: 0.0, k_off: 0.0, q_oss_specific: 0.0, r_on_temp_coeff: 0.0, ..DeviceTech::sic_1200v() }
    }

    #[test]
    fn conduction_only_closed_form() {
        // 100 A rms continuous: 3·A^-0.4 · 1e4·0.3/A = 110 → A = (3·1e4·0.3/110)^(1/1.4)
        let thermal = ThermalModel::default();
        let exact = (3.0 * 1e4 * 0.3 / 110.0_f64).powf(1.0 / 1.4);
        assert!((exact - 23.2).abs() < 0.1, "{exact}");
        let p = LossProfile { i2_mean: 1e4, p_vi: 0.0, p_qoss_per_area: 0.0 };
        let s = size_switch(&p, &conduction_only(), &thermal).unwrap();
        assert_eq!(s.area, 25.0);
        let fine = ThermalModel { granule: 0.01, ..thermal };
        let s = size_switch(&p, &conduction_only(), &fine).unwrap();
        assert!(s.area >= exact && s.area - exact < 0.011, "{} vs {exact}", s.area);
    }

    #[test]
    fn zero_load_gets_one_granule() {
        let sys = SystemModel::default();
        let s = size_point(&sys, Topology::B6, Mode::TwoLevel, Variant::A, &OperatingPoint::new(0.0, 0.0, 1.0), 10e3).unwrap();
        assert!(s.switches.iter().all(|s| s.area == 25.0));
    }

    #[test]
    fn infeasible_below_cap() {
        let p = LossProfile { i2_mean: 1e8, p_vi: 0.0, p_qoss_per_area: 0.0 };
        assert!(size_switch(&p, &conduction_only(), &ThermalModel::default()).is_none());
    }

    #[test]
    fn ripple_threshold_by_hand() {
        let grid = [5e3, 10e3, 15e3, 20e3];
        let r = min_feasible_fsw(&grid, 15.0, |f| Ok(20.0 * 10e3 / f)).unwrap();
        assert_eq!(r.selected, Some(15e3));
        assert_eq!(r.curve.len(), 4);
        let r = min_feasible_fsw(&grid, 15.0, |_| Ok(1.0)).unwrap();
        assert_eq!(r.selected, Some(5e3));
        let r = min_feasible_fsw(&grid, 15.0, |_| Ok(100.0)).unwrap();
        assert_eq!(r.selected, None);
    }

    #[test]
    fn degenerate_envelopes_follow_max_semantics() {
        let sys = SystemModel::default();
        let light = OperatingPoint::new(2000.0, 50.0, 1.0);
        let heavy = OperatingPoint::new(3000.0, 400.0, 1.0);
        let single = size_point(&sys, Topology::B6, Mode::TwoLevel, Variant::A, &heavy, 10e3).unwrap();
        let (d1, _) = size_topology(&sys, Topology::B6, Mode::TwoLevel, Variant::A, &[heavy], 10e3, false).unwrap();
        let (d2, r2) = size_topology(&sys, Topology::B6, Mode::TwoLevel, Variant::A, &[light, heavy], 10e3, false).unwrap();
        for s in &single.switches {
            assert_eq!(d1.area(&s.id), Some(s.area));
            assert_eq!(d2.area(&s.id), Some(s.area));
        }
        assert!(r2.binding.iter().all(|b| b.point == 1));
        assert_eq!(d2.total_area, d2.switches.iter().map(|s| s.area).sum::<f64>());
        d2.validate(25.0).unwrap();
    }
}
