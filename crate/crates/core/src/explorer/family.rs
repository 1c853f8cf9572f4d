//! Area-scaled design families built around the B6 baseline.

use serde::{Deserialize, Serialize};

use crate::device::SwitchDesign;
use crate::error::{Error, Result};
use crate::pwm::{Mode, Topology, Variant};
use crate::sizing::InverterDesign;

/// How surplus area is split over the auxiliary switches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Allocation {
    /// In proportion to the areas the auxiliary mode needs at full load
    #[default]
    Proportional,
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub name: String,
    pub topology: Topology,
    pub variant: Variant,
    /// Full-load capable mode first, then the auxiliary mode if any
    pub modes: Vec<Mode>,
    /// Total area relative to the B6 baseline, ascending
    pub area_factors: Vec<f64>,
    /// Also emit the design sized for this one mode alone; it must be able
    /// to serve the whole full-load envelope
    #[serde(default)]
    pub single_mode_design: Option<Mode>,
    #[serde(default)]
    pub allocation: Allocation,
}

impl FamilySpec {
    pub fn fallback(&self) -> Mode {
        self.modes[0]
    }

    pub fn auxiliary(&self) -> Option<Mode> {
        self.modes.get(1).copied()
    }

    pub fn validate(&self) -> Result<()> {
        let key = |k: &str| format!("families.{}.{k}", self.name);
        if self.name.is_empty() {
            return Err(Error::Config { key: "families.name".into(), reason: "must not be empty".into() });
        }
        if self.modes.is_empty() || self.modes.len() > 2 {
            return Err(Error::Config { key: key("modes"), reason: "one fallback mode and at most one auxiliary mode".into() });
        }
        if self.modes.len() == 2 && self.modes[0] == self.modes[1] {
            return Err(Error::Config { key: key("modes"), reason: "modes must differ".into() });
        }
        if let Some(m) = self.modes.iter().find(|m| !self.topology.modes().contains(m)) {
            return Err(Error::Config { key: key("modes"), reason: format!("{} does not support mode {m}", self.topology) });
        }
        if !self.topology.variants().contains(&self.variant) {
            return Err(Error::Config { key: key("variant"), reason: format!("{} has no variant {}", self.topology, self.variant) });
        }
        if let Some(m) = self.single_mode_design {
            if !self.modes.contains(&m) || m == Mode::Star {
                return Err(Error::Config {
                    key: key("single_mode_design"),
                    reason: format!("{m} is not a full-load capable mode of this family"),
                });
            }
        }
        if self.area_factors.is_empty() && self.single_mode_design.is_none() {
            return Err(Error::Config { key: key("area_factors"), reason: "family would contain no design".into() });
        }
        if self.area_factors.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::Config { key: key("area_factors"), reason: "factors must be positive".into() });
        }
        if self.area_factors.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config { key: key("area_factors"), reason: "factors must be strictly ascending".into() });
        }
        Ok(())
    }
}

/// Smallest total relative to the baseline that keeps the fallback mode's
/// switches at their full-load areas.
pub fn structural_floor(mandatory: &InverterDesign, fallback: Mode, baseline_total: f64) -> f64 {
    let needed: f64 = mandatory.switches.iter().filter(|s| fallback.uses_switch(&s.id)).map(|s| s.area).sum();
    needed / baseline_total
}

/// Multiple of `granule` nearest to `area`.
pub fn round_to_granule(area: f64, granule: f64) -> f64 {
    (area / granule).round() * granule
}

/// Splits `units` granules over `weights` by the highest-averages rule, which
/// never takes area away from a switch when the total grows. Ties go to the
/// lower index.
pub fn apportion(weights: &[f64], units: usize) -> Vec<usize> {
    let mut out = vec![0usize; weights.len()];
    if weights.is_empty() {
        return out;
    }
    let uniform = weights.iter().all(|w| *w <= 0.0);
    for _ in 0..units {
        let mut best = 0;
        let mut best_q = f64::NEG_INFINITY;
        for (k, w) in weights.iter().enumerate() {
            let w = if uniform { 1.0 } else { w.max(0.0) };
            let q = w / (out[k] + 1) as f64;
            if q > best_q {
                best_q = q;
                best = k;
            }
        }
        out[best] += 1;
    }
    out
}

fn design_id(spec: &FamilySpec, factor: f64) -> String {
    let modes: Vec<&str> = spec.modes.iter().map(|m| m.name()).collect();
    let pct = ((factor - 1.0) * 100.0).round();
    format!("{}({})+{pct:.0}%", spec.name, modes.join("/"))
}

/// Designs of one family.
///
/// `mandatory` is sized for the fallback mode, `auxiliary` for the auxiliary
/// mode (its areas weight the surplus split). Fallback switches keep their
/// sized areas; the surplus over them goes to the auxiliary switches on top
/// of their base area, which is one granule where the fallback leaves them idle.
pub fn build_design_family(
    spec: &FamilySpec,
    baseline: &InverterDesign,
    mandatory: &InverterDesign,
    auxiliary: Option<&InverterDesign>,
    granule: f64,
) -> Result<Vec<InverterDesign>> {
    spec.validate()?;
    let fallback = spec.fallback();
    let floor = structural_floor(mandatory, fallback, baseline.total_area);
    let mut designs = Vec::new();

    let base: Vec<SwitchDesign> = mandatory
        .switches
        .iter()
        .map(|s| SwitchDesign { area: if fallback.uses_switch(&s.id) { s.area } else { granule }, ..s.clone() })
        .collect();
    let aux_idx: Vec<usize> = match spec.auxiliary() {
        Some(_) => (0..base.len()).filter(|&k| spec.topology.is_auxiliary(&base[k].id)).collect(),
        None => Vec::new(),
    };
    let weights: Vec<f64> = aux_idx
        .iter()
        .map(|&k| match (spec.allocation, auxiliary) {
            (Allocation::Proportional, Some(a)) => a.area(&base[k].id).unwrap_or(granule),
            _ => 1.0,
        })
        .collect();
    let base_total: f64 = base.iter().map(|s| s.area).sum();

    for &factor in &spec.area_factors {
        if factor < floor - 1e-9 {
            return Err(Error::BelowStructuralFloor { family: spec.name.clone(), factor, floor });
        }
        let target = round_to_granule(factor * baseline.total_area, granule);
        let units = ((target - base_total) / granule).round().max(0.0) as usize;
        let share = apportion(&weights, if aux_idx.is_empty() { 0 } else { units });
        let mut switches = base.clone();
        for (&k, &u) in aux_idx.iter().zip(&share) {
            switches[k].area += u as f64 * granule;
        }
        let mut d = InverterDesign::new(design_id(spec, factor), &spec.name, spec.topology, spec.variant, spec.modes.clone(), switches);
        d.area_factor = Some(factor);
        designs.push(d);
    }

    if let Some(mode) = spec.single_mode_design {
        let src = match auxiliary {
            _ if mode == fallback => mandatory,
            Some(a) => a,
            None => return Err(Error::invalid(&spec.name, format!("no {mode} sizing for the single-mode design"))),
        };
        let id = format!("{}({})", spec.name, mode);
        let mut d = InverterDesign::new(id, &spec.name, spec.topology, spec.variant, vec![mode], src.switches.clone());
        d.area_factor = Some(d.total_area / baseline.total_area);
        designs.push(d);
    }
    for d in &designs {
        d.validate(granule)?;
    }
    Ok(designs)
}
