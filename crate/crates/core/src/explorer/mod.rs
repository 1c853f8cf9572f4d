//! Design-space exploration: families of area-scaled designs and their
//! Pareto fronts.

pub mod family;
pub mod pareto;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use family::{apportion, build_design_family, round_to_granule, structural_floor, Allocation, FamilySpec};
pub use pareto::{pareto_front, Dominated, ParetoFront, ParetoPoint};

use crate::error::Result;
use crate::pwm::trace::variant_matters;
use crate::pwm::{Mode, Topology, Variant};
use crate::sizing::{size_topology, InverterDesign, SizingReport};
use crate::system::SystemModel;
use crate::vehicle::OperatingPoint;

/// Full-load sizing of every (topology, mode, modulator) the families need.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SizingSet {
    pub entries: BTreeMap<String, (InverterDesign, SizingReport)>,
}

fn sizing_key(topology: Topology, mode: Mode, variant: Variant) -> String {
    let variant = if variant_matters(topology, mode) { variant } else { Variant::A };
    format!("{topology}_{variant}({mode})")
}

impl SizingSet {
    pub fn get(&self, topology: Topology, mode: Mode, variant: Variant) -> Option<&(InverterDesign, SizingReport)> {
        self.entries.get(&sizing_key(topology, mode, variant))
    }

    /// Sizes `(topology, mode, variant)` once. Star operation cannot reach the
    /// whole envelope, so its unreachable points are skipped.
    pub fn ensure(&mut self, sys: &SystemModel, envelope: &[OperatingPoint], topology: Topology, mode: Mode, variant: Variant) -> Result<()> {
        let key = sizing_key(topology, mode, variant);
        if let std::collections::btree_map::Entry::Vacant(slot) = self.entries.entry(key) {
            let variant = if variant_matters(topology, mode) { variant } else { Variant::A };
            slot.insert(size_topology(sys, topology, mode, variant, envelope, sys.switching.design_f_sw, mode == Mode::Star)?);
        }
        Ok(())
    }
}

/// The sized B6 design every area factor refers to.
pub fn baseline_design(sizing: &SizingSet) -> Option<InverterDesign> {
    let (d, _) = sizing.get(Topology::B6, Mode::TwoLevel, Variant::A)?;
    let mut d = d.clone();
    d.id = "B6".into();
    d.family = "B6".into();
    d.reference = true;
    d.area_factor = Some(1.0);
    Some(d)
}

/// Family floors relative to the baseline, as reported alongside the designs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub name: String,
    pub floor: f64,
    pub designs: Vec<String>,
}

/// Sizes everything the families need and expands them into designs.
/// The B6 family is the baseline itself.
pub fn build_designs(
    sys: &SystemModel,
    envelope: &[OperatingPoint],
    families: &[FamilySpec],
) -> Result<(SizingSet, Vec<InverterDesign>, Vec<FamilySummary>)> {
    let mut sizing = SizingSet::default();
    sizing.ensure(sys, envelope, Topology::B6, Mode::TwoLevel, Variant::A)?;
    for f in families {
        f.validate()?;
        for &m in &f.modes {
            sizing.ensure(sys, envelope, f.topology, m, f.variant)?;
        }
    }
    let baseline = baseline_design(&sizing).expect("sized above");
    let granule = sys.thermal.granule;
    let mut designs: Vec<InverterDesign> = Vec::new();
    let mut summaries = Vec::new();
    for f in families {
        let (mandatory, _) = sizing.get(f.topology, f.fallback(), f.variant).expect("sized above");
        let auxiliary = f.auxiliary().and_then(|m| sizing.get(f.topology, m, f.variant)).map(|(d, _)| d);
        let floor = structural_floor(mandatory, f.fallback(), baseline.total_area);
        let built = if f.topology == Topology::B6 {
            let mut d = baseline.clone();
            d.family = f.name.clone();
            vec![d]
        } else {
            build_design_family(f, &baseline, mandatory, auxiliary, granule)?
        };
        summaries.push(FamilySummary { name: f.name.clone(), floor, designs: built.iter().map(|d| d.id.clone()).collect() });
        designs.extend(built);
    }
    Ok((sizing, designs, summaries))
}

/// Default families: the baseline, three TNPC modulators and two B6²-Y modulators.
pub fn default_families() -> Vec<FamilySpec> {
    let factors = vec![1.0, 1.13, 1.3, 1.5];
    let mut out = vec![FamilySpec {
        name: "B6".into(),
        topology: Topology::B6,
        variant: Variant::A,
        modes: vec![Mode::TwoLevel],
        area_factors: vec![1.0],
        single_mode_design: None,
        allocation: Allocation::Proportional,
    }];
    for v in [Variant::A, Variant::B, Variant::C] {
        out.push(FamilySpec {
            name: format!("TNPC_{v}"),
            topology: Topology::Tnpc,
            variant: v,
            modes: vec![Mode::TwoLevel, Mode::ThreeLevel],
            area_factors: factors.clone(),
            single_mode_design: Some(Mode::ThreeLevel),
            allocation: Allocation::Proportional,
        });
    }
    for v in [Variant::A, Variant::B] {
        out.push(FamilySpec {
            name: format!("B6Y_{v}"),
            topology: Topology::B6Y,
            variant: v,
            modes: vec![Mode::Bridge, Mode::Star],
            area_factors: factors.clone(),
            single_mode_design: Some(Mode::Bridge),
            allocation: Allocation::Proportional,
        });
    }
    out
}
