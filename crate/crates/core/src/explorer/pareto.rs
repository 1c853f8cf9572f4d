//! Non-dominated designs in the (chip area, energy loss) plane.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub design_id: String,
    pub family: String,
    /// mm²
    pub area: f64,
    /// kWh per 100 km
    pub delta_e: f64,
    pub policy: String,
}

impl ParetoPoint {
    /// No worse in both objectives and better in one.
    pub fn dominates(&self, other: &ParetoPoint) -> bool {
        self.area <= other.area && self.delta_e <= other.delta_e && (self.area < other.area || self.delta_e < other.delta_e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dominated {
    pub point: ParetoPoint,
    /// A front member dominating it
    pub dominated_by: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    /// Sorted by area; Δe non-increasing along it
    pub front: Vec<ParetoPoint>,
    pub dominated: Vec<Dominated>,
}

/// Splits `points` into the front and the rest, both in (area, Δe) order.
/// Exact duplicates stay on the front together.
pub fn pareto_front(points: &[ParetoPoint]) -> ParetoFront {
    let mut order: Vec<&ParetoPoint> = points.iter().collect();
    order.sort_by(|a, b| a.area.total_cmp(&b.area).then(a.delta_e.total_cmp(&b.delta_e)));
    let mut out = ParetoFront::default();
    for p in order {
        // The last front member has the lowest Δe so far among smaller-or-equal areas.
        let keeper = match out.front.last() {
            Some(last) if last.dominates(p) => Some(last.design_id.clone()),
            _ => None,
        };
        match keeper {
            Some(by) => out.dominated.push(Dominated { point: p.clone(), dominated_by: by }),
            None => out.front.push(p.clone()),
        }
    }
    out
}
