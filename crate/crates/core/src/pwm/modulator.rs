//! Per-carrier leg references and the pulse each leg produces.
//!
//! References are normalised to V_dc/2, so a two-level leg spans [-1, 1]
//! with levels ±1 and a three-level leg adds the neutral level 0.

use serde::{Deserialize, Serialize};

use crate::device::DeviceSet;

use super::ZeroVectorPolicy;

/// Centred pulse within one carrier: level `inside` for |t - t_c| < half_width·T_c,
/// `outside` elsewhere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LegPattern {
    pub half_width: f64,
    pub inside: i8,
    pub outside: i8,
}

impl LegPattern {
    pub fn constant(level: i8) -> Self {
        Self { half_width: 0.0, inside: level, outside: level }
    }

    /// Carrier-averaged level.
    pub fn mean(&self) -> f64 {
        let w = 2.0 * self.half_width;
        w * f64::from(self.inside) + (1.0 - w) * f64::from(self.outside)
    }

    /// Whether the leg changes state inside the carrier.
    pub fn switches(&self) -> bool {
        self.inside != self.outside && self.half_width > 0.0 && self.half_width < 0.5
    }

    /// Level at carrier-relative offset `x` ∈ [0, 1).
    pub fn level_at(&self, x: f64) -> i8 {
        if (x - 0.5).abs() < self.half_width {
            self.inside
        } else {
            self.outside
        }
    }
}

/// Two-level leg: +1 pulse centred in the carrier, duty (1+v)/2.
pub fn two_level_leg(v: f64) -> LegPattern {
    let d = ((1.0 + v) / 2.0).clamp(0.0, 1.0);
    if d <= 0.0 {
        LegPattern::constant(-1)
    } else if d >= 1.0 {
        LegPattern::constant(1)
    } else {
        LegPattern { half_width: d / 2.0, inside: 1, outside: -1 }
    }
}

/// Three-level leg under phase-disposition carriers: a positive reference
/// pulses between 0 and +1, a negative one between -1 and 0, both centred.
pub fn three_level_leg(v: f64) -> LegPattern {
    let v = v.clamp(-1.0, 1.0);
    if v >= 1.0 {
        LegPattern::constant(1)
    } else if v <= -1.0 {
        LegPattern::constant(-1)
    } else if v > 0.0 {
        LegPattern { half_width: v / 2.0, inside: 1, outside: 0 }
    } else if v < 0.0 {
        LegPattern { half_width: (1.0 + v) / 2.0, inside: 0, outside: -1 }
    } else {
        LegPattern::constant(0)
    }
}

/// Min-max zero-sequence injection (two-level space-vector equivalent).
pub fn min_max(v: [f64; 3]) -> [f64; 3] {
    let off = (max3(v) + min3(v)) / 2.0;
    v.map(|x| x - off)
}

/// Commutation-energy weights for choosing the clamped zero state.
///
/// Each pulsing leg costs two commutations of its hard-switched device at
/// V_dc/2: (k_on + k_off)·V·|i| plus the output-charge energy of a
/// reference-area chip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClampCost {
    /// (k_on + k_off)·V of the outer device (J/A)
    pub outer_vi: f64,
    /// Output-charge energy of the outer device (J)
    pub outer_qoss: f64,
    pub mid_vi: f64,
    pub mid_qoss: f64,
}

impl ClampCost {
    pub fn from_devices(devices: &DeviceSet, v_dc: f64, reference_area: f64) -> Self {
        let v = v_dc / 2.0;
        let o = &devices.v1200;
        let m = &devices.v750;
        Self {
            outer_vi: (o.k_on + o.k_off) * v,
            outer_qoss: o.qoss_energy_per_area(v) * reference_area,
            mid_vi: (m.k_on + m.k_off) * v,
            mid_qoss: m.qoss_energy_per_area(v) * reference_area,
        }
    }

    /// Energy of one carrier of a leg pulsing around reference `v` with current `i`.
    pub fn leg_energy(&self, v: f64, i: f64) -> f64 {
        if v.abs() >= 1.0 || v == 0.0 {
            return 0.0;
        }
        // Upper band: the outer switch is hard for positive current; lower band mirrored.
        let outer = (v > 0.0) == (i > 0.0);
        if outer {
            2.0 * self.outer_vi * i.abs() + self.outer_qoss
        } else {
            2.0 * self.mid_vi * i.abs() + self.mid_qoss
        }
    }
}

/// Three-level leg references for normalised phase references `v` and leg
/// currents `i` sampled at the carrier centre.
pub fn three_level_references(policy: ZeroVectorPolicy, v: [f64; 3], i: [f64; 3], cost: &ClampCost) -> [f64; 3] {
    let out = match policy {
        ZeroVectorPolicy::Unrestricted => {
            // Second offset centres the active vectors within the local band.
            let v1 = min_max(v);
            let w = v1.map(|x| (x + 1.0).rem_euclid(1.0));
            let off2 = 0.5 - (max3(w) + min3(w)) / 2.0;
            v1.map(|x| x + off2)
        }
        ZeroVectorPolicy::UpperOnly => upper_clamp(v),
        ZeroVectorPolicy::MinSwitchingEnergy => {
            let up = upper_clamp(v);
            let lo = lower_clamp(v);
            let e = |r: [f64; 3]| (0..3).map(|k| cost.leg_energy(r[k], i[k])).sum::<f64>();
            if e(lo) < e(up) {
                lo
            } else {
                up
            }
        }
    };
    out.map(|x| x.clamp(-1.0, 1.0))
}

fn upper_clamp(v: [f64; 3]) -> [f64; 3] {
    let off = 1.0 - max3(v);
    v.map(|x| x + off)
}

fn lower_clamp(v: [f64; 3]) -> [f64; 3] {
    let off = -1.0 - min3(v);
    v.map(|x| x + off)
}

fn max3(v: [f64; 3]) -> f64 {
    v[0].max(v[1]).max(v[2])
}

fn min3(v: [f64; 3]) -> f64 {
    v[0].min(v[1]).min(v[2])
}
