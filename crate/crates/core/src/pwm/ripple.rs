//! DC-link capacitor current and the resulting voltage ripple.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Interval on which the link current is c0 + a·cos ωt + b·sin ωt.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacitorSegment {
    pub t0: f64,
    pub t1: f64,
    pub c0: f64,
    pub a: f64,
    pub b: f64,
}

/// Piecewise-sinusoidal capacitor current over one period; the period mean
/// is carried by the source and removed here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacitorCurrent {
    pub omega: f64,
    pub period: f64,
    pub segments: Vec<CapacitorSegment>,
    pub mean: f64,
}

impl CapacitorCurrent {
    pub fn new(omega: f64, period: f64, segments: Vec<CapacitorSegment>, remove_mean: bool) -> Self {
        let mut me = Self { omega, period, segments, mean: 0.0 };
        if remove_mean {
            let q: f64 = me.segments.iter().map(|s| me.raw_charge(s, s.t1)).sum();
            me.mean = q / period;
        }
        me
    }

    /// Constant current on each `(t0, t1, i)` interval.
    pub fn piecewise_constant(period: f64, pieces: &[(f64, f64, f64)], remove_mean: bool) -> Self {
        let segments = pieces.iter().map(|&(t0, t1, c0)| CapacitorSegment { t0, t1, c0, a: 0.0, b: 0.0 }).collect();
        Self::new(2.0 * PI / period, period, segments, remove_mean)
    }

    /// Capacitor current at time `t`.
    pub fn value(&self, t: f64) -> f64 {
        let s = self.segments.iter().find(|s| t >= s.t0 && t < s.t1).or(self.segments.last());
        s.map_or(0.0, |s| self.eval(s, t))
    }

    fn eval(&self, s: &CapacitorSegment, t: f64) -> f64 {
        let th = self.omega * t;
        s.c0 - self.mean + s.a * th.cos() + s.b * th.sin()
    }

    /// ∫ from s.t0 to t of the link current before mean removal.
    fn raw_charge(&self, s: &CapacitorSegment, t: f64) -> f64 {
        let w = self.omega;
        s.c0 * (t - s.t0) + s.a * ((w * t).sin() - (w * s.t0).sin()) / w
            - s.b * ((w * t).cos() - (w * s.t0).cos()) / w
    }

    fn charge(&self, s: &CapacitorSegment, t: f64) -> f64 {
        self.raw_charge(s, t) - self.mean * (t - s.t0)
    }

    /// Peak-to-peak excursion of the capacitor charge (C), interior extrema included.
    pub fn charge_excursion(&self) -> f64 {
        let (mut q, mut lo, mut hi) = (0.0f64, 0.0f64, 0.0f64);
        for s in &self.segments {
            for t in self.stationary_points(s) {
                let v = q + self.charge(s, t);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            q += self.charge(s, s.t1);
            lo = lo.min(q);
            hi = hi.max(q);
        }
        hi - lo
    }

    /// Roots of the current inside (t0, t1).
    fn stationary_points(&self, s: &CapacitorSegment) -> Vec<f64> {
        let r = s.a.hypot(s.b);
        let c = s.c0 - self.mean;
        if r == 0.0 || c.abs() > r {
            return Vec::new();
        }
        // a·cos θ + b·sin θ = r·cos(θ - δ) = -c
        let delta = s.b.atan2(s.a);
        let alpha = (-c / r).acos();
        let (th0, th1) = (self.omega * s.t0, self.omega * s.t1);
        let mut out = Vec::new();
        for base in [delta + alpha, delta - alpha] {
            let mut k = ((th0 - base) / (2.0 * PI)).ceil();
            loop {
                let th = base + 2.0 * PI * k;
                if th >= th1 {
                    break;
                }
                if th > th0 {
                    out.push(th / self.omega);
                }
                k += 1.0;
            }
        }
        out
    }
}

/// Peak-to-peak DC-link voltage ripple (V) for link capacitance `c_dc` (F).
pub fn dc_link_ripple(current: &CapacitorCurrent, c_dc: f64) -> f64 {
    current.charge_excursion() / c_dc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_current_gives_zero_ripple() {
        let c = CapacitorCurrent::piecewise_constant(1e-3, &[(0.0, 1e-3, 0.0)], true);
        assert_eq!(dc_link_ripple(&c, 500e-6), 0.0);
    }

    #[test]
    fn square_wave_hand_value() {
        let c = CapacitorCurrent::piecewise_constant(2e-4, &[(0.0, 1e-4, 10.0), (1e-4, 2e-4, -10.0)], true);
        assert!((dc_link_ripple(&c, 500e-6) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn constant_offset_is_removed() {
        let c = CapacitorCurrent::piecewise_constant(2e-4, &[(0.0, 1e-4, 60.0), (1e-4, 2e-4, 40.0)], true);
        assert!((c.mean - 50.0).abs() < 1e-9);
        assert!((dc_link_ripple(&c, 500e-6) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn sinusoid_peak_is_found_inside_a_segment() {
        // i = cos ωt over one period, single segment: charge sin(ωt)/ω spans 2/ω.
        let w = 2.0 * PI * 50.0;
        let seg = CapacitorSegment { t0: 0.0, t1: 0.02, c0: 0.0, a: 1.0, b: 0.0 };
        let c = CapacitorCurrent::new(w, 0.02, vec![seg], true);
        assert!((c.charge_excursion() - 2.0 / w).abs() < 1e-12);
        assert!((c.value(0.0) - 1.0).abs() < 1e-12);
    }
}
