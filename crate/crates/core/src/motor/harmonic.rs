//! Ripple-voltage driven motor losses.
//!
//! Copper, iron and magnet parts are sums over the dq ripple spectrum weighted
//! by frequency-dependent machine curves. Curves are tabulated as (f, value)
//! pairs and interpolated linearly over log-frequency; lookups outside the
//! tabulated range are errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pwm::HarmonicSpectrum;

/// One machine curve as (frequency [Hz], value) pairs, frequency ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Curve(pub Vec<(f64, f64)>);

impl Curve {
    /// Log-spaced table of `scale · (f / f_ref)^exponent`.
    pub fn power_law(f_lo: f64, f_hi: f64, per_decade: usize, scale: f64, f_ref: f64, exponent: f64) -> Self {
        let decades = (f_hi / f_lo).log10();
        let count = (decades * per_decade as f64).round() as usize;
        let points = (0..=count)
            .map(|k| {
                let f = if k == count {
                    f_hi
                } else {
                    f_lo * 10f64.powf(k as f64 / per_decade as f64)
                };
                (f, scale * (f / f_ref).powf(exponent))
            })
            .collect();
        Curve(points)
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.0.len() < 2 {
            return Err(Error::invalid(name, "needs at least two points"));
        }
        for (k, &(f, v)) in self.0.iter().enumerate() {
            if !(f.is_finite() && f > 0.0 && v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("point {k} must have positive frequency and value")));
            }
            if k > 0 && f <= self.0[k - 1].0 {
                return Err(Error::invalid(name, format!("frequencies must increase at point {k}")));
            }
        }
        Ok(())
    }

    pub fn range(&self) -> (f64, f64) {
        (self.0[0].0, self.0[self.0.len() - 1].0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Curve(self.0.iter().map(|&(f, v)| (f, v * factor)).collect())
    }

    /// Value at `f`, linear in log-frequency between grid points.
    pub fn at(&self, f: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        let tol = 1e-9 * f.abs();
        if !(f >= lo - tol && f <= hi + tol) {
            return Err(Error::FrequencyOutOfGrid { frequency: f, min: lo, max: hi });
        }
        let pts = &self.0;
        let j = pts.partition_point(|&(x, _)| x <= f).clamp(1, pts.len() - 1);
        Ok(interpolate(pts[j - 1], pts[j], f))
    }
}

fn interpolate((f0, v0): (f64, f64), (f1, v1): (f64, f64), f: f64) -> f64 {
    let s = ((f / f0).ln() / (f1 / f0).ln()).clamp(0.0, 1.0);
    v0 + s * (v1 - v0)
}

/// Sequential lookups on ascending frequencies without repeated searching.
struct Cursor<'a> {
    pts: &'a [(f64, f64)],
    j: usize,
}

impl<'a> Cursor<'a> {
    fn new(curve: &'a Curve) -> Self {
        Self { pts: &curve.0, j: 1 }
    }

    fn at(&mut self, f: f64) -> f64 {
        while self.j < self.pts.len() - 1 && self.pts[self.j].0 <= f {
            self.j += 1;
        }
        interpolate(self.pts[self.j - 1], self.pts[self.j], f)
    }
}

/// Frequency-dependent harmonic machine curves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicCurves {
    /// d-axis differential inductance (H)
    pub ld: Curve,
    /// q-axis differential inductance (H)
    pub lq: Curve,
    /// Copper loss factor (Ω)
    pub r_cu: Curve,
    /// Iron loss equivalent resistance (Ω)
    pub r_iron: Curve,
    /// Magnet loss equivalent resistance (Ω)
    pub r_mag: Curve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicMotorParameters {
    pub curves: HarmonicCurves,
    pub k_cu: f64,
    pub k_iron: f64,
    pub k_mag: f64,
    /// Lower window edge at half the switching frequency when set
    pub f_min_half_fsw: bool,
    /// Upper window edge (Hz)
    pub f_max: f64,
}

impl Default for HarmonicMotorParameters {
    /// Synthetic skin-effect-like curves for the reference machine.
    fn default() -> Self {
        let (lo, hi, n) = (1.0e3, 1.0e6, 10);
        Self {
            curves: HarmonicCurves {
                ld: Curve::power_law(lo, hi, n, 0.10e-3, lo, -0.05),
                lq: Curve::power_law(lo, hi, n, 0.22e-3, lo, -0.05),
                r_cu: Curve::power_law(lo, hi, n, 12.0e-3, lo, 0.5),
                r_iron: Curve::power_law(lo, hi, n, 100.0, lo, 0.5),
                r_mag: Curve::power_law(lo, hi, n, 180.0, lo, 0.5),
            },
            k_cu: 1.5 / (4.0 * std::f64::consts::PI * std::f64::consts::PI),
            k_iron: 1.5,
            k_mag: 1.5,
            f_min_half_fsw: true,
            f_max: 1.0e6,
        }
    }
}

impl HarmonicMotorParameters {
    pub fn validate(&self) -> Result<()> {
        let c = &self.curves;
        for (name, curve) in [
            ("ld", &c.ld),
            ("lq", &c.lq),
            ("r_cu", &c.r_cu),
            ("r_iron", &c.r_iron),
            ("r_mag", &c.r_mag),
        ] {
            curve.validate(&format!("motor.harmonic.curves.{name}"))?;
        }
        for (name, v) in [("k_cu", self.k_cu), ("k_iron", self.k_iron), ("k_mag", self.k_mag)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("must be non-negative, got {v}")));
            }
        }
        if !(self.f_max.is_finite() && self.f_max > 0.0) {
            return Err(Error::invalid("f_max", "must be positive"));
        }
        Ok(())
    }

    /// Spectrum window for switching frequency `f_sw`.
    pub fn window(&self, f_sw: f64) -> (f64, f64) {
        let f_min = if self.f_min_half_fsw { f_sw / 2.0 } else { self.curves_range().0 };
        (f_min, self.f_max)
    }

    /// Frequency range on which every curve is defined.
    pub fn curves_range(&self) -> (f64, f64) {
        let c = &self.curves;
        [&c.ld, &c.lq, &c.r_cu, &c.r_iron, &c.r_mag]
            .iter()
            .map(|curve| curve.range())
            .fold((0.0_f64, f64::INFINITY), |(lo, hi), (a, b)| (lo.max(a), hi.min(b)))
    }

    /// Curves for a machine rewound with `kappa` times the turns.
    pub fn scaled(&self, kappa: f64) -> Self {
        let k2 = kappa * kappa;
        let c = &self.curves;
        Self {
            curves: HarmonicCurves {
                ld: c.ld.scaled(k2),
                lq: c.lq.scaled(k2),
                r_cu: c.r_cu.scaled(k2),
                r_iron: c.r_iron.scaled(k2),
                r_mag: c.r_mag.scaled(k2),
            },
            ..self.clone()
        }
    }
}

/// Harmonic motor loss components (W).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HarmonicLossBreakdown {
    pub p_cu: f64,
    pub p_iron: f64,
    pub p_mag: f64,
    /// Always `p_cu + p_iron + p_mag`
    pub p_mot_h: f64,
}

impl HarmonicLossBreakdown {
    pub fn new(p_cu: f64, p_iron: f64, p_mag: f64) -> Self {
        Self { p_cu, p_iron, p_mag, p_mot_h: p_cu + p_iron + p_mag }
    }
}

/// Sums copper, iron and magnet ripple losses over the spectrum bins.
pub fn harmonic_losses(spectrum: &HarmonicSpectrum, params: &HarmonicMotorParameters) -> Result<HarmonicLossBreakdown> {
    let bins = spectrum.bins();
    let (Some(first), Some(last)) = (bins.first(), bins.last()) else {
        return Ok(HarmonicLossBreakdown::default());
    };
    let (lo, hi) = params.curves_range();
    let tol = 1e-9 * last.f;
    for f in [first.f, last.f] {
        if f < lo - tol || f > hi + tol {
            return Err(Error::FrequencyOutOfGrid { frequency: f, min: lo, max: hi });
        }
    }
    let c = &params.curves;
    let (mut ld, mut lq, mut r_cu, mut r_iron, mut r_mag) =
        (Cursor::new(&c.ld), Cursor::new(&c.lq), Cursor::new(&c.r_cu), Cursor::new(&c.r_iron), Cursor::new(&c.r_mag));
    let (mut cu, mut iron, mut mag) = (0.0, 0.0, 0.0);
    for bin in bins {
        let f = bin.f;
        let (ud2, uq2) = (bin.u_d * bin.u_d, bin.u_q * bin.u_q);
        let (l_d, l_q) = (ld.at(f), lq.at(f));
        cu += r_cu.at(f) / (f * f) * (ud2 / (l_d * l_d) + uq2 / (l_q * l_q));
        iron += (ud2 + uq2) / r_iron.at(f);
        mag += ud2 / r_mag.at(f);
    }
    Ok(HarmonicLossBreakdown::new(params.k_cu * cu, params.k_iron * iron, params.k_mag * mag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pwm::HarmonicBin;

    fn flat(value: f64) -> Curve {
        Curve(vec![(1.0e3, value), (1.0e6, value)])
    }

    fn unit_params() -> HarmonicMotorParameters {
        HarmonicMotorParameters {
            curves: HarmonicCurves {
                ld: flat(1e-4),
                lq: flat(1e-4),
                r_cu: flat(1.0),
                r_iron: flat(5.0),
                r_mag: flat(4.0),
            },
            k_cu: 1.0,
            k_iron: 1.0,
            k_mag: 1.0,
            f_min_half_fsw: true,
            f_max: 1e6,
        }
    }

    fn spectrum(bins: &[(f64, f64, f64)]) -> HarmonicSpectrum {
        HarmonicSpectrum::from_bins(bins.iter().map(|&(f, u_d, u_q)| HarmonicBin { f, u_d, u_q }).collect()).unwrap()
    }

    #[test]
    fn empty_spectrum_is_lossless() {
        let out = harmonic_losses(&HarmonicSpectrum::default(), &unit_params()).unwrap();
        assert_eq!(out, HarmonicLossBreakdown::default());
    }

    #[test]
    fn copper_term_hand_value() {
        let mut p = unit_params();
        p.k_iron = 0.0;
        p.k_mag = 0.0;
        let out = harmonic_losses(&spectrum(&[(1.0e4, 1.0, 0.0)]), &p).unwrap();
        assert!((out.p_cu - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iron_and_magnet_terms_hand_values() {
        let mut p = unit_params();
        p.k_cu = 0.0;
        let out = harmonic_losses(&spectrum(&[(2.0e4, 3.0, 4.0)]), &p).unwrap();
        assert!((out.p_iron - 5.0).abs() < 1e-12);
        let out = harmonic_losses(&spectrum(&[(2.0e4, 2.0, 0.0)]), &p).unwrap();
        assert!((out.p_mag - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_grid_frequency_is_rejected() {
        let err = harmonic_losses(&spectrum(&[(500.0, 1.0, 1.0)]), &unit_params()).unwrap_err();
        assert!(matches!(err, Error::FrequencyOutOfGrid { .. }));
        assert!(unit_params().curves.r_cu.at(2.0e6).is_err());
    }

    #[test]
    fn interpolation_is_linear_in_log_frequency() {
        let curve = Curve(vec![(1.0e3, 1.0), (1.0e5, 3.0)]);
        assert!((curve.at(1.0e4).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(curve.at(1.0e3).unwrap(), 1.0);
        assert_eq!(curve.at(1.0e5).unwrap(), 3.0);
    }

    #[test]
    fn default_curves_are_valid_and_span_the_window() {
        let p = HarmonicMotorParameters::default();
        p.validate().unwrap();
        assert_eq!(p.curves_range(), (1.0e3, 1.0e6));
        let r10 = p.curves.r_iron.at(1.0e4).unwrap();
        let r40 = p.curves.r_iron.at(4.0e4).unwrap();
        assert!((r40 / r10 - 2.0).abs() < 0.01);
    }

    #[test]
    fn scaling_multiplies_impedance_curves() {
        let p = HarmonicMotorParameters::default();
        let s = p.scaled(1.75);
        let f = 12_345.0;
        for (a, b) in [(&p.curves.ld, &s.curves.ld), (&p.curves.r_iron, &s.curves.r_iron)] {
            assert!((b.at(f).unwrap() / a.at(f).unwrap() - 1.75 * 1.75).abs() < 1e-12);
        }
    }
}
