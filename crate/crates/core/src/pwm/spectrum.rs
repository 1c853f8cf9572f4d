//! dq-frame ripple spectrum of the inverter output voltage.
//!
//! The αβ space vector of one fundamental period is sampled, transformed with
//! a single FFT and shifted by one harmonic order into the rotor frame, so a
//! dq component at m·f_f comes from the αβ orders m+1 and 1-m.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Amplitudes below this are treated as numerical noise (V).
pub const AMPLITUDE_FLOOR: f64 = 1e-9;

/// Phase voltages over one fundamental period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum VoltageWaveform {
    /// Constant `values[k]` on [breaks[k], breaks[k+1]); spectrum taken from
    /// `sample_count` bin averages.
    Piecewise { period: f64, breaks: Vec<f64>, values: Vec<[f64; 3]>, sample_count: usize },
    /// Point samples at t = n·period/len.
    Sampled { period: f64, samples: Vec<[f64; 3]> },
}

/// One dq harmonic: single-sided amplitudes (V) at frequency `f` (Hz).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicBin {
    pub f: f64,
    pub u_d: f64,
    pub u_q: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSpectrum {
    bins: Vec<HarmonicBin>,
}

impl HarmonicSpectrum {
    pub fn from_bins(bins: Vec<HarmonicBin>) -> Result<Self> {
        for (k, b) in bins.iter().enumerate() {
            if !(b.f.is_finite() && b.f > 0.0 && b.u_d.is_finite() && b.u_d >= 0.0 && b.u_q.is_finite() && b.u_q >= 0.0) {
                return Err(Error::invalid("spectrum", format!("bin {k} must have positive frequency and non-negative amplitudes")));
            }
            if k > 0 && b.f <= bins[k - 1].f {
                return Err(Error::invalid("spectrum", format!("bin frequencies must increase at bin {k}")));
            }
        }
        Ok(Self { bins })
    }

    pub fn bins(&self) -> &[HarmonicBin] {
        &self.bins
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Mean-square ripple carried by the bins, Σ (U_d² + U_q²)/2 (V²).
    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|b| 0.5 * (b.u_d * b.u_d + b.u_q * b.u_q)).sum()
    }
}

fn clarke(v: [f64; 3]) -> Complex64 {
    Complex64::new((2.0 / 3.0) * (v[0] - 0.5 * (v[1] + v[2])), (v[1] - v[2]) / 3.0_f64.sqrt())
}

impl VoltageWaveform {
    pub fn period(&self) -> f64 {
        match self {
            VoltageWaveform::Piecewise { period, .. } | VoltageWaveform::Sampled { period, .. } => *period,
        }
    }

    fn samples(&self) -> Vec<Complex64> {
        match self {
            VoltageWaveform::Sampled { samples, .. } => samples.iter().map(|&v| clarke(v)).collect(),
            VoltageWaveform::Piecewise { period, breaks, values, sample_count } => {
                let n = *sample_count;
                let dt = period / n as f64;
                let mut acc = vec![Complex64::new(0.0, 0.0); n];
                for (w, &v) in breaks.windows(2).zip(values) {
                    let z = clarke(v);
                    let (x0, x1) = (w[0] / dt, (w[1] / dt).min(n as f64));
                    let mut x = x0;
                    let mut b = x0.floor() as usize;
                    while x < x1 && b < n {
                        let edge = ((b + 1) as f64).min(x1);
                        acc[b] += z * (edge - x);
                        x = edge;
                        b += 1;
                    }
                }
                acc
            }
        }
    }

    /// Exact mean-square dq ripple (V²): mean |v_αβ|² minus the fundamental.
    pub fn ripple_energy(&self) -> f64 {
        let t = self.period();
        let w = 2.0 * PI / t;
        match self {
            VoltageWaveform::Piecewise { breaks, values, .. } => {
                let (mut p, mut c1) = (0.0, Complex64::new(0.0, 0.0));
                for (b, &v) in breaks.windows(2).zip(values) {
                    let z = clarke(v);
                    p += z.norm_sqr() * (b[1] - b[0]);
                    let e = |t: f64| Complex64::from_polar(1.0, -w * t);
                    c1 += z * (e(b[1]) - e(b[0])) / Complex64::new(0.0, -w);
                }
                p / t - (c1 / t).norm_sqr()
            }
            VoltageWaveform::Sampled { samples, .. } => {
                let n = samples.len() as f64;
                let z: Vec<Complex64> = samples.iter().map(|&v| clarke(v)).collect();
                let p = z.iter().map(|x| x.norm_sqr()).sum::<f64>() / n;
                let c1: Complex64 = z
                    .iter()
                    .enumerate()
                    .map(|(k, x)| x * Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n))
                    .sum::<Complex64>()
                    / n;
                p - c1.norm_sqr()
            }
        }
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn forward(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

/// dq ripple spectrum restricted to the frequency window [f_min, f_max].
///
/// DC and the fundamental never appear; bins whose d and q amplitudes are both
/// below [`AMPLITUDE_FLOOR`] are dropped.
pub fn dq_ripple_spectrum(waveform: &VoltageWaveform, f_min: f64, f_max: f64) -> Result<HarmonicSpectrum> {
    if !(f_min > 0.0 && f_max >= f_min) {
        return Err(Error::EmptyWindow { min: f_min, max: f_max });
    }
    let mut z = waveform.samples();
    let n = z.len();
    if n < 4 {
        return Err(Error::invalid("waveform", "needs at least four samples"));
    }
    forward(n).process(&mut z);

    let nf = n as f64;
    let averaged = matches!(waveform, VoltageWaveform::Piecewise { .. });
    let coeff = |k: i64| -> Complex64 {
        let raw = z[k.rem_euclid(n as i64) as usize] / nf;
        if averaged && k != 0 {
            let x = PI * k as f64 / nf;
            raw / (Complex64::from_polar(1.0, x) * (x.sin() / x))
        } else {
            raw
        }
    };

    let f_f = 1.0 / waveform.period();
    let m_lo = ((f_min / f_f) - 1e-9).ceil().max(1.0) as i64;
    let nyquist = (n as i64 - 1) / 2 - 1;
    let m_hi_window = ((f_max / f_f) + 1e-9).floor() as i64;
    let m_hi = m_hi_window.min(nyquist);
    if m_hi < m_hi_window {
        log::debug!("spectrum truncated at order {m_hi} of {m_hi_window} by the sample rate");
    }

    let mut bins = Vec::new();
    for m in m_lo..=m_hi {
        let (cp, cm) = (coeff(m + 1), coeff(1 - m).conj());
        let (u_d, u_q) = ((cp + cm).norm(), (cp - cm).norm());
        if u_d > AMPLITUDE_FLOOR || u_q > AMPLITUDE_FLOOR {
            bins.push(HarmonicBin { f: m as f64 * f_f, u_d, u_q });
        }
    }
    HarmonicSpectrum::from_bins(bins)
}
