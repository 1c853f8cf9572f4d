//! Analytic dq model of a permanent-magnet synchronous machine.
//!
//! Steady-state voltage equations with constant inductances. The current
//! setpoint follows maximum torque per ampere below base speed and the
//! minimum-current field-weakening solution above it.

pub mod harmonic;

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vehicle::OperatingPoint;

pub use harmonic::{harmonic_losses, HarmonicCurves, HarmonicLossBreakdown, HarmonicMotorParameters};

/// Electrical and mechanical ratings of a PMSM.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotorModel {
    pub pole_pairs: u32,
    /// Phase resistance (Ω)
    pub stator_resistance: f64,
    /// d-axis inductance (H)
    pub ld: f64,
    /// q-axis inductance (H)
    pub lq: f64,
    /// Permanent-magnet flux linkage amplitude (Wb)
    pub psi_pm: f64,
    /// Phase current amplitude limit (A)
    pub i_max: f64,
    /// Mechanical power limit (W)
    pub p_max: f64,
    /// Torque limit (Nm)
    pub m_max: f64,
    /// Speed limit (rpm)
    pub n_max: f64,
    /// Winding turn ratio relative to the reference machine
    pub turn_ratio: f64,
    /// Hysteresis iron-loss coefficient (W / (Wb² · Hz)), applied to the
    /// stator flux-linkage magnitude as flux-density proxy
    pub c_hys: f64,
    /// Eddy-current iron-loss coefficient (W / (Wb² · Hz²))
    pub c_eddy: f64,
}

impl Default for MotorModel {
    /// 300 kW, 48-slot / 8-pole reference machine.
    fn default() -> Self {
        Self {
            pole_pairs: 4,
            stator_resistance: 8.0e-3,
            ld: 0.12e-3,
            lq: 0.30e-3,
            psi_pm: 0.08,
            i_max: 1000.0,
            p_max: 300.0e3,
            m_max: 589.0,
            n_max: 16000.0,
            turn_ratio: 1.0,
            c_hys: 90.0,
            c_eddy: 0.3,
        }
    }
}

impl MotorModel {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("stator_resistance", self.stator_resistance),
            ("ld", self.ld),
            ("lq", self.lq),
            ("psi_pm", self.psi_pm),
            ("i_max", self.i_max),
            ("p_max", self.p_max),
            ("m_max", self.m_max),
            ("n_max", self.n_max),
            ("turn_ratio", self.turn_ratio),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {value}")));
            }
        }
        if self.pole_pairs == 0 {
            return Err(Error::invalid("pole_pairs", "must be at least 1"));
        }
        for (name, value) in [("c_hys", self.c_hys), ("c_eddy", self.c_eddy)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::invalid(name, format!("must be non-negative, got {value}")));
            }
        }
        Ok(())
    }

    /// Electrical frequency (Hz) at mechanical speed `n` (rpm).
    pub fn electrical_frequency(&self, n: f64) -> f64 {
        self.pole_pairs as f64 * n / 60.0
    }

    /// Speed where the torque limit meets the power limit (rpm).
    pub fn corner_speed(&self) -> f64 {
        self.p_max / self.m_max * 60.0 / (2.0 * PI)
    }

    /// Largest torque magnitude the ratings allow at speed `n` (rpm).
    pub fn max_torque(&self, n: f64) -> f64 {
        let omega = n.abs() * 2.0 * PI / 60.0;
        if omega <= 0.0 {
            self.m_max
        } else {
            self.m_max.min(self.p_max / omega)
        }
    }

    pub fn torque(&self, i_d: f64, i_q: f64) -> f64 {
        1.5 * self.pole_pairs as f64 * (self.psi_pm * i_q + (self.ld - self.lq) * i_d * i_q)
    }

    fn voltage(&self, omega_e: f64, i_d: f64, i_q: f64) -> (f64, f64) {
        let u_d = self.stator_resistance * i_d - omega_e * self.lq * i_q;
        let u_q = self.stator_resistance * i_q + omega_e * (self.ld * i_d + self.psi_pm);
        (u_d, u_q)
    }

    /// i_q that produces torque `m` at the given i_d, if the flux term stays positive.
    fn iq_for(&self, m: f64, i_d: f64) -> Option<f64> {
        let flux = self.psi_pm + (self.ld - self.lq) * i_d;
        if flux <= 1e-9 * self.psi_pm {
            return None;
        }
        Some(m / (1.5 * self.pole_pairs as f64 * flux))
    }

    /// Lower bound of the i_d search interval.
    fn id_floor(&self) -> f64 {
        let mut floor = -self.i_max;
        if self.ld > self.lq {
            // keep ψ + (L_d - L_q)·i_d > 0
            floor = floor.max(-0.999 * self.psi_pm / (self.ld - self.lq));
        }
        floor
    }

    /// i_d that minimises current magnitude at torque `m`.
    fn mtpa_id(&self, m: f64) -> f64 {
        if m == 0.0 || (self.ld - self.lq).abs() <= 1e-15 * self.lq {
            return 0.0;
        }
        let cost = |i_d: f64| match self.iq_for(m, i_d) {
            Some(i_q) => i_d * i_d + i_q * i_q,
            None => f64::INFINITY,
        };
        // golden-section search over i_d ≤ 0
        let (mut a, mut b) = (self.id_floor(), 0.0_f64);
        let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let (mut fc, mut fd) = (cost(c), cost(d));
        for _ in 0..200 {
            if (b - a).abs() <= 1e-12 * self.i_max {
                break;
            }
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = cost(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = cost(d);
            }
        }
        let mid = 0.5 * (a + b);
        if cost(0.0) <= cost(mid) {
            0.0
        } else {
            mid
        }
    }
}

/// Why an operating point cannot be reached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Infeasibility {
    CurrentLimit { required: f64, limit: f64 },
    VoltageLimit { best: f64, limit: f64 },
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Infeasibility::CurrentLimit { required, limit } => {
                write!(f, "current {required:.1} A exceeds limit {limit:.1} A")
            }
            Infeasibility::VoltageLimit { best, limit } => {
                write!(f, "voltage {best:.1} V exceeds limit {limit:.1} V")
            }
        }
    }
}

/// Electrical steady state of one operating point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPointSolution {
    /// d-axis voltage amplitude (V)
    pub u_d: f64,
    /// q-axis voltage amplitude (V)
    pub u_q: f64,
    /// d-axis current amplitude (A)
    pub i_d: f64,
    /// q-axis current amplitude (A)
    pub i_q: f64,
    /// Fundamental electrical frequency (Hz), zero at standstill
    pub f_f: f64,
    pub cos_phi: f64,
    /// Voltage magnitude relative to the active voltage limit
    pub m_hat: f64,
    /// Phase rms current (A)
    pub i_rms: f64,
    /// Voltage limit the solution was computed for (V)
    pub voltage_limit: f64,
}

impl OperatingPointSolution {
    pub fn voltage_magnitude(&self) -> f64 {
        self.u_d.hypot(self.u_q)
    }

    pub fn current_magnitude(&self) -> f64 {
        self.i_d.hypot(self.i_q)
    }

    /// Electrical input power (W), negative when generating.
    pub fn electrical_power(&self) -> f64 {
        1.5 * (self.u_d * self.i_d + self.u_q * self.i_q)
    }
}

/// Solves the dq steady state for `point` under a voltage-magnitude limit.
pub fn solve_operating_point(
    motor: &MotorModel,
    point: &OperatingPoint,
    voltage_limit: f64,
) -> std::result::Result<OperatingPointSolution, Infeasibility> {
    let m = point.torque;
    let omega_e = 2.0 * PI * motor.electrical_frequency(point.speed);

    let build = |i_d: f64, i_q: f64| {
        let (u_d, u_q) = motor.voltage(omega_e, i_d, i_q);
        let u = u_d.hypot(u_q);
        let i = i_d.hypot(i_q);
        let power = 1.5 * (u_d * i_d + u_q * i_q);
        let cos_phi = if u > 0.0 && i > 0.0 { power / (1.5 * u * i) } else { 1.0 };
        OperatingPointSolution {
            u_d,
            u_q,
            i_d,
            i_q,
            f_f: motor.electrical_frequency(point.speed),
            cos_phi,
            m_hat: u / voltage_limit,
            i_rms: i / 2.0_f64.sqrt(),
            voltage_limit,
        }
    };

    let i_d0 = motor.mtpa_id(m);
    let i_q0 = motor
        .iq_for(m, i_d0)
        .ok_or(Infeasibility::CurrentLimit { required: f64::INFINITY, limit: motor.i_max })?;
    let mtpa_current = i_d0.hypot(i_q0);
    if mtpa_current > motor.i_max * (1.0 + 1e-12) {
        return Err(Infeasibility::CurrentLimit { required: mtpa_current, limit: motor.i_max });
    }
    let mag = |i_d: f64| -> Option<f64> {
        let i_q = motor.iq_for(m, i_d)?;
        let (u_d, u_q) = motor.voltage(omega_e, i_d, i_q);
        Some(u_d.hypot(u_q))
    };
    let u0 = mag(i_d0).unwrap_or(f64::INFINITY);
    if u0 <= voltage_limit {
        return Ok(build(i_d0, i_q0));
    }

    // Field weakening: walk i_d downward and take the first crossing of the
    // voltage limit, which is the admissible solution closest to MTPA.
    let floor = motor.id_floor();
    const STEPS: usize = 400;
    let step = (i_d0 - floor) / STEPS as f64;
    let excess = |i_d: f64| mag(i_d).map(|u| u - voltage_limit).unwrap_or(f64::INFINITY);
    let mut prev = i_d0;
    let mut best = u0;
    let mut bracket = None;
    for k in 1..=STEPS {
        let i_d = i_d0 - step * k as f64;
        let e = excess(i_d);
        best = best.min(e + voltage_limit);
        if e <= 0.0 {
            bracket = Some((prev, i_d));
            break;
        }
        prev = i_d;
    }
    let Some((mut hi, mut lo)) = bracket else {
        return Err(Infeasibility::VoltageLimit { best, limit: voltage_limit });
    };
    // invariant: excess(hi) > 0, excess(lo) <= 0
    for _ in 0..200 {
        let mid = 0.5 * (hi + lo);
        if mid == hi || mid == lo {
            break;
        }
        if excess(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // Newton polish on the voltage equality, kept inside the bracket.
    let mut i_d = lo;
    for _ in 0..4 {
        let e = excess(i_d);
        if e.abs() <= 1e-12 * voltage_limit {
            break;
        }
        let h = 1e-7 * motor.i_max;
        let slope = (excess(i_d + h) - excess(i_d - h)) / (2.0 * h);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let next = i_d - e / slope;
        if next <= lo.min(hi) || next >= lo.max(hi) || excess(next) > 0.0 {
            break;
        }
        i_d = next;
    }
    let i_q = motor
        .iq_for(m, i_d)
        .ok_or(Infeasibility::VoltageLimit { best, limit: voltage_limit })?;
    let current = i_d.hypot(i_q);
    if current > motor.i_max * (1.0 + 1e-12) {
        return Err(Infeasibility::CurrentLimit { required: current, limit: motor.i_max });
    }
    Ok(build(i_d, i_q))
}

/// Fundamental copper and iron losses (W).
pub fn fundamental_losses(motor: &MotorModel, sol: &OperatingPointSolution) -> f64 {
    let copper = 1.5 * motor.stator_resistance * (sol.i_d * sol.i_d + sol.i_q * sol.i_q);
    let psi_d = motor.ld * sol.i_d + motor.psi_pm;
    let psi_q = motor.lq * sol.i_q;
    let psi2 = psi_d * psi_d + psi_q * psi_q;
    let f = sol.f_f;
    copper + motor.c_hys * psi2 * f + motor.c_eddy * psi2 * f * f
}

/// Rewinds the machine with `kappa` times the turns per phase.
pub fn scale_motor(motor: &MotorModel, kappa: f64) -> Result<MotorModel> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::invalid("kappa", format!("must be positive, got {kappa}")));
    }
    let k2 = kappa * kappa;
    Ok(MotorModel {
        stator_resistance: motor.stator_resistance * k2,
        ld: motor.ld * k2,
        lq: motor.lq * k2,
        psi_pm: motor.psi_pm * kappa,
        i_max: motor.i_max / kappa,
        turn_ratio: motor.turn_ratio * kappa,
        // flux linkage grows by κ, iron volume does not
        c_hys: motor.c_hys / k2,
        c_eddy: motor.c_eddy / k2,
        ..motor.clone()
    })
}
