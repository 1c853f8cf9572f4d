//! Longitudinal vehicle model and drive-cycle handling.

use std::f64::consts::PI;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motor::MotorModel;

/// Parameters of the longitudinal force balance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParameters {
    /// Frontal area (m²)
    pub frontal_area: f64,
    pub drag_coefficient: f64,
    /// Air density (kg/m³)
    pub air_density: f64,
    pub rolling_coefficient: f64,
    /// Gravitational acceleration (m/s²)
    pub gravity: f64,
    /// Wheel radius (m)
    pub wheel_radius: f64,
    /// Vehicle mass (kg)
    pub mass: f64,
    pub gear_ratio: f64,
    pub gear_efficiency: f64,
    /// Axle inertia (kg·m²)
    pub axle_inertia: f64,
    /// Inertia of one machine rotor (kg·m²)
    pub machine_inertia: f64,
    pub machine_count: u32,
}

impl Default for VehicleParameters {
    fn default() -> Self {
        Self {
            frontal_area: 2.22,
            drag_coefficient: 0.25,
            air_density: 1.25,
            rolling_coefficient: 0.01,
            gravity: 9.81,
            wheel_radius: 0.345,
            mass: 1927.0,
            gear_ratio: 12.4,
            gear_efficiency: 1.0,
            axle_inertia: 0.0,
            machine_inertia: 0.0,
            machine_count: 1,
        }
    }
}

impl VehicleParameters {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("frontal_area", self.frontal_area),
            ("air_density", self.air_density),
            ("wheel_radius", self.wheel_radius),
            ("mass", self.mass),
            ("gear_ratio", self.gear_ratio),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("drag_coefficient", self.drag_coefficient),
            ("rolling_coefficient", self.rolling_coefficient),
            ("gravity", self.gravity),
            ("axle_inertia", self.axle_inertia),
            ("machine_inertia", self.machine_inertia),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("must be non-negative, got {v}")));
            }
        }
        if !(self.gear_efficiency > 0.0 && self.gear_efficiency <= 1.0) {
            return Err(Error::invalid("gear_efficiency", "must lie in (0, 1]"));
        }
        if self.machine_count < 1 {
            return Err(Error::invalid("machine_count", "must be at least 1"));
        }
        Ok(())
    }

    /// Translational mass including rotating inertias reflected to the wheel.
    pub fn effective_mass(&self) -> f64 {
        let rw2 = self.wheel_radius * self.wheel_radius;
        let g2 = self.gear_ratio * self.gear_ratio;
        self.mass + self.axle_inertia / rw2 + self.machine_count as f64 * self.machine_inertia * g2 / rw2
    }

    /// Tractive force at the wheels (N).
    pub fn tractive_force(&self, v: f64, a: f64) -> f64 {
        let resistive = if v == 0.0 {
            0.0
        } else {
            0.5 * self.air_density * self.drag_coefficient * self.frontal_area * v * v
                + self.mass * self.gravity * self.rolling_coefficient * v.signum()
        };
        resistive + self.effective_mass() * a
    }

    /// Per-machine torque (Nm) for a wheel force; gear losses raise motoring
    /// torque and lower regenerative torque.
    pub fn machine_torque(&self, force: f64) -> f64 {
        let per_machine = force * self.wheel_radius / (self.gear_ratio * self.machine_count as f64);
        if force >= 0.0 {
            per_machine / self.gear_efficiency
        } else {
            per_machine * self.gear_efficiency
        }
    }

    /// Machine speed (rpm) at vehicle speed `v` (m/s).
    pub fn machine_speed(&self, v: f64) -> f64 {
        v * self.gear_ratio / self.wheel_radius * 60.0 / (2.0 * PI)
    }
}

/// Velocity profile sampled over time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveCycle {
    pub name: String,
    /// (time [s], velocity [m/s])
    pub samples: Vec<(f64, f64)>,
    /// Distance stated by the source file, if any (m)
    pub documented_distance: Option<f64>,
}

impl DriveCycle {
    pub fn new(name: impl Into<String>, samples: Vec<(f64, f64)>) -> Result<Self> {
        let cycle = Self { name: name.into(), samples, documented_distance: None };
        cycle.validate()?;
        Ok(cycle)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(&(t0, _)) = self.samples.first() else {
            return Err(Error::Cycle("no samples".into()));
        };
        for (k, &(t, v)) in self.samples.iter().enumerate() {
            if !(t.is_finite() && v.is_finite()) {
                return Err(Error::CycleRow { row: k + 1, reason: "non-finite value".into() });
            }
            if v < 0.0 {
                return Err(Error::CycleRow { row: k + 1, reason: format!("negative velocity {v}") });
            }
            if k > 0 && t <= self.samples[k - 1].0 {
                return Err(Error::CycleRow { row: k + 1, reason: format!("time {t} not increasing") });
            }
        }
        if t0 != 0.0 {
            return Err(Error::CycleRow { row: 1, reason: format!("first sample must be at t = 0, got {t0}") });
        }
        Ok(())
    }

    /// Cycle duration (s).
    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.0)
    }

    /// Distance by trapezoidal integration (m).
    pub fn distance(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum()
    }

    /// Trapezoid duration weights; they sum to the cycle duration.
    pub fn weights(&self) -> Vec<f64> {
        let s = &self.samples;
        let n = s.len();
        if n == 1 {
            return vec![0.0];
        }
        (0..n)
            .map(|i| {
                let left = if i > 0 { s[i].0 - s[i - 1].0 } else { 0.0 };
                let right = if i + 1 < n { s[i + 1].0 - s[i].0 } else { 0.0 };
                0.5 * (left + right)
            })
            .collect()
    }

    /// Acceleration by central differences, one-sided at the ends.
    pub fn accelerations(&self) -> Vec<f64> {
        let s = &self.samples;
        let n = s.len();
        if n < 2 {
            return vec![0.0; n];
        }
        (0..n)
            .map(|i| {
                let (a, b) = match i {
                    0 => (0, 1),
                    i if i == n - 1 => (n - 2, n - 1),
                    i => (i - 1, i + 1),
                };
                (s[b].1 - s[a].1) / (s[b].0 - s[a].0)
            })
            .collect()
    }
}

/// Velocity unit declared in a cycle file header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SpeedUnit {
    MetersPerSecond,
    KilometersPerHour,
}

/// Parses cycle text: `# key=value` header lines, an optional column header,
/// then `t,v` rows.
pub fn parse_cycle(name: &str, text: &str) -> Result<DriveCycle> {
    let mut unit = SpeedUnit::MetersPerSecond;
    let mut documented_distance = None;
    let mut samples = Vec::new();
    let mut seen_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let row = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(value) = comment.strip_prefix("unit=") {
                unit = match value.trim() {
                    "ms" | "m/s" => SpeedUnit::MetersPerSecond,
                    "kmh" | "km/h" => SpeedUnit::KilometersPerHour,
                    other => return Err(Error::CycleRow { row, reason: format!("unknown unit `{other}`") }),
                };
            } else if let Some(value) = comment.strip_prefix("distance_m=") {
                documented_distance = Some(
                    value
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| Error::CycleRow { row, reason: format!("bad distance: {e}") })?,
                );
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<(f64, f64)> = match fields.as_slice() {
            [t, v] => t.parse().ok().zip(v.parse().ok()),
            _ => None,
        };
        match parsed {
            Some((t, v)) => {
                let v = match unit {
                    SpeedUnit::MetersPerSecond => v,
                    SpeedUnit::KilometersPerHour => v / 3.6,
                };
                samples.push((t, v));
            }
            None if samples.is_empty() && !seen_header && fields.len() == 2 && fields.iter().all(|f| f.parse::<f64>().is_err()) => {
                seen_header = true;
            }
            None => return Err(Error::CycleRow { row, reason: format!("malformed row `{line}`") }),
        }
    }
    // re-map validation errors from sample index to file row
    let cycle = DriveCycle { name: name.to_string(), samples, documented_distance };
    match cycle.validate() {
        Ok(()) => Ok(cycle),
        Err(Error::CycleRow { row: sample, reason }) => {
            Err(Error::CycleRow { row: data_row(text, sample), reason })
        }
        Err(e) => Err(e),
    }
}

/// File row number of the `sample`-th data row (1-based).
fn data_row(text: &str, sample: usize) -> usize {
    let mut count = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',');
        if parts.next().is_some_and(|t| t.trim().parse::<f64>().is_ok()) {
            count += 1;
            if count == sample {
                return idx + 1;
            }
        }
    }
    sample
}

/// Names of the cycles shipped with the library.
pub const BUILTIN_CYCLES: &[&str] = &["wltc_class3b"];

/// A cycle shipped with the library.
pub fn builtin_cycle(name: &str) -> Result<DriveCycle> {
    match name {
        "wltc_class3b" => parse_cycle(name, include_str!("../data/wltc_class3b.csv")),
        other => Err(Error::Cycle(format!("unknown built-in cycle `{other}`; available: {}", BUILTIN_CYCLES.join(", ")))),
    }
}

pub fn load_cycle(path: &Path) -> Result<DriveCycle> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("cycle");
    parse_cycle(name, &text)
}

/// Torque-speed operating point of one machine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Speed (rpm), non-negative
    pub speed: f64,
    /// Torque (Nm), negative when generating
    pub torque: f64,
    /// Duration weight (s); 1 for envelope points
    pub weight: f64,
}

impl OperatingPoint {
    pub fn new(speed: f64, torque: f64, weight: f64) -> Self {
        Self { speed, torque, weight }
    }
}

/// Converts each cycle sample into a machine operating point.
pub fn cycle_to_operating_points(cycle: &DriveCycle, veh: &VehicleParameters) -> Vec<OperatingPoint> {
    let acc = cycle.accelerations();
    let weights = cycle.weights();
    cycle
        .samples
        .iter()
        .zip(acc)
        .zip(weights)
        .map(|((&(_, v), a), w)| {
            let force = veh.tractive_force(v, a);
            OperatingPoint::new(veh.machine_speed(v), veh.machine_torque(force), w)
        })
        .collect()
}

/// Clamps points to the machine's torque-speed envelope, logging each change.
pub fn clamp_to_envelope(points: &mut [OperatingPoint], motor: &MotorModel) -> usize {
    let mut clamped = 0;
    for (k, p) in points.iter_mut().enumerate() {
        let n = p.speed.clamp(0.0, motor.n_max);
        let limit = motor.max_torque(n);
        let m = p.torque.clamp(-limit, limit);
        if n != p.speed || m != p.torque {
            warn!(
                "point {k} ({:.1} rpm, {:.1} Nm) outside machine envelope, clamped to ({n:.1} rpm, {m:.1} Nm)",
                p.speed, p.torque
            );
            p.speed = n;
            p.torque = m;
            clamped += 1;
        }
    }
    clamped
}

/// Boundary of the torque-speed map: `count` speeds from standstill to
/// `n_max`, motoring branch first, then generating.
pub fn full_load_envelope(motor: &MotorModel, count: usize) -> Vec<OperatingPoint> {
    let count = count.max(2);
    let n_max = motor.n_max;
    let mut speeds: Vec<f64> = (0..count).map(|k| n_max * k as f64 / (count - 1) as f64).collect();
    let corner = motor.corner_speed();
    if count >= 3 && corner > 0.0 && corner < n_max {
        let nearest = (1..count - 1)
            .min_by(|&a, &b| (speeds[a] - corner).abs().total_cmp(&(speeds[b] - corner).abs()))
            .expect("interior grid point");
        speeds[nearest] = corner;
    }
    let mut points = Vec::with_capacity(2 * count);
    for sign in [1.0, -1.0] {
        points.extend(speeds.iter().map(|&n| OperatingPoint::new(n, sign * motor.max_torque(n), 1.0)));
    }
    points
}
