//! One fundamental period of switch states, conduction and commutations.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::device::{SwitchChannel, SwitchEvent};
use crate::error::{Error, Result};
use crate::motor::OperatingPointSolution;

use super::modulator::{min_max, three_level_leg, three_level_references, two_level_leg, LegPattern};
use super::ripple::{CapacitorCurrent, CapacitorSegment};
use super::spectrum::VoltageWaveform;
use super::{Mode, ModulationConfig, Topology, Variant, PHASES};

pub const MAX_LEGS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LegKind {
    TwoLevel,
    ThreeLevel,
}

/// A bridge leg and the channels its levels map to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub kind: LegKind,
    /// Motor phase (0..3) whose current flows out of this leg
    pub phase: usize,
    /// +1 for the left bridge, -1 for the right bridge of the open winding
    pub sign: f64,
    /// Channel conducting at level +1
    pub upper: usize,
    /// Channel conducting at level -1
    pub lower: usize,
    /// Mid-path channels (forward for positive / negative current), three-level only
    pub mid: Option<(usize, usize)>,
}

/// Interval of constant leg levels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub levels: [i8; MAX_LEGS],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchingTrace {
    pub config: ModulationConfig,
    /// Fundamental frequency used for the period (Hz), never below the configured minimum
    pub fundamental: f64,
    pub period: f64,
    pub carriers: usize,
    /// Phase-current amplitude (A) and angle at t = 0 (rad)
    pub current_amplitude: f64,
    pub current_angle: f64,
    pub voltage_amplitude: f64,
    pub voltage_angle: f64,
    pub legs: Vec<Leg>,
    pub segments: Vec<Segment>,
    pub channels: Vec<SwitchChannel>,
    pub waveform: VoltageWaveform,
    pub capacitor: CapacitorCurrent,
}

impl SwitchingTrace {
    pub fn channel(&self, id: &str) -> Option<&SwitchChannel> {
        self.channels.iter().find(|c| c.id == id)
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.fundamental
    }

    /// Phase current i_x(t).
    pub fn phase_current(&self, phase: usize, t: f64) -> f64 {
        self.current_amplitude * (self.omega() * t + self.current_angle - phase_shift(phase)).cos()
    }

    /// Reference phase voltage u_x(t).
    pub fn phase_reference(&self, phase: usize, t: f64) -> f64 {
        self.voltage_amplitude * (self.omega() * t + self.voltage_angle - phase_shift(phase)).cos()
    }

    pub fn carrier_period(&self) -> f64 {
        self.period / self.carriers as f64
    }

    pub fn dc_link_ripple(&self, c_dc: f64) -> f64 {
        super::ripple::dc_link_ripple(&self.capacitor, c_dc)
    }

    /// Segment table as CSV: interval, leg levels and phase voltages.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.legs.len();
        write!(out, "t0,t1")?;
        for k in 0..n {
            write!(out, ",leg{k}")?;
        }
        writeln!(out, ",v_a,v_b,v_c")?;
        let values = match &self.waveform {
            VoltageWaveform::Piecewise { values, .. } => values.as_slice(),
            VoltageWaveform::Sampled { .. } => &[],
        };
        for (s, v) in self.segments.iter().zip(values) {
            write!(out, "{:.9e},{:.9e}", s.t0, s.t1)?;
            for l in &s.levels[..n] {
                write!(out, ",{l}")?;
            }
            writeln!(out, ",{:.6},{:.6},{:.6}", v[0], v[1], v[2])?;
        }
        Ok(())
    }
}

fn phase_shift(phase: usize) -> f64 {
    2.0 * PI * phase as f64 / 3.0
}

fn build_legs(cfg: &ModulationConfig) -> (Vec<SwitchChannel>, Vec<Leg>, Vec<(usize, usize)>) {
    let channels: Vec<SwitchChannel> =
        cfg.topology.switches().into_iter().map(|(id, class)| SwitchChannel::new(id, class)).collect();
    let idx = |p: char, k: char| {
        let id = format!("T_{p}{k}");
        channels.iter().position(|c| c.id == id).expect("switch id exists")
    };
    let mut legs = Vec::new();
    // (channel, phase) pairs conducting the phase current for the whole period
    let mut always_on = Vec::new();
    for (x, &p) in PHASES.iter().enumerate() {
        let two = |upper, lower, sign| Leg { kind: LegKind::TwoLevel, phase: x, sign, upper, lower, mid: None };
        match cfg.mode {
            Mode::TwoLevel => legs.push(two(idx(p, '1'), idx(p, '2'), 1.0)),
            Mode::ThreeLevel => legs.push(Leg {
                kind: LegKind::ThreeLevel,
                phase: x,
                sign: 1.0,
                upper: idx(p, '1'),
                lower: idx(p, '2'),
                mid: Some((idx(p, '3'), idx(p, '4'))),
            }),
            Mode::Star => {
                legs.push(two(idx(p, '1'), idx(p, '2'), 1.0));
                always_on.push((idx('d', char::from(b'1' + x as u8)), x));
            }
            Mode::Bridge => legs.push(two(idx(p, '1'), idx(p, '2'), 1.0)),
        }
    }
    if cfg.mode == Mode::Bridge {
        for (x, &p) in PHASES.iter().enumerate() {
            legs.push(Leg { kind: LegKind::TwoLevel, phase: x, sign: -1.0, upper: idx(p, '3'), lower: idx(p, '4'), mid: None });
        }
    }
    (channels, legs, always_on)
}

/// Leg patterns of carrier centred at angle `theta`.
fn carrier_patterns(cfg: &ModulationConfig, u: [f64; 3], i: [f64; 3]) -> Vec<LegPattern> {
    match cfg.mode {
        Mode::TwoLevel | Mode::Star => {
            let v = min_max(u.map(|x| x / (cfg.v_dc / 2.0)));
            v.iter().map(|&x| two_level_leg(x)).collect()
        }
        Mode::ThreeLevel => {
            let v = u.map(|x| x / (cfg.v_dc / 2.0));
            three_level_references(cfg.zero_vector_policy(), v, i, &cfg.clamp_cost)
                .iter()
                .map(|&x| three_level_leg(x))
                .collect()
        }
        Mode::Bridge => {
            let m = u.map(|x| x / cfg.v_dc);
            let mut out: Vec<LegPattern> = m.iter().map(|&x| two_level_leg(x)).collect();
            for k in 0..3 {
                let right = match cfg.variant {
                    Variant::A => {
                        let l = out[k];
                        LegPattern { half_width: l.half_width, inside: -l.inside, outside: -l.outside }
                    }
                    _ => two_level_leg(-m[k]),
                };
                out.push(right);
            }
            out
        }
    }
}

/// ∫ cos²(ωt + φ) dt over [t0, t1].
fn cos2_integral(omega: f64, phi: f64, t0: f64, t1: f64) -> f64 {
    (t1 - t0) / 2.0 + ((2.0 * (omega * t1 + phi)).sin() - (2.0 * (omega * t0 + phi)).sin()) / (4.0 * omega)
}

/// Builds one fundamental period for the operating point `sol`.
pub fn synthesize_period(cfg: &ModulationConfig, sol: &OperatingPointSolution) -> Result<SwitchingTrace> {
    cfg.validate()?;
    let u_amp = sol.u_d.hypot(sol.u_q);
    let limit = cfg.voltage_limit();
    if !u_amp.is_finite() || u_amp > limit * (1.0 + 1e-9) {
        return Err(Error::Modulation(format!(
            "voltage {u_amp:.3} V exceeds the {} mode limit {limit:.3} V",
            cfg.mode
        )));
    }
    let u_angle = sol.u_q.atan2(sol.u_d);
    let i_amp = sol.i_d.hypot(sol.i_q);
    let i_angle = sol.i_q.atan2(sol.i_d);

    let f = sol.f_f.max(cfg.min_fundamental);
    let period = 1.0 / f;
    let omega = 2.0 * PI * f;
    let carriers = ((cfg.f_sw / f).round() as usize).max(1);
    let t_c = period / carriers as f64;

    let (mut channels, legs, always_on) = build_legs(cfg);
    let n_legs = legs.len();

    // Segments with constant level vectors, merged across carrier boundaries.
    let mut segments: Vec<Segment> = Vec::with_capacity(carriers * (2 * n_legs + 1));
    let mut cuts: Vec<f64> = Vec::with_capacity(2 * n_legs + 2);
    for k in 0..carriers {
        let theta = omega * (k as f64 + 0.5) * t_c;
        let u = [0, 1, 2].map(|x| u_amp * (theta + u_angle - phase_shift(x)).cos());
        let i = [0, 1, 2].map(|x| i_amp * (theta + i_angle - phase_shift(x)).cos());
        let pats = carrier_patterns(cfg, u, i);

        let mut hw: Vec<f64> = pats.iter().filter(|p| p.switches()).map(|p| p.half_width).collect();
        hw.sort_by(|a, b| b.total_cmp(a));
        hw.dedup();
        cuts.clear();
        cuts.push(0.0);
        cuts.extend(hw.iter().map(|h| 0.5 - h));
        cuts.extend(hw.iter().rev().map(|h| 0.5 + h));
        cuts.push(1.0);

        for w in cuts.windows(2) {
            let t0 = (k as f64 + w[0]) * t_c;
            let t1 = if w[1] >= 1.0 { (k + 1) as f64 * t_c } else { (k as f64 + w[1]) * t_c };
            if t1 <= t0 {
                continue;
            }
            let xm = 0.5 * (w[0] + w[1]);
            let mut levels = [0i8; MAX_LEGS];
            for (j, p) in pats.iter().enumerate() {
                levels[j] = p.level_at(xm);
            }
            match segments.last_mut() {
                Some(last) if last.levels == levels => last.t1 = t1,
                _ => segments.push(Segment { t0, t1, levels }),
            }
        }
    }
    if let Some(last) = segments.last_mut() {
        last.t1 = period;
    }

    let leg_phi: Vec<f64> = legs.iter().map(|l| i_angle - phase_shift(l.phase)).collect();
    let leg_current = |j: usize, t: f64| legs[j].sign * i_amp * (omega * t + leg_phi[j]).cos();

    // Conduction.
    for s in &segments {
        for (j, leg) in legs.iter().enumerate() {
            let i2 = i_amp * i_amp * cos2_integral(omega, leg_phi[j], s.t0, s.t1);
            let dt = s.t1 - s.t0;
            let mut add = |c: usize| {
                channels[c].i2_integral += i2;
                channels[c].on_time += dt;
            };
            match s.levels[j] {
                1 => add(leg.upper),
                -1 => add(leg.lower),
                _ => {
                    let (m3, m4) = leg.mid.expect("level 0 only on three-level legs");
                    add(m3);
                    add(m4);
                }
            }
        }
    }
    for &(c, x) in &always_on {
        channels[c].i2_integral += i_amp * i_amp * cos2_integral(omega, i_angle - phase_shift(x), 0.0, period);
        channels[c].on_time += period;
    }

    // Commutations, including the wrap from the last segment to the first.
    if segments.len() > 1 {
        for s in 0..segments.len() {
            let prev = if s == 0 { segments.len() - 1 } else { s - 1 };
            let t = segments[s].t0;
            for (j, leg) in legs.iter().enumerate() {
                let (from, to) = (segments[prev].levels[j], segments[s].levels[j]);
                if from != to {
                    commutate(leg, from, to, t, leg_current(j, t), cfg.v_dc, &mut channels);
                }
            }
        }
    }

    // Phase voltages and DC-link capacitor current per segment.
    let half = cfg.v_dc / 2.0;
    let mut breaks = Vec::with_capacity(segments.len() + 1);
    let mut values = Vec::with_capacity(segments.len());
    let mut cap = Vec::with_capacity(segments.len());
    for s in &segments {
        breaks.push(s.t0);
        let l = |j: usize| f64::from(s.levels[j]);
        let v = if cfg.mode == Mode::Bridge {
            [0, 1, 2].map(|x| half * (l(x) - l(x + 3)))
        } else {
            let zs = (l(0) + l(1) + l(2)) / 3.0;
            [0, 1, 2].map(|x| half * (l(x) - zs))
        };
        values.push(v);
        let (mut a, mut b) = (0.0, 0.0);
        for (j, leg) in legs.iter().enumerate() {
            let w = match s.levels[j] {
                1 => 1.0,
                0 => 0.5,
                _ => 0.0,
            };
            if w > 0.0 {
                let amp = w * leg.sign * i_amp;
                a += amp * leg_phi[j].cos();
                b -= amp * leg_phi[j].sin();
            }
        }
        cap.push(CapacitorSegment { t0: s.t0, t1: s.t1, c0: 0.0, a, b });
    }
    breaks.push(period);

    Ok(SwitchingTrace {
        config: cfg.clone(),
        fundamental: f,
        period,
        carriers,
        current_amplitude: i_amp,
        current_angle: i_angle,
        voltage_amplitude: u_amp,
        voltage_angle: u_angle,
        legs,
        segments,
        channels,
        waveform: VoltageWaveform::Piecewise { period, breaks, values, sample_count: carriers * cfg.samples_per_carrier },
        capacitor: CapacitorCurrent::new(omega, period, cap, true),
    })
}

/// Gate transitions of leg `leg` stepping from level `from` to `to` at time `t`
/// while carrying current `i` (positive out of the leg).
fn commutate(leg: &Leg, from: i8, to: i8, t: f64, i: f64, v_dc: f64, channels: &mut [SwitchChannel]) {
    match leg.kind {
        LegKind::TwoLevel => step(leg.upper, leg.lower, to > from, t, i, v_dc, channels),
        LegKind::ThreeLevel => {
            let (t3, t4) = leg.mid.expect("three-level leg has a mid path");
            let dir: i8 = if to > from { 1 } else { -1 };
            let mut l = from;
            while l != to {
                let n = l + dir;
                let (hi, lo) = (l.max(n), l.min(n));
                // +1↔0 toggles the outer upper switch against T4, 0↔-1 toggles T3 against the outer lower.
                let (hi_dev, lo_dev) = if hi == 1 { (leg.upper, t4) } else { (t3, leg.lower) };
                debug_assert!(lo >= -1);
                step(hi_dev, lo_dev, dir > 0, t, i, v_dc / 2.0, channels);
                l = n;
            }
        }
    }
}

/// One commutation between the device on at the higher level and the one on
/// at the lower level. Positive current is carried hard by the high-side
/// device, negative by the low side; at zero current the incoming device
/// still charges its output capacitance.
fn step(hi_dev: usize, lo_dev: usize, up: bool, t: f64, i: f64, v: f64, channels: &mut [SwitchChannel]) {
    let (on, off) = if up { (hi_dev, lo_dev) } else { (lo_dev, hi_dev) };
    let hard = if i > 0.0 {
        hi_dev
    } else if i < 0.0 {
        lo_dev
    } else {
        on
    };
    let i_sw = i.abs();
    channels[off].events.push(SwitchEvent { time: t, v_sw: v, i_sw, turn_on: false, hard: off == hard && i != 0.0 });
    channels[on].events.push(SwitchEvent { time: t, v_sw: v, i_sw, turn_on: true, hard: on == hard });
}

/// Whether `(topology, mode, variant)` distinguishes the variant; two-level and
/// star operation ignore it.
pub fn variant_matters(topology: Topology, mode: Mode) -> bool {
    matches!((topology, mode), (Topology::Tnpc, Mode::ThreeLevel) | (Topology::B6Y, Mode::Bridge))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motor::{solve_operating_point, MotorModel};
    use crate::vehicle::OperatingPoint;

    fn sol(mode: Mode, n: f64, m: f64) -> OperatingPointSolution {
        let motor = MotorModel::default();
        let lim = super::super::voltage_limit(mode, 800.0);
        solve_operating_point(&motor, &OperatingPoint::new(n, m, 1.0), lim).unwrap()
    }

    fn all_configs() -> Vec<ModulationConfig> {
        let mut v = Vec::new();
        for t in [Topology::B6, Topology::Tnpc, Topology::B6Y] {
            for &m in t.modes() {
                for &var in t.variants() {
                    v.push(ModulationConfig::new(t, m, var, 10e3, 800.0));
                }
            }
        }
        v
    }

    #[test]
    fn carrier_volt_seconds_match_reference() {
        for cfg in all_configs() {
            let s = sol(cfg.mode, 3000.0, 150.0);
            let tr = synthesize_period(&cfg, &s).unwrap();
            let VoltageWaveform::Piecewise { breaks, values, .. } = &tr.waveform else { unreachable!() };
            let tc = tr.carrier_period();
            for k in [0, 7, tr.carriers / 2, tr.carriers - 1] {
                let (a, b) = (k as f64 * tc, (k + 1) as f64 * tc);
                let mut mean = [0.0; 3];
                for (w, v) in breaks.windows(2).zip(values) {
                    let ov = (w[1].min(b) - w[0].max(a)).max(0.0);
                    for x in 0..3 {
                        mean[x] += v[x] * ov / tc;
                    }
                }
                let tm = (k as f64 + 0.5) * tc;
                for x in 0..3 {
                    let r = tr.phase_reference(x, tm);
                    // Star modes lose only the zero sequence.
                    let zs = if cfg.mode == Mode::Bridge { 0.0 } else { (mean[0] + mean[1] + mean[2]) / 3.0 };
                    assert!((mean[x] - zs - r).abs() < 1e-6 * cfg.v_dc, "{cfg:?} k={k} x={x}: {} vs {r}", mean[x]);
                }
            }
        }
    }

    #[test]
    fn each_leg_conducts_through_exactly_one_path() {
        for cfg in all_configs() {
            let s = sol(cfg.mode, 5000.0, 250.0);
            let tr = synthesize_period(&cfg, &s).unwrap();
            let full = tr.current_amplitude.powi(2) * tr.period / 2.0;
            for leg in &tr.legs {
                let (u, l) = (&tr.channels[leg.upper], &tr.channels[leg.lower]);
                let (mut on, mut i2) = (u.on_time + l.on_time, u.i2_integral + l.i2_integral);
                if let Some((m3, m4)) = leg.mid {
                    assert_eq!(tr.channels[m3].on_time, tr.channels[m4].on_time);
                    on += tr.channels[m3].on_time;
                    i2 += tr.channels[m3].i2_integral;
                }
                assert!((on - tr.period).abs() < 1e-9 * tr.period, "{cfg:?}");
                assert!((i2 - full).abs() < 1e-9 * full, "{cfg:?}");
            }
        }
    }

    #[test]
    fn two_level_hard_events_once_per_carrier_edge() {
        let cfg = ModulationConfig::new(Topology::B6, Mode::TwoLevel, Variant::A, 10e3, 800.0);
        let s = sol(cfg.mode, 4000.0, 100.0);
        let tr = synthesize_period(&cfg, &s).unwrap();
        for leg in &tr.legs {
            let (u, l) = (&tr.channels[leg.upper], &tr.channels[leg.lower]);
            // Per commutation exactly one device switches hard, turning on or off.
            let hard = u.events.iter().chain(&l.events).filter(|e| e.hard).count();
            let steps = u.events.iter().chain(&l.events).filter(|e| e.turn_on).count();
            assert_eq!(hard, steps);
            assert!(steps <= 2 * tr.carriers && steps >= tr.carriers);
            assert!(u.events.iter().all(|e| e.v_sw == 800.0));
        }
    }

    #[test]
    fn three_level_steps_at_half_link_voltage() {
        let cfg = ModulationConfig::new(Topology::Tnpc, Mode::ThreeLevel, Variant::A, 10e3, 800.0);
        let tr = synthesize_period(&cfg, &sol(cfg.mode, 3000.0, 200.0)).unwrap();
        assert!(tr.channels.iter().flat_map(|c| &c.events).all(|e| e.v_sw == 400.0));
        assert!(tr.channels.iter().any(|c| c.id == "T_a3" && !c.events.is_empty()));
    }

    #[test]
    fn star_mode_keeps_right_bridge_idle() {
        let cfg = ModulationConfig::new(Topology::B6Y, Mode::Star, Variant::A, 10e3, 800.0);
        let tr = synthesize_period(&cfg, &sol(cfg.mode, 3000.0, 100.0)).unwrap();
        let d1 = tr.channel("T_d1").unwrap();
        assert!((d1.on_time - tr.period).abs() < 1e-12 && d1.events.is_empty());
        let a3 = tr.channel("T_a3").unwrap();
        assert_eq!(a3.on_time, 0.0);
        assert!(a3.events.is_empty());
    }

    #[test]
    fn bipolar_right_leg_mirrors_left() {
        let cfg = ModulationConfig::new(Topology::B6Y, Mode::Bridge, Variant::A, 10e3, 800.0);
        let tr = synthesize_period(&cfg, &sol(cfg.mode, 3000.0, 100.0)).unwrap();
        for s in &tr.segments {
            for x in 0..3 {
                assert_eq!(s.levels[x], -s.levels[x + 3]);
            }
        }
    }

    #[test]
    fn overmodulation_is_an_error() {
        let cfg = ModulationConfig::new(Topology::B6, Mode::TwoLevel, Variant::A, 10e3, 800.0);
        let mut s = sol(cfg.mode, 3000.0, 100.0);
        s.u_d = 500.0;
        assert!(matches!(synthesize_period(&cfg, &s), Err(Error::Modulation(_))));
    }

    #[test]
    fn standstill_uses_minimum_fundamental() {
        let cfg = ModulationConfig::new(Topology::B6, Mode::TwoLevel, Variant::A, 10e3, 800.0);
        let tr = synthesize_period(&cfg, &sol(cfg.mode, 0.0, 200.0)).unwrap();
        assert_eq!(tr.fundamental, 1.0);
        assert_eq!(tr.carriers, 10_000);
    }

    #[test]
    fn csv_dump_has_one_row_per_segment() {
        let cfg = ModulationConfig::new(Topology::Tnpc, Mode::ThreeLevel, Variant::C, 10e3, 800.0);
        let tr = synthesize_period(&cfg, &sol(cfg.mode, 6000.0, 80.0)).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), tr.segments.len() + 1);
        assert!(text.starts_with("t0,t1,leg0,leg1,leg2,v_a"));
    }
}
