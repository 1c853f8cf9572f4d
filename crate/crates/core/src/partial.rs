//! Partial-load evaluation: per-point losses of a sized design, mode and
//! switching-frequency selection, cycle aggregation and mode boundary maps.

use std::sync::Arc;

use dashmap::DashMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze_point, Analysis, PointAnalysis};
use crate::error::{Error, Result};
use crate::motor::Infeasibility;
use crate::pwm::trace::variant_matters;
use crate::pwm::{Mode, Topology, Variant};
use crate::sizing::InverterDesign;
use crate::system::SystemModel;
use crate::vehicle::OperatingPoint;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchState {
    pub id: String,
    pub area: f64,
    pub p_con: f64,
    pub p_sw: f64,
    pub p_mos: f64,
    /// Junction temperature (°C); heat-sink temperature when idle
    pub t_j: f64,
}

/// Losses of one design at one point in one mode and frequency (W).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointEvaluation {
    pub speed: f64,
    pub torque: f64,
    pub mode: Mode,
    pub f_sw: f64,
    pub p_con: f64,
    pub p_sw: f64,
    /// Σ p_mos over the switches in design order
    pub p_inv: f64,
    pub p_mot_h: f64,
    pub p_mot_f: f64,
    /// Always `p_inv + p_mot_h + p_mot_f`
    pub p_tot: f64,
    pub delta_u: f64,
    pub switches: Vec<SwitchState>,
    pub electrical_ok: bool,
    pub thermal_ok: bool,
    pub ripple_ok: bool,
    pub infeasibility: Option<Infeasibility>,
}

impl PointEvaluation {
    pub fn feasible(&self) -> bool {
        self.electrical_ok && self.thermal_ok && self.ripple_ok
    }

    pub fn t_j_max(&self) -> f64 {
        self.switches.iter().map(|s| s.t_j).fold(f64::NEG_INFINITY, f64::max)
    }

    fn unreachable(point: &OperatingPoint, mode: Mode, f_sw: f64, why: Infeasibility) -> Self {
        Self {
            speed: point.speed,
            torque: point.torque,
            mode,
            f_sw,
            p_con: 0.0,
            p_sw: 0.0,
            p_inv: 0.0,
            p_mot_h: 0.0,
            p_mot_f: 0.0,
            p_tot: 0.0,
            delta_u: 0.0,
            switches: Vec::new(),
            electrical_ok: false,
            thermal_ok: false,
            ripple_ok: false,
            infeasibility: Some(why),
        }
    }
}

/// How the switching frequency of a cycle point is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FswPolicy {
    /// This frequency, raised along the grid step only where the ripple limit demands it
    Fixed(f64),
    /// Loss-minimal grid frequency per point
    Optimal,
}

impl FswPolicy {
    pub fn tag(&self) -> String {
        match self {
            FswPolicy::Fixed(f) => format!("fixed_{:.0}Hz", f),
            FswPolicy::Optimal => "opt".into(),
        }
    }
}

/// Losses of `design` given an area-independent analysis.
pub fn evaluate_analysis(sys: &SystemModel, design: &InverterDesign, a: &PointAnalysis) -> PointEvaluation {
    let thermal = &sys.thermal;
    let mut switches = Vec::with_capacity(design.switches.len());
    let (mut p_con, mut p_sw, mut p_inv) = (0.0, 0.0, 0.0);
    let mut thermal_ok = true;
    for s in &design.switches {
        let state = match a.profile(&s.id) {
            Some(p) => {
                let (loss, th) = p.profile.evaluate(sys.devices.get(s.class), s.area, thermal);
                thermal_ok &= th.feasible;
                SwitchState { id: s.id.clone(), area: s.area, p_con: loss.p_con, p_sw: loss.p_sw, p_mos: loss.p_mos, t_j: th.t_j }
            }
            None => SwitchState { id: s.id.clone(), area: s.area, p_con: 0.0, p_sw: 0.0, p_mos: 0.0, t_j: thermal.t_hs },
        };
        p_con += state.p_con;
        p_sw += state.p_sw;
        p_inv += state.p_mos;
        switches.push(state);
    }
    let p_mot_h = a.harmonic.map_or(0.0, |h| h.p_mot_h);
    PointEvaluation {
        speed: a.speed,
        torque: a.torque,
        mode: a.mode,
        f_sw: a.f_sw,
        p_con,
        p_sw,
        p_inv,
        p_mot_h,
        p_mot_f: a.p_mot_f,
        p_tot: p_inv + p_mot_h + a.p_mot_f,
        delta_u: a.delta_u,
        switches,
        electrical_ok: true,
        thermal_ok,
        ripple_ok: a.delta_u <= sys.dc_link.delta_u_max,
        infeasibility: None,
    }
}

/// Lowest total loss; ties go to the mode with fewer active switches, then
/// to the earlier candidate.
pub fn pick_best(candidates: impl IntoIterator<Item = PointEvaluation>) -> Option<PointEvaluation> {
    candidates.into_iter().fold(None, |best: Option<PointEvaluation>, c| match best {
        Some(b) if (b.p_tot, b.mode.active_switch_count()) <= (c.p_tot, c.mode.active_switch_count()) => Some(b),
        _ => Some(c),
    })
}

/// Exhaustive argmin over an ascending grid; `eval` returns `None` for an
/// infeasible frequency. Ties go to the lower frequency.
pub fn argmin_grid<T>(grid: &[f64], mut eval: impl FnMut(f64) -> Result<Option<(f64, T)>>) -> Result<Option<(f64, f64, T)>> {
    let mut best: Option<(f64, f64, T)> = None;
    for &f in grid {
        if let Some((loss, t)) = eval(f)? {
            if best.as_ref().is_none_or(|(_, b, _)| loss < *b) {
                best = Some((f, loss, t));
            }
        }
    }
    Ok(best)
}

/// Energy totals of a weighted point set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleTotals {
    /// J
    pub e_tot: f64,
    pub e_con: f64,
    pub e_sw: f64,
    pub e_mot_h: f64,
    pub e_mot_f: f64,
    /// s
    pub duration: f64,
    /// m
    pub distance: f64,
    /// kWh per 100 km
    pub delta_e: f64,
    /// Mean total loss (W)
    pub p_tot_mean: f64,
}

/// Integrates weighted point losses over a cycle of `distance` m and `duration` s.
pub fn aggregate_cycle<'a>(
    points: impl IntoIterator<Item = (f64, &'a PointEvaluation)>,
    distance: f64,
    duration: f64,
) -> Result<CycleTotals> {
    if distance.is_nan() || distance <= 0.0 {
        return Err(Error::ZeroDistance);
    }
    if duration.is_nan() || duration <= 0.0 {
        return Err(Error::Cycle("cycle duration must be positive".into()));
    }
    let (mut e_tot, mut e_con, mut e_sw, mut e_mot_h, mut e_mot_f) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (w, e) in points {
        e_tot += w * e.p_tot;
        e_con += w * e.p_con;
        e_sw += w * e.p_sw;
        e_mot_h += w * e.p_mot_h;
        e_mot_f += w * e.p_mot_f;
    }
    Ok(CycleTotals {
        e_tot,
        e_con,
        e_sw,
        e_mot_h,
        e_mot_f,
        duration,
        distance,
        delta_e: e_tot / 3.6e6 * (1e5 / distance),
        p_tot_mean: e_tot / duration,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CyclePoint {
    pub index: usize,
    pub weight: f64,
    pub evaluation: PointEvaluation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleResult {
    pub design_id: String,
    pub policy: FswPolicy,
    pub points: Vec<CyclePoint>,
    pub totals: CycleTotals,
}

impl CycleResult {
    /// (min, weighted mean, max) of the selected frequencies.
    pub fn fsw_stats(&self) -> (f64, f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let (mut sum, mut w) = (0.0, 0.0);
        for p in &self.points {
            let f = p.evaluation.f_sw;
            lo = lo.min(f);
            hi = hi.max(f);
            sum += p.weight * f;
            w += p.weight;
        }
        (lo, if w > 0.0 { sum / w } else { f64::NAN }, hi)
    }

    /// Weighted time share of each mode.
    pub fn mode_shares(&self) -> Vec<(Mode, f64)> {
        let total: f64 = self.points.iter().map(|p| p.weight).sum();
        let mut shares: Vec<(Mode, f64)> = Vec::new();
        for p in &self.points {
            match shares.iter_mut().find(|(m, _)| *m == p.evaluation.mode) {
                Some((_, s)) => *s += p.weight,
                None => shares.push((p.evaluation.mode, p.weight)),
            }
        }
        shares.iter_mut().for_each(|(_, s)| *s /= total);
        shares.sort_by_key(|(m, _)| m.active_switch_count());
        shares
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCell {
    pub speed: f64,
    pub torque: f64,
    pub in_envelope: bool,
    /// Electrically and thermally feasible modes in design order
    pub feasible: Vec<Mode>,
    pub best: Option<Mode>,
    /// P_tot per feasible mode, aligned with `feasible`
    pub p_tot: Vec<f64>,
    /// P_tot(fallback) − P_tot(best), when the fallback is feasible
    pub loss_difference: Option<f64>,
    /// Whether the best mode meets the link ripple limit at this frequency
    pub ripple_ok: bool,
}

/// Mode feasibility and preference over a torque-speed grid at one frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeBoundaryMap {
    pub design_id: String,
    pub f_sw: f64,
    pub speeds: Vec<f64>,
    pub torques: Vec<f64>,
    /// Torque-major: cell (i, j) at index `i * speeds.len() + j`
    pub cells: Vec<BoundaryCell>,
}

impl ModeBoundaryMap {
    pub fn cell(&self, torque_index: usize, speed_index: usize) -> &BoundaryCell {
        &self.cells[torque_index * self.speeds.len() + speed_index]
    }
}

/// `count` evenly spaced values over `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        n => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

type Key = (Topology, Mode, Variant, u64, u64, u64);

/// Evaluates designs against a shared system model, memoising the
/// area-independent analyses so designs of one family share them.
pub struct Evaluator {
    sys: Arc<SystemModel>,
    cache: DashMap<Key, Arc<Analysis>>,
}

impl Evaluator {
    pub fn new(sys: Arc<SystemModel>) -> Self {
        Self { sys, cache: DashMap::new() }
    }

    pub fn system(&self) -> &SystemModel {
        &self.sys
    }

    pub fn cached(&self) -> usize {
        self.cache.len()
    }

    pub fn clear(&self) {
        self.cache.clear();
    }

    fn analysis(&self, topology: Topology, mode: Mode, variant: Variant, point: &OperatingPoint, f_sw: f64) -> Result<Arc<Analysis>> {
        // Two-level operation of either topology is the same leg pattern on the same machine.
        let topology = if mode == Mode::TwoLevel { Topology::B6 } else { topology };
        let variant = if variant_matters(topology, mode) { variant } else { Variant::A };
        // -0.0 and 0.0 are the same point
        let key = (topology, mode, variant, f_sw.to_bits(), (point.speed + 0.0).to_bits(), (point.torque + 0.0).to_bits());
        if let Some(a) = self.cache.get(&key) {
            return Ok(Arc::clone(&a));
        }
        let a = Arc::new(analyze_point(&self.sys, topology, mode, variant, point, f_sw, true)?);
        Ok(Arc::clone(self.cache.entry(key).or_insert(a).value()))
    }

    /// Losses of `design` at `point` in `mode` at exactly `f_sw`.
    pub fn evaluate_point(&self, design: &InverterDesign, point: &OperatingPoint, mode: Mode, f_sw: f64) -> Result<PointEvaluation> {
        if !design.modes.contains(&mode) {
            return Err(Error::invalid(&design.id, format!("mode {mode} is not enabled")));
        }
        Ok(match &*self.analysis(design.topology, mode, design.variant, point, f_sw)? {
            Analysis::Feasible(a) => {
                let mut e = evaluate_analysis(&self.sys, design, a);
                // the cached analysis may stem from the other topology's two-level pattern
                e.speed = point.speed;
                e.torque = point.torque;
                e
            }
            Analysis::Infeasible(why) => PointEvaluation::unreachable(point, mode, f_sw, why.clone()),
        })
    }

    /// Modes meeting every limit at exactly `f_sw`.
    pub fn feasible_modes(&self, design: &InverterDesign, point: &OperatingPoint, f_sw: f64) -> Result<Vec<Mode>> {
        let mut out = Vec::new();
        for &m in &design.modes {
            if self.evaluate_point(design, point, m, f_sw)?.feasible() {
                out.push(m);
            }
        }
        Ok(out)
    }

    /// Loss-minimal feasible mode at exactly `f_sw`.
    pub fn best_mode(&self, design: &InverterDesign, point: &OperatingPoint, f_sw: f64) -> Result<PointEvaluation> {
        let mut all = Vec::with_capacity(design.modes.len());
        for &m in &design.modes {
            all.push(self.evaluate_point(design, point, m, f_sw)?);
        }
        pick_best(all.into_iter().filter(PointEvaluation::feasible)).ok_or_else(|| unservable(design, &[(0, *point)]))
    }

    /// Evaluation of `mode` at the first frequency from `f_sw` upward that
    /// meets the ripple limit; at `f_sw` itself when none does.
    pub fn evaluate_escalated(&self, design: &InverterDesign, point: &OperatingPoint, mode: Mode, f_sw: f64) -> Result<PointEvaluation> {
        let first = self.evaluate_point(design, point, mode, f_sw)?;
        if first.ripple_ok || !first.electrical_ok {
            return Ok(first);
        }
        for f in self.sys.switching.escalation_from(f_sw).into_iter().skip(1) {
            let e = self.evaluate_point(design, point, mode, f)?;
            if e.ripple_ok {
                return Ok(e);
            }
        }
        Ok(first)
    }

    /// Loss-minimal frequency and mode over the optimisation grid; above the
    /// grid only when no grid frequency is feasible.
    pub fn optimal_fsw(&self, design: &InverterDesign, point: &OperatingPoint) -> Result<Option<PointEvaluation>> {
        let at = |f: f64| -> Result<Option<(f64, PointEvaluation)>> {
            let mut all = Vec::with_capacity(design.modes.len());
            for &m in &design.modes {
                all.push(self.evaluate_point(design, point, m, f)?);
            }
            Ok(pick_best(all.into_iter().filter(PointEvaluation::feasible)).map(|e| (e.p_tot, e)))
        };
        let sw = &self.sys.switching;
        if let Some((_, _, e)) = argmin_grid(&sw.grid(), at)? {
            return Ok(Some(e));
        }
        for f in sw.escalation_from(sw.grid_max).into_iter().skip(1) {
            if let Some((_, e)) = at(f)? {
                return Ok(Some(e));
            }
        }
        Ok(None)
    }

    /// Operating choice for one cycle point under `policy`; `None` when no
    /// mode can serve it.
    pub fn select(&self, design: &InverterDesign, point: &OperatingPoint, policy: FswPolicy) -> Result<Option<PointEvaluation>> {
        match policy {
            FswPolicy::Fixed(f) => {
                let mut all = Vec::with_capacity(design.modes.len());
                for &m in &design.modes {
                    all.push(self.evaluate_escalated(design, point, m, f)?);
                }
                Ok(pick_best(all.into_iter().filter(PointEvaluation::feasible)))
            }
            FswPolicy::Optimal => self.optimal_fsw(design, point),
        }
    }

    /// Evaluates every cycle point in parallel and integrates the losses.
    pub fn evaluate_cycle(
        &self,
        design: &InverterDesign,
        points: &[OperatingPoint],
        policy: FswPolicy,
        distance: f64,
        duration: f64,
    ) -> Result<CycleResult> {
        let chosen: Vec<Option<PointEvaluation>> =
            points.par_iter().map(|p| self.select(design, p, policy)).collect::<Result<_>>()?;
        let failed: Vec<(usize, OperatingPoint)> =
            chosen.iter().enumerate().filter(|(_, c)| c.is_none()).map(|(k, _)| (k, points[k])).collect();
        if !failed.is_empty() {
            return Err(unservable(design, &failed));
        }
        let points: Vec<CyclePoint> = chosen
            .into_iter()
            .zip(points)
            .enumerate()
            .map(|(index, (e, p))| CyclePoint { index, weight: p.weight, evaluation: e.expect("checked above") })
            .collect();
        let totals = aggregate_cycle(points.iter().map(|p| (p.weight, &p.evaluation)), distance, duration)?;
        Ok(CycleResult { design_id: design.id.clone(), policy, points, totals })
    }

    /// Feasible and preferred modes over `torques × speeds` at exactly `f_sw`.
    ///
    /// Feasibility here is electrical and thermal; the ripple flag is reported
    /// per cell, so the map shows the chip-area boundary.
    pub fn mode_boundary_map(&self, design: &InverterDesign, speeds: &[f64], torques: &[f64], f_sw: f64) -> Result<ModeBoundaryMap> {
        let motor = &self.sys.motor_reference;
        let grid: Vec<(f64, f64)> = torques.iter().flat_map(|&m| speeds.iter().map(move |&n| (n, m))).collect();
        let cells = grid
            .par_iter()
            .map(|&(n, m)| {
                let in_envelope = n <= motor.n_max * (1.0 + 1e-12) && m.abs() <= motor.max_torque(n) * (1.0 + 1e-12);
                let mut cell = BoundaryCell {
                    speed: n,
                    torque: m,
                    in_envelope,
                    feasible: Vec::new(),
                    best: None,
                    p_tot: Vec::new(),
                    loss_difference: None,
                    ripple_ok: false,
                };
                if !in_envelope {
                    return Ok(cell);
                }
                let point = OperatingPoint::new(n, m, 1.0);
                let mut ok = Vec::new();
                for &mode in &design.modes {
                    let e = self.evaluate_point(design, &point, mode, f_sw)?;
                    if e.electrical_ok && e.thermal_ok {
                        ok.push(e);
                    }
                }
                cell.feasible = ok.iter().map(|e| e.mode).collect();
                cell.p_tot = ok.iter().map(|e| e.p_tot).collect();
                if let Some(best) = pick_best(ok.iter().cloned()) {
                    cell.best = Some(best.mode);
                    cell.ripple_ok = best.ripple_ok;
                    cell.loss_difference = ok.iter().find(|e| e.mode == design.fallback).map(|f| f.p_tot - best.p_tot);
                }
                Ok(cell)
            })
            .collect::<Result<_>>()?;
        Ok(ModeBoundaryMap {
            design_id: design.id.clone(),
            f_sw,
            speeds: speeds.to_vec(),
            torques: torques.to_vec(),
            cells,
        })
    }
}

fn unservable(design: &InverterDesign, points: &[(usize, OperatingPoint)]) -> Error {
    Error::UnservablePoints {
        design: design.id.clone(),
        points: points.iter().map(|(k, p)| (*k, p.speed, p.torque)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sizing::size_topology;
    use crate::vehicle::full_load_envelope;

    fn eval(p_tot: f64, mode: Mode) -> PointEvaluation {
        let mut e = PointEvaluation::unreachable(&OperatingPoint::new(0.0, 0.0, 1.0), mode, 1e4, Infeasibility::CurrentLimit { required: 0.0, limit: 0.0 });
        e.p_tot = p_tot;
        e
    }

    #[test]
    fn constant_power_cycle_closed_form() {
        // 500 W for 1000 s over 10 km
        let e = eval(500.0, Mode::TwoLevel);
        let pts: Vec<(f64, &PointEvaluation)> = (0..1000).map(|_| (1.0, &e)).collect();
        let t = aggregate_cycle(pts, 10_000.0, 1000.0).unwrap();
        assert!((t.e_tot - 5e5).abs() < 1e-6);
        assert!((t.delta_e - 1.388_888_9).abs() < 1e-6);
        assert!((t.p_tot_mean - 500.0).abs() < 1e-9);
    }

    #[test]
    fn zero_distance_is_an_error() {
        let e = eval(1.0, Mode::TwoLevel);
        assert!(matches!(aggregate_cycle([(1.0, &e)], 0.0, 1.0), Err(Error::ZeroDistance)));
    }

    #[test]
    fn ties_prefer_fewer_switches() {
        let best = pick_best([eval(10.0, Mode::ThreeLevel), eval(10.0, Mode::TwoLevel)]).unwrap();
        assert_eq!(best.mode, Mode::TwoLevel);
        let best = pick_best([eval(10.0, Mode::Bridge), eval(10.0, Mode::Star), eval(9.0, Mode::Bridge)]).unwrap();
        assert_eq!((best.mode, best.p_tot), (Mode::Bridge, 9.0));
    }

    #[test]
    fn grid_argmin_by_hand() {
        // a·f + b/f with its continuous optimum at 9 kHz
        let (a, b) = (1e-3, 81e3);
        let grid = [6e3, 8e3, 10e3, 12e3];
        let (f, _, _) = argmin_grid(&grid, |f| Ok(Some((a * f + b / f, ())))).unwrap().unwrap();
        let p = |f: f64| a * f + b / f;
        assert_eq!(f, if p(8e3) <= p(10e3) { 8e3 } else { 10e3 });
        let (f, _, _) = argmin_grid(&grid, |_| Ok(Some((1.0, ())))).unwrap().unwrap();
        assert_eq!(f, 6e3);
        assert!(argmin_grid(&grid, |_| Ok(None::<(f64, ())>)).unwrap().is_none());
    }

    #[test]
    fn zero_point_has_only_switching_floor() {
        let sys = Arc::new(SystemModel::default());
        let env = full_load_envelope(&sys.motor_reference, 5);
        let (d, _) = size_topology(&sys, Topology::B6, Mode::TwoLevel, Variant::A, &env, 10e3, false).unwrap();
        let ev = Evaluator::new(sys);
        let e = ev.evaluate_point(&d, &OperatingPoint::new(0.0, 0.0, 1.0), Mode::TwoLevel, 10e3).unwrap();
        assert_eq!((e.p_mot_f, e.p_mot_h, e.p_con), (0.0, 0.0, 0.0));
        assert!(e.p_sw >= 0.0);
        assert_eq!(e.p_tot, e.p_inv + e.p_mot_h + e.p_mot_f);
        assert!(ev.cached() == 1);
    }
}
