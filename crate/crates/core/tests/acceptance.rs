//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! The end-to-end runs are shared fixtures and run one at a time, so the
//! measured wall-clock times are not inflated by other tests.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use traction_core::analysis::{analyze_point, Analysis, PointAnalysis};
use traction_core::config::Config;
use traction_core::device::ThermalModel;
use traction_core::explorer::{build_designs, default_families, pareto_front, ParetoPoint};
use traction_core::motor::{harmonic_losses, solve_operating_point, HarmonicMotorParameters};
use traction_core::partial::{aggregate_cycle, argmin_grid, evaluate_analysis, FswPolicy, PointEvaluation};
use traction_core::pipeline::{self, Command, RunOutput};
use traction_core::pwm::{dq_ripple_spectrum, HarmonicBin, HarmonicSpectrum, Mode, Topology, Variant, VoltageWaveform};
use traction_core::sizing::{size_point, InverterDesign};
use traction_core::system::SystemModel;
use traction_core::vehicle::{full_load_envelope, OperatingPoint};

/// Written past the test harness capture so every line shows in the log.
fn report(criterion: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "criterion {criterion:>2}: {verdict}  {detail}");
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

// ---------------------------------------------------------------------------
// Shared end-to-end fixtures

static HEAVY: Mutex<()> = Mutex::new(());

struct Timed {
    out: RunOutput,
    elapsed: Duration,
    dir: PathBuf,
}

fn timed_run(policy: FswPolicy, dir: PathBuf) -> Timed {
    let mut cfg = Config::standard();
    cfg.evaluation.policy = policy;
    let _guard = HEAVY.lock().unwrap_or_else(|e| e.into_inner());
    let t0 = Instant::now();
    let out = pipeline::run(cfg, Command::Run, &dir).expect("full run");
    Timed { out, elapsed: t0.elapsed(), dir }
}

fn scratch() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| tempfile::tempdir().unwrap()).path()
}

fn fixed_run() -> &'static Timed {
    static RUN: OnceLock<Timed> = OnceLock::new();
    RUN.get_or_init(|| timed_run(FswPolicy::Fixed(10e3), scratch().join("fixed_a")))
}

fn optimal_run() -> &'static Timed {
    static RUN: OnceLock<Timed> = OnceLock::new();
    RUN.get_or_init(|| timed_run(FswPolicy::Optimal, scratch().join("opt")))
}

fn bundle_files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let key = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(key, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_01_thermal_resistance_fit() {
    let t0 = Instant::now();
    let th = ThermalModel::default();
    let mut worst: f64 = 0.0;
    let mut values = Vec::new();
    for a in [1.0, 25.0, 100.0, 625.0] {
        // direct evaluation through exp/ln, independent of powf
        let direct = 3.0 * (-0.4 * f64::ln(a)).exp();
        worst = worst.max(rel(th.r_th(a), direct));
        values.push(format!("{a}:{:.5}", th.r_th(a)));
    }
    let elapsed = t0.elapsed();
    let pass = worst <= 1e-12 && elapsed < Duration::from_secs(1);
    report(1, pass, &format!("R_th {} K/W, max rel err {worst:.1e}, {elapsed:?}", values.join(" ")));
    assert!(pass);
}

/// Feasible analyses at points fast to synthesise (f_f ≥ 200 Hz).
fn random_analyses(sys: &SystemModel, rng: &mut StdRng, count: usize) -> Vec<PointAnalysis> {
    let combos = [
        (Topology::B6, Mode::TwoLevel, Variant::A),
        (Topology::Tnpc, Mode::ThreeLevel, Variant::A),
        (Topology::Tnpc, Mode::ThreeLevel, Variant::B),
        (Topology::Tnpc, Mode::ThreeLevel, Variant::C),
        (Topology::B6Y, Mode::Bridge, Variant::B),
        (Topology::B6Y, Mode::Star, Variant::A),
    ];
    let mut out = Vec::new();
    while out.len() < count {
        let (t, m, v) = combos[out.len() % combos.len()];
        let n = rng.random_range(3000.0..9000.0);
        let limit = sys.motor(t).max_torque(n);
        let torque = rng.random_range(-0.6..0.6) * limit;
        let f = [6e3, 10e3, 14e3, 18e3][rng.random_range(0..4)];
        if let Analysis::Feasible(a) = analyze_point(sys, t, m, v, &OperatingPoint::new(n, torque, 1.0), f, true).unwrap() {
            out.push(a);
        }
    }
    out
}

#[test]
fn criterion_02_loss_additivity() {
    let t0 = Instant::now();
    let sys = SystemModel::default();
    let mut rng = StdRng::seed_from_u64(2);
    let analyses = random_analyses(&sys, &mut rng, 24);
    let mut violations = 0;
    let mut evaluations = 0;
    while evaluations < 1000 {
        let a = &analyses[evaluations % analyses.len()];
        let switches = a
            .topology
            .switches()
            .into_iter()
            .map(|(id, class)| traction_core::device::SwitchDesign { id, class, area: 25.0 * rng.random_range(1..24) as f64 })
            .collect();
        let d = InverterDesign::new("r", "r", a.topology, a.variant, vec![a.mode], switches);
        let e: PointEvaluation = evaluate_analysis(&sys, &d, a);
        let (mut con, mut sw, mut inv) = (0.0, 0.0, 0.0);
        for s in &e.switches {
            violations += usize::from((s.p_con + s.p_sw).to_bits() != s.p_mos.to_bits());
            con += s.p_con;
            sw += s.p_sw;
            inv += s.p_con + s.p_sw;
        }
        let h = a.harmonic.expect("spectrum computed");
        violations += usize::from((h.p_cu + h.p_iron + h.p_mag).to_bits() != h.p_mot_h.to_bits());
        violations += usize::from(con.to_bits() != e.p_con.to_bits() || sw.to_bits() != e.p_sw.to_bits());
        violations += usize::from(inv.to_bits() != e.p_inv.to_bits());
        violations += usize::from((e.p_inv + e.p_mot_h + e.p_mot_f).to_bits() != e.p_tot.to_bits());
        evaluations += 1;
    }
    let elapsed = t0.elapsed();
    let pass = violations == 0 && elapsed < Duration::from_secs(10);
    report(2, pass, &format!("{evaluations} evaluations, {violations} non-bitwise sums, {elapsed:?}"));
    assert!(pass);
}

/// Independent reading of the tabulated curves: linear in ln f.
fn curve_at(points: &[(f64, f64)], f: f64) -> f64 {
    for w in points.windows(2) {
        let ((f0, v0), (f1, v1)) = (w[0], w[1]);
        if f >= f0 && f <= f1 {
            let s = (f.ln() - f0.ln()) / (f1.ln() - f0.ln());
            return v0 + s * (v1 - v0);
        }
    }
    panic!("{f} outside the table");
}

fn harmonic_oracle(bins: &[HarmonicBin], p: &HarmonicMotorParameters) -> (f64, f64, f64) {
    let c = &p.curves;
    let mut cu = 0.0;
    let mut iron = 0.0;
    let mut mag = 0.0;
    for b in bins {
        let ld = curve_at(&c.ld.0, b.f);
        let lq = curve_at(&c.lq.0, b.f);
        cu += curve_at(&c.r_cu.0, b.f) / b.f.powi(2) * (b.u_d.powi(2) / ld.powi(2) + b.u_q.powi(2) / lq.powi(2));
        iron += (b.u_d.powi(2) + b.u_q.powi(2)) / curve_at(&c.r_iron.0, b.f);
        mag += b.u_d.powi(2) / curve_at(&c.r_mag.0, b.f);
    }
    (p.k_cu * cu, p.k_iron * iron, p.k_mag * mag)
}

#[test]
fn criterion_03_harmonic_loss_oracle() {
    let params = HarmonicMotorParameters::default();
    let mut rng = StdRng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let f_f = rng.random_range(5.0..1000.0);
        let f_sw = rng.random_range(6e3..18e3);
        let (lo, hi) = params.window(f_sw);
        let mut bins = Vec::new();
        let mut m = (lo / f_f).ceil() as usize;
        while (m as f64) * f_f <= hi && bins.len() < 4000 {
            bins.push(HarmonicBin { f: m as f64 * f_f, u_d: rng.random_range(0.0..50.0), u_q: rng.random_range(0.0..50.0) });
            m += rng.random_range(1..40);
        }
        let s = HarmonicSpectrum::from_bins(bins.clone()).unwrap();
        let got = harmonic_losses(&s, &params).unwrap();
        let (cu, iron, mag) = harmonic_oracle(&bins, &params);
        for (g, o) in [(got.p_cu, cu), (got.p_iron, iron), (got.p_mag, mag), (got.p_mot_h, cu + iron + mag)] {
            worst = worst.max(rel(g, o));
        }
    }
    let pass = worst <= 1e-9;
    report(3, pass, &format!("100 spectra, max rel dev {worst:.1e}"));
    assert!(pass);
}

#[test]
fn criterion_04_square_wave_spectrum() {
    // d-axis square wave of amplitude 1 V at 50 kHz on a 1 kHz fundamental
    let (f_f, f_h, rate) = (1000.0, 50e3, 20e6);
    let n = (rate / f_f) as usize;
    let period = 1.0 / f_f;
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 * period / n as f64;
            let sq = if ((t + 25e-9) * f_h).fract() < 0.5 { 1.0 } else { -1.0 };
            let (d, q) = (100.0 + sq, 30.0);
            let theta = 2.0 * PI * f_f * t;
            [0.0, 1.0, 2.0].map(|j: f64| {
                let a = theta - j * 2.0 * PI / 3.0;
                d * a.cos() - q * a.sin()
            })
        })
        .collect();
    let s = dq_ripple_spectrum(&VoltageWaveform::Sampled { period, samples }, 5e3, 1e6).unwrap();
    let mut worst: f64 = 0.0;
    for k in [1, 3, 5, 7, 9] {
        let expect = 4.0 / (k as f64 * PI);
        let got = s.bins().iter().find(|b| (b.f - k as f64 * f_h).abs() < 1.0).map_or(0.0, |b| b.u_d);
        worst = worst.max(rel(got, expect));
    }
    let pass = worst <= 0.01;
    report(4, pass, &format!("odd harmonics 1..9, max rel dev {:.3} %", 100.0 * worst));
    assert!(pass);
}

/// Speed at `torque` where the B6 voltage reaches `m_hat` of its limit.
fn speed_for_m_hat(sys: &SystemModel, torque: f64, m_hat: f64) -> f64 {
    let limit = sys.modulation(Topology::B6, Mode::TwoLevel, Variant::A, 10e3).voltage_limit();
    let m = |n: f64| solve_operating_point(&sys.motor_reference, &OperatingPoint::new(n, torque, 1.0), limit).unwrap().m_hat;
    let (mut lo, mut hi) = (1.0, sys.motor_reference.n_max);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if m(mid) < m_hat {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn p_mot_h(sys: &SystemModel, t: Topology, m: Mode, v: Variant, p: OperatingPoint) -> f64 {
    match analyze_point(sys, t, m, v, &p, 10e3, true).unwrap() {
        Analysis::Feasible(a) => a.harmonic.unwrap().p_mot_h,
        Analysis::Infeasible(why) => panic!("{t} {m} infeasible at {p:?}: {why:?}"),
    }
}

#[test]
fn criterion_05_harmonic_loss_ordering() {
    let t0 = Instant::now();
    let sys = SystemModel::default();
    let mut lines = Vec::new();
    let mut pass = true;
    for m_hat in [0.5, 0.8] {
        let torque = 200.0;
        let n = speed_for_m_hat(&sys, torque, m_hat);
        let p = OperatingPoint::new(n, torque, 1.0);
        let limit = sys.modulation(Topology::B6, Mode::TwoLevel, Variant::A, 10e3).voltage_limit();
        let reached = solve_operating_point(&sys.motor_reference, &p, limit).unwrap().m_hat;
        pass &= (reached - m_hat).abs() < 1e-3;
        let tnpc = p_mot_h(&sys, Topology::Tnpc, Mode::ThreeLevel, Variant::A, p);
        let b6 = p_mot_h(&sys, Topology::B6, Mode::TwoLevel, Variant::A, p);
        pass &= tnpc < b6;
        lines.push(format!("m={m_hat} ({n:.0} rpm, {torque} Nm): 3L {tnpc:.1} W < 2L {b6:.1} W"));
    }
    let low = OperatingPoint::new(2000.0, 40.0, 1.0);
    for v in [Variant::A, Variant::B] {
        let y = p_mot_h(&sys, Topology::B6Y, Mode::Star, v, low);
        let h = p_mot_h(&sys, Topology::B6Y, Mode::Bridge, v, low);
        pass &= y < h;
        lines.push(format!("B6Y_{v} (2000 rpm, 40 Nm): Y {y:.1} W < H {h:.1} W"));
    }
    let elapsed = t0.elapsed();
    pass &= elapsed < Duration::from_secs(120);
    report(5, pass, &format!("{}; {elapsed:.1?}", lines.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_06_area_and_ripple_over_frequency() {
    let t0 = Instant::now();
    let sys = SystemModel::default();
    // 589 Nm exceeds the power limit at 5000 rpm; the envelope point there is the limit torque.
    let n = 5000.0;
    let p = OperatingPoint::new(n, sys.motor_reference.max_torque(n), 1.0);
    let rows: Vec<(f64, f64, f64, f64)> = [6e3, 8e3, 10e3, 12e3, 16e3, 20e3]
        .iter()
        .map(|&f| {
            let s = size_point(&sys, Topology::B6, Mode::TwoLevel, Variant::A, &p, f).unwrap();
            (f, s.total_area(), s.p_sw_over_p_con, s.delta_u)
        })
        .collect();
    let area_ok = rows.windows(2).all(|w| w[1].1 >= w[0].1);
    let ratio_ok = rows.windows(2).all(|w| w[1].2 >= w[0].2);
    let ripple_ok = rows.windows(2).all(|w| w[1].3 < w[0].3);
    let elapsed = t0.elapsed();
    let pass = area_ok && ratio_ok && ripple_ok && elapsed < Duration::from_secs(120);
    let table: Vec<String> =
        rows.iter().map(|(f, a, r, du)| format!("{:.0}k:{a:.0}mm²/{r:.3}/{du:.1}V", f / 1e3)).collect();
    report(6, pass, &format!("({:.0} Nm, {n} rpm) {}; {elapsed:.1?}", p.torque, table.join(" ")));
    assert!(pass);
}

#[test]
fn criterion_07_full_load_area_ordering() {
    let sys = SystemModel::default();
    let envelope = full_load_envelope(&sys.motor_reference, 25);
    let (sizing, designs, _) = build_designs(&sys, &envelope, &default_families()).unwrap();
    let baseline = designs.iter().find(|d| d.id == "B6").unwrap().total_area;
    let mut minima: BTreeMap<String, f64> = BTreeMap::new();
    for d in designs.iter().filter(|d| d.family != "B6") {
        let e = minima.entry(d.family.clone()).or_insert(f64::INFINITY);
        *e = e.min(d.total_area);
    }
    let floor_ok = minima.values().all(|&a| baseline <= a);
    let three_level = |v| sizing.get(Topology::Tnpc, Mode::ThreeLevel, v).unwrap().0.total_area;
    let (a, b, c) = (three_level(Variant::A), three_level(Variant::B), three_level(Variant::C));
    let order_ok = b <= c && c <= a;
    let pass = floor_ok && order_ok;
    report(
        7,
        pass,
        &format!(
            "B6 {baseline} mm² vs family minima {minima:?} ({}); TNPC 3L B {b} ≤ C {c} ≤ A {a} mm² ({})",
            if floor_ok { "holds" } else { "violated" },
            if order_ok { "holds" } else { "violated" }
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_mode_selection_and_boundary_growth() {
    let run = fixed_run();
    let maps = &run.out.maps;
    let designs = &run.out.designs.designs;
    let mut cells = 0;
    let mut violations = 0;
    for m in maps {
        for c in &m.cells {
            cells += 1;
            if let Some(best) = c.best {
                let k = c.feasible.iter().position(|x| *x == best).unwrap();
                violations += c.p_tot.iter().filter(|&&p| p < c.p_tot[k]).count();
            } else {
                violations += usize::from(!c.feasible.is_empty());
            }
        }
    }
    // Feasible cells of the auxiliary mode must only grow with area.
    let mut growth_violations = 0;
    let mut checked = Vec::new();
    for fam in ["TNPC_A", "TNPC_B", "TNPC_C", "B6Y_A", "B6Y_B"] {
        let ids: Vec<&InverterDesign> = ["+0%", "+30%", "+50%"]
            .iter()
            .filter_map(|suffix| designs.iter().find(|d| d.family == fam && d.id.ends_with(suffix)))
            .collect();
        let sets: Vec<Vec<bool>> = ids
            .iter()
            .map(|d| {
                let aux = d.modes[1];
                let m = maps.iter().find(|m| m.design_id == d.id).expect("map per multi-mode design");
                m.cells.iter().map(|c| c.feasible.contains(&aux)).collect()
            })
            .collect();
        let counts: Vec<usize> = sets.iter().map(|s| s.iter().filter(|x| **x).count()).collect();
        for w in sets.windows(2) {
            growth_violations += w[0].iter().zip(&w[1]).filter(|(a, b)| **a && !**b).count();
        }
        checked.push(format!("{fam} {counts:?}"));
    }
    let grid_ok = maps.iter().all(|m| m.speeds.len() == 41 && m.torques.len() == 41);
    let pass = violations == 0 && growth_violations == 0 && grid_ok && !maps.is_empty();
    report(
        8,
        pass,
        &format!(
            "{} maps, {cells} cells, {violations} argmin violations, {growth_violations} shrinking cells; auxiliary-mode cells {}",
            maps.len(),
            checked.join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_constant_power_cycle() {
    // 500 W for one hour while covering 36 km
    let mk = || PointEvaluation {
        speed: 1000.0,
        torque: 10.0,
        mode: Mode::TwoLevel,
        f_sw: 10e3,
        p_con: 100.0,
        p_sw: 50.0,
        p_inv: 150.0,
        p_mot_h: 50.0,
        p_mot_f: 300.0,
        p_tot: 500.0,
        delta_u: 1.0,
        switches: Vec::new(),
        electrical_ok: true,
        thermal_ok: true,
        ripple_ok: true,
        infeasibility: None,
    };
    let points: Vec<PointEvaluation> = (0..3600).map(|_| mk()).collect();
    let t = aggregate_cycle(points.iter().map(|e| (1.0, e)), 36_000.0, 3600.0).unwrap();
    let (de, pm) = (rel(t.delta_e, 0.5 / 36.0 * 100.0), rel(t.p_tot_mean, 500.0));
    let pass = de <= 1e-6 && pm <= 1e-6 && (t.delta_e - 1.3889).abs() < 5e-5;
    report(9, pass, &format!("delta_e {:.6} kWh/100km, P_tot,m {:.6} W", t.delta_e, t.p_tot_mean));
    assert!(pass);
}

#[test]
fn criterion_10_optimal_frequency() {
    let grid: Vec<f64> = (6..=18).map(|k| k as f64 * 1e3).collect();
    let mut rng = StdRng::seed_from_u64(10);
    let mut mismatches = 0;
    for _ in 0..50 {
        // a·f + b/f + c·sin(d·f) with random infeasible gaps
        let (a, b, c, d) =
            (rng.random_range(0.0..0.05), rng.random_range(0.0..5e7), rng.random_range(0.0..200.0), rng.random_range(0.0..1e-3));
        let gaps: Vec<bool> = grid.iter().map(|_| rng.random_bool(0.15)).collect();
        let loss = |f: f64| a * f + b / f + c * (d * f).sin();
        let got = argmin_grid(&grid, |f| {
            let k = grid.iter().position(|&g| g == f).unwrap();
            Ok((!gaps[k]).then(|| (loss(f), ())))
        })
        .unwrap()
        .map(|(f, l, _)| (f, l));
        let mut oracle: Option<(f64, f64)> = None;
        for (k, &f) in grid.iter().enumerate() {
            if !gaps[k] && oracle.is_none_or(|(_, l)| loss(f) < l) {
                oracle = Some((f, loss(f)));
            }
        }
        mismatches += usize::from(got != oracle);
    }
    let run = optimal_run();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in &run.out.results {
        let (a, _, b) = r.fsw_stats();
        lo = lo.min(a);
        hi = hi.max(b);
    }
    let band_ok = lo >= 6e3 && hi <= 18e3 && !run.out.results.is_empty();
    let pass = mismatches == 0 && band_ok;
    report(
        10,
        pass,
        &format!(
            "50 surfaces, {mismatches} mismatches; default WLTP run selects {:.0}..{:.0} Hz over {} designs",
            lo,
            hi,
            run.out.results.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_11_pareto_oracle_and_family_monotonicity() {
    let mut rng = StdRng::seed_from_u64(11);
    let points: Vec<ParetoPoint> = (0..1000)
        .map(|k| ParetoPoint {
            design_id: k.to_string(),
            family: "r".into(),
            area: rng.random_range(0..200) as f64,
            delta_e: rng.random_range(0..200) as f64 / 100.0,
            policy: "p".into(),
        })
        .collect();
    let front = pareto_front(&points);
    let mut got: Vec<usize> = front.front.iter().map(|p| p.design_id.parse().unwrap()).collect();
    got.sort();
    let brute: Vec<usize> = (0..points.len())
        .filter(|&i| {
            !points.iter().any(|q| {
                q.area <= points[i].area && q.delta_e <= points[i].delta_e && (q.area < points[i].area || q.delta_e < points[i].delta_e)
            })
        })
        .collect();
    let oracle_ok = got == brute && front.front.len() + front.dominated.len() == points.len();

    let run = fixed_run();
    let designs = &run.out.designs.designs;
    let mut breaks = Vec::new();
    let mut families: Vec<&str> = designs.iter().map(|d| d.family.as_str()).collect();
    families.dedup();
    for fam in &families {
        let mut series: Vec<(f64, f64)> = run
            .out
            .results
            .iter()
            .filter_map(|r| {
                let d = designs.iter().find(|d| d.id == r.design_id && d.family == *fam)?;
                // single-mode designs sit outside the area-factor series
                (d.modes.len() > 1).then_some((d.area_factor?, r.totals.delta_e))
            })
            .collect();
        series.sort_by(|a, b| a.0.total_cmp(&b.0));
        if series.windows(2).any(|w| w[1].1 > w[0].1) {
            breaks.push(fam.to_string());
        }
    }
    let pass = oracle_ok && breaks.is_empty();
    report(
        11,
        pass,
        &format!(
            "1000 points, front {} (oracle {}); Δe monotone in area factor for {} families{}",
            got.len(),
            brute.len(),
            families.len(),
            if breaks.is_empty() { String::new() } else { format!(", broken in {breaks:?}") }
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_12_end_to_end_scale() {
    let first = fixed_run();
    let second = timed_run(FswPolicy::Fixed(10e3), scratch().join("fixed_b"));
    let identical = bundle_files(&first.dir) == bundle_files(&second.dir);
    let opt = optimal_run();
    let threads = rayon::current_num_threads();
    let designs = first.out.designs.designs.len();
    let families = first.out.designs.families.len();
    let fixed_ok = first.elapsed < Duration::from_secs(15 * 60);
    let opt_ok = opt.elapsed < Duration::from_secs(60 * 60);
    let pass = identical && fixed_ok && opt_ok && families == 6;
    report(
        12,
        pass,
        &format!(
            "{families} families / {designs} designs on {threads} thread(s): fixed 10 kHz {:.0} s (rerun {:.0} s, {}), opt {:.0} s",
            first.elapsed.as_secs_f64(),
            second.elapsed.as_secs_f64(),
            if identical { "byte-identical" } else { "bundles differ" },
            opt.elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}
