//! The end-to-end run: configuration, cycle, full-load sizing, design
//! families, cycle evaluation, boundary maps and Pareto fronts, persisted as
//! a deterministic bundle of CSV, JSON and gnuplot data files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::explorer::{build_designs, pareto_front, FamilySummary, ParetoFront, ParetoPoint, SizingSet};
use crate::pwm::Mode;
use crate::partial::{linspace, CycleResult, Evaluator, FswPolicy, ModeBoundaryMap};
use crate::sizing::InverterDesign;
use crate::system::SystemModel;
use crate::vehicle::{clamp_to_envelope, cycle_to_operating_points, full_load_envelope, DriveCycle, OperatingPoint};

/// What a run produces; later steps include the earlier ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SizeFullLoad,
    EvaluatePartialLoad,
    BoundaryMap,
    Pareto,
    Run,
}

impl Command {
    fn evaluates(self) -> bool {
        matches!(self, Command::EvaluatePartialLoad | Command::Pareto | Command::Run)
    }

    fn maps(self) -> bool {
        matches!(self, Command::BoundaryMap | Command::Run)
    }

    fn pareto(self) -> bool {
        matches!(self, Command::Pareto | Command::Run)
    }
}

/// A validated configuration with its cycle turned into operating points.
pub struct Prepared {
    pub config: Config,
    pub hash: String,
    pub system: Arc<SystemModel>,
    pub cycle: DriveCycle,
    pub points: Vec<OperatingPoint>,
    /// Cycle points moved onto the machine envelope
    pub clamped: usize,
}

pub fn prepare(config: Config) -> Result<Prepared> {
    let system = config.validate().map_err(|e| e.in_stage("config"))?;
    let hash = config.hash().map_err(|e| e.in_stage("config"))?;
    let cycle = config.load_cycle().map_err(|e| e.in_stage("cycle"))?;
    let mut points = cycle_to_operating_points(&cycle, &system.vehicle);
    let clamped = clamp_to_envelope(&mut points, &system.motor_reference);
    Ok(Prepared { config, hash, system: Arc::new(system), cycle, points, clamped })
}

pub struct Designs {
    pub sizing: SizingSet,
    pub designs: Vec<InverterDesign>,
    pub families: Vec<FamilySummary>,
}

pub fn size_designs(p: &Prepared) -> Result<Designs> {
    let envelope = full_load_envelope(&p.system.motor_reference, p.config.sizing.envelope_points);
    let (sizing, designs, families) =
        build_designs(&p.system, &envelope, &p.config.families).map_err(|e| e.in_stage("sizing"))?;
    Ok(Designs { sizing, designs, families })
}

/// Designs grouped by family, keeping their order.
fn by_family(designs: &[InverterDesign]) -> Vec<Vec<&InverterDesign>> {
    let mut groups: Vec<Vec<&InverterDesign>> = Vec::new();
    for d in designs {
        match groups.iter_mut().find(|g| g[0].family == d.family) {
            Some(g) => g.push(d),
            None => groups.push(vec![d]),
        }
    }
    groups
}

/// Evaluates every design over the cycle. Families run in parallel, each with
/// its own analysis cache, dropped when the family is done.
pub fn evaluate_designs(p: &Prepared, designs: &[InverterDesign], policy: FswPolicy) -> Result<Vec<CycleResult>> {
    let (distance, duration) = (p.cycle.distance(), p.cycle.duration());
    let groups = by_family(designs);
    let results: Vec<Vec<CycleResult>> = groups
        .par_iter()
        .map(|group| {
            let ev = Evaluator::new(Arc::clone(&p.system));
            group
                .iter()
                .map(|d| {
                    let r = ev.evaluate_cycle(d, &p.points, policy, distance, duration)?;
                    info!("{}: delta_e = {:.4} kWh/100km", d.id, r.totals.delta_e);
                    Ok(r)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("evaluate"))?;
    Ok(results.into_iter().flatten().collect())
}

/// Frequency the boundary maps are drawn at.
pub fn map_frequency(cfg: &Config) -> f64 {
    match cfg.evaluation.policy {
        FswPolicy::Fixed(f) => f,
        FswPolicy::Optimal => cfg.switching.design_f_sw,
    }
}

/// Boundary maps of every design with more than one mode, over speeds up to
/// `n_max` and torques of both signs.
pub fn boundary_maps(p: &Prepared, designs: &[InverterDesign]) -> Result<Vec<ModeBoundaryMap>> {
    let motor = &p.system.motor_reference;
    let settings = &p.config.boundary_map;
    let speeds = linspace(0.0, motor.n_max, settings.speed_points);
    let torques = linspace(-motor.m_max, motor.m_max, settings.torque_points);
    let f_sw = map_frequency(&p.config);
    let multi: Vec<InverterDesign> = designs.iter().filter(|d| d.modes.len() > 1).cloned().collect();
    let maps: Vec<Vec<ModeBoundaryMap>> = by_family(&multi)
        .par_iter()
        .map(|group| {
            let ev = Evaluator::new(Arc::clone(&p.system));
            group.iter().map(|d| ev.mode_boundary_map(d, &speeds, &torques, f_sw)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("boundary-map"))?;
    Ok(maps.into_iter().flatten().collect())
}

pub fn pareto_points(designs: &[InverterDesign], results: &[CycleResult]) -> Vec<ParetoPoint> {
    results
        .iter()
        .filter_map(|r| {
            let d = designs.iter().find(|d| d.id == r.design_id)?;
            Some(ParetoPoint {
                design_id: d.id.clone(),
                family: d.family.clone(),
                area: d.total_area,
                delta_e: r.totals.delta_e,
                policy: r.policy.tag(),
            })
        })
        .collect()
}

/// Fronts over all designs and within each family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoSet {
    pub overall: ParetoFront,
    pub families: Vec<(String, ParetoFront)>,
}

pub fn pareto_set(points: &[ParetoPoint]) -> ParetoSet {
    let mut names: Vec<&str> = Vec::new();
    for p in points {
        if !names.contains(&p.family.as_str()) {
            names.push(&p.family);
        }
    }
    let families = names
        .iter()
        .map(|n| {
            let members: Vec<ParetoPoint> = points.iter().filter(|p| p.family == *n).cloned().collect();
            (n.to_string(), pareto_front(&members))
        })
        .collect();
    ParetoSet { overall: pareto_front(points), families }
}

/// Everything a run computed.
pub struct RunOutput {
    pub designs: Designs,
    pub results: Vec<CycleResult>,
    pub maps: Vec<ModeBoundaryMap>,
    pub pareto: Option<ParetoSet>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleInfo {
    pub name: String,
    pub samples: usize,
    pub duration_s: f64,
    pub distance_m: f64,
    pub clamped_points: usize,
}

/// Index of a bundle. `complete` stays false until every file is written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub complete: bool,
    pub config_hash: String,
    pub policy: String,
    pub cycle: CycleInfo,
    pub designs: Vec<String>,
    pub files: Vec<String>,
}

/// Writes files under one directory and remembers their relative paths.
pub struct BundleWriter {
    root: PathBuf,
    files: Vec<String>,
}

impl BundleWriter {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, rel: &str) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        Ok(path)
    }

    fn record(&mut self, rel: &str) {
        if !self.files.iter().any(|f| f == rel) {
            self.files.push(rel.to_string());
        }
    }

    pub fn text(&mut self, rel: &str, body: &str) -> Result<()> {
        let path = self.path(rel)?;
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        self.record(rel);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value).map_err(|e| Error::Serialization(e.to_string()))?;
        body.push('\n');
        self.text(rel, &body)
    }

    /// CSV from a header and string rows.
    pub fn csv(&mut self, rel: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(header).map_err(ser)?;
        for r in rows {
            w.write_record(r).map_err(ser)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
        let path = self.path(rel)?;
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.record(rel);
        Ok(())
    }

    pub fn files(&self) -> Vec<String> {
        let mut f = self.files.clone();
        f.sort();
        f
    }
}

/// File-name form of a design id: `TNPC_A(2L/3L)+13%` becomes `TNPC_A_2L-3L_p13`.
pub fn slug(id: &str) -> String {
    let mut out = String::new();
    for c in id.chars() {
        match c {
            c if c.is_ascii_alphanumeric() || c == '-' || c == '_' => out.push(c),
            '/' => out.push('-'),
            '+' => out.push_str("_p"),
            '(' => out.push('_'),
            _ => {}
        }
    }
    out
}

fn s(v: f64) -> String {
    v.to_string()
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

/// Runs `command` on `config` and writes the bundle to `out`.
///
/// Nothing is written unless the configuration and cycle are valid.
pub fn run(config: Config, command: Command, out: &Path) -> Result<RunOutput> {
    let p = prepare(config)?;
    let mut w = BundleWriter::create(out).map_err(|e| e.in_stage("write"))?;
    let mut manifest = Manifest {
        tool: "traction".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command,
        complete: false,
        config_hash: p.hash.clone(),
        policy: p.config.evaluation.policy.tag(),
        cycle: CycleInfo {
            name: p.cycle.name.clone(),
            samples: p.cycle.samples.len(),
            duration_s: p.cycle.duration(),
            distance_m: p.cycle.distance(),
            clamped_points: p.clamped,
        },
        designs: Vec::new(),
        files: Vec::new(),
    };
    w.json("manifest.json", &manifest)?;
    w.text("config.toml", &p.config.to_toml()?)?;

    info!("sizing {} families", p.config.families.len());
    let designs = size_designs(&p)?;
    manifest.designs = designs.designs.iter().map(|d| d.id.clone()).collect();
    write_sizing(&mut w, &designs).map_err(|e| e.in_stage("write"))?;

    let mut results = Vec::new();
    if command.evaluates() {
        info!("evaluating {} designs under {}", designs.designs.len(), p.config.evaluation.policy.tag());
        results = evaluate_designs(&p, &designs.designs, p.config.evaluation.policy)?;
        write_results(&mut w, &designs.designs, &results).map_err(|e| e.in_stage("write"))?;
    }
    let mut maps = Vec::new();
    if command.maps() && p.config.boundary_map.enabled {
        info!("drawing boundary maps");
        maps = boundary_maps(&p, &designs.designs)?;
        write_maps(&mut w, &maps, &designs.designs).map_err(|e| e.in_stage("write"))?;
    }
    let mut pareto = None;
    if command.pareto() {
        let set = pareto_set(&pareto_points(&designs.designs, &results));
        write_pareto(&mut w, &set).map_err(|e| e.in_stage("write"))?;
        pareto = Some(set);
    }

    manifest.complete = true;
    manifest.files = w.files();
    manifest.files.retain(|f| f != "manifest.json");
    w.json("manifest.json", &manifest)?;
    Ok(RunOutput { designs, results, maps, pareto })
}

fn write_sizing(w: &mut BundleWriter, d: &Designs) -> Result<()> {
    for (key, (design, report)) in &d.sizing.entries {
        let mut cols = header(&["index", "speed_rpm", "torque_nm", "f_sw_hz", "delta_u_v", "ripple_ok", "total_area_mm2", "p_sw_over_p_con"]);
        cols.extend(design.switches.iter().map(|s| format!("area_{}", s.id)));
        let rows: Vec<Vec<String>> = report
            .points
            .iter()
            .map(|pt| {
                let mut r = vec![
                    pt.index.to_string(),
                    s(pt.speed),
                    s(pt.torque),
                    s(pt.f_sw),
                    s(pt.delta_u),
                    pt.ripple_ok.to_string(),
                    s(pt.total_area()),
                    s(pt.p_sw_over_p_con),
                ];
                r.extend(design.switches.iter().map(|sw| {
                    pt.switches.iter().find(|x| x.id == sw.id).map(|x| s(x.area)).unwrap_or_default()
                }));
                r
            })
            .collect();
        w.csv(&format!("sizing/{}_points.csv", slug(key)), &cols, &rows)?;
        let ripple: Vec<Vec<String>> = report.ripple.curve.iter().map(|(f, du)| vec![s(*f), s(*du)]).collect();
        w.csv(&format!("sizing/{}_ripple.csv", slug(key)), &header(&["f_sw_hz", "delta_u_v"]), &ripple)?;
    }
    let summary: Vec<_> = d.sizing.entries.values().collect();
    w.json("sizing/summary.json", &summary)?;
    w.json("families.json", &d.families)?;
    w.json("designs.json", &d.designs)?;
    let rows: Vec<Vec<String>> = d
        .designs
        .iter()
        .map(|x| {
            vec![
                x.id.clone(),
                x.family.clone(),
                x.topology.to_string(),
                x.variant.to_string(),
                x.modes.iter().map(|m| m.to_string()).collect::<Vec<_>>().join("/"),
                x.area_factor.map(s).unwrap_or_default(),
                s(x.total_area),
                x.switches.iter().map(|sw| format!("{}={}", sw.id, sw.area)).collect::<Vec<_>>().join(";"),
            ]
        })
        .collect();
    w.csv(
        "designs.csv",
        &header(&["design_id", "family", "topology", "variant", "modes", "area_factor", "total_area_mm2", "switch_areas_mm2"]),
        &rows,
    )
}

fn write_results(w: &mut BundleWriter, designs: &[InverterDesign], results: &[CycleResult]) -> Result<()> {
    let point_cols = header(&[
        "index", "weight_s", "speed_rpm", "torque_nm", "mode", "f_sw_hz", "p_con_w", "p_sw_w", "p_inv_w", "p_mot_h_w",
        "p_mot_f_w", "p_tot_w", "delta_u_v", "t_j_max_c",
    ]);
    let mut summary = Vec::new();
    for r in results {
        let tag = r.policy.tag();
        let rows: Vec<Vec<String>> = r
            .points
            .iter()
            .map(|cp| {
                let e = &cp.evaluation;
                vec![
                    cp.index.to_string(),
                    s(cp.weight),
                    s(e.speed),
                    s(e.torque),
                    e.mode.to_string(),
                    s(e.f_sw),
                    s(e.p_con),
                    s(e.p_sw),
                    s(e.p_inv),
                    s(e.p_mot_h),
                    s(e.p_mot_f),
                    s(e.p_tot),
                    s(e.delta_u),
                    s(e.t_j_max()),
                ]
            })
            .collect();
        w.csv(&format!("partial/{tag}/{}.csv", slug(&r.design_id)), &point_cols, &rows)?;
        let area = designs.iter().find(|d| d.id == r.design_id).map(|d| d.total_area).unwrap_or(f64::NAN);
        let family = designs.iter().find(|d| d.id == r.design_id).map(|d| d.family.clone()).unwrap_or_default();
        let t = &r.totals;
        let (f_lo, f_mean, f_hi) = r.fsw_stats();
        let shares = r.mode_shares().iter().map(|(m, x)| format!("{m}={x}")).collect::<Vec<_>>().join(";");
        summary.push(vec![
            r.design_id.clone(),
            family,
            tag,
            s(area),
            s(t.delta_e),
            s(t.p_tot_mean),
            s(t.e_tot),
            s(t.e_con),
            s(t.e_sw),
            s(t.e_mot_h),
            s(t.e_mot_f),
            s(f_lo),
            s(f_mean),
            s(f_hi),
            shares,
        ]);
    }
    w.csv(
        "partial/summary.csv",
        &header(&[
            "design_id", "family", "policy", "total_area_mm2", "delta_e_kwh_per_100km", "p_tot_mean_w", "e_tot_j", "e_con_j",
            "e_sw_j", "e_mot_h_j", "e_mot_f_j", "f_sw_min_hz", "f_sw_mean_hz", "f_sw_max_hz", "mode_shares",
        ]),
        &summary,
    )?;
    let totals: Vec<_> = results.iter().map(|r| (&r.design_id, r.policy, &r.totals)).collect();
    w.json("partial/summary.json", &totals)
}

/// Gnuplot `splot ... with image` layout: one block per torque row.
pub fn map_data(map: &ModeBoundaryMap, modes: &[Mode]) -> String {
    let mut out = String::new();
    let names: Vec<String> = modes.iter().enumerate().map(|(k, m)| format!("{k}={m}")).collect();
    let _ = writeln!(out, "# design {} at f_sw = {} Hz", map.design_id, map.f_sw);
    let _ = writeln!(out, "# best mode codes: {} (-1: none or outside envelope)", names.join(", "));
    let _ = writeln!(out, "# speed_rpm torque_nm best_mode loss_difference_w feasible_modes in_envelope ripple_ok");
    for (i, _) in map.torques.iter().enumerate() {
        for (j, _) in map.speeds.iter().enumerate() {
            let c = map.cell(i, j);
            let best = c.best.and_then(|b| modes.iter().position(|m| *m == b)).map_or(-1, |k| k as i64);
            let diff = c.loss_difference.map_or_else(|| "NaN".to_string(), s);
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {}",
                s(c.speed),
                s(c.torque),
                best,
                diff,
                c.feasible.len(),
                u8::from(c.in_envelope),
                u8::from(c.ripple_ok)
            );
        }
        out.push('\n');
    }
    out
}

fn write_maps(w: &mut BundleWriter, maps: &[ModeBoundaryMap], designs: &[InverterDesign]) -> Result<()> {
    for m in maps {
        let modes = designs.iter().find(|d| d.id == m.design_id).map(|d| d.modes.clone()).unwrap_or_default();
        w.text(&format!("maps/{}.dat", slug(&m.design_id)), &map_data(m, &modes))?;
    }
    Ok(())
}

fn pareto_rows(front: &ParetoFront) -> Vec<Vec<String>> {
    let on = front.front.iter().map(|p| (p, true, String::new()));
    let off = front.dominated.iter().map(|d| (&d.point, false, d.dominated_by.clone()));
    on.chain(off)
        .map(|(p, on_front, by)| {
            vec![p.design_id.clone(), p.family.clone(), s(p.area), s(p.delta_e), p.policy.clone(), on_front.to_string(), by]
        })
        .collect()
}

const PARETO_COLS: [&str; 7] = ["design_id", "family", "area_mm2", "delta_e_kwh_per_100km", "policy", "on_front", "dominated_by"];

pub fn write_pareto(w: &mut BundleWriter, set: &ParetoSet) -> Result<()> {
    w.csv("pareto/overall.csv", &header(&PARETO_COLS), &pareto_rows(&set.overall))?;
    for (name, f) in &set.families {
        w.csv(&format!("pareto/family_{}.csv", slug(name)), &header(&PARETO_COLS), &pareto_rows(f))?;
    }
    w.json("pareto/fronts.json", set)
}

/// Reads Pareto points from a CSV with `design_id,family,area,delta_e,policy`
/// columns, in any order; the area and Δe columns may carry unit suffixes.
pub fn read_pareto_points(path: &Path) -> Result<Vec<ParetoPoint>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Cycle(format!("{}: {e}", path.display())))?;
    let head = r.headers().map_err(|e| Error::Serialization(e.to_string()))?.clone();
    let find = |name: &str| head.iter().position(|h| h == name || h.starts_with(&format!("{name}_")));
    let col = |name: &str| find(name).ok_or_else(|| Error::Config { key: "input".into(), reason: format!("missing column `{name}`") });
    let (id, area, de) = (col("design_id")?, col("area")?, col("delta_e")?);
    let (family, policy) = (find("family"), find("policy"));
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Serialization(e.to_string()))?;
        let num = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Config { key: format!("input row {}", k + 2), reason: "area and delta_e must be finite numbers".into() })
        };
        out.push(ParetoPoint {
            design_id: rec.get(id).unwrap_or_default().to_string(),
            family: family.and_then(|c| rec.get(c)).unwrap_or_default().to_string(),
            area: num(area)?,
            delta_e: num(de)?,
            policy: policy.and_then(|c| rec.get(c)).unwrap_or_default().to_string(),
        });
    }
    if out.is_empty() {
        return Err(Error::Config { key: "input".into(), reason: "no points".into() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs_are_file_safe() {
        assert_eq!(slug("TNPC_A(2L/3L)+13%"), "TNPC_A_2L-3L_p13");
        assert_eq!(slug("B6Y_B(H)"), "B6Y_B_H");
        assert_eq!(slug("B6"), "B6");
    }

    #[test]
    fn family_grouping_keeps_order() {
        let mk = |id: &str, fam: &str| {
            InverterDesign::new(id, fam, crate::pwm::Topology::B6, crate::pwm::Variant::A, vec![crate::pwm::Mode::TwoLevel], vec![])
        };
        let ds = vec![mk("a", "x"), mk("b", "y"), mk("c", "x")];
        let g = by_family(&ds);
        let ids: Vec<Vec<&str>> = g.iter().map(|g| g.iter().map(|d| d.id.as_str()).collect()).collect();
        assert_eq!(ids, vec![vec!["a", "c"], vec!["b"]]);
    }

    #[test]
    fn pareto_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let pts = vec![
            ParetoPoint { design_id: "a".into(), family: "f".into(), area: 100.0, delta_e: 5.0, policy: "p".into() },
            ParetoPoint { design_id: "b".into(), family: "f".into(), area: 150.0, delta_e: 6.0, policy: "p".into() },
        ];
        let mut w = BundleWriter::create(dir.path()).unwrap();
        write_pareto(&mut w, &pareto_set(&pts)).unwrap();
        let back = read_pareto_points(&dir.path().join("pareto/overall.csv")).unwrap();
        assert_eq!(back.len(), 2);
        assert!(back.iter().all(|p| pts.contains(p)));
    }
}
