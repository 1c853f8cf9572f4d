//! `traction`: size, evaluate and compare traction-inverter designs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use traction_core::config::Config;
use traction_core::partial::FswPolicy;
use traction_core::pipeline::{self, BundleWriter, Command, RunOutput};

#[derive(Parser, Debug)]
#[command(name = "traction", version, about = "Chip-area sizing and drive-cycle loss evaluation of traction inverters")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML configuration; built-in defaults when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory of the result bundle
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Switching-frequency policy: a frequency in Hz or `opt`
    #[arg(long, global = true, value_parser = parse_fsw)]
    fsw: Option<FswPolicy>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Accepted for interface stability; every run is deterministic
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Size every topology over the full-load envelope
    SizeFullLoad,
    /// Size, build design families and evaluate them over the drive cycle
    EvaluatePartialLoad,
    /// Size, build design families and draw their mode boundary maps
    BoundaryMap,
    /// Pareto fronts from a full evaluation, or from a CSV of points
    Pareto {
        /// CSV with design_id, family, area, delta_e and policy columns
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// The whole pipeline
    Run,
    /// Print the default configuration as TOML
    DefaultConfig,
}

fn parse_fsw(s: &str) -> std::result::Result<FswPolicy, String> {
    if s.eq_ignore_ascii_case("opt") {
        return Ok(FswPolicy::Optimal);
    }
    match s.parse::<f64>() {
        Ok(f) if f.is_finite() && f > 0.0 => Ok(FswPolicy::Fixed(f)),
        _ => Err(format!("expected a positive frequency in Hz or `opt`, got `{s}`")),
    }
}

fn load_config(g: &Global) -> Result<Config> {
    let mut cfg = match &g.config {
        Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => Config::standard(),
    };
    if let Some(policy) = g.fsw {
        cfg.evaluation.policy = policy;
    }
    Ok(cfg)
}

fn pareto_from_csv(input: &Path, out: &Path) -> Result<()> {
    let points = pipeline::read_pareto_points(input).with_context(|| format!("reading {}", input.display()))?;
    let set = pipeline::pareto_set(&points);
    let mut w = BundleWriter::create(out)?;
    pipeline::write_pareto(&mut w, &set)?;
    println!("{} points, {} on the overall front", points.len(), set.overall.front.len());
    for p in &set.overall.front {
        println!("  {:<28} {:>8.1} mm²  {:.4} kWh/100km", p.design_id, p.area, p.delta_e);
    }
    Ok(())
}

fn report(out: &RunOutput) {
    for f in &out.designs.families {
        println!("family {:<8} floor {:.3}  {} design(s)", f.name, f.floor, f.designs.len());
    }
    if out.results.is_empty() {
        for d in &out.designs.designs {
            println!("  {:<28} {:>8.1} mm²", d.id, d.total_area);
        }
    }
    for r in &out.results {
        let area = out.designs.designs.iter().find(|d| d.id == r.design_id).map_or(f64::NAN, |d| d.total_area);
        let (lo, mean, hi) = r.fsw_stats();
        println!(
            "  {:<28} {:>8.1} mm²  {:.4} kWh/100km  f_sw {:.0}/{:.0}/{:.0} Hz",
            r.design_id, area, r.totals.delta_e, lo, mean, hi
        );
    }
    if !out.maps.is_empty() {
        println!("{} boundary map(s)", out.maps.len());
    }
    if let Some(p) = &out.pareto {
        let ids: Vec<&str> = p.overall.front.iter().map(|x| x.design_id.as_str()).collect();
        println!("Pareto front: {}", ids.join(", "));
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let g = &cli.global;
    if let Some(n) = g.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    if g.seed.is_some() {
        info!("--seed has no effect: the pipeline is deterministic");
    }
    let command = match &cli.command {
        Cmd::DefaultConfig => {
            print!("{}", Config::standard().to_toml()?);
            return Ok(());
        }
        Cmd::Pareto { input: Some(input) } => return pareto_from_csv(input, &g.out),
        Cmd::Pareto { input: None } => Command::Pareto,
        Cmd::SizeFullLoad => Command::SizeFullLoad,
        Cmd::EvaluatePartialLoad => Command::EvaluatePartialLoad,
        Cmd::BoundaryMap => Command::BoundaryMap,
        Cmd::Run => Command::Run,
    };
    let cfg = load_config(g)?;
    let t0 = Instant::now();
    let out = pipeline::run(cfg, command, &g.out)?;
    report(&out);
    println!("bundle written to {} in {:.1} s", g.out.display(), t0.elapsed().as_secs_f64());
    Ok(())
}
