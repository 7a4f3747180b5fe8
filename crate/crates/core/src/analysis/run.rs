//! Experiment dispatch: runs one command and writes CSV outputs plus a JSON manifest.

use super::config::SimConfig;
use super::{envelope, envelope_check, fit_decay_rate, lln_experiment, sup_series};
use crate::error::{Error, Result};
use crate::flux_solver::{fmt17, solve_flux, solve_with_rate, FluxHistory, HistoryHeader, Nodes, Problem};
use crate::geometry::{BoundaryPoint, Dim};
use crate::montecarlo::{empirical_flux, AdvanceOptions, FluxTally, ParticleEnsemble};
use crate::transport::{field_snapshot, total_mass};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

/// Tail events a cell needs before its ratio counts as resolved.
pub const LLN_MIN_HITS: f64 = 10.0;

/// Experiment kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Steady,
    Flux,
    Transport,
    Mc,
    Damped,
    Rates,
    Lln,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Steady,
        Command::Flux,
        Command::Transport,
        Command::Mc,
        Command::Damped,
        Command::Rates,
        Command::Lln,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Steady => "steady",
            Command::Flux => "flux",
            Command::Transport => "transport",
            Command::Mc => "mc",
            Command::Damped => "damped",
            Command::Rates => "rates",
            Command::Lln => "lln",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::config("command", format!("unknown command `{s}`")))
    }
}

/// File written by a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Path relative to the output directory.
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
    /// True when the file was reused from an earlier run.
    #[serde(default)]
    pub reused: bool,
}

/// Run record written next to the outputs as `<command>.manifest.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: Command,
    pub package: String,
    pub version: String,
    pub seed: u64,
    pub config: SimConfig,
    pub status: String,
    /// Set when the run failed after writing some outputs.
    pub partial: bool,
    pub error: Option<String>,
    pub wall_clock_seconds: f64,
    pub results: Value,
    pub outputs: Vec<OutputFile>,
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Writer {
    dir: PathBuf,
    outputs: Vec<OutputFile>,
}

impl Writer {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.outputs.push(OutputFile {
            file: name.into(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
            reused: false,
        });
        Ok(())
    }

    fn csv(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.put(name, &buf)
    }
}

/// Runs `command` and writes its outputs and manifest into `out`.
pub fn run(command: Command, config: &SimConfig, out: &Path) -> Result<Manifest> {
    config.validate()?;
    std::fs::create_dir_all(out)?;
    let start = Instant::now();
    let mut writer = Writer { dir: out.to_path_buf(), outputs: Vec::new() };
    let outcome = dispatch(command, config, &mut writer);
    let (status, error, results) = match &outcome {
        Ok(v) => ("ok".to_string(), None, v.clone()),
        Err(e) => ("failed".to_string(), Some(e.to_string()), Value::Null),
    };
    let manifest = Manifest {
        command,
        package: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: config.seed,
        config: config.clone(),
        status,
        partial: outcome.is_err() && !writer.outputs.is_empty(),
        error,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        results,
        outputs: writer.outputs,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(out.join(format!("{command}.manifest.json")), text)?;
    outcome.map(|_| manifest)
}

fn dispatch(command: Command, cfg: &SimConfig, w: &mut Writer) -> Result<Value> {
    let problem = cfg.problem()?;
    match command {
        Command::Steady => steady(cfg, &problem, w),
        Command::Flux => {
            let h = obtain_flux(cfg, &problem, w, "flux", None)?;
            Ok(json!({
                "steps": h.steps(),
                "residual": h.residual,
                "sup": h.sup(),
                "limit_flux": problem.limit_flux(),
            }))
        }
        Command::Transport => transport(cfg, &problem, w),
        Command::Mc => mc(cfg, &problem, w),
        Command::Damped => {
            let model = cfg
                .damping_model()?
                .ok_or_else(|| Error::config("damping", "the damped command needs a [damping] section"))?;
            if !model.is_constant() {
                return Err(Error::VelocityDependentDamping { p_nu: model.exponent });
            }
            let h = obtain_flux(cfg, &problem, w, "damped_flux", Some(model.nu0 / model.kappa))?;
            Ok(json!({ "rate": model.nu0 / model.kappa, "residual": h.residual, "sup": h.sup() }))
        }
        Command::Rates => rates(cfg, &problem, w),
        Command::Lln => {
            let table = lln_experiment(&cfg.lln, problem.dim(), cfg.seed)?;
            w.csv("lln.csv", |b| table.write_csv(b))?;
            Ok(json!({
                "max_ratio": table.max_ratio(),
                "max_resolved_ratio": table.max_resolved_ratio(LLN_MIN_HITS),
                "rows": table.rows.len(),
                "trials": table.trials,
            }))
        }
    }
}

fn steady(cfg: &SimConfig, problem: &Problem, w: &mut Writer) -> Result<Value> {
    let s = &problem.steady;
    let nodes = Nodes::for_dim(problem.dim(), cfg.grid.n_theta);
    let mut flux = Vec::with_capacity(nodes.len());
    w.csv("steady.csv", |b| {
        writeln!(b, "index,coordinate,temperature,boundary_flux")?;
        for i in 0..nodes.len() {
            let y = nodes.point(i);
            let coord = match y {
                BoundaryPoint::Wall(wall) => wall.position::<f64>(),
                BoundaryPoint::Circle(theta) => theta,
            };
            let j = s.boundary_flux(y);
            flux.push(j);
            writeln!(b, "{},{},{},{}", i, fmt17(coord), fmt17(s.profile.at(y)), fmt17(j))?;
        }
        Ok(())
    })?;
    let hi = flux.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = flux.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(json!({
        "c_s": s.c_s,
        "steady_flux": 1.0 / s.c_s,
        "boundary_flux_variation": hi - lo,
        "average_density": s.average_density(),
        "series_terms": s.terms(),
    }))
}

/// Cache key of a flux solve: everything that determines the history.
fn flux_key(cfg: &SimConfig, rate: Option<f64>) -> String {
    let key = json!({
        "dim": cfg.dim,
        "alpha": cfg.alpha,
        "profile": cfg.profile,
        "initial": cfg.initial,
        "grid": cfg.grid,
        "steady_series_tol": cfg.steady_series_tol,
        "rate": rate,
    });
    sha256_hex(key.to_string().as_bytes())
}

/// Reuses `<stem>.csv` when its header records the same key and content hash,
/// otherwise solves and writes it.
fn obtain_flux(
    cfg: &SimConfig,
    problem: &Problem,
    w: &mut Writer,
    stem: &str,
    rate: Option<f64>,
) -> Result<FluxHistory> {
    let key = flux_key(cfg, rate);
    let (csv_name, json_name) = (format!("{stem}.csv"), format!("{stem}.json"));
    if let Some(h) = cached_flux(&w.dir, &csv_name, &json_name, &key)? {
        for name in [&csv_name, &json_name] {
            let bytes = std::fs::read(w.dir.join(name))?;
            w.outputs.push(OutputFile {
                file: name.clone(),
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
                reused: true,
            });
        }
        return Ok(h);
    }
    let history = match rate {
        None => solve_flux(problem, &cfg.grid)?,
        Some(r) => solve_with_rate(problem, &cfg.grid, r)?,
    };
    let mut csv = Vec::new();
    history.write_csv(&mut csv)?;
    let header = history.header(json!({ "key": key, "csv_sha256": sha256_hex(&csv) }));
    w.put(&csv_name, &csv)?;
    let text = serde_json::to_string_pretty(&header).map_err(|e| Error::Parse(e.to_string()))?;
    w.put(&json_name, text.as_bytes())?;
    Ok(history)
}

fn cached_flux(dir: &Path, csv_name: &str, json_name: &str, key: &str) -> Result<Option<FluxHistory>> {
    let (csv_path, json_path) = (dir.join(csv_name), dir.join(json_name));
    if !csv_path.exists() || !json_path.exists() {
        return Ok(None);
    }
    let Ok(header) = serde_json::from_slice::<HistoryHeader>(&std::fs::read(&json_path)?) else {
        return Ok(None);
    };
    let csv = std::fs::read(&csv_path)?;
    if header.config["key"] != key || header.config["csv_sha256"] != sha256_hex(&csv) {
        return Ok(None);
    }
    let dim = Dim::from_value(header.dim as usize)?;
    let mut h = FluxHistory::read_csv(csv.as_slice(), dim, header.nodes, header.dt)?;
    if h.steps() + 1 != header.levels {
        return Ok(None);
    }
    h.residual = header.residual;
    Ok(Some(h))
}

/// Snapshot points: interior midpoints (slab) or rings of eight points (disk).
fn snapshot_points(dim: Dim, n: usize) -> Vec<[f64; 2]> {
    match dim {
        Dim::One => (0..n).map(|i| [-1.0 + 2.0 * (i as f64 + 0.5) / n as f64, 0.0]).collect(),
        Dim::Two => {
            let mut pts = vec![[0.0, 0.0]];
            for k in 1..n {
                let r = k as f64 / n as f64;
                for a in 0..8 {
                    let th = PI * a as f64 / 4.0;
                    pts.push([r * th.cos(), r * th.sin()]);
                }
            }
            pts
        }
    }
}

fn transport(cfg: &SimConfig, problem: &Problem, w: &mut Writer) -> Result<Value> {
    let times = cfg.transport_times()?;
    let history = obtain_flux(cfg, problem, w, "flux", None)?;
    let spec = &cfg.transport;
    let points = snapshot_points(problem.dim(), spec.points);
    let mut snapshots = Vec::new();
    let mut masses = Vec::new();
    for &t in times {
        snapshots.push(field_snapshot(problem, &history, t, &points, &spec.quadrature)?);
        masses.push(total_mass(problem, &history, t, &spec.quadrature, spec.mass_order)?);
    }
    w.csv("fields.csv", |b| {
        writeln!(b, "t,x,y,density,u,v,temperature")?;
        for s in &snapshots {
            for i in 0..s.points.len() {
                let row = [
                    s.points[i][0],
                    s.points[i][1],
                    s.density[i],
                    s.velocity[i][0],
                    s.velocity[i][1],
                    s.temperature[i],
                ];
                let cols: Vec<String> = std::iter::once(s.t).chain(row).map(fmt17).collect();
                writeln!(b, "{}", cols.join(","))?;
            }
        }
        Ok(())
    })?;
    w.csv("mass.csv", |b| {
        writeln!(b, "t,average_density")?;
        for (t, m) in times.iter().zip(&masses) {
            writeln!(b, "{},{}", fmt17(*t), fmt17(*m))?;
        }
        Ok(())
    })?;
    let rho = problem.rho_star();
    let drift = masses.iter().map(|m| (m - rho).abs() / rho).fold(0.0, f64::max);
    Ok(json!({ "times": times, "average_density": masses, "max_relative_mass_drift": drift }))
}

fn mc(cfg: &SimConfig, problem: &Problem, w: &mut Writer) -> Result<Value> {
    let spec = &cfg.mc;
    let dim = problem.dim();
    let bins = (cfg.grid.t_max / spec.time_bin).round().max(1.0) as usize;
    let damping = cfg.damping_model()?;
    let options = AdvanceOptions { killing: cfg.damping.is_some_and(|d| d.killing) };
    let mut ensemble = ParticleEnsemble::new(problem, spec.particles, cfg.seed)?;
    let w0 = ensemble.weight_sum();
    let mut tally = FluxTally::new(dim, spec.boundary_bins, 0.0, spec.time_bin, bins)?;
    let mut hits = 0;
    let mut killed = 0;
    for k in 1..=bins {
        let stats = ensemble.advance(
            &problem.steady.profile,
            problem.alpha(),
            tally.time_edge(k),
            damping.as_ref(),
            options,
            Some(&mut tally),
        )?;
        hits += stats.wall_hits;
        killed += stats.killed;
    }
    let flux = empirical_flux(&tally);
    w.csv("mc_flux.csv", |b| flux.write_csv(b))?;
    let density = ensemble.density_profile(spec.density_bins)?;
    w.csv("mc_density.csv", |b| {
        writeln!(b, "lower,upper,density,std_error")?;
        for i in 0..density.density.len() {
            let row = [density.edges[i], density.edges[i + 1], density.density[i], density.std_error[i]];
            writeln!(b, "{}", row.map(fmt17).join(","))?;
        }
        Ok(())
    })?;
    Ok(json!({
        "particles": spec.particles,
        "initial_weight": w0,
        "final_weight": ensemble.weight_sum(),
        "wall_hits": hits,
        "killed": killed,
        "limit_flux": problem.limit_flux(),
    }))
}

fn rates(cfg: &SimConfig, problem: &Problem, w: &mut Writer) -> Result<Value> {
    let window = cfg.rate_window()?;
    let history = obtain_flux(cfg, problem, w, "flux", None)?;
    let dev = history.deviation(problem.rho_star(), problem.steady.c_s);
    let series = sup_series(&dev);
    let (alpha, dim) = (problem.alpha(), problem.dim());
    w.csv("rates.csv", |b| {
        writeln!(b, "t,sup_deviation,envelope")?;
        for &(t, v) in &series {
            writeln!(b, "{},{},{}", fmt17(t), fmt17(v), fmt17(envelope(alpha, dim, t)))?;
        }
        Ok(())
    })?;
    let fit = fit_decay_rate(&series, window)?;
    let env = envelope_check(&series, alpha, dim);
    Ok(json!({ "fit": fit, "envelope": env }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
        assert!("nope".parse::<Command>().is_err());
    }

    #[test]
    fn sha_matches_known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn snapshot_points_stay_inside() {
        for dim in [Dim::One, Dim::Two] {
            for p in snapshot_points(dim, 5) {
                assert!(p[0].hypot(p[1]) < 1.0);
            }
        }
    }
}
