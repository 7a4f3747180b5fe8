//! Particle simulation of the stochastic billiard: free flight with Maxwell-type
//! wall interaction and optional collision damping.

use crate::error::{Error, Result};
use crate::flux_solver::{fmt17, InitialData, Problem};
use crate::geometry::{wrap_angle, Dim, DomainGeometry};
use crate::kernels::{sample_diffuse_velocity, GAS_CONSTANT};
use crate::rng::{resume_rng, stream_rng, StreamRng};
use crate::steady_state::{SteadyState, TemperatureProfile};
use crate::transport::DampingModel;
use rand::distr::{Distribution, Open01, StandardUniform};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// Particles per parallel work unit; partial tallies are merged in chunk order.
pub const CHUNK: usize = 4096;

/// Radius beyond which a particle is reported as escaped.
const ESCAPE_TOL: f64 = 1e-9;

/// Events allowed per particle and call before the run is declared stuck.
const MAX_EVENTS: u64 = 100_000_000;

/// One simulated particle with its random stream position.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub x: [f64; 2],
    pub zeta: [f64; 3],
    pub weight: f64,
    pub alive: bool,
    /// Word position of the particle's random stream.
    pub word_pos: u128,
}

/// Ensemble of independent particles sharing a clock.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    pub dim: Dim,
    pub seed: u64,
    pub clock: f64,
    pub particles: Vec<Particle>,
}

/// Options of [`ParticleEnsemble::advance`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AdvanceOptions {
    /// Apply damping by killing particles instead of reducing weights.
    pub killing: bool,
}

/// Event counts of one advance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AdvanceStats {
    pub wall_hits: u64,
    pub diffuse: u64,
    pub specular: u64,
    pub killed: u64,
}

impl AdvanceStats {
    fn merge(&mut self, o: &AdvanceStats) {
        self.wall_hits += o.wall_hits;
        self.diffuse += o.diffuse;
        self.specular += o.specular;
        self.killed += o.killed;
    }
}

/// Maxwellian velocity with temperature `t` (variance `R t` per component).
fn sample_maxwellian(rng: &mut StreamRng, t: f64) -> [f64; 3] {
    let s = (GAS_CONSTANT * t).sqrt();
    let mut z = [0.0; 3];
    for c in &mut z {
        let g: f64 = StandardNormal.sample(rng);
        *c = s * g;
    }
    z
}

fn uniform(rng: &mut StreamRng) -> f64 {
    StandardUniform.sample(rng)
}

fn sample_position(rng: &mut StreamRng, dim: Dim) -> [f64; 2] {
    match dim {
        Dim::One => [2.0 * uniform(rng) - 1.0, 0.0],
        Dim::Two => {
            let r = uniform(rng).sqrt();
            let th = 2.0 * PI * uniform(rng);
            [r * th.cos(), r * th.sin()]
        }
    }
}

/// Draws `(x, zeta)` from a normalised single-kind initial distribution.
fn sample_state(
    rng: &mut StreamRng,
    data: &InitialData,
    steady: &SteadyState,
    bound: f64,
) -> Result<([f64; 2], [f64; 3])> {
    let dim = steady.dim();
    match data {
        InitialData::UniformMaxwellian { temperature, .. } => {
            Ok((sample_position(rng, dim), sample_maxwellian(rng, *temperature)))
        }
        InitialData::Separable { gradient, temperature, .. } => {
            let top = 1.0 + gradient.abs();
            loop {
                let x = sample_position(rng, dim);
                if uniform(rng) * top <= 1.0 + gradient * x[0] {
                    return Ok((x, sample_maxwellian(rng, *temperature)));
                }
            }
        }
        InitialData::ScaledSteady { .. } => {
            // Rejection from the unit Maxwellian; `bound` dominates S / M_1.
            loop {
                let x = sample_position(rng, dim);
                let zeta = sample_maxwellian(rng, 1.0);
                let m1 = crate::kernels::maxwellian(zeta, 1.0)?;
                let s = match steady.evaluate(x, zeta) {
                    Ok(s) => s,
                    Err(Error::UndefinedSteadyState) => continue,
                    Err(e) => return Err(e),
                };
                if uniform(rng) * bound * m1 <= s {
                    return Ok((x, zeta));
                }
            }
        }
        InitialData::Mixture { .. } => Err(Error::param("initial", "nested mixtures are sampled component-wise")),
    }
}

/// Flattens initial data into nonnegative `(mass, kind)` components.
fn components(data: &InitialData, scale: f64, out: &mut Vec<(f64, InitialData)>) -> Result<()> {
    match data {
        InitialData::Mixture { components: parts } => {
            for (w, c) in parts {
                if *w < 0.0 {
                    return Err(Error::param("initial", "particle sampling needs nonnegative mixture weights"));
                }
                components(c, scale * w, out)?;
            }
            Ok(())
        }
        other => {
            out.push((scale * other.rho_star(), other.clone()));
            Ok(())
        }
    }
}

impl ParticleEnsemble {
    /// Samples `n` particles from the initial data of `problem`. Each particle
    /// carries weight `rho_* |D| / n` and its own random stream.
    pub fn new(problem: &Problem, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "need at least one particle"));
        }
        let steady = &problem.steady;
        let dim = steady.dim();
        let mut parts = Vec::new();
        components(&problem.initial, 1.0, &mut parts)?;
        let total: f64 = parts.iter().map(|p| p.0).sum();
        if !(total > 0.0) {
            return Err(Error::param("initial", "initial data has no mass"));
        }
        let t_min = steady.profile.t_min();
        let bound = 2.0 * PI.sqrt() / steady.c_s * t_min.powi(-2);
        let weight = total * steady.geometry.volume() / n as f64;
        let mut particles = vec![Particle { x: [0.0; 2], zeta: [0.0; 3], weight, alive: true, word_pos: 0 }; n];
        particles.par_chunks_mut(CHUNK).enumerate().try_for_each(|(c, chunk)| -> Result<()> {
            for (k, p) in chunk.iter_mut().enumerate() {
                let index = (c * CHUNK + k) as u64;
                let mut rng = stream_rng(seed, index);
                let mut pick = uniform(&mut rng) * total;
                let mut kind = &parts[parts.len() - 1].1;
                for (mass, data) in &parts {
                    if pick < *mass {
                        kind = data;
                        break;
                    }
                    pick -= mass;
                }
                let (x, zeta) = sample_state(&mut rng, kind, steady, bound)?;
                p.x = x;
                p.zeta = zeta;
                p.word_pos = rng.get_word_pos();
            }
            Ok(())
        })?;
        Ok(ParticleEnsemble { dim, seed, clock: 0.0, particles })
    }

    /// Ensemble built from explicit particles (streams start at the given positions).
    pub fn from_particles(dim: Dim, seed: u64, particles: Vec<Particle>) -> Self {
        ParticleEnsemble { dim, seed, clock: 0.0, particles }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Total weight of live particles, summed in index order.
    pub fn weight_sum(&self) -> f64 {
        self.particles.iter().filter(|p| p.alive).map(|p| p.weight).sum()
    }

    /// Moves every particle to time `t_end`, recording wall hits in `tally`.
    pub fn advance(
        &mut self,
        walls: &TemperatureProfile,
        alpha: f64,
        t_end: f64,
        damping: Option<&DampingModel>,
        options: AdvanceOptions,
        mut tally: Option<&mut FluxTally>,
    ) -> Result<AdvanceStats> {
        if !(t_end > self.clock) {
            return Err(Error::param("t_end", format!("must exceed the clock {}", self.clock)));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::param("alpha", format!("must lie in [0, 1], got {alpha}")));
        }
        if walls.dim() != self.dim {
            return Err(Error::param("walls", "profile dimension does not match the ensemble"));
        }
        if let Some(d) = damping {
            d.validate()?;
        }
        let template = tally.as_deref().map(FluxTally::empty_like);
        let ctx = Stepper {
            geometry: DomainGeometry::new(self.dim),
            walls,
            alpha,
            t0: self.clock,
            t_end,
            damping,
            killing: options.killing,
            seed: self.seed,
        };
        let partials: Vec<(AdvanceStats, Option<FluxTally>)> = self
            .particles
            .par_chunks_mut(CHUNK)
            .enumerate()
            .map(|(c, chunk)| -> Result<(AdvanceStats, Option<FluxTally>)> {
                let mut stats = AdvanceStats::default();
                let mut local = template.clone();
                let mut hits = Vec::new();
                for (k, p) in chunk.iter_mut().enumerate() {
                    hits.clear();
                    ctx.run(p, (c * CHUNK + k) as u64, &mut stats, local.as_ref().map(|_| &mut hits))?;
                    if let Some(t) = local.as_mut() {
                        t.add_particle(&hits);
                    }
                }
                Ok((stats, local))
            })
            .collect::<Result<_>>()?;
        let mut stats = AdvanceStats::default();
        for (s, part) in &partials {
            stats.merge(s);
            if let (Some(t), Some(p)) = (tally.as_deref_mut(), part.as_ref()) {
                t.merge(p);
            }
        }
        if let Some(t) = tally.as_mut() {
            t.particles = t.particles.max(self.particles.len());
        }
        self.clock = t_end;
        Ok(stats)
    }

    /// Density histogram at the current clock: slab intervals or equal-area disk rings.
    pub fn density_profile(&self, bins: usize) -> Result<DensityProfile> {
        if bins == 0 {
            return Err(Error::param("bins", "need at least one bin"));
        }
        let n = self.particles.len() as f64;
        let mut sum = vec![0.0; bins];
        let mut sq = vec![0.0; bins];
        for p in self.particles.iter().filter(|p| p.alive) {
            let b = match self.dim {
                Dim::One => ((p.x[0] + 1.0) / 2.0 * bins as f64).floor(),
                Dim::Two => ((p.x[0] * p.x[0] + p.x[1] * p.x[1]) * bins as f64).floor(),
            };
            let b = (b.max(0.0) as usize).min(bins - 1);
            sum[b] += p.weight;
            sq[b] += p.weight * p.weight;
        }
        let volume = DomainGeometry::new(self.dim).volume() / bins as f64;
        let edges: Vec<f64> = (0..=bins)
            .map(|i| match self.dim {
                Dim::One => -1.0 + 2.0 * i as f64 / bins as f64,
                Dim::Two => (i as f64 / bins as f64).sqrt(),
            })
            .collect();
        let density = sum.iter().map(|s| s / volume).collect();
        let std_error =
            sum.iter().zip(&sq).map(|(s, q)| (n * (q / n - (s / n) * (s / n))).max(0.0).sqrt() / volume).collect();
        Ok(DensityProfile { edges, density, std_error })
    }
}

/// Binned density with standard errors. For the disk, edges are radii.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    pub std_error: Vec<f64>,
}

/// Wall hit recorded during an advance.
#[derive(Clone, Copy, Debug)]
struct Hit {
    y: [f64; 2],
    t: f64,
    weight: f64,
}

/// Overwrites the in-plane components of `zeta`.
fn set_xi(zeta: &mut [f64; 3], dim: Dim, xi: [f64; 2]) {
    zeta[0] = xi[0];
    if dim == Dim::Two {
        zeta[1] = xi[1];
    }
}

/// Shared per-advance state.
struct Stepper<'a> {
    geometry: DomainGeometry,
    walls: &'a TemperatureProfile,
    alpha: f64,
    t0: f64,
    t_end: f64,
    damping: Option<&'a DampingModel>,
    killing: bool,
    seed: u64,
}

impl Stepper<'_> {
    fn xi(&self, zeta: [f64; 3]) -> [f64; 2] {
        match self.geometry.dim {
            Dim::One => [zeta[0], 0.0],
            Dim::Two => [zeta[0], zeta[1]],
        }
    }

    fn check_inside(&self, p: &Particle, index: usize, t: f64) -> Result<()> {
        let r = match self.geometry.dim {
            Dim::One => p.x[0].abs(),
            Dim::Two => (p.x[0] * p.x[0] + p.x[1] * p.x[1]).sqrt(),
        };
        if r > 1.0 + ESCAPE_TOL || !r.is_finite() {
            return Err(Error::ParticleEscape { index, radius: r, t });
        }
        Ok(())
    }

    /// Applies damping over a flight of length `s`; returns false if the particle dies.
    fn damp(&self, p: &mut Particle, rng: &mut StreamRng, s: f64, stats: &mut AdvanceStats) -> bool {
        let Some(d) = self.damping else { return true };
        let survival = (-d.rate(p.zeta) * s).exp();
        if self.killing {
            if uniform(rng) >= survival {
                p.alive = false;
                stats.killed += 1;
                return false;
            }
        } else {
            p.weight *= survival;
        }
        true
    }

    fn run(
        &self,
        p: &mut Particle,
        index: u64,
        stats: &mut AdvanceStats,
        mut hits: Option<&mut Vec<Hit>>,
    ) -> Result<()> {
        if !p.alive {
            return Ok(());
        }
        let mut rng = resume_rng(self.seed, index, p.word_pos);
        let mut t = self.t0;
        let mut events = 0u64;
        loop {
            let xi = self.xi(p.zeta);
            let s =
                if xi[0] == 0.0 && xi[1] == 0.0 { f64::INFINITY } else { self.geometry.forward_exit_time(p.x, xi)? };
            if t + s >= self.t_end {
                let rest = self.t_end - t;
                if s.is_finite() {
                    p.x = [p.x[0] + rest * xi[0], p.x[1] + rest * xi[1]];
                }
                if self.damp(p, &mut rng, rest, stats) {
                    self.check_inside(p, index as usize, self.t_end)?;
                }
                break;
            }
            let y = self.geometry.project_to_boundary([p.x[0] + s * xi[0], p.x[1] + s * xi[1]]);
            p.x = y;
            t += s;
            if !self.damp(p, &mut rng, s, stats) {
                break;
            }
            stats.wall_hits += 1;
            if let Some(h) = hits.as_deref_mut() {
                h.push(Hit { y, t, weight: p.weight });
            }
            let n = self.geometry.inward_normal(y);
            let decide = uniform(&mut rng);
            if decide < self.alpha {
                let temp = self.walls.at_position(y);
                p.zeta = sample_diffuse_velocity(&mut rng, self.geometry.dim, temp, n);
                stats.diffuse += 1;
            } else {
                set_xi(&mut p.zeta, self.geometry.dim, self.geometry.reflect(xi, n));
                stats.specular += 1;
            }
            events += 1;
            if events > MAX_EVENTS {
                return Err(Error::param("particle", format!("particle {index} exceeded {MAX_EVENTS} wall events")));
            }
        }
        p.word_pos = rng.get_word_pos();
        Ok(())
    }
}

/// Wall-hit tallies on boundary bins by time bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxTally {
    pub dim: Dim,
    /// Boundary bins: the two walls, or equal angular sectors starting at angle 0.
    pub boundary_bins: usize,
    pub t0: f64,
    pub dt: f64,
    pub time_bins: usize,
    /// Per-bin sum of deposited weights, `[boundary][time]`.
    pub sum: Vec<Vec<f64>>,
    /// Per-bin sum over particles of squared per-particle deposits.
    pub sum_sq: Vec<Vec<f64>>,
    pub hits: Vec<Vec<u64>>,
    /// Number of particles the tally averages over.
    pub particles: usize,
}

impl FluxTally {
    /// Tally on `[t0, t0 + dt * time_bins)`. `boundary_bins` is ignored in the slab.
    pub fn new(dim: Dim, boundary_bins: usize, t0: f64, dt: f64, time_bins: usize) -> Result<Self> {
        let b = match dim {
            Dim::One => 2,
            Dim::Two => boundary_bins,
        };
        if b == 0 || time_bins == 0 || !(dt > 0.0) {
            return Err(Error::param("tally", "bins and widths must be positive"));
        }
        Ok(FluxTally {
            dim,
            boundary_bins: b,
            t0,
            dt,
            time_bins,
            sum: vec![vec![0.0; time_bins]; b],
            sum_sq: vec![vec![0.0; time_bins]; b],
            hits: vec![vec![0; time_bins]; b],
            particles: 0,
        })
    }

    fn empty_like(&self) -> FluxTally {
        FluxTally::new(self.dim, self.boundary_bins, self.t0, self.dt, self.time_bins).expect("valid layout")
    }

    fn locate(&self, y: [f64; 2], t: f64) -> Option<(usize, usize)> {
        let k = (t - self.t0) / self.dt;
        if !(k >= 0.0) || k >= self.time_bins as f64 {
            return None;
        }
        let b = match self.dim {
            Dim::One => usize::from(y[0] > 0.0),
            Dim::Two => {
                let th = wrap_angle(y[1].atan2(y[0]));
                ((th / (2.0 * PI) * self.boundary_bins as f64) as usize).min(self.boundary_bins - 1)
            }
        };
        Some((b, k as usize))
    }

    /// Adds one particle's hits, aggregating repeated visits to a bin.
    fn add_particle(&mut self, hits: &[Hit]) {
        let mut deposits: Vec<((usize, usize), f64)> =
            hits.iter().filter_map(|h| self.locate(h.y, h.t).map(|bin| (bin, h.weight))).collect();
        deposits.sort_by_key(|d| d.0);
        let mut i = 0;
        while i < deposits.len() {
            let bin = deposits[i].0;
            let mut total = 0.0;
            let mut count = 0;
            while i < deposits.len() && deposits[i].0 == bin {
                total += deposits[i].1;
                count += 1;
                i += 1;
            }
            self.sum[bin.0][bin.1] += total;
            self.sum_sq[bin.0][bin.1] += total * total;
            self.hits[bin.0][bin.1] += count;
        }
    }

    fn merge(&mut self, other: &FluxTally) {
        for b in 0..self.boundary_bins {
            for k in 0..self.time_bins {
                self.sum[b][k] += other.sum[b][k];
                self.sum_sq[b][k] += other.sum_sq[b][k];
                self.hits[b][k] += other.hits[b][k];
            }
        }
    }

    /// Boundary measure of one bin (counting measure per wall in the slab).
    pub fn bin_measure(&self) -> f64 {
        match self.dim {
            Dim::One => 1.0,
            Dim::Two => 2.0 * PI / self.boundary_bins as f64,
        }
    }

    /// Total recorded wall hits.
    pub fn total_hits(&self) -> u64 {
        self.hits.iter().flatten().sum()
    }

    /// Time-bin edges `t0 + k dt`.
    pub fn time_edge(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Boundary-bin edges: wall positions are returned as `[-1, -1]` and `[1, 1]`.
    pub fn boundary_edges(&self, b: usize) -> (f64, f64) {
        match self.dim {
            Dim::One => {
                let p = if b == 0 { -1.0 } else { 1.0 };
                (p, p)
            }
            Dim::Two => {
                let h = 2.0 * PI / self.boundary_bins as f64;
                (h * b as f64, h * (b + 1) as f64)
            }
        }
    }
}

/// Binned flux estimate; empty bins are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalFlux {
    pub dim: Dim,
    pub boundary_bins: usize,
    pub t0: f64,
    pub dt: f64,
    pub value: Vec<Vec<Option<f64>>>,
    pub std_error: Vec<Vec<Option<f64>>>,
}

/// Flux estimate `sum w / (measure * duration)` with per-bin standard errors.
pub fn empirical_flux(tally: &FluxTally) -> EmpiricalFlux {
    let n = tally.particles.max(1) as f64;
    let scale = 1.0 / (tally.bin_measure() * tally.dt);
    let mut value = vec![vec![None; tally.time_bins]; tally.boundary_bins];
    let mut std_error = value.clone();
    for b in 0..tally.boundary_bins {
        for k in 0..tally.time_bins {
            if tally.hits[b][k] == 0 {
                continue;
            }
            let (s, q) = (tally.sum[b][k], tally.sum_sq[b][k]);
            let var = (q / n - (s / n) * (s / n)).max(0.0);
            value[b][k] = Some(s * scale);
            std_error[b][k] = Some((n * var).sqrt() * scale);
        }
    }
    EmpiricalFlux { dim: tally.dim, boundary_bins: tally.boundary_bins, t0: tally.t0, dt: tally.dt, value, std_error }
}

impl EmpiricalFlux {
    /// Writes `t,index,coordinate,value,std_error` rows (bin centres); empty bins
    /// leave the value and error fields blank.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,index,coordinate,value,std_error")?;
        let time_bins = self.value.first().map_or(0, |v| v.len());
        for k in 0..time_bins {
            let t = self.t0 + (k as f64 + 0.5) * self.dt;
            for b in 0..self.boundary_bins {
                let coord = match self.dim {
                    Dim::One => {
                        if b == 0 {
                            -1.0
                        } else {
                            1.0
                        }
                    }
                    Dim::Two => 2.0 * PI * (b as f64 + 0.5) / self.boundary_bins as f64,
                };
                let opt = |v: Option<f64>| v.map(fmt17).unwrap_or_default();
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    fmt17(t),
                    b,
                    fmt17(coord),
                    opt(self.value[b][k]),
                    opt(self.std_error[b][k])
                )?;
            }
        }
        Ok(())
    }
}

/// One diffuse-to-diffuse flight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flight {
    /// Number of chords crossed (specular bounces plus one).
    pub chords: usize,
    pub duration: f64,
    /// Temperature of the emitting wall point.
    pub temperature: f64,
}

impl Flight {
    /// Flight time normalised by the emission temperature and chord count.
    pub fn normalized(&self) -> f64 {
        self.duration * (2.0 * GAS_CONSTANT * self.temperature).sqrt() / self.chords as f64
    }
}

/// Successive diffuse-to-diffuse flights of single particles started by a
/// diffuse emission. `particles` independent streams share the work.
pub fn diffuse_flights(
    walls: &TemperatureProfile,
    alpha: f64,
    flights: usize,
    particles: usize,
    seed: u64,
) -> Result<Vec<Flight>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param("alpha", "diffuse flights need alpha in (0, 1]"));
    }
    let dim = walls.dim();
    let geometry = DomainGeometry::new(dim);
    let particles = particles.clamp(1, flights.max(1));
    let per = flights.div_ceil(particles);
    let runs: Vec<Vec<Flight>> = (0..particles)
        .into_par_iter()
        .map(|i| -> Result<Vec<Flight>> {
            let mut rng = stream_rng(seed, i as u64);
            let th: f64 = 2.0 * PI * uniform(&mut rng);
            let mut y = match dim {
                Dim::One => [if uniform(&mut rng) < 0.5 { -1.0 } else { 1.0 }, 0.0],
                Dim::Two => [th.cos(), th.sin()],
            };
            let mut temp = walls.at_position(y);
            let mut zeta = sample_diffuse_velocity(&mut rng, dim, temp, geometry.inward_normal(y));
            let mut out = Vec::with_capacity(per);
            let (mut duration, mut chords) = (0.0, 0usize);
            while out.len() < per {
                let xi = match dim {
                    Dim::One => [zeta[0], 0.0],
                    Dim::Two => [zeta[0], zeta[1]],
                };
                let s = geometry.forward_exit_time(y, xi)?;
                y = geometry.project_to_boundary([y[0] + s * xi[0], y[1] + s * xi[1]]);
                duration += s;
                chords += 1;
                let n = geometry.inward_normal(y);
                let u: f64 = Open01.sample(&mut rng);
                if u < alpha {
                    out.push(Flight { chords, duration, temperature: temp });
                    temp = walls.at_position(y);
                    zeta = sample_diffuse_velocity(&mut rng, dim, temp, n);
                    duration = 0.0;
                    chords = 0;
                } else {
                    set_xi(&mut zeta, dim, geometry.reflect(xi, n));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut all: Vec<Flight> = runs.into_iter().flatten().collect();
    all.truncate(flights);
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::erf;
    use crate::stats::ks_statistic;

    fn cold(dim: Dim, alpha: f64) -> Problem {
        let initial = InitialData::UniformMaxwellian { rho0: 1.0, temperature: 0.5 };
        Problem::new(TemperatureProfile::constant(dim), alpha, initial).unwrap()
    }

    fn single(dim: Dim, x: [f64; 2], zeta: [f64; 3]) -> ParticleEnsemble {
        let p = Particle { x, zeta, weight: 1.0, alive: true, word_pos: 0 };
        ParticleEnsemble::from_particles(dim, 1, vec![p])
    }

    #[test]
    fn specular_slab_orbit_has_period_four() {
        let walls = TemperatureProfile::constant(Dim::One);
        let mut e = single(Dim::One, [0.0, 0.0], [1.0, 0.3, -0.2]);
        let mut tally = FluxTally::new(Dim::One, 0, 0.0, 0.5, 8).unwrap();
        e.advance(&walls, 0.0, 4.0, None, AdvanceOptions::default(), Some(&mut tally)).unwrap();
        let p = e.particles[0];
        assert!(p.x[0].abs() < 1e-14);
        assert_eq!(p.zeta, [1.0, 0.3, -0.2]);
        // Right wall at t = 1, left wall at t = 3.
        assert_eq!(tally.hits[1][2], 1);
        assert_eq!(tally.hits[0][6], 1);
        assert_eq!(tally.total_hits(), 2);
    }

    #[test]
    fn specular_disk_keeps_incidence_angle() {
        let walls = TemperatureProfile::constant(Dim::Two);
        let mut e = ParticleEnsemble::new(&cold(Dim::Two, 0.5), 200, 7).unwrap();
        let before: Vec<(f64, f64)> =
            e.particles.iter().map(|p| (p.x[0] * p.zeta[1] - p.x[1] * p.zeta[0], p.zeta[0].hypot(p.zeta[1]))).collect();
        for step in 1..=20 {
            e.advance(&walls, 0.0, step as f64 * 1.7, None, AdvanceOptions::default(), None).unwrap();
        }
        for (p, (l, v)) in e.particles.iter().zip(before) {
            let l2 = p.x[0] * p.zeta[1] - p.x[1] * p.zeta[0];
            assert!((l2 - l).abs() < 1e-9 * v.max(1.0));
            assert!((p.zeta[0].hypot(p.zeta[1]) - v).abs() < 1e-12 * v.max(1.0));
        }
    }

    #[test]
    fn identical_seeds_give_identical_runs() {
        let pr = cold(Dim::Two, 0.5);
        let run = |seed| {
            let mut e = ParticleEnsemble::new(&pr, 5000, seed).unwrap();
            e.advance(&pr.steady.profile, 0.5, 3.0, None, AdvanceOptions::default(), None).unwrap();
            e
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3).particles, run(4).particles);
    }

    #[test]
    fn initial_ensemble_matches_density_and_maxwellian() {
        for dim in [Dim::One, Dim::Two] {
            let e = ParticleEnsemble::new(&cold(dim, 0.5), 200_000, 11).unwrap();
            let prof = e.density_profile(32).unwrap();
            for (d, se) in prof.density.iter().zip(&prof.std_error) {
                assert!((d - 1.0).abs() < 3.5 * se, "{d} +- {se}");
            }
            // Speed of a 3D Maxwellian with variance s^2 = R T per component.
            let s = (GAS_CONSTANT * 0.5f64).sqrt();
            let cdf = |v: f64| {
                let z = v / s;
                erf(z / 2f64.sqrt()) - (2.0 / PI).sqrt() * z * (-z * z / 2.0).exp()
            };
            let mut speeds: Vec<f64> =
                e.particles.iter().map(|p| p.zeta.iter().map(|c| c * c).sum::<f64>().sqrt()).collect();
            assert!(ks_statistic(&mut speeds, cdf) < 0.005);
        }
    }

    #[test]
    fn weight_sum_is_conserved_and_damping_decreases_it() {
        let pr = cold(Dim::Two, 0.5);
        let mut e = ParticleEnsemble::new(&pr, 20_000, 5).unwrap();
        let w0 = e.weight_sum();
        assert!((w0 - PI).abs() < 1e-9);
        e.advance(&pr.steady.profile, 0.5, 5.0, None, AdvanceOptions::default(), None).unwrap();
        assert_eq!(e.weight_sum(), w0);
        let damping = DampingModel::new(1.0, 1.0, 2.0).unwrap();
        let mut last = w0;
        for step in 1..=5 {
            e.advance(&pr.steady.profile, 0.5, 5.0 + step as f64, Some(&damping), AdvanceOptions::default(), None)
                .unwrap();
            let w = e.weight_sum();
            assert!(w < last);
            last = w;
        }
    }

    #[test]
    fn killing_and_weighting_agree_in_mean() {
        let pr = cold(Dim::One, 1.0);
        let damping = DampingModel::constant(1.0, 2.0).unwrap();
        let mut a = ParticleEnsemble::new(&pr, 100_000, 9).unwrap();
        let mut b = a.clone();
        a.advance(&pr.steady.profile, 1.0, 1.0, Some(&damping), AdvanceOptions::default(), None).unwrap();
        let stats =
            b.advance(&pr.steady.profile, 1.0, 1.0, Some(&damping), AdvanceOptions { killing: true }, None).unwrap();
        let expect = 2.0 * (-0.5f64).exp();
        assert!((a.weight_sum() - expect).abs() < 1e-9);
        let p = (-0.5f64).exp();
        let sigma = 2.0 * (p * (1.0 - p) / 100_000.0).sqrt();
        assert!((b.weight_sum() - expect).abs() < 4.0 * sigma);
        assert!(stats.killed > 0);
    }

    fn tally_run(dim: Dim, n: usize, seed: u64) -> EmpiricalFlux {
        let pr = cold(dim, 0.5);
        let mut e = ParticleEnsemble::new(&pr, n, seed).unwrap();
        let mut tally = FluxTally::new(dim, 4, 0.0, 1.0, 4).unwrap();
        e.advance(&pr.steady.profile, 0.5, 4.0, None, AdvanceOptions::default(), Some(&mut tally)).unwrap();
        empirical_flux(&tally)
    }

    #[test]
    fn standard_errors_scale_with_inverse_root_n() {
        let a = tally_run(Dim::Two, 20_000, 1);
        let b = tally_run(Dim::Two, 80_000, 2);
        for (ra, rb) in a.std_error.iter().zip(&b.std_error) {
            for (sa, sb) in ra.iter().zip(rb) {
                let ratio = sa.unwrap() / sb.unwrap();
                assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
            }
        }
    }

    #[test]
    fn symmetric_slab_walls_agree() {
        let f = tally_run(Dim::One, 100_000, 4);
        for k in 1..4 {
            let (l, r) = (f.value[0][k].unwrap(), f.value[1][k].unwrap());
            let se = f.std_error[0][k].unwrap().hypot(f.std_error[1][k].unwrap());
            assert!((l - r).abs() < 3.0 * se, "{l} {r} {se}");
        }
    }

    #[test]
    fn empty_bins_are_missing() {
        let mut e = single(Dim::One, [0.0, 0.0], [1.0, 0.0, 0.0]);
        let mut tally = FluxTally::new(Dim::One, 0, 0.0, 0.5, 4).unwrap();
        e.advance(&TemperatureProfile::constant(Dim::One), 0.0, 2.0, None, AdvanceOptions::default(), Some(&mut tally))
            .unwrap();
        let f = empirical_flux(&tally);
        assert_eq!(f.value[0][0], None);
        assert_eq!(f.value[1][2], Some(2.0));
        let mut csv = Vec::new();
        f.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("t,index,coordinate,value,std_error\n"));
        assert!(text.lines().nth(1).unwrap().ends_with(",,"));
    }

    #[test]
    fn diffuse_steady_state_flux() {
        let pr =
            Problem::new(TemperatureProfile::constant(Dim::Two), 1.0, InitialData::ScaledSteady { rho0: 1.0 }).unwrap();
        let mut e = ParticleEnsemble::new(&pr, 100_000, 21).unwrap();
        let mut tally = FluxTally::new(Dim::Two, 1, 0.0, 10.0, 1).unwrap();
        e.advance(&pr.steady.profile, 1.0, 10.0, None, AdvanceOptions::default(), Some(&mut tally)).unwrap();
        let f = empirical_flux(&tally);
        let (v, se) = (f.value[0][0].unwrap(), f.std_error[0][0].unwrap());
        let target = 1.0 / (2.0 * PI.sqrt());
        assert!((v - target).abs() < 3.0 * se, "{v} vs {target} +- {se}");
    }

    #[test]
    fn escape_is_reported() {
        let mut e = single(Dim::Two, [1.5, 0.0], [0.0, 0.0, 1.0]);
        let err = e
            .advance(&TemperatureProfile::constant(Dim::Two), 0.5, 1.0, None, AdvanceOptions::default(), None)
            .unwrap_err();
        assert!(matches!(err, Error::ParticleEscape { index: 0, .. }));
    }

    #[test]
    fn flights_follow_the_transition_kernel() {
        use crate::kernels::flight_cdf;
        for dim in [Dim::One, Dim::Two] {
            let walls = match dim {
                Dim::One => TemperatureProfile::walls(0.6, 1.0).unwrap(),
                Dim::Two => TemperatureProfile::cosine_dip(0.3).unwrap(),
            };
            let flights = diffuse_flights(&walls, 0.5, 40_000, 8, 3).unwrap();
            assert_eq!(flights.len(), 40_000);
            assert!(flights.iter().any(|f| f.chords > 1));
            let mut sigma: Vec<f64> = flights.iter().map(Flight::normalized).collect();
            assert!(ks_statistic(&mut sigma, |s| flight_cdf(dim, s)) < 0.01);
        }
    }
}
