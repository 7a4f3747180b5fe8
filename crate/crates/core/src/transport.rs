//! Reconstruction of the distribution from a solved boundary flux along
//! backward characteristics, with moments and convergence diagnostics.

use crate::error::{Error, Result};
use crate::flux_solver::{fmt17, solve_with_rate, FluxGrid, FluxHistory, Problem, MU};
use crate::geometry::Dim;
use crate::kernels::{diffuse_factor, maxwellian, reduced_maxwellian, GAS_CONSTANT};
use crate::quadrature::GaussRule;
use crate::steady_state::series_length;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// Chain weights below this are dropped.
const CHAIN_TOL: f64 = 1e-16;

/// Collision frequency `nu(zeta) = nu0 (1 + |zeta|)^exponent` and Knudsen number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DampingModel {
    pub nu0: f64,
    pub exponent: f64,
    pub kappa: f64,
}

impl DampingModel {
    pub fn new(nu0: f64, exponent: f64, kappa: f64) -> Result<Self> {
        let model = DampingModel { nu0, exponent, kappa };
        model.validate()?;
        Ok(model)
    }

    /// Constant collision frequency.
    pub fn constant(nu0: f64, kappa: f64) -> Result<Self> {
        Self::new(nu0, 0.0, kappa)
    }

    /// Exponent `(u - 4) / u` from the potential parameter `u >= 4` (`u = inf` allowed).
    pub fn from_potential(nu0: f64, u: f64, kappa: f64) -> Result<Self> {
        if !(u >= 4.0) {
            return Err(Error::param("u", format!("must be at least 4, got {u}")));
        }
        let exponent = if u.is_infinite() { 1.0 } else { (u - 4.0) / u };
        Self::new(nu0, exponent, kappa)
    }

    /// `nu0 = 0` is accepted and switches damping off.
    pub fn validate(&self) -> Result<()> {
        if !(self.nu0 >= 0.0 && self.nu0.is_finite()) {
            return Err(Error::param("nu0", format!("must be nonnegative, got {}", self.nu0)));
        }
        if !(0.0..=1.0).contains(&self.exponent) {
            return Err(Error::param("exponent", format!("must lie in [0, 1], got {}", self.exponent)));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::param("kappa", format!("must be positive, got {}", self.kappa)));
        }
        Ok(())
    }

    pub fn nu(&self, zeta: [f64; 3]) -> f64 {
        let speed = (zeta[0] * zeta[0] + zeta[1] * zeta[1] + zeta[2] * zeta[2]).sqrt();
        self.nu0 * (1.0 + speed).powf(self.exponent)
    }

    /// Damping rate `nu(zeta) / kappa`.
    pub fn rate(&self, zeta: [f64; 3]) -> f64 {
        self.nu(zeta) / self.kappa
    }

    pub fn is_constant(&self) -> bool {
        self.exponent == 0.0
    }
}

/// One term of the characteristic representation.
enum Term {
    /// Diffuse emission at `y` a backward time `tau` ago.
    Boundary { weight: f64, tau: f64, y: [f64; 2], temperature: f64 },
    /// Initial data at `x0` with in-plane direction `dir`.
    Initial { weight: f64, x0: [f64; 2], dir: [f64; 2] },
}

/// Backward specular chain from `x` along unit direction `-dir`.
struct Chain {
    /// Distance to the first boundary point.
    ell1: f64,
    /// Chord length.
    ell2: f64,
    points: Vec<[f64; 2]>,
    /// Unit velocities after each reflection.
    dirs: Vec<[f64; 2]>,
    temps: Vec<f64>,
    /// `alpha (1 - alpha)^k`.
    weights: Vec<f64>,
    /// `(1 - alpha)^k`.
    survival: Vec<f64>,
}

impl Chain {
    fn new(problem: &Problem, x: [f64; 2], dir: [f64; 2]) -> Result<Self> {
        let steady = &problem.steady;
        let alpha = steady.alpha;
        let len = series_length(alpha, CHAIN_TOL);
        let orbit = steady.geometry.specular_orbit(x, dir, len)?;
        let temps = orbit.points.iter().map(|&p| steady.profile.at_position(p)).collect();
        let q = 1.0 - alpha;
        let survival: Vec<f64> = (0..=len)
            .scan(1.0, |s, _| {
                let v = *s;
                *s *= q;
                Some(v)
            })
            .collect();
        Ok(Chain {
            ell1: orbit.t1,
            ell2: orbit.t2,
            weights: survival[..len].iter().map(|s| alpha * s).collect(),
            survival,
            points: orbit.points,
            dirs: orbit.velocities,
            temps,
        })
    }

    fn len(&self) -> usize {
        self.points.len()
    }

    /// Number of boundary hits of the backward characteristic with speed `v` within `t`.
    fn hits(&self, v: f64, t: f64) -> usize {
        let travel = v * t;
        if travel < self.ell1 {
            return 0;
        }
        if self.ell2 <= 0.0 {
            return usize::MAX;
        }
        let extra = ((travel - self.ell1) / self.ell2).floor();
        if extra >= (usize::MAX / 2) as f64 {
            usize::MAX
        } else {
            extra as usize + 1
        }
    }

    /// Speeds at which the number of hits changes while chain weights are significant.
    fn breakpoints(&self, t: f64, vmax: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for k in 0..=self.len() {
            let b = (self.ell1 + k as f64 * self.ell2) / t;
            if !(b < vmax) {
                break;
            }
            if b > 0.0 {
                out.push(b);
            }
            if self.ell2 <= 0.0 {
                break;
            }
        }
        out
    }

    /// Walks the characteristic representation at speed `v`, passing every term to `f`.
    fn walk(&self, v: f64, t: f64, x: [f64; 2], dir: [f64; 2], mut f: impl FnMut(Term) -> Result<()>) -> Result<()> {
        let m = self.hits(v, t);
        if m == 0 {
            let x0 = [x[0] - v * t * dir[0], x[1] - v * t * dir[1]];
            return f(Term::Initial { weight: 1.0, x0, dir });
        }
        for k in 0..m.min(self.len()) {
            let tau = (self.ell1 + k as f64 * self.ell2) / v;
            f(Term::Boundary { weight: self.weights[k], tau, y: self.points[k], temperature: self.temps[k] })?;
        }
        if m < self.len() && self.survival[m] > 0.0 {
            let rest = v * t - (self.ell1 + (m - 1) as f64 * self.ell2);
            let (p, d) = (self.points[m - 1], self.dirs[m - 1]);
            f(Term::Initial { weight: self.survival[m], x0: [p[0] - rest * d[0], p[1] - rest * d[1]], dir: d })?;
        }
        Ok(())
    }
}

fn split_velocity(dim: Dim, zeta: [f64; 3]) -> ([f64; 2], f64) {
    let xi = match dim {
        Dim::One => [zeta[0], 0.0],
        Dim::Two => [zeta[0], zeta[1]],
    };
    (xi, (xi[0] * xi[0] + xi[1] * xi[1]).sqrt())
}

/// Replaces the in-plane part of `zeta` by `v dir`.
fn with_xi(dim: Dim, zeta: [f64; 3], v: f64, dir: [f64; 2]) -> [f64; 3] {
    match dim {
        Dim::One => [v * dir[0], zeta[1], zeta[2]],
        Dim::Two => [v * dir[0], v * dir[1], zeta[2]],
    }
}

fn evaluate_with(
    problem: &Problem,
    history: &FluxHistory,
    x: [f64; 2],
    zeta: [f64; 3],
    t: f64,
    damping: Option<&DampingModel>,
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::param("t", "must be non-negative"));
    }
    if t > history.horizon() * (1.0 + 1e-12) {
        return Err(Error::HistoryExhausted { t, horizon: history.horizon() });
    }
    let dim = problem.dim();
    let steady = &problem.steady;
    let rate = damping.map_or(0.0, |d| d.rate(zeta));
    let (xi, v) = split_velocity(dim, zeta);
    if v == 0.0 {
        return Ok((-rate * t).exp() * problem.initial.evaluate(steady, x, zeta)?);
    }
    let dir = [xi[0] / v, xi[1] / v];
    let chain = Chain::new(problem, x, dir)?;
    let mut acc = 0.0;
    chain.walk(v, t, x, dir, |term| {
        match term {
            Term::Boundary { weight, tau, y, temperature } => {
                let j = history.at_position(y, t - tau)?;
                acc += weight * j * diffuse_factor(temperature) * maxwellian(zeta, temperature)? * (-rate * tau).exp();
            }
            Term::Initial { weight, x0, dir } => {
                let g = problem.initial.evaluate(steady, x0, with_xi(dim, zeta, v, dir))?;
                acc += weight * (-rate * t).exp() * g;
            }
        }
        Ok(())
    })?;
    Ok(acc)
}

/// `g(x, zeta, t)` from the characteristic representation and a solved flux.
pub fn evaluate_g(problem: &Problem, history: &FluxHistory, x: [f64; 2], zeta: [f64; 3], t: f64) -> Result<f64> {
    evaluate_with(problem, history, x, zeta, t, None)
}

/// Damped distribution `g^nu(x, zeta, t)` from the flux of the damped problem.
pub fn evaluate_damped(
    problem: &Problem,
    history: &FluxHistory,
    damping: &DampingModel,
    x: [f64; 2],
    zeta: [f64; 3],
    t: f64,
) -> Result<f64> {
    damping.validate()?;
    evaluate_with(problem, history, x, zeta, t, Some(damping))
}

/// Boundary flux of the damped problem. Only constant collision frequency is
/// supported deterministically.
pub fn solve_damped_flux(problem: &Problem, grid: &FluxGrid, damping: &DampingModel) -> Result<FluxHistory> {
    damping.validate()?;
    if !damping.is_constant() {
        return Err(Error::VelocityDependentDamping { p_nu: damping.exponent });
    }
    solve_with_rate(problem, grid, damping.nu0 / damping.kappa)
}

/// Velocity quadrature used for moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MomentQuadrature {
    /// Directions on the circle (disk only).
    pub directions: usize,
    /// Gauss points per speed panel.
    pub order: usize,
    /// Largest speed panel width.
    pub panel: f64,
    /// Speed cut-off in thermal units.
    pub cutoff: f64,
}

impl Default for MomentQuadrature {
    fn default() -> Self {
        MomentQuadrature { directions: 64, order: 8, panel: 0.5, cutoff: 6.5 }
    }
}

/// Density, bulk velocity and temperature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub density: f64,
    pub velocity: [f64; 2],
    pub temperature: f64,
}

/// Moments of `g(x, ., t)`, integrating the transverse velocity analytically.
pub fn moments(
    problem: &Problem,
    history: &FluxHistory,
    x: [f64; 2],
    t: f64,
    quad: &MomentQuadrature,
) -> Result<Moments> {
    if !(t >= 0.0) {
        return Err(Error::param("t", "must be non-negative"));
    }
    if quad.order == 0 || quad.directions == 0 || !(quad.panel > 0.0) || !(quad.cutoff > 0.0) {
        return Err(Error::param("quadrature", "orders and widths must be positive"));
    }
    let dim = problem.dim();
    let steady = &problem.steady;
    let vmax = quad.cutoff * problem.initial.temperature_scale().sqrt();
    let rule = GaussRule::new(quad.order);
    let directions: Vec<([f64; 2], f64)> = match dim {
        Dim::One => vec![([1.0, 0.0], 1.0), ([-1.0, 0.0], 1.0)],
        Dim::Two => {
            let h = 2.0 * PI / quad.directions as f64;
            (0..quad.directions)
                .map(|i| {
                    let psi = h * (i as f64 + 0.5);
                    ([psi.cos(), psi.sin()], h)
                })
                .collect()
        }
    };
    let eta_dims = (3 - dim.value()) as f64;
    let (mut rho, mut mom, mut energy) = (0.0, [0.0; 2], 0.0);
    for (dir, wdir) in directions {
        let chain = Chain::new(problem, x, dir)?;
        let mut cuts = vec![0.0];
        if t > 0.0 {
            cuts.extend(chain.breakpoints(t, vmax));
        }
        cuts.push(vmax);
        for pair in cuts.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if !(b > a) {
                continue;
            }
            let panels = ((b - a) / quad.panel).ceil().max(1.0) as usize;
            let h = (b - a) / panels as f64;
            for p in 0..panels {
                for (v, w) in rule.mapped(a + h * p as f64, a + h * (p + 1) as f64) {
                    let (mut mass, mut eta) = (0.0, 0.0);
                    let xi = [v * dir[0], v * dir[1]];
                    chain.walk(v, t, x, dir, |term| {
                        match term {
                            Term::Boundary { weight, tau, y, temperature } => {
                                let j = history.at_position(y, t - tau)?;
                                let m = weight
                                    * j
                                    * diffuse_factor(temperature)
                                    * reduced_maxwellian(&xi[..dim.value()], temperature)?;
                                mass += m;
                                eta += m * eta_dims * GAS_CONSTANT * temperature;
                            }
                            Term::Initial { weight, x0, dir } => {
                                let (m, e) = problem.initial.evaluate_reduced(steady, x0, [v * dir[0], v * dir[1]])?;
                                mass += weight * m;
                                eta += weight * e;
                            }
                        }
                        Ok(())
                    })?;
                    let jac = match dim {
                        Dim::One => 1.0,
                        Dim::Two => v,
                    };
                    let weight = w * jac * wdir;
                    rho += weight * mass;
                    mom[0] += weight * mass * xi[0];
                    mom[1] += weight * mass * xi[1];
                    energy += weight * (mass * v * v + eta);
                }
            }
        }
    }
    if !(rho > 0.0) {
        return Err(Error::QuadratureNotConverged { estimate: rho });
    }
    let u = [mom[0] / rho, mom[1] / rho];
    let thermal = energy - rho * (u[0] * u[0] + u[1] * u[1]);
    Ok(Moments { density: rho, velocity: u, temperature: thermal / (3.0 * GAS_CONSTANT * rho) })
}

/// Spatial nodes and weights for averages over the domain (weights sum to one).
pub fn domain_rule(dim: Dim, n: usize) -> Vec<([f64; 2], f64)> {
    let rule = GaussRule::new(n.max(1));
    match dim {
        Dim::One => rule.mapped(-1.0, 1.0).map(|(x, w)| ([x, 0.0], w / 2.0)).collect(),
        Dim::Two => {
            let angles = 2 * n.max(2);
            let h = 2.0 * PI / angles as f64;
            let mut out = Vec::new();
            for (r, w) in rule.mapped(0.0, 1.0) {
                for i in 0..angles {
                    let th = h * (i as f64 + 0.5);
                    out.push(([r * th.cos(), r * th.sin()], w * r * h / PI));
                }
            }
            out
        }
    }
}

/// Average density `(1/|D|) int rho(x, t) dx`.
pub fn total_mass(
    problem: &Problem,
    history: &FluxHistory,
    t: f64,
    quad: &MomentQuadrature,
    n_space: usize,
) -> Result<f64> {
    let nodes = domain_rule(problem.dim(), n_space);
    let parts: Vec<f64> = nodes
        .par_iter()
        .map(|&(x, w)| moments(problem, history, x, t, quad).map(|m| w * m.density))
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum())
}

/// Moments on a set of spatial points at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSnapshot {
    pub t: f64,
    pub points: Vec<[f64; 2]>,
    pub density: Vec<f64>,
    pub velocity: Vec<[f64; 2]>,
    pub temperature: Vec<f64>,
}

impl FieldSnapshot {
    /// Writes `x,y,density,u,v,temperature` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y,density,u,v,temperature")?;
        for i in 0..self.points.len() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt17(self.points[i][0]),
                fmt17(self.points[i][1]),
                fmt17(self.density[i]),
                fmt17(self.velocity[i][0]),
                fmt17(self.velocity[i][1]),
                fmt17(self.temperature[i])
            )?;
        }
        Ok(())
    }
}

pub fn field_snapshot(
    problem: &Problem,
    history: &FluxHistory,
    t: f64,
    points: &[[f64; 2]],
    quad: &MomentQuadrature,
) -> Result<FieldSnapshot> {
    let m: Vec<Moments> = points.par_iter().map(|&x| moments(problem, history, x, t, quad)).collect::<Result<_>>()?;
    Ok(FieldSnapshot {
        t,
        points: points.to_vec(),
        density: m.iter().map(|m| m.density).collect(),
        velocity: m.iter().map(|m| m.velocity).collect(),
        temperature: m.iter().map(|m| m.temperature).collect(),
    })
}

/// Phase grid for the weighted deviation norms.
///
/// Fast speeds are fixed and geometrically spaced in `[xi_min, xi_max]`; they
/// only count once they exceed the slow threshold. Slow speeds are fixed
/// fractions of the threshold so the slow set stays sampled as it shrinks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseGrid {
    /// Spatial points per axis (slab) or angles per ring (disk).
    pub space: usize,
    /// Number of fast speeds.
    pub speeds: usize,
    pub xi_min: f64,
    pub xi_max: f64,
    /// Slow speeds as fractions of the threshold.
    pub slow_fractions: Vec<f64>,
    /// In-plane directions (disk only).
    pub directions: usize,
    /// Out-of-plane velocity component values.
    pub eta: Vec<f64>,
}

impl Default for PhaseGrid {
    fn default() -> Self {
        PhaseGrid {
            space: 9,
            speeds: 16,
            xi_min: 0.5,
            xi_max: 4.0,
            slow_fractions: vec![0.2, 0.5, 0.8],
            directions: 8,
            eta: vec![0.0, 1.0],
        }
    }
}

impl PhaseGrid {
    fn points(&self, dim: Dim) -> Vec<[f64; 2]> {
        let n = self.space.max(1);
        let line = |i: usize| -0.9 + 1.8 * i as f64 / (n.max(2) - 1) as f64;
        match dim {
            Dim::One => (0..n).map(|i| [line(i), 0.0]).collect(),
            Dim::Two => {
                let mut out = vec![[0.0, 0.0]];
                let radii = n.div_ceil(3).max(1);
                for r in 1..=radii {
                    let rad = 0.9 * r as f64 / radii as f64;
                    for a in 0..n {
                        let th = 2.0 * PI * (a as f64 + 0.5 * r as f64) / n as f64;
                        out.push([rad * th.cos(), rad * th.sin()]);
                    }
                }
                out
            }
        }
    }

    fn speeds(&self, threshold: f64) -> Vec<f64> {
        let n = self.speeds.max(1);
        let ratio = if n > 1 { (self.xi_max / self.xi_min).powf(1.0 / (n - 1) as f64) } else { 1.0 };
        let mut out: Vec<f64> = (0..n).map(|i| self.xi_min * ratio.powi(i as i32)).collect();
        out.extend(self.slow_fractions.iter().map(|f| f * threshold));
        out
    }

    fn velocities(&self, dim: Dim, threshold: f64) -> Vec<[f64; 3]> {
        let dirs: Vec<[f64; 2]> = match dim {
            Dim::One => vec![[1.0, 0.0], [-1.0, 0.0]],
            Dim::Two => {
                let n = self.directions.max(1);
                (0..n)
                    .map(|i| {
                        let psi = 2.0 * PI * (i as f64 + 0.25) / n as f64;
                        [psi.cos(), psi.sin()]
                    })
                    .collect()
            }
        };
        let mut out = Vec::new();
        for &e in &self.eta {
            for v in self.speeds(threshold) {
                for d in &dirs {
                    out.push(match dim {
                        Dim::One => [v * d[0], e, 0.0],
                        Dim::Two => [v * d[0], v * d[1], e],
                    });
                }
            }
        }
        out
    }
}

/// Weighted sup-norms of `g - rho_* S` on either side of the slow-velocity threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationNorms {
    pub t: f64,
    /// `2 / t^(399/400)`.
    pub threshold: f64,
    /// Sup over `|xi| > threshold` of `|g - rho_* S| min(1/M, (1+|zeta|)^mu)`.
    pub fast: f64,
    /// Sup over `|xi| < threshold` of `|g - rho_* S| (1+|zeta|)^mu`.
    pub slow: f64,
    /// Measure of the slow set in the in-plane velocity space.
    pub slow_measure: f64,
}

/// Slow-velocity threshold `2 / t^(399/400)`.
pub fn slow_threshold(t: f64) -> f64 {
    2.0 / t.powf(399.0 / 400.0)
}

/// Deviation norms at time `t > 1` on a phase grid.
pub fn deviation_field_norm(
    problem: &Problem,
    history: &FluxHistory,
    t: f64,
    grid: &PhaseGrid,
) -> Result<DeviationNorms> {
    if !(t > 1.0) {
        return Err(Error::param("t", format!("must exceed 1, got {t}")));
    }
    let dim = problem.dim();
    let threshold = slow_threshold(t);
    let rho_star = problem.rho_star();
    let points = grid.points(dim);
    let velocities = grid.velocities(dim, threshold);
    let results: Vec<(f64, f64)> = points
        .par_iter()
        .map(|&x| -> Result<(f64, f64)> {
            let (mut fast, mut slow) = (0.0f64, 0.0f64);
            for &zeta in &velocities {
                let (_, v) = split_velocity(dim, zeta);
                let g = evaluate_g(problem, history, x, zeta, t)?;
                let s = problem.steady.evaluate(x, zeta)?;
                let diff = (g - rho_star * s).abs();
                let speed = (zeta[0] * zeta[0] + zeta[1] * zeta[1] + zeta[2] * zeta[2]).sqrt();
                let poly = (1.0 + speed).powf(MU);
                if v > threshold {
                    let m = maxwellian(zeta, 1.0)?;
                    fast = fast.max(diff * poly.min(1.0 / m));
                } else {
                    slow = slow.max(diff * poly);
                }
            }
            Ok((fast, slow))
        })
        .collect::<Result<_>>()?;
    let (fast, slow) = results.iter().fold((0.0f64, 0.0f64), |(a, b), &(f, s)| (a.max(f), b.max(s)));
    let slow_measure = match dim {
        Dim::One => 2.0 * threshold,
        Dim::Two => PI * threshold * threshold,
    };
    Ok(DeviationNorms { t, threshold, fast, slow, slow_measure })
}
