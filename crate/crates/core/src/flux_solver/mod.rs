//! Boundary-flux renewal equation solved by time marching.
//!
//! The flux `j_g(y, t)` satisfies
//! `j_g = J_in + alpha sum_k (1-alpha)^(k-1) int int j_g(y_(k), t - s) kernel_k(s, phi) ds dphi`
//! where `J_in` collects initial data reaching the wall after `k` specular bounces.
//! Flight times are integrated against piecewise-linear (hat) interpolants of the
//! history with exact per-interval kernel moments, so the lag-zero term is an
//! implicit diagonal that is solved at every step.

mod history;
mod initial;
mod kernel;
mod source;

pub use history::{fmt17, FluxHistory, HistoryHeader};
pub use initial::{initial_flux_contribution, InitialData, MU};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryPoint, Dim, Wall};
use crate::quadrature::angle_rule;
use crate::steady_state::{series_length, SteadyState, TemperatureProfile};
use kernel::{channels, cubic_moments, hat_weights, law, stencil_lag, Channel};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use source::SourceContext;
use std::f64::consts::PI;

/// Largest admissible time step.
pub const MAX_DT: f64 = 0.05;

/// Wall temperature profile, accommodation coefficient and initial data.
#[derive(Clone, Debug)]
pub struct Problem {
    pub steady: SteadyState,
    pub initial: InitialData,
}

impl Problem {
    pub fn new(profile: TemperatureProfile, alpha: f64, initial: InitialData) -> Result<Self> {
        initial.validate()?;
        Ok(Problem { steady: SteadyState::new(profile, alpha)?, initial })
    }

    pub fn dim(&self) -> Dim {
        self.steady.dim()
    }

    pub fn alpha(&self) -> f64 {
        self.steady.alpha
    }

    /// Average density of the initial data.
    pub fn rho_star(&self) -> f64 {
        self.initial.rho_star()
    }

    /// Flux of the limiting steady state `rho_* S`.
    pub fn limit_flux(&self) -> f64 {
        self.rho_star() / self.steady.c_s
    }
}

/// Boundary grid: the two slab walls or `n` equally spaced circle angles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Nodes {
    Walls,
    Angles(usize),
}

impl Nodes {
    pub fn for_dim(dim: Dim, n_theta: usize) -> Self {
        match dim {
            Dim::One => Nodes::Walls,
            Dim::Two => Nodes::Angles(n_theta),
        }
    }

    pub fn len(self) -> usize {
        match self {
            Nodes::Walls => 2,
            Nodes::Angles(n) => n,
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }

    /// Boundary point of node `i` (wall index 0 is the left wall, angle `2 pi i / n`).
    pub fn point(self, i: usize) -> BoundaryPoint<f64> {
        match self {
            Nodes::Walls => BoundaryPoint::Wall(Wall::from_index(i)),
            Nodes::Angles(n) => BoundaryPoint::Circle(2.0 * PI * i as f64 / n as f64),
        }
    }
}

/// Discretisation parameters of the renewal solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FluxGrid {
    pub dt: f64,
    pub t_max: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    pub series_tol: f64,
    /// Relative residual tolerance; `None` skips the residual check.
    pub residual_tol: Option<f64>,
}

impl Default for FluxGrid {
    fn default() -> Self {
        FluxGrid { dt: 0.05, t_max: 50.0, n_theta: 128, n_phi: 64, series_tol: 1e-10, residual_tol: Some(1e-4) }
    }
}

impl FluxGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::param("dt", format!("must lie in (0, {MAX_DT}], got {}", self.dt)));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::param("t_max", format!("must be positive, got {}", self.t_max)));
        }
        if self.n_phi < 2 {
            return Err(Error::param("n_phi", "need at least 2 angle nodes"));
        }
        if !(self.series_tol > 0.0 && self.series_tol < 1.0) {
            return Err(Error::param("series_tol", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Number of time steps.
    pub fn steps(&self) -> usize {
        (self.t_max / self.dt).round().max(1.0) as usize
    }

    /// Number of diffuse-chain terms kept: `(1-alpha)^k_max < series_tol`.
    pub fn k_max(&self, alpha: f64) -> usize {
        series_length(alpha, self.series_tol).max(1)
    }
}

/// Aggregated kernel weights between boundary nodes.
///
/// With `circulant` the kernel only depends on the node offset and rows are
/// offsets `0..n`; otherwise rows are `source * n + target`.
struct KernelTable {
    n: usize,
    circulant: bool,
    /// Hat weights per row, stored lag-reversed: `w[row][steps - l]`.
    w: Vec<Vec<f64>>,
    /// End corrections per row, by lag.
    r: Vec<Vec<f64>>,
}

/// Cubic residual moments aggregated like [`KernelTable`]: `b[row][r][m]`.
struct CubicTable {
    b: Vec<[Vec<f64>; 4]>,
}

/// Renewal operator for a problem on a grid.
struct Operator<'a> {
    problem: &'a Problem,
    nodes: Nodes,
    dt: f64,
    steps: usize,
    lambda: f64,
    k_max: usize,
    phis: Vec<(f64, f64)>,
    circulant: bool,
}

/// Chunk size for deterministic parallel reductions over channels.
const CHANNEL_CHUNK: usize = 64;

impl<'a> Operator<'a> {
    fn new(problem: &'a Problem, grid: &FluxGrid, lambda: f64) -> Result<Self> {
        grid.validate()?;
        let dim = problem.dim();
        if dim == Dim::Two && grid.n_theta < 3 {
            return Err(Error::param("n_theta", "need at least 3 boundary nodes"));
        }
        let nodes = Nodes::for_dim(dim, grid.n_theta);
        let circulant = dim == Dim::Two && problem.steady.profile.is_constant();
        Ok(Operator {
            problem,
            nodes,
            dt: grid.dt,
            steps: grid.steps(),
            lambda,
            k_max: grid.k_max(problem.alpha()),
            phis: angle_rule(grid.n_phi),
            circulant,
        })
    }

    fn n(&self) -> usize {
        self.nodes.len()
    }

    fn channels_of(&self, source: usize) -> Vec<Channel> {
        channels(self.nodes, &self.problem.steady.profile, self.problem.alpha(), self.k_max, &self.phis, source)
    }

    /// Row index of the kernel coupling `source` to `target`.
    fn row(&self, source: usize, target: usize) -> usize {
        let n = self.n();
        if self.circulant {
            (target + n - source) % n
        } else {
            source * n + target
        }
    }

    fn rows(&self) -> usize {
        if self.circulant {
            self.n()
        } else {
            self.n() * self.n()
        }
    }

    /// Sources whose channels define the table (one for circulant kernels).
    fn sources(&self) -> Vec<usize> {
        if self.circulant {
            vec![0]
        } else {
            (0..self.n()).collect()
        }
    }

    fn source_table(&self) -> Vec<Vec<f64>> {
        let ctx = SourceContext { problem: self.problem, phis: &self.phis, k_max: self.k_max };
        let mut table = ctx.table(self.nodes, self.dt, self.steps);
        if self.lambda > 0.0 {
            for row in &mut table {
                for (j, v) in row.iter_mut().enumerate() {
                    *v *= (-self.lambda * j as f64 * self.dt).exp();
                }
            }
        }
        table
    }

    fn hat_table(&self) -> KernelTable {
        let steps = self.steps;
        let law = law(self.problem.dim());
        let rows = self.rows();
        let mut w = vec![vec![0.0; steps + 1]; rows];
        let mut r = vec![vec![0.0; steps + 1]; rows];
        for source in self.sources() {
            let chans = self.channels_of(source);
            let partials: Vec<Vec<(Vec<f64>, Vec<f64>)>> = chans
                .par_chunks(CHANNEL_CHUNK)
                .map(|chunk| chunk.iter().map(|ch| hat_weights(law, ch.c, self.dt, steps, self.lambda)).collect())
                .collect();
            for (ch, (hw, hr)) in chans.iter().zip(partials.into_iter().flatten()) {
                for &(target, frac) in &ch.targets {
                    if frac == 0.0 {
                        continue;
                    }
                    let row = self.row(source, target);
                    let scale = ch.weight * frac;
                    for l in 0..=steps {
                        w[row][steps - l] += scale * hw[l];
                        r[row][l] += scale * hr[l];
                    }
                }
            }
        }
        KernelTable { n: self.n(), circulant: self.circulant, w, r }
    }

    fn cubic_table(&self) -> CubicTable {
        let steps = self.steps;
        let law = law(self.problem.dim());
        let rows = self.rows();
        let mut b: Vec<[Vec<f64>; 4]> =
            (0..rows).map(|_| [vec![0.0; steps], vec![0.0; steps], vec![0.0; steps], vec![0.0; steps]]).collect();
        for source in self.sources() {
            let chans = self.channels_of(source);
            let moments: Vec<[Vec<f64>; 4]> = chans
                .par_chunks(CHANNEL_CHUNK)
                .map(|chunk| {
                    chunk.iter().map(|ch| cubic_moments(law, ch.c, self.dt, steps, self.lambda)).collect::<Vec<_>>()
                })
                .collect::<Vec<_>>()
                .into_iter()
                .flatten()
                .collect();
            for (ch, mom) in chans.iter().zip(moments) {
                for &(target, frac) in &ch.targets {
                    if frac == 0.0 {
                        continue;
                    }
                    let row = self.row(source, target);
                    let scale = ch.weight * frac;
                    for k in 0..4 {
                        for (acc, v) in b[row][k].iter_mut().zip(&mom[k]) {
                            *acc += scale * v;
                        }
                    }
                }
            }
        }
        CubicTable { b }
    }

    /// Marches the renewal equation. Values are `[node][level]`.
    fn march(&self, src: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let table = self.hat_table();
        let values = if table.circulant {
            march_circulant(&table, src, self.steps)
        } else {
            march_dense(&table, src, self.steps)
        };
        for (i, row) in values.iter().enumerate() {
            if let Some(level) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteFlux { node: i, level });
            }
        }
        Ok(values)
    }

    /// Residual `|lhs - rhs|` per time level (max over nodes), with the right side
    /// evaluated by piecewise-cubic quadrature of the stored history.
    fn residual_profile(&self, src: &[Vec<f64>], values: &[Vec<f64>]) -> Vec<f64> {
        let n = self.n();
        let steps = self.steps;
        let cubic = self.cubic_table();
        // History with two ghost levels in front: index `level + 2`.
        let padded: Vec<Vec<f64>> = values
            .iter()
            .map(|h| {
                let mut p = Vec::with_capacity(h.len() + 2);
                if h.len() >= 4 {
                    p.push(10.0 * h[0] - 20.0 * h[1] + 15.0 * h[2] - 4.0 * h[3]);
                    p.push(4.0 * h[0] - 6.0 * h[1] + 4.0 * h[2] - h[3]);
                } else {
                    p.push(h[0]);
                    p.push(h[0]);
                }
                p.extend_from_slice(h);
                p
            })
            .collect();
        let mut profile = vec![0.0; steps + 1];
        if steps < 3 {
            return profile;
        }
        if self.circulant {
            let levels = residual_circulant(&cubic, src, values, &padded, steps);
            profile[3..].copy_from_slice(&levels[3..]);
            return profile;
        }
        let level_residual = |j: usize| -> f64 {
            let mut worst = 0.0f64;
            for i in 0..n {
                let mut rhs = src[i][j];
                for p in 0..n {
                    let b = &cubic.b[self.row(i, p)];
                    let h = &padded[p];
                    let mut acc = 0.0;
                    for m in 0..j {
                        for (r, bm) in b.iter().enumerate() {
                            let lag = stencil_lag(m, r);
                            acc += bm[m] * h[(j as isize - lag + 2) as usize];
                        }
                    }
                    rhs += acc;
                }
                worst = worst.max((values[i][j] - rhs).abs());
            }
            worst
        };
        let levels: Vec<f64> = (3..=steps).into_par_iter().map(level_residual).collect();
        profile[3..].copy_from_slice(&levels);
        profile
    }
}

fn march_dense(table: &KernelTable, src: &[Vec<f64>], steps: usize) -> Vec<Vec<f64>> {
    let n = table.n;
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| vec![src[i][0]; 1]).collect();
    for row in &mut h {
        row.reserve(steps);
    }
    let lag0 = |row: usize| table.w[row][steps];
    for j in 1..=steps {
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let mut acc = src[i][j];
            for p in 0..n {
                let row = i * n + p;
                let w = &table.w[row][steps - j..steps];
                acc += dot(w, &h[p][..j]) - table.r[row][j] * h[p][0];
            }
            rhs[i] = acc;
        }
        // Implicit lag-zero term: x = rhs + W0 x, W0 has row sums below one.
        let mut x = rhs.clone();
        for _ in 0..200 {
            let mut delta = 0.0f64;
            let next: Vec<f64> = (0..n).map(|i| rhs[i] + (0..n).map(|p| lag0(i * n + p) * x[p]).sum::<f64>()).collect();
            for i in 0..n {
                delta = delta.max((next[i] - x[i]).abs());
            }
            x = next;
            if delta <= 1e-16 * x.iter().fold(0.0f64, |a, v| a.max(v.abs())) {
                break;
            }
        }
        for i in 0..n {
            h[i].push(x[i]);
        }
    }
    h
}

fn march_circulant(table: &KernelTable, src: &[Vec<f64>], steps: usize) -> Vec<Vec<f64>> {
    let n = table.n;
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let transform = |values: &mut dyn Iterator<Item = f64>| -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.map(|v| Complex64::new(v, 0.0)).collect();
        forward.process(&mut buf);
        buf
    };
    // Conjugated kernel spectra by lag: the kernel acts as a correlation over offsets.
    let w_hat: Vec<Vec<Complex64>> = (0..=steps)
        .map(|l| transform(&mut (0..n).map(|o| table.w[o][steps - l])).into_iter().map(|c| c.conj()).collect())
        .collect();
    let r_hat: Vec<Vec<Complex64>> = (0..=steps)
        .map(|l| transform(&mut (0..n).map(|o| table.r[o][l])).into_iter().map(|c| c.conj()).collect())
        .collect();
    let mut h_hat: Vec<Vec<Complex64>> = Vec::with_capacity(steps + 1);
    let mut out = vec![vec![0.0; steps + 1]; n];
    h_hat.push(transform(&mut (0..n).map(|i| src[i][0])));
    for i in 0..n {
        out[i][0] = src[i][0];
    }
    let scale = 1.0 / n as f64;
    for j in 1..=steps {
        let mut acc = transform(&mut (0..n).map(|i| src[i][j]));
        for l in 1..=j {
            let (w, h) = (&w_hat[l], &h_hat[j - l]);
            for k in 0..n {
                acc[k] += w[k] * h[k];
            }
        }
        for k in 0..n {
            acc[k] -= r_hat[j][k] * h_hat[0][k];
            acc[k] /= Complex64::new(1.0, 0.0) - w_hat[0][k];
        }
        let mut back = acc.clone();
        inverse.process(&mut back);
        for i in 0..n {
            out[i][j] = back[i].re * scale;
        }
        // Keep the spectrum of the real-valued history.
        h_hat.push(transform(&mut (0..n).map(|i| out[i][j])));
    }
    out
}

/// Circulant residual: the cubic quadrature is applied in Fourier space.
fn residual_circulant(
    cubic: &CubicTable,
    src: &[Vec<f64>],
    values: &[Vec<f64>],
    padded: &[Vec<f64>],
    steps: usize,
) -> Vec<f64> {
    let n = values.len();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let transform = |column: &dyn Fn(usize) -> f64| -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = (0..n).map(|i| Complex64::new(column(i), 0.0)).collect();
        forward.process(&mut buf);
        buf
    };
    // Spectra of the padded history: index `level + 2`.
    let h_hat: Vec<Vec<Complex64>> = (0..steps + 3).map(|q| transform(&|i| padded[i][q])).collect();
    let b_hat: Vec<[Vec<Complex64>; 4]> = (0..steps)
        .map(|m| {
            let spec = |r: usize| -> Vec<Complex64> {
                transform(&|o| cubic.b[o][r][m]).into_iter().map(|c| c.conj()).collect()
            };
            [spec(0), spec(1), spec(2), spec(3)]
        })
        .collect();
    let scale = 1.0 / n as f64;
    (0..=steps)
        .into_par_iter()
        .map(|j| {
            if j < 3 {
                return 0.0;
            }
            let mut acc = vec![Complex64::new(0.0, 0.0); n];
            for m in 0..j {
                for r in 0..4 {
                    let h = &h_hat[(j as isize - stencil_lag(m, r) + 2) as usize];
                    let b = &b_hat[m][r];
                    for k in 0..n {
                        acc[k] += b[k] * h[k];
                    }
                }
            }
            inverse.process(&mut acc);
            (0..n).fold(0.0f64, |worst, i| worst.max((values[i][j] - src[i][j] - acc[i].re * scale).abs()))
        })
        .collect()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the boundary-flux renewal equation on `grid`.
pub fn solve_flux(problem: &Problem, grid: &FluxGrid) -> Result<FluxHistory> {
    solve_with_rate(problem, grid, 0.0)
}

/// Solves the renewal equation with every kernel and source term damped by
/// `exp(-rate t)`, the form taken by constant collision frequency `rate = nu / kappa`.
pub fn solve_with_rate(problem: &Problem, grid: &FluxGrid, rate: f64) -> Result<FluxHistory> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::param("rate", format!("damping rate must be nonnegative, got {rate}")));
    }
    let op = Operator::new(problem, grid, rate)?;
    let src = op.source_table();
    let values = op.march(&src)?;
    let mut history = FluxHistory { dim: problem.dim(), nodes: op.n(), dt: grid.dt, values, residual: None };
    if let Some(tol) = grid.residual_tol {
        let profile = op.residual_profile(&src, &history.values);
        let residual = profile.iter().fold(0.0f64, |a, &v| a.max(v));
        let tolerance = tol * history.sup().max(f64::MIN_POSITIVE);
        history.residual = Some(residual);
        if !(residual <= tolerance) {
            return Err(Error::ResidualCheck { residual, tolerance, profile });
        }
    }
    Ok(history)
}

/// Largest residual of the renewal equation over the stored history.
///
/// The right side is re-evaluated with piecewise-cubic interpolation of the
/// history, independent of the hat scheme used for marching.
pub fn flux_residual(problem: &Problem, grid: &FluxGrid, history: &FluxHistory) -> Result<f64> {
    Ok(residual_profile(problem, grid, history)?.into_iter().fold(0.0, f64::max))
}

/// Residual per time level (max over boundary nodes).
pub fn residual_profile(problem: &Problem, grid: &FluxGrid, history: &FluxHistory) -> Result<Vec<f64>> {
    residual_profile_with_rate(problem, grid, history, 0.0)
}

pub(crate) fn residual_profile_with_rate(
    problem: &Problem,
    grid: &FluxGrid,
    history: &FluxHistory,
    rate: f64,
) -> Result<Vec<f64>> {
    let op = Operator::new(problem, grid, rate)?;
    if history.nodes != op.n() || history.steps() != op.steps || history.dt != grid.dt {
        return Err(Error::param("history", "history does not match the grid"));
    }
    let src = op.source_table();
    Ok(op.residual_profile(&src, &history.values))
}

/// `j_g - rho_* / C_S`.
pub fn deviation_flux(history: &FluxHistory, rho_star: f64, c_s: f64) -> FluxHistory {
    history.deviation(rho_star, c_s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(t_max: f64, n_theta: usize) -> FluxGrid {
        FluxGrid { dt: 0.05, t_max, n_theta, n_phi: 32, series_tol: 1e-10, residual_tol: Some(1e-4) }
    }

    #[test]
    fn steady_data_is_a_fixed_point_on_nonuniform_walls() {
        for alpha in [0.5, 1.0] {
            let problem = Problem::new(
                TemperatureProfile::walls(0.6, 1.0).unwrap(),
                alpha,
                InitialData::ScaledSteady { rho0: 2.0 },
            )
            .unwrap();
            let h = solve_flux(&problem, &grid(20.0, 8)).unwrap();
            let target = 2.0 / problem.steady.c_s;
            let dev = deviation_flux(&h, 2.0, problem.steady.c_s);
            assert!(dev.sup() < 1e-6 * target, "alpha {alpha}: {}", dev.sup());
        }
    }

    #[test]
    fn steady_data_is_a_fixed_point_on_the_disk() {
        let problem =
            Problem::new(TemperatureProfile::cosine_dip(0.2).unwrap(), 0.5, InitialData::ScaledSteady { rho0: 1.0 })
                .unwrap();
        let mut g = grid(4.0, 16);
        g.n_phi = 24;
        let h = solve_flux(&problem, &g).unwrap();
        let dev = deviation_flux(&h, 1.0, problem.steady.c_s).sup();
        assert!(dev < 1e-4 / problem.steady.c_s, "{dev}");
    }

    #[test]
    fn circulant_and_dense_paths_agree() {
        // Constant profile uses the FFT path; a profile with a negligible dip forces the dense path.
        let data = InitialData::UniformMaxwellian { rho0: 1.0, temperature: 0.5 };
        let g = FluxGrid { t_max: 3.0, n_theta: 12, n_phi: 16, residual_tol: None, ..FluxGrid::default() };
        let fast =
            solve_flux(&Problem::new(TemperatureProfile::constant(Dim::Two), 0.7, data.clone()).unwrap(), &g).unwrap();
        let dense_problem = Problem::new(TemperatureProfile::cosine_dip(1e-13).unwrap(), 0.7, data).unwrap();
        assert!(!dense_problem.steady.profile.is_constant());
        let dense = solve_flux(&dense_problem, &g).unwrap();
        for i in 0..12 {
            for j in 0..=g.steps() {
                assert!((fast.values[i][j] - dense.values[i][j]).abs() < 1e-10);
            }
        }
        let fast_problem =
            Problem::new(TemperatureProfile::constant(Dim::Two), 0.7, dense_problem.initial.clone()).unwrap();
        let a = residual_profile(&fast_problem, &g, &fast).unwrap();
        let b = residual_profile(&dense_problem, &g, &dense).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn initial_level_is_incoming_flux() {
        let problem = Problem::new(
            TemperatureProfile::walls(0.5, 1.0).unwrap(),
            0.8,
            InitialData::Separable { rho0: 1.0, gradient: 0.3, temperature: 0.7 },
        )
        .unwrap();
        let h = solve_flux(&problem, &grid(2.0, 8)).unwrap();
        for wall in [Wall::Left, Wall::Right] {
            let expect = problem.initial.incoming_flux(&problem.steady, BoundaryPoint::Wall(wall));
            assert!((h.values[wall.index()][0] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn corrupted_history_is_detected() {
        let problem = Problem::new(
            TemperatureProfile::constant(Dim::One),
            1.0,
            InitialData::UniformMaxwellian { rho0: 1.0, temperature: 0.5 },
        )
        .unwrap();
        let g = grid(10.0, 8);
        let mut h = solve_flux(&problem, &g).unwrap();
        assert!(flux_residual(&problem, &g, &h).unwrap() < 1e-4 * h.sup());
        h.values[1][100] *= 1.1;
        assert!(flux_residual(&problem, &g, &h).unwrap() > 1e-3);
    }

    #[test]
    fn grid_validation() {
        assert!(FluxGrid { dt: 0.1, ..FluxGrid::default() }.validate().is_err());
        assert!(FluxGrid { t_max: -1.0, ..FluxGrid::default() }.validate().is_err());
        assert_eq!(FluxGrid::default().k_max(1.0), 1);
        assert_eq!(FluxGrid::default().k_max(0.5), 35);
    }
}
