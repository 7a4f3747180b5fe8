//! Decay-rate fitting, decay envelopes, the law-of-large-numbers experiment,
//! configuration and experiment orchestration.

pub mod config;
pub mod run;

use crate::error::{Error, Result};
use crate::flux_solver::{fmt17, FluxHistory};
use crate::geometry::Dim;
use crate::kernels::convolve_tail;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Least-squares power law `value ~ amplitude * t^exponent` on a window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub window: [f64; 2],
    pub exponent: f64,
    pub amplitude: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub points: usize,
}

/// Smallest number of samples a rate fit accepts.
pub const MIN_FIT_POINTS: usize = 10;

/// Fits the slope of `ln |value|` against `ln t` over samples with `t` in `window`.
pub fn fit_decay_rate(series: &[(f64, f64)], window: [f64; 2]) -> Result<RateFit> {
    let [lo, hi] = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Fit(format!("window [{lo}, {hi}] must satisfy 0 < t_lo < t_hi")));
    }
    let last = series.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if hi > last * (1.0 + 1e-12) {
        return Err(Error::Fit(format!("window end {hi} lies beyond the last sample {last}")));
    }
    let mut pts = Vec::new();
    for &(t, v) in series.iter().filter(|p| p.0 >= lo * (1.0 - 1e-12) && p.0 <= hi * (1.0 + 1e-12)) {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Fit(format!("cannot fit power law: value {v} at t = {t} is not positive")));
        }
        pts.push((t.ln(), v.ln()));
    }
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!("need at least {MIN_FIT_POINTS} points in the window, found {}", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    if !slope.is_finite() {
        return Err(Error::Fit("degenerate window".into()));
    }
    Ok(RateFit { window, exponent: slope, amplitude: intercept.exp(), residual: (rss / n).sqrt(), points: pts.len() })
}

/// `(t, max_i |value_i(t)|)` over the boundary nodes of a history.
pub fn sup_series(history: &FluxHistory) -> Vec<(f64, f64)> {
    (0..=history.steps())
        .map(|j| (history.time(j), history.values.iter().map(|r| r[j].abs()).fold(0.0, f64::max)))
        .collect()
}

/// Decay envelope `(1 + alpha t)^(-d) + (1 - alpha)^(t^(1/400))`.
pub fn envelope(alpha: f64, dim: Dim, t: f64) -> f64 {
    (1.0 + alpha * t).powi(-(dim.value() as i32)) + (1.0 - alpha).powf(t.powf(1.0 / 400.0))
}

/// Envelope constant of a deviation series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    /// `sup_t |value(t)| / envelope(t)`.
    pub c_fit: f64,
    /// Time at which the supremum is attained.
    pub t_at: f64,
    pub pass: bool,
}

/// Computes the envelope constant; passes when it is finite.
pub fn envelope_check(series: &[(f64, f64)], alpha: f64, dim: Dim) -> EnvelopeCheck {
    let mut best = EnvelopeCheck { c_fit: 0.0, t_at: 0.0, pass: true };
    for &(t, v) in series {
        let r = v.abs() / envelope(alpha, dim, t);
        if !(r <= best.c_fit) {
            best.c_fit = r;
            best.t_at = t;
        }
    }
    best.pass = best.c_fit.is_finite();
    best
}

/// True when two envelope constants agree within a factor of two.
pub fn envelope_stable(a: f64, b: f64) -> bool {
    if a == 0.0 && b == 0.0 {
        return true;
    }
    a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0 && a.max(b) / a.min(b) < 2.0
}

/// Grid of the law-of-large-numbers experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlnSpec {
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    /// Smallest `gamma / (m n)^(1/(d+1))`.
    pub gamma_factor: f64,
    /// Number of geometrically spaced gamma values.
    pub gamma_points: usize,
    /// Ratio between the largest and smallest gamma.
    pub gamma_span: f64,
    pub trials: usize,
}

impl Default for LlnSpec {
    fn default() -> Self {
        LlnSpec {
            n: vec![20, 50, 100],
            m: vec![1, 2, 4],
            gamma_factor: 10.0,
            gamma_points: 3,
            gamma_span: 10.0,
            trials: 100_000,
        }
    }
}

impl LlnSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() || self.m.is_empty() || self.n.contains(&0) || self.m.contains(&0) {
            return Err(Error::param("lln", "n and m need at least one positive entry each"));
        }
        if !(self.gamma_factor > 0.0) || self.gamma_points == 0 || !(self.gamma_span >= 1.0) {
            return Err(Error::param("lln", "gamma grid must be positive and non-empty"));
        }
        if self.trials < 10_000 {
            return Err(Error::param("lln", "need at least 10^4 trials"));
        }
        Ok(())
    }

    /// Gamma values for `(n, m)`.
    pub fn gammas(&self, dim: Dim, n: usize, m: usize) -> Vec<f64> {
        let g0 = self.gamma_factor * ((m * n) as f64).powf(1.0 / (dim.value() as f64 + 1.0));
        let p = self.gamma_points;
        (0..p).map(|i| if p == 1 { g0 } else { g0 * self.gamma_span.powf(i as f64 / (p - 1) as f64) }).collect()
    }
}

/// Bound `m^(d+1) n^d ln(gamma + 1) / gamma^(d+1)` on the tail probability.
pub fn lln_bound(dim: Dim, n: usize, m: usize, gamma: f64) -> f64 {
    let d = dim.value() as i32;
    (m as f64).powi(d + 1) * (n as f64).powi(d) * (gamma + 1.0).ln() / gamma.powi(d + 1)
}

/// One row of the law-of-large-numbers table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlnRow {
    pub n: usize,
    pub m: usize,
    pub gamma: f64,
    pub probability: f64,
    pub std_error: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// Empirical tails over the grid with their ratios to the bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlnTable {
    pub dim: Dim,
    pub trials: usize,
    pub rows: Vec<LlnRow>,
}

impl LlnTable {
    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio).fold(0.0, f64::max)
    }

    /// Largest ratio among cells with at least `min_hits` tail events, so that
    /// single rare hits do not dominate the maximum.
    pub fn max_resolved_ratio(&self, min_hits: f64) -> f64 {
        self.rows.iter().filter(|r| r.probability * self.trials as f64 >= min_hits).map(|r| r.ratio).fold(0.0, f64::max)
    }

    /// Writes `n,m,gamma,probability,std_error,bound,ratio` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,m,gamma,probability,std_error,bound,ratio")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.n,
                r.m,
                fmt17(r.gamma),
                fmt17(r.probability),
                fmt17(r.std_error),
                fmt17(r.bound),
                fmt17(r.ratio)
            )?;
        }
        Ok(())
    }
}

/// Runs the tail estimate `P(|X_1 + ... + X_n - n E X| > gamma / m)` on the grid.
pub fn lln_experiment(spec: &LlnSpec, dim: Dim, seed: u64) -> Result<LlnTable> {
    spec.validate()?;
    let mut rows = Vec::new();
    let mut cell = 0u64;
    for &n in &spec.n {
        for &m in &spec.m {
            for gamma in spec.gammas(dim, n, m) {
                let root = seed.wrapping_add(cell.wrapping_mul(0x9E37_79B9_7F4A_7C15));
                cell += 1;
                let est = convolve_tail(dim, n, gamma / m as f64, spec.trials, root)?;
                let bound = lln_bound(dim, n, m, gamma);
                rows.push(LlnRow {
                    n,
                    m,
                    gamma,
                    probability: est.probability,
                    std_error: est.std_error,
                    bound,
                    ratio: est.probability / bound,
                });
            }
        }
    }
    Ok(LlnTable { dim, trials: spec.trials, rows })
}
