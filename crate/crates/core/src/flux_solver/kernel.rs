//! Discrete renewal kernels: specular-chain channels, exact hat-function
//! weights and cubic residual moments.

use super::Nodes;
use crate::geometry::{Dim, Wall};
use crate::kernels::SpeedLaw;
use crate::quadrature::GaussRule;
use crate::steady_state::TemperatureProfile;
use std::f64::consts::PI;

/// Above this normalised speed the flight-time laws carry less than `1e-39` mass.
const U_CUT: f64 = 9.5;

/// One specular chain (hop count `k`, incidence angle) seen from a source node.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Channel {
    /// `alpha (1 - alpha)^(k-1)` times the angular quadrature weight and density.
    pub weight: f64,
    /// Flight time is `c / u` with `u` distributed by the speed law.
    pub c: f64,
    /// Emission nodes with linear interpolation weights.
    pub targets: [(usize, f64); 2],
}

/// Channels for source node `i`, or for the zero-offset node if `relative` is set
/// (then targets are node offsets).
pub(crate) fn channels(
    nodes: Nodes,
    profile: &TemperatureProfile,
    alpha: f64,
    k_max: usize,
    phis: &[(f64, f64)],
    source: usize,
) -> Vec<Channel> {
    let mut out = Vec::new();
    let q = 1.0 - alpha;
    let mut chain = alpha;
    for k in 1..=k_max {
        match nodes {
            Nodes::Walls => {
                let wall = Wall::from_index(source).after_hops(k);
                let t = profile.at_wall(wall);
                out.push(Channel {
                    weight: chain,
                    c: 2.0 * k as f64 / t.sqrt(),
                    targets: [(wall.index(), 1.0), (wall.index(), 0.0)],
                });
            }
            Nodes::Angles(n) => {
                let h = 2.0 * PI / n as f64;
                let theta = h * source as f64;
                for &(phi, w) in phis {
                    let dest = theta + k as f64 * (PI - 2.0 * phi);
                    let t = profile.at_angle(dest);
                    let x = (dest / h).rem_euclid(n as f64);
                    let p = (x.floor() as usize).min(n - 1);
                    let frac = x - p as f64;
                    out.push(Channel {
                        weight: chain * w * 0.5 * phi.cos(),
                        c: 2.0 * k as f64 * phi.cos() / t.sqrt(),
                        targets: [(p, 1.0 - frac), ((p + 1) % n, frac)],
                    });
                }
            }
        }
        chain *= q;
    }
    out
}

/// Speed law for the dimension.
pub(crate) fn law(dim: Dim) -> SpeedLaw {
    SpeedLaw(dim)
}

/// Speed interval `[u_{m+1}, u_m)` that maps to flight times `[s_m, s_{m+1})`.
#[inline]
fn interval(c: f64, dt: f64, m: usize) -> (f64, f64) {
    let hi = if m == 0 { f64::INFINITY } else { c / (m as f64 * dt) };
    (c / ((m + 1) as f64 * dt), hi)
}

/// Gauss nodes covering `[lo, hi)` in the speed variable, cut at `U_CUT`.
fn speed_nodes(lo: f64, hi: f64, mut f: impl FnMut(f64, f64)) {
    thread_local! {
        static RULES: (GaussRule, GaussRule) = (GaussRule::new(3), GaussRule::new(6));
    }
    let hi = hi.min(U_CUT.max(lo));
    if !(hi > lo) {
        return;
    }
    RULES.with(|(short, long)| {
        let width = hi - lo;
        if width < 0.05 {
            for (u, w) in short.mapped(lo, hi) {
                f(u, w);
            }
        } else {
            let panels = (width / 0.4).ceil() as usize;
            let h = width / panels as f64;
            for p in 0..panels {
                for (u, w) in long.mapped(lo + h * p as f64, lo + h * (p + 1) as f64) {
                    f(u, w);
                }
            }
        }
    });
}

/// Hat-function weights of one channel.
///
/// Returns `w` with `w[l]` the weight of the history value at lag `l`
/// (`l = 0..=steps`) and `r` with `r[j]` the part of `w[j]` that must be
/// removed when lag `j` reaches back to time zero.
pub(crate) fn hat_weights(law: SpeedLaw, c: f64, dt: f64, steps: usize, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; steps + 1];
    let mut q = vec![0.0; steps + 1];
    for m in 0..=steps {
        let (lo, hi) = interval(c, dt, m);
        let mass = law.mass(lo, hi);
        let first = c * law.inverse_moment(lo, hi) / dt;
        let mut pm = mass;
        let mut qm = first - m as f64 * mass;
        if lambda > 0.0 {
            // Subtract the part removed by the factor exp(-lambda s).
            let (mut dp, mut dq) = (0.0, 0.0);
            speed_nodes(lo, hi, |u, w| {
                let s = c / u;
                let loss = -(-lambda * s).exp_m1() * law.pdf(u) * w;
                dp += loss;
                dq += loss * (s / dt - m as f64);
            });
            pm -= dp;
            qm -= dq;
        }
        p[m] = pm;
        q[m] = qm;
    }
    let mut w = vec![0.0; steps + 1];
    let mut r = vec![0.0; steps + 1];
    for l in 0..=steps {
        w[l] = p[l] - q[l] + if l > 0 { q[l - 1] } else { 0.0 };
        r[l] = p[l] - q[l];
    }
    (w, r)
}

/// Cubic Lagrange basis on nodes `{-1, 0, 1, 2}` (or `{0, 1, 2, 3}` if `one_sided`).
#[inline]
fn cubic_basis(tau: f64, one_sided: bool) -> [f64; 4] {
    let x = if one_sided { tau - 1.0 } else { tau };
    // Nodes -1, 0, 1, 2 in the shifted variable.
    let a = x + 1.0;
    let b = x;
    let c = x - 1.0;
    let d = x - 2.0;
    [-b * c * d / 6.0, a * c * d / 2.0, -a * b * d / 2.0, a * b * c / 6.0]
}

/// Residual-quadrature moments of one channel: `b[r][m]` is the weight of
/// stencil point `r` of interval `m` (`m = 0..steps-1`) under a local cubic
/// interpolation of the history, including the damping factor.
pub(crate) fn cubic_moments(law: SpeedLaw, c: f64, dt: f64, steps: usize, lambda: f64) -> [Vec<f64>; 4] {
    let mut b = [vec![0.0; steps], vec![0.0; steps], vec![0.0; steps], vec![0.0; steps]];
    for m in 0..steps {
        let (lo, hi) = interval(c, dt, m);
        speed_nodes(lo, hi, |u, w| {
            let s = c / u;
            let mut weight = law.pdf(u) * w;
            if lambda > 0.0 {
                weight *= (-lambda * s).exp();
            }
            let tau = s / dt - m as f64;
            let basis = cubic_basis(tau, m == 0);
            for r in 0..4 {
                b[r][m] += weight * basis[r];
            }
        });
    }
    b
}

/// History lag of stencil point `r` of interval `m`.
#[inline]
pub(crate) fn stencil_lag(m: usize, r: usize) -> isize {
    if m == 0 {
        r as isize
    } else {
        m as isize - 1 + r as isize
    }
}
