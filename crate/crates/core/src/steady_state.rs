//! Wall temperature profiles and the explicit steady state.

use crate::error::{Error, Result};
use crate::geometry::{BoundaryPoint, Dim, DomainGeometry, Wall};
use crate::kernels::{diffuse_factor, maxwellian, reduced_maxwellian, GAS_CONSTANT};
use crate::quadrature::{angle_rule, GaussRule};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Default truncation tolerance of the steady-state series.
pub const STEADY_SERIES_TOL: f64 = 1e-12;

/// Wall temperature, rescaled so that its maximum is exactly `T* = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TemperatureProfile {
    /// Slab walls `T(-1)` and `T(+1)`.
    Walls { left: f64, right: f64 },
    /// Truncated Fourier series in the polar angle.
    Fourier { a0: f64, cos: Vec<f64>, sin: Vec<f64> },
}

impl TemperatureProfile {
    /// Constant temperature `T* = 1` in the given dimension.
    pub fn constant(dim: Dim) -> Self {
        match dim {
            Dim::One => TemperatureProfile::Walls { left: 1.0, right: 1.0 },
            Dim::Two => TemperatureProfile::Fourier { a0: 1.0, cos: vec![], sin: vec![] },
        }
    }

    /// Slab walls, rescaled so the hotter wall has temperature 1.
    pub fn walls(left: f64, right: f64) -> Result<Self> {
        if !(left > 0.0 && right > 0.0 && left.is_finite() && right.is_finite()) {
            return Err(Error::param("profile", "wall temperatures must be positive"));
        }
        let m = left.max(right);
        Ok(TemperatureProfile::Walls { left: left / m, right: right / m })
    }

    /// `T(theta) = 1 - amplitude (1 + cos theta) / 2`, coldest at `theta = 0`.
    pub fn cosine_dip(amplitude: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&amplitude) {
            return Err(Error::param("profile", "amplitude must lie in [0, 1)"));
        }
        Self::fourier(1.0 - 0.5 * amplitude, vec![-0.5 * amplitude], vec![])
    }

    /// Fourier profile `a0 + sum a_k cos(k theta) + b_k sin(k theta)`, rescaled to maximum 1.
    pub fn fourier(a0: f64, cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        let raw = TemperatureProfile::Fourier { a0, cos, sin };
        let (lo, hi) = raw.extremes();
        if !(lo > 0.0 && hi.is_finite()) {
            return Err(Error::param("profile", format!("temperature must stay positive (min {lo})")));
        }
        match raw {
            TemperatureProfile::Fourier { a0, cos, sin } => Ok(TemperatureProfile::Fourier {
                a0: a0 / hi,
                cos: cos.into_iter().map(|c| c / hi).collect(),
                sin: sin.into_iter().map(|s| s / hi).collect(),
            }),
            TemperatureProfile::Walls { .. } => unreachable!(),
        }
    }

    pub fn dim(&self) -> Dim {
        match self {
            TemperatureProfile::Walls { .. } => Dim::One,
            TemperatureProfile::Fourier { .. } => Dim::Two,
        }
    }

    /// Checks positivity and the normalisation `sup T = 1`.
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.extremes();
        if !(lo > 0.0) {
            return Err(Error::param("profile", format!("minimum temperature {lo} is not positive")));
        }
        if (hi - 1.0).abs() > 1e-9 {
            return Err(Error::param("profile", format!("maximum temperature {hi} is not 1")));
        }
        Ok(())
    }

    pub fn at_wall(&self, wall: Wall) -> f64 {
        match self {
            TemperatureProfile::Walls { left, right } => match wall {
                Wall::Left => *left,
                Wall::Right => *right,
            },
            TemperatureProfile::Fourier { .. } => self.at_angle(if wall == Wall::Left { PI } else { 0.0 }),
        }
    }

    pub fn at_angle(&self, theta: f64) -> f64 {
        match self {
            TemperatureProfile::Fourier { a0, cos, sin } => {
                let mut t = *a0;
                for (k, c) in cos.iter().enumerate() {
                    t += c * ((k + 1) as f64 * theta).cos();
                }
                for (k, s) in sin.iter().enumerate() {
                    t += s * ((k + 1) as f64 * theta).sin();
                }
                t
            }
            TemperatureProfile::Walls { left, right } => {
                if theta.cos() < 0.0 {
                    *left
                } else {
                    *right
                }
            }
        }
    }

    pub fn at(&self, y: BoundaryPoint<f64>) -> f64 {
        match y {
            BoundaryPoint::Wall(w) => self.at_wall(w),
            BoundaryPoint::Circle(theta) => self.at_angle(theta),
        }
    }

    /// Temperature at a Cartesian boundary position.
    pub fn at_position(&self, y: [f64; 2]) -> f64 {
        match self {
            TemperatureProfile::Walls { left, right } => {
                if y[0] < 0.0 {
                    *left
                } else {
                    *right
                }
            }
            TemperatureProfile::Fourier { .. } => self.at_angle(y[1].atan2(y[0])),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            TemperatureProfile::Walls { left, right } => left == right,
            TemperatureProfile::Fourier { cos, sin, .. } => cos.iter().chain(sin).all(|c| *c == 0.0),
        }
    }

    /// `T_* = inf T`.
    pub fn t_min(&self) -> f64 {
        self.extremes().0
    }

    /// `(inf T, sup T)`; for Fourier profiles located by sampling and golden-section refinement.
    pub fn extremes(&self) -> (f64, f64) {
        match self {
            TemperatureProfile::Walls { left, right } => (left.min(*right), left.max(*right)),
            TemperatureProfile::Fourier { .. } => {
                let n = 4096;
                let h = TAU / n as f64;
                let samples: Vec<f64> = (0..n).map(|i| self.at_angle(h * i as f64)).collect();
                let refine = |sign: f64| {
                    let (i0, _) = samples
                        .iter()
                        .enumerate()
                        .max_by(|a, b| (sign * a.1).total_cmp(&(sign * b.1)))
                        .expect("non-empty");
                    let (mut a, mut b) = (h * (i0 as f64 - 1.0), h * (i0 as f64 + 1.0));
                    let g = 0.5 * (5f64.sqrt() - 1.0);
                    for _ in 0..80 {
                        let c = b - g * (b - a);
                        let d = a + g * (b - a);
                        if sign * self.at_angle(c) > sign * self.at_angle(d) {
                            b = d;
                        } else {
                            a = c;
                        }
                    }
                    self.at_angle(0.5 * (a + b))
                        .max(if sign > 0.0 { samples[i0] } else { f64::MIN })
                        .min(if sign < 0.0 { samples[i0] } else { f64::MAX })
                };
                (refine(-1.0), refine(1.0))
            }
        }
    }
}

/// Explicit steady state of free molecular flow with Maxwell-type walls.
#[derive(Clone, Debug)]
pub struct SteadyState {
    pub geometry: DomainGeometry,
    pub profile: TemperatureProfile,
    pub alpha: f64,
    /// Normalisation constant `C_S`.
    pub c_s: f64,
    pub series_tol: f64,
    terms: usize,
}

/// Number of series terms so that `(1 - alpha)^(n - 1) < tol`.
pub fn series_length(alpha: f64, tol: f64) -> usize {
    if alpha >= 1.0 {
        return 1;
    }
    ((tol.ln() / (1.0 - alpha).ln()).ceil() as usize + 1).max(1)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("accommodation coefficient {alpha} is not in (0, 1]")))
    }
}

impl SteadyState {
    /// Builds the steady state with the default series tolerance.
    pub fn new(profile: TemperatureProfile, alpha: f64) -> Result<Self> {
        Self::with_tolerance(profile, alpha, STEADY_SERIES_TOL)
    }

    pub fn with_tolerance(profile: TemperatureProfile, alpha: f64, series_tol: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(series_tol > 0.0 && series_tol < 1.0) {
            return Err(Error::param("series_tol", "must lie in (0, 1)"));
        }
        profile.validate()?;
        let c_s = compute_c_s(&profile, alpha, series_tol)?;
        Ok(Self {
            geometry: DomainGeometry::new(profile.dim()),
            profile,
            alpha,
            c_s,
            series_tol,
            terms: series_length(alpha, series_tol),
        })
    }

    pub fn dim(&self) -> Dim {
        self.geometry.dim
    }

    /// Number of retained series terms.
    pub fn terms(&self) -> usize {
        self.terms
    }

    /// Boundary flux of the steady state, `1 / C_S`.
    pub fn flux(&self) -> f64 {
        1.0 / self.c_s
    }

    /// Calls `f(weight, T_i)` for every retained series term along the
    /// backward specular orbit of `(x, xi)`; the weights are `alpha (1-alpha)^(i-1)`.
    pub fn for_each_term(&self, x: [f64; 2], xi: [f64; 2], mut f: impl FnMut(f64, f64)) -> Result<()> {
        let q = 1.0 - self.alpha;
        match self.dim() {
            Dim::One => {
                if xi[0] == 0.0 {
                    return Err(Error::UndefinedSteadyState);
                }
                let first = if xi[0] > 0.0 { Wall::Left } else { Wall::Right };
                let (t_first, t_other) = (self.profile.at_wall(first), self.profile.at_wall(first.opposite()));
                let mut w = self.alpha;
                for i in 0..self.terms {
                    f(w, if i % 2 == 0 { t_first } else { t_other });
                    w *= q;
                }
            }
            Dim::Two => {
                let (y, _) = self.geometry.boundary_trace(x, xi).map_err(|_| Error::UndefinedSteadyState)?;
                let xi1 = self.geometry.reflect(xi, self.geometry.inward_normal(y));
                let phi = self.geometry.incidence_angle(y, xi1);
                let theta = y[1].atan2(y[0]);
                let hop = PI - 2.0 * phi;
                let mut w = self.alpha;
                for i in 0..self.terms {
                    f(w, self.profile.at_angle(theta + i as f64 * hop));
                    w *= q;
                }
            }
        }
        Ok(())
    }

    /// `S(x, zeta)`. Boundary points are accepted; there the backward trace
    /// of an outgoing velocity starts at `x` itself.
    pub fn evaluate(&self, x: [f64; 2], zeta: [f64; 3]) -> Result<f64> {
        let xi = self.xi(zeta);
        let mut acc = 0.0;
        self.for_each_term(x, xi, |w, t| {
            acc += w * diffuse_factor(t) * maxwellian(zeta, t).unwrap_or(0.0);
        })?;
        Ok(acc / self.c_s)
    }

    /// Reduced steady state `int S d eta` together with `int |eta|^2 S d eta`.
    pub fn evaluate_reduced(&self, x: [f64; 2], xi: [f64; 2]) -> Result<(f64, f64)> {
        let d = self.dim();
        let xi_slice = &xi[..d.value()];
        let eta_dims = (3 - d.value()) as f64;
        let (mut mass, mut eta) = (0.0, 0.0);
        self.for_each_term(x, xi, |w, t| {
            let m = w * diffuse_factor(t) * reduced_maxwellian(xi_slice, t).unwrap_or(0.0);
            mass += m;
            eta += m * eta_dims * GAS_CONSTANT * t;
        })?;
        Ok((mass / self.c_s, eta / self.c_s))
    }

    fn xi(&self, zeta: [f64; 3]) -> [f64; 2] {
        match self.dim() {
            Dim::One => [zeta[0], 0.0],
            Dim::Two => [zeta[0], zeta[1]],
        }
    }

    /// Incoming boundary flux `int_{xi.n<0} (-xi.n) S(y, zeta) d zeta` by quadrature.
    pub fn boundary_flux(&self, y: BoundaryPoint<f64>) -> f64 {
        let pos = y.position();
        let n = y.inward_normal();
        let speeds = speed_rule();
        match self.dim() {
            Dim::One => {
                // Incoming: xi.n < 0.
                let dir = -n[0];
                speeds
                    .iter()
                    .map(|&(v, w)| {
                        let (m, _) = self.evaluate_reduced(pos, [dir * v, 0.0]).unwrap_or((0.0, 0.0));
                        w * v * m
                    })
                    .sum()
            }
            Dim::Two => {
                let mut acc = 0.0;
                for (phi, wphi) in angle_rule(64) {
                    // Backward direction -xi makes angle phi with n.
                    let back = crate::geometry::chord_direction(pos[1].atan2(pos[0]), phi);
                    for &(v, w) in &speeds {
                        let xi = [-v * back[0], -v * back[1]];
                        let (m, _) = self.evaluate_reduced(pos, xi).unwrap_or((0.0, 0.0));
                        acc += wphi * w * v * v * phi.cos() * m;
                    }
                }
                acc
            }
        }
    }

    /// Average density `(1/|D|) int S dx dzeta` by nested quadrature.
    pub fn average_density(&self) -> f64 {
        let speeds = speed_rule();
        match self.dim() {
            Dim::One => {
                let rule = GaussRule::new(32);
                let total: f64 = rule
                    .mapped(-1.0, 1.0)
                    .map(|(x, wx)| {
                        let mut acc = 0.0;
                        for dir in [-1.0, 1.0] {
                            for &(v, w) in &speeds {
                                acc += w * self.evaluate_reduced([x, 0.0], [dir * v, 0.0]).unwrap().0;
                            }
                        }
                        wx * acc
                    })
                    .sum();
                total / 2.0
            }
            Dim::Two => {
                let radial = GaussRule::new(24);
                let n_dir = 64;
                let n_pos_angle = 32;
                let total: f64 = radial
                    .mapped(0.0, 1.0)
                    .collect::<Vec<_>>()
                    .par_iter()
                    .map(|&(r, wr)| {
                        let mut acc = 0.0;
                        for a in 0..n_pos_angle {
                            let psi = TAU * (a as f64 + 0.5) / n_pos_angle as f64;
                            let x = [r * psi.cos(), r * psi.sin()];
                            for b in 0..n_dir {
                                let om = TAU * (b as f64 + 0.25) / n_dir as f64;
                                for &(v, w) in &speeds {
                                    let xi = [v * om.cos(), v * om.sin()];
                                    acc += w * v * self.evaluate_reduced(x, xi).unwrap().0;
                                }
                            }
                        }
                        wr * r * acc * (TAU / n_pos_angle as f64) * (TAU / n_dir as f64)
                    })
                    .sum();
                total / PI
            }
        }
    }

    /// Residual of the wall relation
    /// `S(y, xi) = (1 - alpha) S(y, R xi) + alpha M~_{T(y)}(zeta) / C_S` for outgoing `xi`.
    pub fn boundary_condition_residual(&self, y: [f64; 2], zeta: [f64; 3]) -> Result<f64> {
        let xi = self.xi(zeta);
        let n = self.geometry.inward_normal(y);
        if xi[0] * n[0] + xi[1] * n[1] <= 0.0 {
            return Err(Error::param("zeta", "velocity must be outgoing from the wall"));
        }
        let r = self.geometry.reflect(xi, n);
        let reflected = match self.dim() {
            Dim::One => [r[0], zeta[1], zeta[2]],
            Dim::Two => [r[0], r[1], zeta[2]],
        };
        let t = self.profile.at_position(y);
        let lhs = self.evaluate(y, zeta)?;
        let rhs = (1.0 - self.alpha) * self.evaluate(y, reflected)?
            + self.alpha * diffuse_factor(t) * maxwellian(zeta, t)? / self.c_s;
        Ok((lhs - rhs).abs())
    }
}

/// Composite Gauss–Legendre rule in speed on `[0, 6.5]`; `exp(-v^2/T)` is
/// below `1e-18` beyond it for `T <= 1`.
pub(crate) fn speed_rule() -> Vec<(f64, f64)> {
    let rule = GaussRule::new(8);
    let panels = 8;
    let h = 6.5 / panels as f64;
    (0..panels).flat_map(|p| rule.mapped(h * p as f64, h * (p + 1) as f64).collect::<Vec<_>>()).collect()
}

/// `C_S` by quadrature over chords (boundary angle, incidence angle) and the
/// series index. The phase measure is `dx d omega = cos(phi) d theta d phi d l`
/// and every point of a chord shares its backward orbit, so the chord length
/// `2 cos(phi)` factors out; the speed integral of each term is analytic.
pub fn compute_c_s(profile: &TemperatureProfile, alpha: f64, series_tol: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let terms = series_length(alpha, series_tol);
    let q = 1.0 - alpha;
    let term_integral = |t: f64| 2.0 * PI.sqrt() / t.sqrt();
    match profile {
        TemperatureProfile::Walls { left, right } => {
            // Two directions, positions uniform: each direction sees the walls alternately.
            let mut acc = 0.0;
            for (first, other) in [(*left, *right), (*right, *left)] {
                let mut w = alpha;
                for i in 0..terms {
                    acc += w * term_integral(if i % 2 == 0 { first } else { other });
                    w *= q;
                }
            }
            // (1/|D|) * |D| * (1/|S^0|) * sum over the two directions.
            Ok(acc / 2.0)
        }
        TemperatureProfile::Fourier { .. } => {
            let estimate = |n_theta: usize, n_phi: usize| -> f64 {
                let phis = angle_rule(n_phi);
                let total: f64 = phis
                    .par_iter()
                    .map(|&(phi, wphi)| {
                        let hop = PI - 2.0 * phi;
                        let mut acc = 0.0;
                        for a in 0..n_theta {
                            let theta = TAU * a as f64 / n_theta as f64;
                            let mut w = alpha;
                            for i in 0..terms {
                                acc += w * term_integral(profile.at_angle(theta + i as f64 * hop));
                                w *= q;
                            }
                        }
                        wphi * 2.0 * phi.cos() * phi.cos() * acc * TAU / n_theta as f64
                    })
                    .sum();
                // Divide by |D| |S^1| = 2 pi^2.
                total / (2.0 * PI * PI)
            };
            let coarse = estimate(64, 32);
            let fine = estimate(128, 64);
            if !((fine - coarse).abs() <= 1e-9 * fine) {
                return Err(Error::QuadratureNotConverged { estimate: fine });
            }
            Ok(fine)
        }
    }
}
