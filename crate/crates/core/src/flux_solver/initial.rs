//! Initial distributions and their contributions to the boundary flux.

use super::Problem;
use crate::error::{Error, Result};
use crate::geometry::{chord_direction, BoundaryPoint, Dim};
use crate::kernels::{diffuse_flux_normalizer, maxwellian, reduced_maxwellian, GAS_CONSTANT};
use crate::quadrature::{angle_rule, GaussRule};
use crate::steady_state::SteadyState;
use serde::{Deserialize, Serialize};

/// Velocity decay exponent of the weighted sup-norm that all initial data must have finite.
pub const MU: f64 = 5.0;

/// Initial distribution `g_in`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    /// `rho0 M_{T0}(zeta)` with uniform density.
    UniformMaxwellian { rho0: f64, temperature: f64 },
    /// `rho0 S(x, zeta)`.
    ScaledSteady { rho0: f64 },
    /// `rho0 (1 + gradient x_1) M_{T0}(zeta)`.
    Separable { rho0: f64, gradient: f64, temperature: f64 },
    /// Linear combination of other initial data.
    Mixture { components: Vec<(f64, InitialData)> },
}

impl InitialData {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive, got {v}")))
            }
        };
        match self {
            InitialData::UniformMaxwellian { rho0, temperature } => {
                positive("rho0", *rho0)?;
                positive("temperature", *temperature)
            }
            InitialData::ScaledSteady { rho0 } => positive("rho0", *rho0),
            InitialData::Separable { rho0, gradient, temperature } => {
                positive("rho0", *rho0)?;
                positive("temperature", *temperature)?;
                if gradient.abs() < 1.0 {
                    Ok(())
                } else {
                    Err(Error::param("gradient", "|gradient| must be below 1 to keep the density positive"))
                }
            }
            InitialData::Mixture { components } => {
                if components.is_empty() {
                    return Err(Error::param("components", "mixture is empty"));
                }
                for (w, c) in components {
                    if !w.is_finite() {
                        return Err(Error::param("components", "non-finite weight"));
                    }
                    c.validate()?;
                }
                Ok(())
            }
        }
    }

    /// Average density `rho_* = (1/|D|) int g_in dx dzeta`.
    pub fn rho_star(&self) -> f64 {
        match self {
            InitialData::UniformMaxwellian { rho0, .. }
            | InitialData::ScaledSteady { rho0 }
            | InitialData::Separable { rho0, .. } => *rho0,
            InitialData::Mixture { components } => components.iter().map(|(w, c)| w * c.rho_star()).sum(),
        }
    }

    /// Largest temperature present in the data (used for velocity cut-offs).
    pub fn temperature_scale(&self) -> f64 {
        match self {
            InitialData::UniformMaxwellian { temperature, .. } | InitialData::Separable { temperature, .. } => {
                temperature.max(1.0)
            }
            InitialData::ScaledSteady { .. } => 1.0,
            InitialData::Mixture { components } => {
                components.iter().map(|(_, c)| c.temperature_scale()).fold(1.0, f64::max)
            }
        }
    }

    /// `g_in(x, zeta)`.
    pub fn evaluate(&self, steady: &SteadyState, x: [f64; 2], zeta: [f64; 3]) -> Result<f64> {
        Ok(match self {
            InitialData::UniformMaxwellian { rho0, temperature } => rho0 * maxwellian(zeta, *temperature)?,
            InitialData::ScaledSteady { rho0 } => rho0 * steady.evaluate(x, zeta)?,
            InitialData::Separable { rho0, gradient, temperature } => {
                rho0 * (1.0 + gradient * x[0]) * maxwellian(zeta, *temperature)?
            }
            InitialData::Mixture { components } => {
                let mut acc = 0.0;
                for (w, c) in components {
                    acc += w * c.evaluate(steady, x, zeta)?;
                }
                acc
            }
        })
    }

    /// Reduced data `int g_in d eta` and `int |eta|^2 g_in d eta` at `(x, xi)`.
    pub fn evaluate_reduced(&self, steady: &SteadyState, x: [f64; 2], xi: [f64; 2]) -> Result<(f64, f64)> {
        let dim = steady.dim();
        let maxwell = |rho: f64, t: f64| -> Result<(f64, f64)> {
            let m = rho * reduced_maxwellian(&xi[..dim.value()], t)?;
            Ok((m, m * (3 - dim.value()) as f64 * GAS_CONSTANT * t))
        };
        match self {
            InitialData::UniformMaxwellian { rho0, temperature } => maxwell(*rho0, *temperature),
            InitialData::ScaledSteady { rho0 } => {
                let (m, e) = steady.evaluate_reduced(x, xi)?;
                Ok((rho0 * m, rho0 * e))
            }
            InitialData::Separable { rho0, gradient, temperature } => {
                maxwell(rho0 * (1.0 + gradient * x[0]), *temperature)
            }
            InitialData::Mixture { components } => {
                let (mut m, mut e) = (0.0, 0.0);
                for (w, c) in components {
                    let (a, b) = c.evaluate_reduced(steady, x, xi)?;
                    m += w * a;
                    e += w * b;
                }
                Ok((m, e))
            }
        }
    }

    /// Incoming wall flux of `g_in` at a boundary point (the flux at `t = 0`).
    pub fn incoming_flux(&self, steady: &SteadyState, y: BoundaryPoint<f64>) -> f64 {
        match self {
            InitialData::UniformMaxwellian { rho0, temperature } => rho0 * diffuse_flux_normalizer(*temperature),
            InitialData::ScaledSteady { rho0 } => rho0 / steady.c_s,
            InitialData::Separable { rho0, gradient, temperature } => {
                rho0 * (1.0 + gradient * y.position()[0]) * diffuse_flux_normalizer(*temperature)
            }
            InitialData::Mixture { components } => components.iter().map(|(w, c)| w * c.incoming_flux(steady, y)).sum(),
        }
    }
}

/// Shell bounds and panel layout for speed quadrature inside one shell.
fn shell_panels(lo: f64, hi: f64, vmax: f64) -> Option<(f64, f64, usize)> {
    let hi = hi.min(vmax);
    if !(hi > lo) {
        return None;
    }
    Some((lo, hi, ((hi - lo) / 0.25).ceil().clamp(1.0, 64.0) as usize))
}

/// `j_in^{(k)}(y, t)`: flux at `y` from initial data whose backward
/// characteristic reaches time zero after exactly `k` specular bounces.
///
/// Evaluated by quadrature over incidence angle and speed, tracing each
/// characteristic back with the geometry module.
pub fn initial_flux_contribution(problem: &Problem, y: BoundaryPoint<f64>, t: f64, k: usize) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::param("t", "must be non-negative"));
    }
    let geom = problem.steady.geometry;
    let pos = y.position();
    let vmax = 10.0 * problem.initial.temperature_scale().sqrt();
    let rule = GaussRule::new(8);
    let integrate_direction = |back: [f64; 2], chord: f64| -> Result<f64> {
        // Speeds with k * chord <= v t < (k + 1) * chord.
        let (lo, hi) = if t == 0.0 {
            if k > 0 {
                return Ok(0.0);
            }
            (0.0, vmax)
        } else {
            (k as f64 * chord / t, (k + 1) as f64 * chord / t)
        };
        let Some((lo, hi, panels)) = shell_panels(lo, hi, vmax) else {
            return Ok(0.0);
        };
        let mut acc = 0.0;
        let h = (hi - lo) / panels as f64;
        for p in 0..panels {
            for (v, w) in rule.mapped(lo + h * p as f64, lo + h * (p + 1) as f64) {
                let xi = [-v * back[0], -v * back[1]];
                let (x0, xi0) = if k == 0 {
                    ([pos[0] - xi[0] * t, pos[1] - xi[1] * t], xi)
                } else {
                    let orbit = geom.specular_orbit(pos, xi, k)?;
                    let xk = orbit.points[k - 1];
                    let vk = orbit.velocities[k - 1];
                    let rest = t - k as f64 * chord / v;
                    ([xk[0] - vk[0] * rest, xk[1] - vk[1] * rest], vk)
                };
                let (m, _) = problem.initial.evaluate_reduced(&problem.steady, x0, xi0)?;
                let jac = match geom.dim {
                    Dim::One => v,
                    Dim::Two => v * v,
                };
                acc += w * jac * m;
            }
        }
        Ok(acc)
    };
    match geom.dim {
        Dim::One => integrate_direction(y.inward_normal(), 2.0),
        Dim::Two => {
            let theta = pos[1].atan2(pos[0]);
            let mut acc = 0.0;
            for (phi, w) in angle_rule(64) {
                acc += w * phi.cos() * integrate_direction(chord_direction(theta, phi), 2.0 * phi.cos())?;
            }
            Ok(acc)
        }
    }
}
