//! Maxwellians, flight-time kernels and their samplers.

use crate::error::{Error, Result};
use crate::geometry::Dim;
use crate::num::Real;
use crate::quadrature::{erf_diff, gamma32_lower, gamma32_upper, gauss_diff, GaussRule};
use crate::rng::stream_rng;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Open01, StandardNormal};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Gas constant in the dimensionless convention.
pub const GAS_CONSTANT: f64 = 0.5;
/// Reference (maximal) wall temperature.
pub const T_STAR: f64 = 1.0;

fn check_temperature<F: Real>(t: F) -> Result<()> {
    if t > F::zero() && t.is_finite() {
        Ok(())
    } else {
        Err(Error::param("temperature", format!("must be positive, got {t}")))
    }
}

/// Maxwellian `M_T(zeta) = (2 pi R T)^{-3/2} exp(-|zeta|^2 / (2 R T))`.
pub fn maxwellian<F: Real>(zeta: [F; 3], t: F) -> Result<F> {
    check_temperature(t)?;
    let two_rt = F::lit(2.0 * GAS_CONSTANT) * t;
    let z2 = zeta[0] * zeta[0] + zeta[1] * zeta[1] + zeta[2] * zeta[2];
    Ok((F::PI() * two_rt).powf(F::lit(-1.5)) * (-z2 / two_rt).exp())
}

/// Reduced Maxwellian in `d = xi.len()` dimensions.
pub fn reduced_maxwellian<F: Real>(xi: &[F], t: F) -> Result<F> {
    check_temperature(t)?;
    let two_rt = F::lit(2.0 * GAS_CONSTANT) * t;
    let x2 = xi.iter().fold(F::zero(), |acc, &v| acc + v * v);
    let d = F::from_usize(xi.len()).expect("dimension");
    Ok((F::PI() * two_rt).powf(-d / (F::one() + F::one())) * (-x2 / two_rt).exp())
}

/// Factor `sqrt(2 pi / (R T))` turning `M_T` into the unit-flux wall Maxwellian.
pub fn diffuse_factor<F: Real>(t: F) -> F {
    (F::TAU() / (F::lit(GAS_CONSTANT) * t)).sqrt()
}

/// Outgoing flux `int_{xi.n > 0} (xi.n) M_T dzeta = sqrt(R T / (2 pi))`.
pub fn diffuse_flux_normalizer(t: f64) -> f64 {
    (GAS_CONSTANT * t / (2.0 * PI)).sqrt()
}

/// Slab kernel `H(sigma) = (2/sigma)^3 exp(-(2/sigma)^2)`.
pub fn h_kernel<F: Real>(sigma: F) -> F {
    if sigma <= F::zero() {
        return F::zero();
    }
    let u = F::lit(2.0) / sigma;
    u * u * u * (-u * u).exp()
}

/// Closed-form distribution function of `H`: `exp(-4 / sigma^2)`.
pub fn h_cdf<F: Real>(sigma: F) -> F {
    if sigma <= F::zero() {
        return F::zero();
    }
    (-F::lit(4.0) / (sigma * sigma)).exp()
}

/// Disk kernel `G(phi, sigma) = pi^{-1/2} (2 cos phi / sigma)^4 exp(-(2 cos phi / sigma)^2)`.
pub fn g_kernel<F: Real>(phi: F, sigma: F) -> F {
    if sigma <= F::zero() || !(phi.abs() < F::FRAC_PI_2()) {
        return F::zero();
    }
    let u = F::lit(2.0) * phi.cos() / sigma;
    let u2 = u * u;
    u2 * u2 * (-u2).exp() / F::PI().sqrt()
}

/// Kernel value in normalised flight time; `phi` is ignored in one dimension.
pub fn transition_pdf_value<F: Real>(dim: Dim, sigma: F, phi: F) -> F {
    match dim {
        Dim::One => h_kernel(sigma),
        Dim::Two => g_kernel(phi, sigma),
    }
}

/// Mean of one normalised flight: `2 sqrt(pi)` (slab) or `sqrt(pi)` (disk).
pub fn flight_mean(dim: Dim) -> f64 {
    match dim {
        Dim::One => 2.0 * PI.sqrt(),
        Dim::Two => PI.sqrt(),
    }
}

/// Distribution function of the normalised flight time (the `sigma`-marginal in the disk).
pub fn flight_cdf(dim: Dim, sigma: f64) -> f64 {
    match dim {
        Dim::One => h_cdf(sigma),
        Dim::Two => {
            if sigma <= 0.0 {
                return 0.0;
            }
            // P(sigma' <= sigma) = E_phi[ P(v >= 2 cos phi / sigma) ], phi ~ cos(phi)/2.
            thread_local! {
                static RULE: GaussRule = GaussRule::new(24);
            }
            RULE.with(|rule| {
                let panels = 32;
                let h = 0.5 * PI / panels as f64;
                let mut acc = 0.0;
                for p in 0..panels {
                    let lo = h * p as f64;
                    acc += rule.integrate(lo, lo + h, |phi| phi.cos() * gamma32_upper(2.0 * phi.cos() / sigma));
                }
                acc
            })
        }
    }
}

/// Law of the normalised speed `u = c / s` that generates flight times.
///
/// Slab: density `2 u exp(-u^2)`. Disk (at fixed incidence angle):
/// density `(4/sqrt(pi)) u^2 exp(-u^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpeedLaw(pub Dim);

impl SpeedLaw {
    pub fn pdf(self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match self.0 {
            Dim::One => 2.0 * u * (-u * u).exp(),
            Dim::Two => 4.0 / PI.sqrt() * u * u * (-u * u).exp(),
        }
    }

    /// `P(U < u)`.
    pub fn head(self, u: f64) -> f64 {
        match self.0 {
            Dim::One => -(-u * u).exp_m1(),
            Dim::Two => gamma32_lower(u),
        }
    }

    /// `P(U >= u)`.
    pub fn tail(self, u: f64) -> f64 {
        match self.0 {
            Dim::One => (-u * u).exp(),
            Dim::Two => gamma32_upper(u),
        }
    }

    /// `P(lo <= U < hi)` for `0 <= lo <= hi` (`hi` may be infinite).
    pub fn mass(self, lo: f64, hi: f64) -> f64 {
        match self.0 {
            Dim::One => gauss_diff(lo, hi),
            Dim::Two => {
                if lo >= 1.0 {
                    gamma32_upper(lo) - if hi.is_finite() { gamma32_upper(hi) } else { 0.0 }
                } else {
                    (if hi.is_finite() { gamma32_lower(hi) } else { 1.0 }) - gamma32_lower(lo)
                }
            }
        }
    }

    /// `E[1/U ; lo <= U < hi]`.
    pub fn inverse_moment(self, lo: f64, hi: f64) -> f64 {
        match self.0 {
            Dim::One => {
                let hi_erf = if hi.is_finite() { hi } else { 40.0 };
                PI.sqrt() * erf_diff(lo, hi_erf.max(lo))
            }
            Dim::Two => 2.0 / PI.sqrt() * gauss_diff(lo, hi),
        }
    }
}

/// Flight-time density for a given wall temperature and hop count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionPdf {
    pub dim: Dim,
    pub temperature: f64,
    pub multiplicity: usize,
}

impl TransitionPdf {
    pub fn new(dim: Dim, temperature: f64, multiplicity: usize) -> Result<Self> {
        check_temperature(temperature)?;
        if multiplicity == 0 {
            return Err(Error::param("multiplicity", "must be at least 1"));
        }
        Ok(Self { dim, temperature, multiplicity })
    }

    /// Ratio between normalised and physical flight time.
    pub fn scale(&self) -> f64 {
        (2.0 * GAS_CONSTANT * self.temperature).sqrt() / self.multiplicity as f64
    }

    /// Density at physical flight time `s` (and incidence angle `phi` in the disk).
    pub fn density(&self, s: f64, phi: f64) -> f64 {
        let a = self.scale();
        transition_pdf_value(self.dim, s * a, phi) * a
    }
}

/// Draws a normalised flight `sigma`, returning it with the incidence angle
/// (zero in the slab).
pub fn sample_normalized_flight<R: Rng + ?Sized>(rng: &mut R, dim: Dim) -> (f64, f64) {
    match dim {
        Dim::One => {
            let u: f64 = Open01.sample(rng);
            (2.0 / (-u.ln()).sqrt(), 0.0)
        }
        Dim::Two => {
            let w: f64 = Open01.sample(rng);
            let phi = (2.0 * w - 1.0).asin();
            let v = sample_disk_speed(rng);
            (2.0 * phi.cos() / v, phi)
        }
    }
}

fn sample_disk_speed<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let gamma: Gamma<f64> = Gamma::new(1.5, 1.0).expect("valid gamma parameters");
    gamma.sample(rng).sqrt()
}

/// Physical flight time of one diffuse emission crossing `k` chords.
pub fn sample_flight_time<R: Rng + ?Sized>(rng: &mut R, dim: Dim, t: f64, k: usize) -> f64 {
    let (sigma, _) = sample_normalized_flight(rng, dim);
    k as f64 * sigma / (2.0 * GAS_CONSTANT * t).sqrt()
}

/// Velocity drawn from the flux-weighted wall Maxwellian at temperature `t`.
///
/// `n` is the inward unit normal; the returned in-plane velocity satisfies `xi . n > 0`.
pub fn sample_diffuse_velocity<R: Rng + ?Sized>(rng: &mut R, dim: Dim, t: f64, n: [f64; 2]) -> [f64; 3] {
    let s = (GAS_CONSTANT * t).sqrt();
    let u: f64 = Open01.sample(rng);
    let vn = s * (-2.0 * u.ln()).sqrt();
    let g1: f64 = StandardNormal.sample(rng);
    let g2: f64 = StandardNormal.sample(rng);
    match dim {
        Dim::One => [vn * n[0].signum(), s * g1, s * g2],
        Dim::Two => {
            let vt = s * g1;
            [vn * n[0] - vt * n[1], vn * n[1] + vt * n[0], s * g2]
        }
    }
}

/// Monte Carlo estimate of a tail probability with its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailEstimate {
    pub probability: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// Estimates `P(|X_1 + ... + X_n - n E[X_1]| > threshold)` for i.i.d. normalised flights.
pub fn convolve_tail(dim: Dim, n: usize, threshold: f64, trials: usize, seed: u64) -> Result<TailEstimate> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    if trials == 0 {
        return Err(Error::param("trials", "must be positive"));
    }
    const BLOCK: usize = 4096;
    let mean = flight_mean(dim);
    let blocks = trials.div_ceil(BLOCK);
    let hits: usize = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            let count = BLOCK.min(trials - b * BLOCK);
            (0..count)
                .filter(|_| {
                    let sum: f64 = (0..n).map(|_| sample_normalized_flight(&mut rng, dim).0).sum();
                    (sum - n as f64 * mean).abs() > threshold
                })
                .count()
        })
        .sum();
    let p = hits as f64 / trials as f64;
    Ok(TailEstimate { probability: p, std_error: (p * (1.0 - p) / trials as f64).sqrt(), trials })
}
