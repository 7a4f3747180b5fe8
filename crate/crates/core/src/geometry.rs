//! Ray tracing and specular orbits in the unit slab and the unit disk.

use crate::error::{Error, Result};
use crate::num::{axpy2, cross2, dot2, norm2, rotate2, sub2, Real};
use serde::{Deserialize, Serialize};

/// Tolerance on `|x|^2 - 1` for a point to count as lying on the boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;
/// Relative size of `|xi . n|` below which an impact is treated as tangent.
pub const GRAZING_TOL: f64 = 1e-14;

/// Spatial dimension of the domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Dim {
    One,
    Two,
}

impl Dim {
    pub fn value(self) -> usize {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }

    pub fn from_value(d: usize) -> Result<Self> {
        match d {
            1 => Ok(Dim::One),
            2 => Ok(Dim::Two),
            _ => Err(Error::param("dimension", format!("{d} is not 1 or 2"))),
        }
    }
}

impl TryFrom<u8> for Dim {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        Dim::from_value(v as usize).map_err(|e| e.to_string())
    }
}

impl From<Dim> for u8 {
    fn from(d: Dim) -> u8 {
        d.value() as u8
    }
}

/// Wall of the slab `(-1, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Wall {
    Left,
    Right,
}

impl Wall {
    pub fn position<F: Real>(self) -> F {
        match self {
            Wall::Left => -F::one(),
            Wall::Right => F::one(),
        }
    }

    /// Inward unit normal (a signed scalar in one dimension).
    pub fn inward_normal<F: Real>(self) -> F {
        -self.position::<F>()
    }

    pub fn opposite(self) -> Self {
        match self {
            Wall::Left => Wall::Right,
            Wall::Right => Wall::Left,
        }
    }

    /// Wall reached after `k` wall-to-wall hops.
    pub fn after_hops(self, k: usize) -> Self {
        if k.is_multiple_of(2) {
            self
        } else {
            self.opposite()
        }
    }

    pub fn index(self) -> usize {
        match self {
            Wall::Left => 0,
            Wall::Right => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Wall::Left
        } else {
            Wall::Right
        }
    }
}

/// Point on the boundary of the domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BoundaryPoint<F> {
    Wall(Wall),
    /// Polar angle on the unit circle, in `[0, 2 pi)`.
    Circle(F),
}

impl<F: Real> BoundaryPoint<F> {
    /// Cartesian position (the second component is zero in one dimension).
    pub fn position(self) -> [F; 2] {
        match self {
            BoundaryPoint::Wall(w) => [w.position(), F::zero()],
            BoundaryPoint::Circle(theta) => {
                let (s, c) = theta.sin_cos();
                [c, s]
            }
        }
    }

    pub fn inward_normal(self) -> [F; 2] {
        let p = self.position();
        [-p[0], -p[1]]
    }

    /// Classifies a Cartesian boundary position.
    pub fn from_position(dim: Dim, y: [F; 2]) -> Self {
        match dim {
            Dim::One => BoundaryPoint::Wall(if y[0] < F::zero() { Wall::Left } else { Wall::Right }),
            Dim::Two => BoundaryPoint::Circle(wrap_angle(y[1].atan2(y[0]))),
        }
    }
}

/// Reduces an angle to `[0, 2 pi)`.
pub fn wrap_angle<F: Real>(theta: F) -> F {
    let two_pi = F::TAU();
    let r = theta % two_pi;
    let r = if r < F::zero() { r + two_pi } else { r };
    if r >= two_pi {
        F::zero()
    } else {
        r
    }
}

/// Position, in-plane velocity and transverse velocity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint<F> {
    /// Position; the second component is unused when `d = 1`.
    pub x: [F; 2],
    /// Full velocity `zeta = (xi, eta)`; the first `d` components are `xi`.
    pub zeta: [F; 3],
}

impl<F: Real> PhasePoint<F> {
    pub fn new(x: [F; 2], zeta: [F; 3]) -> Self {
        Self { x, zeta }
    }

    /// In-plane velocity, zero-padded to two components.
    pub fn xi(&self, dim: Dim) -> [F; 2] {
        match dim {
            Dim::One => [self.zeta[0], F::zero()],
            Dim::Two => [self.zeta[0], self.zeta[1]],
        }
    }

    /// Squared transverse speed `|eta|^2`.
    pub fn eta_sq(&self, dim: Dim) -> F {
        match dim {
            Dim::One => self.zeta[1] * self.zeta[1] + self.zeta[2] * self.zeta[2],
            Dim::Two => self.zeta[2] * self.zeta[2],
        }
    }
}

/// Boundary points and velocities of a backward specular orbit.
#[derive(Clone, Debug, PartialEq)]
pub struct SpecularOrbit<F> {
    /// Boundary points `x_(1), x_(2), ...`.
    pub points: Vec<[F; 2]>,
    /// Velocities `xi^1, xi^2, ...` after each reflection.
    pub velocities: Vec<[F; 2]>,
    /// Backward time from the start point to `x_(1)`.
    pub t1: F,
    /// Backward time of one full chord.
    pub t2: F,
}

/// The slab `(-1, 1)` or the unit disk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainGeometry {
    pub dim: Dim,
}

impl DomainGeometry {
    pub fn new(dim: Dim) -> Self {
        Self { dim }
    }

    /// Volume of the domain: 2 for the slab, pi for the disk.
    pub fn volume(&self) -> f64 {
        match self.dim {
            Dim::One => 2.0,
            Dim::Two => std::f64::consts::PI,
        }
    }

    /// Measure of the boundary: 2 wall points or circumference 2 pi.
    pub fn boundary_measure(&self) -> f64 {
        match self.dim {
            Dim::One => 2.0,
            Dim::Two => std::f64::consts::TAU,
        }
    }

    fn check_speed<F: Real>(&self, xi: [F; 2]) -> Result<F> {
        let speed = match self.dim {
            Dim::One => xi[0].abs(),
            Dim::Two => norm2(xi),
        };
        if speed > F::zero() && speed.is_finite() {
            Ok(speed)
        } else {
            Err(Error::NoBoundaryInteraction)
        }
    }

    /// Time `s >= 0` at which `x - s xi` first reaches the boundary.
    pub fn backward_exit_time<F: Real>(&self, x: [F; 2], xi: [F; 2]) -> Result<F> {
        self.check_speed(xi)?;
        Ok(self.exit_time_unchecked(x, [-xi[0], -xi[1]]))
    }

    /// Time `s >= 0` at which `x + s v` first reaches the boundary.
    pub fn forward_exit_time<F: Real>(&self, x: [F; 2], v: [F; 2]) -> Result<F> {
        self.check_speed(v)?;
        Ok(self.exit_time_unchecked(x, v))
    }

    fn exit_time_unchecked<F: Real>(&self, x: [F; 2], v: [F; 2]) -> F {
        match self.dim {
            Dim::One => {
                let s = if v[0] > F::zero() { (F::one() - x[0]) / v[0] } else { (-F::one() - x[0]) / v[0] };
                s.max(F::zero())
            }
            Dim::Two => {
                // Positive root of |v|^2 s^2 + 2 (x.v) s - (1 - |x|^2) = 0.
                let a = dot2(v, v);
                let b = dot2(x, v);
                let c = (F::one() - dot2(x, x)).max(F::zero());
                let disc = (b * b + a * c).sqrt();
                if b <= F::zero() {
                    (disc - b) / a
                } else if disc + b > F::zero() {
                    c / (disc + b)
                } else {
                    F::zero()
                }
            }
        }
    }

    /// Snaps a point that should lie on the boundary back onto it.
    pub fn project_to_boundary<F: Real>(&self, y: [F; 2]) -> [F; 2] {
        match self.dim {
            Dim::One => [if y[0] < F::zero() { -F::one() } else { F::one() }, F::zero()],
            Dim::Two => {
                let r = norm2(y);
                if r > F::zero() {
                    [y[0] / r, y[1] / r]
                } else {
                    [F::one(), F::zero()]
                }
            }
        }
    }

    /// Inward unit normal at a boundary point.
    pub fn inward_normal<F: Real>(&self, y: [F; 2]) -> [F; 2] {
        match self.dim {
            Dim::One => [if y[0] < F::zero() { F::one() } else { -F::one() }, F::zero()],
            Dim::Two => [-y[0], -y[1]],
        }
    }

    /// Backward boundary point `y_B = x - tau_b xi` and the inward normal there.
    pub fn boundary_trace<F: Real>(&self, x: [F; 2], xi: [F; 2]) -> Result<([F; 2], [F; 2])> {
        let tau = self.backward_exit_time(x, xi)?;
        let y = self.project_to_boundary(axpy2(-tau, xi, x));
        Ok((y, self.inward_normal(y)))
    }

    /// Specular reflection of `xi` at a boundary point with inward normal `n`.
    /// Grazing impacts leave the velocity unchanged.
    pub fn reflect<F: Real>(&self, xi: [F; 2], n: [F; 2]) -> [F; 2] {
        let vn = dot2(xi, n);
        let speed = norm2(xi);
        if vn.abs() < F::lit(GRAZING_TOL) * speed {
            return xi;
        }
        axpy2(-(vn + vn), n, xi)
    }

    /// First `k_max` points of the backward specular orbit through `(x, xi)`.
    pub fn specular_orbit<F: Real>(&self, x: [F; 2], xi: [F; 2], k_max: usize) -> Result<SpecularOrbit<F>> {
        if k_max == 0 {
            return Err(Error::param("k_max", "must be at least 1"));
        }
        let xi = match self.dim {
            Dim::One => [xi[0], F::zero()],
            Dim::Two => xi,
        };
        let t1 = self.backward_exit_time(x, xi)?;
        let mut y = self.project_to_boundary(axpy2(-t1, xi, x));
        let mut v = xi;
        let mut points = Vec::with_capacity(k_max);
        let mut velocities = Vec::with_capacity(k_max);
        let mut t2 = F::zero();
        for k in 0..k_max {
            v = self.reflect(v, self.inward_normal(y));
            points.push(y);
            velocities.push(v);
            let tau = self.exit_time_unchecked(y, [-v[0], -v[1]]);
            if k == 0 {
                t2 = tau;
            }
            y = self.project_to_boundary(axpy2(-tau, v, y));
        }
        Ok(SpecularOrbit { points, velocities, t1, t2 })
    }

    /// Number of boundary encounters of the backward characteristic within time `t`.
    pub fn bounce_count<F: Real>(&self, x: [F; 2], xi: [F; 2], t: F) -> Result<usize> {
        let orbit = self.specular_orbit(x, xi, 2)?;
        if t < orbit.t1 {
            return Err(Error::ReachesInitialData { t: t.as_f64(), tau_b: orbit.t1.as_f64() });
        }
        let speed = self.check_speed(xi)?;
        let first = norm2(sub2(x, orbit.points[0]));
        let chord = norm2(sub2(orbit.points[1], orbit.points[0]));
        if chord <= F::zero() {
            return Err(Error::GrazingChord { phi: std::f64::consts::FRAC_PI_2 });
        }
        let m = ((speed * t - first) / chord).floor().max(F::zero());
        Ok(m.to_usize().unwrap_or(usize::MAX).saturating_add(1))
    }

    /// Signed angle between the inward normal at boundary point `y` and the
    /// backward direction `-xi`, where `xi` is the velocity leaving the wall
    /// in backward time (so `-xi` points into the domain).
    ///
    /// With this sign convention one chord hop advances the polar angle by
    /// `pi - 2 phi`.
    pub fn incidence_angle<F: Real>(&self, y: [F; 2], xi: [F; 2]) -> F {
        let n = self.inward_normal(y);
        let d = [-xi[0], -xi[1]];
        cross2(d, n).atan2(dot2(d, n))
    }
}

/// Polar angle reached after `k` chord hops with incidence angle `phi`.
pub fn specular_chain_angle<F: Real>(theta: F, phi: F, k: usize) -> Result<F> {
    if !(phi.abs() < F::FRAC_PI_2()) {
        return Err(Error::GrazingChord { phi: phi.abs().as_f64() });
    }
    let hop = F::PI() - (phi + phi);
    let k = F::from_usize(k).expect("hop count representable");
    Ok(wrap_angle(theta + k * hop))
}

/// Unit backward direction at polar angle `theta` with incidence angle `phi`.
pub fn chord_direction<F: Real>(theta: F, phi: F) -> [F; 2] {
    let (s, c) = theta.sin_cos();
    rotate2([-c, -s], -phi)
}
