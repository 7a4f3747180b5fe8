//! Closed-form initial-data source `J_in(y, t) = sum_k (1-alpha)^k j_in^{(k)}(y, t)`.

use super::{InitialData, Nodes, Problem};
use crate::geometry::{chord_direction, BoundaryPoint, Dim, Wall};
use crate::kernels::SpeedLaw;
use crate::quadrature::gauss_diff;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Speed bound (in thermal units) beyond which shells carry no mass.
const U_MAX: f64 = 40.0;

pub(crate) struct SourceContext<'a> {
    pub problem: &'a Problem,
    pub phis: &'a [(f64, f64)],
    pub k_max: usize,
}

/// `(1 + a^2) e^{-a^2} - (1 + b^2) e^{-b^2}` for `0 <= a <= b`.
fn cubic_gauss_diff(a: f64, b: f64) -> f64 {
    if !b.is_finite() {
        return (1.0 + a * a) * (-a * a).exp();
    }
    let delta = (b - a) * (b + a);
    (-a * a).exp() * ((1.0 + a * a) * -(-delta).exp_m1() - delta * (-delta).exp())
}

impl SourceContext<'_> {
    fn alpha(&self) -> f64 {
        self.problem.steady.alpha
    }

    /// Source for Maxwellian data with density `rho0 (1 + gradient x_1)`.
    fn maxwellian(&self, y: BoundaryPoint<f64>, t: f64, rho0: f64, gradient: f64, t0: f64) -> f64 {
        let q = 1.0 - self.alpha();
        let st = t0.sqrt();
        let mass2 = SpeedLaw(Dim::Two);
        match y {
            BoundaryPoint::Wall(wall) => {
                if t == 0.0 {
                    return rho0 * (1.0 + gradient * wall.position::<f64>()) * (t0 / PI).sqrt() / 2.0;
                }
                let mut acc = 0.0;
                let mut chain = 1.0;
                for k in 0..=self.k_max {
                    let a = 2.0 * k as f64 / (t * st);
                    if a > U_MAX || chain == 0.0 {
                        break;
                    }
                    let b = 2.0 * (k + 1) as f64 / (t * st);
                    let w: Wall = wall.after_hops(k);
                    let (p, d) = (w.position::<f64>(), w.inward_normal::<f64>());
                    let i1 = (t0 / PI).sqrt() / 2.0 * gauss_diff(a, b);
                    let i2 = t0 / 4.0 * mass2.mass(a, b);
                    let shell = (1.0 + gradient * (p - 2.0 * k as f64 * d)) * i1 + gradient * d * t * i2;
                    acc += chain * shell;
                    chain *= q;
                }
                rho0 * acc
            }
            BoundaryPoint::Circle(theta) => {
                let mut acc = 0.0;
                for &(phi, wphi) in self.phis {
                    let chord = 2.0 * phi.cos();
                    if t == 0.0 {
                        acc += wphi * phi.cos() * (1.0 + gradient * theta.cos()) * st / (4.0 * PI.sqrt());
                        continue;
                    }
                    let mut chain = 1.0;
                    let mut inner = 0.0;
                    for k in 0..=self.k_max {
                        let a = k as f64 * chord / (t * st);
                        if a > U_MAX || chain == 0.0 {
                            break;
                        }
                        let b = (k + 1) as f64 * chord / (t * st);
                        let i2 = st / (4.0 * PI.sqrt()) * mass2.mass(a, b);
                        let mut shell = i2;
                        if gradient != 0.0 {
                            let tk = theta + k as f64 * (PI - 2.0 * phi);
                            let dk = chord_direction(tk, phi);
                            let i3 = t0 / (2.0 * PI) * cubic_gauss_diff(a, b);
                            shell = (1.0 + gradient * (tk.cos() - k as f64 * chord * dk[0])) * i2
                                + gradient * dk[0] * t * i3;
                        }
                        inner += chain * shell;
                        chain *= q;
                    }
                    acc += wphi * phi.cos() * inner;
                }
                rho0 * acc
            }
        }
    }

    /// Source for `rho0 S`: particles emitted diffusely `n` chords back whose
    /// flight is still longer than `t`.
    fn steady(&self, y: BoundaryPoint<f64>, t: f64, rho0: f64) -> f64 {
        let steady = &self.problem.steady;
        let scale = rho0 / steady.c_s;
        if t == 0.0 {
            return scale;
        }
        let alpha = self.alpha();
        let q = 1.0 - alpha;
        let terms = steady.terms().max(self.k_max + 1);
        let profile = &steady.profile;
        let dim = steady.dim();
        let law = SpeedLaw(dim);
        let mut acc = 0.0;
        match y {
            BoundaryPoint::Wall(wall) => {
                let mut w = alpha;
                for n in 1..=terms {
                    let tn = profile.at_wall(wall.after_hops(n));
                    acc += w * law.head(2.0 * n as f64 / (t * tn.sqrt()));
                    w *= q;
                }
            }
            BoundaryPoint::Circle(theta) => {
                for &(phi, wphi) in self.phis {
                    let chord = 2.0 * phi.cos();
                    let mut w = alpha;
                    let mut inner = 0.0;
                    for n in 1..=terms {
                        let tn = profile.at_angle(theta + n as f64 * (PI - 2.0 * phi));
                        inner += w * law.head(n as f64 * chord / (t * tn.sqrt()));
                        w *= q;
                    }
                    acc += wphi * 0.5 * phi.cos() * inner;
                }
            }
        }
        scale * acc
    }

    /// Source value for a single (non-mixture) data kind.
    fn leaf(&self, data: &InitialData, y: BoundaryPoint<f64>, t: f64) -> f64 {
        match data {
            InitialData::UniformMaxwellian { rho0, temperature } => self.maxwellian(y, t, *rho0, 0.0, *temperature),
            InitialData::Separable { rho0, gradient, temperature } => {
                self.maxwellian(y, t, *rho0, *gradient, *temperature)
            }
            InitialData::ScaledSteady { rho0 } => self.steady(y, t, *rho0),
            InitialData::Mixture { .. } => unreachable!("mixtures are flattened"),
        }
    }

    /// `J_in` at every node and time level, `[node][level]`.
    pub fn table(&self, nodes: Nodes, dt: f64, steps: usize) -> Vec<Vec<f64>> {
        let n = nodes.len();
        let mut out = vec![vec![0.0; steps + 1]; n];
        let constant = self.problem.steady.profile.is_constant();
        for (weight, leaf) in flatten(&self.problem.initial, 1.0) {
            let uniform_in_space =
                constant && !matches!(leaf, InitialData::Separable { gradient, .. } if gradient != 0.0);
            let rows: Vec<usize> = if uniform_in_space { vec![0] } else { (0..n).collect() };
            let computed: Vec<Vec<f64>> = rows
                .par_iter()
                .map(|&i| {
                    let y = nodes.point(i);
                    (0..=steps).map(|j| self.leaf(&leaf, y, j as f64 * dt)).collect()
                })
                .collect();
            for i in 0..n {
                let src = if uniform_in_space { &computed[0] } else { &computed[i] };
                for (o, s) in out[i].iter_mut().zip(src) {
                    *o += weight * s;
                }
            }
        }
        out
    }
}

/// Expands nested mixtures into weighted leaves.
fn flatten(data: &InitialData, weight: f64) -> Vec<(f64, InitialData)> {
    match data {
        InitialData::Mixture { components } => components.iter().flat_map(|(w, c)| flatten(c, weight * w)).collect(),
        other => vec![(weight, other.clone())],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux_solver::initial_flux_contribution;
    use crate::quadrature::angle_rule;
    use crate::steady_state::TemperatureProfile;

    fn ctx_value(problem: &Problem, y: BoundaryPoint<f64>, t: f64, k_max: usize) -> f64 {
        let phis = angle_rule(64);
        let ctx = SourceContext { problem, phis: &phis, k_max };
        let leaves = flatten(&problem.initial, 1.0);
        leaves.iter().map(|(w, l)| w * ctx.leaf(l, y, t)).sum()
    }

    /// Oracle: sum of quadrature-evaluated shell contributions.
    fn oracle(problem: &Problem, y: BoundaryPoint<f64>, t: f64, k_max: usize) -> f64 {
        let q = 1.0 - problem.steady.alpha;
        (0..=k_max).map(|k| q.powi(k as i32) * initial_flux_contribution(problem, y, t, k).unwrap()).sum()
    }

    #[test]
    fn closed_form_matches_traced_quadrature() {
        let cases = vec![
            (
                Problem::new(
                    TemperatureProfile::walls(0.7, 1.0).unwrap(),
                    0.5,
                    InitialData::Separable { rho0: 1.2, gradient: 0.4, temperature: 0.6 },
                )
                .unwrap(),
                vec![BoundaryPoint::Wall(Wall::Left), BoundaryPoint::Wall(Wall::Right)],
            ),
            (
                Problem::new(
                    TemperatureProfile::cosine_dip(0.2).unwrap(),
                    0.6,
                    InitialData::Separable { rho0: 1.0, gradient: -0.5, temperature: 0.5 },
                )
                .unwrap(),
                vec![BoundaryPoint::Circle(0.0), BoundaryPoint::Circle(2.0)],
            ),
            (
                Problem::new(
                    TemperatureProfile::cosine_dip(0.2).unwrap(),
                    0.5,
                    InitialData::ScaledSteady { rho0: 1.0 },
                )
                .unwrap(),
                vec![BoundaryPoint::Circle(0.3), BoundaryPoint::Circle(3.5)],
            ),
            (
                Problem::new(
                    TemperatureProfile::walls(1.0, 0.6).unwrap(),
                    0.3,
                    InitialData::ScaledSteady { rho0: 2.0 },
                )
                .unwrap(),
                vec![BoundaryPoint::Wall(Wall::Left), BoundaryPoint::Wall(Wall::Right)],
            ),
        ];
        for (problem, points) in &cases {
            for &y in points {
                for &t in &[0.0, 0.7, 3.0, 11.0] {
                    // Grazing chords make many shells contribute at short times.
                    let k_max = 40;
                    let fast = ctx_value(problem, y, t, k_max);
                    let slow = oracle(problem, y, t, k_max);
                    assert!((fast - slow).abs() < 2e-6 * fast.abs().max(1e-3), "{y:?} t={t}: {fast} vs {slow}");
                }
            }
        }
    }

    #[test]
    fn slab_single_shell_oracle() {
        // y = +1, k = 0, uniform Maxwellian (1, 1), t = 4: speeds 0 < xi < 1/2 reach back
        // to time zero without a bounce; flux = int_0^{1/2} xi e^{-xi^2} / sqrt(pi) d xi.
        let problem = Problem::new(
            TemperatureProfile::constant(Dim::One),
            1.0,
            InitialData::UniformMaxwellian { rho0: 1.0, temperature: 1.0 },
        )
        .unwrap();
        let got = initial_flux_contribution(&problem, BoundaryPoint::Wall(Wall::Right), 4.0, 0).unwrap();
        let brute =
            crate::quadrature::GaussRule::new(20).integrate_composite(0.0, 0.5, 10, |v| v * (-v * v).exp() / PI.sqrt());
        assert!((got - brute).abs() < 1e-14);
        assert!((got - (1.0 - (-0.25f64).exp()) / (2.0 * PI.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn shell_contribution_decays_like_power_law() {
        for (dim, expect) in [(Dim::One, -2.0), (Dim::Two, -3.0)] {
            let problem = Problem::new(
                TemperatureProfile::constant(dim),
                0.5,
                InitialData::UniformMaxwellian { rho0: 1.0, temperature: 1.0 },
            )
            .unwrap();
            let y = match dim {
                Dim::One => BoundaryPoint::Wall(Wall::Left),
                Dim::Two => BoundaryPoint::Circle(0.0),
            };
            let (t1, t2) = (20.0, 200.0);
            let a = initial_flux_contribution(&problem, y, t1, 2).unwrap();
            let b = initial_flux_contribution(&problem, y, t2, 2).unwrap();
            let slope = (b / a).ln() / (t2 / t1).ln();
            assert!((slope - expect).abs() < 0.1, "{dim:?}: {slope}");
        }
    }

    #[test]
    fn cubic_gauss_diff_matches_quadrature() {
        let q = crate::quadrature::GaussRule::new(20)
            .integrate_composite(0.3, 1.9, 8, |w| 2.0 * w.powi(3) * (-w * w).exp());
        assert!((cubic_gauss_diff(0.3, 1.9) - q).abs() < 1e-14);
        assert!((cubic_gauss_diff(0.0, f64::INFINITY) - 1.0).abs() < 1e-15);
    }
}
