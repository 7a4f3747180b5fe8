//! Gauss–Legendre rules and the special functions used by the solvers.

use gauss_quad::GaussLegendre;
use std::f64::consts::PI;
use std::num::NonZeroUsize;

/// Gauss–Legendre rule with nodes and weights on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    /// Builds an `n`-point rule. `n` must be positive.
    pub fn new(n: usize) -> Self {
        let degree = NonZeroUsize::new(n.max(1)).expect("positive degree");
        let rule = GaussLegendre::new(degree);
        let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, weights) = pairs.into_iter().unzip();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (mid + half * x, half * w))
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule over `panels` equal sub-intervals of `[a, b]`.
    pub fn integrate_composite(&self, a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + h * p as f64;
                self.integrate(lo, lo + h, &mut f)
            })
            .sum()
    }
}

/// Nodes and weights of the incidence-angle rule on `(-pi/2, pi/2)`.
pub fn angle_rule(n: usize) -> Vec<(f64, f64)> {
    GaussRule::new(n).mapped(-0.5 * PI, 0.5 * PI).collect()
}

#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// `exp(-a^2) - exp(-b^2)` for `0 <= a <= b`, accurate when the two are close.
#[inline]
pub fn gauss_diff(a: f64, b: f64) -> f64 {
    if !b.is_finite() {
        return (-a * a).exp();
    }
    (-a * a).exp() * -(-(b - a) * (b + a)).exp_m1()
}

/// `erf(b) - erf(a)` for `0 <= a <= b` without cancellation in the tails.
#[inline]
pub fn erf_diff(a: f64, b: f64) -> f64 {
    if a > 0.5 {
        erfc(a) - erfc(b)
    } else {
        erf(b) - erf(a)
    }
}

/// Regularised lower incomplete gamma `P(3/2, u^2)`,
/// i.e. `erf(u) - 2 u exp(-u^2) / sqrt(pi)`.
pub fn gamma32_lower(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u < 1.0 {
        // P(s, z) = z^s e^{-z} / Gamma(s+1) * sum_n z^n / ((s+1)...(s+n))
        let z = u * u;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut n = 1.0;
        while term > 1e-17 * sum {
            term *= z / (1.5 + n);
            sum += term;
            n += 1.0;
        }
        // Gamma(5/2) = 3 sqrt(pi) / 4
        z * u * (-z).exp() * sum / (0.75 * PI.sqrt())
    } else {
        1.0 - gamma32_upper(u)
    }
}

/// Regularised upper incomplete gamma `Q(3/2, u^2) = erfc(u) + 2 u exp(-u^2) / sqrt(pi)`.
pub fn gamma32_upper(u: f64) -> f64 {
    if u <= 0.0 {
        return 1.0;
    }
    if u < 1.0 {
        return 1.0 - gamma32_lower(u);
    }
    erfc(u) + 2.0 * u * (-u * u).exp() / PI.sqrt()
}
