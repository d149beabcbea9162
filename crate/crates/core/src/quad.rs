//! Quadrature rules shared by the analytic layer and the source assembly.

use serde::{Deserialize, Serialize};

/// Composite rule used for both spatial and temporal integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadScheme {
    /// Composite midpoint rule with equally sized panels. Spectrally accurate
    /// for smooth integrands that decay before the truncation boundary.
    Midpoint,
    /// Single-panel Gauss-Legendre rule with the given node count.
    GaussLegendre,
}

/// Node counts and truncation radius for the integrals in the analytic layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub space_points: usize,
    pub time_points: usize,
    /// Spatial integrals over the plane are truncated to a centered box of
    /// this halfwidth.
    pub space_halfwidth: f64,
    pub scheme: QuadScheme,
}

impl QuadratureSpec {
    pub fn new(
        space_points: usize,
        time_points: usize,
        space_halfwidth: f64,
        scheme: QuadScheme,
    ) -> Self {
        assert!(space_points >= 2 && time_points >= 2, "need at least 2 nodes");
        assert!(space_halfwidth > 0.0, "truncation radius must be positive");
        QuadratureSpec { space_points, time_points, space_halfwidth, scheme }
    }

    /// Truncation sized so the kernel tail beyond the box is negligible over
    /// horizon `t` for diffusivity `d` and mollifier width `epsilon`.
    pub fn for_kernel(d: f64, t: f64, epsilon: f64) -> Self {
        let halfwidth = 8.0 * (4.0 * d * t + epsilon).sqrt();
        QuadratureSpec::new(64, 64, halfwidth, QuadScheme::GaussLegendre)
    }

    /// Same rule with both node counts doubled; used for refinement checks.
    pub fn refined(&self) -> Self {
        QuadratureSpec {
            space_points: self.space_points * 2,
            time_points: self.time_points * 2,
            ..*self
        }
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec::new(64, 64, 8.0, QuadScheme::GaussLegendre)
    }
}

/// Nodes and weights for integrating over [a, b] with `n` points.
pub fn nodes_1d(scheme: QuadScheme, n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    assert!(n >= 1 && b >= a);
    match scheme {
        QuadScheme::Midpoint => {
            let h = (b - a) / n as f64;
            (0..n).map(|i| (a + (i as f64 + 0.5) * h, h)).collect()
        }
        QuadScheme::GaussLegendre => gauss_legendre(n)
            .into_iter()
            .map(|(x, w)| (0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w))
            .collect(),
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence. Nodes are returned in ascending order.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let m = n.div_ceil(2);
    // Roots in [0, 1), descending; for odd n the last one is the exact center.
    let mut half = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        if n % 2 == 1 && i == m - 1 {
            x = 0.0;
        } else {
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        half.push((x, 2.0 / ((1.0 - x * x) * d * d)));
    }
    let mut full = Vec::with_capacity(n);
    for &(x, w) in &half {
        if x > 0.0 {
            full.push((-x, w));
        }
    }
    if n % 2 == 1 {
        full.push(half[m - 1]);
    }
    for &(x, w) in half.iter().rev() {
        if x > 0.0 {
            full.push((x, w));
        }
    }
    debug_assert_eq!(full.len(), n);
    full
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Degree-5 seven-point rule on the reference triangle, as barycentric
/// coordinates with weights normalized to sum to one.
pub const TRIANGLE_7: [([f64; 3], f64); 7] = {
    // Orbit coordinates (6 +- sqrt(15)) / 21 and weights (155 +- sqrt(15)) / 1200.
    const B1: f64 = 0.470_142_064_105_115_1;
    const A1: f64 = 1.0 - 2.0 * B1;
    const W1: f64 = 0.132_394_152_788_506_2;
    const B2: f64 = 0.101_286_507_323_456_34;
    const A2: f64 = 1.0 - 2.0 * B2;
    const W2: f64 = 0.125_939_180_544_827_2;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 9.0 / 40.0),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate_1d(scheme: QuadScheme, n: usize, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        nodes_1d(scheme, n, a, b).iter().map(|&(x, w)| w * f(x)).sum()
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for n in [2usize, 3, 5, 8, 13, 20, 64] {
            for deg in 0..(2 * n) {
                let exact = (1.0 - (-1.0f64).powi(deg as i32 + 1)) / (deg as f64 + 1.0);
                let got = integrate_1d(QuadScheme::GaussLegendre, n, -1.0, 1.0, |x| {
                    x.powi(deg as i32)
                });
                assert!(
                    (got - exact).abs() < 1e-12,
                    "n={n} deg={deg}: got {got}, exact {exact}"
                );
            }
        }
    }

    #[test]
    fn gauss_weights_sum_to_interval_length() {
        for n in [2usize, 7, 33, 96] {
            let s: f64 = nodes_1d(QuadScheme::GaussLegendre, n, 0.0, 2.5)
                .iter()
                .map(|&(_, w)| w)
                .sum();
            assert!((s - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn midpoint_handles_gaussian_tails() {
        // Truncated Gaussian: midpoint is spectrally accurate once the tails
        // vanish at the boundary.
        let got = integrate_1d(QuadScheme::Midpoint, 96, -8.0, 8.0, |x| (-0.5 * x * x).exp());
        assert!((got - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn triangle_rule_integrates_degree_five() {
        // Reference triangle (0,0)-(1,0)-(0,1): integral of x^p y^q equals
        // p! q! / (p + q + 2)!.
        let factorial = |k: usize| (1..=k).product::<usize>() as f64;
        for p in 0..=5usize {
            for q in 0..=(5 - p) {
                let exact = factorial(p) * factorial(q) / factorial(p + q + 2);
                let mut got = 0.0;
                for (bary, w) in TRIANGLE_7 {
                    let x = bary[1];
                    let y = bary[2];
                    got += w * x.powi(p as i32) * y.powi(q as i32);
                }
                got *= 0.5; // reference triangle area
                assert!(
                    (got - exact).abs() < 1e-14,
                    "x^{p} y^{q}: got {got}, exact {exact}"
                );
            }
        }
    }
}
