//! Gauss–Legendre rules and the radial disc quadrature built on them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
///
/// Newton's method on `P_n` from the Tricomi-type initial guess; each node
/// costs one `O(n)` three-term recurrence per iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..half {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x is the i-th largest node
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
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

/// Quadrature for radial integrands on the unit disc:
/// `sum_i w_i f(r_i) ~ int_D f dx = 2 pi int_0^1 f(r) r dr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Gauss–Legendre on `(0, 1)` with weights `2 pi omega_i r_i`.
    pub fn disc(node_count: usize) -> Self {
        let (x, w) = gauss_legendre(node_count);
        let nodes: Vec<f64> = x.iter().map(|&x| 0.5 * (x + 1.0)).collect();
        let weights = nodes
            .iter()
            .zip(&w)
            .map(|(&r, &w)| 2.0 * PI * 0.5 * w * r)
            .collect();
        Self { nodes, weights }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&r, &w)| w * f(r))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_rules_match_tabulated_values() {
        let (x, w) = gauss_legendre(3);
        assert!((x[2] - 0.774_596_669_241_483_4).abs() < 1e-15);
        assert!(x[1].abs() < 1e-15);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
        assert!((w[0] - 5.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(10);
        for deg in 0..20 {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((got - want).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn disc_area_is_pi() {
        for n in [1, 7, 64, 500, 3000] {
            let q = QuadratureRule::disc(n);
            let area: f64 = q.weights.iter().sum();
            assert!((area - PI).abs() <= 1e-12 * PI, "n = {n}: {area}");
            assert!(q.weights.iter().all(|&w| w > 0.0));
            assert!(q.nodes.windows(2).all(|p| p[1] > p[0]));
            assert!(q.nodes[0] > 0.0 && q.nodes[n - 1] < 1.0);
        }
    }

    #[test]
    fn large_rule_is_accurate() {
        let q = QuadratureRule::disc(6144);
        // int_D r^2 dx = 2 pi / 4
        let got = q.integrate(|r| r * r);
        assert!((got - PI / 2.0).abs() < 1e-12);
        // oscillatory: 2 pi int_0^1 cos(400 r) r dr
        let a: f64 = 400.0;
        let exact = 2.0 * PI * ((a.sin()) / a + (a.cos() - 1.0) / (a * a));
        assert!((q.integrate(|r| (a * r).cos()) - exact).abs() < 1e-12);
    }
}
