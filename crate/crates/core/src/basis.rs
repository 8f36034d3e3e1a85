//! Radial Dirichlet eigenbasis of the unit disc.
//!
//! `e_n(r) = J0(lambda_n r) / ||J0(lambda_n .)||_{L2(D)}`, sampled on a disc
//! quadrature rule sized so that products of up to `product_order`
//! eigenfunctions are integrated exactly to working precision.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bessel::{bessel_j0, bessel_j0_j1, j0_zero};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::quadrature::QuadratureRule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenMode {
    /// 1-based mode index `n`.
    pub index: usize,
    /// `n`-th zero of `J0`; the Dirichlet eigenvalue is `lambda^2`.
    pub lambda: f64,
    /// `||J0(lambda .)||_{L2(D)} = sqrt(pi) |J1(lambda)|`.
    pub j0_l2_norm: f64,
}

impl EigenMode {
    pub fn new(index: usize) -> Self {
        let lambda = j0_zero(index);
        let (_, j1) = bessel_j0_j1(lambda);
        Self {
            index,
            lambda,
            j0_l2_norm: std::f64::consts::PI.sqrt() * j1.abs(),
        }
    }

    /// `e_n(r)`, exactly zero at and beyond the boundary.
    pub fn eval(&self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        bessel_j0(self.lambda * r) / self.j0_l2_norm
    }
}

/// Quadrature node count for a basis of `mode_count` modes whose integrands
/// contain products of up to `product_order` eigenfunctions.
pub fn node_count_for(mode_count: usize, product_order: usize) -> usize {
    64.max(3 * product_order * mode_count)
}

#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub modes: Vec<EigenMode>,
    pub quad: QuadratureRule,
    pub product_order: usize,
    /// `values[[m, i]] = e_{m+1}(r_i)`.
    pub values: Array2<f64>,
}

impl SpectralBasis {
    pub fn build(mode_count: usize, product_order: usize) -> Result<Self> {
        if mode_count == 0 {
            return Err(Error::EmptyBasis);
        }
        if product_order < 2 {
            return Err(Error::ProductOrder(product_order));
        }
        let quad = QuadratureRule::disc(node_count_for(mode_count, product_order));
        let modes: Vec<EigenMode> = (1..=mode_count).map(EigenMode::new).collect();
        Ok(Self::from_parts(modes, quad, product_order))
    }

    /// Assemble from precomputed modes and rule (used by the cache loader).
    pub fn from_parts(modes: Vec<EigenMode>, quad: QuadratureRule, product_order: usize) -> Self {
        let nodes = quad.node_count();
        let mut values = Array2::zeros((modes.len(), nodes));
        for (m, mode) in modes.iter().enumerate() {
            for (i, &r) in quad.nodes.iter().enumerate() {
                values[[m, i]] = mode.eval(r);
            }
        }
        Self {
            modes,
            quad,
            product_order,
            values,
        }
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn node_count(&self) -> usize {
        self.quad.node_count()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.lambda).collect()
    }

    pub fn lambda(&self, n: usize) -> f64 {
        self.modes[n - 1].lambda
    }

    pub fn mode(&self, n: usize) -> Result<&EigenMode> {
        self.check_index(n)?;
        Ok(&self.modes[n - 1])
    }

    pub fn check_index(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.modes.len() {
            return Err(Error::ModeOutOfRange {
                index: n,
                mode_count: self.modes.len(),
            });
        }
        Ok(())
    }

    pub fn require_product_order(&self, required: usize) -> Result<()> {
        if self.product_order < required {
            return Err(Error::InsufficientProductOrder {
                required,
                available: self.product_order,
            });
        }
        Ok(())
    }

    /// Row of `e_n` values on the quadrature nodes.
    pub fn row(&self, n: usize) -> ndarray::ArrayView1<'_, f64> {
        self.values.row(n - 1)
    }

    /// Number of modes with `lambda_n <= bound` (the set `E_N`), capped at
    /// the basis size.
    pub fn modes_below(&self, bound: f64) -> usize {
        self.modes.partition_point(|m| m.lambda <= bound)
    }

    /// Quadrature inner product `sum_i w_i e_n(r_i) e_m(r_i)`.
    pub fn inner(&self, n: usize, m: usize) -> f64 {
        let (a, b) = (self.row(n), self.row(m));
        self.quad
            .weights
            .iter()
            .zip(a.iter().zip(b.iter()))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    /// `max |<e_n, e_m> - delta_nm|` over all pairs.
    pub fn orthonormality_defect(&self) -> f64 {
        let count = self.mode_count();
        let mut weighted = self.values.clone();
        for mut row in weighted.rows_mut() {
            for (v, w) in row.iter_mut().zip(&self.quad.weights) {
                *v *= w;
            }
        }
        let gram = weighted.dot(&self.values.t());
        let mut worst = 0.0_f64;
        for n in 0..count {
            for m in 0..count {
                let target = if n == m { 1.0 } else { 0.0 };
                worst = worst.max((gram[[n, m]] - target).abs());
            }
        }
        worst
    }

    /// `||e_n||_{L^p(D)}` for `p` in `[1, inf]`. The sup norm is the grid
    /// maximum refined by a golden-section search around the best node.
    pub fn lp_norm(&self, n: usize, p: f64) -> Result<f64> {
        let mode = *self.mode(n)?;
        if !(p >= 1.0) {
            return Err(Error::Precondition(format!("L^p exponent must be >= 1, got {p}")));
        }
        let row = self.row(n);
        if p.is_infinite() {
            return Ok(refined_sup(&self.quad.nodes, row.as_slice().unwrap(), |r| {
                mode.eval(r)
            }));
        }
        let s: f64 = self
            .quad
            .weights
            .iter()
            .zip(row.iter())
            .map(|(w, v)| w * v.abs().powf(p))
            .sum();
        Ok(s.powf(1.0 / p))
    }

    fn check_field(&self, field: &SpectralField) -> Result<()> {
        if field.len() > self.mode_count() {
            return Err(Error::FieldExceedsBasis {
                bound: field.support_bound,
                required: field.len(),
                available: self.mode_count(),
            });
        }
        Ok(())
    }

    /// Grid values `u(r_i) = sum_n c_n e_n(r_i)`.
    pub fn synthesize(&self, field: &SpectralField) -> Result<Vec<Complex64>> {
        self.check_field(field)?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.node_count()];
        self.synthesize_into(&field.coeffs, &mut out);
        Ok(out)
    }

    /// Coefficients `c_n = sum_i w_i u(r_i) e_n(r_i)` for `n` in
    /// `1..=mode_count`, then truncated to `lambda_n <= support_bound`.
    pub fn analyze(&self, grid: &[Complex64], support_bound: f64) -> Result<SpectralField> {
        if grid.len() != self.node_count() {
            return Err(Error::GridLength {
                got: grid.len(),
                expected: self.node_count(),
            });
        }
        let count = self.modes_below(support_bound);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); count];
        let weighted: Vec<Complex64> = grid
            .iter()
            .zip(&self.quad.weights)
            .map(|(u, w)| u * w)
            .collect();
        self.analyze_into(&weighted, &mut coeffs);
        Ok(SpectralField::new(coeffs, support_bound))
    }

    /// Hot-loop synthesis without allocation; `coeffs.len() <= mode_count`.
    pub fn synthesize_into(&self, coeffs: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (n, c) in coeffs.iter().enumerate() {
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            let row = self.values.row(n);
            for (o, &e) in out.iter_mut().zip(row.iter()) {
                o.re += c.re * e;
                o.im += c.im * e;
            }
        }
    }

    /// Hot-loop analysis of pre-weighted grid values (`w_i u(r_i)`).
    pub fn analyze_into(&self, weighted: &[Complex64], coeffs: &mut [Complex64]) {
        for (n, c) in coeffs.iter_mut().enumerate() {
            let row = self.values.row(n);
            let mut acc = Complex64::new(0.0, 0.0);
            for (u, &e) in weighted.iter().zip(row.iter()) {
                acc.re += u.re * e;
                acc.im += u.im * e;
            }
            *c = acc;
        }
    }

    /// `u(r)` at an arbitrary radius, by direct Bessel evaluation.
    pub fn field_value_at(&self, field: &SpectralField, r: f64) -> Complex64 {
        field
            .coeffs
            .iter()
            .zip(&self.modes)
            .map(|(c, m)| c * m.eval(r))
            .sum()
    }
}

/// Maximum of `|f|` given samples `values` at ascending `nodes` in `(0, 1)`,
/// refined by golden-section search on the bracket around the best sample
/// (the bracket extends to `r = 0` when the best sample is the first node).
pub(crate) fn refined_sup<F: Fn(f64) -> f64>(nodes: &[f64], values: &[f64], f: F) -> f64 {
    let (best, &best_val) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .expect("non-empty grid");
    let lo = if best == 0 { 0.0 } else { nodes[best - 1] };
    let hi = if best + 1 == nodes.len() { 1.0 } else { nodes[best + 1] };
    let g = |r: f64| f(r).abs();
    let invphi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = g(d);
        }
        if b - a < 1e-15 {
            break;
        }
    }
    best_val.abs().max(fc).max(fd).max(g(lo)).max(g(hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_empty_basis() {
        assert!(matches!(SpectralBasis::build(0, 4), Err(Error::EmptyBasis)));
        assert!(matches!(SpectralBasis::build(3, 1), Err(Error::ProductOrder(1))));
    }

    #[test]
    fn node_count_rule() {
        assert_eq!(node_count_for(1, 2), 64);
        assert_eq!(node_count_for(32, 4), 384);
        assert_eq!(node_count_for(64, 4), 768);
    }

    #[test]
    fn orthonormal_32_modes() {
        let b = SpectralBasis::build(32, 4).unwrap();
        assert!(b.orthonormality_defect() <= 1e-10);
        assert!((b.inner(5, 5) - 1.0).abs() < 1e-10);
        assert!(b.inner(3, 9).abs() < 1e-10);
    }

    #[test]
    fn dirichlet_boundary() {
        let b = SpectralBasis::build(8, 4).unwrap();
        for m in &b.modes {
            assert_eq!(m.eval(1.0), 0.0);
            // analytically J0(lambda_n) = 0; the Bessel value at the zero is tiny
            assert!((bessel_j0(m.lambda) / m.j0_l2_norm).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_norm_matches_direct_quadrature() {
        let b = SpectralBasis::build(64, 4).unwrap();
        for m in &b.modes {
            let direct = b.quad.integrate(|r| bessel_j0(m.lambda * r).powi(2)).sqrt();
            assert!((direct - m.j0_l2_norm).abs() < 1e-12, "mode {}", m.index);
            let scaled = direct * (m.index as f64).sqrt();
            assert!((0.3..=3.0).contains(&scaled), "mode {}: {scaled}", m.index);
        }
    }

    #[test]
    fn sign_changes_interlace() {
        let b = SpectralBasis::build(20, 2).unwrap();
        for m in &b.modes {
            let mut changes = 0;
            let mut prev = m.eval(0.0);
            let samples = 4000;
            // stop short of r = 1 where e_n vanishes
            for i in 1..samples {
                let v = m.eval(i as f64 / samples as f64);
                if v * prev < 0.0 {
                    changes += 1;
                }
                if v != 0.0 {
                    prev = v;
                }
            }
            assert_eq!(changes, m.index - 1, "mode {}", m.index);
        }
    }

    #[test]
    fn lp_norms() {
        let b = SpectralBasis::build(16, 4).unwrap();
        for n in 1..=16 {
            assert!((b.lp_norm(n, 2.0).unwrap() - 1.0).abs() < 1e-10);
        }
        // the sup norm is attained at the centre: e_n(0) = 1 / ||J0(lambda_n .)||
        let m = b.modes[9];
        let sup = b.lp_norm(10, f64::INFINITY).unwrap();
        assert!((sup - 1.0 / m.j0_l2_norm).abs() < 1e-12);
        assert!(b.lp_norm(17, 2.0).is_err());
        assert!(b.lp_norm(1, 0.5).is_err());
    }

    #[test]
    fn unit_area_check_via_constant() {
        let b = SpectralBasis::build(4, 2).unwrap();
        assert!((b.quad.weights.iter().sum::<f64>() - PI).abs() < 1e-12);
    }

    #[test]
    fn grid_length_mismatch() {
        let b = SpectralBasis::build(4, 2).unwrap();
        let grid = vec![Complex64::new(0.0, 0.0); 3];
        assert!(matches!(b.analyze(&grid, 16.0), Err(Error::GridLength { .. })));
    }
}
