use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Complex coefficients over the eigenbasis, `coeffs[i]` belonging to mode
/// `i + 1`. Modes with `lambda_n > support_bound` are not stored, so they
/// are exactly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    pub coeffs: Vec<Complex64>,
    pub support_bound: f64,
}

impl SpectralField {
    pub fn new(coeffs: Vec<Complex64>, support_bound: f64) -> Self {
        Self {
            coeffs,
            support_bound,
        }
    }

    pub fn zeros(mode_count: usize, support_bound: f64) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); mode_count], support_bound)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient of mode `n` (1-based); zero outside the stored support.
    pub fn coeff(&self, n: usize) -> Complex64 {
        self.coeffs
            .get(n.wrapping_sub(1))
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// `(sum_n |c_n|^2)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `(sum_n lambda_n^{2s} |c_n|^2)^{1/2}`.
    pub fn hs_norm(&self, lambdas: &[f64], s: f64) -> f64 {
        self.coeffs
            .iter()
            .zip(lambdas)
            .map(|(c, l)| l.powf(2.0 * s) * c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Keep the first `mode_count` coefficients (`P_{<= bound}`).
    pub fn truncated(&self, mode_count: usize, bound: f64) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.truncate(mode_count);
        Self::new(coeffs, bound)
    }

    /// Zero-pad to `mode_count` coefficients under a larger bound.
    pub fn padded(&self, mode_count: usize, bound: f64) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(mode_count.max(coeffs.len()), Complex64::new(0.0, 0.0));
        Self::new(coeffs, bound)
    }

    /// `a - b`, zero-padding the shorter operand.
    pub fn sub(&self, other: &Self) -> Self {
        let len = self.len().max(other.len());
        let coeffs = (1..=len).map(|n| self.coeff(n) - other.coeff(n)).collect();
        Self::new(coeffs, self.support_bound.max(other.support_bound))
    }

    /// `a + b`, zero-padding the shorter operand.
    pub fn add(&self, other: &Self) -> Self {
        let len = self.len().max(other.len());
        let coeffs = (1..=len).map(|n| self.coeff(n) + other.coeff(n)).collect();
        Self::new(coeffs, self.support_bound.max(other.support_bound))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::new(
            self.coeffs.iter().map(|c| c * factor).collect(),
            self.support_bound,
        )
    }

    /// Apply the linear propagator `S(t)`: `c_n -> e^{-i t lambda_n^2} c_n`.
    pub fn propagate(&self, lambdas: &[f64], t: f64) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .zip(lambdas)
                .map(|(c, l)| c * Complex64::from_polar(1.0, -t * l * l))
                .collect(),
            self.support_bound,
        )
    }

    /// Maximum coefficient distance.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let len = self.len().max(other.len());
        (1..=len)
            .map(|n| (self.coeff(n) - other.coeff(n)).norm())
            .fold(0.0, f64::max)
    }
}
