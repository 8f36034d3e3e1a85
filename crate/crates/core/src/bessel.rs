//! Bessel functions `J0`, `J1` and the positive zeros of `J0`.
//!
//! Three regimes are used:
//!
//! * `x < 2`: the Taylor series, all of whose terms are small, so there is no
//!   cancellation.
//! * `2 <= x < 25`: Miller's backward recurrence normalised with
//!   `J0 + 2 (J2 + J4 + ...) = 1`. The plain Taylor series loses up to
//!   `log10(I0(x))` digits here, which already violates a `1e-13` relative
//!   target at `x = 8`.
//! * `x >= 25`: the Hankel asymptotic expansion, whose smallest term is below
//!   `1e-20` in this range. The phase `x - pi/4` is never formed explicitly;
//!   `cos(x)` and `sin(x)` are combined instead so that no argument-reduction
//!   error is introduced for large `x`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const SERIES_LIMIT: f64 = 2.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// `J0(x)` for `x >= 0`. Negative arguments are reflected (`J0` is even).
pub fn bessel_j0(x: f64) -> f64 {
    bessel_j0_j1(x).0
}

/// `J1(x)`; odd in `x`.
pub fn bessel_j1(x: f64) -> f64 {
    if x < 0.0 {
        return -bessel_j0_j1(-x).1;
    }
    bessel_j0_j1(x).1
}

/// Both `J0(x)` and `J1(x)` from a single evaluation.
pub fn bessel_j0_j1(x: f64) -> (f64, f64) {
    let x = x.abs();
    if x < SERIES_LIMIT {
        series(x)
    } else if x < ASYMPTOTIC_LIMIT {
        miller(x)
    } else {
        hankel(x)
    }
}

fn series(x: f64) -> (f64, f64) {
    let q = -0.25 * x * x;
    let (mut t0, mut s0) = (1.0, 1.0);
    let (mut t1, mut s1) = (0.5 * x, 0.5 * x);
    for m in 1..40 {
        let m = m as f64;
        t0 *= q / (m * m);
        t1 *= q / (m * (m + 1.0));
        s0 += t0;
        s1 += t1;
        if t0.abs() < 1e-18 && t1.abs() < 1e-18 {
            break;
        }
    }
    (s0, s1)
}

fn miller(x: f64) -> (f64, f64) {
    // start well above x so that J_start(x) is negligible relative to J0
    let start = 2 * ((x as usize + 40) / 2);
    let two_over_x = 2.0 / x;
    let mut above = 0.0_f64;
    let mut current = 1e-30_f64;
    let mut norm = 0.0_f64;
    let mut j1 = 0.0;
    for order in (1..=start).rev() {
        let below = order as f64 * two_over_x * current - above;
        above = current;
        current = below;
        // `current` now holds J_{order-1}
        if order - 1 == 1 {
            j1 = current;
        }
        if (order - 1) % 2 == 0 && order - 1 > 0 {
            norm += 2.0 * current;
        }
        if current.abs() > 1e250 {
            current *= 1e-250;
            above *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
        }
    }
    norm += current;
    (current / norm, j1 / norm)
}

/// Hankel expansion `J_nu(x) = sqrt(2/(pi x)) (P cos chi - Q sin chi)`.
fn hankel_pq(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0_f64;
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (8.0 * k as f64 * x);
        if term.abs() > prev || term.abs() < 1e-20 {
            break;
        }
        prev = term.abs();
        // k = 1, 2, 3, 4, ... contributes +Q, -P, -Q, +P, ...
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
    }
    (p, q)
}

fn hankel(x: f64) -> (f64, f64) {
    let amplitude = (2.0 / (PI * x)).sqrt();
    let (s, c) = x.sin_cos();
    let (p0, q0) = hankel_pq(0.0, x);
    let (p1, q1) = hankel_pq(1.0, x);
    // chi0 = x - pi/4, chi1 = x - 3 pi/4
    let cos0 = (c + s) * FRAC_1_SQRT_2;
    let sin0 = (s - c) * FRAC_1_SQRT_2;
    let cos1 = (s - c) * FRAC_1_SQRT_2;
    let sin1 = -(s + c) * FRAC_1_SQRT_2;
    (
        amplitude * (p0 * cos0 - q0 * sin0),
        amplitude * (p1 * cos1 - q1 * sin1),
    )
}

/// McMahon's expansion for the `n`-th zero of `J0`.
fn mcmahon(n: usize) -> f64 {
    let beta = PI * (n as f64 - 0.25);
    let b = 8.0 * beta;
    let b2 = b * b;
    beta + 1.0 / b - (4.0 * 31.0 / 3.0) / (b * b2) + (32.0 * 3779.0 / 15.0) / (b * b2 * b2)
}

/// The `n`-th positive zero `lambda_n` of `J0` (`n >= 1`).
///
/// Newton iteration from McMahon's guess with `J0' = -J1`, stopped once
/// `|J0| < 1e-14`, followed by one polishing step.
pub fn j0_zero(n: usize) -> f64 {
    assert!(n >= 1, "zeros of J0 are indexed from 1");
    let mut x = if n == 1 { 2.404_825_557_695_773 } else { mcmahon(n) };
    for _ in 0..50 {
        let (j0, j1) = bessel_j0_j1(x);
        let step = j0 / j1;
        x += step;
        if j0.abs() < 1e-14 || step.abs() < 4.0 * f64::EPSILON * x {
            let (j0, j1) = bessel_j0_j1(x);
            x += j0 / j1;
            break;
        }
    }
    x
}

/// `lambda_1, ..., lambda_count`.
pub fn j0_zeros(count: usize) -> Vec<f64> {
    (1..=count).map(j0_zero).collect()
}

/// Number of zeros with `lambda_n <= bound`, i.e. `|E_N|` for `N = bound`.
pub fn zeros_below(bound: f64) -> usize {
    if bound < j0_zero(1) {
        return 0;
    }
    // lambda_n ~ pi (n - 1/4) + 1/(8 pi n): start from the asymptotic count
    let mut n = ((bound / PI) + 0.25).floor().max(1.0) as usize;
    while j0_zero(n) > bound {
        n -= 1;
    }
    while j0_zero(n + 1) <= bound {
        n += 1;
    }
    n
}
