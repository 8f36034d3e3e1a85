//! Phase function, pairings, and brute-force lattice counts behind the
//! resonance estimates.
//!
//! Index tuples are `(n, n_1, ..., n_{2k+1})`. The phase is
//! `lambda_n^2 - lambda_{n_1}^2 + lambda_{n_2}^2 - ... - lambda_{n_{2k+1}}^2`,
//! i.e. `lambda_n^2 - sum_j iota_j lambda_{n_j}^2` with `iota_j = +1` for odd
//! `j` (unconjugated factors) and `-1` for even `j`. For pairing purposes the
//! output index `n` carries sign `-1`, so `n = n_1` is a pairing.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::CorrelationTensor;
use crate::error::{Error, Result};
use crate::SpectralBasis;

/// Default largest frequency bound accepted by exact tensor enumeration.
pub const DEFAULT_CEILING: f64 = 32.0;

/// Conjugation sign `iota_j` of position `j` (0 is the output index `n`).
pub fn iota(position: usize) -> i8 {
    if position == 0 || position % 2 == 0 {
        -1
    } else {
        1
    }
}

fn lambda_sq(lambdas: &[f64], n: usize) -> f64 {
    let l = lambdas[n - 1];
    l * l
}

/// `Phi(n, n_1, ..., n_{2k+1})` for a tuple of 1-based indices.
pub fn phase(lambdas: &[f64], indices: &[usize]) -> f64 {
    let mut phi = lambda_sq(lambdas, indices[0]);
    for (j, &n) in indices.iter().enumerate().skip(1) {
        phi -= iota(j) as f64 * lambda_sq(lambdas, n);
    }
    phi
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseQuery {
    pub indices: Vec<usize>,
    pub signs: Vec<i8>,
    pub phase: f64,
    pub bucket: i64,
}

impl PhaseQuery {
    pub fn new(lambdas: &[f64], indices: &[usize]) -> Result<Self> {
        if indices.len() < 4 || indices.len() % 2 != 0 {
            return Err(Error::Precondition(format!(
                "phase takes (n, n_1, ..., n_(2k+1)), got {} indices",
                indices.len()
            )));
        }
        for &n in indices {
            if n == 0 || n > lambdas.len() {
                return Err(Error::ModeOutOfRange {
                    index: n,
                    mode_count: lambdas.len(),
                });
            }
        }
        let phase = phase(lambdas, indices);
        Ok(Self {
            indices: indices.to_vec(),
            signs: (1..indices.len()).map(iota).collect(),
            phase,
            bucket: phase.floor() as i64,
        })
    }
}

/// Which pairings occur among the positions of a tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Pairings {
    pub any: bool,
    pub simple: bool,
    pub over: bool,
}

/// Classify pairings of `(n, n_1, ..., n_{2k+1})`: positions `i, j` pair when
/// the indices agree and the signs are opposite; the pairing is an
/// over-pairing when the same index occurs at a third position, simple
/// otherwise.
pub fn classify_pairings(indices: &[usize]) -> Pairings {
    let mut out = Pairings::default();
    for i in 0..indices.len() {
        for j in i + 1..indices.len() {
            if indices[i] != indices[j] || iota(i) + iota(j) != 0 {
                continue;
            }
            out.any = true;
            let third = indices
                .iter()
                .enumerate()
                .any(|(l, &v)| l != i && l != j && v == indices[i]);
            if third {
                out.over = true;
            } else {
                out.simple = true;
            }
        }
    }
    out
}

/// Inclusive 1-based index ranges for the two coordinates of a pair count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexBox {
    pub first: (usize, usize),
    pub second: (usize, usize),
}

impl IndexBox {
    /// `[1, r] x [1, r]`.
    pub fn square(r: usize) -> Self {
        Self {
            first: (1, r),
            second: (1, r),
        }
    }

    pub fn swapped(&self) -> Self {
        Self {
            first: self.second,
            second: self.first,
        }
    }

    fn max_index(&self) -> usize {
        self.first.1.max(self.second.1)
    }
}

fn slice_range(sq: &[f64], range: (usize, usize)) -> &[f64] {
    if range.0 > range.1 || range.0 == 0 {
        return &[];
    }
    &sq[range.0 - 1..range.1]
}

/// Number of entries of the ascending slice strictly inside `(lo, hi)`.
fn count_open(sorted: &[f64], lo: f64, hi: f64) -> usize {
    let a = sorted.partition_point(|&v| v <= lo);
    let b = sorted.partition_point(|&v| v < hi);
    b.saturating_sub(a)
}

/// Squared eigenvalues `lambda_n^2` for `n = 1..=count`.
pub fn eigenvalue_squares(count: usize) -> Vec<f64> {
    crate::bessel::j0_zeros(count).iter().map(|l| l * l).collect()
}

fn check_box(sq: &[f64], b: &IndexBox) -> Result<()> {
    if b.max_index() > sq.len() {
        return Err(Error::ModeOutOfRange {
            index: b.max_index(),
            mode_count: sq.len(),
        });
    }
    Ok(())
}

/// `#{(n_1, n_2) in box : |lambda_{n_1}^2 - lambda_{n_2}^2 - m| < 1}`, with
/// `n_1 != n_2` when `exclude_diagonal`. `sq` holds `lambda_n^2`.
pub fn count_diff_pairs(sq: &[f64], m: f64, b: &IndexBox, exclude_diagonal: bool) -> Result<u64> {
    check_box(sq, b)?;
    let second = slice_range(sq, b.second);
    let mut count = 0u64;
    for &a in slice_range(sq, b.first) {
        // lambda_{n_2}^2 in (a - m - 1, a - m + 1)
        count += count_open(second, a - m - 1.0, a - m + 1.0) as u64;
    }
    if exclude_diagonal && m.abs() < 1.0 {
        let lo = b.first.0.max(b.second.0);
        let hi = b.first.1.min(b.second.1);
        if lo <= hi {
            count -= (hi - lo + 1) as u64;
        }
    }
    Ok(count)
}

/// `#{(n_1, n_2) in box : |lambda_{n_1}^2 + lambda_{n_2}^2 - m| < 1}`.
pub fn count_sum_pairs(sq: &[f64], m: f64, b: &IndexBox) -> Result<u64> {
    check_box(sq, b)?;
    let second = slice_range(sq, b.second);
    Ok(slice_range(sq, b.first)
        .iter()
        .map(|&a| count_open(second, m - a - 1.0, m - a + 1.0) as u64)
        .sum())
}

/// Integer `m` maximising `#{phases in (m - 1, m + 1)}` and that count.
/// Ties resolve to the smallest `m`; an empty input gives `(0, 0)`.
pub fn worst_integer_window(phases: &[f64]) -> (i64, u64) {
    // bucket -> (phases in [b, b + 1), phases equal to b)
    let mut hist: BTreeMap<i64, (u64, u64)> = BTreeMap::new();
    for &p in phases {
        let b = p.floor() as i64;
        let e = hist.entry(b).or_default();
        e.0 += 1;
        if p == b as f64 {
            e.1 += 1;
        }
    }
    let occupancy = |m: i64| {
        let below = hist.get(&(m - 1)).map_or(0, |&(c, exact)| c - exact);
        below + hist.get(&m).map_or(0, |e| e.0)
    };
    let mut best = (0i64, 0u64);
    let mut candidates: Vec<i64> = hist.keys().flat_map(|&b| [b, b + 1]).collect();
    candidates.sort_unstable();
    candidates.dedup();
    for m in candidates {
        let c = occupancy(m);
        if c > best.1 {
            best = (m, c);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub side: usize,
    pub m: i64,
    pub count: u64,
}

/// Worst-case integer `m` for difference pairs in `[1, r]^2`.
pub fn worst_case_diff_pairs(sq: &[f64], r: usize, exclude_diagonal: bool) -> Result<WorstCase> {
    check_box(sq, &IndexBox::square(r))?;
    let phases: Vec<f64> = (0..r)
        .into_par_iter()
        .flat_map_iter(|i| {
            (0..r)
                .filter(move |&j| !(exclude_diagonal && i == j))
                .map(move |j| sq[i] - sq[j])
        })
        .collect();
    let (m, count) = worst_integer_window(&phases);
    Ok(WorstCase { side: r, m, count })
}

/// Worst-case integer `m` for sum pairs in `[1, r]^2`.
pub fn worst_case_sum_pairs(sq: &[f64], r: usize) -> Result<WorstCase> {
    check_box(sq, &IndexBox::square(r))?;
    let phases: Vec<f64> = (0..r)
        .into_par_iter()
        .flat_map_iter(|i| (0..r).map(move |j| sq[i] + sq[j]))
        .collect();
    let (m, count) = worst_integer_window(&phases);
    Ok(WorstCase { side: r, m, count })
}

/// `#{(a, b) in Z^2 : ab = m, |a - a0| <= ma, |b - b0| <= nb}` for `m != 0`.
pub fn divisor_count(m: i64, a0: i64, b0: i64, ma: u64, nb: u64) -> Result<u64> {
    if m == 0 {
        return Err(Error::Precondition("divisor count needs m != 0".into()));
    }
    let abs = m.unsigned_abs();
    let mut count = 0;
    let mut d = 1u64;
    while d * d <= abs {
        if abs % d == 0 {
            let mut divisors = vec![d];
            if d * d != abs {
                divisors.push(abs / d);
            }
            for a in divisors {
                for a in [a as i64, -(a as i64)] {
                    let b = m / a;
                    if a.abs_diff(a0) <= ma && b.abs_diff(b0) <= nb {
                        count += 1;
                    }
                }
            }
        }
        d += 1;
    }
    Ok(count)
}

/// Restriction applied to base-tensor entries.
#[derive(Clone, Default)]
pub enum TupleConstraint {
    #[default]
    None,
    /// `n` differs from the largest odd-position frequency.
    NotOddMax,
    /// No simple pairing among `(n, n_1, ..., n_{2k+1})`.
    NoSimplePairing,
    /// No pairing of any kind.
    NoPairing,
    /// Membership in an arbitrary index set.
    Custom(Arc<dyn Fn(&[usize]) -> bool + Send + Sync>),
}

impl fmt::Debug for TupleConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => write!(f, "None"),
            Self::NotOddMax => write!(f, "NotOddMax"),
            Self::NoSimplePairing => write!(f, "NoSimplePairing"),
            Self::NoPairing => write!(f, "NoPairing"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl TupleConstraint {
    pub fn admits(&self, indices: &[usize]) -> bool {
        match self {
            Self::None => true,
            Self::NotOddMax => {
                let odd_max = indices.iter().skip(1).step_by(2).max().copied();
                odd_max != Some(indices[0])
            }
            Self::NoSimplePairing => !classify_pairings(indices).simple,
            Self::NoPairing => !classify_pairings(indices).any,
            Self::Custom(f) => f(indices),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::NotOddMax => "not-odd-max",
            Self::NoSimplePairing => "no-simple-pairing",
            Self::NoPairing => "no-pairing",
            Self::Custom(_) => "custom",
        }
    }
}

/// Dyadic frequency box and phase bucket of a base tensor.
#[derive(Debug, Clone)]
pub struct BaseTensorSpec {
    pub n_bound: f64,
    /// `N_1, ..., N_{2k+1}`.
    pub bounds: Vec<f64>,
    pub m: i64,
    pub constraint: TupleConstraint,
}

impl BaseTensorSpec {
    pub fn new(n_bound: f64, bounds: Vec<f64>, m: i64) -> Self {
        Self {
            n_bound,
            bounds,
            m,
            constraint: TupleConstraint::None,
        }
    }

    pub fn with_constraint(mut self, constraint: TupleConstraint) -> Self {
        self.constraint = constraint;
        self
    }

    fn check(&self, lambdas: &[f64], ceiling: f64) -> Result<()> {
        if self.bounds.len() < 3 || self.bounds.len() % 2 == 0 {
            return Err(Error::Precondition(format!(
                "base tensor needs 2k+1 bounds, got {}",
                self.bounds.len()
            )));
        }
        for &b in std::iter::once(&self.n_bound).chain(&self.bounds) {
            if b > ceiling {
                return Err(Error::CeilingExceeded { bound: b, ceiling });
            }
            if lambdas.last().is_none_or(|&l| l <= b) {
                return Err(Error::Precondition(format!(
                    "{} eigenvalues do not cover the frequency bound {b}",
                    lambdas.len()
                )));
            }
        }
        Ok(())
    }
}

fn modes_below(lambdas: &[f64], bound: f64) -> usize {
    lambdas.partition_point(|&l| l <= bound)
}

/// Visit every admissible `(n, n_1, ..., n_{2k+1})` of the box with its phase.
/// Outer loop over `n` in parallel; each worker returns its own histogram.
fn bucket_histograms(lambdas: &[f64], spec: &BaseTensorSpec) -> Vec<BTreeMap<i64, u64>> {
    let n_max = modes_below(lambdas, spec.n_bound);
    let limits: Vec<usize> = spec.bounds.iter().map(|&b| modes_below(lambdas, b)).collect();
    (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let mut hist = BTreeMap::new();
            let mut tuple = vec![n; limits.len() + 1];
            enumerate(lambdas, &limits, &spec.constraint, &mut tuple, 1, lambda_sq(lambdas, n), &mut hist);
            hist
        })
        .collect()
}

fn enumerate(
    lambdas: &[f64],
    limits: &[usize],
    constraint: &TupleConstraint,
    tuple: &mut [usize],
    pos: usize,
    partial: f64,
    hist: &mut BTreeMap<i64, u64>,
) {
    if pos == tuple.len() {
        if constraint.admits(tuple) {
            *hist.entry(partial.floor() as i64).or_insert(0) += 1;
        }
        return;
    }
    let sign = iota(pos) as f64;
    for n in 1..=limits[pos - 1] {
        tuple[pos] = n;
        let next = partial - sign * lambda_sq(lambdas, n);
        enumerate(lambdas, limits, constraint, tuple, pos + 1, next, hist);
    }
}

/// Number of admissible tuples with `floor(Phi) = m`.
pub fn base_tensor_count(lambdas: &[f64], spec: &BaseTensorSpec, ceiling: f64) -> Result<u64> {
    spec.check(lambdas, ceiling)?;
    Ok(bucket_histograms(lambdas, spec)
        .iter()
        .map(|h| h.get(&spec.m).copied().unwrap_or(0))
        .sum())
}

/// Hilbert–Schmidt norm of the restricted base tensor (entries are 0/1).
pub fn base_tensor_hs_norm(lambdas: &[f64], spec: &BaseTensorSpec, ceiling: f64) -> Result<f64> {
    Ok((base_tensor_count(lambdas, spec, ceiling)? as f64).sqrt())
}

/// `sup_m` of the Hilbert–Schmidt norm (ignores `spec.m`), with the
/// maximising bucket.
pub fn base_tensor_sup_hs_norm(
    lambdas: &[f64],
    spec: &BaseTensorSpec,
    ceiling: f64,
) -> Result<(i64, f64)> {
    spec.check(lambdas, ceiling)?;
    let mut total: BTreeMap<i64, u64> = BTreeMap::new();
    for h in bucket_histograms(lambdas, spec) {
        for (m, c) in h {
            *total.entry(m).or_insert(0) += c;
        }
    }
    let mut best = (0i64, 0u64);
    for (m, c) in total {
        if c > best.1 {
            best = (m, c);
        }
    }
    Ok((best.0, (best.1 as f64).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub k: usize,
    pub n_bound: f64,
    pub s_crit: f64,
    pub s_p: f64,
    /// `sup_{m, n} #{pairing-free tuples in bucket m} * max |c|`, when computed.
    pub counting_proxy: Option<f64>,
    /// `N^{3k-2}`.
    pub reference: f64,
}

/// Deterministic scaling regularity `1 - 1/k`.
pub fn critical_regularity(k: usize) -> f64 {
    1.0 - 1.0 / k as f64
}

/// Probabilistic scaling regularity `1/2 - 3/(4k)`.
pub fn probabilistic_regularity(k: usize) -> f64 {
    0.5 - 0.75 / k as f64
}

/// Scaling indices for degree `k`, plus the measured counting quantity at
/// frequency `n_bound` when a basis is supplied.
pub fn scaling_report(basis: Option<&SpectralBasis>, k: usize, n_bound: f64) -> Result<ScalingReport> {
    if k == 0 {
        return Err(Error::Precondition("k must be at least 1".into()));
    }
    let counting_proxy = match basis {
        Some(b) => Some(counting_proxy(b, k, n_bound)?),
        None => None,
    };
    Ok(ScalingReport {
        k,
        n_bound,
        s_crit: critical_regularity(k),
        s_p: probabilistic_regularity(k),
        counting_proxy,
        reference: n_bound.powi(3 * k as i32 - 2),
    })
}

fn counting_proxy(basis: &SpectralBasis, k: usize, n_bound: f64) -> Result<f64> {
    let modes = basis.modes_below(n_bound);
    if modes == 0 {
        return Err(Error::EmptyBasis);
    }
    if n_bound > DEFAULT_CEILING {
        return Err(Error::CeilingExceeded {
            bound: n_bound,
            ceiling: DEFAULT_CEILING,
        });
    }
    let tensor = CorrelationTensor::new(basis, k)?;
    let lambdas = basis.lambdas();
    let width = 2 * k + 2;
    let mut sup_count = 0u64;
    let mut sup_c: f64 = 0.0;
    for n in 1..=modes {
        let mut hist: BTreeMap<i64, u64> = BTreeMap::new();
        let mut tuple = vec![1; width];
        tuple[0] = n;
        loop {
            if !classify_pairings(&tuple).any {
                *hist.entry(phase(&lambdas, &tuple).floor() as i64).or_insert(0) += 1;
                sup_c = sup_c.max(tensor.get(&tuple)?.abs());
            }
            // odometer over positions 1..width
            let mut pos = width - 1;
            loop {
                if tuple[pos] < modes {
                    tuple[pos] += 1;
                    break;
                }
                tuple[pos] = 1;
                pos -= 1;
                if pos == 0 {
                    break;
                }
            }
            if pos == 0 {
                break;
            }
        }
        sup_count = sup_count.max(hist.values().copied().max().unwrap_or(0));
    }
    Ok(sup_count as f64 * sup_c)
}
