//! Gaussian free field draws, rejection sampling of the truncated Gibbs
//! measure, and the Monte Carlo invariance test under the truncated flow.
//!
//! Mode `n` of a draw is read from ChaCha8 stream `n` of the draw seed, so
//! the draw at truncation `N'` is the projection of the draw at `N >= N'`
//! (common random numbers across truncations). Stream 0 supplies the
//! rejection uniforms.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::SpectralBasis;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::flow::{self, FlowConfig, Nonlinearity, Picture};

/// Fewest samples accepted by the invariance test.
pub const MIN_INVARIANCE_SAMPLES: usize = 100;

/// Default cap on rejection attempts per sample.
pub const DEFAULT_MAX_ATTEMPTS: u32 = 10_000;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of item `index` under `master`; independent of evaluation order.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianDraw {
    pub seed: u64,
    /// `g_n` with independent real and imaginary parts of variance 1/2.
    pub gaussians: Vec<Complex64>,
    /// `g_n / (pi lambda_n)`.
    pub field: SpectralField,
}

/// Standard complex Gaussian for mode `n` (1-based) of a draw.
pub fn mode_gaussian(seed: u64, n: usize) -> Complex64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n as u64);
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Gaussian free field projected to `E_N`, from eigenvalues.
pub fn gff_from_lambdas(lambdas: &[f64], cutoff: f64, seed: u64) -> GaussianDraw {
    let modes = lambdas.partition_point(|&l| l <= cutoff);
    let gaussians: Vec<Complex64> = (1..=modes).map(|n| mode_gaussian(seed, n)).collect();
    let coeffs = gaussians
        .iter()
        .zip(lambdas)
        .map(|(g, l)| g / (PI * l))
        .collect();
    GaussianDraw {
        seed,
        gaussians,
        field: SpectralField::new(coeffs, cutoff),
    }
}

/// `P_{<=N}` of the Gaussian free field `sum_n g_n / (pi lambda_n) e_n`.
pub fn sample_gff(basis: &SpectralBasis, cutoff: f64, seed: u64) -> Result<GaussianDraw> {
    let need = flow::truncation_size(cutoff);
    if need > basis.mode_count() {
        return Err(Error::FieldExceedsBasis {
            bound: cutoff,
            required: need,
            available: basis.mode_count(),
        });
    }
    Ok(gff_from_lambdas(&basis.lambdas(), cutoff, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub k: usize,
    pub cutoff: f64,
    /// Multiplier `beta` in the weight `exp(-beta V)`; 1 is the Gibbs
    /// measure itself, 0 turns the weight off.
    pub potential_scale: f64,
    pub max_attempts: u32,
}

impl GibbsConfig {
    pub fn new(k: usize, cutoff: f64) -> Self {
        Self {
            k,
            cutoff,
            potential_scale: 1.0,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }

    pub fn with_potential_scale(mut self, scale: f64) -> Self {
        self.potential_scale = scale;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsSample {
    pub seed: u64,
    pub field: SpectralField,
    /// `V = 1/(2k+2) int |u|^{2k+2}` of the accepted field.
    pub potential: f64,
    pub accepted: bool,
    pub attempts: u32,
}

/// Evaluates `V` for fields supported in `E_N`.
pub struct PotentialEvaluator<'a> {
    nl: Nonlinearity<'a>,
    k: usize,
}

impl<'a> PotentialEvaluator<'a> {
    pub fn new(basis: &'a SpectralBasis, k: usize, cutoff: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Precondition("Gibbs measure needs k >= 1".into()));
        }
        let modes = flow::truncation_size(cutoff);
        if modes > basis.mode_count() {
            return Err(Error::FieldExceedsBasis {
                bound: cutoff,
                required: modes,
                available: basis.mode_count(),
            });
        }
        Ok(Self {
            nl: Nonlinearity::new(basis, k, modes)?,
            k,
        })
    }

    pub fn potential(&mut self, field: &SpectralField) -> f64 {
        self.nl.potential(&field.coeffs) / (2 * self.k + 2) as f64
    }
}

/// One exact draw from `exp(-beta V) dmu_N` by rejection: attempt `a` uses
/// the draw seeded by `derive_seed(seed, a)` and accepts when a uniform from
/// that seed's stream 0 falls below `exp(-beta V)`.
pub fn sample_gibbs(basis: &SpectralBasis, config: &GibbsConfig, seed: u64) -> Result<GibbsSample> {
    let mut eval = PotentialEvaluator::new(basis, config.k, config.cutoff)?;
    sample_with(&mut eval, &basis.lambdas(), config, seed)
}

fn sample_with(
    eval: &mut PotentialEvaluator<'_>,
    lambdas: &[f64],
    config: &GibbsConfig,
    seed: u64,
) -> Result<GibbsSample> {
    for a in 0..config.max_attempts {
        let s = derive_seed(seed, a as u64);
        let draw = gff_from_lambdas(lambdas, config.cutoff, s);
        let potential = eval.potential(&draw.field);
        let weight = (-config.potential_scale * potential).exp();
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        rng.set_stream(0);
        let u: f64 = rng.random();
        if u < weight {
            return Ok(GibbsSample {
                seed: s,
                field: draw.field,
                potential,
                accepted: true,
                attempts: a + 1,
            });
        }
    }
    Err(Error::AcceptanceFailure {
        attempts: config.max_attempts,
    })
}

/// `n` independent Gibbs samples; sample `i` uses `derive_seed(seed, i)`.
pub fn sample_gibbs_ensemble(
    basis: &SpectralBasis,
    config: &GibbsConfig,
    n: usize,
    seed: u64,
) -> Result<Vec<GibbsSample>> {
    let lambdas = basis.lambdas();
    PotentialEvaluator::new(basis, config.k, config.cutoff)?;
    (0..n)
        .into_par_iter()
        .map_init(
            || PotentialEvaluator::new(basis, config.k, config.cutoff).unwrap(),
            |eval, i| sample_with(eval, &lambdas, config, derive_seed(seed, i as u64)),
        )
        .collect()
}

/// Self-normalised importance-sampling estimate of `E_rho[f]` from `n`
/// Gaussian draws, with the paired plain estimate of `E_mu[f]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEstimate {
    pub gibbs_mean: f64,
    pub gaussian_mean: f64,
    /// Delta-method standard error of `gibbs_mean - gaussian_mean`.
    pub diff_stderr: f64,
    /// Plain Monte Carlo estimate of `E_mu[exp(-beta V)]` and its standard error.
    pub mean_weight: f64,
    pub weight_stderr: f64,
    pub effective_samples: f64,
}

pub fn importance_estimate(
    basis: &SpectralBasis,
    config: &GibbsConfig,
    observable: &Observable,
    n: usize,
    seed: u64,
) -> Result<ImportanceEstimate> {
    if n < 2 {
        return Err(Error::Underpowered { samples: n, required: 2 });
    }
    let lambdas = basis.lambdas();
    PotentialEvaluator::new(basis, config.k, config.cutoff)?;
    let pairs: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map_init(
            || PotentialEvaluator::new(basis, config.k, config.cutoff).unwrap(),
            |eval, i| {
                let draw = gff_from_lambdas(&lambdas, config.cutoff, derive_seed(seed, i as u64));
                let v = eval.potential(&draw.field);
                let f = observable.eval_physical(&draw.field, || v);
                ((-config.potential_scale * v).exp(), f)
            },
        )
        .collect();
    let nf = n as f64;
    let sw: f64 = pairs.iter().map(|p| p.0).sum();
    let sw2: f64 = pairs.iter().map(|p| p.0 * p.0).sum();
    let gibbs_mean = pairs.iter().map(|p| p.0 * p.1).sum::<f64>() / sw;
    let gaussian_mean = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let wbar = sw / nf;
    // influence function of gibbs_mean - gaussian_mean
    let infl: Vec<f64> = pairs
        .iter()
        .map(|&(w, f)| w * (f - gibbs_mean) / wbar - (f - gaussian_mean))
        .collect();
    let var = infl.iter().map(|x| x * x).sum::<f64>() / (nf - 1.0);
    let wvar = pairs.iter().map(|p| (p.0 - wbar).powi(2)).sum::<f64>() / (nf - 1.0);
    Ok(ImportanceEstimate {
        gibbs_mean,
        gaussian_mean,
        diff_stderr: (var / nf).sqrt(),
        mean_weight: wbar,
        weight_stderr: (wvar / nf).sqrt(),
        effective_samples: sw * sw / sw2,
    })
}

/// Scalar functions of a field used by the invariance test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Observable {
    Mass,
    Potential,
    /// `|u_n|^2`.
    ModeSq(usize),
    /// `Re u_n`.
    ModeRe(usize),
    /// `Im u_n`.
    ModeIm(usize),
}

impl Observable {
    /// Value on the physical-picture field; `potential` is called only when needed.
    pub fn eval_physical(&self, field: &SpectralField, potential: impl FnOnce() -> f64) -> f64 {
        match *self {
            Self::Mass => flow::mass(field),
            Self::Potential => potential(),
            Self::ModeSq(n) => field.coeff(n).norm_sqr(),
            Self::ModeRe(n) => field.coeff(n).re,
            Self::ModeIm(n) => field.coeff(n).im,
        }
    }

    fn mode(&self) -> Option<usize> {
        match *self {
            Self::ModeSq(n) | Self::ModeRe(n) | Self::ModeIm(n) => Some(n),
            _ => None,
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Mass => write!(f, "mass"),
            Self::Potential => write!(f, "potential"),
            Self::ModeSq(n) => write!(f, "abs2:{n}"),
            Self::ModeRe(n) => write!(f, "re:{n}"),
            Self::ModeIm(n) => write!(f, "im:{n}"),
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    /// `mass`, `potential`, `abs2:N`, `re:N`, `im:N`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "mass" => return Ok(Self::Mass),
            "potential" => return Ok(Self::Potential),
            _ => {}
        }
        let bad = || Error::UnknownObservable(s.to_string());
        let (kind, n) = s.split_once(':').ok_or_else(bad)?;
        let n: usize = n.parse().map_err(|_| bad())?;
        if n == 0 {
            return Err(bad());
        }
        match kind {
            "abs2" => Ok(Self::ModeSq(n)),
            "re" => Ok(Self::ModeRe(n)),
            "im" => Ok(Self::ModeIm(n)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Observable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Observable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Observables of the invariance acceptance run.
pub fn default_observables() -> Vec<Observable> {
    vec![
        Observable::Mass,
        Observable::ModeSq(1),
        Observable::ModeSq(2),
        Observable::ModeSq(3),
        Observable::ModeRe(1),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableScore {
    pub observable: Observable,
    pub mean0: f64,
    #[serde(rename = "meanT")]
    pub mean_t: f64,
    pub stderr: f64,
    pub z: f64,
    /// Diagnostic: mean of the per-sample differences over its standard
    /// error. Unlike `z` it accounts for the correlation between a sample
    /// and its own evolution.
    pub paired_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub k: usize,
    pub cutoff: f64,
    pub t: f64,
    pub samples: usize,
    pub seed: u64,
    pub potential_scale: f64,
    pub dt: f64,
    pub mean_attempts: f64,
    pub scores: Vec<ObservableScore>,
}

impl InvarianceReport {
    pub fn max_abs_z(&self) -> f64 {
        self.scores.iter().map(|s| s.z.abs()).fold(0.0, f64::max)
    }
}

/// `(mean_0 - mean_t) / sqrt(var_0 / n + var_t / n)` for each observable
/// over `n` Gibbs samples evolved to time `t`. Squared moduli are read from
/// the interaction-picture state, which the linear flow leaves untouched.
pub fn invariance_test(
    basis: &SpectralBasis,
    config: &GibbsConfig,
    flow_config: &FlowConfig,
    t: f64,
    n_samples: usize,
    observables: &[Observable],
    seed: u64,
) -> Result<InvarianceReport> {
    if n_samples < MIN_INVARIANCE_SAMPLES {
        return Err(Error::Underpowered {
            samples: n_samples,
            required: MIN_INVARIANCE_SAMPLES,
        });
    }
    let modes = flow::truncation_size(config.cutoff);
    for o in observables {
        if let Some(n) = o.mode() {
            if n > modes {
                return Err(Error::ModeOutOfRange { index: n, mode_count: modes });
            }
        }
    }
    let flow_config = FlowConfig {
        k: config.k,
        cutoff: config.cutoff,
        picture: Picture::Interaction,
        samples: 1,
        ..flow_config.clone()
    };
    let samples = sample_gibbs_ensemble(basis, config, n_samples, seed)?;
    let lambdas = basis.lambdas();
    let values: Vec<(Vec<f64>, Vec<f64>)> = samples
        .par_iter()
        .map_init(
            || PotentialEvaluator::new(basis, config.k, config.cutoff).unwrap(),
            |eval, s| -> Result<(Vec<f64>, Vec<f64>)> {
                let tr = flow::evolve(basis, &s.field, t, &flow_config)?;
                let v = tr.last();
                let u = v.propagate(&lambdas, t);
                let at = |o: &Observable, inter: &SpectralField, phys: &SpectralField, eval: &mut PotentialEvaluator<'_>| match o {
                    Observable::Mass | Observable::ModeSq(_) => o.eval_physical(inter, || 0.0),
                    _ => o.eval_physical(phys, || eval.potential(phys)),
                };
                let before = observables.iter().map(|o| at(o, &s.field, &s.field, eval)).collect();
                let after = observables.iter().map(|o| at(o, v, &u, eval)).collect();
                Ok((before, after))
            },
        )
        .collect::<Result<_>>()?;
    let nf = n_samples as f64;
    let scores = observables
        .iter()
        .enumerate()
        .map(|(j, o)| {
            let (m0, v0) = mean_var(values.iter().map(|v| v.0[j]), nf);
            let (mt, vt) = mean_var(values.iter().map(|v| v.1[j]), nf);
            let stderr = (v0 / nf + vt / nf).sqrt();
            let diff = m0 - mt;
            let z = if diff == 0.0 { 0.0 } else { diff / stderr };
            let (md, vd) = mean_var(values.iter().map(|v| v.0[j] - v.1[j]), nf);
            let paired_z = if md == 0.0 { 0.0 } else { md / (vd / nf).sqrt() };
            ObservableScore {
                observable: o.clone(),
                mean0: m0,
                mean_t: mt,
                stderr,
                z,
                paired_z,
            }
        })
        .collect();
    Ok(InvarianceReport {
        k: config.k,
        cutoff: config.cutoff,
        t,
        samples: n_samples,
        seed,
        potential_scale: config.potential_scale,
        dt: flow_config.dt,
        mean_attempts: samples.iter().map(|s| s.attempts as f64).sum::<f64>() / nf,
        scores,
    })
}

/// Mean and unbiased variance, summed in iteration order.
fn mean_var(xs: impl Iterator<Item = f64> + Clone, n: f64) -> (f64, f64) {
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Ensemble means of `||P_{<=N} u_0||_{H^s}` over Gaussian free field draws,
/// one row per cutoff, one column per `s`. Draws are shared across cutoffs.
pub fn gff_sobolev_means(lambdas: &[f64], cutoffs: &[f64], s_values: &[f64], samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let top = cutoffs.iter().copied().fold(0.0, f64::max);
    let per_sample: Vec<Vec<Vec<f64>>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let draw = gff_from_lambdas(lambdas, top, derive_seed(seed, i as u64));
            cutoffs
                .iter()
                .map(|&c| {
                    let m = lambdas.partition_point(|&l| l <= c);
                    let f = draw.field.truncated(m, c);
                    s_values.iter().map(|&s| f.hs_norm(lambdas, s)).collect()
                })
                .collect()
        })
        .collect();
    cutoffs
        .iter()
        .enumerate()
        .map(|(ci, _)| {
            (0..s_values.len())
                .map(|si| per_sample.iter().map(|p| p[ci][si]).sum::<f64>() / samples as f64)
                .collect()
        })
        .collect()
}
