//! Random resonant operator: the diagonal unitary phases `H_n = e^{i Theta_n}`
//! with `Theta_n(t) = -(k+1) int_0^t <e_n^2, |u_L|^{2k}>`, the rotated block
//! `psi_{N,L}`, its dyadic increments `zeta^{N,L}`, and the decomposition
//! `y_N = v_N - v_{N/2} = psi_{N,L_N} + z_N`.
//!
//! All fields here are interaction-picture coefficients over `E_N`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::SpectralBasis;
use crate::correlation::CorrelationTensor;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::flow::{self, FlowConfig, Picture, Trajectory};
use crate::gibbs::gff_from_lambdas;

/// Default `kappa` in `L_N = max{L dyadic : L < N^{1 - kappa}}`.
pub const DEFAULT_KAPPA: f64 = 0.1;

/// Smallest ensemble accepted by the law-invariance report.
pub const MIN_LAW_ENSEMBLE: usize = 500;

pub fn is_dyadic(x: f64) -> bool {
    x >= 1.0 && x.log2().fract() == 0.0
}

/// Largest dyadic `L >= 2` with `L < N^{1 - kappa}`, if any.
pub fn resonant_level(n_cutoff: f64, kappa: f64) -> Option<f64> {
    let top = n_cutoff.powf(1.0 - kappa);
    let mut l = 2.0;
    if l >= top {
        return None;
    }
    while 2.0 * l < top {
        l *= 2.0;
    }
    Some(l)
}

/// Mode indices of the dyadic block `E_N \ E_{N/2}`.
pub fn block_modes(n_cutoff: f64) -> std::ops::RangeInclusive<usize> {
    flow::truncation_size(n_cutoff / 2.0) + 1..=flow::truncation_size(n_cutoff)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RROPhases {
    pub cutoff: f64,
    pub level: f64,
    pub k: usize,
    /// Block mode indices, ascending.
    pub modes: Vec<usize>,
    pub times: Vec<f64>,
    /// `theta[i][j] = Theta_{modes[i]}(times[j])`.
    pub theta: Vec<Vec<f64>>,
}

impl RROPhases {
    /// `H_n(t_j)` for block position `i`; unit modulus by construction.
    pub fn h(&self, i: usize, j: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.theta[i][j])
    }

    /// Largest `||H_n(t)| - 1|` over all stored phases.
    pub fn unitarity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.theta.iter().enumerate() {
            for j in 0..row.len() {
                worst = worst.max((self.h(i, j).norm() - 1.0).abs());
            }
        }
        worst
    }
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Ok(0.0);
    }
    let h = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    let tol = 1e-9 * h.abs().max(1e-300);
    for (j, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - h).abs() > tol || (times[0] + j as f64 * h - w[0]).abs() > 1e-9 * (1.0 + w[0].abs()) {
            return Err(Error::NonUniformGrid);
        }
    }
    Ok(h)
}

/// Running integral `F_j = int_{t_0}^{t_j} f` on a uniform grid: composite
/// Simpson for even `j`, Simpson plus the 3/8 rule on the last three
/// intervals for odd `j >= 3`, and the three-point formula for `j = 1`.
pub fn cumulative_simpson(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * h * (f[0] + f[1]);
        return out;
    }
    for j in (2..n).step_by(2) {
        out[j] = out[j - 2] + h / 3.0 * (f[j - 2] + 4.0 * f[j - 1] + f[j]);
    }
    out[1] = h / 12.0 * (5.0 * f[0] + 8.0 * f[1] - f[2]);
    for j in (3..n).step_by(2) {
        out[j] = out[j - 3] + 3.0 * h / 8.0 * (f[j - 3] + 3.0 * f[j - 2] + 3.0 * f[j - 1] + f[j]);
    }
    out
}

/// `<e_n^2, |u|^{2k}>` for each `n` in `modes`, `u` given by physical
/// coefficients over the first `coeffs.len()` modes.
pub fn resonant_weights(basis: &SpectralBasis, coeffs: &[Complex64], k: usize, modes: &[usize]) -> Vec<f64> {
    let mut grid = vec![Complex64::new(0.0, 0.0); basis.node_count()];
    basis.synthesize_into(coeffs, &mut grid);
    let density: Vec<f64> = grid
        .iter()
        .zip(&basis.quad.weights)
        .map(|(u, w)| w * u.norm_sqr().powi(k as i32))
        .collect();
    modes
        .iter()
        .map(|&n| {
            basis
                .row(n)
                .iter()
                .zip(&density)
                .map(|(e, d)| e * e * d)
                .sum()
        })
        .collect()
}

/// `Theta_n(t_j)` for every block mode of `N` from a physical-picture
/// trajectory of `u_L` on a uniform time grid.
pub fn rro_phase(basis: &SpectralBasis, traj: &Trajectory, cutoff: f64, level: f64, k: usize) -> Result<RROPhases> {
    if traj.picture != Picture::Physical {
        return Err(Error::WrongPicture {
            found: "interaction",
            expected: "physical",
        });
    }
    basis.require_product_order(2 * k + 2)?;
    let modes: Vec<usize> = block_modes(cutoff).collect();
    if let Some(&top) = modes.last() {
        basis.check_index(top)?;
    }
    let h = uniform_step(&traj.times)?;
    let samples: Vec<Vec<f64>> = traj
        .states
        .iter()
        .map(|s| resonant_weights(basis, &s.coeffs, k, &modes))
        .collect();
    let scale = -((k + 1) as f64);
    let theta = (0..modes.len())
        .map(|i| {
            let f: Vec<f64> = samples.iter().map(|row| row[i]).collect();
            cumulative_simpson(&f, h).into_iter().map(|x| scale * x).collect()
        })
        .collect();
    Ok(RROPhases {
        cutoff,
        level,
        k,
        modes,
        times: traj.times.clone(),
        theta,
    })
}

/// `Gamma_n(t) = -(k+1) i sum c(n, n, n_2, ..., n_{2k+1}) prod_{j>=2}
/// e^{i t iota_j lambda_j^2} (v_L)_{n_j}^{iota_j}` from interaction-picture
/// coefficients `v_l` over `E_L`, by explicit summation over the tensor.
pub fn gamma_spectral(tensor: &CorrelationTensor<'_>, lambdas: &[f64], v_l: &[Complex64], n: usize, t: f64) -> Result<Complex64> {
    let k = tensor.degree();
    let width = 2 * k;
    let m = v_l.len();
    if m == 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    // u_j^{iota_j} with the phase restored
    let factor = |j: usize, idx: usize| {
        let lam2 = lambdas[idx - 1] * lambdas[idx - 1];
        let u = v_l[idx - 1] * Complex64::from_polar(1.0, -t * lam2);
        if j % 2 == 1 {
            u
        } else {
            u.conj()
        }
    };
    let mut tuple = vec![1usize; width];
    let mut acc = Complex64::new(0.0, 0.0);
    let mut idx = vec![n; width + 2];
    loop {
        idx[2..].copy_from_slice(&tuple);
        let c = tensor.get(&idx)?;
        let mut prod = Complex64::new(c, 0.0);
        for (p, &nj) in tuple.iter().enumerate() {
            prod *= factor(p + 2, nj);
        }
        acc += prod;
        let mut pos = width;
        loop {
            if pos == 0 {
                return Ok(acc * Complex64::new(0.0, -((k + 1) as f64)));
            }
            pos -= 1;
            if tuple[pos] < m {
                tuple[pos] += 1;
                break;
            }
            tuple[pos] = 1;
        }
    }
}

/// Interaction-picture `psi_{N,L}` at every stored time: block coefficient
/// `n` of `u0` rotated by `e^{i Theta_n}`.
pub fn psi_path(phases: &RROPhases, u0: &SpectralField) -> Vec<SpectralField> {
    let modes = flow::truncation_size(phases.cutoff);
    (0..phases.times.len())
        .map(|j| {
            let mut coeffs = vec![Complex64::new(0.0, 0.0); modes];
            for (i, &n) in phases.modes.iter().enumerate() {
                coeffs[n - 1] = u0.coeff(n) * phases.h(i, j);
            }
            SpectralField::new(coeffs, phases.cutoff)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzConfig {
    pub k: usize,
    pub kappa: f64,
    pub t_final: f64,
    /// Integrator settings; `k`, `cutoff`, picture and sampling are set per level.
    pub flow: FlowConfig,
}

impl AnsatzConfig {
    pub fn new(k: usize, t_final: f64, cutoff: f64) -> Self {
        Self {
            k,
            kappa: DEFAULT_KAPPA,
            t_final,
            flow: FlowConfig::new(k, cutoff),
        }
    }

    /// Output intervals: one per time step, rounded up to an even count.
    fn sample_count(&self) -> usize {
        let s = (self.t_final.abs() / self.flow.dt).ceil().max(2.0) as usize;
        s + s % 2
    }

    fn level_flow(&self, cutoff: f64, picture: Picture) -> FlowConfig {
        FlowConfig {
            k: self.k,
            cutoff,
            picture,
            samples: self.sample_count(),
            ..self.flow.clone()
        }
    }
}

/// Evolve `P_{<=level} u0` on the common sample grid.
fn evolve_level(basis: &SpectralBasis, u0: &SpectralField, level: f64, cfg: &AnsatzConfig, picture: Picture) -> Result<Trajectory> {
    let m = flow::truncation_size(level);
    let data = u0.truncated(m, level);
    flow::evolve(basis, &data, cfg.t_final, &cfg.level_flow(level, picture))
}

/// Phases of `psi_{N,L}` from the evolution of `P_{<=L} u0`.
pub fn phases_for_level(basis: &SpectralBasis, u0: &SpectralField, cutoff: f64, level: f64, cfg: &AnsatzConfig) -> Result<RROPhases> {
    let traj = evolve_level(basis, u0, level, cfg, Picture::Physical)?;
    rro_phase(basis, &traj, cutoff, level, cfg.k)
}

/// `y_N = v_N - v_{N/2}` on the common sample grid (`y_2 = 0`).
pub fn dyadic_increment(basis: &SpectralBasis, u0: &SpectralField, cutoff: f64, cfg: &AnsatzConfig) -> Result<(Vec<f64>, Vec<SpectralField>)> {
    let hi = evolve_level(basis, u0, cutoff, cfg, Picture::Interaction)?;
    let lo = evolve_level(basis, u0, cutoff / 2.0, cfg, Picture::Interaction)?;
    let modes = flow::truncation_size(cutoff);
    let y = hi
        .states
        .iter()
        .zip(&lo.states)
        .map(|(a, b)| a.sub(b).padded(modes, cutoff))
        .collect();
    Ok((hi.times, y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzDecomposition {
    pub cutoff: f64,
    pub level: f64,
    pub k: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    pub phases: RROPhases,
    pub y: Vec<SpectralField>,
    pub psi: Vec<SpectralField>,
    pub z: Vec<SpectralField>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub time: f64,
    pub y_l2: f64,
    pub psi_l2: f64,
    pub z_l2: f64,
    pub y_h_half: f64,
    pub psi_h_half: f64,
    pub z_h_half: f64,
}

impl AnsatzDecomposition {
    pub fn norm_rows(&self, lambdas: &[f64]) -> Vec<NormRow> {
        (0..self.times.len())
            .map(|j| NormRow {
                time: self.times[j],
                y_l2: self.y[j].l2_norm(),
                psi_l2: self.psi[j].l2_norm(),
                z_l2: self.z[j].l2_norm(),
                y_h_half: self.y[j].hs_norm(lambdas, 0.5),
                psi_h_half: self.psi[j].hs_norm(lambdas, 0.5),
                z_h_half: self.z[j].hs_norm(lambdas, 0.5),
            })
            .collect()
    }

    /// Largest `|y - psi - z|` over stored times.
    pub fn identity_defect(&self) -> f64 {
        self.y
            .iter()
            .zip(&self.psi)
            .zip(&self.z)
            .map(|((y, p), z)| y.sub(p).sub(z).l2_norm())
            .fold(0.0, f64::max)
    }
}

/// Decomposition `y_N = psi_{N,L_N} + z_N` for Gaussian free field data of
/// the given seed (the same draw at every truncation level).
pub fn decompose(basis: &SpectralBasis, seed: u64, cutoff: f64, cfg: &AnsatzConfig) -> Result<AnsatzDecomposition> {
    if !is_dyadic(cutoff) {
        return Err(Error::NotDyadic(cutoff));
    }
    let level = resonant_level(cutoff, cfg.kappa).ok_or_else(|| {
        Error::Precondition(format!(
            "N = {cutoff} too small: no dyadic L >= 2 below N^(1 - kappa) with kappa = {}",
            cfg.kappa
        ))
    })?;
    let u0 = gff_from_lambdas(&basis.lambdas(), cutoff, seed).field;
    if u0.len() > basis.mode_count() {
        return Err(Error::FieldExceedsBasis {
            bound: cutoff,
            required: u0.len(),
            available: basis.mode_count(),
        });
    }
    decompose_field(basis, &u0, seed, cutoff, level, cfg)
}

/// Decomposition for explicit data `u0` supported in `E_N`.
pub fn decompose_field(basis: &SpectralBasis, u0: &SpectralField, seed: u64, cutoff: f64, level: f64, cfg: &AnsatzConfig) -> Result<AnsatzDecomposition> {
    let phases = phases_for_level(basis, u0, cutoff, level, cfg)?;
    let (times, y) = dyadic_increment(basis, u0, cutoff, cfg)?;
    let psi = psi_path(&phases, u0);
    let z = y.iter().zip(&psi).map(|(y, p)| y.sub(p)).collect();
    Ok(AnsatzDecomposition {
        cutoff,
        level,
        k: cfg.k,
        seed,
        times,
        phases,
        y,
        psi,
        z,
    })
}

/// `zeta^{N,L}(t) = psi_{N,L}(t) - psi_{N,L/2}(t)` for data `u0`.
pub fn zeta_block(basis: &SpectralBasis, u0: &SpectralField, cutoff: f64, level: f64, cfg: &AnsatzConfig) -> Result<Vec<SpectralField>> {
    if !is_dyadic(level) || level < 2.0 {
        return Err(Error::NotDyadic(level));
    }
    if let Some(top) = resonant_level(cutoff, cfg.kappa) {
        if level > top {
            return Err(Error::Precondition(format!("L = {level} exceeds L_N = {top}")));
        }
    }
    let hi = psi_path(&phases_for_level(basis, u0, cutoff, level, cfg)?, u0);
    let lo = psi_path(&phases_for_level(basis, u0, cutoff, level / 2.0, cfg)?, u0);
    Ok(hi.iter().zip(&lo).map(|(a, b)| a.sub(b)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeLaw {
    pub n: usize,
    pub expected: f64,
    pub second_moment: f64,
    pub stderr: f64,
    /// `E (Re psi_n)^2` against `expected / 2`.
    pub re_second_moment: f64,
    pub re_stderr: f64,
    pub corr_theta_re_g: f64,
    pub corr_theta_im_g: f64,
    /// `1 / sqrt(ensemble)`, the null standard error of a correlation.
    pub corr_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawInvarianceReport {
    pub cutoff: f64,
    pub time: f64,
    pub ensemble: usize,
    pub modes: Vec<ModeLaw>,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// Per-mode second moments of `<psi_{N,L}(t_j), e_n>` and correlations of
/// `Theta_n(t_j)` with the Gaussian `g_n = pi lambda_n psi_n(0)`.
pub fn law_invariance_report(lambdas: &[f64], decomps: &[AnsatzDecomposition], time_index: usize) -> Result<LawInvarianceReport> {
    if decomps.len() < MIN_LAW_ENSEMBLE {
        return Err(Error::Underpowered {
            samples: decomps.len(),
            required: MIN_LAW_ENSEMBLE,
        });
    }
    let first = &decomps[0];
    let modes = first
        .phases
        .modes
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let lam = lambdas[n - 1];
            let sq: Vec<f64> = decomps.iter().map(|d| d.psi[time_index].coeff(n).norm_sqr()).collect();
            let re: Vec<f64> = decomps.iter().map(|d| d.psi[time_index].coeff(n).re.powi(2)).collect();
            let theta: Vec<f64> = decomps.iter().map(|d| d.phases.theta[i][time_index]).collect();
            let g: Vec<Complex64> = decomps.iter().map(|d| d.psi[0].coeff(n) * (std::f64::consts::PI * lam)).collect();
            let g_re: Vec<f64> = g.iter().map(|g| g.re).collect();
            let g_im: Vec<f64> = g.iter().map(|g| g.im).collect();
            let (m, se) = mean_se(&sq);
            let (mr, ser) = mean_se(&re);
            ModeLaw {
                n,
                expected: 1.0 / (std::f64::consts::PI * lam).powi(2),
                second_moment: m,
                stderr: se,
                re_second_moment: mr,
                re_stderr: ser,
                corr_theta_re_g: correlation(&theta, &g_re),
                corr_theta_im_g: correlation(&theta, &g_im),
                corr_stderr: 1.0 / (decomps.len() as f64).sqrt(),
            }
        })
        .collect();
    Ok(LawInvarianceReport {
        cutoff: first.cutoff,
        time: first.times[time_index],
        ensemble: decomps.len(),
        modes,
    })
}

/// Decompositions for seeds `seeds`, in seed order.
pub fn decompose_ensemble(basis: &SpectralBasis, seeds: &[u64], cutoff: f64, cfg: &AnsatzConfig) -> Result<Vec<AnsatzDecomposition>> {
    seeds.par_iter().map(|&s| decompose(basis, s, cutoff, cfg)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub cutoff: f64,
    pub level: f64,
    pub mean_y_l2: f64,
    pub mean_z_l2: f64,
    pub mean_psi_l2: f64,
    pub stderr_y_l2: f64,
    pub stderr_z_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzScaling {
    pub k: usize,
    pub kappa: f64,
    pub t_final: f64,
    pub seeds: usize,
    pub rows: Vec<ScalingRow>,
    pub slope_y: f64,
    pub slope_z: f64,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Ensemble statistics at the final time for decompositions sharing one cutoff.
pub fn scaling_row(ds: &[AnsatzDecomposition]) -> ScalingRow {
    let y: Vec<f64> = ds.iter().map(|d| d.y.last().unwrap().l2_norm()).collect();
    let z: Vec<f64> = ds.iter().map(|d| d.z.last().unwrap().l2_norm()).collect();
    let p: Vec<f64> = ds.iter().map(|d| d.psi.last().unwrap().l2_norm()).collect();
    let (my, sy) = mean_se(&y);
    let (mz, sz) = mean_se(&z);
    ScalingRow {
        cutoff: ds[0].cutoff,
        level: ds[0].level,
        mean_y_l2: my,
        mean_z_l2: mz,
        mean_psi_l2: mean_se(&p).0,
        stderr_y_l2: sy,
        stderr_z_l2: sz,
    }
}

impl AnsatzScaling {
    pub fn from_rows(cfg: &AnsatzConfig, seeds: usize, rows: Vec<ScalingRow>) -> Self {
        let xs: Vec<f64> = rows.iter().map(|r| r.cutoff).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.mean_y_l2).collect();
        let zs: Vec<f64> = rows.iter().map(|r| r.mean_z_l2).collect();
        Self {
            k: cfg.k,
            kappa: cfg.kappa,
            t_final: cfg.t_final,
            seeds,
            slope_y: loglog_slope(&xs, &ys),
            slope_z: loglog_slope(&xs, &zs),
            rows,
        }
    }
}

/// Ensemble means of `||y_N(T)||` and `||z_N(T)||` across cutoffs with the
/// fitted log-log slopes.
pub fn ansatz_scaling(basis: &SpectralBasis, cutoffs: &[f64], seeds: &[u64], cfg: &AnsatzConfig) -> Result<AnsatzScaling> {
    if seeds.len() < 2 {
        return Err(Error::Underpowered {
            samples: seeds.len(),
            required: 2,
        });
    }
    let rows = cutoffs
        .iter()
        .map(|&n| decompose_ensemble(basis, seeds, n, cfg).map(|ds| scaling_row(&ds)))
        .collect::<Result<Vec<_>>>()?;
    Ok(AnsatzScaling::from_rows(cfg, seeds.len(), rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resonant_levels() {
        assert_eq!(resonant_level(2.0, 0.1), None);
        assert_eq!(resonant_level(4.0, 0.1), Some(2.0));
        for n in [8.0, 16.0, 32.0, 64.0] {
            assert_eq!(resonant_level(n, 0.1), Some(n / 2.0));
        }
        assert_eq!(resonant_level(64.0, 0.5), Some(4.0));
        assert_eq!(block_modes(16.0), 3..=5);
        assert!(block_modes(2.0).is_empty());
    }

    #[test]
    fn cumulative_simpson_is_exact_for_cubics() {
        let h = 0.1;
        let f: Vec<f64> = (0..12).map(|j| {
            let t = j as f64 * h;
            1.0 - 2.0 * t + 3.0 * t * t * t
        }).collect();
        let got = cumulative_simpson(&f, h);
        for (j, g) in got.iter().enumerate() {
            let t = j as f64 * h;
            let want = t - t * t + 0.75 * t.powi(4);
            // j = 1 uses a quadratic rule
            let tol = if j == 1 { 1e-4 } else { 1e-14 };
            assert!((g - want).abs() < tol, "j = {j}: {g} vs {want}");
        }
    }

    #[test]
    fn zero_field_has_trivial_phases() {
        let b = SpectralBasis::build(5, 4).unwrap();
        let cfg = AnsatzConfig::new(1, 0.2, 16.0);
        let u0 = SpectralField::zeros(5, 16.0);
        let ph = phases_for_level(&b, &u0, 16.0, 8.0, &cfg).unwrap();
        assert!(ph.theta.iter().flatten().all(|&t| t == 0.0));
        assert_eq!(ph.unitarity_defect(), 0.0);
    }

    #[test]
    fn phases_start_at_zero_and_decrease() {
        let b = SpectralBasis::build(5, 4).unwrap();
        let cfg = AnsatzConfig::new(1, 0.3, 16.0);
        let d = decompose(&b, 5, 16.0, &cfg).unwrap();
        for row in &d.phases.theta {
            assert_eq!(row[0], 0.0);
            assert!(row.windows(2).all(|w| w[1] <= w[0]));
            assert!(*row.last().unwrap() < 0.0);
        }
        assert!(d.phases.unitarity_defect() <= 1e-15);
        assert_eq!(d.z[0].l2_norm(), 0.0);
        assert!(d.identity_defect() <= 1e-12);
    }

    #[test]
    fn interaction_picture_is_rejected() {
        let b = SpectralBasis::build(5, 4).unwrap();
        let u0 = SpectralField::zeros(2, 8.0);
        let tr = flow::evolve(&b, &u0, 0.1, &FlowConfig::new(1, 8.0).with_picture(Picture::Interaction)).unwrap();
        assert!(matches!(rro_phase(&b, &tr, 16.0, 8.0, 1), Err(Error::WrongPicture { .. })));
        let mut bad = flow::evolve(&b, &u0, 0.1, &FlowConfig::new(1, 8.0).with_samples(4)).unwrap();
        bad.times[2] += 1e-3;
        assert!(matches!(rro_phase(&b, &bad, 16.0, 8.0, 1), Err(Error::NonUniformGrid)));
    }

    #[test]
    fn gamma_spectral_matches_physical_weight() {
        let b = SpectralBasis::build(5, 4).unwrap();
        let tensor = CorrelationTensor::new(&b, 1).unwrap();
        let lambdas = b.lambdas();
        let cfg = FlowConfig::new(1, 8.0).with_picture(Picture::Interaction).with_samples(5);
        let u0 = gff_from_lambdas(&lambdas, 8.0, 17).field.scale(Complex64::new(20.0, 0.0));
        let tr = flow::evolve(&b, &u0, 0.5, &cfg).unwrap();
        for j in 1..tr.times.len() {
            let t = tr.times[j];
            let v = &tr.states[j];
            let u = v.propagate(&lambdas, t);
            let weights = resonant_weights(&b, &u.coeffs, 1, &[3, 4, 5]);
            for (i, n) in [3, 4, 5].into_iter().enumerate() {
                let g = gamma_spectral(&tensor, &lambdas, &v.coeffs, n, t).unwrap();
                let want = Complex64::new(0.0, -2.0 * weights[i]);
                assert!((g - want).norm() <= 1e-8 * want.norm().max(1.0), "t = {t}, n = {n}: {g} vs {want}");
            }
        }
    }

    #[test]
    fn simpson_phases_converge() {
        let b = SpectralBasis::build(5, 4).unwrap();
        let u0 = gff_from_lambdas(&b.lambdas(), 16.0, 2).field;
        let coarse = AnsatzConfig::new(1, 0.4, 16.0);
        let mut fine = coarse.clone();
        fine.flow.dt /= 2.0;
        let a = phases_for_level(&b, &u0, 16.0, 8.0, &coarse).unwrap();
        let c = phases_for_level(&b, &u0, 16.0, 8.0, &fine).unwrap();
        for i in 0..a.modes.len() {
            let d = (a.theta[i].last().unwrap() - c.theta[i].last().unwrap()).abs();
            assert!(d <= 1e-8, "mode {}: {d}", a.modes[i]);
        }
    }

    #[test]
    fn small_cutoffs() {
        let b = SpectralBasis::build(5, 4).unwrap();
        let cfg = AnsatzConfig::new(1, 0.1, 2.0);
        let u0 = SpectralField::zeros(0, 2.0);
        let (_, y) = dyadic_increment(&b, &u0, 2.0, &cfg).unwrap();
        assert!(y.iter().all(|f| f.is_empty() || f.is_zero()));
        assert!(matches!(decompose(&b, 1, 2.0, &cfg), Err(Error::Precondition(_))));
        assert!(matches!(decompose(&b, 1, 12.0, &cfg), Err(Error::NotDyadic(_))));
    }

    #[test]
    fn zeta_telescopes_and_vanishes_for_equal_levels() {
        let b = SpectralBasis::build(20, 4).unwrap();
        let cfg = AnsatzConfig::new(1, 0.1, 64.0);
        let u0 = gff_from_lambdas(&b.lambdas(), 64.0, 4).field;
        // u_2 = u_1 = 0
        let z2 = zeta_block(&b, &u0, 64.0, 2.0, &cfg).unwrap();
        assert!(z2.iter().all(|f| f.is_zero()));
        let lnn = resonant_level(64.0, cfg.kappa).unwrap();
        let top = psi_path(&phases_for_level(&b, &u0, 64.0, lnn, &cfg).unwrap(), &u0);
        let base = psi_path(&phases_for_level(&b, &u0, 64.0, 2.0, &cfg).unwrap(), &u0);
        let mut sum: Vec<SpectralField> = base.clone();
        let mut l = 4.0;
        while l <= lnn {
            let zeta = zeta_block(&b, &u0, 64.0, l, &cfg).unwrap();
            for (s, z) in sum.iter_mut().zip(&zeta) {
                *s = s.add(z);
            }
            l *= 2.0;
        }
        for (s, t) in sum.iter().zip(&top) {
            assert!(s.max_abs_diff(t) <= 1e-12);
        }
        assert!(matches!(zeta_block(&b, &u0, 64.0, 6.0, &cfg), Err(Error::NotDyadic(_))));
        assert!(matches!(zeta_block(&b, &u0, 64.0, 64.0, &cfg), Err(Error::Precondition(_))));
    }

    #[test]
    fn zeta_vanishes_when_block_data_vanish_under_linear_flow() {
        let b = SpectralBasis::build(10, 4).unwrap();
        let mut cfg = AnsatzConfig::new(1, 0.1, 32.0);
        cfg.flow.nonlinear = false;
        let mut u0 = gff_from_lambdas(&b.lambdas(), 32.0, 4).field;
        // zero the block E_8 \ E_4 = {2}
        u0.coeffs[1] = Complex64::new(0.0, 0.0);
        let z = zeta_block(&b, &u0, 32.0, 8.0, &cfg).unwrap();
        assert!(z.iter().all(|f| f.is_zero()));
    }
}
