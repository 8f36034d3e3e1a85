//! Sobolev, Fourier-restriction and Strichartz norms of fields and sampled
//! trajectories.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::basis::{refined_sup, SpectralBasis};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::flow::{Picture, Trajectory};

fn bump(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Smooth cutoff `chi((t - center) / scale)` with `chi = 1` on `[-1, 1]` and
/// support `[-2, 2]`, built from the `e^{-1/x}` smooth step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: f64,
    pub scale: f64,
}

impl Default for Window {
    fn default() -> Self {
        Self {
            center: 0.0,
            scale: 1.0,
        }
    }
}

impl Window {
    pub fn new(center: f64, scale: f64) -> Self {
        Self { center, scale }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let x = ((t - self.center) / self.scale).abs();
        if x <= 1.0 {
            return 1.0;
        }
        if x >= 2.0 {
            return 0.0;
        }
        let a = bump(2.0 - x);
        a / (a + bump(x - 1.0))
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - 2.0 * self.scale, self.center + 2.0 * self.scale)
    }
}

/// `||sum_n lambda_n^s c_n e_n||_{L^p(D)}`, `p` in `[1, inf]`. For `p = 2`
/// this is the coefficient formula; the sup norm is refined between nodes.
pub fn sobolev_norm(basis: &SpectralBasis, field: &SpectralField, s: f64, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Precondition(format!("L^p exponent must be >= 1, got {p}")));
    }
    let lambdas = basis.lambdas();
    let lifted = SpectralField::new(
        field
            .coeffs
            .iter()
            .zip(&lambdas)
            .map(|(c, l)| c * l.powf(s))
            .collect(),
        field.support_bound,
    );
    if field.len() > basis.mode_count() {
        return Err(Error::FieldExceedsBasis {
            bound: field.support_bound,
            required: field.len(),
            available: basis.mode_count(),
        });
    }
    if p == 2.0 {
        return Ok(lifted.l2_norm());
    }
    let grid = basis.synthesize(&lifted)?;
    if p.is_infinite() {
        let abs: Vec<f64> = grid.iter().map(|u| u.norm()).collect();
        return Ok(refined_sup(&basis.quad.nodes, &abs, |r| {
            basis.field_value_at(&lifted, r).norm()
        }));
    }
    let sum: f64 = grid
        .iter()
        .zip(&basis.quad.weights)
        .map(|(u, w)| w * u.norm().powf(p))
        .sum();
    Ok(sum.powf(1.0 / p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub n: usize,
    pub linf: f64,
    pub l4: f64,
    /// `||e_n||_inf / n^{1/2}`
    pub linf_ratio: f64,
    /// `||e_n||_4 / log(1 + n)^{1/4}`
    pub l4_ratio: f64,
}

pub fn eigenfunction_growth(basis: &SpectralBasis, indices: &[usize]) -> Result<Vec<GrowthRow>> {
    indices
        .par_iter()
        .map(|&n| {
            let linf = basis.lp_norm(n, f64::INFINITY)?;
            let l4 = basis.lp_norm(n, 4.0)?;
            Ok(GrowthRow {
                n,
                linf,
                l4,
                linf_ratio: linf / (n as f64).sqrt(),
                l4_ratio: l4 / (1.0 + n as f64).ln().powf(0.25),
            })
        })
        .collect()
}

/// `max / min` of a positive sequence.
pub fn spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XsbValue {
    pub value: f64,
    /// Time step of the sampled trajectory.
    pub dt: f64,
    /// Frequency spacing after zero padding.
    pub dtau: f64,
    /// Largest resolved `|tau|`.
    pub tau_max: f64,
}

fn check_window(traj: &Trajectory, window: &Window) -> Result<f64> {
    let (a, b) = window.support();
    let (start, end) = (traj.times[0], traj.final_time());
    let slack = 1e-9 * (1.0 + a.abs().max(b.abs()));
    if start > a + slack || end < b - slack {
        return Err(Error::WindowNotCovered {
            start,
            end,
            need_start: a,
            need_end: b,
        });
    }
    let n = traj.times.len();
    let h = (end - start) / (n - 1) as f64;
    for w in traj.times.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h {
            return Err(Error::NonUniformGrid);
        }
    }
    Ok(h)
}

/// Windowed discrete Fourier transforms in time, one row per mode, on the
/// grid `tau_j = 2 pi j / (len dt)` in FFT order.
fn windowed_spectra(traj: &Trajectory, window: &Window, pad: usize) -> (Vec<Vec<Complex64>>, f64) {
    let times = &traj.times;
    let len = (times.len() * pad).next_power_of_two();
    let modes = traj.states.iter().map(|s| s.len()).max().unwrap_or(0);
    let h = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    let fft = FftPlanner::new().plan_fft_forward(len);
    let rows = (0..modes)
        .map(|n| {
            let mut buf = vec![Complex64::new(0.0, 0.0); len];
            for (j, (t, s)) in times.iter().zip(&traj.states).enumerate() {
                buf[j] = s.coeff(n + 1) * window.eval(*t);
            }
            fft.process(&mut buf);
            // shift the origin of time from times[0] to 0
            for (j, v) in buf.iter_mut().enumerate() {
                let tau = freq(j, len, h);
                *v *= Complex64::from_polar(h, -tau * times[0]);
            }
            buf
        })
        .collect();
    (rows, 2.0 * PI / (len as f64 * h))
}

fn freq(j: usize, len: usize, h: f64) -> f64 {
    let signed = if j < len / 2 { j as f64 } else { j as f64 - len as f64 };
    2.0 * PI * signed / (len as f64 * h)
}

fn japanese(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// `(sum_n lambda_n^{2s} (2 pi)^{-1} int <tau>^{2b} |F[chi v_n](tau)|^2 dtau)^{1/2}`
/// for an interaction-picture trajectory, with `F f(tau) = int f e^{-i tau t}`.
/// `pad` zero-pads the time series by that factor before transforming.
pub fn xsb_norm(basis: &SpectralBasis, traj: &Trajectory, s: f64, b: f64, window: &Window, pad: usize) -> Result<XsbValue> {
    if traj.picture != Picture::Interaction {
        return Err(Error::WrongPicture {
            found: "physical",
            expected: "interaction",
        });
    }
    xsb_impl(basis, traj, s, b, window, pad, |_, tau| japanese(tau))
}

/// The same norm from a physical-picture trajectory, weighting by
/// `<tau + lambda_n^2>^b`.
pub fn xsb_norm_physical(basis: &SpectralBasis, traj: &Trajectory, s: f64, b: f64, window: &Window, pad: usize) -> Result<XsbValue> {
    if traj.picture != Picture::Physical {
        return Err(Error::WrongPicture {
            found: "interaction",
            expected: "physical",
        });
    }
    xsb_impl(basis, traj, s, b, window, pad, |lam2, tau| japanese(tau + lam2))
}

fn xsb_impl<W: Fn(f64, f64) -> f64>(basis: &SpectralBasis, traj: &Trajectory, s: f64, b: f64, window: &Window, pad: usize, weight: W) -> Result<XsbValue> {
    let h = check_window(traj, window)?;
    let (rows, dtau) = windowed_spectra(traj, window, pad.max(1));
    let lambdas = basis.lambdas();
    if rows.len() > lambdas.len() {
        return Err(Error::FieldExceedsBasis {
            bound: traj.cutoff,
            required: rows.len(),
            available: lambdas.len(),
        });
    }
    let mut total = 0.0;
    for (n, row) in rows.iter().enumerate() {
        let lam = lambdas[n];
        let len = row.len();
        let acc: f64 = row
            .iter()
            .enumerate()
            .map(|(j, v)| weight(lam * lam, freq(j, len, h)).powf(2.0 * b) * v.norm_sqr())
            .sum();
        total += lam.powf(2.0 * s) * acc * dtau / (2.0 * PI);
    }
    Ok(XsbValue {
        value: total.sqrt(),
        dt: h,
        dtau,
        tau_max: PI / h,
    })
}

/// Strichartz window `eta(t) = chi(4 t)`, supported on `[-1/2, 1/2]`.
pub fn strichartz_window() -> Window {
    Window::new(0.0, 0.25)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrichartzValue {
    pub l4: f64,
    pub h_eps: f64,
    pub ratio: f64,
    pub time_nodes: usize,
}

/// `||eta(t) S(t) f||_{L^4_{t,x}} / ||f||_{H^eps}`. The linear flow is exact
/// in coefficients; the time integral is the trapezoid rule with a step
/// beyond the Nyquist rate of `|S(t) f|^4`, which is spectrally accurate for
/// the smooth compactly supported window.
pub fn strichartz_ratio(basis: &SpectralBasis, f: &SpectralField, eps: f64) -> Result<StrichartzValue> {
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!("eps must be positive, got {eps}")));
    }
    basis.require_product_order(4)?;
    if f.len() > basis.mode_count() {
        return Err(Error::FieldExceedsBasis {
            bound: f.support_bound,
            required: f.len(),
            available: basis.mode_count(),
        });
    }
    if f.is_zero() {
        return Err(Error::ZeroField);
    }
    let lambdas = basis.lambdas();
    let h_eps = f.hs_norm(&lambdas, eps);
    let top = f.len();
    let band = 2.0 * (lambdas[top - 1].powi(2) - lambdas[0].powi(2));
    let window = strichartz_window();
    let (a, b) = window.support();
    let step = 2.0 * PI / (band + 400.0);
    let count = ((b - a) / step).ceil() as usize;
    let step = (b - a) / count as f64;
    let nodes = basis.node_count();
    // collected first so the summation order is independent of the pool
    let slices: Vec<f64> = (1..count)
        .into_par_iter()
        .map_init(
            || vec![Complex64::new(0.0, 0.0); nodes],
            |grid, j| {
                let t = a + j as f64 * step;
                let eta = window.eval(t);
                let u = f.propagate(&lambdas, t);
                basis.synthesize_into(&u.coeffs, grid);
                let x: f64 = grid
                    .iter()
                    .zip(&basis.quad.weights)
                    .map(|(v, w)| w * v.norm_sqr().powi(2))
                    .sum();
                eta.powi(4) * x
            },
        )
        .collect();
    let integral: f64 = slices.iter().sum();
    let l4 = (integral * step).powf(0.25);
    Ok(StrichartzValue {
        l4,
        h_eps,
        ratio: l4 / h_eps,
        time_nodes: count + 1,
    })
}

/// `sum_{lambda_n <= N} lambda_n^{-1} e_n`.
pub fn coherent_data(lambdas: &[f64], cutoff: f64) -> SpectralField {
    let m = crate::flow::truncation_size(cutoff);
    SpectralField::new(
        lambdas[..m].iter().map(|l| Complex64::new(1.0 / l, 0.0)).collect(),
        cutoff,
    )
}

/// A trajectory over `[-span, span]` on one uniform grid, stitched from a
/// backward and a forward evolution.
pub fn two_sided(basis: &SpectralBasis, u0: &SpectralField, span: f64, config: &crate::flow::FlowConfig) -> Result<Trajectory> {
    let back = crate::flow::evolve(basis, u0, -span, config)?;
    let fwd = crate::flow::evolve(basis, u0, span, config)?;
    let mut out = fwd.clone();
    let take = |v: &Vec<f64>| v.iter().rev().cloned().collect::<Vec<_>>();
    out.times = take(&back.times);
    out.times.extend_from_slice(&fwd.times[1..]);
    out.mass = take(&back.mass);
    out.mass.extend_from_slice(&fwd.mass[1..]);
    out.hamiltonian = take(&back.hamiltonian);
    out.hamiltonian.extend_from_slice(&fwd.hamiltonian[1..]);
    out.states = back.states.iter().rev().cloned().collect();
    out.states.extend_from_slice(&fwd.states[1..]);
    Ok(out)
}
