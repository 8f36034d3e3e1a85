//! Frequency-truncated NLS `i u_t + Δu - P_{<=N}(|u|^{2k} u) = 0`.
//!
//! Time stepping is classical RK4 on the interaction-picture coefficients
//! `v_n = e^{i t lambda_n^2} u_n`, which satisfy
//! `v_n' = -i e^{i t lambda_n^2} N_n(u)`. The linear part is carried exactly
//! by the phases, so the step is limited by accuracy only.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::SpectralBasis;
use crate::bessel;
use crate::cache::{self, CacheHeader, Reader, TRAJECTORY_MAGIC};
use crate::error::{CacheError, Error, Result};
use crate::field::SpectralField;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default relative conservation drift that aborts an integration.
pub const DEFAULT_ABORT_DRIFT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Picture {
    Physical,
    Interaction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub k: usize,
    /// Truncation `N`: modes with `lambda_n <= N`.
    pub cutoff: f64,
    pub dt: f64,
    /// Picture of the stored states.
    pub picture: Picture,
    pub abort_drift: f64,
    /// Number of equal output intervals on `[0, t_final]`.
    pub samples: usize,
    /// `false` drops the nonlinearity (linear Schrödinger flow).
    pub nonlinear: bool,
}

impl FlowConfig {
    /// Defaults: `dt = min(1e-3, 0.1 / N)`, physical picture, one interval.
    pub fn new(k: usize, cutoff: f64) -> Self {
        Self {
            k,
            cutoff,
            dt: default_dt(cutoff),
            picture: Picture::Physical,
            abort_drift: DEFAULT_ABORT_DRIFT,
            samples: 1,
            nonlinear: true,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples.max(1);
        self
    }

    pub fn with_picture(mut self, picture: Picture) -> Self {
        self.picture = picture;
        self
    }

    pub fn linear(mut self) -> Self {
        self.nonlinear = false;
        self
    }
}

pub fn default_dt(cutoff: f64) -> f64 {
    1e-3f64.min(0.1 / cutoff)
}

/// Number of modes in `E_N = {n : lambda_n <= N}`.
pub fn truncation_size(cutoff: f64) -> usize {
    bessel::zeros_below(cutoff)
}

/// `P_{<=N}(|u|^{2k} u)` evaluated by synthesis on the quadrature grid,
/// pointwise power, and analysis onto the first `modes` eigenfunctions.
pub struct Nonlinearity<'a> {
    basis: &'a SpectralBasis,
    k: usize,
    modes: usize,
    grid: Vec<Complex64>,
}

impl<'a> Nonlinearity<'a> {
    pub fn new(basis: &'a SpectralBasis, k: usize, modes: usize) -> Result<Self> {
        basis.require_product_order(2 * k + 2)?;
        if modes > basis.mode_count() {
            return Err(Error::FieldExceedsBasis {
                bound: f64::NAN,
                required: modes,
                available: basis.mode_count(),
            });
        }
        Ok(Self {
            basis,
            k,
            modes,
            grid: vec![ZERO; basis.node_count()],
        })
    }

    /// Writes `N_n(u)` into `out` and returns `int |u|^{2k+2}`.
    pub fn apply(&mut self, coeffs: &[Complex64], out: &mut [Complex64]) -> f64 {
        self.basis.synthesize_into(&coeffs[..self.modes], &mut self.grid);
        let mut potential = 0.0;
        for (u, &w) in self.grid.iter_mut().zip(&self.basis.quad.weights) {
            let a2 = u.norm_sqr();
            let pk = a2.powi(self.k as i32);
            potential += w * pk * a2;
            *u *= pk * w;
        }
        self.basis.analyze_into(&self.grid, &mut out[..self.modes]);
        potential
    }

    /// `int |u|^{2k+2}` alone.
    pub fn potential(&mut self, coeffs: &[Complex64]) -> f64 {
        self.basis.synthesize_into(&coeffs[..self.modes], &mut self.grid);
        self.grid
            .iter()
            .zip(&self.basis.quad.weights)
            .map(|(u, &w)| w * u.norm_sqr().powi(self.k as i32 + 1))
            .sum()
    }
}

fn check_support(basis: &SpectralBasis, field: &SpectralField, cutoff: f64) -> Result<usize> {
    let modes = truncation_size(cutoff);
    if modes > basis.mode_count() {
        return Err(Error::FieldExceedsBasis {
            bound: cutoff,
            required: modes,
            available: basis.mode_count(),
        });
    }
    if field.coeffs.iter().skip(modes).any(|c| *c != ZERO) {
        return Err(Error::Precondition(format!(
            "field has nonzero coefficients beyond E_N ({modes} modes for N = {cutoff})"
        )));
    }
    Ok(modes)
}

fn padded(field: &SpectralField, modes: usize) -> Vec<Complex64> {
    (1..=modes).map(|n| field.coeff(n)).collect()
}

/// Coefficients of `P_{<=N}(|u|^{2k} u)`.
pub fn nonlinearity(basis: &SpectralBasis, field: &SpectralField, k: usize, cutoff: f64) -> Result<SpectralField> {
    let modes = check_support(basis, field, cutoff)?;
    let mut nl = Nonlinearity::new(basis, k, modes)?;
    let mut out = vec![ZERO; modes];
    nl.apply(&padded(field, modes), &mut out);
    Ok(SpectralField::new(out, cutoff))
}

/// `M(u) = 1/2 int |u|^2`.
pub fn mass(field: &SpectralField) -> f64 {
    0.5 * field.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
}

fn kinetic(lambdas: &[f64], coeffs: &[Complex64]) -> f64 {
    0.5 * coeffs
        .iter()
        .zip(lambdas)
        .map(|(c, l)| l * l * c.norm_sqr())
        .sum::<f64>()
}

/// `1/(2k+2) int |u|^{2k+2}`.
pub fn potential_energy(basis: &SpectralBasis, field: &SpectralField, k: usize) -> Result<f64> {
    basis.require_product_order(2 * k + 2)?;
    if field.len() > basis.mode_count() && field.coeffs[basis.mode_count()..].iter().any(|c| *c != ZERO) {
        return Err(Error::FieldExceedsBasis {
            bound: field.support_bound,
            required: field.len(),
            available: basis.mode_count(),
        });
    }
    let modes = field.len().min(basis.mode_count());
    let mut nl = Nonlinearity::new(basis, k, modes)?;
    Ok(nl.potential(&field.coeffs[..modes]) / (2 * k + 2) as f64)
}

/// `H_k(u) = 1/2 int |grad u|^2 + 1/(2k+2) int |u|^{2k+2}`.
pub fn hamiltonian(basis: &SpectralBasis, field: &SpectralField, k: usize) -> Result<f64> {
    let lambdas = basis.lambdas();
    let modes = field.len().min(lambdas.len());
    Ok(kinetic(&lambdas, &field.coeffs[..modes]) + potential_energy(basis, field, k)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub k: usize,
    pub cutoff: f64,
    pub picture: Picture,
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    pub mass: Vec<f64>,
    pub hamiltonian: Vec<f64>,
}

impl Trajectory {
    pub fn last(&self) -> &SpectralField {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// State at sample `i` in the physical picture.
    pub fn physical(&self, i: usize, lambdas: &[f64]) -> SpectralField {
        match self.picture {
            Picture::Physical => self.states[i].clone(),
            Picture::Interaction => self.states[i].propagate(lambdas, self.times[i]),
        }
    }

    /// State at sample `i` in the interaction picture.
    pub fn interaction(&self, i: usize, lambdas: &[f64]) -> SpectralField {
        match self.picture {
            Picture::Interaction => self.states[i].clone(),
            Picture::Physical => self.states[i].propagate(lambdas, -self.times[i]),
        }
    }

    /// Largest relative drift of mass and Hamiltonian from the first sample.
    pub fn max_drift(&self) -> (f64, f64) {
        (relative_drift(&self.mass), relative_drift(&self.hamiltonian))
    }

    /// `time, re_1, im_1, ..., mass, hamiltonian` rows.
    pub fn to_csv(&self) -> String {
        let modes = self.states.first().map_or(0, |s| s.len());
        let mut out = String::from("time");
        for n in 1..=modes {
            write!(out, ",re_{n},im_{n}").unwrap();
        }
        out.push_str(",mass,hamiltonian\n");
        for (i, t) in self.times.iter().enumerate() {
            write!(out, "{t:e}").unwrap();
            for c in &self.states[i].coeffs {
                write!(out, ",{:e},{:e}", c.re, c.im).unwrap();
            }
            writeln!(out, ",{:e},{:e}", self.mass[i], self.hamiltonian[i]).unwrap();
        }
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        let modes = self.states.first().map_or(0, |s| s.len());
        let mut out = Vec::new();
        CacheHeader::new(TRAJECTORY_MAGIC, modes as u64, self.times.len() as u64, self.k as u64)
            .write_to(&mut out)
            .unwrap();
        out.extend_from_slice(&self.cutoff.to_le_bytes());
        let picture: u64 = match self.picture {
            Picture::Physical => 0,
            Picture::Interaction => 1,
        };
        out.extend_from_slice(&picture.to_le_bytes());
        for (i, s) in self.states.iter().enumerate() {
            let mut row = vec![self.times[i], self.mass[i], self.hamiltonian[i]];
            row.extend(s.coeffs.iter().flat_map(|c| [c.re, c.im]));
            cache::put_f64s(&mut out, &row).unwrap();
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let h = CacheHeader::read_from(&mut r, TRAJECTORY_MAGIC)?;
        let cutoff = r.f64()?;
        let picture = match r.u64()? {
            0 => Picture::Physical,
            1 => Picture::Interaction,
            p => return Err(CacheError::Corrupt(format!("unknown picture tag {p}")).into()),
        };
        let modes = h.mode_count as usize;
        let mut t = Trajectory {
            k: h.param as usize,
            cutoff,
            picture,
            times: Vec::new(),
            states: Vec::new(),
            mass: Vec::new(),
            hamiltonian: Vec::new(),
        };
        for _ in 0..h.node_count {
            t.times.push(r.f64()?);
            t.mass.push(r.f64()?);
            t.hamiltonian.push(r.f64()?);
            let flat = r.f64_vec(2 * modes)?;
            let coeffs = flat.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
            t.states.push(SpectralField::new(coeffs, cutoff));
        }
        r.finish()?;
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        cache::write_file(path, &self.encode())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&cache::read_file(path)?)
    }
}

fn relative_drift(xs: &[f64]) -> f64 {
    let x0 = xs[0];
    let scale = if x0 != 0.0 { x0.abs() } else { 1.0 };
    xs.iter().map(|x| (x - x0).abs() / scale).fold(0.0, f64::max)
}

struct Integrator<'a> {
    nl: Option<Nonlinearity<'a>>,
    lambda_sq: Vec<f64>,
    k: usize,
    // stage buffers
    u: Vec<Complex64>,
    n: Vec<Complex64>,
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl<'a> Integrator<'a> {
    fn new(basis: &'a SpectralBasis, k: usize, modes: usize, nonlinear: bool) -> Result<Self> {
        let nl = if nonlinear {
            Some(Nonlinearity::new(basis, k, modes)?)
        } else {
            basis.require_product_order(2 * k + 2)?;
            None
        };
        let lambda_sq = basis.modes[..modes].iter().map(|m| m.lambda * m.lambda).collect();
        Ok(Self {
            nl,
            lambda_sq,
            k,
            u: vec![ZERO; modes],
            n: vec![ZERO; modes],
            k1: vec![ZERO; modes],
            k2: vec![ZERO; modes],
            k3: vec![ZERO; modes],
            k4: vec![ZERO; modes],
            tmp: vec![ZERO; modes],
        })
    }

    /// `out = -i e^{i t lambda^2} N(e^{-i t lambda^2} v)`.
    fn rhs(
        nl: &mut Nonlinearity<'_>,
        lambda_sq: &[f64],
        u: &mut [Complex64],
        n: &mut [Complex64],
        t: f64,
        v: &[Complex64],
        out: &mut [Complex64],
    ) {
        for ((u, v), l2) in u.iter_mut().zip(v).zip(lambda_sq) {
            *u = v * Complex64::from_polar(1.0, -t * l2);
        }
        nl.apply(u, n);
        for ((o, n), l2) in out.iter_mut().zip(n.iter()).zip(lambda_sq) {
            let rot = Complex64::from_polar(1.0, t * l2);
            *o = Complex64::new(0.0, -1.0) * rot * n;
        }
    }

    fn step(&mut self, t: f64, h: f64, v: &mut [Complex64]) {
        let Some(nl) = self.nl.as_mut() else {
            return;
        };
        let ls = &self.lambda_sq;
        Self::rhs(nl, ls, &mut self.u, &mut self.n, t, v, &mut self.k1);
        for i in 0..v.len() {
            self.tmp[i] = v[i] + self.k1[i] * (0.5 * h);
        }
        Self::rhs(nl, ls, &mut self.u, &mut self.n, t + 0.5 * h, &self.tmp, &mut self.k2);
        for i in 0..v.len() {
            self.tmp[i] = v[i] + self.k2[i] * (0.5 * h);
        }
        Self::rhs(nl, ls, &mut self.u, &mut self.n, t + 0.5 * h, &self.tmp, &mut self.k3);
        for i in 0..v.len() {
            self.tmp[i] = v[i] + self.k3[i] * h;
        }
        Self::rhs(nl, ls, &mut self.u, &mut self.n, t + h, &self.tmp, &mut self.k4);
        for i in 0..v.len() {
            v[i] += (self.k1[i] + (self.k2[i] + self.k3[i]) * 2.0 + self.k4[i]) * (h / 6.0);
        }
    }

    /// Mass and Hamiltonian of the interaction state `v` at time `t`.
    fn invariants(&mut self, t: f64, v: &[Complex64]) -> (f64, f64) {
        let m = 0.5 * v.iter().map(|c| c.norm_sqr()).sum::<f64>();
        let kin = 0.5
            * v.iter()
                .zip(&self.lambda_sq)
                .map(|(c, l2)| l2 * c.norm_sqr())
                .sum::<f64>();
        let pot = match self.nl.as_mut() {
            Some(nl) => {
                for ((u, v), l2) in self.u.iter_mut().zip(v).zip(&self.lambda_sq) {
                    *u = v * Complex64::from_polar(1.0, -t * l2);
                }
                nl.potential(&self.u)
            }
            None => 0.0,
        };
        (m, kin + pot / (2 * self.k + 2) as f64)
    }
}

/// Integrate from `u0` at time 0 to `t_final` (either sign). Each of the
/// `config.samples` output intervals takes `ceil(|interval| / dt)` equal
/// steps.
pub fn evolve(basis: &SpectralBasis, u0: &SpectralField, t_final: f64, config: &FlowConfig) -> Result<Trajectory> {
    if !(config.dt > 0.0) {
        return Err(Error::NonPositiveStep(config.dt));
    }
    let modes = check_support(basis, u0, config.cutoff)?;
    let mut integ = Integrator::new(basis, config.k, modes, config.nonlinear)?;
    let lambdas: Vec<f64> = basis.modes[..modes].iter().map(|m| m.lambda).collect();
    let samples = config.samples.max(1);

    let mut v = padded(u0, modes);
    let (m0, h0) = integ.invariants(0.0, &v);
    let mut traj = Trajectory {
        k: config.k,
        cutoff: config.cutoff,
        picture: config.picture,
        times: vec![0.0],
        states: vec![SpectralField::new(v.clone(), config.cutoff)],
        mass: vec![m0],
        hamiltonian: vec![h0],
    };
    let scale = |x0: f64| if x0 != 0.0 { x0.abs() } else { 1.0 };
    let mut t = 0.0;
    for j in 1..=samples {
        let target = t_final * j as f64 / samples as f64;
        let span = target - t;
        let steps = (span.abs() / config.dt).ceil() as usize;
        if steps > 0 {
            let h = span / steps as f64;
            for s in 0..steps {
                let ts = t + s as f64 * h;
                integ.step(ts, h, &mut v);
                if integ.nl.is_some() {
                    let mass = 0.5 * v.iter().map(|c| c.norm_sqr()).sum::<f64>();
                    let md = (mass - m0).abs() / scale(m0);
                    if md > config.abort_drift || !md.is_finite() {
                        return Err(Error::ConservationDrift {
                            quantity: "mass",
                            drift: md,
                            time: ts + h,
                            threshold: config.abort_drift,
                        });
                    }
                }
            }
        }
        t = target;
        let (m, ham) = integ.invariants(t, &v);
        let hd = (ham - h0).abs() / scale(h0);
        if hd > config.abort_drift || !hd.is_finite() {
            return Err(Error::ConservationDrift {
                quantity: "hamiltonian",
                drift: hd,
                time: t,
                threshold: config.abort_drift,
            });
        }
        traj.times.push(t);
        traj.mass.push(m);
        traj.hamiltonian.push(ham);
        traj.states.push(SpectralField::new(v.clone(), config.cutoff));
    }
    if config.picture == Picture::Physical {
        for (s, &t) in traj.states.iter_mut().zip(&traj.times) {
            *s = s.propagate(&lambdas, t);
        }
    }
    Ok(traj)
}

/// `||Phi_t(Phi_s(u0)) - Phi_{s+t}(u0)||_{L^2}`; each leg restarts the
/// interaction picture at its own initial time.
pub fn flow_property_check(basis: &SpectralBasis, u0: &SpectralField, s: f64, t: f64, config: &FlowConfig) -> Result<f64> {
    if s < 0.0 || t < 0.0 {
        return Err(Error::Precondition("flow property needs s, t >= 0".into()));
    }
    let cfg = FlowConfig {
        picture: Picture::Physical,
        samples: 1,
        ..config.clone()
    };
    let first = evolve(basis, u0, s, &cfg)?;
    let composed = evolve(basis, first.last(), t, &cfg)?;
    let direct = evolve(basis, u0, s + t, &cfg)?;
    Ok(composed.last().sub(direct.last()).l2_norm())
}
