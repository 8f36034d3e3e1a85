use std::f64::consts::PI;
use std::path::PathBuf;

use anyhow::{bail, Context as _, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use disc_nls::cache::{basis_cache_path, load_or_build_basis};
use disc_nls::correlation::{correlation_cache_path, size_bound_report, BoundReport};
use disc_nls::counting::{self, BaseTensorSpec, TupleConstraint, WorstCase};
use disc_nls::flow::{self, FlowConfig, Picture, Trajectory};
use disc_nls::gibbs::{self, derive_seed, GibbsConfig, InvarianceReport, Observable};
use disc_nls::norms::{self, spread};
use disc_nls::rro::{self, AnsatzConfig, AnsatzScaling, LawInvarianceReport};
use disc_nls::{Complex64, CorrelationTensor, SpectralBasis, SpectralField};

use crate::config::Context;
use crate::report::CacheInfo;

/// A finished run: result document plus the rendered CSV table.
pub struct Run<R> {
    pub result: R,
    pub csv: String,
    pub caches: Vec<CacheInfo>,
}

impl<R> Run<R> {
    fn new<T: Serialize>(result: R, rows: &[T], caches: Vec<CacheInfo>) -> Result<Self> {
        Ok(Self {
            result,
            csv: csv_string(rows)?,
            caches,
        })
    }
}

pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn basis_for(ctx: &Context, modes: usize, product_order: usize, caches: &mut Vec<CacheInfo>) -> Result<SpectralBasis> {
    let modes = modes.max(1);
    match &ctx.cache_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating cache dir {}", dir.display()))?;
            let basis = load_or_build_basis(dir, modes, product_order, ctx.rebuild_cache)
                .context("loading basis cache (pass --rebuild-cache to replace it)")?;
            let path = basis_cache_path(dir, modes, product_order);
            caches.push(CacheInfo::new("basis", &path, &std::fs::read(&path)?));
            Ok(basis)
        }
        None => Ok(SpectralBasis::build(modes, product_order)?),
    }
}

fn require_dyadic(values: &[f64]) -> Result<()> {
    for &n in values {
        if !rro::is_dyadic(n) {
            bail!("cutoff {n} is not a power of two");
        }
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        bail!("{name} must be positive and finite, got {v}");
    }
    Ok(())
}

// ---------------------------------------------------------------- basis

#[derive(Debug, Args, Serialize)]
pub struct BasisFlags {
    /// Number of eigenmodes.
    #[arg(long)]
    modes: Option<usize>,
    /// Largest product of eigenfunctions the quadrature must integrate.
    #[arg(long)]
    product_order: Option<usize>,
    /// Also tabulate the sup and L^4 norms of each mode.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    norms: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisParams {
    pub modes: usize,
    pub product_order: usize,
    pub norms: bool,
}

impl Default for BasisParams {
    fn default() -> Self {
        Self {
            modes: 32,
            product_order: 4,
            norms: false,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BasisSummary {
    modes: usize,
    node_count: usize,
    orthonormality_defect: f64,
    /// `max n |lambda_n - pi (n - 1/4)|` over `n >= 10`.
    max_scaled_residual: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct BasisRow {
    n: usize,
    lambda: f64,
    mcmahon: f64,
    scaled_residual: f64,
    linf: Option<f64>,
    l4: Option<f64>,
}

pub fn basis(ctx: &Context, p: &BasisParams) -> Result<Run<BasisSummary>> {
    if p.modes == 0 {
        bail!("modes must be at least 1");
    }
    let mut caches = Vec::new();
    let b = basis_for(ctx, p.modes, p.product_order, &mut caches)?;
    let mut rows = Vec::with_capacity(p.modes);
    for m in &b.modes {
        let n = m.index;
        let mcmahon = PI * (n as f64 - 0.25);
        let (linf, l4) = if p.norms {
            (Some(b.lp_norm(n, f64::INFINITY)?), Some(b.lp_norm(n, 4.0)?))
        } else {
            (None, None)
        };
        rows.push(BasisRow {
            n,
            lambda: m.lambda,
            mcmahon,
            scaled_residual: n as f64 * (m.lambda - mcmahon).abs(),
            linf,
            l4,
        });
    }
    let max_scaled_residual = rows
        .iter()
        .filter(|r| r.n >= 10)
        .map(|r| r.scaled_residual)
        .reduce(f64::max);
    Run::new(
        BasisSummary {
            modes: p.modes,
            node_count: b.node_count(),
            orthonormality_defect: b.orthonormality_defect(),
            max_scaled_residual,
        },
        &rows,
        caches,
    )
}

// ---------------------------------------------------------------- correlate

#[derive(Debug, Args, Serialize)]
pub struct CorrelateFlags {
    /// One index tuple, e.g. 1,1,2,2.
    #[arg(long, value_delimiter = ',')]
    indices: Option<Vec<usize>>,
    /// Degree: the tensor has 2k+2 indices.
    #[arg(long)]
    k: Option<usize>,
    /// Tabulate every sorted tuple with entries up to this mode (0 = none).
    #[arg(long)]
    max_mode: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelateParams {
    pub indices: Vec<usize>,
    pub k: usize,
    pub max_mode: usize,
}

impl Default for CorrelateParams {
    fn default() -> Self {
        Self {
            indices: Vec::new(),
            k: 1,
            max_mode: 0,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CorrelateSummary {
    k: usize,
    value: Option<f64>,
    size_bound: Option<BoundReport>,
    table_entries: usize,
}

#[derive(Debug, Serialize)]
pub struct CorrelateRow {
    indices: String,
    value: f64,
}

fn sorted_tuples(width: usize, max: usize, out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>) {
    if cur.len() == width {
        out.push(cur.clone());
        return;
    }
    let start = cur.last().copied().unwrap_or(1);
    for n in start..=max {
        cur.push(n);
        sorted_tuples(width, max, out, cur);
        cur.pop();
    }
}

pub fn correlate(ctx: &Context, p: &CorrelateParams) -> Result<Run<CorrelateSummary>> {
    if p.k == 0 {
        bail!("k must be at least 1");
    }
    if p.indices.is_empty() && p.max_mode == 0 {
        bail!("nothing to do: give --indices or --max-mode");
    }
    if p.indices.contains(&0) {
        bail!("mode indices are 1-based");
    }
    let width = 2 * p.k + 2;
    let modes = p.indices.iter().copied().max().unwrap_or(0).max(p.max_mode);
    let order = width.max(p.indices.len()).max(2);
    let mut caches = Vec::new();
    let b = basis_for(ctx, modes, order, &mut caches)?;
    let tensor = CorrelationTensor::new(&b, p.k)?;
    let cache_path = ctx
        .cache_dir
        .as_ref()
        .map(|d| correlation_cache_path(d, p.k, b.mode_count(), b.node_count()));
        if let Some(path) = &cache_path {
        if path.exists() && !ctx.rebuild_cache {
            let loaded = tensor
                .load(path)
                .context("loading correlation cache (pass --rebuild-cache to replace it)")?;
            eprintln!("loaded {loaded} cached correlation entries");
        }
    }
    let (value, size_bound) = if p.indices.is_empty() {
        (None, None)
    } else {
        let v = if p.indices.len() == width {
            tensor.get(&p.indices)?
        } else {
            disc_nls::correlate(&b, &p.indices)?
        };
        let bound = if p.indices.len() >= 3 {
            Some(size_bound_report(&b, &p.indices)?)
        } else {
            None
        };
        (Some(v), bound)
    };
    let mut rows = Vec::new();
    if p.max_mode > 0 {
        let mut tuples = Vec::new();
        sorted_tuples(width, p.max_mode, &mut tuples, &mut Vec::new());
        for t in tuples {
            let value = tensor.get(&t)?;
            let indices = t.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" ");
            rows.push(CorrelateRow { indices, value });
        }
    }
    if let Some(path) = &cache_path {
        tensor.save(path)?;
        caches.push(CacheInfo::new("correlation", path, &std::fs::read(path)?));
    }
    Run::new(
        CorrelateSummary {
            k: p.k,
            value,
            size_bound,
            table_entries: rows.len(),
        },
        &rows,
        caches,
    )
}

// ---------------------------------------------------------------- count

#[derive(Debug, Args, Serialize)]
pub struct CountFlags {
    /// Box radii for the worst-case pair counts.
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<usize>>,
    /// Exclude the diagonal n = m from difference-pair counts.
    #[arg(long)]
    exclude_diagonal: Option<bool>,
    /// Output frequency bound of a base tensor query.
    #[arg(long = "N")]
    n_bound: Option<f64>,
    /// Dyadic input bounds N_1,...,N_{2k+1} of the base tensor.
    #[arg(long, value_delimiter = ',')]
    bounds: Option<Vec<f64>>,
    /// Integer phase bucket.
    #[arg(long, allow_hyphen_values = true)]
    m: Option<i64>,
    /// none, not-odd-max, no-simple-pairing or no-pairing.
    #[arg(long)]
    constraint: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountParams {
    pub radii: Vec<usize>,
    pub exclude_diagonal: bool,
    pub n_bound: Option<f64>,
    pub bounds: Vec<f64>,
    pub m: i64,
    pub constraint: String,
}

impl Default for CountParams {
    fn default() -> Self {
        Self {
            radii: vec![128, 256, 512, 1024],
            exclude_diagonal: true,
            n_bound: None,
            bounds: Vec::new(),
            m: 0,
            constraint: "none".into(),
        }
    }
}

fn parse_constraint(name: &str) -> Result<TupleConstraint> {
    Ok(match name {
        "none" => TupleConstraint::None,
        "not-odd-max" => TupleConstraint::NotOddMax,
        "no-simple-pairing" => TupleConstraint::NoSimplePairing,
        "no-pairing" => TupleConstraint::NoPairing,
        other => bail!("unknown constraint {other:?}"),
    })
}

#[derive(Debug, Serialize)]
pub struct BaseTensorResult {
    count: u64,
    hs_norm: f64,
}

#[derive(Debug, Serialize)]
pub struct CountSummary {
    diff_pairs: Vec<WorstCase>,
    sum_pairs: Vec<WorstCase>,
    /// Ratio of consecutive worst-case difference counts.
    diff_growth: Vec<f64>,
    base_tensor: Option<BaseTensorResult>,
}

#[derive(Debug, Serialize)]
pub struct CountRow {
    radius: usize,
    kind: &'static str,
    m: i64,
    count: u64,
}

pub fn count(_ctx: &Context, p: &CountParams) -> Result<Run<CountSummary>> {
    let constraint = parse_constraint(&p.constraint)?;
    let top = p.radii.iter().copied().max().unwrap_or(0);
    let sq = counting::eigenvalue_squares(top);
    let mut diff = Vec::new();
    let mut sum = Vec::new();
    let mut rows = Vec::new();
    for &r in &p.radii {
        let d = counting::worst_case_diff_pairs(&sq, r, p.exclude_diagonal)?;
        let s = counting::worst_case_sum_pairs(&sq, r)?;
        rows.push(CountRow { radius: r, kind: "diff", m: d.m, count: d.count });
        rows.push(CountRow { radius: r, kind: "sum", m: s.m, count: s.count });
        diff.push(d);
        sum.push(s);
    }
    let diff_growth = diff
        .windows(2)
        .map(|w| w[1].count as f64 / w[0].count.max(1) as f64)
        .collect();
    let base_tensor = match p.n_bound {
        Some(n) => {
            let spec = BaseTensorSpec::new(n, p.bounds.clone(), p.m).with_constraint(constraint);
            let need = p.bounds.iter().copied().fold(n, f64::max);
            let lambdas = disc_nls::bessel::j0_zeros(flow::truncation_size(need) + 1);
            Some(BaseTensorResult {
                count: counting::base_tensor_count(&lambdas, &spec, counting::DEFAULT_CEILING)?,
                hs_norm: counting::base_tensor_hs_norm(&lambdas, &spec, counting::DEFAULT_CEILING)?,
            })
        }
        None => None,
    };
    Run::new(
        CountSummary {
            diff_pairs: diff,
            sum_pairs: sum,
            diff_growth,
            base_tensor,
        },
        &rows,
        Vec::new(),
    )
}

// ---------------------------------------------------------------- evolve

#[derive(Debug, Args, Serialize)]
pub struct EvolveFlags {
    #[arg(long)]
    k: Option<usize>,
    /// Frequency cutoff N.
    #[arg(long = "N")]
    cutoff: Option<f64>,
    /// Final time (may be negative).
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Number of output intervals.
    #[arg(long)]
    samples: Option<usize>,
    /// physical or interaction.
    #[arg(long)]
    picture: Option<String>,
    /// gff, coherent, or mode:<n>.
    #[arg(long)]
    init: Option<String>,
    /// Multiplier applied to the initial data.
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    nonlinear: Option<bool>,
    /// Relative mass/energy drift that aborts the run.
    #[arg(long)]
    abort_drift: Option<f64>,
    /// Also measure |Phi_s Phi_{t-s} u0 - Phi_t u0| at this split time.
    #[arg(long)]
    flow_check: Option<f64>,
    /// Write the trajectory in the binary cache format.
    #[arg(long)]
    save_trajectory: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveParams {
    pub k: usize,
    pub cutoff: f64,
    pub t: f64,
    pub dt: Option<f64>,
    pub samples: usize,
    pub picture: Picture,
    pub init: String,
    pub amplitude: f64,
    pub nonlinear: bool,
    pub abort_drift: Option<f64>,
    pub flow_check: Option<f64>,
    pub save_trajectory: Option<PathBuf>,
}

impl Default for EvolveParams {
    fn default() -> Self {
        Self {
            k: 1,
            cutoff: 32.0,
            t: 1.0,
            dt: None,
            samples: 100,
            picture: Picture::Physical,
            init: "gff".into(),
            amplitude: 1.0,
            nonlinear: true,
            abort_drift: None,
            flow_check: None,
            save_trajectory: None,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct EvolveSummary {
    modes: usize,
    dt: f64,
    final_time: f64,
    initial_mass: f64,
    final_mass: f64,
    initial_hamiltonian: f64,
    final_hamiltonian: f64,
    max_mass_drift: f64,
    max_hamiltonian_drift: f64,
    flow_property_deviation: Option<f64>,
}

fn initial_data(init: &str, lambdas: &[f64], cutoff: f64, seed: u64) -> Result<SpectralField> {
    let modes = flow::truncation_size(cutoff);
    if init == "gff" {
        return Ok(gibbs::gff_from_lambdas(lambdas, cutoff, seed).field);
    }
    if init == "coherent" {
        return Ok(norms::coherent_data(lambdas, cutoff));
    }
    if let Some(n) = init.strip_prefix("mode:") {
        let n: usize = n.parse().with_context(|| format!("bad mode in init {init:?}"))?;
        if n == 0 || n > modes {
            bail!("init mode {n} outside E_N ({modes} modes)");
        }
        let mut f = SpectralField::zeros(modes, cutoff);
        f.coeffs[n - 1] = Complex64::new(1.0, 0.0);
        return Ok(f);
    }
    bail!("unknown init {init:?} (gff, coherent, mode:<n>)")
}

pub fn evolve(ctx: &Context, p: &EvolveParams) -> Result<Run<EvolveSummary>> {
    positive("N", p.cutoff)?;
    if p.k == 0 {
        bail!("k must be at least 1");
    }
    let modes = flow::truncation_size(p.cutoff);
    if modes == 0 {
        bail!("E_N is empty for N = {}", p.cutoff);
    }
    let mut caches = Vec::new();
    let b = basis_for(ctx, modes, 2 * p.k + 2, &mut caches)?;
    let u0 = initial_data(&p.init, &b.lambdas(), p.cutoff, ctx.seed)?.scale(Complex64::new(p.amplitude, 0.0));
    let mut cfg = FlowConfig::new(p.k, p.cutoff)
        .with_samples(p.samples)
        .with_picture(p.picture);
    if let Some(dt) = p.dt {
        cfg = cfg.with_dt(dt);
    }
    if let Some(a) = p.abort_drift {
        cfg.abort_drift = a;
    }
    cfg.nonlinear = p.nonlinear;
    let traj: Trajectory = flow::evolve(&b, &u0, p.t, &cfg)?;
    let flow_property_deviation = match p.flow_check {
        Some(s) => Some(flow::flow_property_check(&b, &u0, s, p.t - s, &cfg)?),
        None => None,
    };
    if let Some(path) = &p.save_trajectory {
        traj.save(path)?;
        caches.push(CacheInfo::new("trajectory", path, &std::fs::read(path)?));
    }
    let (dm, dh) = traj.max_drift();
    let last = traj.mass.len() - 1;
    Ok(Run {
        result: EvolveSummary {
            modes,
            dt: cfg.dt,
            final_time: traj.final_time(),
            initial_mass: traj.mass[0],
            final_mass: traj.mass[last],
            initial_hamiltonian: traj.hamiltonian[0],
            final_hamiltonian: traj.hamiltonian[last],
            max_mass_drift: dm,
            max_hamiltonian_drift: dh,
            flow_property_deviation,
        },
        csv: traj.to_csv(),
        caches,
    })
}

// ---------------------------------------------------------------- gibbs-invariance

#[derive(Debug, Args, Serialize)]
pub struct GibbsFlags {
    #[arg(long = "N")]
    cutoff: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Multiplier beta in the rejection weight exp(-beta V).
    #[arg(long)]
    potential_scale: Option<f64>,
    #[arg(long)]
    max_attempts: Option<u32>,
    /// Observables such as mass, potential, abs2:1, re:1, im:2.
    #[arg(long, value_delimiter = ',')]
    observables: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GibbsParams {
    pub cutoff: f64,
    pub k: usize,
    pub samples: usize,
    pub t: f64,
    pub dt: Option<f64>,
    pub potential_scale: f64,
    pub max_attempts: u32,
    pub observables: Vec<String>,
}

impl Default for GibbsParams {
    fn default() -> Self {
        Self {
            cutoff: 16.0,
            k: 1,
            samples: 4000,
            t: 0.5,
            dt: None,
            potential_scale: 1.0,
            max_attempts: gibbs::DEFAULT_MAX_ATTEMPTS,
            observables: ["abs2:1", "abs2:2", "abs2:3", "re:1"].map(String::from).to_vec(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct GibbsSummary {
    #[serde(flatten)]
    report: InvarianceReport,
    max_abs_z: f64,
    within_three_sigma: bool,
}

#[derive(Debug, Serialize)]
pub struct GibbsRow {
    observable: String,
    mean0: f64,
    mean_t: f64,
    stderr: f64,
    z: f64,
}

pub fn gibbs_invariance(ctx: &Context, p: &GibbsParams) -> Result<Run<GibbsSummary>> {
    positive("N", p.cutoff)?;
    let observables = p
        .observables
        .iter()
        .map(|s| s.parse::<Observable>())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let modes = flow::truncation_size(p.cutoff);
    let mut caches = Vec::new();
    let b = basis_for(ctx, modes, 2 * p.k + 2, &mut caches)?;
    let cfg = GibbsConfig {
        max_attempts: p.max_attempts,
        ..GibbsConfig::new(p.k, p.cutoff).with_potential_scale(p.potential_scale)
    };
    let mut flow_cfg = FlowConfig::new(p.k, p.cutoff);
    if let Some(dt) = p.dt {
        flow_cfg = flow_cfg.with_dt(dt);
    }
    let report = gibbs::invariance_test(&b, &cfg, &flow_cfg, p.t, p.samples, &observables, ctx.seed)?;
    let rows: Vec<GibbsRow> = report
        .scores
        .iter()
        .map(|s| GibbsRow {
            observable: s.observable.to_string(),
            mean0: s.mean0,
            mean_t: s.mean_t,
            stderr: s.stderr,
            z: s.z,
        })
        .collect();
    let max_abs_z = report.max_abs_z();
    Run::new(
        GibbsSummary {
            report,
            max_abs_z,
            within_three_sigma: max_abs_z <= 3.0,
        },
        &rows,
        caches,
    )
}

// ---------------------------------------------------------------- ansatz

#[derive(Debug, Args, Serialize)]
pub struct AnsatzFlags {
    /// Dyadic cutoffs, e.g. 8,16,32,64.
    #[arg(long = "N", value_delimiter = ',')]
    cutoffs: Option<Vec<f64>>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Number of seeds derived from the master seed.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Also report law invariance of the rotated block (needs >= 500 seeds).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    law_invariance: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnsatzParams {
    pub cutoffs: Vec<f64>,
    pub k: usize,
    pub kappa: f64,
    pub seeds: usize,
    pub t: f64,
    pub dt: Option<f64>,
    pub law_invariance: bool,
}

impl Default for AnsatzParams {
    fn default() -> Self {
        Self {
            cutoffs: vec![8.0, 16.0, 32.0, 64.0],
            k: 2,
            kappa: rro::DEFAULT_KAPPA,
            seeds: 50,
            t: 0.3,
            dt: None,
            law_invariance: false,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct AnsatzSummary {
    scaling: AnsatzScaling,
    law_invariance: Vec<LawInvarianceReport>,
}

#[derive(Debug, Serialize)]
pub struct AnsatzRow {
    cutoff: f64,
    seed: u64,
    time: f64,
    y_l2: f64,
    psi_l2: f64,
    z_l2: f64,
    y_h_half: f64,
    psi_h_half: f64,
    z_h_half: f64,
}

pub fn ansatz(ctx: &Context, p: &AnsatzParams) -> Result<Run<AnsatzSummary>> {
    require_dyadic(&p.cutoffs)?;
    positive("t", p.t)?;
    if p.seeds < 2 {
        bail!("at least 2 seeds are needed");
    }
    if p.law_invariance && p.seeds < rro::MIN_LAW_ENSEMBLE {
        bail!("law invariance needs at least {} seeds", rro::MIN_LAW_ENSEMBLE);
    }
    let top = p.cutoffs.iter().copied().fold(0.0, f64::max);
    let mut caches = Vec::new();
    let b = basis_for(ctx, flow::truncation_size(top), 2 * p.k + 2, &mut caches)?;
    let lambdas = b.lambdas();
    let mut cfg = AnsatzConfig::new(p.k, p.t, top);
    cfg.kappa = p.kappa;
    if let Some(dt) = p.dt {
        cfg.flow.dt = dt;
    }
    let seeds: Vec<u64> = (0..p.seeds as u64).map(|i| derive_seed(ctx.seed, i)).collect();
    let mut rows = Vec::new();
    let mut scaling_rows = Vec::new();
    let mut law = Vec::new();
    for &n in &p.cutoffs {
        let ds = rro::decompose_ensemble(&b, &seeds, n, &cfg)?;
        for d in &ds {
            for r in d.norm_rows(&lambdas) {
                rows.push(AnsatzRow {
                    cutoff: n,
                    seed: d.seed,
                    time: r.time,
                    y_l2: r.y_l2,
                    psi_l2: r.psi_l2,
                    z_l2: r.z_l2,
                    y_h_half: r.y_h_half,
                    psi_h_half: r.psi_h_half,
                    z_h_half: r.z_h_half,
                });
            }
        }
        scaling_rows.push(rro::scaling_row(&ds));
        if p.law_invariance {
            let last = ds[0].times.len() - 1;
            law.push(rro::law_invariance_report(&lambdas, &ds, last)?);
        }
    }
    Run::new(
        AnsatzSummary {
            scaling: AnsatzScaling::from_rows(&cfg, seeds.len(), scaling_rows),
            law_invariance: law,
        },
        &rows,
        caches,
    )
}

// ---------------------------------------------------------------- norms

#[derive(Debug, Args, Serialize)]
pub struct NormsFlags {
    #[arg(long = "N", value_delimiter = ',')]
    cutoffs: Option<Vec<f64>>,
    /// Regularity indices.
    #[arg(long, value_delimiter = ',')]
    s: Option<Vec<f64>>,
    /// Integrability exponents, `inf` allowed.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<String>>,
    /// Gaussian free field draws per cutoff.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormsParams {
    pub cutoffs: Vec<f64>,
    pub s: Vec<f64>,
    pub p: Vec<String>,
    pub samples: usize,
}

fn parse_exponent(text: &str) -> Result<f64> {
    let q = match text {
        "inf" | "infinity" => f64::INFINITY,
        _ => text.parse().with_context(|| format!("bad exponent {text:?}"))?,
    };
    if !(q >= 1.0) {
        bail!("p must be >= 1, got {text}");
    }
    Ok(q)
}

impl Default for NormsParams {
    fn default() -> Self {
        Self {
            cutoffs: vec![8.0, 16.0, 32.0, 64.0, 128.0],
            s: vec![0.4, 0.6],
            p: vec!["2".into()],
            samples: 200,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct NormsSeries {
    s: f64,
    p: String,
    means: Vec<f64>,
    spread: f64,
    increasing: bool,
}

#[derive(Debug, Serialize)]
pub struct NormsSummary {
    cutoffs: Vec<f64>,
    series: Vec<NormsSeries>,
}

#[derive(Debug, Serialize)]
pub struct NormsRow {
    cutoff: f64,
    s: f64,
    p: String,
    value: f64,
}

pub fn norms(ctx: &Context, p: &NormsParams) -> Result<Run<NormsSummary>> {
    if p.samples == 0 || p.cutoffs.is_empty() {
        bail!("need at least one cutoff and one sample");
    }
    let exps = p.p.iter().map(|q| parse_exponent(q)).collect::<Result<Vec<_>>>()?;
    let top = p.cutoffs.iter().copied().fold(0.0, f64::max);
    let finite_p = exps.iter().copied().filter(|q| q.is_finite()).fold(4.0, f64::max);
    let mut caches = Vec::new();
    let b = basis_for(ctx, flow::truncation_size(top), finite_p.ceil() as usize, &mut caches)?;
    let lambdas = b.lambdas();
    let per_draw: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..p.samples as u64)
            .into_par_iter()
            .map(|i| {
                let draw = gibbs::gff_from_lambdas(&lambdas, top, derive_seed(ctx.seed, i)).field;
                let mut out = Vec::new();
                for &n in &p.cutoffs {
                    let f = draw.truncated(flow::truncation_size(n), n);
                    for &s in &p.s {
                        for &q in &exps {
                            out.push(norms::sobolev_norm(&b, &f, s, q)?);
                        }
                    }
                }
                Ok(out)
            })
            .collect::<disc_nls::Result<_>>()?
    };
    let mut rows = Vec::new();
    let mut idx = 0;
    let mut means = vec![Vec::new(); p.s.len() * p.p.len()];
    for &n in &p.cutoffs {
        for (si, &s) in p.s.iter().enumerate() {
            for (qi, q) in p.p.iter().enumerate() {
                let value = per_draw.iter().map(|d| d[idx]).sum::<f64>() / p.samples as f64;
                means[si * p.p.len() + qi].push(value);
                rows.push(NormsRow { cutoff: n, s, p: q.clone(), value });
                idx += 1;
            }
        }
    }
    let mut series = Vec::new();
    for (si, &s) in p.s.iter().enumerate() {
        for (qi, q) in p.p.iter().enumerate() {
            let m = means[si * p.p.len() + qi].clone();
            series.push(NormsSeries {
                s,
                p: q.clone(),
                spread: spread(&m),
                increasing: m.windows(2).all(|w| w[1] > w[0]),
                means: m,
            });
        }
    }
    Run::new(
        NormsSummary {
            cutoffs: p.cutoffs.clone(),
            series,
        },
        &rows,
        caches,
    )
}

// ---------------------------------------------------------------- strichartz

#[derive(Debug, Args, Serialize)]
pub struct StrichartzFlags {
    #[arg(long = "N", value_delimiter = ',')]
    cutoffs: Option<Vec<f64>>,
    #[arg(long)]
    eps: Option<f64>,
    /// random, coherent or both.
    #[arg(long)]
    data: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrichartzParams {
    pub cutoffs: Vec<f64>,
    pub eps: f64,
    pub data: String,
}

impl Default for StrichartzParams {
    fn default() -> Self {
        Self {
            cutoffs: vec![8.0, 16.0, 32.0, 64.0, 128.0, 256.0],
            eps: 0.1,
            data: "both".into(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct StrichartzSummary {
    eps: f64,
    random_spread: Option<f64>,
    coherent_spread: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct StrichartzRow {
    cutoff: f64,
    data: &'static str,
    l4: f64,
    h_eps: f64,
    ratio: f64,
    time_nodes: usize,
}

pub fn strichartz(ctx: &Context, p: &StrichartzParams) -> Result<Run<StrichartzSummary>> {
    positive("eps", p.eps)?;
    let kinds: &[&'static str] = match p.data.as_str() {
        "both" => &["random", "coherent"],
        "random" => &["random"],
        "coherent" => &["coherent"],
        other => bail!("unknown data {other:?} (random, coherent, both)"),
    };
    let top = p.cutoffs.iter().copied().fold(0.0, f64::max);
    let mut caches = Vec::new();
    let b = basis_for(ctx, flow::truncation_size(top), 4, &mut caches)?;
    let lambdas = b.lambdas();
    let mut rows = Vec::new();
    for &kind in kinds {
        for &n in &p.cutoffs {
            let f = if kind == "random" {
                gibbs::gff_from_lambdas(&lambdas, n, ctx.seed).field
            } else {
                norms::coherent_data(&lambdas, n)
            };
            let v = norms::strichartz_ratio(&b, &f, p.eps)?;
            rows.push(StrichartzRow {
                cutoff: n,
                data: kind,
                l4: v.l4,
                h_eps: v.h_eps,
                ratio: v.ratio,
                time_nodes: v.time_nodes,
            });
        }
    }
    let spread_of = |kind: &str| {
        let r: Vec<f64> = rows.iter().filter(|r| r.data == kind).map(|r| r.ratio).collect();
        (!r.is_empty()).then(|| spread(&r))
    };
    Run::new(
        StrichartzSummary {
            eps: p.eps,
            random_spread: spread_of("random"),
            coherent_spread: spread_of("coherent"),
        },
        &rows,
        caches,
    )
}

// ---------------------------------------------------------------- scaling-report

#[derive(Debug, Args, Serialize)]
pub struct ScalingFlags {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long = "N")]
    n_bound: Option<f64>,
    /// Measure the counting proxy (brute force, N <= 32).
    #[arg(long)]
    proxy: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingParams {
    pub k: usize,
    pub n_bound: f64,
    pub proxy: bool,
}

impl Default for ScalingParams {
    fn default() -> Self {
        Self {
            k: 2,
            n_bound: 16.0,
            proxy: true,
        }
    }
}

pub fn scaling_report(ctx: &Context, p: &ScalingParams) -> Result<Run<counting::ScalingReport>> {
    positive("N", p.n_bound)?;
    let mut caches = Vec::new();
    let report = if p.proxy {
        let b = basis_for(ctx, flow::truncation_size(p.n_bound), 2 * p.k + 2, &mut caches)?;
        counting::scaling_report(Some(&b), p.k, p.n_bound)?
    } else {
        counting::scaling_report(None, p.k, p.n_bound)?
    };
    let rows = vec![report.clone()];
    Run::new(report, &rows, caches)
}
