//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach the terminal.
//! Pass criterion numbers to run a subset: `cargo test --test acceptance -- 4 7`.
//! The process fails when a criterion outside `KNOWN_FAILURES` fails.

use std::f64::consts::PI;
use std::time::Instant;

use disc_nls::bessel::j0_zeros;
use disc_nls::counting::{
    base_tensor_count, base_tensor_sup_hs_norm, count_diff_pairs, count_sum_pairs, divisor_count,
    eigenvalue_squares, worst_case_diff_pairs, BaseTensorSpec, IndexBox, TupleConstraint, DEFAULT_CEILING,
};
use disc_nls::flow::{evolve, flow_property_check, truncation_size, FlowConfig};
use disc_nls::gibbs::{derive_seed, gff_from_lambdas, gff_sobolev_means, invariance_test, GibbsConfig, Observable};
use disc_nls::norms::{coherent_data, eigenfunction_growth, spread, strichartz_ratio};
use disc_nls::rro::{ansatz_scaling, decompose_ensemble, law_invariance_report, AnsatzConfig};
use disc_nls::{Complex64, SpectralBasis, SpectralField};

/// Criteria whose failure is understood and recorded; they still print FAIL.
const KNOWN_FAILURES: &[u32] = &[9];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Check = fn() -> Outcome;

const CRITERIA: &[(u32, &str, Check)] = &[
    (1, "eigenvalue asymptotics", eigenvalue_asymptotics),
    (2, "orthonormality", orthonormality),
    (3, "eigenfunction growth", eigenfunction_growth_spreads),
    (4, "conservation", conservation),
    (5, "single-mode exact solution", single_mode),
    (6, "flow property", flow_property),
    (7, "truncated Gibbs invariance", gibbs_invariance),
    (8, "RRO unitarity and law invariance", rro_law),
    (9, "remainder smoothing trend", remainder_trend),
    (10, "counting oracle equivalence", counting_oracles),
    (11, "Strichartz boundedness", strichartz_bounded),
    (12, "regularity thresholds", regularity_thresholds),
];

fn main() {
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut unexpected = Vec::new();
    for &(id, name, check) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let out = check();
        let secs = start.elapsed().as_secs_f64();
        let known = KNOWN_FAILURES.contains(&id);
        let verdict = match (out.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {id:>2} {verdict}: {name}: {} [{secs:.1} s]", out.detail);
        if !out.pass && !known {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}

fn gff(lambdas: &[f64], cutoff: f64, seed: u64) -> SpectralField {
    gff_from_lambdas(lambdas, cutoff, seed).field
}

fn scaled(f: &SpectralField, a: f64) -> SpectralField {
    f.scale(Complex64::new(a, 0.0))
}

// 1. n |lambda_n - pi (n - 1/4)| <= 0.05 for 10 <= n <= 2000, with a few
// tabulated zeros as an absolute anchor.
fn eigenvalue_asymptotics() -> Outcome {
    let z = j0_zeros(2000);
    let table = [2.404_825_557_695_773, 5.520_078_110_286_311, 8.653_727_912_911_013, 11.791_534_439_014_281];
    let anchor = table.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let worst = (10..=2000)
        .map(|n| n as f64 * (z[n - 1] - PI * (n as f64 - 0.25)).abs())
        .fold(0.0, f64::max);
    outcome(
        worst <= 0.05 && anchor <= 1e-12,
        format!("max n|dev| = {worst:.5} (<= 0.05), table error {anchor:.1e}"),
    )
}

// 2. ||Gram - I||_max <= 1e-10 at 64 modes.
fn orthonormality() -> Outcome {
    let b = SpectralBasis::build(64, 4).unwrap();
    let d = b.orthonormality_defect();
    outcome(d <= 1e-10, format!("defect {d:.2e} (<= 1e-10), {} nodes", b.node_count()))
}

// 3. max/min of ||e_n||_inf / n^{1/2} and ||e_n||_4 / log(1+n)^{1/4} over
// dyadic n in 16..=512, each <= 2.5.
fn eigenfunction_growth_spreads() -> Outcome {
    let b = SpectralBasis::build(512, 4).unwrap();
    let idx = [16, 32, 64, 128, 256, 512];
    let rows = eigenfunction_growth(&b, &idx).unwrap();
    // e_n(0) = 1 / (sqrt(pi) |J_1(lambda_n)|) is the sup; check it against the sup norm
    let sup_gap = rows
        .iter()
        .map(|r| (r.linf - b.modes[r.n - 1].eval(0.0)).abs() / r.linf)
        .fold(0.0, f64::max);
    let s_inf = spread(&rows.iter().map(|r| r.linf_ratio).collect::<Vec<_>>());
    let s_4 = spread(&rows.iter().map(|r| r.l4_ratio).collect::<Vec<_>>());
    outcome(
        s_inf <= 2.5 && s_4 <= 2.5 && sup_gap <= 1e-9,
        format!("L^inf spread {s_inf:.3}, L^4 spread {s_4:.3} (<= 2.5)"),
    )
}

// 4. k=1, N=32, T=1, dt=1e-3: relative drift of M and H <= 1e-6.
fn conservation() -> Outcome {
    let n = 32.0;
    let b = SpectralBasis::build(truncation_size(n), 4).unwrap();
    let u0 = gff(&b.lambdas(), n, 1);
    let cfg = FlowConfig::new(1, n).with_dt(1e-3).with_samples(20);
    let (md, hd) = evolve(&b, &u0, 1.0, &cfg).unwrap().max_drift();
    outcome(md <= 1e-6 && hd <= 1e-6, format!("mass drift {md:.2e}, energy drift {hd:.2e} (<= 1e-6)"))
}

/// `int_D e_1^p` by composite Simpson in `r` with the closed-form mode.
fn mode_one_moment(p: i32) -> f64 {
    let e1 = disc_nls::EigenMode::new(1);
    let m = 20_000;
    let h = 1.0 / m as f64;
    let f = |r: f64| 2.0 * PI * r * e1.eval(r).powi(p);
    let mut s = f(0.0) + f(1.0);
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0
}

// 5. One retained mode: a(t) = a0 exp(-i (lambda^2 + c_k |a0|^{2k}) t) with
// c_k = int e_1^{2k+2}.
fn single_mode() -> Outcome {
    let b = SpectralBasis::build(1, 6).unwrap();
    let l2 = b.lambda(1).powi(2);
    let a = Complex64::new(0.8, 0.5);
    let u0 = SpectralField::new(vec![a], 4.0);
    let mut worst: f64 = 0.0;
    for k in [1usize, 2] {
        let c = mode_one_moment(2 * k as i32 + 2);
        let got = evolve(&b, &u0, 1.0, &FlowConfig::new(k, 4.0)).unwrap().last().coeff(1);
        let want = a * Complex64::from_polar(1.0, -(l2 + c * a.norm_sqr().powi(k as i32)));
        worst = worst.max((got - want).norm());
    }
    outcome(worst <= 1e-8, format!("max error {worst:.2e} over k = 1, 2 (<= 1e-8)"))
}

// 6. ||Phi_.25 Phi_.25 u0 - Phi_.5 u0|| <= 1e-7 at N=16, k=1. The
// convergence ratio under dt halving is measured on amplitude-3 data so the
// deviation sits well above rounding; RK4 promises 16x, pinned at >= 16/sqrt 2.
fn flow_property() -> Outcome {
    let n = 16.0;
    let b = SpectralBasis::build(truncation_size(n), 4).unwrap();
    let u0 = gff(&b.lambdas(), n, 1);
    let cfg = FlowConfig::new(1, n);
    let dev = flow_property_check(&b, &u0, 0.25, 0.25, &cfg).unwrap();
    let big = scaled(&u0, 3.0);
    let coarse = flow_property_check(&b, &big, 0.25, 0.25, &cfg.clone().with_dt(7e-4)).unwrap();
    let fine = flow_property_check(&b, &big, 0.25, 0.25, &cfg.clone().with_dt(3.5e-4)).unwrap();
    let ratio = coarse / fine;
    outcome(
        dev <= 1e-7 && ratio >= 16.0 / 2f64.sqrt(),
        format!(
            "deviation {dev:.2e} (<= 1e-7); amplitude 3: {coarse:.2e} -> {fine:.2e}, ratio {ratio:.1} (>= 11.3, order {:.2})",
            ratio.log2()
        ),
    )
}

// 7. N=16, k=1, 4000 samples, t=0.5: |z| <= 3 for |u_1|^2, |u_2|^2, |u_3|^2,
// Re u_1, at two seeds.
fn gibbs_invariance() -> Outcome {
    let n = 16.0;
    let b = SpectralBasis::build(truncation_size(n), 4).unwrap();
    let obs = [Observable::ModeSq(1), Observable::ModeSq(2), Observable::ModeSq(3), Observable::ModeRe(1)];
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in [7, 8] {
        let r = invariance_test(&b, &GibbsConfig::new(1, n), &FlowConfig::new(1, n), 0.5, 4000, &obs, seed).unwrap();
        let z = r.max_abs_z();
        pass &= z <= 3.0;
        let zs: Vec<String> = r.scores.iter().map(|s| format!("{:.2}", s.z)).collect();
        parts.push(format!("seed {seed}: z = [{}] max {z:.3}", zs.join(", ")));
    }
    outcome(pass && b.mode_count() == 5, format!("{} (<= 3)", parts.join("; ")))
}

// 8. |H_n| - 1 <= 1e-15; 1000 seeds at t=0.5: E|psi_n|^2 within 3 sigma of
// 1/(pi lambda_n)^2 and corr(Theta_n, Re g_n) within 3 sigma of 0.
fn rro_law() -> Outcome {
    let n = 16.0;
    let b = SpectralBasis::build(truncation_size(n), 4).unwrap();
    let lambdas = j0_zeros(truncation_size(n));
    let seeds: Vec<u64> = (0..1000).map(|i| derive_seed(0, i)).collect();
    let cfg = AnsatzConfig::new(1, 0.5, n);
    let ds = decompose_ensemble(&b, &seeds, n, &cfg).unwrap();
    let unitary = ds.iter().map(|d| d.phases.unitarity_defect()).fold(0.0, f64::max);
    let last = ds[0].times.len() - 1;
    let rep = law_invariance_report(&b.lambdas(), &ds, last).unwrap();
    let mut worst_moment: f64 = 0.0;
    let mut worst_corr: f64 = 0.0;
    let mut oracle_gap: f64 = 0.0;
    for m in &rep.modes {
        let expected = 1.0 / (PI * lambdas[m.n - 1]).powi(2);
        oracle_gap = oracle_gap.max((m.expected - expected).abs() / expected);
        worst_moment = worst_moment.max((m.second_moment - expected).abs() / m.stderr);
        worst_corr = worst_corr.max(m.corr_theta_re_g.abs() / m.corr_stderr);
    }
    outcome(
        unitary <= 1e-15 && worst_moment <= 3.0 && worst_corr <= 3.0 && oracle_gap <= 1e-12,
        format!(
            "unitarity {unitary:.1e} (<= 1e-15); t = {}: moment dev {worst_moment:.2} sigma, corr {worst_corr:.2} sigma (<= 3) over modes {:?}",
            rep.time,
            rep.modes.iter().map(|m| m.n).collect::<Vec<_>>()
        ),
    )
}

// 9. k=2, N in {8,16,32,64}, 50 seeds, T=0.3: slope of log E||z_N|| <= -0.75,
// slope of log E||y_N|| in [-0.65, -0.35].
fn remainder_trend() -> Outcome {
    let cutoffs = [8.0, 16.0, 32.0, 64.0];
    let b = SpectralBasis::build(truncation_size(64.0), 6).unwrap();
    let seeds: Vec<u64> = (0..50).map(|i| derive_seed(0, i)).collect();
    let s = ansatz_scaling(&b, &cutoffs, &seeds, &AnsatzConfig::new(2, 0.3, 64.0)).unwrap();
    // independent least-squares slope
    let slope = |ys: Vec<f64>| {
        let xs: Vec<f64> = cutoffs.iter().map(|c: &f64| c.ln()).collect();
        let ys: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
        let mx = xs.iter().sum::<f64>() / 4.0;
        let my = ys.iter().sum::<f64>() / 4.0;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        sxy / sxx
    };
    let sy = slope(s.rows.iter().map(|r| r.mean_y_l2).collect());
    let sz = slope(s.rows.iter().map(|r| r.mean_z_l2).collect());
    let consistent = (sy - s.slope_y).abs() < 1e-12 && (sz - s.slope_z).abs() < 1e-12;
    let zs: Vec<String> = s.rows.iter().map(|r| format!("{:.2e}", r.mean_z_l2)).collect();
    outcome(
        consistent && sz <= -0.75 && (-0.65..=-0.35).contains(&sy),
        format!("slope_y {sy:.3} (in [-0.65, -0.35]), slope_z {sz:.3} (<= -0.75); E||z_N|| = [{}]", zs.join(", ")),
    )
}

fn brute_diff(sq: &[f64], m: f64, b: &IndexBox, exclude_diagonal: bool) -> u64 {
    let mut c = 0;
    for i in b.first.0..=b.first.1 {
        for j in b.second.0..=b.second.1 {
            if exclude_diagonal && i == j {
                continue;
            }
            if (sq[i - 1] - sq[j - 1] - m).abs() < 1.0 {
                c += 1;
            }
        }
    }
    c
}

fn brute_sum(sq: &[f64], m: f64, b: &IndexBox) -> u64 {
    let mut c = 0;
    for i in b.first.0..=b.first.1 {
        for j in b.second.0..=b.second.1 {
            if (sq[i - 1] + sq[j - 1] - m).abs() < 1.0 {
                c += 1;
            }
        }
    }
    c
}

fn brute_divisors(m: i64, a0: i64, b0: i64, ma: i64, nb: i64) -> u64 {
    let mut c = 0;
    for a in a0 - ma..=a0 + ma {
        if a != 0 && m % a == 0 && (m / a - b0).abs() <= nb {
            c += 1;
        }
    }
    c
}

/// Tuples `(n, n1, n2, n3)` in the box with floor(Phi) = m, per bucket.
fn brute_cubic(lambdas: &[f64], n_bound: f64, bounds: &[f64; 3], keep: impl Fn([usize; 4]) -> bool) -> std::collections::BTreeMap<i64, u64> {
    let below = |b: f64| lambdas.iter().filter(|&&l| l <= b).count();
    let sq = |i: usize| lambdas[i - 1] * lambdas[i - 1];
    let mut hist = std::collections::BTreeMap::new();
    for n in 1..=below(n_bound) {
        for n1 in 1..=below(bounds[0]) {
            for n2 in 1..=below(bounds[1]) {
                for n3 in 1..=below(bounds[2]) {
                    if keep([n, n1, n2, n3]) {
                        let phi = sq(n) - sq(n1) + sq(n2) - sq(n3);
                        *hist.entry(phi.floor() as i64).or_insert(0) += 1;
                    }
                }
            }
        }
    }
    hist
}

// 10. Counting routines equal brute force for R <= 64 and bounds <= 32;
// worst-case difference-pair counts grow by <= 2x per octave, R = 128..1024.
fn counting_oracles() -> Outcome {
    let sq = eigenvalue_squares(1024);
    let mut mismatches = Vec::new();

    for r in [8usize, 32, 64] {
        let boxes = [IndexBox::square(r), IndexBox { first: (r / 4, r), second: (1, r / 2) }];
        for b in &boxes {
            for m in (-600..=600).step_by(37).map(|m| m as f64).chain([0.0, 0.5, -17.25]) {
                for ex in [false, true] {
                    if count_diff_pairs(&sq, m, b, ex).unwrap() != brute_diff(&sq, m, b, ex) {
                        mismatches.push(format!("diff r={r} m={m}"));
                    }
                }
                let ms = m.abs() * 3.0;
                if count_sum_pairs(&sq, ms, b).unwrap() != brute_sum(&sq, ms, b) {
                    mismatches.push(format!("sum r={r} m={ms}"));
                }
            }
        }
        // worst case against a sweep of every integer m
        let got = worst_case_diff_pairs(&sq, r, true).unwrap();
        let span = sq[r - 1].ceil() as i64 + 1;
        let mut best = (0i64, 0u64);
        for m in -span..=span {
            let c = brute_diff(&sq, m as f64, &IndexBox::square(r), true);
            if c > best.1 {
                best = (m, c);
            }
        }
        if (got.m, got.count) != best {
            mismatches.push(format!("worst r={r}: {:?} vs {best:?}", (got.m, got.count)));
        }
    }

    for (m, a0, b0, ma, nb) in [(360i64, 10i64, 30i64, 40u64, 40u64), (-84, -3, 20, 10, 50), (97, 0, 0, 100, 100), (1, 1, 1, 0, 0), (720720, 100, 7000, 80, 300)] {
        if divisor_count(m, a0, b0, ma, nb).unwrap() != brute_divisors(m, a0, b0, ma as i64, nb as i64) {
            mismatches.push(format!("divisor m={m}"));
        }
    }

    let lambdas = j0_zeros(truncation_size(DEFAULT_CEILING) + 1);
    let unpaired = |t: [usize; 4]| {
        // signs: n and n2 negative, n1 and n3 positive
        ![t[0], t[2]].iter().any(|x| *x == t[1] || *x == t[3])
    };
    for (nb, bounds) in [(8.0, [8.0, 8.0, 8.0]), (16.0, [8.0, 16.0, 32.0]), (32.0, [16.0, 8.0, 16.0])] {
        let all = brute_cubic(&lambdas, nb, &bounds, |_| true);
        let free = brute_cubic(&lambdas, nb, &bounds, unpaired);
        let not_odd_max = brute_cubic(&lambdas, nb, &bounds, |t| t[0] != t[1].max(t[3]));
        for &m in all.keys().step_by(7).chain([&-3, &0, &1]) {
            let spec = BaseTensorSpec::new(nb, bounds.to_vec(), m);
            let cases = [
                (TupleConstraint::None, &all),
                (TupleConstraint::NoPairing, &free),
                (TupleConstraint::NotOddMax, &not_odd_max),
            ];
            for (c, oracle) in cases {
                let name = c.name();
                let got = base_tensor_count(&lambdas, &spec.clone().with_constraint(c), DEFAULT_CEILING).unwrap();
                if got != oracle.get(&m).copied().unwrap_or(0) {
                    mismatches.push(format!("tensor {name} N={nb} {bounds:?} m={m}"));
                }
            }
        }
        let (bm, bc) = all.iter().fold((0i64, 0u64), |acc, (&m, &c)| if c > acc.1 { (m, c) } else { acc });
        let (m, hs) = base_tensor_sup_hs_norm(&lambdas, &BaseTensorSpec::new(nb, bounds.to_vec(), 0), DEFAULT_CEILING).unwrap();
        if m != bm || hs != (bc as f64).sqrt() {
            mismatches.push(format!("sup N={nb}"));
        }
    }

    let counts: Vec<u64> = [128, 256, 512, 1024].iter().map(|&r| worst_case_diff_pairs(&sq, r, true).unwrap().count).collect();
    let growth: Vec<f64> = counts.windows(2).map(|w| w[1] as f64 / w[0] as f64).collect();
    let growth_ok = growth.iter().all(|&g| g <= 2.0);
    let shown: Vec<String> = growth.iter().map(|g| format!("{g:.3}")).collect();
    outcome(
        mismatches.is_empty() && growth_ok,
        format!(
            "{} oracle mismatches{}; worst-case counts {counts:?}, octave growth [{}] (<= 2)",
            mismatches.len(),
            mismatches.first().map(|m| format!(" (first: {m})")).unwrap_or_default(),
            shown.join(", ")
        ),
    )
}

// 11. L^4 Strichartz ratio max/min <= 5 over N = 8..256, random and
// coherent data, eps = 0.1.
fn strichartz_bounded() -> Outcome {
    let cutoffs = [8.0, 16.0, 32.0, 64.0, 128.0, 256.0];
    let b = SpectralBasis::build(truncation_size(256.0), 4).unwrap();
    let lambdas = b.lambdas();
    let ratios = |data: &dyn Fn(f64) -> SpectralField| -> Vec<f64> {
        cutoffs.iter().map(|&n| strichartz_ratio(&b, &data(n), 0.1).unwrap().ratio).collect()
    };
    let random = spread(&ratios(&|n| gff(&lambdas, n, 0)));
    let coherent = spread(&ratios(&|n| coherent_data(&lambdas, n)));
    outcome(
        random <= 5.0 && coherent <= 5.0,
        format!("spread random {random:.3}, coherent {coherent:.3} (<= 5)"),
    )
}

// 12. Ensemble mean of ||P_N u0||_{H^0.4} has max/min <= 2 over N = 8..128
// while H^0.6 strictly increases.
fn regularity_thresholds() -> Outcome {
    let cutoffs = [8.0, 16.0, 32.0, 64.0, 128.0];
    let lambdas = j0_zeros(truncation_size(128.0));
    let samples = 200;
    let means = gff_sobolev_means(&lambdas, &cutoffs, &[0.4, 0.6], samples, 0);
    // oracle straight from the Gaussians: sum lambda^{2s} |g|^2 / (pi lambda)^2
    let mut oracle = vec![[0.0f64; 2]; cutoffs.len()];
    for i in 0..samples {
        let g = gff_from_lambdas(&lambdas, 128.0, derive_seed(0, i as u64)).gaussians;
        for (ci, &c) in cutoffs.iter().enumerate() {
            for (si, s) in [0.4f64, 0.6].iter().enumerate() {
                let v: f64 = g
                    .iter()
                    .zip(&lambdas)
                    .filter(|(_, &l)| l <= c)
                    .map(|(g, l)| l.powf(2.0 * s) * g.norm_sqr() / (PI * l).powi(2))
                    .sum();
                oracle[ci][si] += v.sqrt() / samples as f64;
            }
        }
    }
    let gap = means
        .iter()
        .zip(&oracle)
        .flat_map(|(m, o)| m.iter().zip(o).map(|(a, b)| (a - b).abs() / b))
        .fold(0.0, f64::max);
    let h04: Vec<f64> = means.iter().map(|r| r[0]).collect();
    let h06: Vec<f64> = means.iter().map(|r| r[1]).collect();
    let s04 = spread(&h04);
    let increasing = h06.windows(2).all(|w| w[1] > w[0]);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ");
    outcome(
        s04 <= 2.0 && increasing && gap <= 1e-10,
        format!("H^0.4 means [{}] spread {s04:.3} (<= 2); H^0.6 means [{}] increasing: {increasing}", fmt(&h04), fmt(&h06)),
    )
}
