//! Acceptance suite. Each test prints one PASS/FAIL line (visible with
//! `cargo test --test acceptance -- --nocapture`) and asserts the criterion
//! at its stated tolerance. Tolerances are fixed here, not tuned at runtime.

use std::collections::BTreeMap;

use statrs::function::gamma::ln_gamma;
use stickperm::cycle_stats;
use stickperm::experiment::{
    self, max_ecf_distance, ExperimentConfig, ExperimentKind, ExperimentResult,
};
use stickperm::factor::FactorModel;
use stickperm::limits::gof;
use stickperm::numeric::{kahan_sum, mean_variance};
use stickperm::partition::{exact_partition_law, sample_partition_thinning};
use stickperm::rng::replicate_rng;

fn report(criterion: &str, pass: bool, detail: &str) {
    println!("criterion {criterion}: {} -- {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn config(model: &str, kind: ExperimentKind, grid: &[u64], reps: u64, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(model, kind);
    cfg.grid = grid.to_vec();
    cfg.reps = reps;
    cfg.seed = seed;
    cfg
}

// 1. Exact-oracle equivalence: all three samplers pass chi-square against
//    the exact partition law at p > 1e-3.
#[test]
fn c01_exact_oracle_equivalence() {
    let mut worst = f64::INFINITY;
    let mut detail = String::new();
    for model in ["beta:1,1", "beta:2,1"] {
        let cfg = config(model, ExperimentKind::ExactOracle, &[5, 9], 100_000, 101);
        let rows = match experiment::run(&cfg).unwrap() {
            ExperimentResult::ExactOracle(rows) => rows,
            _ => unreachable!(),
        };
        for r in rows {
            if r.p_value < worst {
                worst = r.p_value;
                detail = format!("min p = {:.4} ({model}, n = {}, {})", r.p_value, r.n, r.sampler);
            }
        }
    }
    report("1 (exact-oracle equivalence)", worst > 1e-3, &detail);
}

/// Ewens sampling formula by exhaustive enumeration of S_n via Heap's
/// algorithm: tally cycle types weighted by theta^{#cycles}.
fn ewens_by_enumeration(n: usize, theta: f64) -> BTreeMap<Vec<u32>, f64> {
    let mut table: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    let mut tally = |perm: &[usize]| {
        let mut seen = vec![false; n];
        let mut lengths = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut len = 0u32;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = perm[i];
                len += 1;
            }
            lengths.push(len);
        }
        lengths.sort_unstable_by(|a, b| b.cmp(a));
        let k = lengths.len() as i32;
        *table.entry(lengths).or_insert(0.0) += theta.powi(k);
    };
    tally(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            tally(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    let rising = (ln_gamma(theta + n as f64) - ln_gamma(theta)).exp();
    table.values_mut().for_each(|v| *v /= rising);
    table
}

// 2. Exact law equals the Ewens sampling formula entrywise within 1e-9.
#[test]
fn c02_ewens_specialization() {
    let mut worst = 0.0f64;
    for &theta in &[0.5, 1.0, 2.0] {
        let model = FactorModel::beta(theta, 1.0).unwrap();
        for n in 1..=8u64 {
            let law = exact_partition_law(&model, n).unwrap();
            let esf = ewens_by_enumeration(n as usize, theta);
            assert_eq!(law.len(), esf.len());
            for (parts, p) in &esf {
                worst = worst.max((law.prob(parts) - p).abs());
            }
        }
    }
    report(
        "2 (Ewens specialization)",
        worst < 1e-9,
        &format!("max entrywise deviation = {worst:.2e}"),
    );
}

// 3. Prime-power identity within 1e-9 nats on every replicate, with the
//    big-integer lcm cross-check engaged at this scale.
#[test]
fn c03_pittel_identity() {
    let mut worst = 0.0f64;
    for model in ["beta:1,1", "paretolog:1.5"] {
        let cfg = config(model, ExperimentKind::EtClt, &[1_000, 10_000], 10_000, 103);
        let rep = experiment::verify_identity(&cfg).unwrap();
        assert!(rep.rows.iter().all(|r| r.bigint_checked));
        worst = worst.max(rep.rows.iter().map(|r| r.max_residual).fold(0.0, f64::max));
    }
    report("3 (Pittel identity)", worst <= 1e-9, &format!("max residual = {worst:.2e}"));
}

// 4. Empirical mean of log T at theta = 1, n = 1e4 within 3 SE of the exact
//    expectation sum over r of log r / r.
#[test]
fn c04_ewens_mean_oracle() {
    let n = 10_000u64;
    let reps = 100_000u64;
    let model = FactorModel::beta(1.0, 1.0).unwrap();
    let exact = kahan_sum((1..=n).map(|r| (r as f64).ln() / r as f64));
    let samples: Vec<f64> = (0..reps)
        .map(|i| {
            let mut rng = replicate_rng(104, 0, i);
            cycle_stats::log_t(&sample_partition_thinning(&model, n, &mut rng))
        })
        .collect();
    let (mean, var) = mean_variance(&samples);
    let se = (var / reps as f64).sqrt();
    report(
        "4 (Ewens mean oracle)",
        (mean - exact).abs() <= 3.0 * se,
        &format!("mean {mean:.4} vs exact {exact:.4} (3se = {:.4})", 3.0 * se),
    );
}

// 5. Limit-theorem shape for log T: affine KS at n = 1e8 within 0.06, the
//    (b_n, a_n)-standardized mean in [-0.5, 0.6] and variance in [0.7, 1.3],
//    and the standardized KS column nonincreasing along the n-grid.
#[test]
fn c05_erdos_turan_shape() {
    let mut cfg = config(
        "beta:1,1",
        ExperimentKind::EtClt,
        &[10_000, 1_000_000, 100_000_000],
        10_000,
        105,
    );
    cfg.case = Some("a".parse().unwrap());
    let rows = match experiment::run(&cfg).unwrap() {
        ExperimentResult::EtClt(rows) => rows,
        _ => unreachable!(),
    };
    let last = rows.last().unwrap();
    let ks_nonincreasing = rows.windows(2).all(|w| w[1].t_ks_std <= w[0].t_ks_std);
    let pass = last.t_ks_affine <= 0.06
        && (-0.5..=0.6).contains(&last.t_mean_std)
        && (0.7..=1.3).contains(&last.t_var_std)
        && ks_nonincreasing;
    report(
        "5 (limit shape for log T)",
        pass,
        &format!(
            "n=1e8: affine KS {:.4}, mean {:.3}, var {:.3}; KS column {:?}",
            last.t_ks_affine,
            last.t_mean_std,
            last.t_var_std,
            rows.iter().map(|r| (r.t_ks_std * 1e3).round() / 1e3).collect::<Vec<_>>()
        ),
    );
}

// 6 + 8. One walk run serves the Gaussian-functional windows at x = 1e4 and
//        the decay of E(N - M)^2 / x along the x-grid.
#[test]
fn c06_c08_walk_gaussian_and_smoothing() {
    let mut cfg = config("beta:1,1", ExperimentKind::Walk, &[100, 1_000, 10_000], 10_000, 106);
    cfg.case = Some("a".parse().unwrap());
    let rows = match experiment::run(&cfg).unwrap() {
        ExperimentResult::Walk(rows) => rows,
        _ => unreachable!(),
    };

    let at = |x: u64| rows.iter().filter(move |r| r.x == x);
    let j: Vec<f64> = at(10_000).map(|r| r.j_norm).collect();
    let i: Vec<f64> = at(10_000).map(|r| r.i_norm).collect();
    let (_, var_j) = mean_variance(&j);
    let (_, var_i) = mean_variance(&i);
    // J/(x c(x)) targets N(0, 1/3); scale by sqrt(3) for the standard normal
    let j_std: Vec<f64> = j.iter().map(|v| v * 3f64.sqrt()).collect();
    let ks_j = gof::ks_statistic(&j_std, gof::normal_cdf).unwrap();
    let pass6 = (0.30..=0.37).contains(&var_j) && (0.30..=0.37).contains(&var_i) && ks_j <= 0.03;
    report(
        "6 (walk Gaussian limit)",
        pass6,
        &format!("var J {var_j:.4}, var I {var_i:.4}, KS(J vs N(0,1/3)) {ks_j:.4}"),
    );

    let nm_ratio = |x: u64| {
        let sq: Vec<f64> =
            at(x).map(|r| (r.n_count as f64 - r.m_smooth).powi(2)).collect();
        kahan_sum(sq.iter().copied()) / sq.len() as f64 / x as f64
    };
    let (r1, r2, r3) = (nm_ratio(100), nm_ratio(1_000), nm_ratio(10_000));
    report(
        "8 (conditional-smoothing decay)",
        r1 > r2 && r2 > r3,
        &format!("E(N-M)^2/x = {r1:.5}, {r2:.6}, {r3:.7}"),
    );
}

// 7. Empirical CF of the centered-scaled heavy-tailed sums within 0.05 of
//    the stable characteristic function on the +/- frequency grid.
#[test]
fn c07_stable_input_law() {
    let cfg = config("paretolog:1.5", ExperimentKind::StableInput, &[100_000], 10_000, 107);
    let rows = match experiment::run(&cfg).unwrap() {
        ExperimentResult::StableInput(rows) => rows,
        _ => unreachable!(),
    };
    let d = max_ecf_distance(&rows, 100_000);
    report("7 (stable input law)", d <= 0.05, &format!("max ecf distance = {d:.4}"));
}

// 9. Poissonization: f_1(t) - log t inside [p(t), 1/t] on the t-grid, and
//    the empirical lower tail below the deviation bound at t = 1e4.
#[test]
fn c09_poissonization_bounds() {
    let cfg = config("beta:1,1", ExperimentKind::Poisson, &[10, 100, 1_000, 10_000], 1_000_000, 109);
    let rows = match experiment::run(&cfg).unwrap() {
        ExperimentResult::Poisson(rows) => rows,
        _ => unreachable!(),
    };
    let bounds_ok = rows
        .iter()
        .filter(|r| r.t <= 1_000)
        .all(|r| r.lower_p <= r.f1_minus_log_t && r.f1_minus_log_t <= r.upper_bound);
    let tail = rows.iter().find(|r| r.t == 10_000).unwrap();
    let tail_ok = tail.empirical_tail <= tail.q_bound;
    report(
        "9 (poissonization bounds)",
        bounds_ok && tail_ok,
        &format!(
            "bounds {}, tail {:e} <= q {:e}",
            bounds_ok, tail.empirical_tail, tail.q_bound
        ),
    );
}

// 10. The divisibility bound's max over k grows by at most 5% from n = 100
//     to n = 400.
#[test]
fn c10_divisibility_boundedness() {
    let model = FactorModel::beta(2.0, 1.0).unwrap();
    let max_at = |n: u64| {
        let row = stickperm::partition::decrement_pmf(&model, n).unwrap();
        (1..=n)
            .map(|k| stickperm::partition::divisibility_bound_row(&row, k))
            .fold(0.0f64, f64::max)
    };
    let (m100, m400) = (max_at(100), max_at(400));
    report(
        "10 (divisibility boundedness)",
        m400 <= 1.05 * m100,
        &format!("max at n=100: {m100:.6}, at n=400: {m400:.6}"),
    );
}

// 11. Byte-identical CSV under reruns and different worker counts.
#[test]
fn c11_determinism() {
    let mut cfg = config("beta:1,1", ExperimentKind::EtClt, &[100, 1_000], 300, 111);
    cfg.case = Some("a".parse().unwrap());
    cfg.workers = 1;
    let one = experiment::run(&cfg).unwrap().to_csv_string().unwrap();
    let one_again = experiment::run(&cfg).unwrap().to_csv_string().unwrap();
    cfg.workers = 8;
    let eight = experiment::run(&cfg).unwrap().to_csv_string().unwrap();
    let pass = one == one_again && one == eight;
    report(
        "11 (determinism)",
        pass,
        &format!("{} bytes, 1-worker rerun identical: {}, 8-worker identical: {}",
            one.len(), one == one_again, one == eight),
    );
}
