//! Walk-functional limit checks that go through the experiment surface.

use num_complex::Complex64;
use stickperm::experiment::{run, ExperimentConfig, ExperimentKind, ExperimentResult};
use stickperm::limits::gof;

#[test]
fn integrated_functional_cf_matches_levy_time_average() {
    // With a Brownian limit for the counting deviation, the integrated
    // process has CF exp(-u^2/6); the empirical CF of I(x)/(x c(x)) at
    // moderate frequencies must land within 0.05 of it.
    let mut cfg = ExperimentConfig::new("beta:1,1", ExperimentKind::Walk);
    cfg.case = Some("a".parse().unwrap());
    cfg.grid = vec![10_000];
    cfg.reps = 2_000;
    cfg.seed = 77;
    let rows = match run(&cfg).unwrap() {
        ExperimentResult::Walk(rows) => rows,
        _ => unreachable!(),
    };
    let i_norm: Vec<f64> = rows.iter().map(|r| r.i_norm).collect();
    let target = |u: f64| Complex64::new((-u * u / 6.0).exp(), 0.0);
    let d = gof::ecf_distance(&i_norm, target, &[-1.0, -0.5, 0.5, 1.0]).unwrap();
    assert!(d <= 0.05, "ecf distance = {d}");
}

#[test]
fn walk_csv_round_trip() {
    let mut cfg = ExperimentConfig::new("beta:1,1", ExperimentKind::Walk);
    cfg.case = Some("a".parse().unwrap());
    cfg.grid = vec![10, 100];
    cfg.reps = 5;
    cfg.seed = 3;
    let result = run(&cfg).unwrap();
    assert_eq!(result.row_count(), 10);
    let csv = result.to_csv_string().unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,replicate,rho,N,M,I_norm,J_norm"));
    assert_eq!(csv.lines().count(), 11);
    // N <= rho on every emitted row
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let rho: u64 = f[2].parse().unwrap();
        let n: u64 = f[3].parse().unwrap();
        assert!(n <= rho);
    }
}
