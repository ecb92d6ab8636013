//! Perturbed random walks driven by one stick factor per step: increments
//! xi = |log W| with perturbations eta = |log(1-W)| (a dependent pair),
//! counting processes, exactly integrated centered functionals, and the
//! poissonized occupancy quantities.

use crate::error::{Error, Result};
use crate::factor::FactorModel;
use crate::numeric::KahanSum;
use crate::partition::sample_partition_thinning;
use rand::Rng;
use rand_distr::Distribution;
use statrs::function::gamma::ln_gamma;

/// One realized walk up to the first crossing of `x_max`.
///
/// Steps k = 1..K carry S_k = xi_1 + ... + xi_k and T_k = S_{k-1} + eta_k;
/// S_K is the first partial sum above the horizon, which guarantees every
/// T_k <= x_max is present (T_{K+1} would start above the horizon already).
#[derive(Debug, Clone)]
pub struct WalkPath {
    eta: Vec<f64>,
    s: Vec<f64>,
    x_max: f64,
}

impl WalkPath {
    /// Assemble a path from explicit increments (test and oracle entry).
    pub fn from_increments(xi: &[f64], eta: &[f64], x_max: f64) -> Result<Self> {
        if xi.len() != eta.len() || xi.is_empty() {
            return Err(Error::Domain("need matching nonempty xi and eta".into()));
        }
        if xi.iter().any(|&v| v <= 0.0) || eta.iter().any(|&v| v < 0.0) {
            return Err(Error::Domain("xi must be positive and eta nonnegative".into()));
        }
        let mut s = Vec::with_capacity(xi.len());
        let mut acc = 0.0;
        for &v in xi {
            acc += v;
            s.push(acc);
        }
        if *s.last().unwrap() <= x_max {
            return Err(Error::Domain("path must cross the horizon".into()));
        }
        Ok(Self { eta: eta.to_vec(), s, x_max })
    }

    /// Number of realized steps K.
    pub fn steps(&self) -> usize {
        self.s.len()
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// S_k for k = 0..=K.
    pub fn s(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.s[k - 1]
        }
    }

    /// T_k = S_{k-1} + eta_k for k = 1..=K.
    pub fn t(&self, k: usize) -> f64 {
        self.s(k - 1) + self.eta[k - 1]
    }

    fn check_horizon(&self, x: f64) -> Result<()> {
        if !(0.0 <= x && x <= self.x_max) {
            return Err(Error::Domain(format!(
                "x = {x} outside the simulated horizon [0, {}]",
                self.x_max
            )));
        }
        Ok(())
    }
}

/// Simulate until the walk first exceeds `x_max`; each step derives both
/// components from a single draw of W.
pub fn simulate_path<R: Rng + ?Sized>(model: &FactorModel, x_max: f64, rng: &mut R) -> WalkPath {
    assert!(x_max >= 0.0, "horizon must be nonnegative");
    let mut s = Vec::new();
    let mut eta = Vec::new();
    let mut acc = 0.0f64;
    loop {
        let w = model.sample(rng);
        acc += -w.ln();
        s.push(acc);
        eta.push(-(-w).ln_1p());
        if acc > x_max {
            break;
        }
    }
    WalkPath { eta, s, x_max }
}

/// rho(x) = #{k >= 0 : S_k <= x} (counts S_0 = 0).
pub fn rho_at(path: &WalkPath, x: f64) -> Result<u64> {
    path.check_horizon(x)?;
    Ok(1 + path.s.partition_point(|&v| v <= x) as u64)
}

/// N(x) = #{k >= 1 : T_k <= x}.
pub fn n_at(path: &WalkPath, x: f64) -> Result<u64> {
    path.check_horizon(x)?;
    let count = (1..=path.steps()).filter(|&k| path.t(k) <= x).count() as u64;
    let rho = 1 + path.s.partition_point(|&v| v <= x) as u64;
    debug_assert!(count <= rho, "N(x) must not exceed rho(x)");
    Ok(count)
}

/// M(x) = sum over k >= 0 with S_k <= x of F(x - S_k), F the CDF of eta.
pub fn m_at(path: &WalkPath, x: f64, model: &FactorModel) -> Result<f64> {
    path.check_horizon(x)?;
    let mut acc = KahanSum::new();
    acc.add(1.0 - model.eta_tail(x));
    for &s in &path.s {
        if s > x {
            break;
        }
        acc.add(1.0 - model.eta_tail(x - s));
    }
    Ok(acc.value())
}

/// Integral of the step function rho over [0, x]: x + sum (x - S_k)^+.
fn integral_rho(path: &WalkPath, x: f64) -> f64 {
    let mut acc = KahanSum::new();
    acc.add(x);
    for &s in &path.s {
        if s > x {
            break;
        }
        acc.add(x - s);
    }
    acc.value()
}

/// Integral of N over [0, x]: sum over k of (x - T_k)^+.
fn integral_n(path: &WalkPath, x: f64) -> f64 {
    let mut acc = KahanSum::new();
    for k in 1..=path.steps() {
        let t = path.t(k);
        if t <= x {
            acc.add(x - t);
        }
    }
    acc.value()
}

/// J(x) = integral over [0, x] of (rho(y) - y/mu) dy, unnormalized.
pub fn integral_j_with_mu(path: &WalkPath, x: f64, mu: f64) -> Result<f64> {
    path.check_horizon(x)?;
    if !(mu > 0.0) {
        return Err(Error::Domain("mu must be positive".into()));
    }
    Ok(integral_rho(path, x) - x * x / (2.0 * mu))
}

pub fn integral_j(path: &WalkPath, x: f64, model: &FactorModel) -> Result<f64> {
    let mu = model.log_moments()?.mu.expect_finite("mu")?;
    integral_j_with_mu(path, x, mu)
}

/// I(x) = integral over [0, x] of (N(y) - (y - r*(y))/mu) dy, unnormalized.
/// The smooth part is (x^2/2 - R(x))/mu with R the integral of r*.
pub fn integral_i_with_drift(path: &WalkPath, x: f64, mu: f64, r_cumulative: f64) -> Result<f64> {
    path.check_horizon(x)?;
    if !(mu > 0.0) {
        return Err(Error::Domain("mu must be positive".into()));
    }
    Ok(integral_n(path, x) - (x * x / 2.0 - r_cumulative) / mu)
}

pub fn integral_i(path: &WalkPath, x: f64, model: &FactorModel) -> Result<f64> {
    let mu = model.log_moments()?.mu.expect_finite("mu")?;
    integral_i_with_drift(path, x, mu, model.r_star_cumulative(x)?)
}

/// f_j(t) = E (log^+ P)^j for P ~ Poisson(t), j in {1, 2}: the series
/// e^{-t} sum_{k >= 2} log^j k t^k / k!, truncated adaptively and centered
/// near k = t for large t.
pub fn f_j_moment(j: u8, t: f64) -> f64 {
    assert!(j == 1 || j == 2, "only the first two moments are defined");
    assert!(t >= 0.0);
    if t == 0.0 {
        return 0.0;
    }
    let logpow = |k: u64| {
        let l = (k as f64).ln();
        if j == 1 {
            l
        } else {
            l * l
        }
    };
    let mut acc = KahanSum::new();
    if t <= 40.0 {
        // ascending: p_k = e^{-t} t^k / k!
        let mut p = (-t).exp() * t * t / 2.0; // k = 2
        let mut k = 2u64;
        loop {
            let term = p * logpow(k);
            acc.add(term);
            if k as f64 > t && term < 1e-16 * acc.value().max(1e-300) {
                break;
            }
            k += 1;
            p *= t / k as f64;
        }
    } else {
        let width = 12.0 * t.sqrt() + 40.0;
        let lo = ((t - width).floor() as u64).max(2);
        let hi = (t + width).ceil() as u64;
        let mut p = ((lo as f64) * t.ln() - t - ln_gamma(lo as f64 + 1.0)).exp();
        for k in lo..=hi {
            acc.add(p * logpow(k));
            p *= t / (k + 1) as f64;
        }
    }
    acc.value()
}

/// h(t) = Var(log^+ P) = f_2(t) - f_1(t)^2, clamped at 0.
pub fn h_var(t: f64) -> f64 {
    let f1 = f_j_moment(1, t);
    (f_j_moment(2, t) - f1 * f1).max(0.0)
}

/// Poisson draw (inversion for small mean, rejection for large).
pub fn sample_poisson<R: Rng + ?Sized>(t: f64, rng: &mut R) -> u64 {
    assert!(t >= 0.0);
    if t == 0.0 {
        return 0;
    }
    rand_distr::Poisson::new(t).expect("t > 0").sample(rng) as u64
}

/// V(t) = log T of a partition of a Poisson(t) number of elements.
pub fn sample_v<R: Rng + ?Sized>(model: &FactorModel, t: f64, rng: &mut R) -> f64 {
    let balls = sample_poisson(t, rng);
    if balls == 0 {
        return 0.0;
    }
    crate::cycle_stats::log_t(&sample_partition_thinning(model, balls, rng))
}

/// Large-deviation bound q(t) on P{Poisson(t) <= (1 - t^{-beta}) t}.
pub fn poisson_deviation_bound(t: f64, beta: f64) -> Result<f64> {
    if !(t > 1.0) {
        return Err(Error::Domain(format!("bound needs t > 1, got {t}")));
    }
    if !(0.0 < beta && beta < 0.5) {
        return Err(Error::Domain(format!("bound needs beta in (0, 1/2), got {beta}")));
    }
    let eps = t.powf(-beta);
    Ok((-t * (eps + (-eps).ln_1p() * (1.0 - eps))).exp())
}

/// Lower bound p(t) <= f_1(t) - log t from the deviation inequality:
/// log(1 - eps_t) P{P > (1-eps_t) t} - q(t) log t.
pub fn f1_lower_bound(t: f64, beta: f64) -> Result<f64> {
    let q = poisson_deviation_bound(t, beta)?;
    let eps = t.powf(-beta);
    let k0 = ((1.0 - eps) * t).floor();
    // P{Poisson(t) <= k0} = Q(k0 + 1, t) (upper regularized gamma)
    let p_le = statrs::function::gamma::gamma_ur(k0 + 1.0, t);
    Ok((-eps).ln_1p() * (1.0 - p_le) - q * t.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn uniform() -> FactorModel {
        FactorModel::beta(1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_horizon_single_step() {
        let mut rng = rng_from_seed(1);
        for _ in 0..50 {
            let path = simulate_path(&uniform(), 0.0, &mut rng);
            assert_eq!(path.steps(), 1);
            assert!(path.s(1) > 0.0);
        }
    }

    #[test]
    fn pareto_increments_bound_step_count() {
        // xi >= 1 surely, so K <= x_max + 2
        let model = FactorModel::pareto_log(1.5).unwrap();
        let mut rng = rng_from_seed(2);
        for _ in 0..100 {
            let path = simulate_path(&model, 25.0, &mut rng);
            assert!(path.steps() as f64 <= 25.0 + 2.0);
        }
    }

    #[test]
    fn mean_step_count_matches_renewal_function() {
        // for Exp(1) increments E K = E rho(x) = x + 1
        let mut rng = rng_from_seed(3);
        let x = 100.0;
        let reps = 10_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..reps {
            let k = simulate_path(&uniform(), x, &mut rng).steps() as f64;
            sum += k;
            sq += k * k;
        }
        let mean = sum / reps as f64;
        let sd = ((sq / reps as f64 - mean * mean) / reps as f64).sqrt();
        assert!(
            (mean - (x + 1.0)).abs() < 3.0 * sd,
            "mean {mean} vs {} (3se = {})",
            x + 1.0,
            3.0 * sd
        );
    }

    #[test]
    fn counting_processes() {
        let path = WalkPath::from_increments(&[1.0, 2.0, 1.0], &[0.5, 0.5, 0.5], 2.0).unwrap();
        // S = 1, 3, 4; T = 0.5, 1.5, 3.5
        assert_eq!(rho_at(&path, 0.0).unwrap(), 1);
        assert_eq!(rho_at(&path, 1.0).unwrap(), 2);
        assert_eq!(rho_at(&path, 2.0).unwrap(), 2);
        assert_eq!(n_at(&path, 2.0).unwrap(), 2);
        assert_eq!(n_at(&path, 0.4).unwrap(), 0);
        assert!(rho_at(&path, 3.0).is_err());
        // N <= rho pointwise
        for i in 0..=20 {
            let x = i as f64 * 0.1;
            assert!(n_at(&path, x).unwrap() <= rho_at(&path, x).unwrap());
        }
    }

    #[test]
    fn mean_rho_is_renewal_function() {
        let mut rng = rng_from_seed(5);
        let x = 100.0;
        let reps = 10_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..reps {
            let path = simulate_path(&uniform(), x, &mut rng);
            let r = rho_at(&path, x).unwrap() as f64;
            sum += r;
            sq += r * r;
        }
        let mean = sum / reps as f64;
        let sd = ((sq / reps as f64 - mean * mean) / reps as f64).sqrt();
        assert!((mean - (x + 1.0)).abs() < 3.0 * sd, "mean {mean}");
    }

    #[test]
    fn integrals_on_hand_built_path() {
        // xi = (1,2,1), eta = (.5,.5,.5), mu = 1:
        // J(2) = int_0^2 rho - y dy = (2 + 1) - 2 = 1
        let path = WalkPath::from_increments(&[1.0, 2.0, 1.0], &[0.5, 0.5, 0.5], 2.0).unwrap();
        assert_eq!(integral_j_with_mu(&path, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(integral_i_with_drift(&path, 0.0, 1.0, 0.0).unwrap(), 0.0);
        let j = integral_j_with_mu(&path, 2.0, 1.0).unwrap();
        assert!((j - 1.0).abs() < 1e-12, "J = {j}");

        // Riemann oracle for both I and J on a dense grid
        let riemann = |f: &dyn Fn(f64) -> f64, x: f64| {
            let n = 100_000;
            let h = x / n as f64;
            (0..n).map(|i| f((i as f64 + 0.5) * h)).sum::<f64>() * h
        };
        let rho_f = |y: f64| rho_at(&path, y).unwrap() as f64 - y;
        assert!((riemann(&rho_f, 2.0) - j).abs() < 1e-6);

        let r_cum = 0.3; // arbitrary smooth-part value for the comparison
        let i_val = integral_i_with_drift(&path, 2.0, 1.0, r_cum).unwrap();
        let n_f = |y: f64| n_at(&path, y).unwrap() as f64 - y;
        let oracle = riemann(&n_f, 2.0) + r_cum;
        assert!((i_val - oracle).abs() < 1e-5, "{i_val} vs {oracle}");
    }

    #[test]
    fn integrals_match_riemann_on_random_paths() {
        let model = FactorModel::beta(2.0, 1.0).unwrap();
        let mu = 0.5;
        let mut rng = rng_from_seed(11);
        for _ in 0..5 {
            let x = 30.0;
            let path = simulate_path(&model, x, &mut rng);
            let n = 200_000;
            let h = x / n as f64;
            let mut rj = 0.0;
            let mut ri = 0.0;
            for i in 0..n {
                let y = (i as f64 + 0.5) * h;
                rj += rho_at(&path, y).unwrap() as f64 - y / mu;
                ri += n_at(&path, y).unwrap() as f64 - (y - model.r_star(y)) / mu;
            }
            rj *= h;
            ri *= h;
            let j = integral_j_with_mu(&path, x, mu).unwrap();
            let i_val = integral_i(&path, x, &model).unwrap();
            assert!((rj - j).abs() < 2e-3, "J: {j} vs {rj}");
            assert!((ri - i_val).abs() < 2e-3, "I: {i_val} vs {ri}");
        }
    }

    #[test]
    fn f_moments_basics() {
        assert_eq!(f_j_moment(1, 0.0), 0.0);
        assert_eq!(f_j_moment(2, 0.0), 0.0);
        // exact small-t value: e^{-t} (log 2 t^2/2! + log 3 t^3/3! + ...)
        let t = 0.5f64;
        let mut expect = 0.0;
        let mut fact = 1.0f64;
        for k in 2..30u64 {
            fact *= (k - 1) as f64;
            expect += (k as f64).ln() * t.powi(k as i32) / (fact * k as f64);
        }
        expect *= (-t).exp();
        assert!((f_j_moment(1, t) - expect).abs() < 1e-14);
        // upper bound f1(t) - log t <= 1/t on a grid
        for &t in &[10.0, 50.0, 100.0, 1000.0] {
            let d = f_j_moment(1, t) - t.ln();
            assert!(d <= 1.0 / t + 1e-12, "t = {t}: diff {d}");
        }
        // h decays
        assert!(h_var(100.0) < h_var(10.0));
        assert!(h_var(1000.0) < h_var(100.0));
    }

    #[test]
    fn f1_lower_bound_holds() {
        for &t in &[10.0, 100.0, 1000.0] {
            let d = f_j_moment(1, t) - t.ln();
            let p = f1_lower_bound(t, 0.25).unwrap();
            assert!(p <= d, "t = {t}: p {p} vs diff {d}");
        }
    }

    #[test]
    fn deviation_bound_range_and_rate() {
        // the exponent is strictly negative; past t ~ 1e6 the bound
        // underflows f64, so the positivity grid stops before that
        for &t in &[2.0, 10.0, 1e3, 1e4, 1e5] {
            let q = poisson_deviation_bound(t, 0.25).unwrap();
            assert!(0.0 < q && q < 1.0, "q({t}) = {q}");
        }
        assert!(poisson_deviation_bound(1.0, 0.25).is_err());
        assert!(poisson_deviation_bound(10.0, 0.6).is_err());
        // -log q(t) / t^{1-2 beta} converges to 1/2 from above
        let ratio = |t: f64| -poisson_deviation_bound(t, 0.25).unwrap().ln() / t.powf(0.5);
        let (r1, r2, r3) = (ratio(1e2), ratio(1e4), ratio(1e6));
        assert!(r1 > r2 && r2 > r3, "{r1} {r2} {r3}");
        assert!((r3 - 0.5).abs() < 0.01, "ratio {r3}");
    }

    #[test]
    fn sample_v_zero() {
        let mut rng = rng_from_seed(9);
        for _ in 0..10 {
            assert_eq!(sample_v(&uniform(), 0.0, &mut rng), 0.0);
        }
    }

    #[test]
    fn poissonized_mean_tracks_leading_term() {
        // E V(t) / (log^2 t / (2 mu)) climbs toward 1. The gap to 1 shrinks
        // like 1/log^2 t, so the trend is resolved on a log-spaced grid small
        // enough for the differences to clear Monte Carlo noise.
        let mut rng = rng_from_seed(19);
        let reps = 300_000;
        let mut ratios = Vec::new();
        for &l in &[4.0f64, 6.0, 8.0] {
            let t = l.exp();
            let mean: f64 =
                (0..reps).map(|_| sample_v(&uniform(), t, &mut rng)).sum::<f64>() / reps as f64;
            ratios.push(mean / (0.5 * l * l));
        }
        assert!(ratios[0] < ratios[1] && ratios[1] < ratios[2], "{ratios:?}");
        assert!(ratios[2] < 1.0, "{ratios:?}");
    }

    #[test]
    fn conditional_mean_identity_on_frozen_frequencies() {
        // given frequencies, box counts are independent Poisson(t P_j), so
        // E V = sum_j f_1(t P_j)
        let mut rng = rng_from_seed(21);
        let t = 200.0;
        let freqs = crate::partition::frequency_prefix(&uniform(), 40, &mut rng);
        let expect: f64 = freqs
            .iter()
            .filter(|&&p| t * p >= 1e-6)
            .map(|&p| f_j_moment(1, t * p))
            .sum();
        let reps = 10_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..reps {
            let mut v = 0.0;
            for &p in &freqs {
                if t * p < 1e-6 {
                    continue;
                }
                let balls = sample_poisson(t * p, &mut rng);
                if balls >= 2 {
                    v += (balls as f64).ln();
                }
            }
            sum += v;
            sq += v * v;
        }
        let mean = sum / reps as f64;
        let sd = ((sq / reps as f64 - mean * mean) / reps as f64).sqrt();
        assert!((mean - expect).abs() < 3.0 * sd, "mean {mean} vs {expect} (3se {})", 3.0 * sd);
    }
}
