//! Goodness-of-fit battery: normal CDF, Kolmogorov-Smirnov distance,
//! chi-square with cell pooling, and empirical characteristic function
//! distance.

use crate::error::{Error, Result};
use num_complex::Complex64;
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Sup over sample points of |empirical CDF - model CDF|, with the empirical
/// CDF evaluated right-continuously at each point.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("ks_statistic needs a nonempty sample".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("samples must not contain NaN"));
    let n = xs.len() as f64;
    let mut sup = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        sup = sup.max(((i + 1) as f64 / n - cdf(x)).abs());
    }
    Ok(sup)
}

/// Pool cells so every expected count reaches `min_expected`; cells are
/// processed in the given order and small ones merge into one overflow cell.
pub fn pool_cells(
    observed: &[f64],
    expected: &[f64],
    min_expected: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let mut pool_o = 0.0;
    let mut pool_e = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        if e >= min_expected {
            obs.push(o);
            exp.push(e);
        } else {
            pool_o += o;
            pool_e += e;
        }
    }
    if pool_e > 0.0 {
        if pool_e >= min_expected || obs.is_empty() {
            obs.push(pool_o);
            exp.push(pool_e);
        } else {
            // merge the leftovers into the smallest kept cell
            let i = exp
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            obs[i] += pool_o;
            exp[i] += pool_e;
        }
    }
    (obs, exp)
}

/// Pearson chi-square statistic and p-value with dof = cells - 1.
pub fn chi_square(observed: &[f64], expected: &[f64]) -> Result<(f64, f64)> {
    if observed.is_empty() || observed.len() != expected.len() {
        return Err(Error::Domain("chi_square needs matching nonempty cell lists".into()));
    }
    if observed.len() < 2 {
        return Err(Error::Domain("chi_square needs at least two cells".into()));
    }
    let mut stat = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        if e <= 0.0 {
            return Err(Error::Domain("expected counts must be positive".into()));
        }
        stat += (o - e) * (o - e) / e;
    }
    let dof = (observed.len() - 1) as f64;
    let p = gamma_ur(dof / 2.0, stat / 2.0);
    Ok((stat, p))
}

/// Two-sample chi-square for equality of two multinomial samples.
pub fn chi_square_two_sample(counts_a: &[f64], counts_b: &[f64]) -> Result<(f64, f64)> {
    if counts_a.len() != counts_b.len() || counts_a.is_empty() {
        return Err(Error::Domain("two-sample chi-square needs matching cells".into()));
    }
    let na: f64 = counts_a.iter().sum();
    let nb: f64 = counts_b.iter().sum();
    if na <= 0.0 || nb <= 0.0 {
        return Err(Error::Domain("two-sample chi-square needs nonempty samples".into()));
    }
    let (ra, rb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&a, &b) in counts_a.iter().zip(counts_b) {
        let tot = a + b;
        if tot == 0.0 {
            continue;
        }
        let d = ra * a - rb * b;
        stat += d * d / tot;
        cells += 1;
    }
    if cells < 2 {
        return Err(Error::Domain("two-sample chi-square needs two occupied cells".into()));
    }
    let dof = (cells - 1) as f64;
    Ok((stat, gamma_ur(dof / 2.0, stat / 2.0)))
}

/// Max over the u-grid of |empirical CF - model CF|.
pub fn ecf_distance<F: Fn(f64) -> Complex64>(
    samples: &[f64],
    cf: F,
    u_grid: &[f64],
) -> Result<f64> {
    if samples.is_empty() || u_grid.is_empty() {
        return Err(Error::Domain("ecf_distance needs samples and a u-grid".into()));
    }
    let n = samples.len() as f64;
    let mut worst = 0.0f64;
    for &u in u_grid {
        let mut acc = Complex64::new(0.0, 0.0);
        for &x in samples {
            let (s, c) = (u * x).sin_cos();
            acc += Complex64::new(c, s);
        }
        worst = worst.max((acc / n - cf(u)).norm());
    }
    Ok(worst)
}

/// Empirical CF at one frequency.
pub fn empirical_cf(samples: &[f64], u: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &x in samples {
        let (s, c) = (u * x).sin_cos();
        acc += Complex64::new(c, s);
    }
    acc / samples.len() as f64
}
