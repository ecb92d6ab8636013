//! Centering and scaling sequences for the log-order limit theorems, the
//! c-sequence solver, and the stable limit law with its numeric CDF.

pub mod gof;
mod stable;

pub use stable::{stable_cf, StableLaw};

use crate::error::{Error, Result};
use crate::factor::{Ell, FactorModel, TailClass};

/// Which limit regime the normalization targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseTag {
    /// Finite variance of log W: normal limit, closed-form scaling.
    A,
    /// Infinite variance with slowly varying truncated second moment: normal
    /// limit, scaling through the c-sequence at tail index 2.
    B,
    /// Regularly varying tail with index alpha in (1,2): stable limit.
    C,
}

impl std::str::FromStr for CaseTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(CaseTag::A),
            "b" | "B" => Ok(CaseTag::B),
            "c" | "C" => Ok(CaseTag::C),
            other => Err(Error::Config(format!("unknown case `{other}` (want a, b, or c)"))),
        }
    }
}

impl std::fmt::Display for CaseTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CaseTag::A => write!(f, "a"),
            CaseTag::B => write!(f, "b"),
            CaseTag::C => write!(f, "c"),
        }
    }
}

/// Case tag plus the centering and scaling at one sample size.
#[derive(Debug, Clone, Copy)]
pub struct LimitNormalization {
    pub case: CaseTag,
    pub n: f64,
    pub b_n: f64,
    pub a_n: f64,
    /// Tail index for case c.
    pub alpha: Option<f64>,
    /// Index floor(log n) at which the c-sequence was solved (cases b, c).
    pub c_index: Option<u64>,
    pub c_value: Option<f64>,
}

/// b_n = mu^{-1} (log^2 n / 2 - integral of r* from 0 to log n).
pub fn centering_b(model: &FactorModel, n: f64) -> Result<f64> {
    if !(n >= 1.0) {
        return Err(Error::Domain(format!("centering needs n >= 1, got {n}")));
    }
    let mu = model.log_moments()?.mu.expect_finite("mu")?;
    let l = n.ln();
    Ok((0.5 * l * l - model.r_star_cumulative(l)?) / mu)
}

/// Solve m * ell(c) / c^alpha = 1 for c on the monotone branch.
///
/// alpha = 2 encodes the truncated-second-moment regime; alpha in (1,2) the
/// stable one. Constant ell has the closed form (m ell)^{1/alpha}; log-power
/// ell is solved by bisection (largest root).
pub fn solve_c(alpha: f64, ell: &Ell, m: u64) -> Result<f64> {
    if !(1.0 < alpha && alpha <= 2.0) {
        return Err(Error::Domain(format!("solve_c needs alpha in (1, 2], got {alpha}")));
    }
    if m == 0 {
        return Err(Error::Domain("solve_c needs m >= 1".into()));
    }
    let mf = m as f64;
    match *ell {
        Ell::Constant(k) => {
            if k <= 0.0 {
                return Err(Error::Domain("constant ell must be positive".into()));
            }
            Ok((mf * k).powf(1.0 / alpha))
        }
        Ell::LogPower { coeff, power } => {
            if coeff <= 0.0 || power <= 0.0 {
                return Err(Error::Domain("log-power ell needs positive coeff and power".into()));
            }
            // g(c) = c^alpha - m ell(c); increasing for log c > power/alpha
            let g = |c: f64| c.powf(alpha) - mf * coeff * c.ln().powf(power);
            let c_min = (power / alpha).exp() * (1.0 + 1e-12);
            if g(c_min) > 0.0 {
                return Err(Error::Domain(format!(
                    "m ell(c)/c^alpha = 1 has no root on the monotone branch for m = {m}"
                )));
            }
            let mut lo = c_min;
            let mut hi = (mf * coeff).powf(1.0 / alpha).max(2.0 * c_min);
            while g(hi) < 0.0 {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if (hi - lo) / hi < 1e-14 {
                    break;
                }
            }
            let c = 0.5 * (lo + hi);
            let residual = (mf * ell.eval(c) / c.powf(alpha) - 1.0).abs();
            if residual > 1e-10 {
                return Err(Error::Numeric(format!("solve_c residual {residual:e}")));
            }
            Ok(c)
        }
    }
}

/// The scaling a_n for the given case; validates the model's moment profile.
pub fn scaling_a(model: &FactorModel, n: f64, case: CaseTag) -> Result<f64> {
    if !(n >= 1.0) {
        return Err(Error::Domain(format!("scaling needs n >= 1, got {n}")));
    }
    let moments = model.log_moments()?;
    let mu = moments.mu.expect_finite("mu")?;
    let l = n.ln();
    match case {
        CaseTag::A => {
            let sigma2 = moments.sigma2.expect_finite("sigma^2 (case a)")?;
            Ok((sigma2 * l * l * l / (3.0 * mu * mu * mu)).sqrt())
        }
        CaseTag::B => {
            if !moments.sigma2.is_infinite() {
                return Err(Error::CaseMismatch(
                    "case b needs infinite variance of log W".into(),
                ));
            }
            let ell = model.truncated_second_moment_ell().ok_or_else(|| {
                Error::CaseMismatch(
                    "case b needs a slowly varying truncated second moment".into(),
                )
            })?;
            let c = solve_c(2.0, &ell, l.floor() as u64)?;
            Ok(c * l / (3.0 * mu * mu * mu).sqrt())
        }
        CaseTag::C => match model.tail_class() {
            TailClass::RegVar { alpha, ell } if alpha > 1.0 && alpha < 2.0 => {
                let c = solve_c(alpha, &ell, l.floor() as u64)?;
                Ok(((alpha + 1.0) * mu.powf(alpha + 1.0)).powf(-1.0 / alpha) * c * l)
            }
            _ => Err(Error::CaseMismatch(
                "case c needs a regularly varying |log W| tail with alpha in (1,2)".into(),
            )),
        },
    }
}

/// Bundle of (b_n, a_n) plus the case-c metadata.
pub fn normalization(model: &FactorModel, n: f64, case: CaseTag) -> Result<LimitNormalization> {
    let b_n = centering_b(model, n)?;
    let a_n = scaling_a(model, n, case)?;
    let l = n.ln();
    let (alpha, c_index, c_value) = match case {
        CaseTag::A => (None, None, None),
        CaseTag::B => {
            let idx = l.floor() as u64;
            let c = solve_c(2.0, &model.truncated_second_moment_ell().unwrap(), idx)?;
            (None, Some(idx), Some(c))
        }
        CaseTag::C => match model.tail_class() {
            TailClass::RegVar { alpha, ell } => {
                let idx = l.floor() as u64;
                let c = solve_c(alpha, &ell, idx)?;
                (Some(alpha), Some(idx), Some(c))
            }
            TailClass::Light => unreachable!("scaling_a validated the tail class"),
        },
    };
    Ok(LimitNormalization { case, n, b_n, a_n, alpha, c_index, c_value })
}

/// Elementwise (x - b)/a.
pub fn standardize(samples: &[f64], b: f64, a: f64) -> Result<Vec<f64>> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("standardize needs a > 0, got {a}")));
    }
    Ok(samples.iter().map(|&x| (x - b) / a).collect())
}
