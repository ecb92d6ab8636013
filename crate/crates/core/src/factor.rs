//! Laws of the stick-breaking factor `W` on (0,1): sampling, log-moments,
//! and the tail functions of |log W| and |log(1-W)| used by the limit
//! normalizations and the perturbed-walk functionals.

use crate::error::{Error, Result};
use crate::numeric::trigamma;
use crate::quad;
use rand::Rng;
use rand_distr::Distribution;
use statrs::function::beta::beta_reg;
use statrs::function::gamma::digamma;

/// A possibly infinite moment value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moment {
    Finite(f64),
    Infinite,
}

impl Moment {
    pub fn finite(self) -> Option<f64> {
        match self {
            Moment::Finite(v) => Some(v),
            Moment::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Moment::Infinite)
    }

    pub fn expect_finite(self, what: &str) -> Result<f64> {
        self.finite()
            .ok_or_else(|| Error::CaseMismatch(format!("{what} is infinite for this model")))
    }
}

impl std::fmt::Display for Moment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Moment::Finite(v) => write!(f, "{v}"),
            Moment::Infinite => write!(f, "inf"),
        }
    }
}

/// mu = E|log W|, sigma2 = Var(log W), nu = E|log(1-W)| (all in nats).
#[derive(Debug, Clone, Copy)]
pub struct MomentSummary {
    pub mu: Moment,
    pub sigma2: Moment,
    pub nu: Moment,
}

/// A slowly varying function, restricted to the two families the crate
/// supports: constants and coefficient * (log x)^power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ell {
    Constant(f64),
    LogPower { coeff: f64, power: f64 },
}

impl Ell {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Ell::Constant(c) => c,
            Ell::LogPower { coeff, power } => coeff * x.ln().powf(power),
        }
    }
}

/// Tail behaviour of |log W|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailClass {
    /// All power moments of |log W| finite (exponential-type tail).
    Light,
    /// P{|log W| > x} ~ x^{-alpha} ell(x).
    RegVar { alpha: f64, ell: Ell },
}

#[derive(Debug, Clone)]
pub enum FactorModel {
    /// beta(a, b) density on (0,1).
    Beta { a: f64, b: f64 },
    /// W = exp(-V) with P{V > x} = x^{-alpha} for x >= 1.
    ParetoLog { alpha: f64 },
    /// Piecewise-linear density tabulated on a strictly increasing grid.
    Tabulated(TabulatedDensity),
}

#[derive(Debug, Clone)]
pub struct TabulatedDensity {
    xs: Vec<f64>,
    fs: Vec<f64>,
    /// Cumulative mass at each grid point (cdf[0] = 0, cdf[last] = 1).
    cdf: Vec<f64>,
}

/// Construction-time normalization tolerance for tabulated densities.
const TABLE_MASS_TOL: f64 = 1e-6;

impl TabulatedDensity {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Model("table needs at least two grid points".into()));
        }
        let mut xs = Vec::with_capacity(points.len());
        let mut fs = Vec::with_capacity(points.len());
        for &(x, f) in points {
            if !(0.0 < x && x < 1.0) {
                return Err(Error::Model(format!("grid point x = {x} outside (0,1)")));
            }
            if !(f.is_finite() && f >= 0.0) {
                return Err(Error::Model(format!("density value f = {f} invalid")));
            }
            if let Some(&prev) = xs.last() {
                if x <= prev {
                    return Err(Error::Model("grid must be strictly increasing".into()));
                }
            }
            xs.push(x);
            fs.push(f);
        }
        let mut cdf = vec![0.0; xs.len()];
        for i in 1..xs.len() {
            cdf[i] = cdf[i - 1] + 0.5 * (fs[i] + fs[i - 1]) * (xs[i] - xs[i - 1]);
        }
        let total = *cdf.last().unwrap();
        if (total - 1.0).abs() > TABLE_MASS_TOL {
            return Err(Error::Model(format!(
                "tabulated density integrates to {total}, outside 1 +/- {TABLE_MASS_TOL}"
            )));
        }
        // Renormalize so the cdf is exactly 1 at the right edge.
        for (f, c) in fs.iter_mut().zip(cdf.iter_mut()) {
            *f /= total;
            *c /= total;
        }
        Ok(Self { xs, fs, cdf })
    }

    /// Piecewise-quadratic CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= *self.xs.last().unwrap() {
            return 1.0;
        }
        let i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => return self.cdf[i],
            Err(i) => i - 1,
        };
        let dx = x - self.xs[i];
        let w = self.xs[i + 1] - self.xs[i];
        let slope = (self.fs[i + 1] - self.fs[i]) / w;
        self.cdf[i] + self.fs[i] * dx + 0.5 * slope * dx * dx
    }

    pub fn density(&self, x: f64) -> f64 {
        if x < self.xs[0] || x > *self.xs.last().unwrap() {
            return 0.0;
        }
        let i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => return self.fs[i],
            Err(i) => i - 1,
        };
        let w = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / w;
        self.fs[i] * (1.0 - t) + self.fs[i + 1] * t
    }

    fn quantile(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c <= u).saturating_sub(1);
        let i = i.min(self.xs.len() - 2);
        let w = self.xs[i + 1] - self.xs[i];
        let slope = (self.fs[i + 1] - self.fs[i]) / w;
        let target = u - self.cdf[i];
        let f0 = self.fs[i];
        let dx = if slope.abs() < 1e-12 * f0.max(1e-300) {
            if f0 > 0.0 { target / f0 } else { 0.5 * w }
        } else {
            // solve f0 t + slope t^2 / 2 = target, stable root
            let disc = (f0 * f0 + 2.0 * slope * target).max(0.0);
            if slope > 0.0 {
                2.0 * target / (f0 + disc.sqrt())
            } else {
                (f0 - disc.sqrt()) / -slope
            }
        };
        (self.xs[i] + dx.clamp(0.0, w)).min(*self.xs.last().unwrap())
    }

    /// exp(ln_c) * integral of w^j (1-w)^m f(w), with the powers applied in
    /// log space under the scale factor.
    pub(crate) fn integrate_scaled(&self, ln_c: f64, j: f64, m: f64, tol: f64) -> Result<f64> {
        let g = |w: f64| {
            if w <= 0.0 || w >= 1.0 {
                return 0.0;
            }
            let ln_body = j * w.ln() + m * (-w).ln_1p();
            if ln_c + ln_body < -700.0 {
                return 0.0;
            }
            (ln_c + ln_body).exp()
        };
        self.integrate_against(&g, tol)
    }

    /// Integrate `g(w) * f(w)` over the support, segment by segment.
    fn integrate_against<G: Fn(f64) -> f64>(&self, g: &G, tol: f64) -> Result<f64> {
        let mut total = 0.0;
        let per_seg = tol / self.xs.len() as f64;
        for i in 0..self.xs.len() - 1 {
            let (x0, x1) = (self.xs[i], self.xs[i + 1]);
            let (f0, f1) = (self.fs[i], self.fs[i + 1]);
            let slope = (f1 - f0) / (x1 - x0);
            let h = |w: f64| g(w) * (f0 + slope * (w - x0));
            total += quad::integrate(&h, x0, x1, per_seg)?;
        }
        Ok(total)
    }
}

impl FactorModel {
    pub fn beta(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::Model(format!("beta parameters must be positive, got ({a}, {b})")));
        }
        Ok(FactorModel::Beta { a, b })
    }

    pub fn pareto_log(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Model(format!("paretolog alpha must be positive, got {alpha}")));
        }
        Ok(FactorModel::ParetoLog { alpha })
    }

    pub fn tabulated(points: &[(f64, f64)]) -> Result<Self> {
        Ok(FactorModel::Tabulated(TabulatedDensity::new(points)?))
    }

    /// Parse the model grammar: `beta:a,b` | `paretolog:alpha` | `table:<path>`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, rest) = spec
            .split_once(':')
            .ok_or_else(|| Error::Model(format!("model spec `{spec}` missing `:`")))?;
        match kind {
            "beta" => {
                let (a, b) = rest
                    .split_once(',')
                    .ok_or_else(|| Error::Model("beta spec needs `a,b`".into()))?;
                let a: f64 = a.trim().parse().map_err(|_| Error::Model(format!("bad beta a `{a}`")))?;
                let b: f64 = b.trim().parse().map_err(|_| Error::Model(format!("bad beta b `{b}`")))?;
                Self::beta(a, b)
            }
            "paretolog" => {
                let alpha: f64 = rest
                    .trim()
                    .parse()
                    .map_err(|_| Error::Model(format!("bad paretolog alpha `{rest}`")))?;
                Self::pareto_log(alpha)
            }
            "table" => {
                let text = std::fs::read_to_string(rest)?;
                let mut points = Vec::new();
                for (lineno, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() {
                        continue;
                    }
                    let (x, f) = line.split_once(',').ok_or_else(|| {
                        Error::Model(format!("table line {} is not `x,f`", lineno + 1))
                    })?;
                    let x: f64 = x.trim().parse().map_err(|_| {
                        Error::Model(format!("table line {}: bad x `{x}`", lineno + 1))
                    })?;
                    let f: f64 = f.trim().parse().map_err(|_| {
                        Error::Model(format!("table line {}: bad f `{f}`", lineno + 1))
                    })?;
                    points.push((x, f));
                }
                Self::tabulated(&points)
            }
            other => Err(Error::Model(format!("unknown model kind `{other}`"))),
        }
    }

    /// Canonical spec string (round-trips through `parse` for beta/paretolog).
    pub fn spec_string(&self) -> String {
        match self {
            FactorModel::Beta { a, b } => format!("beta:{a},{b}"),
            FactorModel::ParetoLog { alpha } => format!("paretolog:{alpha}"),
            FactorModel::Tabulated(_) => "table:<inline>".into(),
        }
    }

    pub fn tail_class(&self) -> TailClass {
        match self {
            FactorModel::Beta { .. } | FactorModel::Tabulated(_) => TailClass::Light,
            FactorModel::ParetoLog { alpha } => TailClass::RegVar {
                alpha: *alpha,
                ell: Ell::Constant(1.0),
            },
        }
    }

    /// The slowly varying function of the truncated second moment of |log W|
    /// when Var(log W) is infinite but the truncated moment is slowly varying
    /// (the boundary tail index 2). `None` when the model is not of that kind.
    pub fn truncated_second_moment_ell(&self) -> Option<Ell> {
        match self {
            FactorModel::ParetoLog { alpha } if (*alpha - 2.0).abs() < 1e-12 => {
                Some(Ell::LogPower { coeff: 2.0, power: 1.0 })
            }
            _ => None,
        }
    }

    /// One draw of W, strictly inside (0,1); draws rounding to 0 or 1 are
    /// rejected so log transforms stay finite.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let w = self.sample_raw(rng);
            if w > 0.0 && w < 1.0 {
                return w;
            }
        }
    }

    fn sample_raw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            FactorModel::Beta { a, b } => {
                if *b == 1.0 {
                    // inverse CDF: W = U^(1/a)
                    let u: f64 = rng.random();
                    if *a == 1.0 { u } else { u.powf(1.0 / a) }
                } else if *a == 1.0 {
                    let u: f64 = rng.random();
                    1.0 - u.powf(1.0 / b)
                } else {
                    let x = rand_distr::Gamma::new(*a, 1.0).unwrap().sample(rng);
                    let y = rand_distr::Gamma::new(*b, 1.0).unwrap().sample(rng);
                    x / (x + y)
                }
            }
            FactorModel::ParetoLog { alpha } => {
                let u: f64 = rng.random();
                if u == 0.0 {
                    return 0.0;
                }
                (-u.powf(-1.0 / alpha)).exp()
            }
            FactorModel::Tabulated(t) => t.quantile(rng.random()),
        }
    }

    /// One draw of |log W| (single uniform on the inverse-CDF paths).
    pub fn sample_abs_log<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            FactorModel::Beta { a, b } if *b == 1.0 => loop {
                let u: f64 = rng.random();
                if u > 0.0 {
                    return -u.ln() / a;
                }
            },
            FactorModel::ParetoLog { alpha } => loop {
                let u: f64 = rng.random();
                if u > 0.0 {
                    return u.powf(-1.0 / alpha);
                }
            },
            _ => -self.sample(rng).ln(),
        }
    }

    /// E[W^j (1-W)^m]. Exact product form for beta; quadrature otherwise.
    pub fn mixed_moment(&self, j: u64, m: u64) -> Result<f64> {
        match self {
            FactorModel::Beta { a, b } => {
                // B(a+j, b+m)/B(a,b) as a product of exact factor ratios.
                let mut ln = crate::numeric::KahanSum::new();
                for i in 0..j {
                    ln.add(((a + i as f64) / (a + b + i as f64)).ln());
                }
                for i in 0..m {
                    ln.add(((b + i as f64) / (a + b + (j + i) as f64)).ln());
                }
                Ok(ln.value().exp())
            }
            FactorModel::ParetoLog { alpha } => {
                let (jf, mf, al) = (j as f64, m as f64, *alpha);
                // substitute t = 1/v in the Pareto integral over v >= 1
                let f = |t: f64| {
                    if t <= 0.0 {
                        return 0.0;
                    }
                    let e = (-1.0 / t).exp();
                    e.powf(jf) * (1.0 - e).powf(mf) * al * t.powf(al - 1.0)
                };
                quad::integrate(&f, 0.0, 1.0, 1e-13)
            }
            FactorModel::Tabulated(t) => {
                let (jf, mf) = (j as f64, m as f64);
                t.integrate_against(&|w: f64| w.powf(jf) * (1.0 - w).powf(mf), 1e-13)
            }
        }
    }

    /// ln E[W^n] computed without cancellation (beta only; callers use it for
    /// the conditioning denominator 1 - E W^n at astronomically large n).
    pub(crate) fn ln_power_moment_beta(&self, n: u64) -> Option<f64> {
        match self {
            FactorModel::Beta { a, b } => {
                let mut ln = crate::numeric::KahanSum::new();
                for i in 0..n {
                    ln.add((-b / (a + b + i as f64)).ln_1p());
                }
                Some(ln.value())
            }
            _ => None,
        }
    }

    /// Closed forms for beta and paretolog, quadrature for tabulated.
    pub fn log_moments(&self) -> Result<MomentSummary> {
        match self {
            FactorModel::Beta { a, b } => {
                let mu = digamma(a + b) - digamma(*a);
                let sigma2 = trigamma(*a) - trigamma(a + b);
                let nu = digamma(a + b) - digamma(*b);
                Ok(MomentSummary {
                    mu: Moment::Finite(mu),
                    sigma2: Moment::Finite(sigma2),
                    nu: Moment::Finite(nu),
                })
            }
            FactorModel::ParetoLog { alpha } => {
                let al = *alpha;
                let mu = if al > 1.0 { Moment::Finite(al / (al - 1.0)) } else { Moment::Infinite };
                let sigma2 = if al > 2.0 {
                    Moment::Finite(al / ((al - 1.0) * (al - 1.0) * (al - 2.0)))
                } else {
                    Moment::Infinite
                };
                // |log(1-W)| is bounded by -log(1 - e^{-1}); integrate its tail.
                let cap = -(-1f64).exp().neg_ln_1p();
                let nu = quad::integrate(&|x| self.eta_tail(x), 0.0, cap, 1e-12)?;
                Ok(MomentSummary { mu, sigma2, nu: Moment::Finite(nu) })
            }
            FactorModel::Tabulated(t) => {
                let mu = t.integrate_against(&|w: f64| -w.ln(), 1e-11)?;
                let m2 = t.integrate_against(&|w: f64| w.ln() * w.ln(), 1e-11)?;
                let nu = t.integrate_against(&|w: f64| -(-w).ln_1p(), 1e-11)?;
                Ok(MomentSummary {
                    mu: Moment::Finite(mu),
                    sigma2: Moment::Finite((m2 - mu * mu).max(0.0)),
                    nu: Moment::Finite(nu),
                })
            }
        }
    }

    /// P{|log(1-W)| > x}.
    pub fn eta_tail(&self, x: f64) -> f64 {
        assert!(x >= 0.0, "eta_tail requires x >= 0");
        if x == 0.0 {
            return 1.0;
        }
        match self {
            FactorModel::Beta { a, b } => beta_reg(*b, *a, (-x).exp()),
            FactorModel::ParetoLog { alpha } => {
                // |log(1-W)| > x iff V < y with y = -log(1 - e^{-x})
                let y = -(-(-x).exp()).ln_1p();
                if y > 1.0 {
                    1.0 - y.powf(-alpha)
                } else {
                    0.0
                }
            }
            FactorModel::Tabulated(t) => 1.0 - t.cdf(1.0 - (-x).exp()),
        }
    }

    /// P{|log W| > x}.
    pub fn xi_tail(&self, x: f64) -> f64 {
        assert!(x >= 0.0, "xi_tail requires x >= 0");
        if x == 0.0 {
            return 1.0;
        }
        match self {
            FactorModel::Beta { a, b } => beta_reg(*a, *b, (-x).exp()),
            FactorModel::ParetoLog { alpha } => {
                if x <= 1.0 {
                    1.0
                } else {
                    x.powf(-alpha)
                }
            }
            FactorModel::Tabulated(t) => t.cdf((-x).exp()),
        }
    }

    /// r*(y) = integral of eta_tail over [0, y].
    pub fn r_star(&self, y: f64) -> f64 {
        assert!(y >= 0.0, "r_star requires y >= 0");
        if y == 0.0 {
            return 0.0;
        }
        if let Some(terms) = self.beta_integer_eta_terms() {
            // eta(x) = sum_k c_k e^{-k x}  =>  r*(y) = sum_k c_k (1 - e^{-k y})/k
            return terms
                .iter()
                .map(|&(k, c)| c * (-(-(k * y)).exp_m1()) / k)
                .sum();
        }
        let upper = self.eta_support_end().min(y);
        if upper <= 0.0 {
            return 0.0;
        }
        quad::integrate(&|x| self.eta_tail(x), 0.0, upper, 1e-11).expect("eta_tail quadrature")
    }

    /// R(x) = integral of r* over [0, x], evaluated as a single quadrature of
    /// (x - z) * eta_tail(z) by Fubini.
    pub fn r_star_cumulative(&self, x: f64) -> Result<f64> {
        assert!(x >= 0.0);
        if x == 0.0 {
            return Ok(0.0);
        }
        if let Some(terms) = self.beta_integer_eta_terms() {
            return Ok(terms
                .iter()
                .map(|&(k, c)| c * (x / k - (-(-(k * x)).exp_m1()) / (k * k)))
                .sum());
        }
        let upper = self.eta_support_end().min(x);
        if upper <= 0.0 {
            return Ok(0.0);
        }
        // beyond the support end s, r*(z) is constant r*(s)
        let head = quad::integrate(&|z| (x - z) * self.eta_tail(z), 0.0, upper, 1e-10)?;
        Ok(head)
    }

    /// For beta(theta, 1) with small integer theta, eta_tail expands into a
    /// finite exponential sum; returns (rate k, coefficient c_k) pairs.
    fn beta_integer_eta_terms(&self) -> Option<Vec<(f64, f64)>> {
        if let FactorModel::Beta { a, b } = self {
            if *b == 1.0 && a.fract() == 0.0 && *a >= 1.0 && *a <= 20.0 {
                let theta = *a as i64;
                let mut terms = Vec::new();
                let mut binom = 1f64;
                for k in 1..=theta {
                    binom = binom * (theta - k + 1) as f64 / k as f64;
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    terms.push((k as f64, sign * binom));
                }
                return Some(terms);
            }
        }
        None
    }

    /// Smallest x with eta_tail(x) = 0 (infinity for beta/tabulated-at-0).
    fn eta_support_end(&self) -> f64 {
        match self {
            FactorModel::ParetoLog { .. } => -(-1f64).exp().neg_ln_1p(),
            FactorModel::Beta { .. } => f64::INFINITY,
            FactorModel::Tabulated(t) => -(1.0 - *t.xs.last().unwrap()).ln(),
        }
    }
}

trait NegLn1p {
    fn neg_ln_1p(self) -> f64;
}

impl NegLn1p for f64 {
    /// ln(1 - self) computed as ln_1p(-self).
    fn neg_ln_1p(self) -> f64 {
        (-self).ln_1p()
    }
}
