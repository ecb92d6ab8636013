//! Small numeric building blocks: compensated summation, double-double
//! accumulation for the exact partition law, and the trigamma function
//! (absent from statrs).

/// Kahan–Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = KahanSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Unevaluated double-f64 value (`hi + lo`), giving ~106 effective mantissa
/// bits. Only the operations the exact-law dynamic program needs.
#[derive(Debug, Clone, Copy, Default)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn add(self, other: Self) -> Self {
        let (s, e) = two_sum(self.hi, other.hi);
        let lo = e + self.lo + other.lo;
        let (hi, lo) = two_sum(s, lo);
        Self { hi, lo }
    }

    pub fn mul_f64(self, x: f64) -> Self {
        let (p, e) = two_prod(self.hi, x);
        let lo = self.lo.mul_add(x, e);
        let (hi, lo) = two_sum(p, lo);
        Self { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Trigamma function ψ′(x) for x > 0.
///
/// Recurrence ψ′(x) = ψ′(x+1) + 1/x² pushes the argument above 10, then the
/// asymptotic Bernoulli series applies.
pub fn trigamma(x: f64) -> f64 {
    assert!(x > 0.0, "trigamma requires x > 0");
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // 1/x + 1/(2x^2) + sum B_{2k} / x^{2k+1}
    let series = inv
        + 0.5 * inv2
        + inv * inv2
            * (1.0 / 6.0
                + inv2 * (-1.0 / 30.0 + inv2 * (1.0 / 42.0 + inv2 * (-1.0 / 30.0 + inv2 * (5.0 / 66.0)))));
    acc + series
}

/// Sample mean and unbiased variance.
pub fn mean_variance(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    assert!(n >= 2, "need at least two samples");
    let mean = kahan_sum(samples.iter().copied()) / n as f64;
    let var = kahan_sum(samples.iter().map(|x| (x - mean) * (x - mean))) / (n as f64 - 1.0);
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut s = KahanSum::new();
        s.add(1.0);
        for _ in 0..1_000_000 {
            s.add(1e-18);
        }
        assert!((s.value() - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn double_double_accumulates_beyond_f64() {
        let mut acc = DoubleDouble::from_f64(1.0);
        let tiny = DoubleDouble::from_f64(1e-25);
        for _ in 0..100 {
            acc = acc.add(tiny);
        }
        let diff = acc.add(DoubleDouble::from_f64(-1.0)).to_f64();
        assert!((diff - 1e-23).abs() < 1e-36, "diff = {diff:e}");
    }

    #[test]
    fn trigamma_matches_known_values() {
        let pi = std::f64::consts::PI;
        assert!((trigamma(1.0) - pi * pi / 6.0).abs() < 1e-12);
        // psi'(x) - psi'(x+1) = 1/x^2
        for &x in &[0.3, 1.0, 2.5, 7.0, 20.0] {
            assert!((trigamma(x) - trigamma(x + 1.0) - 1.0 / (x * x)).abs() < 1e-12);
        }
        // Beta(theta,1) variance identity: trigamma(t) - trigamma(t+1) = 1/t^2
        let t: f64 = 2.0;
        assert!((trigamma(t) - trigamma(t + 1.0) - 1.0 / (t * t)).abs() < 1e-13);
    }
}
