//! Cycle partitions of a random permutation built from stick-breaking, via
//! three equivalent samplers: a decreasing Markov chain on the decrement
//! matrix, sequential thinning of the occupancy scheme (the large-n path),
//! and the interval construction that yields the permutation itself.

mod exact;

pub use exact::{
    exact_partition_law, law_after_first_decrement, ExactPartitionLaw, EXACT_LAW_MAX_N,
};

use crate::error::{Error, Result};
use crate::factor::FactorModel;
use crate::numeric::KahanSum;
use rand::Rng;
use rand_distr::Distribution;
use std::collections::BTreeMap;
use std::collections::HashMap;
use std::sync::{Arc, RwLock};

/// Counts K_{n,r} of cycles of each length r; absent lengths are zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CyclePartition {
    n: u64,
    counts: BTreeMap<u64, u64>,
}

impl CyclePartition {
    /// Validates mass conservation: sum of r * K_r must equal n.
    pub fn new(n: u64, counts: BTreeMap<u64, u64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("partition of n = 0".into()));
        }
        let mut mass = 0u64;
        for (&r, &k) in &counts {
            if r == 0 || r > n || k == 0 {
                return Err(Error::Domain(format!("invalid cycle length entry ({r}, {k})")));
            }
            mass += r * k;
        }
        if mass != n {
            return Err(Error::Domain(format!("cycle lengths sum to {mass}, expected {n}")));
        }
        Ok(Self { n, counts })
    }

    pub fn identity(n: u64) -> Self {
        Self::new(n, BTreeMap::from([(1, n)])).unwrap()
    }

    pub fn single_cycle(n: u64) -> Self {
        Self::new(n, BTreeMap::from([(n, 1)])).unwrap()
    }

    pub fn from_lengths(lengths: &[u64]) -> Result<Self> {
        let mut counts = BTreeMap::new();
        for &r in lengths {
            *counts.entry(r).or_insert(0) += 1;
        }
        Self::new(lengths.iter().sum(), counts)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Map from cycle length to its count, ascending by length.
    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    pub fn count_of(&self, r: u64) -> u64 {
        self.counts.get(&r).copied().unwrap_or(0)
    }

    /// K_n, the total number of cycles.
    pub fn total_cycles(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Multiset of lengths, descending (the canonical partition key).
    pub fn sorted_lengths_desc(&self) -> Vec<u64> {
        let mut v = Vec::with_capacity(self.total_cycles() as usize);
        for (&r, &k) in self.counts.iter().rev() {
            v.extend(std::iter::repeat_n(r, k as usize));
        }
        v
    }
}

/// A permutation in cycle notation, cycles and elements ordered by the
/// interval construction (deepest interval first, elements by sample value).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycledPermutation {
    cycles: Vec<Vec<u32>>,
}

impl CycledPermutation {
    pub fn cycles(&self) -> &[Vec<u32>] {
        &self.cycles
    }

    pub fn n(&self) -> u64 {
        self.cycles.iter().map(|c| c.len() as u64).sum()
    }

    /// Length of the last cycle in construction order (the first decrement of
    /// the associated Markov chain).
    pub fn last_cycle_len(&self) -> u64 {
        self.cycles.last().map_or(0, |c| c.len() as u64)
    }

    pub fn partition(&self) -> CyclePartition {
        let mut counts = BTreeMap::new();
        for c in &self.cycles {
            *counts.entry(c.len() as u64).or_insert(0u64) += 1;
        }
        CyclePartition::new(self.n(), counts).expect("cycles partition the label set")
    }
}

/// One row q(n, 1..=n) of the decrement matrix.
#[derive(Debug, Clone)]
pub struct DecrementRow {
    n: u64,
    probs: Vec<f64>,
}

/// Tolerance on the row normalization check.
const ROW_SUM_TOL: f64 = 1e-12;

impl DecrementRow {
    pub fn n(&self) -> u64 {
        self.n
    }

    /// q(n, m) for 1 <= m <= n.
    pub fn q(&self, m: u64) -> f64 {
        self.probs[(m - 1) as usize]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Inverse-CDF draw of a jump size (consumes one uniform).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return (i + 1) as u64;
            }
        }
        self.n
    }
}

/// Decrement row q(n, m) = C(n,m) E[W^{n-m}(1-W)^m] / (1 - E W^n).
///
/// For beta factors the whole row follows from the m = 0 moment by exact
/// factor ratios, keeping the normalization defect near machine precision at
/// row lengths in the hundreds; other models integrate each entry.
pub fn decrement_pmf(model: &FactorModel, n: u64) -> Result<DecrementRow> {
    if n == 0 {
        return Err(Error::Domain("decrement row needs n >= 1".into()));
    }
    let mut probs = Vec::with_capacity(n as usize);
    match model {
        FactorModel::Beta { a, b } => {
            let ln_ewn = model.ln_power_moment_beta(n).unwrap();
            let denom = -ln_ewn.exp_m1(); // 1 - E W^n without cancellation
            // v_m = C(n,m) E[W^{n-m}(1-W)^m]; v_0 = E W^n
            let mut v = ln_ewn.exp();
            for m in 0..n {
                let (mf, nf) = (m as f64, n as f64);
                v *= (nf - mf) / (mf + 1.0) * (b + mf) / (a + nf - mf - 1.0);
                probs.push(v / denom);
            }
        }
        _ => {
            let denom = 1.0 - model.mixed_moment(n, 0)?;
            for m in 1..=n {
                probs.push(scaled_binomial_moment(model, n, m)? / denom);
            }
        }
    }
    let sum = crate::numeric::kahan_sum(probs.iter().copied());
    let defect = (sum - 1.0).abs();
    if defect > ROW_SUM_TOL {
        return Err(Error::Numeric(format!(
            "decrement row at n = {n} sums to 1 {defect:+e}"
        )));
    }
    Ok(DecrementRow { n, probs })
}

/// Single entry q(n, m) in log space; usable at states far beyond full-row
/// scale (the thinning sampler never needs rows there, this is diagnostic).
pub fn decrement_probability(model: &FactorModel, n: u64, m: u64) -> Result<f64> {
    if n == 0 || m == 0 || m > n {
        return Err(Error::Domain(format!("decrement entry ({n}, {m}) out of range")));
    }
    match model {
        FactorModel::Beta { a, b } => {
            use statrs::function::gamma::ln_gamma;
            let (nf, mf) = (n as f64, m as f64);
            let ln_c = ln_gamma(nf + 1.0) - ln_gamma(mf + 1.0) - ln_gamma(nf - mf + 1.0);
            let ln_mom = ln_gamma(a + nf - mf) + ln_gamma(b + mf) - ln_gamma(a + b + nf)
                - (ln_gamma(*a) + ln_gamma(*b) - ln_gamma(a + b));
            // ln E W^n in O(1); states can be of order 1e8 here
            let ln_ewn =
                ln_gamma(a + nf) + ln_gamma(a + b) - ln_gamma(*a) - ln_gamma(a + b + nf);
            let denom = -ln_ewn.exp_m1();
            Ok((ln_c + ln_mom).exp() / denom)
        }
        _ => {
            let denom = 1.0 - model.mixed_moment(n, 0)?;
            Ok(scaled_binomial_moment(model, n, m)? / denom)
        }
    }
}

/// C(n,m) E[W^{n-m}(1-W)^m] as one log-space integrand, so the binomial
/// factor never amplifies an absolute quadrature error.
fn scaled_binomial_moment(model: &FactorModel, n: u64, m: u64) -> Result<f64> {
    let ln_c = ln_choose(n, m);
    let (jf, mf) = ((n - m) as f64, m as f64);
    match model {
        FactorModel::Beta { .. } => unreachable!("beta rows use the exact product path"),
        FactorModel::ParetoLog { alpha } => {
            let al = *alpha;
            let f = |t: f64| {
                if t <= 0.0 {
                    return 0.0;
                }
                let e = (-1.0 / t).exp();
                let ln_body = -jf / t + mf * (-e).ln_1p();
                if ln_body + ln_c < -700.0 {
                    return 0.0;
                }
                (ln_c + ln_body).exp() * al * t.powf(al - 1.0)
            };
            crate::quad::integrate(&f, 0.0, 1.0, 2e-15)
        }
        FactorModel::Tabulated(t) => t.integrate_scaled(ln_c, jf, mf, 2e-15),
    }
}

fn ln_choose(n: u64, m: u64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    ln_gamma(n as f64 + 1.0) - ln_gamma(m as f64 + 1.0) - ln_gamma((n - m) as f64 + 1.0)
}

/// Markov-chain partition sampler with memoized decrement rows.
///
/// Rows are cached per visited state; the cache takes read locks on the hot
/// path and a write lock only on first visit, so concurrent sampling from a
/// shared instance is cheap.
pub struct MarkovSampler {
    model: FactorModel,
    rows: RwLock<HashMap<u64, Arc<DecrementRow>>>,
}

impl MarkovSampler {
    pub fn new(model: FactorModel) -> Self {
        Self { model, rows: RwLock::new(HashMap::new()) }
    }

    pub fn model(&self) -> &FactorModel {
        &self.model
    }

    pub fn row(&self, n: u64) -> Result<Arc<DecrementRow>> {
        if let Some(row) = self.rows.read().unwrap().get(&n) {
            return Ok(Arc::clone(row));
        }
        let row = Arc::new(decrement_pmf(&self.model, n)?);
        let mut guard = self.rows.write().unwrap();
        Ok(Arc::clone(guard.entry(n).or_insert(row)))
    }

    /// Run the decreasing chain n -> n - A_n -> ... -> 0 and count jump sizes.
    pub fn sample<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> Result<CyclePartition> {
        if n == 0 {
            return Err(Error::Domain("cannot sample a partition of 0".into()));
        }
        let mut state = n;
        let mut counts = BTreeMap::new();
        while state > 0 {
            let jump = self.row(state)?.sample(rng);
            *counts.entry(jump).or_insert(0u64) += 1;
            state -= jump;
        }
        CyclePartition::new(n, counts)
    }

    /// Ordered decrements of one chain path (first jump first).
    pub fn sample_decrements<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> Result<Vec<u64>> {
        let mut state = n;
        let mut jumps = Vec::new();
        while state > 0 {
            let jump = self.row(state)?.sample(rng);
            jumps.push(jump);
            state -= jump;
        }
        Ok(jumps)
    }
}

/// Occupancy-scheme sampler: repeatedly thin the remaining balls with a fresh
/// stick factor, skipping empty boxes. Runs in O(number of occupied boxes)
/// binomial draws, which makes it the sampler of choice for huge n.
pub fn sample_partition_thinning<R: Rng + ?Sized>(
    model: &FactorModel,
    n: u64,
    rng: &mut R,
) -> CyclePartition {
    assert!(n >= 1, "thinning sampler needs n >= 1");
    let mut remaining = n;
    let mut counts = BTreeMap::new();
    while remaining > 0 {
        let w = model.sample(rng);
        let d = rand_distr::Binomial::new(remaining, 1.0 - w)
            .expect("w strictly inside (0,1)")
            .sample(rng);
        if d > 0 {
            *counts.entry(d).or_insert(0u64) += 1;
            remaining -= d;
        }
    }
    CyclePartition::new(n, counts).expect("thinning conserves mass")
}

/// Interval construction: group a uniform sample by the stick intervals and
/// read the cycles off in the natural order.
pub fn sample_permutation_basic<R: Rng + ?Sized>(
    model: &FactorModel,
    n: u64,
    rng: &mut R,
) -> CycledPermutation {
    assert!(n >= 1, "basic construction needs n >= 1");
    let mut points = Vec::with_capacity(n as usize);
    for _ in 0..n {
        loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                points.push(u);
                break;
            }
        }
    }
    let min_u = points.iter().copied().fold(f64::INFINITY, f64::min);
    let mut atoms = Vec::new();
    let mut q = 1.0f64;
    while q >= min_u {
        q *= model.sample(rng);
        atoms.push(q);
    }
    permutation_from_points(&points, &atoms)
}

/// Deterministic core of the interval construction. `atoms` are the stick
/// atoms Q_1 > Q_2 > ... (descending); the last atom must lie strictly below
/// every sample point so membership is decided for all of them.
pub fn permutation_from_points(points: &[f64], atoms: &[f64]) -> CycledPermutation {
    debug_assert!(atoms.windows(2).all(|w| w[1] <= w[0]));
    debug_assert!(
        points.iter().all(|&u| atoms.last().is_some_and(|&q| q < u)),
        "atoms must cover the sample"
    );
    // interval index of u: number of atoms >= u (0 means u in (Q_1, 1])
    let interval = |u: f64| atoms.partition_point(|&q| q >= u);
    let mut groups: BTreeMap<usize, Vec<(f64, u32)>> = BTreeMap::new();
    for (i, &u) in points.iter().enumerate() {
        groups.entry(interval(u)).or_default().push((u, (i + 1) as u32));
    }
    // deepest interval (largest index, smallest points) first
    let mut cycles = Vec::with_capacity(groups.len());
    for (_, mut members) in groups.into_iter().rev() {
        members.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        cycles.push(members.into_iter().map(|(_, label)| label).collect());
    }
    CycledPermutation { cycles }
}

/// k * sum over j >= 1, jk < n of q(n, jk), from a precomputed row.
pub fn divisibility_bound_row(row: &DecrementRow, k: u64) -> f64 {
    assert!(k >= 1 && k <= row.n());
    let jmax = row.n() / k; // sum runs over j = 1 .. jmax - 1
    let mut sum = KahanSum::new();
    for j in 1..jmax {
        sum.add(row.q(j * k));
    }
    k as f64 * sum.value()
}

/// Convenience form computing the row itself.
pub fn divisibility_bound(model: &FactorModel, n: u64, k: u64) -> Result<f64> {
    if !(1 <= k && k <= n) {
        return Err(Error::Domain(format!("divisibility bound needs 1 <= k <= n, got k = {k}")));
    }
    Ok(divisibility_bound_row(&decrement_pmf(model, n)?, k))
}

/// First j stick frequencies P_i = W_1...W_{i-1}(1 - W_i) of one realization.
pub fn frequency_prefix<R: Rng + ?Sized>(model: &FactorModel, j: u64, rng: &mut R) -> Vec<f64> {
    assert!(j >= 1);
    let mut out = Vec::with_capacity(j as usize);
    let mut prod = 1.0f64;
    for _ in 0..j {
        let w = model.sample(rng);
        out.push(prod * (1.0 - w));
        prod *= w;
    }
    out
}
