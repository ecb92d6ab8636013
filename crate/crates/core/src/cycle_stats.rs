//! Exact statistics of a cycle partition: the log of the group order (lcm of
//! represented lengths, via prime exponents), the log of the product of cycle
//! lengths, divisibility counts, and the prime-power identity for their gap.

use crate::error::{Error, Result};
use crate::numeric::KahanSum;
use crate::partition::CyclePartition;
use num_bigint::BigUint;
use std::collections::BTreeMap;

/// Primes up to a limit; factorizes integers up to limit^2 by trial division.
#[derive(Debug, Clone)]
pub struct Sieve {
    limit: u64,
    primes: Vec<u64>,
}

impl Sieve {
    pub fn new(limit: u64) -> Self {
        let limit = limit.max(2);
        let mut is_comp = vec![false; (limit + 1) as usize];
        let mut primes = Vec::new();
        for p in 2..=limit {
            if !is_comp[p as usize] {
                primes.push(p);
                let mut q = p * p;
                while q <= limit {
                    is_comp[q as usize] = true;
                    q += p;
                }
            }
        }
        Self { limit, primes }
    }

    /// Sieve large enough to factorize any cycle length of a partition of n.
    pub fn for_max_length(n: u64) -> Self {
        Self::new((n as f64).sqrt().ceil() as u64 + 1)
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// Prime factorization; requires x <= limit^2.
    pub fn factorize(&self, mut x: u64) -> Vec<(u64, u32)> {
        assert!(x >= 1);
        assert!(
            x <= self.limit.saturating_mul(self.limit),
            "sieve limit {} too small for {x}",
            self.limit
        );
        let mut out = Vec::new();
        for &p in &self.primes {
            if p * p > x {
                break;
            }
            if x % p == 0 {
                let mut e = 0u32;
                while x % p == 0 {
                    x /= p;
                    e += 1;
                }
                out.push((p, e));
            }
        }
        if x > 1 {
            out.push((x, 1));
        }
        out
    }
}

/// Map prime -> max p-adic valuation over represented cycle lengths; encodes
/// the lcm of the represented lengths.
#[derive(Debug, Clone, Default)]
pub struct PrimeExponentProfile {
    exps: BTreeMap<u64, u32>,
}

impl PrimeExponentProfile {
    pub fn from_partition(partition: &CyclePartition, sieve: &Sieve) -> Self {
        let mut exps = BTreeMap::new();
        for &r in partition.counts().keys() {
            if r == 1 {
                continue;
            }
            for (p, e) in sieve.factorize(r) {
                let entry = exps.entry(p).or_insert(0);
                *entry = (*entry).max(e);
            }
        }
        Self { exps }
    }

    pub fn exponents(&self) -> &BTreeMap<u64, u32> {
        &self.exps
    }

    /// Sum of e_p log p: the log of the lcm.
    pub fn log_value(&self) -> f64 {
        let mut s = KahanSum::new();
        for (&p, &e) in &self.exps {
            s.add(e as f64 * (p as f64).ln());
        }
        s.value()
    }

    /// The lcm itself as an exact integer.
    pub fn value(&self) -> BigUint {
        let mut out = BigUint::from(1u32);
        for (&p, &e) in &self.exps {
            out *= BigUint::from(p).pow(e);
        }
        out
    }
}

/// log of the order of the permutation (lcm of represented cycle lengths).
pub fn log_order(partition: &CyclePartition, sieve: &Sieve) -> f64 {
    PrimeExponentProfile::from_partition(partition, sieve).log_value()
}

/// Exact big-integer order; the float path must agree with its log.
pub fn exact_order(partition: &CyclePartition, sieve: &Sieve) -> BigUint {
    PrimeExponentProfile::from_partition(partition, sieve).value()
}

/// Big-integer lcm by gcd folding, independent of the prime-profile path.
pub fn exact_order_by_gcd(partition: &CyclePartition) -> BigUint {
    use num_bigint::BigUint as B;
    fn gcd(mut a: B, mut b: B) -> B {
        while b != B::from(0u32) {
            let r = &a % &b;
            a = b;
            b = r;
        }
        a
    }
    let mut acc = B::from(1u32);
    for &r in partition.counts().keys() {
        let r = B::from(r);
        let g = gcd(acc.clone(), r.clone());
        acc = acc / g * r;
    }
    acc
}

/// log T = sum over lengths of K_r log r, compensated.
pub fn log_t(partition: &CyclePartition) -> f64 {
    let mut s = KahanSum::new();
    for (&r, &k) in partition.counts() {
        if r > 1 {
            s.add(k as f64 * (r as f64).ln());
        }
    }
    s.value()
}

/// D_{n,j}: number of cycles whose length is divisible by j.
pub fn d_stat(partition: &CyclePartition, j: u64) -> u64 {
    assert!(j >= 1 && j <= partition.n(), "j out of range");
    partition
        .counts()
        .iter()
        .filter(|(&r, _)| r % j == 0)
        .map(|(_, &k)| k)
        .sum()
}

/// Prime-power gap sum: over primes p and powers s, log p * (D_{n,p^s} - 1)^+.
///
/// Only prime powers dividing some represented length contribute, so the sum
/// runs over the factorizations rather than over all p^s <= n.
pub fn pittel_gap(partition: &CyclePartition, sieve: &Sieve) -> f64 {
    // per prime: list of (valuation, multiplicity) across represented lengths
    let mut by_prime: BTreeMap<u64, Vec<(u32, u64)>> = BTreeMap::new();
    for (&r, &k) in partition.counts() {
        if r == 1 {
            continue;
        }
        for (p, e) in sieve.factorize(r) {
            by_prime.entry(p).or_default().push((e, k));
        }
    }
    let mut gap = KahanSum::new();
    for (p, vals) in by_prime {
        let logp = (p as f64).ln();
        let max_e = vals.iter().map(|&(e, _)| e).max().unwrap();
        for s in 1..=max_e {
            let d: u64 = vals.iter().filter(|&&(e, _)| e >= s).map(|&(_, k)| k).sum();
            if d > 1 {
                gap.add(logp * (d - 1) as f64);
            }
        }
    }
    gap.value()
}

/// Separable statistic: sum over lengths of K_r h(r).
pub fn separable<F: Fn(u64) -> f64>(partition: &CyclePartition, h: F) -> f64 {
    let mut s = KahanSum::new();
    for (&r, &k) in partition.counts() {
        s.add(k as f64 * h(r));
    }
    s.value()
}

/// Statistic export row used by the experiment CSVs.
#[derive(Debug, Clone, Copy)]
pub struct StatRow {
    pub n: u64,
    pub total_cycles: u64,
    pub log_t: f64,
    pub log_order: f64,
    pub gap: f64,
}

impl StatRow {
    pub const CSV_HEADER: &'static str = "n,K_n,logT,logO,gap";

    pub fn csv_record(&self) -> String {
        format!("{},{},{},{},{}", self.n, self.total_cycles, self.log_t, self.log_order, self.gap)
    }
}

pub fn stat_row(partition: &CyclePartition, sieve: &Sieve) -> StatRow {
    let lt = log_t(partition);
    let lo = log_order(partition, sieve);
    StatRow {
        n: partition.n(),
        total_cycles: partition.total_cycles(),
        log_t: lt,
        log_order: lo,
        gap: pittel_gap(partition, sieve),
    }
}

/// Per-replicate statistic export used by the experiment driver.
pub fn write_stat_csv<W: std::io::Write>(rows: &[StatRow], mut out: W) -> Result<()> {
    writeln!(out, "{}", StatRow::CSV_HEADER)?;
    for row in rows {
        writeln!(out, "{}", row.csv_record())?;
    }
    Ok(())
}

/// Residual of the prime-power identity for one partition.
pub fn identity_residual(partition: &CyclePartition, sieve: &Sieve) -> f64 {
    let row = stat_row(partition, sieve);
    (row.log_t - row.log_order - row.gap).abs()
}

/// Checks the identity within `tol`, else reports the offending partition.
pub fn check_identity(partition: &CyclePartition, sieve: &Sieve, tol: f64) -> Result<f64> {
    let r = identity_residual(partition, sieve);
    if r > tol {
        return Err(Error::Numeric(format!(
            "identity residual {r:e} exceeds {tol:e} on partition {:?}",
            partition.sorted_lengths_desc()
        )));
    }
    Ok(r)
}
