//! Exact law of the cycle partition for small n, by dynamic programming over
//! the decrement matrix: the chain's first jump m turns a partition of n into
//! a partition of n - m with one part removed.

use super::decrement_pmf;
use crate::error::{Error, Result};
use crate::factor::FactorModel;
use crate::numeric::DoubleDouble;
use std::collections::BTreeMap;
use std::io::Write;

/// p(30) = 5604 partitions keeps the table and the memoized sub-laws small.
pub const EXACT_LAW_MAX_N: u64 = 30;

const NORMALIZATION_TOL: f64 = 1e-10;

/// Probability table over partitions of n, keyed by the multiset of parts in
/// descending order.
#[derive(Debug, Clone)]
pub struct ExactPartitionLaw {
    n: u64,
    table: BTreeMap<Vec<u32>, f64>,
}

impl ExactPartitionLaw {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn table(&self) -> &BTreeMap<Vec<u32>, f64> {
        &self.table
    }

    pub fn prob(&self, parts_desc: &[u32]) -> f64 {
        self.table.get(parts_desc).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// CSV export: `partition,probability` with parts joined by `+` and 17
    /// significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "partition,probability")?;
        for (parts, p) in &self.table {
            let key: Vec<String> = parts.iter().map(|r| r.to_string()).collect();
            writeln!(out, "{},{:.16e}", key.join("+"), p)?;
        }
        Ok(())
    }
}

/// Laws for every k <= n, built bottom-up. Index k holds the law of the
/// partition of k; probabilities accumulate in double-double precision.
fn build_tables(model: &FactorModel, n: u64) -> Result<Vec<BTreeMap<Vec<u32>, DoubleDouble>>> {
    let mut laws: Vec<BTreeMap<Vec<u32>, DoubleDouble>> = Vec::with_capacity(n as usize + 1);
    laws.push(BTreeMap::from([(Vec::new(), DoubleDouble::from_f64(1.0))]));
    for k in 1..=n {
        let row = decrement_pmf(model, k)?;
        let mut table: BTreeMap<Vec<u32>, DoubleDouble> = BTreeMap::new();
        for m in 1..=k {
            let q = row.q(m);
            for (sub, p) in &laws[(k - m) as usize] {
                let mut key = Vec::with_capacity(sub.len() + 1);
                let part = m as u32;
                let pos = sub.partition_point(|&x| x >= part);
                key.extend_from_slice(&sub[..pos]);
                key.push(part);
                key.extend_from_slice(&sub[pos..]);
                let entry = table.entry(key).or_insert(DoubleDouble::ZERO);
                *entry = entry.add(p.mul_f64(q));
            }
        }
        laws.push(table);
    }
    Ok(laws)
}

/// Exact distribution of the multiset of chain decrements for n <= 30.
pub fn exact_partition_law(model: &FactorModel, n: u64) -> Result<ExactPartitionLaw> {
    if n == 0 {
        return Err(Error::Domain("exact law needs n >= 1".into()));
    }
    if n > EXACT_LAW_MAX_N {
        return Err(Error::SizeLimit { n, max: EXACT_LAW_MAX_N });
    }
    let laws = build_tables(model, n)?;
    let table_dd = &laws[n as usize];
    let mut total = DoubleDouble::ZERO;
    for p in table_dd.values() {
        total = total.add(*p);
    }
    let defect = (total.to_f64() - 1.0).abs();
    if defect > NORMALIZATION_TOL {
        return Err(Error::Numeric(format!(
            "exact law at n = {n} normalizes to 1 {defect:+e}"
        )));
    }
    let table = table_dd
        .iter()
        .map(|(k, v)| (k.clone(), v.to_f64()))
        .collect();
    Ok(ExactPartitionLaw { n, table })
}

/// Law of the partition of n - m, the conditional law of the rest of the
/// chain given a first decrement of m (the chain restarts at n - m).
pub fn law_after_first_decrement(
    model: &FactorModel,
    n: u64,
    m: u64,
) -> Result<BTreeMap<Vec<u32>, f64>> {
    if !(1 <= m && m <= n) {
        return Err(Error::Domain(format!("first decrement {m} out of range for n = {n}")));
    }
    if n == m {
        return Ok(BTreeMap::from([(Vec::new(), 1.0)]));
    }
    Ok(exact_partition_law(model, n - m)?.table().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::FactorModel;
    use statrs::function::gamma::ln_gamma;

    fn uniform() -> FactorModel {
        FactorModel::beta(1.0, 1.0).unwrap()
    }

    #[test]
    fn n_one_is_trivial() {
        let law = exact_partition_law(&uniform(), 1).unwrap();
        assert_eq!(law.len(), 1);
        assert!((law.prob(&[1]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_n_three() {
        // q(3,.) = 1/3 rows: P{3} = 1/3, P{2,1} = 1/2, P{1,1,1} = 1/6
        let law = exact_partition_law(&uniform(), 3).unwrap();
        assert!((law.prob(&[3]) - 1.0 / 3.0).abs() < 1e-13);
        assert!((law.prob(&[2, 1]) - 0.5).abs() < 1e-13);
        assert!((law.prob(&[1, 1, 1]) - 1.0 / 6.0).abs() < 1e-13);
        let total: f64 = law.table().values().sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_oversized_n() {
        assert!(matches!(
            exact_partition_law(&uniform(), 31),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn normalizes_for_quadrature_models() {
        let model = FactorModel::pareto_log(1.5).unwrap();
        let law = exact_partition_law(&model, 9).unwrap();
        let total: f64 = law.table().values().sum();
        assert!((total - 1.0).abs() < 1e-10, "total = {total}");
    }

    /// Ewens sampling formula by brute-force enumeration of S_n: count
    /// permutations per cycle type, weight theta^{#cycles}, normalize by the
    /// rising factorial.
    fn ewens_table_by_enumeration(n: usize, theta: f64) -> BTreeMap<Vec<u32>, f64> {
        let mut counts: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut c = vec![0usize; n];
        let mut record = |perm: &[usize]| {
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
            *counts.entry(lengths).or_insert(0.0) += theta.powi(k);
        };
        record(&perm);
        // Heap's algorithm
        let mut i = 0;
        while i < n {
            if c[i] < i {
                if i % 2 == 0 {
                    perm.swap(0, i);
                } else {
                    perm.swap(c[i], i);
                }
                record(&perm);
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        let rising = (ln_gamma(theta + n as f64) - ln_gamma(theta)).exp();
        counts.values_mut().for_each(|v| *v /= rising);
        counts
    }

    #[test]
    fn matches_ewens_sampling_formula() {
        for &theta in &[0.5, 1.0, 2.0] {
            let model = FactorModel::beta(theta, 1.0).unwrap();
            for n in 1..=8u64 {
                let law = exact_partition_law(&model, n).unwrap();
                let esf = ewens_table_by_enumeration(n as usize, theta);
                assert_eq!(law.len(), esf.len(), "support mismatch at n = {n}");
                for (parts, p) in esf {
                    let got = law.prob(&parts);
                    assert!(
                        (got - p).abs() < 1e-9,
                        "theta {theta} n {n} {parts:?}: {got} vs {p}"
                    );
                }
            }
        }
    }

    #[test]
    fn regeneration_identity_over_tables() {
        // P_n(lambda) = sum over distinct parts m of q(n,m) * P_{n-m}(lambda
        // minus one copy of m), with the sub-laws fetched as independent
        // top-level computations.
        let model = FactorModel::beta(2.0, 1.0).unwrap();
        for n in 2..=12u64 {
            let law = exact_partition_law(&model, n).unwrap();
            let row = decrement_pmf(&model, n).unwrap();
            for (parts, p) in law.table() {
                let mut acc = 0.0;
                let mut seen = std::collections::BTreeSet::new();
                for (i, &m) in parts.iter().enumerate() {
                    if !seen.insert(m) {
                        continue;
                    }
                    let mut rest = parts.clone();
                    rest.remove(i);
                    let sub = law_after_first_decrement(&model, n, m as u64).unwrap();
                    acc += row.q(m as u64) * sub.get(&rest).copied().unwrap_or(0.0);
                }
                assert!((acc - p).abs() < 1e-11, "n {n} {parts:?}: {acc} vs {p}");
            }
        }
    }

    #[test]
    fn csv_export_shape() {
        let law = exact_partition_law(&uniform(), 4).unwrap();
        let mut buf = Vec::new();
        law.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("partition,probability"));
        assert!(text.lines().any(|l| l.starts_with("3+1,")));
        assert_eq!(text.lines().count(), 1 + law.len());
    }
}
