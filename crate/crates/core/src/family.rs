//! Function families, split patterns, balance certificates and the exact
//! brute-force balance verifier.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::subsets::SubsetIndex;

/// Default cap on the number of k-subsets a verifier may enumerate.
pub const DEFAULT_SUBSET_BUDGET: u64 = 10_000_000;

/// Part sizes for splitting a k-set into `l` parts: the first `k mod l`
/// parts get `ceil(k/l)` elements, the rest `floor(k/l)`.
pub fn part_sizes(k: usize, l: usize) -> Vec<usize> {
    assert!(l >= 1, "part_sizes needs at least one part");
    let (base, extra) = (k / l, k % l);
    (0..l).map(|j| base + usize::from(j < extra)).collect()
}

/// The property a function must have on a k-subset to be counted.
///
/// With `k <= l` the function must be 1-1 on the subset. With `k > l` the
/// preimage of color `j` inside the subset must have exactly
/// `part_sizes(k, l)[j]` elements.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SplitPattern {
    k: usize,
    l: usize,
    part_sizes: Vec<usize>,
}

impl SplitPattern {
    pub fn new(k: usize, l: usize) -> Result<Self> {
        if k == 0 || l == 0 {
            return Err(Error::param(format!(
                "split pattern needs k >= 1 and l >= 1, got k={k} l={l}"
            )));
        }
        Ok(Self {
            k,
            l,
            part_sizes: part_sizes(k, l),
        })
    }

    /// The perfect-hash pattern: 1-1 from a k-set onto `[0, k)`.
    pub fn perfect(k: usize) -> Result<Self> {
        Self::new(k, k)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn part_sizes(&self) -> &[usize] {
        &self.part_sizes
    }

    pub fn is_injective(&self) -> bool {
        self.k <= self.l
    }

    pub fn is_perfect(&self) -> bool {
        self.k == self.l
    }

    /// Per-color capacity. A subset matches the pattern iff its k elements
    /// fit the capacities exactly.
    pub fn quotas(&self) -> Vec<u32> {
        if self.is_injective() {
            vec![1; self.l]
        } else {
            self.part_sizes.iter().map(|&s| s as u32).collect()
        }
    }

    /// Whether the given colors of a k-subset achieve the pattern.
    pub fn matches(&self, colors: impl IntoIterator<Item = u32>) -> bool {
        let mut quota = self.quotas();
        let mut seen = 0usize;
        for c in colors {
            let c = c as usize;
            if c >= self.l || quota[c] == 0 {
                return false;
            }
            quota[c] -= 1;
            seen += 1;
        }
        seen == self.k
    }
}

impl fmt::Display for SplitPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_injective() {
            write!(f, "1-1 (k={}, l={})", self.k, self.l)
        } else {
            let parts: Vec<String> = self.part_sizes.iter().map(|s| s.to_string()).collect();
            write!(f, "split ({}) (k={}, l={})", parts.join(","), self.k, self.l)
        }
    }
}

/// Lazy enumeration contract: a family of known size whose functions can be
/// produced on demand, in a fixed order, by index.
pub trait FunctionSource: Send + Sync {
    fn domain_size(&self) -> usize;

    fn range_size(&self) -> usize;

    fn len(&self) -> u64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes function `index` into `out`, which has `domain_size()` slots.
    fn write_function(&self, index: u64, out: &mut [u32]);

    /// Value of function `index` at `x`.
    fn value(&self, index: u64, x: usize) -> u32 {
        let mut buf = vec![0u32; self.domain_size()];
        self.write_function(index, &mut buf);
        buf[x]
    }
}

impl<T: FunctionSource + ?Sized> FunctionSource for std::sync::Arc<T> {
    fn domain_size(&self) -> usize {
        (**self).domain_size()
    }
    fn range_size(&self) -> usize {
        (**self).range_size()
    }
    fn len(&self) -> u64 {
        (**self).len()
    }
    fn write_function(&self, index: u64, out: &mut [u32]) {
        (**self).write_function(index, out)
    }
    fn value(&self, index: u64, x: usize) -> u32 {
        (**self).value(index, x)
    }
}

/// An explicit, materialized family of functions `[0, n) -> [0, l)`.
#[derive(Clone, PartialEq, Eq)]
pub struct FunctionFamily {
    domain: usize,
    range: usize,
    // row-major, one row of `domain` values per function
    values: Vec<u32>,
}

impl fmt::Debug for FunctionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionFamily")
            .field("domain", &self.domain)
            .field("range", &self.range)
            .field("len", &self.len())
            .finish()
    }
}

impl FunctionFamily {
    pub fn new(domain: usize, range: usize, functions: Vec<Vec<u32>>) -> Result<Self> {
        let mut values = Vec::with_capacity(domain * functions.len());
        for (i, f) in functions.iter().enumerate() {
            if f.len() != domain {
                return Err(Error::param(format!(
                    "function {i} has {} entries, expected {domain}",
                    f.len()
                )));
            }
            values.extend_from_slice(f);
        }
        Self::from_flat(domain, range, values)
    }

    /// Builds a family from row-major values.
    pub fn from_flat(domain: usize, range: usize, values: Vec<u32>) -> Result<Self> {
        if domain == 0 || range == 0 {
            return Err(Error::param("domain and range must be positive"));
        }
        if values.is_empty() || !values.len().is_multiple_of(domain) {
            return Err(Error::param(format!(
                "{} values do not form a non-empty family over a domain of {domain}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|&v| v as usize >= range) {
            return Err(Error::param(format!(
                "function {} maps {} to {}, outside [0, {range})",
                pos / domain,
                pos % domain,
                values[pos]
            )));
        }
        Ok(Self {
            domain,
            range,
            values,
        })
    }

    /// All `range^domain` functions, in lexicographic order of their value
    /// vectors (position 0 most significant).
    pub fn exhaustive(domain: usize, range: usize, max_functions: u64) -> Result<Self> {
        let count = (range as u128).checked_pow(domain as u32).unwrap_or(u128::MAX);
        if count > max_functions as u128 {
            return Err(Error::budget("exhaustive family", count, max_functions as u128));
        }
        let mut values = Vec::with_capacity(count as usize * domain);
        let mut current = vec![0u32; domain];
        for _ in 0..count {
            values.extend_from_slice(&current);
            for x in (0..domain).rev() {
                current[x] += 1;
                if (current[x] as usize) < range {
                    break;
                }
                current[x] = 0;
            }
        }
        Self::from_flat(domain, range, values)
    }

    /// The single constant-zero function.
    pub fn constant(domain: usize, range: usize) -> Result<Self> {
        Self::from_flat(domain, range, vec![0; domain])
    }

    /// Copies any source into memory, refusing more than `max_values` entries.
    pub fn materialize(source: &(impl FunctionSource + ?Sized), max_values: u64) -> Result<Self> {
        let n = source.domain_size();
        let total = source.len() as u128 * n as u128;
        if total > max_values as u128 {
            return Err(Error::budget("materializing family", total, max_values as u128));
        }
        let mut values = vec![0u32; total as usize];
        values
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| source.write_function(i as u64, row));
        Self::from_flat(n, source.range_size(), values)
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn range(&self) -> usize {
        self.range
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.domain
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn function(&self, i: usize) -> &[u32] {
        &self.values[i * self.domain..(i + 1) * self.domain]
    }

    pub fn functions(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        self.values.chunks_exact(self.domain)
    }

    pub fn as_flat(&self) -> &[u32] {
        &self.values
    }
}

impl FunctionSource for FunctionFamily {
    fn domain_size(&self) -> usize {
        self.domain
    }

    fn range_size(&self) -> usize {
        self.range
    }

    fn len(&self) -> u64 {
        FunctionFamily::len(self) as u64
    }

    fn write_function(&self, index: u64, out: &mut [u32]) {
        out.copy_from_slice(self.function(index as usize));
    }

    #[inline]
    fn value(&self, index: u64, x: usize) -> u32 {
        self.values[index as usize * self.domain + x]
    }
}

/// A claimed balance `(T, delta)` for a pattern, stored exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BalanceCertificate {
    pub t: BigRational,
    pub delta: BigRational,
    pub pattern: SplitPattern,
}

impl BalanceCertificate {
    pub fn new(t: BigRational, delta: BigRational, pattern: SplitPattern) -> Result<Self> {
        if t <= BigRational::zero() {
            return Err(Error::param(format!("certificate T must be positive, got {t}")));
        }
        if delta < BigRational::one() {
            return Err(Error::param(format!("certificate delta must be >= 1, got {delta}")));
        }
        Ok(Self { t, delta, pattern })
    }

    /// The certificate `(1, 1)`: every subset is hit by exactly one function.
    pub fn unit(pattern: SplitPattern) -> Self {
        Self {
            t: BigRational::one(),
            delta: BigRational::one(),
            pattern,
        }
    }

    pub fn lower(&self) -> BigRational {
        &self.t / &self.delta
    }

    pub fn upper(&self) -> BigRational {
        &self.t * &self.delta
    }

    /// Exact check `T/delta <= min` and `max <= delta*T`.
    pub fn admits_range(&self, min_count: u128, max_count: u128) -> bool {
        let min = BigRational::from_integer(BigInt::from(min_count));
        let max = BigRational::from_integer(BigInt::from(max_count));
        self.lower() <= min && max <= self.upper()
    }

    pub fn admits(&self, report: &BalanceReport) -> bool {
        self.admits_range(report.min_count, report.max_count)
    }
}

/// Outcome of an exhaustive balance scan.
#[derive(Clone, Debug, PartialEq)]
pub struct BalanceReport {
    pub subsets: u64,
    pub min_count: u128,
    pub max_count: u128,
    pub arg_min: Vec<usize>,
    pub arg_max: Vec<usize>,
    /// `sqrt(max/min)`, absent when some subset is never hit.
    pub best_delta: Option<f64>,
    /// `sqrt(min*max)`.
    pub best_t: f64,
}

impl BalanceReport {
    pub(crate) fn from_extremes(
        subsets: u64,
        (min_count, arg_min): (u128, Vec<usize>),
        (max_count, arg_max): (u128, Vec<usize>),
    ) -> Self {
        let (lo, hi) = (min_count as f64, max_count as f64);
        let best_delta = (min_count > 0).then(|| (hi / lo).sqrt());
        Self {
            subsets,
            min_count,
            max_count,
            arg_min,
            arg_max,
            best_delta,
            best_t: (lo * hi).sqrt(),
        }
    }

    /// Builds a report from a per-subset count table in rank order.
    pub fn from_counts<C: Copy + Into<u128>>(index: &SubsetIndex, counts: &[C]) -> Self {
        let (mut min_rank, mut max_rank) = (0usize, 0usize);
        for (rank, &c) in counts.iter().enumerate() {
            if c.into() < counts[min_rank].into() {
                min_rank = rank;
            }
            if c.into() > counts[max_rank].into() {
                max_rank = rank;
            }
        }
        Self::from_extremes(
            counts.len() as u64,
            (counts[min_rank].into(), index.unrank(min_rank as u64)),
            (counts[max_rank].into(), index.unrank(max_rank as u64)),
        )
    }

    /// A certificate this report satisfies, with a rational `T` and delta.
    /// `None` when some subset has count zero.
    pub fn tight_certificate(&self, pattern: SplitPattern) -> Option<BalanceCertificate> {
        if self.min_count == 0 {
            return None;
        }
        let min = BigRational::from_integer(BigInt::from(self.min_count));
        let max = BigRational::from_integer(BigInt::from(self.max_count));
        let t = (&min + &max) / BigRational::from_integer(BigInt::from(2));
        let delta = std::cmp::max(&t / &min, &max / &t);
        Some(BalanceCertificate { t, delta, pattern })
    }
}

/// A family together with the certificate it was built (and checked) for.
#[derive(Clone, Debug)]
pub struct CertifiedFamily {
    pub family: FunctionFamily,
    pub certificate: BalanceCertificate,
    /// Exhaustive report, when verification ran.
    pub report: Option<BalanceReport>,
}

fn check_consistency(source: &(impl FunctionSource + ?Sized), pattern: &SplitPattern) -> Result<()> {
    if source.range_size() != pattern.l() {
        return Err(Error::param(format!(
            "family range {} does not match pattern l={}",
            source.range_size(),
            pattern.l()
        )));
    }
    if pattern.k() > source.domain_size() {
        return Err(Error::param(format!(
            "pattern k={} exceeds domain {}",
            pattern.k(),
            source.domain_size()
        )));
    }
    Ok(())
}

/// Number of functions achieving `pattern` on the ascending subset `subset`.
/// A plain per-function scan, independent of the verifier's subset walk.
pub fn count_for_subset(
    family: &(impl FunctionSource + ?Sized),
    subset: &[usize],
    pattern: &SplitPattern,
) -> Result<u64> {
    check_consistency(family, pattern)?;
    if subset.len() != pattern.k() {
        return Err(Error::param(format!(
            "subset has {} elements, pattern expects {}",
            subset.len(),
            pattern.k()
        )));
    }
    if subset.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("subset must be strictly ascending"));
    }
    if let Some(&x) = subset.iter().find(|&&x| x >= family.domain_size()) {
        return Err(Error::param(format!(
            "element {x} outside domain {}",
            family.domain_size()
        )));
    }
    let mut hits = 0u64;
    for i in 0..family.len() {
        if pattern.matches(subset.iter().map(|&x| family.value(i, x))) {
            hits += 1;
        }
    }
    Ok(hits)
}

/// Walks the k-subsets of `[0, n)` in lexicographic order and reports the
/// rank of every subset on which `colors` fits `quota` exactly.
/// Subtrees that overflow a quota are skipped whole.
pub(crate) fn for_each_matching_subset(
    index: &SubsetIndex,
    colors: &[u32],
    quota: &mut [u32],
    on_hit: &mut impl FnMut(u64),
) {
    fn walk(
        index: &SubsetIndex,
        colors: &[u32],
        quota: &mut [u32],
        depth: usize,
        start: usize,
        mut rank: u64,
        on_hit: &mut impl FnMut(u64),
    ) {
        let (n, k) = (index.n(), index.k());
        let remaining = k - depth - 1;
        for a in start..=n - (k - depth) {
            let c = colors[a] as usize;
            if quota[c] > 0 {
                if remaining == 0 {
                    on_hit(rank);
                } else {
                    quota[c] -= 1;
                    walk(index, colors, quota, depth + 1, a + 1, rank, on_hit);
                    quota[c] += 1;
                }
            }
            rank += index.choose(n - a - 1, remaining);
        }
    }
    if index.k() == 0 {
        on_hit(0);
        return;
    }
    walk(index, colors, quota, 0, 0, 0, on_hit);
}

/// Per-subset pattern counts for every k-subset, indexed by lexicographic
/// rank. Parallel over functions; the result does not depend on thread count.
pub fn subset_counts(
    source: &(impl FunctionSource + ?Sized),
    pattern: &SplitPattern,
    max_subsets: u64,
) -> Result<(SubsetIndex, Vec<u32>)> {
    check_consistency(source, pattern)?;
    if source.len() > u32::MAX as u64 {
        return Err(Error::budget(
            "brute-force verification (family size)",
            source.len() as u128,
            u32::MAX as u128,
        ));
    }
    let index = SubsetIndex::new(source.domain_size(), pattern.k(), max_subsets)?;
    let slots = index.len() as usize;
    let n = source.domain_size();
    let base_quota = pattern.quotas();
    let threads = rayon::current_num_threads().max(1) as u64;
    let chunk = source.len().div_ceil(threads * 4).max(1);
    let chunks = source.len().div_ceil(chunk);

    let counts = (0..chunks)
        .into_par_iter()
        .fold(
            || vec![0u32; slots],
            |mut acc, c| {
                let mut row = vec![0u32; n];
                let mut quota = base_quota.clone();
                let end = ((c + 1) * chunk).min(source.len());
                for i in c * chunk..end {
                    source.write_function(i, &mut row);
                    for_each_matching_subset(&index, &row, &mut quota, &mut |r| {
                        acc[r as usize] += 1
                    });
                }
                acc
            },
        )
        .reduce(
            || vec![0u32; slots],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Ok((index, counts))
}

/// Exhaustive scan of all `C(n, k)` subsets. Errors only on inconsistent
/// input or when the subset budget would be exceeded.
pub fn verify_balance(
    source: &(impl FunctionSource + ?Sized),
    pattern: &SplitPattern,
    max_subsets: u64,
) -> Result<BalanceReport> {
    let (index, counts) = subset_counts(source, pattern, max_subsets)?;
    Ok(BalanceReport::from_counts(&index, &counts))
}

/// Scans the family and checks it against `certificate`.
pub fn check_certificate(
    source: &(impl FunctionSource + ?Sized),
    certificate: &BalanceCertificate,
    max_subsets: u64,
) -> Result<(BalanceReport, bool)> {
    let report = verify_balance(source, &certificate.pattern, max_subsets)?;
    let ok = certificate.admits(&report);
    Ok((report, ok))
}

/// Helper for printing a rational as `num/den`.
pub fn format_ratio(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub(crate) fn int_ratio(n: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(n.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subsets::for_each_subset;
    use proptest::prelude::*;

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn part_size_rule() {
        assert_eq!(part_sizes(5, 3), vec![2, 2, 1]);
        assert_eq!(part_sizes(4, 2), vec![2, 2]);
        assert_eq!(part_sizes(7, 2), vec![4, 3]);
        assert_eq!(part_sizes(3, 2), vec![2, 1]);
        assert_eq!(part_sizes(2, 4), vec![1, 1, 0, 0]);
    }

    #[test]
    fn count_all_functions_two_to_two() {
        let fam = FunctionFamily::exhaustive(2, 2, 100).unwrap();
        assert_eq!(fam.len(), 4);
        let p = SplitPattern::perfect(2).unwrap();
        assert_eq!(count_for_subset(&fam, &[0, 1], &p).unwrap(), 2);
    }

    #[test]
    fn constant_is_never_injective() {
        let fam = FunctionFamily::constant(3, 3).unwrap();
        let p = SplitPattern::perfect(3).unwrap();
        assert_eq!(count_for_subset(&fam, &[0, 1, 2], &p).unwrap(), 0);
    }

    #[test]
    fn split_two_one_over_all_eight() {
        // brute force: functions on 3 points with exactly two 0s and one 1
        let fam = FunctionFamily::exhaustive(3, 2, 100).unwrap();
        let expected = fam
            .functions()
            .filter(|f| f.iter().filter(|&&v| v == 0).count() == 2)
            .count() as u64;
        assert_eq!(expected, 3);
        let p = SplitPattern::new(3, 2).unwrap();
        assert_eq!(count_for_subset(&fam, &[0, 1, 2], &p).unwrap(), expected);
    }

    #[test]
    fn count_rejects_mismatches() {
        let fam = FunctionFamily::exhaustive(3, 2, 100).unwrap();
        let p = SplitPattern::perfect(2).unwrap();
        assert!(count_for_subset(&fam, &[0], &p).is_err());
        assert!(count_for_subset(&fam, &[0, 3], &p).is_err());
        assert!(count_for_subset(&fam, &[1, 0], &p).is_err());
        let wrong = SplitPattern::perfect(3).unwrap();
        assert!(count_for_subset(&fam, &[0, 1, 2], &wrong).is_err());
    }

    #[test]
    fn exhaustive_two_colors_on_four() {
        let fam = FunctionFamily::exhaustive(4, 2, 100).unwrap();
        let report = verify_balance(&fam, &SplitPattern::perfect(2).unwrap(), 100).unwrap();
        // 2! * 2^(4-2)
        assert_eq!((report.min_count, report.max_count), (8, 8));
        assert_eq!(report.best_delta, Some(1.0));
        assert_eq!(report.subsets, 6);
    }

    #[test]
    fn identity_on_three() {
        let fam = FunctionFamily::new(3, 3, vec![vec![0, 1, 2]]).unwrap();
        let report = verify_balance(&fam, &SplitPattern::perfect(3).unwrap(), 100).unwrap();
        assert_eq!((report.min_count, report.max_count), (1, 1));
        assert_eq!(report.best_delta, Some(1.0));
    }

    #[test]
    fn unhit_subset_has_no_delta() {
        let fam = FunctionFamily::new(3, 2, vec![vec![0, 0, 1]]).unwrap();
        let p = SplitPattern::perfect(2).unwrap();
        let report = verify_balance(&fam, &p, 100).unwrap();
        assert_eq!(report.min_count, 0);
        assert_eq!(report.arg_min, vec![0, 1]);
        assert_eq!(report.best_delta, None);
        assert!(report.tight_certificate(p).is_none());
    }

    #[test]
    fn certificate_comparison_is_exact() {
        let p = SplitPattern::perfect(2).unwrap();
        let cert = BalanceCertificate::new(ratio(10, 1), ratio(3, 2), p).unwrap();
        // T/delta = 20/3 = 6.66..
        assert!(!cert.admits_range(6, 10));
        assert!(cert.admits_range(7, 15));
        assert!(!cert.admits_range(7, 16));
        assert!(BalanceCertificate::new(ratio(0, 1), ratio(2, 1), cert.pattern.clone()).is_err());
        assert!(BalanceCertificate::new(ratio(1, 1), ratio(1, 2), cert.pattern.clone()).is_err());
    }

    #[test]
    fn verifier_budget_error() {
        let fam = FunctionFamily::constant(50, 5).unwrap();
        let err = verify_balance(&fam, &SplitPattern::perfect(5).unwrap(), 1000).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn family_validation() {
        assert!(FunctionFamily::new(2, 2, vec![vec![0, 2]]).is_err());
        assert!(FunctionFamily::new(2, 2, vec![vec![0]]).is_err());
        assert!(FunctionFamily::new(2, 2, vec![]).is_err());
    }

    fn falling(l: u128, k: u128) -> u128 {
        (0..k).map(|i| l - i).product()
    }

    #[test]
    fn exhaustive_family_identity() {
        for n in 1..=5usize {
            for l in 1..=3usize {
                for k in 1..=l.min(n) {
                    let fam = FunctionFamily::exhaustive(n, l, 1 << 12).unwrap();
                    let report = verify_balance(&fam, &SplitPattern::new(k, l).unwrap(), 1000).unwrap();
                    let expected = falling(l as u128, k as u128) * (l as u128).pow((n - k) as u32);
                    assert_eq!((report.min_count, report.max_count), (expected, expected));
                }
            }
        }
    }

    fn family_strategy() -> impl Strategy<Value = (usize, usize, Vec<Vec<u32>>)> {
        (1usize..=6, 1usize..=4).prop_flat_map(|(n, l)| {
            let f = proptest::collection::vec(0..l as u32, n);
            (Just(n), Just(l), proptest::collection::vec(f, 1..=20))
        })
    }

    proptest! {
        #[test]
        fn verifier_matches_naive_count((n, l, fns) in family_strategy(), k in 1usize..=4) {
            prop_assume!(k <= n);
            let fam = FunctionFamily::new(n, l, fns).unwrap();
            let pattern = SplitPattern::new(k, l).unwrap();
            let (index, counts) = subset_counts(&fam, &pattern, 1000).unwrap();
            for_each_subset(n, k, |s| {
                let naive = count_for_subset(&fam, s, &pattern).unwrap();
                assert_eq!(counts[index.rank(s) as usize] as u64, naive);
            });
        }

        #[test]
        fn tight_certificate_is_admitted((n, l, fns) in family_strategy(), k in 1usize..=3) {
            prop_assume!(k <= n);
            let fam = FunctionFamily::new(n, l, fns).unwrap();
            let pattern = SplitPattern::new(k, l).unwrap();
            let report = verify_balance(&fam, &pattern, 1000).unwrap();
            if let Some(cert) = report.tight_certificate(pattern) {
                prop_assert!(cert.admits(&report));
            }
        }
    }
}
