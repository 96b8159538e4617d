//! Composition of certified families.
//!
//! Composed families are never materialized eagerly: [`RangeComposition`] and
//! [`PartsComposition`] implement [`FunctionSource`] and produce their
//! functions by index, in lexicographic order of the component tuple (the
//! first component is the most significant digit).
//!
//! For families far too large to enumerate, the [`SubsetCounter`] types give
//! the exact per-subset count through the product structure instead.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::family::{
    subset_counts, BalanceCertificate, BalanceReport, FunctionSource, SplitPattern,
};
use crate::subsets::{next_subset, SubsetIndex};

pub type SharedSource = Arc<dyn FunctionSource>;

/// `x -> g(h(x))` for every pair `(h, g)` of a splitter `H: [n] -> [l]` and a
/// perfect family `G: [l] -> [k]`, with `k < l`.
#[derive(Clone)]
pub struct RangeComposition {
    outer: SharedSource,
    inner: SharedSource,
    len: u64,
}

impl RangeComposition {
    pub fn outer(&self) -> &SharedSource {
        &self.outer
    }

    pub fn inner(&self) -> &SharedSource {
        &self.inner
    }
}

impl FunctionSource for RangeComposition {
    fn domain_size(&self) -> usize {
        self.outer.domain_size()
    }

    fn range_size(&self) -> usize {
        self.inner.range_size()
    }

    fn len(&self) -> u64 {
        self.len
    }

    fn write_function(&self, index: u64, out: &mut [u32]) {
        let (h, g) = (index / self.inner.len(), index % self.inner.len());
        let mut inner = vec![0u32; self.inner.domain_size()];
        self.inner.write_function(g, &mut inner);
        self.outer.write_function(h, out);
        for v in out.iter_mut() {
            *v = inner[*v as usize];
        }
    }

    fn value(&self, index: u64, x: usize) -> u32 {
        let (h, g) = (index / self.inner.len(), index % self.inner.len());
        self.inner.value(g, self.outer.value(h, x) as usize)
    }
}

/// `x -> offset(h(x)) + g_{h(x)}(x)` for every tuple `(h, g_1, .., g_l)`.
#[derive(Clone)]
pub struct PartsComposition {
    splitter: SharedSource,
    parts: Vec<SharedSource>,
    offsets: Vec<u32>,
    range: usize,
    len: u64,
}

impl PartsComposition {
    pub fn splitter(&self) -> &SharedSource {
        &self.splitter
    }

    pub fn parts(&self) -> &[SharedSource] {
        &self.parts
    }

    /// Start of each color's interval inside `[0, k)`.
    pub fn offsets(&self) -> &[u32] {
        &self.offsets
    }

    fn digits(&self, mut index: u64) -> (u64, Vec<u64>) {
        let mut picks = vec![0u64; self.parts.len()];
        for (j, part) in self.parts.iter().enumerate().rev() {
            picks[j] = index % part.len();
            index /= part.len();
        }
        (index, picks)
    }
}

impl FunctionSource for PartsComposition {
    fn domain_size(&self) -> usize {
        self.splitter.domain_size()
    }

    fn range_size(&self) -> usize {
        self.range
    }

    fn len(&self) -> u64 {
        self.len
    }

    fn write_function(&self, index: u64, out: &mut [u32]) {
        let (h, picks) = self.digits(index);
        self.splitter.write_function(h, out);
        let mut row = vec![0u32; out.len()];
        let mut loaded = vec![false; self.parts.len()];
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); self.parts.len()];
        for x in 0..out.len() {
            let j = out[x] as usize;
            if !loaded[j] {
                self.parts[j].write_function(picks[j], &mut row);
                rows[j] = row.clone();
                loaded[j] = true;
            }
            out[x] = self.offsets[j] + rows[j][x];
        }
    }

    fn value(&self, index: u64, x: usize) -> u32 {
        let (h, picks) = self.digits(index);
        let j = self.splitter.value(h, x) as usize;
        self.offsets[j] + self.parts[j].value(picks[j], x)
    }
}

fn product_len(lens: impl IntoIterator<Item = u64>) -> Result<u64> {
    lens.into_iter().try_fold(1u64, |acc, m| {
        acc.checked_mul(m)
            .ok_or(Error::NumericOverflow("composed family size"))
    })
}

/// Composes a δ_H-balanced `(n,k,l)`-splitter with a δ_G-balanced
/// `(l,k)`-family (`k < l`). The certificate is `(T_H T_G, δ_H δ_G)`.
pub fn compose_range(
    outer: SharedSource,
    outer_cert: &BalanceCertificate,
    inner: SharedSource,
    inner_cert: &BalanceCertificate,
) -> Result<(RangeComposition, BalanceCertificate)> {
    let k = outer_cert.pattern.k();
    let l = outer_cert.pattern.l();
    if k >= l {
        return Err(Error::param(format!(
            "range composition needs k < l, got k={k} l={l}"
        )));
    }
    if outer.range_size() != l {
        return Err(Error::param(format!(
            "splitter range {} does not match its certificate l={l}",
            outer.range_size()
        )));
    }
    if !inner_cert.pattern.is_perfect() || inner_cert.pattern.k() != k {
        return Err(Error::param(format!(
            "inner certificate must be a perfect ({l},{k}) pattern, got {}",
            inner_cert.pattern
        )));
    }
    if inner.domain_size() != l || inner.range_size() != k {
        return Err(Error::param(format!(
            "inner family maps [{}] -> [{}], expected [{l}] -> [{k}]",
            inner.domain_size(),
            inner.range_size()
        )));
    }
    let len = product_len([outer.len(), inner.len()])?;
    let cert = BalanceCertificate {
        t: &outer_cert.t * &inner_cert.t,
        delta: &outer_cert.delta * &inner_cert.delta,
        pattern: SplitPattern::perfect(k)?,
    };
    Ok((RangeComposition { outer, inner, len }, cert))
}

/// Composes a δ-balanced `(n,k,l)`-splitter (`k > l`) with per-color
/// families `G_j: [n] -> [k_j]`, `k_j = part_sizes(k, l)[j]`. The certificate
/// is `(T_H Π T_j, δ Π γ_j)`.
pub fn compose_parts(
    splitter: SharedSource,
    splitter_cert: &BalanceCertificate,
    parts: Vec<(SharedSource, BalanceCertificate)>,
) -> Result<(PartsComposition, BalanceCertificate)> {
    let pattern = &splitter_cert.pattern;
    let (k, l) = (pattern.k(), pattern.l());
    if k <= l {
        return Err(Error::param(format!(
            "part composition needs k > l, got k={k} l={l}"
        )));
    }
    if splitter.range_size() != l {
        return Err(Error::param(format!(
            "splitter range {} does not match its certificate l={l}",
            splitter.range_size()
        )));
    }
    if parts.len() != l {
        return Err(Error::param(format!("expected {l} part families, got {}", parts.len())));
    }
    let n = splitter.domain_size();
    let mut offsets = Vec::with_capacity(l);
    let mut t = splitter_cert.t.clone();
    let mut delta = splitter_cert.delta.clone();
    let mut offset = 0u32;
    for (j, ((family, cert), &kj)) in parts.iter().zip(pattern.part_sizes()).enumerate() {
        if !cert.pattern.is_perfect() || cert.pattern.k() != kj {
            return Err(Error::param(format!(
                "part {j} must carry a perfect pattern with k={kj}, got {}",
                cert.pattern
            )));
        }
        if family.domain_size() != n || family.range_size() != kj {
            return Err(Error::param(format!(
                "part {j} maps [{}] -> [{}], expected [{n}] -> [{kj}]",
                family.domain_size(),
                family.range_size()
            )));
        }
        offsets.push(offset);
        offset += kj as u32;
        t *= &cert.t;
        delta *= &cert.delta;
    }
    let len = product_len(std::iter::once(splitter.len()).chain(parts.iter().map(|(f, _)| f.len())))?;
    let cert = BalanceCertificate {
        t,
        delta,
        pattern: SplitPattern::perfect(k)?,
    };
    Ok((
        PartsComposition {
            splitter,
            parts: parts.into_iter().map(|(f, _)| f).collect(),
            offsets,
            range: k,
            len,
        },
        cert,
    ))
}

/// Exact number of family members achieving a fixed pattern on a subset.
pub trait SubsetCounter: Send + Sync {
    fn domain_size(&self) -> usize;

    fn subset_size(&self) -> usize;

    /// `subset` must be ascending with `subset_size()` elements.
    fn count(&self, subset: &[usize]) -> Result<u128>;

    /// Rough number of elementary steps one `count` call costs.
    fn cost(&self) -> u128;
}

/// Counts read from a table filled by the brute-force verifier.
pub struct TabulatedCounts {
    index: SubsetIndex,
    counts: Vec<u32>,
}

impl TabulatedCounts {
    pub fn new(
        family: &(impl FunctionSource + ?Sized),
        pattern: &SplitPattern,
        max_subsets: u64,
    ) -> Result<Self> {
        let (index, counts) = subset_counts(family, pattern, max_subsets)?;
        Ok(Self { index, counts })
    }
}

impl SubsetCounter for TabulatedCounts {
    fn domain_size(&self) -> usize {
        self.index.n()
    }

    fn subset_size(&self) -> usize {
        self.index.k()
    }

    fn count(&self, subset: &[usize]) -> Result<u128> {
        Ok(self.counts[self.index.rank(subset) as usize] as u128)
    }

    fn cost(&self) -> u128 {
        self.index.k() as u128
    }
}

/// `count(S) = Σ_{h 1-1 on S} inner.count(h(S))`.
pub struct RangeCounter {
    outer: SharedSource,
    inner: Box<dyn SubsetCounter>,
}

impl RangeCounter {
    pub fn new(outer: SharedSource, inner: Box<dyn SubsetCounter>) -> Result<Self> {
        if inner.domain_size() != outer.range_size() {
            return Err(Error::param("inner counter domain must equal the splitter range"));
        }
        Ok(Self { outer, inner })
    }
}

impl SubsetCounter for RangeCounter {
    fn domain_size(&self) -> usize {
        self.outer.domain_size()
    }

    fn subset_size(&self) -> usize {
        self.inner.subset_size()
    }

    fn count(&self, subset: &[usize]) -> Result<u128> {
        let mut total = 0u128;
        let mut image = vec![0usize; subset.len()];
        for h in 0..self.outer.len() {
            for (slot, &x) in image.iter_mut().zip(subset) {
                *slot = self.outer.value(h, x) as usize;
            }
            image.sort_unstable();
            if image.windows(2).any(|w| w[0] == w[1]) {
                continue;
            }
            let c = self.inner.count(&image)?;
            total = total
                .checked_add(c)
                .ok_or(Error::NumericOverflow("structured count"))?;
        }
        Ok(total)
    }

    fn cost(&self) -> u128 {
        (self.outer.len() as u128).saturating_mul(self.inner.cost().saturating_add(1))
    }
}

/// `count(S) = Σ_{h splits S} Π_j part_j.count(S ∩ h^-1(j))`.
pub struct PartsCounter {
    splitter: SharedSource,
    quotas: Vec<usize>,
    parts: Vec<Box<dyn SubsetCounter>>,
}

impl PartsCounter {
    pub fn new(
        splitter: SharedSource,
        pattern: &SplitPattern,
        parts: Vec<Box<dyn SubsetCounter>>,
    ) -> Result<Self> {
        if pattern.is_injective() || parts.len() != pattern.l() {
            return Err(Error::param("parts counter needs a k > l pattern and l part counters"));
        }
        for (j, (part, &kj)) in parts.iter().zip(pattern.part_sizes()).enumerate() {
            if part.subset_size() != kj || part.domain_size() != splitter.domain_size() {
                return Err(Error::param(format!("part counter {j} has the wrong shape")));
            }
        }
        Ok(Self {
            splitter,
            quotas: pattern.part_sizes().to_vec(),
            parts,
        })
    }
}

impl SubsetCounter for PartsCounter {
    fn domain_size(&self) -> usize {
        self.splitter.domain_size()
    }

    fn subset_size(&self) -> usize {
        self.quotas.iter().sum()
    }

    fn count(&self, subset: &[usize]) -> Result<u128> {
        let l = self.quotas.len();
        let mut buckets: Vec<Vec<usize>> = vec![Vec::with_capacity(subset.len()); l];
        let mut total = 0u128;
        'functions: for h in 0..self.splitter.len() {
            for b in buckets.iter_mut() {
                b.clear();
            }
            for &x in subset {
                let j = self.splitter.value(h, x) as usize;
                buckets[j].push(x);
                if buckets[j].len() > self.quotas[j] {
                    continue 'functions;
                }
            }
            let mut product = 1u128;
            for (part, bucket) in self.parts.iter().zip(&buckets) {
                let c = part.count(bucket)?;
                if c == 0 {
                    continue 'functions;
                }
                product = product
                    .checked_mul(c)
                    .ok_or(Error::NumericOverflow("structured count"))?;
            }
            total = total
                .checked_add(product)
                .ok_or(Error::NumericOverflow("structured count"))?;
        }
        Ok(total)
    }

    fn cost(&self) -> u128 {
        let per: u128 = self.parts.iter().map(|p| p.cost()).sum();
        (self.splitter.len() as u128).saturating_mul(per.saturating_add(self.subset_size() as u128))
    }
}

/// Exhaustive balance report computed through a [`SubsetCounter`].
pub fn verify_structured(counter: &dyn SubsetCounter, max_subsets: u64) -> Result<BalanceReport> {
    let index = SubsetIndex::new(counter.domain_size(), counter.subset_size(), max_subsets)?;
    let total = index.len();
    let threads = rayon::current_num_threads().max(1) as u64;
    let chunk = total.div_ceil(threads * 8).max(1);
    let chunks = total.div_ceil(chunk);
    type Extreme = (u128, u64);
    let partial: Result<Vec<(Extreme, Extreme)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * chunk;
            let end = ((c + 1) * chunk).min(total);
            let mut subset = index.unrank(start);
            let mut min = (u128::MAX, start);
            let mut max = (0u128, start);
            for rank in start..end {
                let v = counter.count(&subset)?;
                if v < min.0 {
                    min = (v, rank);
                }
                if v > max.0 {
                    max = (v, rank);
                }
                next_subset(&mut subset, index.n());
            }
            Ok((min, max))
        })
        .collect();
    let partial = partial?;
    // ties resolve to the lowest rank, like the brute-force report
    let min = partial
        .iter()
        .map(|p| p.0)
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("at least one subset");
    let max = partial
        .iter()
        .map(|p| p.1)
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
        .expect("at least one subset");
    Ok(BalanceReport::from_extremes(
        total,
        (min.0, index.unrank(min.1)),
        (max.0, index.unrank(max.1)),
    ))
}
