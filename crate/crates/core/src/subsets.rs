//! Lexicographic indexing of the k-subsets of `[0, n)`.
//!
//! Subsets are always handled as ascending slices. The rank of a subset is
//! its position in lexicographic order, which is also the order in which the
//! verifier's depth-first walk visits the leaves.

use crate::error::{Error, Result};

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        match acc.checked_mul((n - i) as u128) {
            Some(v) => acc = v / (i as u128 + 1),
            None => return u128::MAX,
        }
    }
    acc
}

/// Precomputed binomial table for ranking subsets of a fixed `(n, k)`.
#[derive(Clone, Debug)]
pub struct SubsetIndex {
    n: usize,
    k: usize,
    // table[m * (k + 1) + r] = C(m, r)
    table: Vec<u64>,
    total: u64,
}

impl SubsetIndex {
    /// Fails with a budget error when `C(n, k)` exceeds `max_subsets`.
    pub fn new(n: usize, k: usize, max_subsets: u64) -> Result<Self> {
        if k > n {
            return Err(Error::param(format!("subset size {k} exceeds domain {n}")));
        }
        let total = binomial(n as u64, k as u64);
        if total > max_subsets as u128 {
            return Err(Error::budget(
                format!("enumerating C({n},{k}) subsets"),
                total,
                max_subsets as u128,
            ));
        }
        let mut table = vec![0u64; (n + 1) * (k + 1)];
        for m in 0..=n {
            for r in 0..=k {
                table[m * (k + 1) + r] = binomial(m as u64, r as u64).min(u64::MAX as u128) as u64;
            }
        }
        Ok(Self {
            n,
            k,
            table,
            total: total as u64,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of subsets, `C(n, k)`.
    pub fn len(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    #[inline]
    pub fn choose(&self, m: usize, r: usize) -> u64 {
        if r > self.k || m > self.n {
            return binomial(m as u64, r as u64) as u64;
        }
        self.table[m * (self.k + 1) + r]
    }

    /// Lexicographic rank of an ascending subset.
    pub fn rank(&self, subset: &[usize]) -> u64 {
        debug_assert_eq!(subset.len(), self.k);
        let mut rank = 0u64;
        let mut prev = 0usize;
        for (depth, &a) in subset.iter().enumerate() {
            let remaining = self.k - depth - 1;
            for b in prev..a {
                rank += self.choose(self.n - b - 1, remaining);
            }
            prev = a + 1;
        }
        rank
    }

    /// Inverse of [`SubsetIndex::rank`].
    pub fn unrank(&self, mut rank: u64) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.k);
        let mut a = 0usize;
        for depth in 0..self.k {
            let remaining = self.k - depth - 1;
            loop {
                let block = self.choose(self.n - a - 1, remaining);
                if rank < block {
                    break;
                }
                rank -= block;
                a += 1;
            }
            out.push(a);
            a += 1;
        }
        out
    }
}

/// Advances an ascending subset of `[0, n)` to its lexicographic successor.
/// Returns `false` when `subset` was the last one.
pub fn next_subset(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < n - k + i {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Calls `visit` on every k-subset of `[0, n)` in lexicographic order.
pub fn for_each_subset(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        visit(&subset);
        if !next_subset(&mut subset, n) {
            break;
        }
    }
}
