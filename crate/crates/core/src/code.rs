//! Splitters `[n] -> [q]` from polynomial evaluation codes over a prime field.
//!
//! Element `x` is read as the polynomial whose coefficients are its `t`
//! base-`q` digits; function `α` evaluates it at `α`. Two distinct
//! polynomials of degree `< t` agree on at most `t - 1` points, so a pair
//! collides under at most `t - 1` of the `q` functions and a k-set is
//! mapped 1-1 by at least `q (1 - C(k,2)(t-1)/q)` of them.
//!
//! This replaces the concatenated codes of length `O(q² log n)` with a
//! single Reed-Solomon level. The field is enlarged so that the factor
//! `t - 1` is absorbed: `q` is the smallest prime with
//! `C(k,2)(t-1)/q <= (δ-1)/2`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::family::{
    verify_balance, BalanceCertificate, CertifiedFamily, FunctionFamily, FunctionSource,
    SplitPattern,
};
use crate::params::check_delta;
use crate::subsets::binomial;

pub fn is_prime(v: u64) -> bool {
    if v < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= v {
        if v.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Smallest prime `>= v`.
pub fn next_prime(v: u64) -> u64 {
    let mut p = v.max(2);
    while !is_prime(p) {
        p += 1;
    }
    p
}

#[derive(Clone, Debug, PartialEq)]
pub struct CodeSplitterPlan {
    pub n: usize,
    pub k: usize,
    pub delta: BigRational,
    pub q: u64,
    /// Digits per element, `⌈log_q n⌉` (at least 1).
    pub t: u32,
    /// `C(k,2)(t-1)/q`.
    pub collision_bound: BigRational,
}

fn digits_needed(n: usize, q: u64) -> u32 {
    let mut t = 1u32;
    let mut reach = q as u128;
    while reach < n as u128 {
        reach *= q as u128;
        t += 1;
    }
    t
}

pub fn plan_code_splitter(n: usize, k: usize, delta: &BigRational) -> Result<CodeSplitterPlan> {
    check_delta(delta)?;
    if k < 2 || k > n {
        return Err(Error::param(format!("code splitter needs 2 <= k <= n, got k={k} n={n}")));
    }
    let slack = delta - BigRational::one();
    let base = (BigRational::from_integer(BigInt::from(2 * k * k)) / &slack)
        .ceil()
        .to_integer();
    let base: u64 = base
        .try_into()
        .map_err(|_| Error::NumericOverflow("code splitter field size"))?;
    let pairs = binomial(k as u64, 2) as u64;
    let half = &slack / BigRational::from_integer(BigInt::from(2));
    let mut q = next_prime(base.max(k as u64));
    loop {
        let t = digits_needed(n, q);
        let bound = BigRational::new(BigInt::from(pairs * (t as u64 - 1)), BigInt::from(q));
        if bound <= half {
            return Ok(CodeSplitterPlan {
                n,
                k,
                delta: delta.clone(),
                q,
                t,
                collision_bound: bound,
            });
        }
        q = next_prime(q + 1);
    }
}

/// The `q` evaluation functions, produced on demand.
#[derive(Clone, Debug)]
pub struct CodeFamily {
    n: usize,
    q: u64,
    t: u32,
}

impl CodeFamily {
    pub fn new(plan: &CodeSplitterPlan) -> Result<Self> {
        if (plan.q as u128).pow(plan.t) < plan.n as u128 {
            return Err(Error::param(format!(
                "q^t = {}^{} does not cover n = {}",
                plan.q, plan.t, plan.n
            )));
        }
        Ok(Self {
            n: plan.n,
            q: plan.q,
            t: plan.t,
        })
    }

    fn eval(&self, alpha: u64, x: usize) -> u32 {
        // Horner's rule over the base-q digits of x
        let mut digits = [0u64; 64];
        let mut v = x as u64;
        for d in digits.iter_mut().take(self.t as usize) {
            *d = v % self.q;
            v /= self.q;
        }
        let mut acc = 0u64;
        for d in (0..self.t as usize).rev() {
            acc = (acc * alpha + digits[d]) % self.q;
        }
        acc as u32
    }
}

impl FunctionSource for CodeFamily {
    fn domain_size(&self) -> usize {
        self.n
    }

    fn range_size(&self) -> usize {
        self.q as usize
    }

    fn len(&self) -> u64 {
        self.q
    }

    fn write_function(&self, index: u64, out: &mut [u32]) {
        for (x, slot) in out.iter_mut().enumerate() {
            *slot = self.eval(index, x);
        }
    }

    fn value(&self, index: u64, x: usize) -> u32 {
        self.eval(index, x)
    }
}

/// Builds the splitter of `plan`, certified `(q, δ)` for the 1-1 pattern.
/// With `t = 1` the single embedding `x -> x` is returned, certified `(1, 1)`.
/// The certificate is checked exhaustively when `C(n,k)` is within
/// `max_subsets`; otherwise it rests on the distance argument alone.
pub fn build_code_splitter(plan: &CodeSplitterPlan, max_subsets: u64) -> Result<CertifiedFamily> {
    let pattern = SplitPattern::new(plan.k, plan.q as usize)?;
    let (family, certificate) = if plan.t == 1 {
        let identity: Vec<u32> = (0..plan.n as u32).collect();
        (
            FunctionFamily::from_flat(plan.n, plan.q as usize, identity)?,
            BalanceCertificate::unit(pattern.clone()),
        )
    } else {
        let code = CodeFamily::new(plan)?;
        (
            FunctionFamily::materialize(&code, u64::MAX)?,
            BalanceCertificate::new(
                BigRational::from_integer(BigInt::from(plan.q)),
                plan.delta.clone(),
                pattern.clone(),
            )?,
        )
    };
    let report = if binomial(plan.n as u64, plan.k as u64) <= max_subsets as u128 {
        let report = verify_balance(&family, &pattern, max_subsets)?;
        if !certificate.admits(&report) {
            return Err(Error::Verification(format!(
                "code splitter q={} t={} has min count {} below the certified bound",
                plan.q, plan.t, report.min_count
            )));
        }
        Some(report)
    } else {
        None
    };
    Ok(CertifiedFamily {
        family,
        certificate,
        report,
    })
}

/// Largest number of functions on which some pair `x != y` collides, and
/// the first such pair.
pub fn pairwise_collision_profile(
    family: &(impl FunctionSource + ?Sized),
    max_pairs: u64,
) -> Result<(u64, Option<(usize, usize)>)> {
    let n = family.domain_size();
    let pairs = binomial(n as u64, 2);
    if pairs > max_pairs as u128 {
        return Err(Error::budget("pairwise collision scan", pairs, max_pairs as u128));
    }
    if n < 2 {
        return Ok((0, None));
    }
    let rows: Vec<Vec<u32>> = (0..family.len())
        .map(|i| {
            let mut row = vec![0u32; n];
            family.write_function(i, &mut row);
            row
        })
        .collect();
    let best = (0..n - 1)
        .into_par_iter()
        .map(|x| {
            let mut best = (0u64, (x, x + 1));
            for y in x + 1..n {
                let c = rows.iter().filter(|row| row[x] == row[y]).count() as u64;
                if c > best.0 {
                    best = (c, (x, y));
                }
            }
            best
        })
        .reduce(|| (0, (0, 1)), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    Ok((best.0, (best.0 > 0).then_some(best.1)))
}
