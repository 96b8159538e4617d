//! Monte Carlo builders: sample `M` independent uniform functions, verify the
//! certificate `(pM, δ)` exactly, and resample on failure.
//!
//! Attempt `r` draws from `ChaCha8Rng::seed_from_u64(seed + r)`.

use num_rational::BigRational;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::family::{
    verify_balance, BalanceCertificate, BalanceReport, CertifiedFamily, FunctionFamily,
    SplitPattern, DEFAULT_SUBSET_BUDGET,
};
use crate::params::ConstructionParams;

pub const DEFAULT_RETRIES: usize = 16;

#[derive(Clone, Debug)]
pub struct RandomOptions {
    pub retries: usize,
    pub max_subsets: u64,
    /// Replaces the sizing formula's `M` when set.
    pub size: Option<u64>,
}

impl Default for RandomOptions {
    fn default() -> Self {
        Self {
            retries: DEFAULT_RETRIES,
            max_subsets: DEFAULT_SUBSET_BUDGET,
            size: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RandomBuild {
    pub certified: CertifiedFamily,
    /// Number of samples drawn, including the accepted one.
    pub attempts: usize,
}

/// Draws `m` uniform functions `[n] -> [l]`.
pub fn sample_family(n: usize, l: usize, m: u64, seed: u64) -> Result<FunctionFamily> {
    let total = (n as u64)
        .checked_mul(m)
        .ok_or(Error::NumericOverflow("family size"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<u32> = (0..total).map(|_| rng.gen_range(0..l as u32)).collect();
    FunctionFamily::from_flat(n, l, values)
}

/// Shared retry loop for every pattern.
pub fn build_random(
    n: usize,
    k: usize,
    l: usize,
    delta: &BigRational,
    seed: u64,
    options: &RandomOptions,
) -> Result<RandomBuild> {
    let mut params = ConstructionParams::probabilistic(n, k, l, delta)?;
    if let Some(m) = options.size {
        if m == 0 {
            return Err(Error::param("family size must be positive"));
        }
        params.m = m;
    }
    let pattern = SplitPattern::new(k, l)?;
    // p = 1 means every function achieves the pattern on every subset
    let delta = if params.p.is_one() {
        BigRational::one()
    } else {
        params.delta.clone()
    };
    let certificate = BalanceCertificate::new(params.expected_hits(), delta, pattern.clone())?;
    let mut best: Option<BalanceReport> = None;
    for attempt in 0..options.retries.max(1) {
        let family = sample_family(n, l, params.m, seed.wrapping_add(attempt as u64))?;
        let report = verify_balance(&family, &pattern, options.max_subsets)?;
        if certificate.admits(&report) {
            return Ok(RandomBuild {
                certified: CertifiedFamily {
                    family,
                    certificate,
                    report: Some(report),
                },
                attempts: attempt + 1,
            });
        }
        if best.as_ref().is_none_or(|b| spread(&report) < spread(b)) {
            best = Some(report);
        }
    }
    Err(Error::ConstructionFailed {
        attempts: options.retries.max(1),
        reason: format!(
            "no sample met T={} delta={}",
            crate::family::format_ratio(&certificate.t),
            crate::family::format_ratio(&certificate.delta)
        ),
        best: best.map(Box::new),
    })
}

fn spread(report: &BalanceReport) -> f64 {
    report.best_delta.unwrap_or(f64::INFINITY)
}

/// δ-balanced `(n,k)`-family of perfect hash functions.
pub fn build_random_perfect(n: usize, k: usize, delta: &BigRational, seed: u64) -> Result<RandomBuild> {
    build_random(n, k, k, delta, seed, &RandomOptions::default())
}

/// δ-balanced `(n,k,l)`-splitter for `k < l` (the 1-1 pattern).
pub fn build_random_splitter_high(
    n: usize,
    k: usize,
    l: usize,
    delta: &BigRational,
    seed: u64,
) -> Result<RandomBuild> {
    if k >= l {
        return Err(Error::param(format!("needs k < l, got k={k} l={l}")));
    }
    build_random(n, k, l, delta, seed, &RandomOptions::default())
}

/// δ-balanced `(n,k,2)`-splitter, `k >= 2`.
pub fn build_random_half_splitter(n: usize, k: usize, delta: &BigRational, seed: u64) -> Result<RandomBuild> {
    if k < 2 {
        return Err(Error::param(format!("needs k >= 2, got k={k}")));
    }
    build_random(n, k, 2, delta, seed, &RandomOptions::default())
}
