//! Derandomized construction by conditional expectations.
//!
//! With `λ = (δ-1)/4` and `X_S` the number of finished functions achieving
//! the pattern on `S`, the potential is
//! `Φ = Σ_S e^{λ(X_S - pM)} + e^{-λ(X_S - pM)}`.
//! Every value of every function is fixed to the color minimizing the
//! conditional expectation of Φ given all earlier choices, the rest being
//! uniform. Only subsets containing the current position depend on the color,
//! and for those the expectation is affine in `q_S(c)`, the conditional
//! chance that `S` ends up matching the pattern:
//!
//! `E[Φ | c] = const + Σ_{S ∋ i} q_S(c) · w(X_S)`,
//! `w(X) = e^{λ(X-pM)} A^R (e^λ - 1) - e^{-λ(X-pM)} B^R (1 - e^{-λ})`,
//!
//! where `A = pe^λ + 1 - p`, `B = pe^{-λ} + 1 - p` and `R` is the number of
//! functions after the current one. `w` is tabulated once per phase.
//!
//! The pattern-general variant (splitters) is an extension: the same
//! argument goes through with `p` the chance of the required split.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::family::{
    for_each_matching_subset, format_ratio, verify_balance, BalanceCertificate, BalanceReport,
    CertifiedFamily, FunctionFamily, SplitPattern, DEFAULT_SUBSET_BUDGET,
};
use crate::params::ConstructionParams;
use crate::scalar::PotentialScalar;
use crate::subsets::{binomial, for_each_subset, SubsetIndex};
use crate::WidePotential;

/// Probability that uniform completion of the unassigned elements of
/// `subset` achieves `pattern`, given the partial assignment.
pub fn cond_pattern_prob(partial: &[Option<u32>], subset: &[usize], pattern: &SplitPattern) -> BigRational {
    let l = pattern.l();
    let mut counts = vec![0usize; l];
    let mut free = 0usize;
    for &x in subset {
        match partial[x] {
            Some(c) => counts[c as usize] += 1,
            None => free += 1,
        }
    }
    let quotas = pattern.quotas();
    if counts.iter().zip(&quotas).any(|(&have, &q)| have > q as usize) {
        return BigRational::zero();
    }
    let lr = BigInt::from(l).pow(free as u32);
    if pattern.is_injective() {
        let used = subset.len() - free;
        let falling: BigInt = (0..free).map(|t| BigInt::from(l - used - t)).product();
        return BigRational::new(falling, lr);
    }
    let mut numer: BigInt = (1..=free).map(BigInt::from).product();
    for (&have, &q) in counts.iter().zip(&quotas) {
        let deficit = q as usize - have;
        let f: BigInt = (1..=deficit).map(BigInt::from).product();
        numer /= f;
    }
    BigRational::new(numer, lr)
}

/// Incremental state of the greedy.
pub struct GreedyState<T: PotentialScalar> {
    params: ConstructionParams,
    pattern: SplitPattern,
    index: SubsetIndex,
    /// `X_S` by subset rank.
    hits: Vec<u32>,
    /// `histogram[x]` = number of subsets with `X_S = x`.
    histogram: Vec<u64>,
    /// Per position `i`, `stride` entries of `[rank, others...]` for every
    /// subset containing `i`; `others` ascending.
    members: Vec<u32>,
    stride: usize,
    values: Vec<u32>,
    current: Vec<u32>,
    phase: u64,
    step: usize,
    weights: Vec<T>,
    weight_base: u32,
    // injective case: q(a) for `a` assigned others, colors unused
    falling: Vec<T>,
    // split case
    fact: Vec<T>,
    inv_fact: Vec<T>,
    inv_pow: Vec<T>,
    quotas: Vec<u32>,
    lambda: T,
    pm: T,
    ln_a: T,
    ln_b: T,
    ln_up: T,
    ln_down: T,
}

impl<T: PotentialScalar> GreedyState<T> {
    pub fn new(n: usize, k: usize, l: usize, delta: &BigRational, max_subsets: u64) -> Result<Self> {
        let params = ConstructionParams::derandomized(n, k, l, delta)?;
        Self::with_params(params, max_subsets)
    }

    pub fn with_params(params: ConstructionParams, max_subsets: u64) -> Result<Self> {
        let (n, k, l) = (params.n, params.k, params.l);
        if k > 32 {
            return Err(Error::param(format!("greedy supports k <= 32, got {k}")));
        }
        let pattern = SplitPattern::new(k, l)?;
        let index = SubsetIndex::new(n, k, max_subsets.min(u32::MAX as u64))?;
        let per_position = binomial(n as u64 - 1, k as u64 - 1) as usize;
        let entry = k;
        let values_len = (n as u64)
            .checked_mul(params.m)
            .filter(|&v| v <= u32::MAX as u64 * 4)
            .ok_or_else(|| Error::budget("greedy family values", n as u128 * params.m as u128, u32::MAX as u128 * 4))?;
        let mut members = vec![0u32; n * per_position * entry];
        let mut fill = vec![0usize; n];
        let mut rank = 0u32;
        for_each_subset(n, k, |s| {
            for &i in s {
                let at = (i * per_position + fill[i]) * entry;
                members[at] = rank;
                let mut o = at + 1;
                for &x in s {
                    if x != i {
                        members[o] = x as u32;
                        o += 1;
                    }
                }
                fill[i] += 1;
            }
            rank += 1;
        });

        let f = |r: &BigRational| T::of_f64(r.to_f64().expect("finite"));
        let lambda = f(&params.lambda);
        let p = f(&params.p);
        let pm = f(&params.expected_hits());
        let one = T::one();
        let ln_a = (p * lambda.exp() + one - p).ln();
        let ln_b = (p * (-lambda).exp() + one - p).ln();
        let ln_up = lambda.exp_m1().ln();
        let ln_down = (-(-lambda).exp_m1()).ln();

        let lt = T::from_usize(l).expect("finite");
        let mut inv_pow = vec![one; k + 1];
        for r in 1..=k {
            inv_pow[r] = inv_pow[r - 1] / lt;
        }
        let mut fact = vec![one; k + 1];
        for r in 1..=k {
            fact[r] = fact[r - 1] * T::from_usize(r).expect("finite");
        }
        let inv_fact = fact.iter().map(|&v| one / v).collect();
        // falling[a] = (l-a-1)(l-a-2)...(l-k+1) / l^(k-a-1)
        let mut falling = vec![T::zero(); k];
        if pattern.is_injective() {
            for (a, slot) in falling.iter_mut().enumerate() {
                let r = k - a - 1;
                let mut v = one;
                for t in 0..r {
                    v = v * T::from_usize(l - a - 1 - t).expect("finite");
                }
                *slot = v * inv_pow[r];
            }
        }
        let mut histogram = vec![0u64; 1];
        histogram[0] = index.len();
        let quotas = pattern.quotas();
        Ok(Self {
            hits: vec![0; index.len() as usize],
            index,
            histogram,
            members,
            stride: per_position * entry,
            values: Vec::with_capacity(values_len as usize),
            current: vec![0; n],
            phase: 0,
            step: 0,
            weights: Vec::new(),
            weight_base: 0,
            falling,
            fact,
            inv_fact,
            inv_pow,
            quotas,
            lambda,
            pm,
            ln_a,
            ln_b,
            ln_up,
            ln_down,
            params,
            pattern,
        })
    }

    pub fn params(&self) -> &ConstructionParams {
        &self.params
    }

    pub fn pattern(&self) -> &SplitPattern {
        &self.pattern
    }

    /// 0-based index of the function being built.
    pub fn phase(&self) -> u64 {
        self.phase
    }

    /// Position whose value is chosen next.
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.phase == self.params.m
    }

    /// Finished hit counts by subset rank.
    pub fn hits(&self) -> &[u32] {
        &self.hits
    }

    fn refresh_weights(&mut self) {
        let xmin = self.histogram.iter().position(|&c| c > 0).unwrap_or(0);
        let xmax = self.histogram.iter().rposition(|&c| c > 0).unwrap_or(0);
        let remaining = T::from_u64(self.params.m - self.phase - 1).expect("finite");
        let up = |x: usize| {
            self.lambda * (T::from_usize(x).expect("finite") - self.pm) + remaining * self.ln_a + self.ln_up
        };
        let down = |x: usize| {
            -self.lambda * (T::from_usize(x).expect("finite") - self.pm) + remaining * self.ln_b + self.ln_down
        };
        // both exponents are monotone in x, so the endpoints bound the table
        let shift = up(xmax).max(down(xmin));
        self.weights = (xmin..=xmax)
            .map(|x| (up(x) - shift).exp() - (down(x) - shift).exp())
            .collect();
        self.weight_base = xmin as u32;
    }

    /// `Σ_{S ∋ i} q_S(c) w(X_S)` for every color `c`, up to a common positive
    /// factor. Smaller is better.
    pub fn scores(&mut self) -> Vec<T> {
        assert!(!self.is_done(), "all functions are finished");
        if self.step == 0 {
            self.refresh_weights();
        }
        if self.pattern.is_injective() {
            self.scores_injective()
        } else {
            self.scores_split()
        }
    }

    fn block(&self) -> &[u32] {
        &self.members[self.step * self.stride..(self.step + 1) * self.stride]
    }

    fn scores_injective(&self) -> Vec<T> {
        let (k, l, i) = (self.params.k, self.params.l, self.step as u32);
        let mut adjust = vec![T::zero(); l];
        let mut all = T::zero();
        let mut used = [0u32; 32];
        'subsets: for entry in self.block().chunks_exact(k) {
            let mut a = 0usize;
            for &x in &entry[1..] {
                if x >= i {
                    break;
                }
                let c = self.current[x as usize];
                if used[..a].contains(&c) {
                    continue 'subsets;
                }
                used[a] = c;
                a += 1;
            }
            let w = self.weights[(self.hits[entry[0] as usize] - self.weight_base) as usize];
            let v = w * self.falling[a];
            all = all + v;
            for &c in &used[..a] {
                adjust[c as usize] = adjust[c as usize] - v;
            }
        }
        adjust.into_iter().map(|d| all + d).collect()
    }

    fn scores_split(&self) -> Vec<T> {
        let (k, l, i) = (self.params.k, self.params.l, self.step as u32);
        let mut scores = vec![T::zero(); l];
        let mut deficit = vec![0u32; l];
        'subsets: for entry in self.block().chunks_exact(k) {
            deficit.copy_from_slice(&self.quotas);
            let mut a = 0usize;
            for &x in &entry[1..] {
                if x >= i {
                    break;
                }
                let c = self.current[x as usize] as usize;
                if deficit[c] == 0 {
                    continue 'subsets;
                }
                deficit[c] -= 1;
                a += 1;
            }
            // q(c) = r! / Π_j d'_j! · l^-r with d'_c = d_c - 1, i.e. G · d_c
            let r = k - a - 1;
            let mut g = self.fact[r] * self.inv_pow[r];
            for &d in &deficit {
                g = g * self.inv_fact[d as usize];
            }
            let w = self.weights[(self.hits[entry[0] as usize] - self.weight_base) as usize];
            let v = w * g;
            for (slot, &d) in scores.iter_mut().zip(&deficit) {
                if d > 0 {
                    *slot = *slot + v * T::from_u32(d).expect("finite");
                }
            }
        }
        scores
    }

    /// Smallest color of minimal score.
    pub fn best_color(&mut self) -> u32 {
        let scores = self.scores();
        let mut best = 0usize;
        for (c, &s) in scores.iter().enumerate() {
            if s < scores[best] {
                best = c;
            }
        }
        best as u32
    }

    /// Fixes the value at the current position.
    pub fn commit(&mut self, color: u32) {
        assert!((color as usize) < self.params.l && !self.is_done());
        if self.step == 0 && self.weights.is_empty() {
            self.refresh_weights();
        }
        self.current[self.step] = color;
        self.step += 1;
        if self.step < self.params.n {
            return;
        }
        let mut quota = self.pattern.quotas();
        let (hits, histogram) = (&mut self.hits, &mut self.histogram);
        for_each_matching_subset(&self.index, &self.current, &mut quota, &mut |rank| {
            let x = &mut hits[rank as usize];
            histogram[*x as usize] -= 1;
            *x += 1;
            if histogram.len() <= *x as usize {
                histogram.push(0);
            }
            histogram[*x as usize] += 1;
        });
        self.values.extend_from_slice(&self.current);
        self.phase += 1;
        self.step = 0;
        self.weights.clear();
    }

    /// Reference evaluation of `E[Φ | history, value c at the current
    /// position]` by full recomputation (`None`: before choosing).
    pub fn conditional_phi(&self, color: Option<u32>) -> Result<f64> {
        let v = self.log_conditional_phi(color)?.exp();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NumericOverflow("conditional potential"))
        }
    }

    /// Natural log of [`GreedyState::conditional_phi`].
    pub fn log_conditional_phi(&self, color: Option<u32>) -> Result<f64> {
        let n = self.params.n;
        let mut partial: Vec<Option<u32>> = vec![None; n];
        for (slot, &c) in partial.iter_mut().zip(&self.current[..self.step]) {
            *slot = Some(c);
        }
        if let Some(c) = color {
            partial[self.step] = Some(c);
        }
        let f = |r: &BigRational| r.to_f64().expect("finite");
        let lambda = f(&self.params.lambda);
        let p = f(&self.params.p);
        let pm = f(&self.params.expected_hits());
        let remaining = (self.params.m - self.phase - 1) as f64;
        let ln_a = (p * lambda.exp() + 1.0 - p).ln();
        let ln_b = (p * (-lambda).exp() + 1.0 - p).ln();
        let mut terms = Vec::with_capacity(2 * self.hits.len());
        let mut rank = 0usize;
        for_each_subset(n, self.params.k, |s| {
            let q = f(&cond_pattern_prob(&partial, s, &self.pattern));
            let x = self.hits[rank] as f64;
            terms.push(lambda * (x - pm) + (q * lambda.exp() + 1.0 - q).ln() + remaining * ln_a);
            terms.push(-lambda * (x - pm) + (q * (-lambda).exp() + 1.0 - q).ln() + remaining * ln_b);
            rank += 1;
        });
        finite(log_sum_exp(&terms))
    }

    /// `ln Φ` of the finished functions alone.
    pub fn log_phi(&self) -> Result<f64> {
        let lambda = self.params.lambda.to_f64().expect("finite");
        let pm = self.params.expected_hits().to_f64().expect("finite");
        let terms: Vec<f64> = self
            .hits
            .iter()
            .flat_map(|&x| {
                let e = lambda * (x as f64 - pm);
                [e, -e]
            })
            .collect();
        finite(log_sum_exp(&terms))
    }

    pub fn into_family(self) -> Result<FunctionFamily> {
        assert!(self.is_done(), "greedy stopped early");
        FunctionFamily::from_flat(self.params.n, self.params.l, self.values)
    }
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NumericOverflow("potential"))
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Outcome of a greedy build.
#[derive(Clone, Debug)]
pub struct GreedyBuild {
    pub certified: CertifiedFamily,
    /// Working precision of the accepted run.
    pub precision: &'static str,
    /// `ln Φ` of the finished family.
    pub log_phi: f64,
    /// `2 (k ln n + 1)`, the proven bound on `ln Φ`.
    pub log_phi_bound: f64,
}

type GreedyPass = fn(&ConstructionParams, u64) -> Result<(FunctionFamily, f64)>;

#[derive(Clone, Debug)]
pub struct GreedyOptions {
    pub max_subsets: u64,
    /// Skip the `f64` pass and start with double-double.
    pub wide_only: bool,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        Self {
            max_subsets: DEFAULT_SUBSET_BUDGET,
            wide_only: false,
        }
    }
}

fn run<T: PotentialScalar>(params: &ConstructionParams, max_subsets: u64) -> Result<(FunctionFamily, f64)> {
    let mut state = GreedyState::<T>::with_params(params.clone(), max_subsets)?;
    while !state.is_done() {
        let c = state.best_color();
        state.commit(c);
    }
    let log_phi = state.log_phi()?;
    Ok((state.into_family()?, log_phi))
}

/// δ-balanced family for the pattern of `(k, l)`, verified exactly against
/// `(pM, δ)`; `δ` is tightened to 1 when `p = 1`.
pub fn build_derandomized_pattern(
    n: usize,
    k: usize,
    l: usize,
    delta: &BigRational,
    options: &GreedyOptions,
) -> Result<GreedyBuild> {
    let pattern = SplitPattern::new(k, l)?;
    if l == 1 {
        // every function achieves the one-part split
        ConstructionParams::derandomized(n, k, l, delta)?;
        let family = FunctionFamily::constant(n, 1)?;
        let certificate = BalanceCertificate::unit(pattern.clone());
        let report = verify_balance(&family, &pattern, options.max_subsets)?;
        return Ok(GreedyBuild {
            certified: CertifiedFamily {
                family,
                certificate,
                report: Some(report),
            },
            precision: "exact",
            log_phi: 0.0,
            log_phi_bound: 0.0,
        });
    }
    let params = ConstructionParams::derandomized(n, k, l, delta)?;
    let certificate = BalanceCertificate::new(
        params.expected_hits(),
        if params.p.is_one() {
            BigRational::one()
        } else {
            params.delta.clone()
        },
        pattern.clone(),
    )?;
    let log_phi_bound = 2.0 * (k as f64 * (n as f64).ln() + 1.0);
    let mut best: Option<BalanceReport> = None;
    let mut attempts = 0;
    let mut tried: Vec<&'static str> = Vec::new();
    let passes: &[GreedyPass] = if options.wide_only {
        &[run::<WidePotential>]
    } else {
        &[run::<f64>, run::<WidePotential>]
    };
    let names: &[&'static str] = if options.wide_only {
        &[<WidePotential as PotentialScalar>::NAME]
    } else {
        &[<f64 as PotentialScalar>::NAME, <WidePotential as PotentialScalar>::NAME]
    };
    for (pass, &name) in passes.iter().zip(names) {
        attempts += 1;
        tried.push(name);
        let (family, log_phi) = match pass(&params, options.max_subsets) {
            Ok(v) => v,
            Err(Error::NumericOverflow(_)) => continue,
            Err(e) => return Err(e),
        };
        let report = verify_balance(&family, &pattern, options.max_subsets)?;
        if certificate.admits(&report) {
            return Ok(GreedyBuild {
                certified: CertifiedFamily {
                    family,
                    certificate,
                    report: Some(report),
                },
                precision: name,
                log_phi,
                log_phi_bound,
            });
        }
        best = Some(report);
    }
    Err(Error::ConstructionFailed {
        attempts,
        reason: format!(
            "greedy family missed T={} delta={} in precisions {}",
            format_ratio(&certificate.t),
            format_ratio(&certificate.delta),
            tried.join(", ")
        ),
        best: best.map(Box::new),
    })
}

/// δ-balanced `(n,k)`-family of perfect hash functions of size
/// `M = ⌈16(k ln n + 1)/(p(δ-1)²)⌉`, `p = k!/k^k`.
pub fn build_derandomized(n: usize, k: usize, delta: &BigRational) -> Result<GreedyBuild> {
    build_derandomized_pattern(n, k, k, delta, &GreedyOptions::default())
}

/// δ-balanced `(n,k,l)`-splitter. For `l = 1` this is the single constant
/// function with certificate `(1, 1)`.
pub fn build_derandomized_splitter(n: usize, k: usize, l: usize, delta: &BigRational) -> Result<GreedyBuild> {
    build_derandomized_pattern(n, k, l, delta, &GreedyOptions::default())
}
