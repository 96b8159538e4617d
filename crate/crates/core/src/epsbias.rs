//! Small-bias sample spaces by powering, and the splitter built on them.
//!
//! A point is a pair `(x, y)` of elements of `GF(2^m)`; bit `i` of the point
//! is the GF(2) inner product of `x^i` and `y` (`i = 0..N`). For a non-empty
//! set `T` of positions the parity is `<Σ_{i∈T} x^i, y>`, which is unbiased
//! over `y` unless `x` is a root of the nonzero polynomial `Σ_{i∈T} z^i`.
//! Hence `|E[(-1)^parity]| <= (N-1)/2^m`.
//!
//! Bias is measured as `|E[(-1)^parity]| = 2 |Pr[parity = 1] - 1/2|`. By
//! Fourier inversion every `k`-bit atom is then within `β(1 - 2^-k)` of
//! `2^-k`.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::family::{
    format_ratio, verify_balance, BalanceCertificate, BalanceReport, CertifiedFamily,
    FunctionFamily, FunctionSource, SplitPattern,
};
use crate::params::check_delta;
use crate::subsets::{binomial, for_each_subset};

/// Default cap on the field degree.
pub const DEFAULT_MAX_DEGREE: u32 = 24;
/// Default cap on the number of sample points turned into functions.
pub const DEFAULT_MAX_POINTS: u64 = 1 << 22;

fn clmul_mod(mut a: u64, mut b: u64, poly: u64, m: u32) -> u64 {
    let top = 1u64 << m;
    let mut acc = 0u64;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a & top != 0 {
            a ^= poly;
        }
    }
    acc
}

fn degree(p: u64) -> i32 {
    63 - p.leading_zeros() as i32
}

fn poly_mod(mut a: u64, f: u64) -> u64 {
    let df = degree(f);
    while a != 0 && degree(a) >= df {
        a ^= f << (degree(a) - df);
    }
    a
}

fn poly_gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = poly_mod(a, b);
        a = b;
        b = r;
    }
    a
}

/// Ben-Or test: `f` of degree `m` is irreducible iff
/// `gcd(f, x^(2^i) - x) = 1` for `i = 1..=m/2`.
pub fn is_irreducible(f: u64) -> bool {
    let m = degree(f);
    if m < 1 {
        return false;
    }
    let m = m as u32;
    let mut power = 0b10u64; // x
    for _ in 1..=m / 2 {
        power = clmul_mod(power, power, f, m);
        if poly_gcd(f, power ^ 0b10) != 1 {
            return false;
        }
    }
    true
}

/// Smallest irreducible polynomial of degree `m` (as a bit mask including
/// the leading term).
pub fn irreducible_poly(m: u32) -> u64 {
    assert!((1..=31).contains(&m));
    let lead = 1u64 << m;
    (0..lead)
        .map(|low| lead | low)
        .find(|&f| is_irreducible(f))
        .expect("irreducible polynomials exist in every degree")
}

/// `GF(2^m)` with a fixed modulus.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BinaryField {
    m: u32,
    poly: u64,
}

impl BinaryField {
    pub fn new(m: u32, poly: u64) -> Result<Self> {
        if degree(poly) != m as i32 || !is_irreducible(poly) {
            return Err(Error::param(format!("{poly:#x} is not an irreducible polynomial of degree {m}")));
        }
        Ok(Self { m, poly })
    }

    pub fn degree(&self) -> u32 {
        self.m
    }

    pub fn poly(&self) -> u64 {
        self.poly
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        clmul_mod(a, b, self.poly, self.m)
    }

    pub fn pow(&self, mut base: u64, mut e: u64) -> u64 {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }
}

/// `N`-bit sample space of size `2^(2m)` with bias at most `beta`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSpace {
    bits: usize,
    field: BinaryField,
    beta: BigRational,
}

impl SampleSpace {
    pub fn new(bits: usize, m: u32, poly: u64, beta: BigRational) -> Result<Self> {
        if bits == 0 {
            return Err(Error::param("a sample space needs at least one bit"));
        }
        let field = BinaryField::new(m, poly)?;
        let certified = BigRational::new(BigInt::from(bits - 1), BigInt::one() << m);
        if certified > beta {
            return Err(Error::param(format!(
                "degree {m} only certifies bias {}, above beta={}",
                format_ratio(&certified),
                format_ratio(&beta)
            )));
        }
        Ok(Self { bits, field, beta })
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn field(&self) -> &BinaryField {
        &self.field
    }

    pub fn beta(&self) -> &BigRational {
        &self.beta
    }

    /// Number of sample points, `2^(2m)`.
    pub fn size(&self) -> u64 {
        1u64 << (2 * self.field.m)
    }

    /// The bias bound `(N-1)/2^m` implied by the construction.
    pub fn certified_bias(&self) -> BigRational {
        BigRational::new(BigInt::from(self.bits - 1), BigInt::one() << self.field.m)
    }

    fn split_index(&self, index: u64) -> (u64, u64) {
        (index >> self.field.m, index & ((1u64 << self.field.m) - 1))
    }

    /// Calls `visit(i, bit)` for the bits `start..start+len` of a point.
    pub fn for_each_bit(&self, index: u64, start: usize, len: usize, mut visit: impl FnMut(usize, bool)) {
        let (x, y) = self.split_index(index);
        let mut power = self.field.pow(x, start as u64);
        for i in start..start + len {
            visit(i, (power & y).count_ones() & 1 == 1);
            power = self.field.mul(power, x);
        }
    }

    /// All `N` bits of a point packed little-endian (`N <= 64`).
    pub fn point(&self, index: u64) -> u64 {
        assert!(self.bits <= 64);
        let mut v = 0u64;
        self.for_each_bit(index, 0, self.bits, |i, b| {
            if b {
                v |= 1 << i;
            }
        });
        v
    }

    pub fn to_text(&self) -> String {
        format!(
            "EBS 1\nN={} m={} poly={:x} beta={}\n",
            self.bits,
            self.field.m,
            self.field.poly,
            format_ratio(&self.beta)
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("EBS 1") {
            return Err(Error::parse(1, "expected `EBS 1`"));
        }
        let line = lines.next().ok_or_else(|| Error::parse(2, "missing parameter line"))?;
        let tokens: Vec<&str> = line.split_ascii_whitespace().collect();
        let field = |i: usize, key: &str| -> Result<&str> {
            tokens
                .get(i)
                .and_then(|t| t.strip_prefix(key))
                .and_then(|t| t.strip_prefix('='))
                .ok_or_else(|| Error::parse(2, format!("expected `{key}=...` as field {}", i + 1)))
        };
        if tokens.len() != 4 {
            return Err(Error::parse(2, format!("expected 4 fields, found {}", tokens.len())));
        }
        let bits: usize = field(0, "N")?.parse().map_err(|_| Error::parse(2, "bad N"))?;
        let m: u32 = field(1, "m")?.parse().map_err(|_| Error::parse(2, "bad m"))?;
        let poly = u64::from_str_radix(field(2, "poly")?, 16).map_err(|_| Error::parse(2, "bad poly"))?;
        let beta_text = field(3, "beta")?;
        let (num, den) = beta_text.split_once('/').ok_or_else(|| Error::parse(2, "bad beta"))?;
        let num: BigInt = num.parse().map_err(|_| Error::parse(2, "bad beta"))?;
        let den: BigInt = den.parse().map_err(|_| Error::parse(2, "bad beta"))?;
        if !den.is_positive() {
            return Err(Error::parse(2, "bad beta"));
        }
        if let Some(extra) = lines.find(|l| !l.is_empty()) {
            return Err(Error::parse(3, format!("trailing content `{extra}`")));
        }
        if m > 31 {
            return Err(Error::parse(2, "m too large"));
        }
        Self::new(bits, m, poly, BigRational::new(num, den)).map_err(|e| Error::parse(2, e.to_string()))
    }
}

impl fmt::Display for SampleSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Smallest `m` with `2^m β >= N`.
pub fn degree_for(bits: usize, beta: &BigRational) -> u32 {
    let mut m = 0u32;
    while BigRational::from_integer(BigInt::one() << m) * beta < BigRational::from_integer(BigInt::from(bits)) {
        m += 1;
    }
    m.max(1)
}

/// Space of `bits` bits with bias at most `beta`.
pub fn build_biased_space(bits: usize, beta: &BigRational, max_degree: u32) -> Result<SampleSpace> {
    if bits == 0 || !beta.is_positive() || *beta >= BigRational::one() {
        return Err(Error::param(format!(
            "need N >= 1 and 0 < beta < 1, got N={bits} beta={}",
            format_ratio(beta)
        )));
    }
    let m = degree_for(bits, beta);
    if m > max_degree.min(31) {
        return Err(Error::budget(
            format!("sample space for N={bits} beta={}", format_ratio(beta)),
            1u128 << (2 * m.min(63)),
            1u128 << (2 * max_degree.min(31)),
        ));
    }
    SampleSpace::new(bits, m, irreducible_poly(m), beta.clone())
}

/// Largest bias over all non-empty position sets.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasReport {
    /// `|E[(-1)^parity]|` of the worst set.
    pub max_bias: BigRational,
    /// Worst set as a bit mask over positions.
    pub witness: u64,
}

/// Exhaustive parity scan through a Walsh-Hadamard transform of the point
/// histogram. Work is `S + N 2^N`.
pub fn bias_scan(space: &SampleSpace, max_work: u64) -> Result<BiasReport> {
    let n = space.bits();
    let work = (space.size() as u128).saturating_add((n as u128) << n.min(100));
    if n > 30 || work > max_work as u128 {
        return Err(Error::budget("parity bias scan", work, max_work as u128));
    }
    let mut hist = vec![0i64; 1 << n];
    let points: Vec<u64> = (0..space.size()).into_par_iter().map(|i| space.point(i)).collect();
    for v in points {
        hist[v as usize] += 1;
    }
    let mut h = 1;
    while h < hist.len() {
        for block in hist.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
    let (witness, worst) = hist
        .iter()
        .enumerate()
        .skip(1)
        .map(|(t, &v)| (t as u64, v.abs()))
        .fold((1u64, -1i64), |best, cur| if cur.1 > best.1 { cur } else { best });
    Ok(BiasReport {
        max_bias: BigRational::new(BigInt::from(worst), BigInt::from(space.size())),
        witness,
    })
}

/// Worst atom found by [`check_almost_independence`].
#[derive(Clone, Debug, PartialEq)]
pub struct AtomWitness {
    pub positions: Vec<usize>,
    /// Bit `j` is the value required at `positions[j]`.
    pub pattern: u64,
    /// `|Pr[atom] - 2^-k|`.
    pub deviation: BigRational,
}

/// Checks `|Pr[X_{i_1..i_k} = α] - 2^-k| < eps` for every k-set of positions
/// and every `α`.
pub fn check_almost_independence(
    space: &SampleSpace,
    k: usize,
    eps: &BigRational,
    max_work: u64,
) -> Result<(bool, Option<AtomWitness>)> {
    if k == 0 {
        return Ok((true, None));
    }
    let work = binomial(space.bits() as u64, k as u64)
        .saturating_mul(space.size() as u128)
        .saturating_mul(1u128 << k.min(64));
    if work > max_work as u128 || space.bits() > 64 {
        return Err(Error::budget("atom scan", work, max_work as u128));
    }
    let points: Vec<u64> = (0..space.size()).into_par_iter().map(|i| space.point(i)).collect();
    check_points_independence(&points, space.bits(), k, eps)
}

/// [`check_almost_independence`] over an explicit list of `bits`-bit points.
pub fn check_points_independence(
    points: &[u64],
    bits: usize,
    k: usize,
    eps: &BigRational,
) -> Result<(bool, Option<AtomWitness>)> {
    if k == 0 {
        return Ok((true, None));
    }
    if k > bits || k > 20 || bits > 64 || points.is_empty() {
        return Err(Error::param(format!("cannot check {k}-wise atoms over {bits} bits")));
    }
    let mut sets = Vec::new();
    for_each_subset(bits, k, |s| sets.push(s.to_vec()));
    let size = BigRational::from_integer(BigInt::from(points.len()));
    let target = BigRational::new(BigInt::one(), BigInt::one() << k);
    let worst = sets
        .par_iter()
        .map(|positions| {
            let mut counts = vec![0u64; 1 << k];
            for &v in points {
                let mut atom = 0usize;
                for (j, &p) in positions.iter().enumerate() {
                    atom |= (((v >> p) & 1) as usize) << j;
                }
                counts[atom] += 1;
            }
            counts
                .iter()
                .enumerate()
                .map(|(pattern, &count)| AtomWitness {
                    positions: positions.clone(),
                    pattern: pattern as u64,
                    deviation: (BigRational::from_integer(BigInt::from(count)) / &size - &target).abs(),
                })
                .reduce(|a, b| if b.deviation > a.deviation { b } else { a })
                .expect("non-empty")
        })
        .reduce_with(|a, b| if b.deviation > a.deviation { b } else { a })
        .expect("at least one set");
    Ok((worst.deviation < *eps, Some(worst)))
}

/// Parameters of the k >= l splitter over a small-bias space.
#[derive(Clone, Debug, PartialEq)]
pub struct LowSplitterPlan {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    /// Bits per element, `⌈log2 l⌉`.
    pub w: u32,
    pub delta: BigRational,
    /// `2^(-kw-1) (δ-1)`, used as the bias bound.
    pub epsilon: BigRational,
    /// `Pr[v mod l = c]` for uniform `v` in `[0, 2^w)`.
    pub color_probs: Vec<BigRational>,
    /// Probability of the required split under independent colors.
    pub split_prob: BigRational,
    pub bits: usize,
    pub degree: u32,
    /// Number of sample points (functions).
    pub size: u128,
    /// `size * split_prob`.
    pub t: BigRational,
}

pub fn plan_low_splitter(n: usize, k: usize, l: usize, delta: &BigRational) -> Result<LowSplitterPlan> {
    check_delta(delta)?;
    if l < 2 || l > k || k > n {
        return Err(Error::param(format!("low splitter needs 2 <= l <= k <= n, got n={n} k={k} l={l}")));
    }
    let w = usize::BITS - (l - 1).leading_zeros();
    let kw = k as u32 * w;
    let epsilon = (delta - BigRational::one()) / BigRational::from_integer(BigInt::one() << (kw + 1));
    let span = 1u64 << w;
    let color_probs: Vec<BigRational> = (0..l as u64)
        .map(|c| {
            let hits = (0..span).filter(|v| v % l as u64 == c).count();
            BigRational::new(BigInt::from(hits), BigInt::from(span))
        })
        .collect();
    let pattern = SplitPattern::new(k, l)?;
    let sizes = pattern.part_sizes();
    let mut split_prob = BigRational::from_integer(BigInt::from(crate::bounds::factorial(k as u64)));
    for (j, &s) in sizes.iter().enumerate() {
        split_prob /= BigRational::from_integer(BigInt::from(crate::bounds::factorial(s as u64)));
        split_prob *= num_traits::pow(color_probs[j].clone(), s);
    }
    let bits = n * w as usize;
    let degree = degree_for(bits, &epsilon);
    let size = 1u128 << (2 * degree.min(63));
    let t = BigRational::from_integer(BigInt::from(size)) * &split_prob;
    Ok(LowSplitterPlan {
        n,
        k,
        l,
        w,
        delta: delta.clone(),
        epsilon,
        color_probs,
        split_prob,
        bits,
        degree,
        size,
        t,
    })
}

/// Functions `[n'] -> [l]` read off the sample points: element `x` takes
/// bits `[xw, (x+1)w)` as an integer `v` and gets color `v mod l`.
#[derive(Clone, Debug)]
pub struct LowSplitter {
    space: SampleSpace,
    n: usize,
    l: usize,
    w: usize,
}

impl LowSplitter {
    pub fn space(&self) -> &SampleSpace {
        &self.space
    }
}

impl FunctionSource for LowSplitter {
    fn domain_size(&self) -> usize {
        self.n
    }

    fn range_size(&self) -> usize {
        self.l
    }

    fn len(&self) -> u64 {
        self.space.size()
    }

    fn write_function(&self, index: u64, out: &mut [u32]) {
        let w = self.w;
        let mut v = 0u32;
        self.space.for_each_bit(index, 0, self.n * w, |i, b| {
            v |= (b as u32) << (i % w);
            if i % w == w - 1 {
                out[i / w] = v % self.l as u32;
                v = 0;
            }
        });
    }

    fn value(&self, index: u64, x: usize) -> u32 {
        let mut v = 0u32;
        self.space.for_each_bit(index, x * self.w, self.w, |i, b| {
            v |= (b as u32) << (i % self.w);
        });
        v % self.l as u32
    }
}

#[derive(Clone, Debug)]
pub struct LowSplitterBuild {
    pub plan: LowSplitterPlan,
    pub certified: CertifiedFamily,
    /// Whether every subset satisfied `|split(S) - T| <= T(δ-1)/2`; `None`
    /// when exact verification was over budget.
    pub relative_error_ok: Option<bool>,
}

/// `|split(S) - T| <= T(δ-1)/2` for every subset in the report.
pub fn within_relative_error(report: &BalanceReport, t: &BigRational, delta: &BigRational) -> bool {
    let half = (delta - BigRational::one()) / BigRational::from_integer(BigInt::from(2));
    let lo = t * (BigRational::one() - &half);
    let hi = t * (BigRational::one() + &half);
    BigRational::from_integer(BigInt::from(report.min_count)) >= lo
        && BigRational::from_integer(BigInt::from(report.max_count)) <= hi
}

/// Builds the splitter of the plan as an explicit family of `2^(2m)`
/// functions with certificate `(S·P, δ)`.
pub fn build_low_splitter(
    n: usize,
    k: usize,
    l: usize,
    delta: &BigRational,
    max_points: u64,
    max_subsets: u64,
) -> Result<LowSplitterBuild> {
    let plan = plan_low_splitter(n, k, l, delta)?;
    if plan.degree > DEFAULT_MAX_DEGREE || plan.size > max_points as u128 {
        return Err(Error::budget(
            format!(
                "small-bias ({n},{k},{l})-splitter with 2^{} points (use the greedy splitter instead)",
                2 * plan.degree
            ),
            plan.size,
            max_points as u128,
        ));
    }
    let space = build_biased_space(plan.bits, &plan.epsilon, DEFAULT_MAX_DEGREE)?;
    let source = LowSplitter {
        space,
        n,
        l,
        w: plan.w as usize,
    };
    let family = FunctionFamily::materialize(&source, u64::MAX)?;
    let pattern = SplitPattern::new(k, l)?;
    let certificate = BalanceCertificate::new(plan.t.clone(), delta.clone(), pattern.clone())?;
    let (report, relative_error_ok) = if binomial(n as u64, k as u64) <= max_subsets as u128 {
        let report = verify_balance(&family, &pattern, max_subsets)?;
        if !certificate.admits(&report) {
            return Err(Error::Verification(format!(
                "small-bias splitter counts [{}, {}] violate T={} delta={}",
                report.min_count,
                report.max_count,
                format_ratio(&certificate.t),
                format_ratio(&certificate.delta)
            )));
        }
        let ok = within_relative_error(&report, &plan.t, delta);
        (Some(report), Some(ok))
    } else {
        (None, None)
    };
    Ok(LowSplitterBuild {
        plan,
        certified: CertifiedFamily {
            family,
            certificate,
            report,
        },
        relative_error_ok,
    })
}
