//! Success probabilities, family sizes and factorial brackets, all exact or
//! rigorously rounded.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::bounds;
use crate::error::{Error, Result};
use crate::family::{int_ratio, part_sizes};

fn factorial_ratio(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(bounds::factorial(n)))
}

fn pow_ratio(base: u64, exp: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(base).pow(exp as u32))
}

/// `k! / k^k`: chance that a uniform function `[k] -> [k]` is a bijection.
pub fn p_perfect(k: usize) -> BigRational {
    assert!(k >= 1);
    factorial_ratio(k as u64) / pow_ratio(k as u64, k as u64)
}

/// `l! / ((l-k)! l^k)`: chance that a uniform `[k] -> [l]` map is 1-1.
pub fn p_injective(k: usize, l: usize) -> Result<BigRational> {
    if k == 0 || k > l {
        return Err(Error::param(format!("p_injective needs 1 <= k <= l, got k={k} l={l}")));
    }
    let falling: BigInt = (0..k).map(|i| BigInt::from(l - i)).product();
    Ok(BigRational::new(falling, BigInt::from(l).pow(k as u32)))
}

/// Chance that a uniform function achieves the split pattern of a k-set
/// into `l` parts; for `k <= l` this is [`p_injective`].
pub fn p_pattern(k: usize, l: usize) -> BigRational {
    assert!(k >= 1 && l >= 1);
    if k <= l {
        return p_injective(k, l).expect("k <= l");
    }
    let multinomial = part_sizes(k, l)
        .iter()
        .fold(factorial_ratio(k as u64), |acc, &s| acc / factorial_ratio(s as u64));
    multinomial / pow_ratio(l as u64, k as u64)
}

/// Parses `3/2`, `1.5` or `2` exactly.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let bad = || Error::param(format!("`{text}` is not a rational number"));
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: BigInt = num.parse().map_err(|_| bad())?;
        let den: BigInt = den.parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(num, den));
    }
    let (int, frac) = text.split_once('.').unwrap_or((text, ""));
    let digits_ok = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if (int.is_empty() && frac.is_empty()) || !digits_ok(frac) || !digits_ok(int.trim_start_matches('-')) {
        return Err(bad());
    }
    let scaled: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
    Ok(BigRational::new(scaled, BigInt::from(10).pow(frac.len() as u32)))
}

/// Checks `1 < delta <= 2`.
pub fn check_delta(delta: &BigRational) -> Result<()> {
    let one = BigRational::one();
    if *delta <= one || *delta > int_ratio(2) {
        return Err(Error::param(format!(
            "delta must satisfy 1 < delta <= 2, got {}",
            crate::family::format_ratio(delta)
        )));
    }
    Ok(())
}

/// `ceil(c * (k ln n + 1) / (p (delta - 1)^2))`, rounded so that the result
/// is never below the real value.
pub fn size_with_constant(
    constant: u64,
    n: usize,
    k: usize,
    p: &BigRational,
    delta: &BigRational,
) -> Result<u64> {
    if n == 0 || k == 0 {
        return Err(Error::param("size formula needs n >= 1 and k >= 1"));
    }
    if *p <= BigRational::zero() || *p > BigRational::one() {
        return Err(Error::param(format!("probability {p} outside (0, 1]")));
    }
    if *delta <= BigRational::one() {
        return Err(Error::param("size formula needs delta > 1"));
    }
    let dm1 = delta - BigRational::one();
    let scale = int_ratio(constant) / (p * &dm1 * &dm1);
    let kk = int_ratio(k as u64);
    let mut bits = 64;
    loop {
        let (ln_lo, ln_hi) = bounds::ln_uint(&BigUint::from(n), bits);
        let lo = &scale * (&kk * ln_lo + BigRational::one());
        let hi = &scale * (&kk * ln_hi + BigRational::one());
        if let Some(m) = bounds::common_ceil(&lo, &hi) {
            return m
                .to_u64()
                .filter(|&m| m >= 1)
                .ok_or(Error::NumericOverflow("family size"));
        }
        // ln n is irrational for n >= 2, so a tighter enclosure separates it
        // from the integer grid eventually
        bits *= 2;
        if bits > 1 << 14 {
            return Err(Error::NumericOverflow("family size enclosure"));
        }
    }
}

/// Family size for the Monte Carlo builders (constant 8).
pub fn size_probabilistic(n: usize, k: usize, p: &BigRational, delta: &BigRational) -> Result<u64> {
    size_with_constant(8, n, k, p, delta)
}

/// Family size for the conditional-expectation builder (constant 16).
pub fn size_derandomized(n: usize, k: usize, p: &BigRational, delta: &BigRational) -> Result<u64> {
    size_with_constant(16, n, k, p, delta)
}

/// Rational brackets `lo < n! < hi` from Robbins' refinement of Stirling:
/// `sqrt(2 pi) n^(n+1/2) e^(-n + 1/(12n+1))` and the same with `1/(12n)`.
pub fn robbins_bounds(n: u64) -> (BigRational, BigRational) {
    assert!(n >= 1);
    const BITS: u32 = 160;
    let (pi_lo, pi_hi) = bounds::pi(BITS);
    let two = int_ratio(2);
    let (s2pi_lo, _) = bounds::sqrt(&(&two * pi_lo), BITS);
    let (_, s2pi_hi) = bounds::sqrt(&(&two * pi_hi), BITS);
    let nn = int_ratio(n);
    let (sqrt_n_lo, sqrt_n_hi) = bounds::sqrt(&nn, BITS);
    let n_pow_n = BigRational::from_integer(BigInt::from(n).pow(n as u32));
    let lower_exp = -&nn + BigRational::new(BigInt::one(), BigInt::from(12 * n + 1));
    let upper_exp = -&nn + BigRational::new(BigInt::one(), BigInt::from(12 * n));
    let (e_lo, _) = bounds::exp(&lower_exp, BITS);
    let (_, e_hi) = bounds::exp(&upper_exp, BITS);
    (
        s2pi_lo * &n_pow_n * sqrt_n_lo * e_lo,
        s2pi_hi * &n_pow_n * sqrt_n_hi * e_hi,
    )
}

/// Parameters shared by the probabilistic and derandomized builders.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstructionParams {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub delta: BigRational,
    pub p: BigRational,
    pub m: u64,
    /// `(delta - 1) / 4`.
    pub lambda: BigRational,
}

impl ConstructionParams {
    fn build(n: usize, k: usize, l: usize, delta: &BigRational, constant: u64) -> Result<Self> {
        check_delta(delta)?;
        if k == 0 || k > n {
            return Err(Error::param(format!("need 1 <= k <= n, got k={k} n={n}")));
        }
        if l == 0 {
            return Err(Error::param("range size l must be positive"));
        }
        let p = p_pattern(k, l);
        let m = size_with_constant(constant, n, k, &p, delta)?;
        let lambda = (delta - BigRational::one()) / int_ratio(4);
        Ok(Self {
            n,
            k,
            l,
            delta: delta.clone(),
            p,
            m,
            lambda,
        })
    }

    /// Sizing for independent uniform sampling.
    pub fn probabilistic(n: usize, k: usize, l: usize, delta: &BigRational) -> Result<Self> {
        Self::build(n, k, l, delta, 8)
    }

    /// Sizing for the conditional-expectation greedy.
    pub fn derandomized(n: usize, k: usize, l: usize, delta: &BigRational) -> Result<Self> {
        Self::build(n, k, l, delta, 16)
    }

    /// Expected hit count `p * M` of a uniformly random family.
    pub fn expected_hits(&self) -> BigRational {
        &self.p * int_ratio(self.m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{FunctionFamily, SplitPattern};
    use crate::subsets::binomial;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn rationals_parse_exactly() {
        assert_eq!(parse_rational("1.5").unwrap(), r(3, 2));
        assert_eq!(parse_rational("3/2").unwrap(), r(3, 2));
        assert_eq!(parse_rational("2").unwrap(), r(2, 1));
        assert_eq!(parse_rational("1.1").unwrap(), r(11, 10));
        assert_eq!(parse_rational(".25").unwrap(), r(1, 4));
        for bad in ["", "x", "1/0", "1.2.3", "1e3", "-", "."] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn perfect_probabilities() {
        assert_eq!(p_perfect(1), r(1, 1));
        assert_eq!(p_perfect(3), r(2, 9));
        assert_eq!(p_perfect(4), r(3, 32));
    }

    #[test]
    fn injective_probabilities() {
        for k in 1..=6 {
            assert_eq!(p_injective(k, k).unwrap(), p_perfect(k));
        }
        assert_eq!(p_injective(2, 4).unwrap(), r(3, 4));
        assert_eq!(p_injective(1, 5).unwrap(), r(1, 1));
        assert!(p_injective(3, 2).is_err());
    }

    #[test]
    fn pattern_probabilities() {
        assert_eq!(p_pattern(2, 2), r(1, 2));
        assert_eq!(p_pattern(3, 2), r(3, 8));
        assert_eq!(p_pattern(4, 2), r(6, 16));
    }

    #[test]
    fn pattern_probability_counts_functions() {
        // p * l^k is the number of matching functions on a fixed k-set
        for k in 1..=4usize {
            for l in 1..=4usize {
                let fam = FunctionFamily::exhaustive(k, l, 1 << 10).unwrap();
                let pattern = SplitPattern::new(k, l).unwrap();
                let hits = fam.functions().filter(|f| pattern.matches(f.iter().copied())).count();
                let scaled = p_pattern(k, l) * int_ratio((l as u64).pow(k as u32));
                assert_eq!(scaled, int_ratio(hits as u64), "k={k} l={l}");
            }
        }
        for k in 1..=8usize {
            for l in 1..=8usize {
                let scaled = p_pattern(k, l) * int_ratio((l as u64).pow(k as u32));
                assert!(scaled.is_integer() && scaled > BigRational::zero());
            }
        }
    }

    // Reference values computed with 50-digit arithmetic:
    //   8 (3 ln 10 + 1) * 9/2 = 284.6792...  -> 285
    //  16 (3 ln 10 + 1) * 9/2 = 569.3584...  -> 570
    #[test]
    fn sizes_for_ten_three() {
        let p = r(2, 9);
        let delta = r(2, 1);
        assert_eq!(size_probabilistic(10, 3, &p, &delta).unwrap(), 285);
        assert_eq!(size_derandomized(10, 3, &p, &delta).unwrap(), 570);
    }

    #[test]
    fn sizes_trivial_cases() {
        // n = 1 makes k ln n vanish
        assert_eq!(size_probabilistic(1, 1, &r(1, 1), &r(2, 1)).unwrap(), 8);
        assert_eq!(size_derandomized(1, 3, &r(2, 9), &r(2, 1)).unwrap(), 72);
        // halving (delta - 1) quadruples the real value
        let p = r(2, 9);
        let wide = size_probabilistic(50, 3, &p, &r(2, 1)).unwrap();
        let narrow = size_probabilistic(50, 3, &p, &r(3, 2)).unwrap();
        assert!(narrow.abs_diff(4 * wide) <= 4);
        let m8 = size_probabilistic(50, 3, &p, &r(3, 2)).unwrap();
        let m16 = size_derandomized(50, 3, &p, &r(3, 2)).unwrap();
        assert!(m16.abs_diff(2 * m8) <= 1);
    }

    #[test]
    fn sizes_agree_with_float_evaluation() {
        for n in [2usize, 7, 30, 71, 1000] {
            for k in 1..=4usize {
                for (dn, dd) in [(2, 1), (3, 2), (5, 4)] {
                    let p = p_perfect(k);
                    let delta = r(dn, dd);
                    let exact = size_derandomized(n, k, &p, &delta).unwrap();
                    let pf = p.to_f64().unwrap();
                    let d = dn as f64 / dd as f64 - 1.0;
                    let real = 16.0 * (k as f64 * (n as f64).ln() + 1.0) / (pf * d * d);
                    assert!(exact as f64 >= real - 1e-6 && (exact as f64) < real + 1.0);
                }
            }
        }
    }

    #[test]
    fn sizes_antitone_in_p() {
        let delta = r(3, 2);
        for k in 1..=5usize {
            // p grows with l for fixed k, so M may only shrink
            let mut prev = u64::MAX;
            for l in k..=k + 6 {
                let m = size_probabilistic(20, k, &p_pattern(k, l), &delta).unwrap();
                assert!(m <= prev);
                prev = m;
            }
        }
    }

    #[test]
    fn robbins_brackets_factorials() {
        for n in 1..=20u64 {
            let (lo, hi) = robbins_bounds(n);
            let fact = BigRational::from_integer(BigInt::from(bounds::factorial(n)));
            assert!(lo < fact && fact < hi, "n={n}");
        }
        let (lo, hi) = robbins_bounds(10);
        assert!(lo < int_ratio(3_628_800u64) && int_ratio(3_628_800u64) < hi);
    }

    #[test]
    fn construction_params() {
        let cp = ConstructionParams::derandomized(10, 3, 3, &r(2, 1)).unwrap();
        assert_eq!(cp.m, 570);
        assert_eq!(cp.lambda, r(1, 4));
        assert_eq!(cp.expected_hits(), r(1140, 9));
        assert!(ConstructionParams::derandomized(10, 3, 3, &r(1, 1)).is_err());
        assert!(ConstructionParams::derandomized(10, 3, 3, &r(5, 2)).is_err());
        assert!(ConstructionParams::derandomized(2, 3, 3, &r(2, 1)).is_err());
        assert_eq!(binomial(10, 3), 120);
    }
}
