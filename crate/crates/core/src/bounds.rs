//! Rigorous rational enclosures of a few transcendental constants.
//!
//! Every function returns `(lo, hi)` with `lo <= true value <= hi`. Internal
//! rounding is dyadic and always outward, so enclosures stay valid whatever
//! precision is requested.

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Enclosure = (BigRational, BigRational);

fn pow2(bits: u32) -> BigInt {
    BigInt::one() << bits
}

/// Largest multiple of `2^-bits` not above `x`.
pub fn round_down(x: &BigRational, bits: u32) -> BigRational {
    let scaled = x * BigRational::from_integer(pow2(bits));
    BigRational::new(scaled.floor().to_integer(), pow2(bits))
}

/// Smallest multiple of `2^-bits` not below `x`.
pub fn round_up(x: &BigRational, bits: u32) -> BigRational {
    let scaled = x * BigRational::from_integer(pow2(bits));
    BigRational::new(scaled.ceil().to_integer(), pow2(bits))
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// `atanh(z) = sum z^(2i+1)/(2i+1)` for `0 <= z <= 1/2`.
fn atanh_small(z: &BigRational, bits: u32) -> Enclosure {
    assert!(!z.is_negative() && *z <= rat(1, 2));
    if z.is_zero() {
        return (BigRational::zero(), BigRational::zero());
    }
    let z2 = z * z;
    let tol = BigRational::new(BigInt::one(), pow2(bits + 4));
    let mut sum = BigRational::zero();
    let mut power = z.clone();
    let mut i = 0i64;
    loop {
        sum += &power / BigRational::from_integer(BigInt::from(2 * i + 1));
        sum = round_down(&sum, bits + 16);
        power = round_down(&(&power * &z2), bits + 16);
        i += 1;
        // tail <= z^(2i+1) / ((2i+1)(1 - z^2)), and the truncation of the
        // partial sum above cost at most i * 2^-(bits+16)
        let tail = (&power / BigRational::from_integer(BigInt::from(2 * i + 1)))
            / (BigRational::one() - &z2);
        if tail < tol {
            let slack = BigRational::new(BigInt::from(2 * i + 2), pow2(bits + 16));
            let lo = round_down(&sum, bits + 8);
            let hi = round_up(&(&sum + tail + slack), bits + 8);
            return (lo, hi);
        }
    }
}

/// Enclosure of `ln 2`.
pub fn ln2(bits: u32) -> Enclosure {
    // ln 2 = 2 atanh(1/3)
    let (lo, hi) = atanh_small(&rat(1, 3), bits + 2);
    (lo * rat(2, 1), hi * rat(2, 1))
}

/// Enclosure of `ln n` for a positive integer `n`.
pub fn ln_uint(n: &BigUint, bits: u32) -> Enclosure {
    assert!(!n.is_zero(), "ln of zero");
    if n.is_one() {
        return (BigRational::zero(), BigRational::zero());
    }
    // n = 2^a * r with r in [1, 2)
    let a = n.bits() - 1;
    let r = BigRational::new(
        BigInt::from_biguint(Sign::Plus, n.clone()),
        BigInt::one() << a,
    );
    let z = (&r - BigRational::one()) / (&r + BigRational::one());
    let extra = 8 + (64 - a.leading_zeros());
    let (rl, rh) = atanh_small(&z, bits + extra);
    let (l2l, l2h) = ln2(bits + extra);
    let a = BigRational::from_integer(BigInt::from(a));
    let two = rat(2, 1);
    (
        round_down(&(&a * l2l + &two * rl), bits),
        round_up(&(&a * l2h + &two * rh), bits),
    )
}

/// Enclosure of `e^x` for rational `x`.
pub fn exp(x: &BigRational, bits: u32) -> Enclosure {
    if x.is_negative() {
        let (lo, hi) = exp(&-x, bits + 4);
        return (round_down(&hi.recip(), bits), round_up(&lo.recip(), bits));
    }
    if x.is_zero() {
        return (BigRational::one(), BigRational::one());
    }
    // halve until y <= 1/2, then square back
    let mut halvings = 0u32;
    let mut y = x.clone();
    while y > rat(1, 2) {
        y /= rat(2, 1);
        halvings += 1;
    }
    let work = bits + 2 * halvings + 16;
    let tol = BigRational::new(BigInt::one(), pow2(work));
    let mut sum = BigRational::one();
    let mut term = BigRational::one();
    let mut i = 1i64;
    let (mut lo, mut hi) = loop {
        term = round_down(&(&term * &y / BigRational::from_integer(BigInt::from(i))), work + 8);
        sum += &term;
        // remainder <= 2 * y^(i+1)/(i+1)! for y <= 1/2; term truncation adds <= i ulps
        let next = &term * &y / BigRational::from_integer(BigInt::from(i + 1));
        if next < tol {
            let slack = BigRational::new(BigInt::from(2 * i + 2), pow2(work + 8));
            break (sum.clone(), &sum + next * rat(2, 1) + slack);
        }
        i += 1;
    };
    for _ in 0..halvings {
        lo = round_down(&(&lo * &lo), work);
        hi = round_up(&(&hi * &hi), work);
    }
    (round_down(&lo, bits), round_up(&hi, bits))
}

/// `atan(1/m)` for integer `m >= 2` by its alternating series.
fn atan_inv(m: i64, bits: u32) -> Enclosure {
    let x = rat(1, m);
    let x2 = &x * &x;
    let tol = BigRational::new(BigInt::one(), pow2(bits + 4));
    let mut power = x.clone();
    let mut sum = BigRational::zero();
    let mut i = 0i64;
    loop {
        let term = &power / BigRational::from_integer(BigInt::from(2 * i + 1));
        if i % 2 == 0 {
            sum += &term;
        } else {
            sum -= &term;
        }
        power = &power * &x2;
        i += 1;
        let next = &power / BigRational::from_integer(BigInt::from(2 * i + 1));
        if next < tol {
            // alternating with decreasing terms: the truth lies between
            // consecutive partial sums
            let (lo, hi) = if i % 2 == 0 {
                (sum.clone(), &sum + &next)
            } else {
                (&sum - &next, sum.clone())
            };
            return (round_down(&lo, bits + 2), round_up(&hi, bits + 2));
        }
    }
}

/// Enclosure of pi (Machin's formula).
pub fn pi(bits: u32) -> Enclosure {
    let (a_lo, a_hi) = atan_inv(5, bits + 6);
    let (b_lo, b_hi) = atan_inv(239, bits + 6);
    let lo = rat(16, 1) * a_lo - rat(4, 1) * b_hi;
    let hi = rat(16, 1) * a_hi - rat(4, 1) * b_lo;
    (round_down(&lo, bits), round_up(&hi, bits))
}

/// Enclosure of the square root of a non-negative rational.
pub fn sqrt(x: &BigRational, bits: u32) -> Enclosure {
    assert!(!x.is_negative(), "sqrt of a negative number");
    let scale = BigRational::from_integer(pow2(2 * bits));
    let scaled = x * scale;
    let floor = scaled.floor().to_integer();
    let ceil = scaled.ceil().to_integer();
    let lo_root = floor.sqrt();
    let mut hi_root = ceil.sqrt();
    if &hi_root * &hi_root < ceil {
        hi_root += 1;
    }
    (
        BigRational::new(lo_root, pow2(bits)),
        BigRational::new(hi_root, pow2(bits)),
    )
}

/// Largest `N / 2^bits` whose `root`-th power does not exceed `x` (`x >= 1`).
/// Used to pick exact rational stand-ins for irrational roots.
pub fn root_floor(x: &BigRational, root: u32, bits: u32) -> BigRational {
    assert!(root >= 1 && *x >= BigRational::one());
    let d = pow2(bits);
    // N^root <= x * 2^(bits*root)  <=>  N^root <= floor(x * 2^(bits*root))
    let scaled = (x * BigRational::from_integer(d.pow(root))).floor().to_integer();
    let n = scaled.nth_root(root);
    BigRational::new(n, d)
}

/// Enclosure `(lo, hi)` widened to `ceil` values: returns `Some(c)` when
/// every real in the enclosure has the same ceiling `c`.
pub fn common_ceil(lo: &BigRational, hi: &BigRational) -> Option<BigInt> {
    let a = lo.ceil().to_integer();
    let b = hi.ceil().to_integer();
    (a == b).then_some(a)
}

/// `n!` as a big integer.
pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}
