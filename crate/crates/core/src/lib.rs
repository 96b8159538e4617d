//! Balanced families of perfect hash functions and balanced splitters, with
//! exactly checkable balance certificates, and their use in deterministic
//! color-coding estimates of path and cycle counts.
//!
//! A family of functions `[0, n) -> [0, l)` is δ-balanced for a k-subset
//! pattern when there is a `T > 0` such that every k-subset is hit by between
//! `T/δ` and `δT` functions. Every builder in this crate returns a family
//! together with such a certificate, and the certificate is checked by
//! exhaustive counting before it is handed out (or, for composed families too
//! large to enumerate, by an exact factorized count).

pub mod bounds;
pub mod code;
pub mod compose;
pub mod counting;
pub mod epsbias;
pub mod error;
pub mod family;
pub mod format;
pub mod graph;
pub mod greedy;
pub mod params;
pub mod pipeline;
pub mod random;
pub mod scalar;
pub mod subsets;

pub use error::{Error, Result};
pub use family::{
    count_for_subset, part_sizes, verify_balance, BalanceCertificate, BalanceReport,
    CertifiedFamily, FunctionFamily, FunctionSource, SplitPattern,
};

/// Exact rationals used for certificates and probabilities.
pub type Rational = num_rational::BigRational;
/// Unbounded path and cycle counts.
pub type Count = num_bigint::BigUint;
/// Default working precision of the potential function.
pub type Potential = f64;
/// Escalated working precision of the potential function.
pub type WidePotential = twofloat::TwoFloat;
