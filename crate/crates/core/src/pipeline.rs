//! The composed construction: a code splitter `[n] -> [q]`, a
//! `(q,k,l)`-splitter with `l = ⌈log2 k⌉`, and per-part `(q,k_j)`-families,
//! assembled by the two composition lemmas.
//!
//! `δ' = δ^{1/3}` and `δ'' = δ^{1/(3l)}` are replaced by exact dyadic
//! rationals at or below the true roots, so the product of the component
//! deltas is at most `δ` in exact arithmetic.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use crate::bounds::root_floor;
use crate::code::{build_code_splitter, plan_code_splitter, CodeSplitterPlan};
use crate::compose::{
    compose_parts, compose_range, verify_structured, PartsCounter, RangeCounter, SharedSource,
    SubsetCounter, TabulatedCounts,
};
use crate::epsbias::{build_low_splitter, plan_low_splitter, DEFAULT_MAX_POINTS};
use crate::error::{Error, Result};
use crate::family::{
    format_ratio, part_sizes, verify_balance, BalanceCertificate, BalanceReport, FunctionFamily,
    FunctionSource, SplitPattern, DEFAULT_SUBSET_BUDGET,
};
use crate::greedy::{build_derandomized_pattern, GreedyOptions};
use crate::params::{check_delta, ConstructionParams};
use crate::subsets::binomial;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitterProvider {
    DerandGreedy,
    EpsBias,
}

impl fmt::Display for SplitterProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitterProvider::DerandGreedy => "derand-greedy",
            SplitterProvider::EpsBias => "eps-bias",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelinePlan {
    pub n: usize,
    pub k: usize,
    pub delta: BigRational,
    pub l: usize,
    /// Stand-in for `δ^{1/3}`.
    pub delta_outer: BigRational,
    /// Stand-in for `δ^{1/(3l)}`.
    pub delta_part: BigRational,
    pub code: CodeSplitterPlan,
    pub part_sizes: Vec<usize>,
    pub provider: SplitterProvider,
    pub code_size: u64,
    pub splitter_size: u128,
    pub part_family_sizes: Vec<u64>,
    /// `δ'' - 1 >= (δ - 1)/(6l)`.
    pub part_delta_bound_holds: bool,
}

/// Smallest dyadic precision at which the root stand-in exceeds 1.
fn root_below(delta: &BigRational, root: u32) -> BigRational {
    let mut bits = 32;
    loop {
        let r = root_floor(delta, root, bits);
        if r > BigRational::one() {
            return r;
        }
        bits *= 2;
    }
}

pub fn ceil_log2(k: usize) -> usize {
    (usize::BITS - (k - 1).leading_zeros()) as usize
}

pub fn plan_pipeline(n: usize, k: usize, delta: &BigRational, provider: SplitterProvider) -> Result<PipelinePlan> {
    check_delta(delta)?;
    if k < 2 || k > n {
        return Err(Error::param(format!("pipeline needs 2 <= k <= n, got k={k} n={n}")));
    }
    let l = ceil_log2(k);
    let delta_outer = root_below(delta, 3);
    let delta_part = root_below(delta, 3 * l as u32);
    let code = plan_code_splitter(n, k, &delta_outer)?;
    let q = code.q as usize;
    let sizes = part_sizes(k, l);
    let code_size = if code.t == 1 { 1 } else { code.q };
    let splitter_size = match (l, provider) {
        (1, _) => 1,
        (_, SplitterProvider::DerandGreedy) => ConstructionParams::derandomized(q, k, l, &delta_outer)?.m as u128,
        (_, SplitterProvider::EpsBias) => plan_low_splitter(q, k, l, &delta_outer)?.size,
    };
    let part_family_sizes = sizes
        .iter()
        .map(|&kj| {
            if kj == 1 {
                Ok(1)
            } else {
                Ok(ConstructionParams::derandomized(q, kj, kj, &delta_part)?.m)
            }
        })
        .collect::<Result<Vec<u64>>>()?;
    let six_l = BigRational::from_integer(BigInt::from(6 * l));
    let part_delta_bound_holds = &delta_part - BigRational::one() >= (delta - BigRational::one()) / six_l;
    Ok(PipelinePlan {
        n,
        k,
        delta: delta.clone(),
        l,
        delta_outer,
        delta_part,
        code,
        part_sizes: sizes,
        provider,
        code_size,
        splitter_size,
        part_family_sizes,
        part_delta_bound_holds,
    })
}

/// `|D''| · |H| · Π |B_j|`, saturating.
pub fn predicted_size(plan: &PipelinePlan) -> u128 {
    plan.part_family_sizes
        .iter()
        .fold(plan.code_size as u128 * plan.splitter_size, |acc, &m| acc.saturating_mul(m as u128))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verification {
    /// Every function enumerated against every subset.
    ExactEnumeration(BalanceReport),
    /// Exact counts through the product structure of the composition.
    ExactStructured(BalanceReport),
    /// Not checked end to end; each component was checked and the
    /// certificate follows from the composition lemmas.
    Analytic,
}

impl Verification {
    pub fn kind(&self) -> &'static str {
        match self {
            Verification::ExactEnumeration(_) => "exact",
            Verification::ExactStructured(_) => "exact",
            Verification::Analytic => "analytic",
        }
    }

    pub fn report(&self) -> Option<&BalanceReport> {
        match self {
            Verification::ExactEnumeration(r) | Verification::ExactStructured(r) => Some(r),
            Verification::Analytic => None,
        }
    }
}

/// One factor of the composed family.
#[derive(Clone, Debug)]
pub struct Component {
    pub name: String,
    pub size: u64,
    pub certificate: BalanceCertificate,
    /// How the factor's certificate was established.
    pub provenance: String,
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} size={} T={} delta={} ({})",
            self.name,
            self.size,
            format_ratio(&self.certificate.t),
            format_ratio(&self.certificate.delta),
            self.provenance
        )
    }
}

pub struct PipelineBuild {
    pub plan: PipelinePlan,
    /// The composed family, enumerated lazily with `D''` outermost.
    pub family: SharedSource,
    pub certificate: BalanceCertificate,
    pub components: Vec<Component>,
    pub verification: Verification,
}

#[derive(Clone, Debug)]
pub struct PipelineOptions {
    pub max_subsets: u64,
    /// Largest `C(n,k) · |D|` verified by direct enumeration.
    pub max_enumeration_work: u128,
    /// Largest `C(n,k) · cost` verified through the structured counter.
    pub max_structured_work: u128,
    pub max_points: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            max_subsets: DEFAULT_SUBSET_BUDGET,
            max_enumeration_work: 100_000_000,
            max_structured_work: 50_000_000_000,
            max_points: DEFAULT_MAX_POINTS,
        }
    }
}

fn checked(report: &Option<BalanceReport>) -> String {
    match report {
        Some(_) => "verified exactly".to_string(),
        None => "by construction".to_string(),
    }
}

fn trivial(n: usize, k: usize) -> Result<(FunctionFamily, BalanceCertificate)> {
    Ok((FunctionFamily::constant(n, k)?, BalanceCertificate::unit(SplitPattern::perfect(k)?)))
}

pub fn build_pipeline(plan: &PipelinePlan, options: &PipelineOptions) -> Result<PipelineBuild> {
    let (n, k, l) = (plan.n, plan.k, plan.l);
    let q = plan.code.q as usize;
    let mut components = Vec::new();

    let code = build_code_splitter(&plan.code, options.max_subsets)?;
    components.push(Component {
        name: format!("code splitter [{n}]->[{q}] t={}", plan.code.t),
        size: code.family.len() as u64,
        certificate: code.certificate.clone(),
        provenance: checked(&code.report),
    });

    let greedy = GreedyOptions {
        max_subsets: options.max_subsets,
        ..GreedyOptions::default()
    };
    let splitter = match plan.provider {
        SplitterProvider::EpsBias if l > 1 => {
            // over-budget spaces fail here with a message naming the greedy splitter
            let b = build_low_splitter(q, k, l, &plan.delta_outer, options.max_points, options.max_subsets)?;
            components.push(Component {
                name: format!("small-bias ({q},{k},{l})-splitter"),
                size: b.certified.family.len() as u64,
                certificate: b.certified.certificate.clone(),
                provenance: checked(&b.certified.report),
            });
            b.certified
        }
        _ => {
            let b = build_derandomized_pattern(q, k, l, &plan.delta_outer, &greedy)?;
            components.push(Component {
                name: format!("greedy ({q},{k},{l})-splitter"),
                size: b.certified.family.len() as u64,
                certificate: b.certified.certificate.clone(),
                provenance: format!("{}, {}", checked(&b.certified.report), b.precision),
            });
            b.certified
        }
    };

    let mut distinct: Vec<(usize, Arc<FunctionFamily>, BalanceCertificate)> = Vec::new();
    for &kj in &plan.part_sizes {
        if distinct.iter().any(|(size, _, _)| *size == kj) {
            continue;
        }
        let (family, certificate, provenance) = if kj == 1 {
            let (f, c) = trivial(q, 1)?;
            (f, c, "single function".to_string())
        } else {
            let b = build_derandomized_pattern(q, kj, kj, &plan.delta_part, &greedy)?;
            let p = format!("{}, {}", checked(&b.certified.report), b.precision);
            (b.certified.family, b.certified.certificate, p)
        };
        components.push(Component {
            name: format!("part family ({q},{kj})"),
            size: family.len() as u64,
            certificate: certificate.clone(),
            provenance,
        });
        distinct.push((kj, Arc::new(family), certificate));
    }
    let part_of = |kj: usize| distinct.iter().find(|(size, _, _)| *size == kj).expect("built above");

    let code_family: Arc<FunctionFamily> = Arc::new(code.family);
    let splitter_family: Arc<FunctionFamily> = Arc::new(splitter.family);
    let parts: Vec<(SharedSource, BalanceCertificate)> = plan
        .part_sizes
        .iter()
        .map(|&kj| {
            let (_, f, c) = part_of(kj);
            (f.clone() as SharedSource, c.clone())
        })
        .collect();
    let (inner, inner_cert) = compose_parts(splitter_family.clone(), &splitter.certificate, parts)?;
    let (outer, certificate) = compose_range(code_family.clone(), &code.certificate, Arc::new(inner), &inner_cert)?;
    if certificate.delta > plan.delta {
        return Err(Error::Verification(format!(
            "composed delta {} exceeds the target {}",
            format_ratio(&certificate.delta),
            format_ratio(&plan.delta)
        )));
    }

    let pattern = SplitPattern::perfect(k)?;
    let subsets = binomial(n as u64, k as u64);
    let family: SharedSource = Arc::new(outer);
    let verification = if subsets.saturating_mul(family.len() as u128) <= options.max_enumeration_work {
        Verification::ExactEnumeration(verify_balance(family.as_ref(), &pattern, options.max_subsets)?)
    } else {
        let counter = structured_counter(
            code_family,
            splitter_family,
            &splitter.certificate.pattern,
            &plan.part_sizes,
            |kj| part_of(kj).1.clone(),
            options.max_subsets,
        )?;
        if subsets.saturating_mul(counter.cost()) <= options.max_structured_work {
            Verification::ExactStructured(verify_structured(&counter, options.max_subsets)?)
        } else {
            Verification::Analytic
        }
    };
    if let Some(report) = verification.report() {
        if !certificate.admits(report) {
            return Err(Error::Verification(format!(
                "composed family counts [{}, {}] violate T={} delta={}",
                report.min_count,
                report.max_count,
                format_ratio(&certificate.t),
                format_ratio(&certificate.delta)
            )));
        }
    }
    Ok(PipelineBuild {
        plan: plan.clone(),
        family,
        certificate,
        components,
        verification,
    })
}

fn structured_counter(
    code: Arc<FunctionFamily>,
    splitter: Arc<FunctionFamily>,
    splitter_pattern: &SplitPattern,
    part_sizes: &[usize],
    part: impl Fn(usize) -> Arc<FunctionFamily>,
    max_subsets: u64,
) -> Result<RangeCounter> {
    let parts = part_sizes
        .iter()
        .map(|&kj| {
            let family = part(kj);
            let pattern = SplitPattern::perfect(kj)?;
            Ok(Box::new(TabulatedCounts::new(family.as_ref(), &pattern, max_subsets)?) as Box<dyn SubsetCounter>)
        })
        .collect::<Result<Vec<_>>>()?;
    let inner = PartsCounter::new(splitter, splitter_pattern, parts)?;
    RangeCounter::new(code, Box::new(inner))
}
