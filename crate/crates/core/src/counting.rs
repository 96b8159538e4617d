//! Color-coding: count colorful paths under every coloring of a balanced
//! family, then divide by the family's `T` (paths) or `kT` (cycles), and by
//! 2 for undirected graphs.
//!
//! Color sets are bitmasks. Layer `i` of the DP holds one entry per vertex
//! and per `i`-subset of colors, the subsets ranked in colexicographic
//! order, which for a fixed popcount is plain numeric order of the masks.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{CheckedAdd, One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::family::{format_ratio, BalanceCertificate, FunctionSource, SplitPattern};
use crate::graph::Graph;

pub const MAX_COLORS: usize = 30;

/// Counter type for the colorful-path DP. `checked_add` returning `None`
/// sends the computation to a wider type.
pub trait PathCount: Clone + Zero + One + CheckedAdd + Send + Sync + Into<BigUint> {}

impl PathCount for u32 {}
impl PathCount for u64 {}
impl PathCount for u128 {}
impl PathCount for BigUint {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Paths,
    Cycles,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Paths => "paths",
            Target::Cycles => "cycles",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColorfulTotals<C> {
    /// Colorful `k`-vertex paths ending at each vertex.
    pub per_vertex: Vec<C>,
    pub total: C,
}

struct Binomials(Vec<Vec<usize>>);

impl Binomials {
    fn new(k: usize) -> Self {
        let mut t = vec![vec![0usize; k + 2]; k + 1];
        for n in 0..=k {
            t[n][0] = 1;
            for r in 1..=n {
                t[n][r] = t[n - 1][r - 1] + t[n - 1][r];
            }
        }
        Self(t)
    }

    fn get(&self, n: usize, r: usize) -> usize {
        if r > n {
            0
        } else {
            self.0[n][r]
        }
    }

    fn rank(&self, mut mask: u32) -> usize {
        let mut rank = 0;
        let mut j = 1;
        while mask != 0 {
            let b = mask.trailing_zeros() as usize;
            rank += self.get(b, j);
            mask &= mask - 1;
            j += 1;
        }
        rank
    }
}

fn next_same_popcount(v: u32) -> u32 {
    let t = v | (v.wrapping_sub(1));
    let w = (!t & t.wrapping_add(1)).wrapping_sub(1);
    t.wrapping_add(1) | (w >> (v.trailing_zeros() + 1))
}

fn check_coloring(graph: &Graph, coloring: &[u32], k: usize) -> Result<()> {
    if k == 0 || k > MAX_COLORS {
        return Err(Error::param(format!("k must be in 1..={MAX_COLORS}, got {k}")));
    }
    if coloring.len() != graph.vertex_count() {
        return Err(Error::param(format!(
            "coloring has {} entries for {} vertices",
            coloring.len(),
            graph.vertex_count()
        )));
    }
    if let Some(v) = coloring.iter().position(|&c| c as usize >= k) {
        return Err(Error::param(format!("vertex {v} has color {} outside [0,{k})", coloring[v])));
    }
    Ok(())
}

/// Final DP layer (full color set), indexed by end vertex. With `seed`, only
/// paths starting at that vertex are counted.
fn final_layer<C: PathCount>(
    graph: &Graph,
    coloring: &[u32],
    k: usize,
    seed: Option<usize>,
    binom: &Binomials,
) -> Option<Vec<C>> {
    let n = graph.vertex_count();
    let mut prev = vec![C::zero(); k * n];
    match seed {
        Some(s) => prev[coloring[s] as usize * n + s] = C::one(),
        None => {
            for (v, &c) in coloring.iter().enumerate() {
                prev[c as usize * n + v] = C::one();
            }
        }
    }
    let mut ext = vec![0usize; k];
    for i in 2..=k {
        let mut next = vec![C::zero(); binom.get(k, i) * n];
        let mut mask: u32 = (1 << (i - 1)) - 1;
        for r in 0..binom.get(k, i - 1) {
            for (c, slot) in ext.iter_mut().enumerate() {
                if mask >> c & 1 == 0 {
                    *slot = binom.rank(mask | 1 << c);
                }
            }
            for u in 0..n {
                let x = &prev[r * n + u];
                if x.is_zero() {
                    continue;
                }
                for &v in graph.out_neighbors(u) {
                    let c = coloring[v] as usize;
                    if mask >> c & 1 == 1 {
                        continue;
                    }
                    let slot = &mut next[ext[c] * n + v];
                    *slot = slot.checked_add(x)?;
                }
            }
            mask = next_same_popcount(mask);
        }
        prev = next;
    }
    Some(prev)
}

fn sum<C: PathCount>(values: impl IntoIterator<Item = C>) -> Option<C> {
    values.into_iter().try_fold(C::zero(), |acc, x| acc.checked_add(&x))
}

/// Colorful paths in counter type `C`; `None` if `C` overflows.
pub fn colorful_path_total_in<C: PathCount>(
    graph: &Graph,
    coloring: &[u32],
    k: usize,
) -> Result<Option<ColorfulTotals<C>>> {
    check_coloring(graph, coloring, k)?;
    let binom = Binomials::new(k);
    Ok(final_layer::<C>(graph, coloring, k, None, &binom).and_then(|per_vertex| {
        let total = sum(per_vertex.iter().cloned())?;
        Some(ColorfulTotals { per_vertex, total })
    }))
}

/// Colorful `k`-vertex paths, counted per direction of traversal.
pub fn colorful_path_total(graph: &Graph, coloring: &[u32], k: usize) -> Result<ColorfulTotals<BigUint>> {
    if let Some(t) = colorful_path_total_in::<u64>(graph, coloring, k)? {
        return Ok(ColorfulTotals {
            per_vertex: t.per_vertex.into_iter().map(BigUint::from).collect(),
            total: t.total.into(),
        });
    }
    Ok(colorful_path_total_in::<BigUint>(graph, coloring, k)?.expect("BigUint does not overflow"))
}

fn cycle_total_in<C: PathCount>(graph: &Graph, coloring: &[u32], k: usize, binom: &Binomials) -> Option<C> {
    let mut total = C::zero();
    for s in 0..graph.vertex_count() {
        let last = final_layer::<C>(graph, coloring, k, Some(s), binom)?;
        for &v in graph.in_neighbors(s) {
            total = total.checked_add(&last[v])?;
        }
    }
    Some(total)
}

/// Colorful `k`-cycles through each start vertex, i.e. every colorful cycle
/// counted `k` times (and twice more if undirected).
pub fn colorful_cycle_total(graph: &Graph, coloring: &[u32], k: usize) -> Result<BigUint> {
    check_coloring(graph, coloring, k)?;
    check_cycle_length(graph, k)?;
    let binom = Binomials::new(k);
    Ok(match cycle_total_in::<u64>(graph, coloring, k, &binom) {
        Some(t) => t.into(),
        None => cycle_total_in::<BigUint>(graph, coloring, k, &binom).expect("BigUint does not overflow"),
    })
}

fn check_cycle_length(graph: &Graph, k: usize) -> Result<()> {
    let min = if graph.is_directed() { 2 } else { 3 };
    if k < min {
        let kind = if graph.is_directed() { "directed" } else { "undirected" };
        return Err(Error::param(format!("{kind} cycles need k >= {min}, got {k}")));
    }
    Ok(())
}

fn total_for(graph: &Graph, coloring: &[u32], k: usize, target: Target, binom: &Binomials) -> BigUint {
    match target {
        Target::Paths => match final_layer::<u64>(graph, coloring, k, None, binom).and_then(sum) {
            Some(t) => t.into(),
            None => sum(final_layer::<BigUint>(graph, coloring, k, None, binom).expect("no overflow"))
                .expect("no overflow"),
        },
        Target::Cycles => match cycle_total_in::<u64>(graph, coloring, k, binom) {
            Some(t) => t.into(),
            None => cycle_total_in::<BigUint>(graph, coloring, k, binom).expect("no overflow"),
        },
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApproxCount {
    pub target: Target,
    /// Sum of colorful totals over the family.
    pub raw: BigUint,
    pub divisor: BigRational,
    pub value: BigRational,
    pub certificate: BalanceCertificate,
}

impl ApproxCount {
    /// `value` to 6 significant digits.
    pub fn value_decimal(&self) -> String {
        decimal6(&self.value)
    }
}

impl fmt::Display for ApproxCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.raw,
            format_ratio(&self.divisor),
            format_ratio(&self.value),
            self.value_decimal()
        )
    }
}

/// 6 significant digits; scientific notation outside `[1e-4, 1e15)`.
pub fn decimal6(x: &BigRational) -> String {
    let v = x.to_f64().unwrap_or(f64::INFINITY);
    if v == 0.0 {
        return "0".to_string();
    }
    let mag = v.abs().log10().floor() as i32;
    if (-4..15).contains(&mag) {
        format!("{:.*}", (5 - mag).max(0) as usize, v)
    } else {
        format!("{v:.5e}")
    }
}

/// `exact/δ <= value <= δ·exact`, exactly.
pub fn within_factor(value: &BigRational, exact: u128, delta: &BigRational) -> bool {
    let exact = BigRational::from_integer(BigInt::from(exact));
    &exact / delta <= *value && *value <= &exact * delta
}

pub fn approx_count(
    graph: &Graph,
    target: Target,
    k: usize,
    delta: &BigRational,
    family: &(impl FunctionSource + ?Sized),
    certificate: &BalanceCertificate,
) -> Result<ApproxCount> {
    if k == 0 || k > MAX_COLORS {
        return Err(Error::param(format!("k must be in 1..={MAX_COLORS}, got {k}")));
    }
    if target == Target::Cycles {
        check_cycle_length(graph, k)?;
    }
    let n = graph.vertex_count();
    if k > n {
        return Err(Error::param(format!("k = {k} exceeds the {n} vertices")));
    }
    if certificate.pattern != SplitPattern::perfect(k)?
        || family.domain_size() != n
        || family.range_size() != k
    {
        return Err(Error::param(format!(
            "need a ({n},{k}) perfect hash family, got domain {} range {} with a {}-to-{} certificate",
            family.domain_size(),
            family.range_size(),
            certificate.pattern.k(),
            certificate.pattern.l()
        )));
    }
    if certificate.delta > *delta {
        return Err(Error::param(format!(
            "family certificate delta {} exceeds the requested {}",
            format_ratio(&certificate.delta),
            format_ratio(delta)
        )));
    }
    let binom = Binomials::new(k);
    let raw = (0..family.len())
        .into_par_iter()
        .map_init(
            || vec![0u32; n],
            |coloring, i| {
                family.write_function(i, coloring);
                total_for(graph, coloring, k, target, &binom)
            },
        )
        .reduce(BigUint::zero, |a, b| a + b);
    // a single vertex is one path, not one per direction
    let direction = if graph.is_directed() || k == 1 { 1 } else { 2 };
    let rotations = match target {
        Target::Paths => 1,
        Target::Cycles => k,
    };
    let divisor = &certificate.t * BigRational::from_integer(BigInt::from(direction * rotations));
    let value = BigRational::from_integer(BigInt::from(raw.clone())) / &divisor;
    Ok(ApproxCount {
        target,
        raw,
        divisor,
        value,
        certificate: certificate.clone(),
    })
}

pub fn approx_count_paths(
    graph: &Graph,
    k: usize,
    delta: &BigRational,
    family: &(impl FunctionSource + ?Sized),
    certificate: &BalanceCertificate,
) -> Result<ApproxCount> {
    approx_count(graph, Target::Paths, k, delta, family, certificate)
}

pub fn approx_count_cycles(
    graph: &Graph,
    k: usize,
    delta: &BigRational,
    family: &(impl FunctionSource + ?Sized),
    certificate: &BalanceCertificate,
) -> Result<ApproxCount> {
    approx_count(graph, Target::Cycles, k, delta, family, certificate)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExactBudget {
    pub max_vertices: usize,
    pub max_k: usize,
}

impl Default for ExactBudget {
    fn default() -> Self {
        Self {
            max_vertices: 40,
            max_k: 6,
        }
    }
}

fn check_budget(graph: &Graph, k: usize, budget: &ExactBudget) -> Result<()> {
    if graph.vertex_count() > budget.max_vertices {
        return Err(Error::budget(
            "exact enumeration (vertices)",
            graph.vertex_count() as u128,
            budget.max_vertices as u128,
        ));
    }
    if k > budget.max_k {
        return Err(Error::budget("exact enumeration (k)", k as u128, budget.max_k as u128));
    }
    Ok(())
}

/// Vertex sequences of length `k` along edges, starting at `start`, using
/// only vertices `> floor`, and passing each completed sequence to `done`.
fn extend(
    graph: &Graph,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    k: usize,
    floor: Option<usize>,
    done: &mut impl FnMut(&[usize]),
) {
    if path.len() == k {
        done(path);
        return;
    }
    let u = *path.last().expect("path starts non-empty");
    for &v in graph.out_neighbors(u) {
        if on_path[v] || floor.is_some_and(|f| v <= f) {
            continue;
        }
        on_path[v] = true;
        path.push(v);
        extend(graph, path, on_path, k, floor, done);
        path.pop();
        on_path[v] = false;
    }
}

/// Simple paths with `k` vertices; an undirected path counts once.
pub fn exact_count_paths(graph: &Graph, k: usize, budget: &ExactBudget) -> Result<u128> {
    if k == 0 {
        return Err(Error::param("paths need k >= 1"));
    }
    check_budget(graph, k, budget)?;
    let n = graph.vertex_count();
    if k > n {
        return Ok(0);
    }
    if k == 1 {
        return Ok(n as u128);
    }
    let mut sequences = 0u128;
    let mut on_path = vec![false; n];
    for s in 0..n {
        on_path[s] = true;
        extend(graph, &mut vec![s], &mut on_path, k, None, &mut |_| sequences += 1);
        on_path[s] = false;
    }
    Ok(if graph.is_directed() { sequences } else { sequences / 2 })
}

/// Simple cycles with `k` vertices, each counted once up to rotation (and
/// reflection if undirected).
pub fn exact_count_cycles(graph: &Graph, k: usize, budget: &ExactBudget) -> Result<u128> {
    check_cycle_length(graph, k)?;
    check_budget(graph, k, budget)?;
    let n = graph.vertex_count();
    if k > n {
        return Ok(0);
    }
    let mut closed = 0u128;
    let mut on_path = vec![false; n];
    for s in 0..n {
        on_path[s] = true;
        // canonical rotation: s is the smallest vertex
        extend(graph, &mut vec![s], &mut on_path, k, Some(s), &mut |p| {
            if graph.has_edge(p[k - 1], s) {
                closed += 1;
            }
        });
        on_path[s] = false;
    }
    Ok(if graph.is_directed() { closed } else { closed / 2 })
}
