//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Every check is exact; each criterion
//! also has a wall-clock budget.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bphf_core::code::{build_code_splitter, pairwise_collision_profile, plan_code_splitter};
use bphf_core::compose::{compose_parts, compose_range, SharedSource};
use bphf_core::counting::{
    approx_count_cycles, approx_count_paths, exact_count_cycles, exact_count_paths, within_factor, ExactBudget,
};
use bphf_core::epsbias::{
    bias_scan, build_biased_space, build_low_splitter, check_almost_independence, within_relative_error,
    DEFAULT_MAX_DEGREE,
};
use bphf_core::graph::Graph;
use bphf_core::greedy::build_derandomized;
use bphf_core::params::{p_perfect, robbins_bounds};
use bphf_core::pipeline::{build_pipeline, plan_pipeline, PipelineOptions, SplitterProvider, Verification};
use bphf_core::random::sample_family;
use bphf_core::{part_sizes, verify_balance, BalanceCertificate, FunctionFamily, FunctionSource, SplitPattern};

type Check = Result<String, String>;
type Criterion = (&'static str, u64, fn() -> Check);

fn r(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn int(n: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(n.into())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s(e: bphf_core::Error) -> String {
    e.to_string()
}

/// Exhaustive report checked against a certificate with exact rationals.
fn check_exact(family: &(impl FunctionSource + ?Sized), cert: &BalanceCertificate, what: &str) -> Result<u64, String> {
    let rep = verify_balance(family, &cert.pattern, u64::MAX).map_err(e2s)?;
    let lo = &cert.t / &cert.delta;
    let hi = &cert.t * &cert.delta;
    ensure(int(rep.min_count) >= lo && int(rep.max_count) <= hi, || {
        format!("{what}: counts [{}, {}] outside [{lo}, {hi}]", rep.min_count, rep.max_count)
    })?;
    Ok(rep.subsets)
}

fn derandomized() -> Check {
    // M = ceil(16 (k ln n + 1) / (p (δ-1)^2)), evaluated to 50 digits offline
    let cases = [(10, 3, r(2, 1), 570u64), (12, 3, r(3, 2), 2435), (10, 4, r(2, 1), 1743)];
    let mut notes = Vec::new();
    for (n, k, delta, m) in cases {
        let start = Instant::now();
        let b = build_derandomized(n, k, &delta).map_err(e2s)?;
        let fam = &b.certified.family;
        ensure(fam.len() as u64 == m, || format!("({n},{k},{delta}): M = {}, expected {m}", fam.len()))?;
        let cert = &b.certified.certificate;
        ensure(cert.t == p_perfect(k) * int(m) && cert.delta == delta, || {
            format!("({n},{k},{delta}): certificate is not (pM, δ)")
        })?;
        let subsets = check_exact(fam, cert, &format!("({n},{k},{delta})"))?;
        let secs = start.elapsed();
        ensure(secs < Duration::from_secs(60), || format!("({n},{k},{delta}) took {secs:?}"))?;
        notes.push(format!("({n},{k},{delta}) M={m} over {subsets} subsets in {:.1}s", secs.as_secs_f64()));
    }
    Ok(notes.join("; "))
}

/// A random family with the certificate `((min+max)/2, ...)` read off its
/// own counts, resampled until every subset is hit.
fn random_certified(
    rng: &mut ChaCha8Rng,
    n: usize,
    l: usize,
    pattern: &SplitPattern,
) -> Result<(Arc<FunctionFamily>, BalanceCertificate), String> {
    for _ in 0..100 {
        let m = rng.gen_range(1..=30);
        let fam = sample_family(n, l, m, rng.gen()).map_err(e2s)?;
        let rep = verify_balance(&fam, pattern, u64::MAX).map_err(e2s)?;
        if let Some(cert) = rep.tight_certificate(pattern.clone()) {
            return Ok((Arc::new(fam), cert));
        }
    }
    Err(format!("no covering random family for n={n} l={l} {pattern}"))
}

fn compositions() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut ranges, mut parts) = (0, 0);
    for trial in 0..50 {
        let n = rng.gen_range(3..=6);
        if trial % 2 == 0 {
            let k = rng.gen_range(2..=3.min(n - 1));
            let l = rng.gen_range(k + 1..=6);
            let (outer, oc) = random_certified(&mut rng, n, l, &SplitPattern::new(k, l).map_err(e2s)?)?;
            let (inner, ic) = random_certified(&mut rng, l, k, &SplitPattern::perfect(k).map_err(e2s)?)?;
            let (composed, cert) = compose_range(outer, &oc, inner, &ic).map_err(e2s)?;
            check_exact(&composed, &cert, &format!("trial {trial}: range n={n} k={k} l={l}"))?;
            ranges += 1;
        } else {
            let k = rng.gen_range(2..=4.min(n));
            let l = rng.gen_range(1..k);
            let (splitter, sc) = random_certified(&mut rng, n, l, &SplitPattern::new(k, l).map_err(e2s)?)?;
            let mut families: Vec<(SharedSource, BalanceCertificate)> = Vec::new();
            for kj in part_sizes(k, l) {
                let (f, c) = random_certified(&mut rng, n, kj, &SplitPattern::perfect(kj).map_err(e2s)?)?;
                families.push((f, c));
            }
            let (composed, cert) = compose_parts(splitter, &sc, families).map_err(e2s)?;
            check_exact(&composed, &cert, &format!("trial {trial}: parts n={n} k={k} l={l}"))?;
            parts += 1;
        }
    }
    Ok(format!("{ranges} range and {parts} part compositions verified"))
}

fn code_splitter() -> Check {
    let plan = plan_code_splitter(100, 2, &r(2, 1)).map_err(e2s)?;
    ensure((plan.q, plan.t) == (11, 2), || format!("q={} t={}", plan.q, plan.t))?;
    let c = build_code_splitter(&plan, u64::MAX).map_err(e2s)?;
    let (worst, _) = pairwise_collision_profile(&c.family, 4950).map_err(e2s)?;
    ensure(worst <= 1, || format!("a pair collides under {worst} functions"))?;
    let rep = c.report.ok_or("no exact report")?;
    ensure(rep.subsets == 4950 && rep.min_count >= 10, || {
        format!("min split {} over {} pairs", rep.min_count, rep.subsets)
    })?;
    Ok(format!("q=11 t=2, worst collision {worst}, min split {}", rep.min_count))
}

fn biased_space() -> Check {
    let beta = r(1, 4);
    let space = build_biased_space(8, &beta, DEFAULT_MAX_DEGREE).map_err(e2s)?;
    ensure(space.field().degree() == 5 && space.size() == 1024, || {
        format!("m={} size={}", space.field().degree(), space.size())
    })?;
    let bias = bias_scan(&space, u64::MAX).map_err(e2s)?;
    ensure(bias.max_bias <= beta, || format!("bias {} on set {:#x}", bias.max_bias, bias.witness))?;
    let (ok, worst) = check_almost_independence(&space, 3, &beta, u64::MAX).map_err(e2s)?;
    ensure(ok, || format!("atom {worst:?} deviates by at least 1/4"))?;
    let dev = worst.map(|w| w.deviation.to_string()).unwrap_or_default();
    Ok(format!("m=5, 1024 points, max bias {} over 255 sets, worst atom deviation {dev} over 448 atoms", bias.max_bias))
}

fn low_splitter() -> Check {
    let delta = r(2, 1);
    let b = build_low_splitter(8, 3, 2, &delta, 1 << 14, u64::MAX).map_err(e2s)?;
    ensure(b.plan.size <= 1 << 14, || format!("{} points", b.plan.size))?;
    let fam = &b.certified.family;
    let t = &b.certified.certificate.t;
    let rep = verify_balance(fam, &b.certified.certificate.pattern, u64::MAX).map_err(e2s)?;
    ensure(within_relative_error(&rep, t, &delta), || {
        format!("split counts [{}, {}] vs T={t}", rep.min_count, rep.max_count)
    })?;
    ensure(b.relative_error_ok == Some(true), || "builder disagrees with the recheck".into())?;
    Ok(format!(
        "{} functions, T={t}, split counts in [{}, {}] over {} subsets",
        fam.len(),
        rep.min_count,
        rep.max_count,
        rep.subsets
    ))
}

fn pipeline() -> Check {
    let delta = r(2, 1);
    let plan = plan_pipeline(30, 3, &delta, SplitterProvider::DerandGreedy).map_err(e2s)?;
    let b = build_pipeline(&plan, &PipelineOptions::default()).map_err(e2s)?;
    let rep = match &b.verification {
        Verification::ExactEnumeration(rep) | Verification::ExactStructured(rep) => rep,
        Verification::Analytic => return Err("pipeline was not verified exactly".into()),
    };
    ensure(rep.subsets == 4060 && b.certificate.admits(rep), || {
        format!("counts [{}, {}] over {} subsets", rep.min_count, rep.max_count, rep.subsets)
    })?;
    ensure(b.certificate.delta <= delta, || format!("certificate delta {}", b.certificate.delta))?;
    Ok(format!(
        "|D|={}, counts in [{}, {}] over 4060 subsets, certificate delta {:.6}",
        b.family.len(),
        rep.min_count,
        rep.max_count,
        num_traits::ToPrimitive::to_f64(&b.certificate.delta).unwrap_or(f64::NAN)
    ))
}

fn exhaustive_certified(n: usize, k: usize) -> Result<(FunctionFamily, BalanceCertificate), String> {
    let fam = FunctionFamily::exhaustive(n, k, 1 << 20).map_err(e2s)?;
    let t: BigUint = (1..=k as u32).map(BigUint::from).product::<BigUint>() * BigUint::from(k).pow((n - k) as u32);
    let cert = BalanceCertificate::new(int(t), r(1, 1), SplitPattern::perfect(k).map_err(e2s)?).map_err(e2s)?;
    Ok((fam, cert))
}

fn counting() -> Check {
    let delta = r(3, 2);
    let k = 4;
    let oracle = ExactBudget::default();
    let b = build_derandomized(20, k, &delta).map_err(e2s)?;
    let (fam, cert) = (&b.certified.family, &b.certified.certificate);
    let mut worst: f64 = 1.0;
    let mut graphs = 0;
    for seed in 0..10 {
        for directed in [false, true] {
            let g = Graph::random(20, 0.3, directed, seed);
            let paths = approx_count_paths(&g, k, &delta, fam, cert).map_err(e2s)?;
            let cycles = approx_count_cycles(&g, k, &delta, fam, cert).map_err(e2s)?;
            let (ep, ec) = (
                exact_count_paths(&g, k, &oracle).map_err(e2s)?,
                exact_count_cycles(&g, k, &oracle).map_err(e2s)?,
            );
            for (what, value, exact) in [("paths", &paths.value, ep), ("cycles", &cycles.value, ec)] {
                ensure(within_factor(value, exact, &delta), || {
                    format!("seed {seed} directed={directed} {what}: {value} vs exact {exact}")
                })?;
                if exact > 0 {
                    let ratio = num_traits::ToPrimitive::to_f64(value).unwrap() / exact as f64;
                    worst = worst.max(ratio).max(1.0 / ratio);
                }
            }
            graphs += 1;
        }
    }
    let mut exact_cases = 0;
    for n in 3..=6 {
        for seed in 0..3 {
            for directed in [false, true] {
                let g = Graph::random(n, 0.5, directed, 100 + seed);
                for k in 2..=n.min(4) {
                    let (fam, cert) = exhaustive_certified(n, k)?;
                    let paths = approx_count_paths(&g, k, &r(1, 1), &fam, &cert).map_err(e2s)?;
                    let exact = exact_count_paths(&g, k, &oracle).map_err(e2s)?;
                    ensure(paths.value == int(exact), || format!("n={n} k={k} paths {} vs {exact}", paths.value))?;
                    if directed || k >= 3 {
                        let cycles = approx_count_cycles(&g, k, &r(1, 1), &fam, &cert).map_err(e2s)?;
                        let exact = exact_count_cycles(&g, k, &oracle).map_err(e2s)?;
                        ensure(cycles.value == int(exact), || {
                            format!("n={n} k={k} cycles {} vs {exact}", cycles.value)
                        })?;
                    }
                    exact_cases += 1;
                }
            }
        }
    }
    Ok(format!(
        "{graphs} graphs within 3/2 (worst ratio {worst:.4}) using M={}; {exact_cases} exhaustive-family cases exact",
        fam.len()
    ))
}

fn identities() -> Check {
    let mut cases = 0;
    for n in 1..=5usize {
        for k in 1..=3.min(n) {
            let (fam, cert) = exhaustive_certified(n, k)?;
            let rep = verify_balance(&fam, &cert.pattern, u64::MAX).map_err(e2s)?;
            ensure(int(rep.min_count) == cert.t && int(rep.max_count) == cert.t, || {
                format!("n={n} k={k}: counts [{}, {}] vs k!k^(n-k) = {}", rep.min_count, rep.max_count, cert.t)
            })?;
            cases += 1;
        }
    }
    let mut fact = BigUint::from(1u32);
    for n in 1..=20u64 {
        fact *= BigUint::from(n);
        let (lo, hi) = robbins_bounds(n);
        let f = int(fact.clone());
        ensure(lo < f && f < hi, || format!("Robbins bounds fail to bracket {n}!"))?;
    }
    Ok(format!("{cases} exhaustive identities, Robbins brackets for n = 1..20"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 derandomized construction", 180, derandomized),
        ("2 composition lemmas", 10, compositions),
        ("3 code splitter", 5, code_splitter),
        ("4 small-bias space", 5, biased_space),
        ("5 low splitter", 60, low_splitter),
        ("6 composed pipeline", 300, pipeline),
        ("7 counting sandwich", 600, counting),
        ("8 identities", 1, identities),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, limit, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let outcome = match outcome {
            Ok(msg) if secs >= limit as f64 => Err(format!("{msg}; took {secs:.1}s, budget {limit}s")),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("PASS criterion {name}: {msg} ({secs:.1}s, budget {limit}s)"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {name}: {msg} ({secs:.1}s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
