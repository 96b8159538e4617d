//! `bphf`: build, verify and apply balanced hash families.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 verification failure,
//! 3 construction failure, 4 budget exceeded.

mod cache;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bphf_core::code::{build_code_splitter, plan_code_splitter};
use bphf_core::counting::{approx_count, decimal6, exact_count_cycles, exact_count_paths, within_factor, ExactBudget, Target};
use bphf_core::epsbias::{build_low_splitter, DEFAULT_MAX_POINTS};
use bphf_core::family::{format_ratio, DEFAULT_SUBSET_BUDGET};
use bphf_core::format::{read_family, write_family};
use bphf_core::graph::Graph;
use bphf_core::greedy::{build_derandomized_pattern, GreedyOptions};
use bphf_core::params::{check_delta, parse_rational};
use bphf_core::pipeline::{build_pipeline, ceil_log2, plan_pipeline, PipelineOptions, SplitterProvider};
use bphf_core::random::{build_random, RandomOptions};
use bphf_core::{verify_balance, BalanceCertificate, Error, FunctionSource, Rational};

#[derive(Parser)]
#[command(name = "bphf", version, about = "Balanced perfect hash families, splitters and color-coding counts")]
struct Cli {
    /// Worker threads for verification and counting (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Random,
    Derand,
    Code,
    Lowsplit,
    Pipeline,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Derand => "derand",
            Method::Code => "code",
            Method::Lowsplit => "lowsplit",
            Method::Pipeline => "pipeline",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Provider {
    Derand,
    EpsBias,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Paths,
    Cycles,
}

impl From<Kind> for Target {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Paths => Target::Paths,
            Kind::Cycles => Target::Cycles,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a certified family and write it to a file.
    Build {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// Balance factor, as a decimal or a fraction (1 < delta <= 2).
        #[arg(long)]
        delta: String,
        #[arg(long, value_enum)]
        method: Method,
        /// Range size for a splitter (random, derand, lowsplit).
        #[arg(long)]
        l: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Provider of the middle splitter in the pipeline.
        #[arg(long, value_enum, default_value_t = Provider::Derand)]
        provider: Provider,
        /// Largest number of k-subsets enumerated during verification.
        #[arg(long, default_value_t = DEFAULT_SUBSET_BUDGET)]
        budget: u64,
        /// Largest number of values (M·n) written to the output file.
        #[arg(long, default_value_t = 100_000_000)]
        max_write: u64,
    },
    /// Check a family file against its embedded certificate.
    Verify {
        #[arg(long)]
        family: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SUBSET_BUDGET)]
        budget: u64,
    },
    /// Approximate the number of k-vertex paths or cycles.
    Count {
        #[arg(value_enum)]
        kind: Kind,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        delta: String,
        /// Family to color with; built and cached beside the graph if absent.
        #[arg(long)]
        family: Option<PathBuf>,
        /// Also run the exact oracle and report the ratio.
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = DEFAULT_SUBSET_BUDGET)]
        budget: u64,
    },
    /// Count k-vertex paths or cycles exactly by enumeration.
    Exact {
        #[arg(value_enum)]
        kind: Kind,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 40)]
        max_vertices: usize,
        #[arg(long, default_value_t = 6)]
        max_k: usize,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parameter(_) | Error::Parse { .. } | Error::Io(_) => 1,
            Error::Verification(_) => 2,
            Error::ConstructionFailed { .. } => 3,
            Error::BudgetExceeded { .. } | Error::NumericOverflow(_) => 4,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

/// A failed self-check of a freshly built family is a construction failure.
fn construction(e: Error) -> Failure {
    match e {
        Error::Verification(m) => Failure {
            code: 3,
            message: format!("construction produced an invalid family: {m}"),
        },
        other => other.into(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Build {
            n,
            k,
            delta,
            method,
            l,
            seed,
            out,
            provider,
            budget,
            max_write,
        } => cmd_build(BuildArgs {
            n,
            k,
            delta,
            method,
            l,
            seed,
            out,
            provider,
            budget,
            max_write,
        }),
        Command::Verify { family, budget } => cmd_verify(&family, budget),
        Command::Count {
            kind,
            graph,
            k,
            delta,
            family,
            exact,
            budget,
        } => cmd_count(kind, &graph, k, &delta, family.as_deref(), exact, budget),
        Command::Exact {
            kind,
            graph,
            k,
            max_vertices,
            max_k,
        } => cmd_exact(kind, &graph, k, ExactBudget { max_vertices, max_k }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn parse_delta(text: &str) -> CliResult<Rational> {
    let delta = parse_rational(text).map_err(|e| Failure::usage(e.to_string()))?;
    check_delta(&delta).map_err(|e| Failure::usage(e.to_string()))?;
    Ok(delta)
}

struct BuildArgs {
    n: usize,
    k: usize,
    delta: String,
    method: Method,
    l: Option<usize>,
    seed: u64,
    out: PathBuf,
    provider: Provider,
    budget: u64,
    max_write: u64,
}

/// What a build hands back for writing and printing.
struct Built {
    source: Box<dyn FunctionSource>,
    certificate: BalanceCertificate,
    verified: &'static str,
    notes: Vec<String>,
}

fn build_family(a: &BuildArgs, delta: &Rational) -> CliResult<Built> {
    let (n, k) = (a.n, a.k);
    if a.l.is_some() && !matches!(a.method, Method::Random | Method::Derand | Method::Lowsplit) {
        return Err(Failure::usage(format!("--l needs a splitter method (random, derand, lowsplit), not {}", a.method.name())));
    }
    if a.provider != Provider::Derand && a.method != Method::Pipeline {
        return Err(Failure::usage("--provider only applies to --method pipeline"));
    }
    if k == 0 || k > n {
        return Err(Failure::usage(format!("need 1 <= k <= n, got k={k} n={n}")));
    }
    let certified = |c: bphf_core::CertifiedFamily, notes: Vec<String>| Built {
        verified: if c.report.is_some() { "exact" } else { "analytic" },
        source: Box::new(c.family),
        certificate: c.certificate,
        notes,
    };
    Ok(match a.method {
        Method::Random => {
            let opts = RandomOptions {
                max_subsets: a.budget,
                ..RandomOptions::default()
            };
            let b = build_random(n, k, a.l.unwrap_or(k), delta, a.seed, &opts).map_err(construction)?;
            certified(b.certified, vec![format!("attempts={}", b.attempts)])
        }
        Method::Derand => {
            let opts = GreedyOptions {
                max_subsets: a.budget,
                ..GreedyOptions::default()
            };
            let b = build_derandomized_pattern(n, k, a.l.unwrap_or(k), delta, &opts).map_err(construction)?;
            certified(b.certified, vec![format!("precision={}", b.precision)])
        }
        Method::Code => {
            let plan = plan_code_splitter(n, k, delta)?;
            let notes = vec![format!("q={} t={}", plan.q, plan.t)];
            certified(build_code_splitter(&plan, a.budget).map_err(construction)?, notes)
        }
        Method::Lowsplit => {
            let l = a.l.unwrap_or_else(|| ceil_log2(k).max(2));
            let b = build_low_splitter(n, k, l, delta, DEFAULT_MAX_POINTS, a.budget).map_err(construction)?;
            let mut notes = vec![format!(
                "space_bits={} degree={} points={}",
                b.plan.bits, b.plan.degree, b.plan.size
            )];
            if let Some(ok) = b.relative_error_ok {
                notes.push(format!("relative_error_within_half_slack={ok}"));
            }
            certified(b.certified, notes)
        }
        Method::Pipeline => {
            let provider = match a.provider {
                Provider::Derand => SplitterProvider::DerandGreedy,
                Provider::EpsBias => SplitterProvider::EpsBias,
            };
            let plan = plan_pipeline(n, k, delta, provider)?;
            let opts = PipelineOptions {
                max_subsets: a.budget,
                ..PipelineOptions::default()
            };
            let b = build_pipeline(&plan, &opts).map_err(construction)?;
            let mut notes: Vec<String> = b.components.iter().map(|c| format!("component {c}")).collect();
            notes.push(format!("part_delta_bound={}", plan.part_delta_bound_holds));
            Built {
                verified: b.verification.kind(),
                source: Box::new(SharedFamily(b.family)),
                certificate: b.certificate,
                notes,
            }
        }
    })
}

/// Adapts a shared composed family to the boxed form used above.
struct SharedFamily(bphf_core::compose::SharedSource);

impl FunctionSource for SharedFamily {
    fn domain_size(&self) -> usize {
        self.0.domain_size()
    }

    fn range_size(&self) -> usize {
        self.0.range_size()
    }

    fn len(&self) -> u64 {
        self.0.len()
    }

    fn write_function(&self, index: u64, out: &mut [u32]) {
        self.0.write_function(index, out)
    }

    fn value(&self, index: u64, x: usize) -> u32 {
        self.0.value(index, x)
    }
}

fn cmd_build(a: BuildArgs) -> CliResult {
    let delta = parse_delta(&a.delta)?;
    let built = build_family(&a, &delta)?;
    let c = &built.certificate;
    println!(
        "n={} k={} l={} M={} T={} delta={} method={}",
        a.n,
        a.k,
        c.pattern.l(),
        built.source.len(),
        format_ratio(&c.t),
        format_ratio(&c.delta),
        a.method.name()
    );
    println!("verified={}", built.verified);
    for note in &built.notes {
        println!("{note}");
    }
    let values = (built.source.len() as u128) * a.n as u128;
    if values > a.max_write as u128 {
        println!("written=no");
        return Err(Error::BudgetExceeded {
            what: format!("writing {} (raise --max-write)", a.out.display()),
            required: values,
            budget: a.max_write as u128,
        }
        .into());
    }
    write_to(&a.out, built.source.as_ref(), c)?;
    println!("written={}", a.out.display());
    Ok(())
}

fn write_to(path: &Path, source: &dyn FunctionSource, certificate: &BalanceCertificate) -> CliResult {
    let file = File::create(path).map_err(|e| Failure::usage(format!("cannot create {}: {e}", path.display())))?;
    let mut out = BufWriter::new(file);
    write_family(&mut out, source, certificate)?;
    Ok(())
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::usage(format!("cannot open {}: {e}", path.display())))
}

fn in_file(path: &Path, e: Error) -> Failure {
    let mut f = Failure::from(e);
    f.message = format!("{}: {}", path.display(), f.message);
    f
}

fn cmd_verify(path: &Path, budget: u64) -> CliResult {
    let (family, certificate) = read_family(open(path)?).map_err(|e| in_file(path, e))?;
    let report = verify_balance(&family, &certificate.pattern, budget)?;
    let join = |s: &[usize]| s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    println!("subsets={}", report.subsets);
    println!("min_count={} arg_min={}", report.min_count, join(&report.arg_min));
    println!("max_count={} arg_max={}", report.max_count, join(&report.arg_max));
    println!("best_T={}", report.best_t);
    match report.best_delta {
        Some(d) => println!("best_delta={d}"),
        None => println!("best_delta=inf"),
    }
    println!("T={} delta={}", format_ratio(&certificate.t), format_ratio(&certificate.delta));
    if certificate.admits(&report) {
        println!("PASS");
        Ok(())
    } else {
        println!("FAIL");
        Err(Failure {
            code: 2,
            message: format!(
                "counts [{}, {}] fall outside [T/delta, delta*T]",
                report.min_count, report.max_count
            ),
        })
    }
}

fn read_graph(path: &Path) -> CliResult<Graph> {
    Graph::parse(open(path)?).map_err(|e| in_file(path, e))
}

#[allow(clippy::too_many_arguments)]
fn cmd_count(
    kind: Kind,
    graph_path: &Path,
    k: usize,
    delta: &str,
    family_path: Option<&Path>,
    exact: bool,
    budget: u64,
) -> CliResult {
    let delta = parse_delta(delta)?;
    let graph = read_graph(graph_path)?;
    let (family, certificate) = match family_path {
        Some(p) => read_family(open(p)?).map_err(|e| in_file(p, e))?,
        None => cache::family_for(graph_path, graph.vertex_count(), k, &delta, budget)?,
    };
    let count = approx_count(&graph, kind.into(), k, &delta, &family, &certificate)?;
    println!(
        "raw={} divisor={} value={} value_decimal={}",
        count.raw,
        format_ratio(&count.divisor),
        format_ratio(&count.value),
        count.value_decimal()
    );
    if exact {
        let truth = exact_for(kind, &graph, k, ExactBudget::default())?;
        let ratio = if truth == 0 {
            "undefined".to_string()
        } else {
            decimal6(&(&count.value / Rational::from_integer(truth.into())))
        };
        println!("exact={truth} ratio={ratio}");
        if !within_factor(&count.value, truth, &delta) {
            return Err(Failure {
                code: 2,
                message: "estimate outside [exact/delta, delta*exact]".to_string(),
            });
        }
    }
    Ok(())
}

fn exact_for(kind: Kind, graph: &Graph, k: usize, budget: ExactBudget) -> CliResult<u128> {
    Ok(match kind {
        Kind::Paths => exact_count_paths(graph, k, &budget)?,
        Kind::Cycles => exact_count_cycles(graph, k, &budget)?,
    })
}

fn cmd_exact(kind: Kind, graph_path: &Path, k: usize, budget: ExactBudget) -> CliResult {
    let graph = read_graph(graph_path)?;
    println!("{}", exact_for(kind, &graph, k, budget)?);
    std::io::stdout().flush().ok();
    Ok(())
}
