//! Families built for `count` are stored beside the graph, named by a hash
//! of everything that determines them.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use bphf_core::family::format_ratio;
use bphf_core::format::{read_family, write_family};
use bphf_core::greedy::{build_derandomized_pattern, GreedyOptions};
use bphf_core::{BalanceCertificate, FunctionFamily, Rational, SplitPattern};

use crate::{construction, CliResult};

const METHOD: &str = "derand";
const SEED: u64 = 0;

pub fn key(n: usize, k: usize, delta: &Rational, method: &str, seed: u64) -> String {
    let digest = Sha256::digest(format!("n={n} k={k} delta={} method={method} seed={seed}", format_ratio(delta)));
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn path_for(graph: &Path, n: usize, k: usize, delta: &Rational) -> PathBuf {
    let mut name = graph.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(format!(".{}.bphf", key(n, k, delta, METHOD, SEED)));
    graph.with_file_name(name)
}

fn usable(family: &FunctionFamily, cert: &BalanceCertificate, n: usize, k: usize, delta: &Rational) -> bool {
    use bphf_core::FunctionSource;
    family.domain_size() == n
        && family.range_size() == k
        && SplitPattern::perfect(k).is_ok_and(|p| p == cert.pattern)
        && cert.delta <= *delta
}

/// Loads the cached derandomized `(n,k)` family for `delta`, building and
/// storing it first if needed.
pub fn family_for(
    graph: &Path,
    n: usize,
    k: usize,
    delta: &Rational,
    budget: u64,
) -> CliResult<(FunctionFamily, BalanceCertificate)> {
    let path = path_for(graph, n, k, delta);
    if let Ok(file) = File::open(&path) {
        match read_family(BufReader::new(file)) {
            Ok((f, c)) if usable(&f, &c, n, k, delta) => {
                eprintln!("using cached family {}", path.display());
                return Ok((f, c));
            }
            _ => eprintln!("ignoring unusable cache file {}", path.display()),
        }
    }
    if k == 0 || k > n {
        return Err(crate::Failure::usage(format!("need 1 <= k <= |V|, got k={k} |V|={n}")));
    }
    let opts = GreedyOptions {
        max_subsets: budget,
        ..GreedyOptions::default()
    };
    let built = build_derandomized_pattern(n, k, k, delta, &opts).map_err(construction)?;
    let (family, certificate) = (built.certified.family, built.certified.certificate);
    // write then rename, so a crash never leaves a truncated cache entry
    let tmp = path.with_extension("bphf.tmp");
    let stored = File::create(&tmp)
        .map_err(bphf_core::Error::from)
        .and_then(|f| write_family(&mut BufWriter::new(f), &family, &certificate))
        .and_then(|()| fs::rename(&tmp, &path).map_err(Into::into));
    match stored {
        Ok(()) => eprintln!("cached family {}", path.display()),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            eprintln!("could not cache family at {}: {e}", path.display());
        }
    }
    Ok((family, certificate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use bphf_core::params::parse_rational;

    #[test]
    fn keys_separate_parameters() {
        let d = parse_rational("1.5").unwrap();
        let a = key(10, 3, &d, "derand", 0);
        assert_eq!(a.len(), 16);
        assert_eq!(a, key(10, 3, &parse_rational("3/2").unwrap(), "derand", 0));
        assert_ne!(a, key(10, 4, &d, "derand", 0));
        assert_ne!(a, key(10, 3, &d, "random", 0));
        assert_ne!(a, key(10, 3, &d, "derand", 1));
        assert_ne!(a, key(10, 3, &parse_rational("2").unwrap(), "derand", 0));
    }

    #[test]
    fn cache_sits_beside_the_graph() {
        let d = parse_rational("2").unwrap();
        let p = path_for(Path::new("/data/g.txt"), 10, 3, &d);
        assert_eq!(p.parent(), Some(Path::new("/data")));
        assert!(p.file_name().unwrap().to_str().unwrap().starts_with("g.txt."));
    }
}
