//! Plain-text family files.
//!
//! ```text
//! BPHF 1
//! n=<int> l=<int> M=<int> k=<int> kind=<perfect|splitter>
//! T=<num>/<den> delta=<num>/<den>
//! <M lines of n space-separated values in [0, l)>
//! ```

use std::io::{BufRead, Write};

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::family::{format_ratio, BalanceCertificate, FunctionFamily, FunctionSource, SplitPattern};

const MAGIC: &str = "BPHF 1";

/// Writes a header and every function of `source`, streaming row by row.
pub fn write_family(
    out: &mut impl Write,
    source: &(impl FunctionSource + ?Sized),
    certificate: &BalanceCertificate,
) -> Result<()> {
    let pattern = &certificate.pattern;
    if pattern.l() != source.range_size() {
        return Err(Error::param(format!(
            "certificate range l={} does not match family range {}",
            pattern.l(),
            source.range_size()
        )));
    }
    let kind = if pattern.is_perfect() { "perfect" } else { "splitter" };
    writeln!(out, "{MAGIC}")?;
    writeln!(
        out,
        "n={} l={} M={} k={} kind={kind}",
        source.domain_size(),
        source.range_size(),
        source.len(),
        pattern.k()
    )?;
    writeln!(
        out,
        "T={} delta={}",
        format_ratio(&certificate.t),
        format_ratio(&certificate.delta)
    )?;
    let mut row = vec![0u32; source.domain_size()];
    let mut line = String::new();
    for i in 0..source.len() {
        source.write_function(i, &mut row);
        line.clear();
        for (x, v) in row.iter().enumerate() {
            if x > 0 {
                line.push(' ');
            }
            line.push_str(&v.to_string());
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a family file. Every malformed line is reported with its 1-based
/// line number.
pub fn read_family(input: impl BufRead) -> Result<(FunctionFamily, BalanceCertificate)> {
    let mut lines = input.lines();
    let mut next = |number: usize, what: &str| -> Result<String> {
        match lines.next() {
            Some(line) => Ok(line?),
            None => Err(Error::parse(number, format!("unexpected end of file, expected {what}"))),
        }
    };

    let magic = next(1, "header")?;
    if magic.trim_end() != MAGIC {
        return Err(Error::parse(1, format!("expected `{MAGIC}`, found `{magic}`")));
    }

    let shape = next(2, "shape line")?;
    let fields = key_values(2, &shape, &["n", "l", "M", "k", "kind"])?;
    let n = parse_int(2, "n", fields[0])? as usize;
    let l = parse_int(2, "l", fields[1])? as usize;
    let m = parse_int(2, "M", fields[2])?;
    let k = parse_int(2, "k", fields[3])? as usize;
    let pattern = match fields[4] {
        "perfect" if k == l => SplitPattern::perfect(k),
        "perfect" => return Err(Error::parse(2, format!("kind=perfect needs k = l, got k={k} l={l}"))),
        "splitter" => SplitPattern::new(k, l),
        other => return Err(Error::parse(2, format!("unknown kind `{other}`"))),
    }
    .map_err(|e| Error::parse(2, e.to_string()))?;
    if n == 0 || m == 0 {
        return Err(Error::parse(2, "n and M must be positive"));
    }
    if k > n {
        return Err(Error::parse(2, format!("k={k} exceeds n={n}")));
    }

    let cert = next(3, "certificate line")?;
    let fields = key_values(3, &cert, &["T", "delta"])?;
    let t = parse_ratio(3, "T", fields[0])?;
    let delta = parse_ratio(3, "delta", fields[1])?;
    let certificate =
        BalanceCertificate::new(t, delta, pattern).map_err(|e| Error::parse(3, e.to_string()))?;

    let total = (n as u64)
        .checked_mul(m)
        .filter(|&v| v <= isize::MAX as u64 / 4)
        .ok_or_else(|| Error::parse(2, "family too large to load"))?;
    let mut values = Vec::with_capacity(total as usize);
    for row in 0..m {
        let number = 4 + row as usize;
        let line = next(number, "function row")?;
        let before = values.len();
        for token in line.split_ascii_whitespace() {
            if values.len() - before == n {
                return Err(Error::parse(number, format!("more than n={n} values")));
            }
            let v: u32 = token
                .parse()
                .map_err(|_| Error::parse(number, format!("`{token}` is not a non-negative integer")))?;
            if v as usize >= l {
                return Err(Error::parse(number, format!("value {v} is outside [0, {l})")));
            }
            values.push(v);
        }
        if values.len() - before != n {
            return Err(Error::parse(
                number,
                format!("expected {n} values, found {}", values.len() - before),
            ));
        }
    }
    let trailing = 4 + m as usize;
    if let Some(line) = lines_rest(&mut next, trailing)? {
        return Err(Error::parse(trailing, format!("trailing content after {m} functions: `{line}`")));
    }
    let family = FunctionFamily::from_flat(n, l, values)?;
    Ok((family, certificate))
}

fn lines_rest(
    next: &mut impl FnMut(usize, &str) -> Result<String>,
    number: usize,
) -> Result<Option<String>> {
    match next(number, "") {
        Ok(line) => Ok(Some(line)),
        Err(Error::Parse { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn key_values<'a>(line: usize, text: &'a str, keys: &[&str]) -> Result<Vec<&'a str>> {
    let tokens: Vec<&str> = text.split_ascii_whitespace().collect();
    if tokens.len() != keys.len() {
        return Err(Error::parse(
            line,
            format!("expected {} fields ({}), found {}", keys.len(), keys.join(" "), tokens.len()),
        ));
    }
    tokens
        .iter()
        .zip(keys)
        .map(|(token, key)| {
            token
                .strip_prefix(key)
                .and_then(|rest| rest.strip_prefix('='))
                .ok_or_else(|| Error::parse(line, format!("expected `{key}=...`, found `{token}`")))
        })
        .collect()
}

fn parse_int(line: usize, key: &str, text: &str) -> Result<u64> {
    text.parse()
        .map_err(|_| Error::parse(line, format!("{key}: `{text}` is not a non-negative integer")))
}

fn parse_ratio(line: usize, key: &str, text: &str) -> Result<BigRational> {
    let bad = || Error::parse(line, format!("{key}: `{text}` is not of the form <num>/<den>"));
    let (num, den) = text.split_once('/').ok_or_else(bad)?;
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !digits(num) || !digits(den) {
        return Err(bad());
    }
    let num: BigInt = num.parse().map_err(|_| bad())?;
    let den: BigInt = den.parse().map_err(|_| bad())?;
    if den == BigInt::from(0) {
        return Err(Error::parse(line, format!("{key}: zero denominator")));
    }
    Ok(BigRational::new(num, den))
}
