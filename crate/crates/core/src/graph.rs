//! Simple directed and undirected graphs, read from an edge-list file:
//!
//! ```text
//! undirected 3 3
//! 0 1
//! 1 2
//! 2 0
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    directed: bool,
    n: usize,
    edges: Vec<(usize, usize)>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
}

fn edge_key(directed: bool, u: usize, v: usize) -> (usize, usize) {
    if directed || u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl Graph {
    pub fn new(directed: bool, n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        for (i, &(u, v)) in edges.iter().enumerate() {
            Self::check_edge(directed, n, u, v, &mut seen).map_err(|m| Error::param(format!("edge {i}: {m}")))?;
        }
        Ok(Self::assemble(directed, n, edges))
    }

    fn check_edge(
        directed: bool,
        n: usize,
        u: usize,
        v: usize,
        seen: &mut HashSet<(usize, usize)>,
    ) -> std::result::Result<(), String> {
        if u >= n || v >= n {
            return Err(format!("endpoint out of range in {u} {v} (n = {n})"));
        }
        if u == v {
            return Err(format!("self-loop at {u}"));
        }
        if !seen.insert(edge_key(directed, u, v)) {
            return Err(format!("duplicate edge {u} {v}"));
        }
        Ok(())
    }

    fn assemble(directed: bool, n: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for &(u, v) in &edges {
            out_adj[u].push(v);
            in_adj[v].push(u);
            if !directed {
                out_adj[v].push(u);
                in_adj[u].push(v);
            }
        }
        for list in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            list.sort_unstable();
        }
        Self {
            directed,
            n,
            edges,
            out_adj,
            in_adj,
        }
    }

    pub fn parse(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty graph file"))?;
        let header = header?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let directed = match fields.first() {
            Some(&"directed") => true,
            Some(&"undirected") => false,
            _ => return Err(Error::parse(1, "expected `directed <n> <m>` or `undirected <n> <m>`")),
        };
        if fields.len() != 3 {
            return Err(Error::parse(1, "header needs exactly a kind, a vertex count and an edge count"));
        }
        let n: usize = fields[1].parse().map_err(|_| Error::parse(1, format!("bad vertex count `{}`", fields[1])))?;
        let m: usize = fields[2].parse().map_err(|_| Error::parse(1, format!("bad edge count `{}`", fields[2])))?;
        let mut edges = Vec::with_capacity(m);
        let mut seen = HashSet::with_capacity(m);
        for (line_no, line) in lines.by_ref().take(m) {
            let line = line?;
            let mut it = line.split_whitespace();
            let mut endpoint = || -> Result<usize> {
                let tok = it.next().ok_or_else(|| Error::parse(line_no, "expected `u v`"))?;
                tok.parse().map_err(|_| Error::parse(line_no, format!("bad vertex `{tok}`")))
            };
            let (u, v) = (endpoint()?, endpoint()?);
            if it.next().is_some() {
                return Err(Error::parse(line_no, "expected exactly two vertices"));
            }
            Self::check_edge(directed, n, u, v, &mut seen).map_err(|m| Error::parse(line_no, m))?;
            edges.push((u, v));
        }
        if edges.len() < m {
            return Err(Error::parse(edges.len() + 2, format!("expected {m} edges, found {}", edges.len())));
        }
        if let Some((line_no, _)) = lines.next() {
            return Err(Error::parse(line_no, format!("unexpected line after {m} edges")));
        }
        Ok(Self::assemble(directed, n, edges))
    }

    pub fn to_text(&self) -> String {
        let kind = if self.directed { "directed" } else { "undirected" };
        let mut s = format!("{kind} {} {}\n", self.n, self.edges.len());
        for (u, v) in &self.edges {
            writeln!(s, "{u} {v}").expect("writing to a String");
        }
        s
    }

    /// `G(n, p)`: each ordered (directed) or unordered pair independently.
    pub fn random(n: usize, p: f64, directed: bool, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if u != v && (directed || u < v) && rng.gen_bool(p) {
                    edges.push((u, v));
                }
            }
        }
        Self::assemble(directed, n, edges)
    }

    pub fn reversed(&self) -> Self {
        Self::assemble(self.directed, self.n, self.edges.iter().map(|&(u, v)| (v, u)).collect())
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Successors; for an undirected graph, all neighbors.
    pub fn out_neighbors(&self, v: usize) -> &[usize] {
        &self.out_adj[v]
    }

    pub fn in_neighbors(&self, v: usize) -> &[usize] {
        &self.in_adj[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.out_adj[u].binary_search(&v).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Graph> {
        Graph::parse(s.as_bytes())
    }

    fn line_of(e: Error) -> usize {
        match e {
            Error::Parse { line, .. } => line,
            other => panic!("expected a parse error, got {other}"),
        }
    }

    #[test]
    fn triangle() {
        let g = parse("undirected 3 3\n0 1\n1 2\n2 0\n").unwrap();
        assert!(!g.is_directed());
        assert_eq!(g.out_neighbors(0), &[1, 2]);
        assert!(g.has_edge(1, 0));
        assert_eq!(parse(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn directed_adjacency() {
        let g = parse("directed 3 3\n0 1\n1 2\n2 0\n").unwrap();
        assert_eq!(g.out_neighbors(0), &[1]);
        assert_eq!(g.in_neighbors(0), &[2]);
        assert!(!g.has_edge(1, 0));
        let r = g.reversed();
        assert!(r.has_edge(1, 0));
        // antiparallel edges are distinct in a directed graph
        assert!(parse("directed 2 2\n0 1\n1 0\n").is_ok());
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(line_of(parse("undirected 3 2\n0 1\n1 0\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("directed 3 2\n0 1\n2 2\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("directed 3 2\n0 1\n0 1\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("directed 3 1\n0 3\n").unwrap_err()), 2);
        assert_eq!(line_of(parse("directed 3 2\n0 1\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("directed 3 1\n0 1\n1 2\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("sideways 3 0\n").unwrap_err()), 1);
        assert_eq!(line_of(parse("directed 3\n").unwrap_err()), 1);
        assert_eq!(line_of(parse("").unwrap_err()), 1);
        assert_eq!(line_of(parse("directed 3 1\n0 x\n").unwrap_err()), 2);
    }

    #[test]
    fn random_graphs_are_simple_and_seeded() {
        let g = Graph::random(20, 0.3, false, 7);
        assert_eq!(g, Graph::random(20, 0.3, false, 7));
        assert!(Graph::new(false, 20, g.edges().to_vec()).is_ok());
        let d = Graph::random(20, 0.3, true, 7);
        assert!(Graph::new(true, 20, d.edges().to_vec()).is_ok());
        assert!(Graph::new(false, 3, vec![(0, 1), (1, 0)]).is_err());
    }
}
