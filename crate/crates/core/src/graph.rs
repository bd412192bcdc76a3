//! Undirected simple graphs, instance generators, DIMACS/JSON I/O and the
//! exhaustive oracles used to check colorings.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest graph accepted by [`chromatic_number_bruteforce`].
pub const CHROMATIC_BRUTEFORCE_LIMIT: usize = 12;

/// Undirected simple graph on nodes `0..n`.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted. A dense adjacency
/// table backs O(1) adjacency queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<bool>,
    planted_classes: Option<Vec<Vec<usize>>>,
}

impl Graph {
    /// Builds a graph from an edge list. Duplicates (in either orientation)
    /// are merged; self-loops and out-of-range endpoints are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph(
                "graph must have at least one node".into(),
            ));
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u},{v}) out of range for n={n}"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at node {u}")));
            }
            set.insert((u.min(v), u.max(v)));
        }
        let mut adj = vec![false; n * n];
        for &(u, v) in &set {
            adj[u * n + v] = true;
            adj[v * n + u] = true;
        }
        Ok(Self {
            n,
            edges: set.into_iter().collect(),
            adj,
            planted_classes: None,
        })
    }

    /// Attaches a known proper partition. Classes must be disjoint, cover
    /// every node and contain no edge.
    pub fn with_planted_classes(mut self, classes: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; self.n];
        for class in &classes {
            for &u in class {
                if u >= self.n {
                    return Err(Error::InvalidGraph(format!("class node {u} out of range")));
                }
                if seen[u] {
                    return Err(Error::InvalidGraph(format!("node {u} in two classes")));
                }
                seen[u] = true;
            }
            for (i, &u) in class.iter().enumerate() {
                for &v in &class[i + 1..] {
                    if self.has_edge(u, v) {
                        return Err(Error::InvalidGraph(format!(
                            "edge ({u},{v}) inside a planted class"
                        )));
                    }
                }
            }
        }
        if let Some(u) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidGraph(format!("node {u} not in any class")));
        }
        self.planted_classes = Some(classes);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Sorted edge list, `u < v`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn planted_classes(&self) -> Option<&[Vec<usize>]> {
        self.planted_classes.as_deref()
    }

    #[inline]
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u * self.n + v]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adj[u * self.n..(u + 1) * self.n]
            .iter()
            .filter(|&&a| a)
            .count()
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[u * self.n..(u + 1) * self.n]
            .iter()
            .enumerate()
            .filter_map(|(v, &a)| a.then_some(v))
    }

    /// Planted class index per node, if a partition is attached.
    pub fn planted_labels(&self) -> Option<Vec<usize>> {
        let classes = self.planted_classes.as_ref()?;
        let mut labels = vec![0; self.n];
        for (c, class) in classes.iter().enumerate() {
            for &u in class {
                labels[u] = c;
            }
        }
        Some(labels)
    }

    /// Writes the graph as DIMACS `.col` text with 1-based indices and
    /// lexicographically sorted edges.
    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "p edge {} {}", self.n, self.edges.len());
        for &(u, v) in &self.edges {
            let _ = writeln!(out, "e {} {}", u + 1, v + 1);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&GraphJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: GraphJson = serde_json::from_str(text)?;
        raw.try_into()
    }
}

/// Serialized form: `{"n": int, "edges": [[u,v],...], "classes": [[...],...]?}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<Vec<usize>>>,
}

impl From<&Graph> for GraphJson {
    fn from(g: &Graph) -> Self {
        Self {
            n: g.n,
            edges: g.edges.iter().map(|&(u, v)| [u, v]).collect(),
            classes: g.planted_classes.clone(),
        }
    }
}

impl TryFrom<GraphJson> for Graph {
    type Error = Error;

    fn try_from(raw: GraphJson) -> Result<Self> {
        let g = Graph::new(raw.n, raw.edges.into_iter().map(|[u, v]| (u, v)))?;
        match raw.classes {
            Some(c) => g.with_planted_classes(c),
            None => Ok(g),
        }
    }
}

/// Summary of a DIMACS parse.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DimacsReport {
    /// Edge count declared on the `p` line.
    pub declared_edges: usize,
    /// `e` lines dropped because the edge was already present.
    pub duplicate_edges: usize,
}

/// Parses DIMACS `.col` text. See [`parse_dimacs_with_report`].
pub fn parse_dimacs(text: &str) -> Result<Graph> {
    parse_dimacs_with_report(text).map(|(g, _)| g)
}

/// Parses DIMACS `.col` text: `c` comments, exactly one `p edge <n> <m>`
/// line and `e <u> <v>` lines with 1-based indices.
pub fn parse_dimacs_with_report(text: &str) -> Result<(Graph, DimacsReport)> {
    let mut header: Option<(usize, usize)> = None;
    let mut edges = BTreeSet::new();
    let mut report = DimacsReport::default();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |msg: String| Error::Parse { line, msg };
        let mut tok = raw.split_whitespace();
        let Some(kind) = tok.next() else { continue };
        match kind {
            "c" => {}
            "p" => {
                if header.is_some() {
                    return Err(err("multiple problem lines".into()));
                }
                let fmt = tok.next().ok_or_else(|| err("missing format".into()))?;
                if fmt != "edge" && fmt != "col" {
                    return Err(err(format!("unsupported format '{fmt}'")));
                }
                let n = parse_num(tok.next(), line, "node count")?;
                let m = parse_num(tok.next(), line, "edge count")?;
                if n == 0 {
                    return Err(err("node count must be positive".into()));
                }
                header = Some((n, m));
                report.declared_edges = m;
            }
            "e" => {
                let (n, _) = header.ok_or_else(|| err("edge before problem line".into()))?;
                let u = parse_num(tok.next(), line, "endpoint")?;
                let v = parse_num(tok.next(), line, "endpoint")?;
                if u == 0 || v == 0 || u > n || v > n {
                    return Err(err(format!("node index out of range 1..={n}: {u} {v}")));
                }
                if u == v {
                    return Err(err(format!("self-loop on node {u}")));
                }
                if !edges.insert((u.min(v) - 1, u.max(v) - 1)) {
                    report.duplicate_edges += 1;
                }
            }
            other => return Err(err(format!("unknown line type '{other}'"))),
        }
    }

    let (n, _) = header.ok_or(Error::Parse {
        line: 0,
        msg: "missing problem line".into(),
    })?;
    if report.duplicate_edges > 0 {
        log::warn!("dropped {} duplicate edge lines", report.duplicate_edges);
    }
    Ok((Graph::new(n, edges)?, report))
}

fn parse_num(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line,
        msg: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad {what} '{tok}'"),
    })
}

/// Complete multipartite graph with the given class sizes; classes are
/// consecutive index ranges and are recorded as the planted partition.
pub fn complete_partite(class_sizes: &[usize]) -> Result<Graph> {
    if class_sizes.len() < 2 {
        return Err(Error::InvalidGraph("need at least 2 classes".into()));
    }
    if class_sizes.contains(&0) {
        return Err(Error::InvalidGraph("class sizes must be positive".into()));
    }
    let mut classes = Vec::with_capacity(class_sizes.len());
    let mut next = 0;
    for &size in class_sizes {
        classes.push((next..next + size).collect::<Vec<_>>());
        next += size;
    }
    let mut edges = Vec::new();
    for (a, ca) in classes.iter().enumerate() {
        for cb in &classes[a + 1..] {
            edges.extend(ca.iter().flat_map(|&u| cb.iter().map(move |&v| (u, v))));
        }
    }
    Graph::new(next, edges)?.with_planted_classes(classes)
}

/// Keeps each edge independently with probability `keep_fraction`. The
/// planted partition survives since only edges are removed.
pub fn sparsify(g: &Graph, keep_fraction: f64, seed: u64) -> Result<Graph> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "keep_fraction {keep_fraction} outside (0, 1]"
        )));
    }
    let classes = g
        .planted_classes
        .clone()
        .ok_or_else(|| Error::InvalidGraph("sparsify needs planted classes".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kept: Vec<_> = g
        .edges
        .iter()
        .copied()
        .filter(|_| rng.gen_bool(keep_fraction))
        .collect();
    Graph::new(g.n, kept)?.with_planted_classes(classes)
}

/// G(n, p) random graph.
pub fn gnp(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParams(format!("edge probability {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, edges)
}

pub fn path(n: usize) -> Result<Graph> {
    Graph::new(n, (1..n).map(|i| (i - 1, i)))
}

pub fn cycle(n: usize) -> Result<Graph> {
    Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)))
}

pub fn complete(n: usize) -> Result<Graph> {
    Graph::new(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
}

pub fn petersen() -> Graph {
    let outer = (0..5).map(|i| (i, (i + 1) % 5));
    let spokes = (0..5).map(|i| (i, i + 5));
    let inner = (0..5).map(|i| (5 + i, 5 + (i + 2) % 5));
    Graph::new(10, outer.chain(spokes).chain(inner)).expect("static graph")
}

/// Generator mini-language: `partite:a,b,c[;keep=f][;seed=s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    pub class_sizes: Vec<usize>,
    pub keep: f64,
    pub seed: u64,
}

impl GraphSpec {
    pub fn build(&self) -> Result<Graph> {
        let g = complete_partite(&self.class_sizes)?;
        if self.keep < 1.0 {
            sparsify(&g, self.keep, self.seed)
        } else {
            Ok(g)
        }
    }
}

impl FromStr for GraphSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::Parse { line: 0, msg };
        let mut parts = s.split(';');
        let head = parts.next().unwrap_or_default();
        let sizes = head
            .strip_prefix("partite:")
            .ok_or_else(|| bad(format!("unknown generator '{head}'")))?;
        let class_sizes = sizes
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("class sizes '{sizes}': {e}")))?;
        let mut spec = GraphSpec {
            class_sizes,
            keep: 1.0,
            seed: 0,
        };
        for opt in parts {
            let (key, value) = opt
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got '{opt}'")))?;
            match key.trim() {
                "keep" => {
                    spec.keep = value
                        .trim()
                        .parse()
                        .map_err(|_| bad(format!("bad keep '{value}'")))?
                }
                "seed" => {
                    spec.seed = value
                        .trim()
                        .parse()
                        .map_err(|_| bad(format!("bad seed '{value}'")))?
                }
                other => return Err(bad(format!("unknown option '{other}'"))),
            }
        }
        Ok(spec)
    }
}

/// Node-to-color assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coloring {
    pub assignment: Vec<usize>,
    pub num_colors: usize,
    /// Node order the coloring was read off from, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_certificate: Option<Vec<usize>>,
}

impl Coloring {
    /// Builds a coloring, counting colors as `max + 1`.
    pub fn from_assignment(assignment: Vec<usize>) -> Self {
        let num_colors = assignment.iter().max().map_or(0, |&c| c + 1);
        Self {
            assignment,
            num_colors,
            order_certificate: None,
        }
    }
}

/// True iff every color is in range and no edge is monochromatic.
pub fn validate_coloring(g: &Graph, c: &Coloring) -> Result<bool> {
    if c.assignment.len() < g.n {
        return Err(Error::MissingNode(c.assignment.len()));
    }
    if c.assignment[..g.n].iter().any(|&col| col >= c.num_colors) {
        return Ok(false);
    }
    Ok(g.edges
        .iter()
        .all(|&(u, v)| c.assignment[u] != c.assignment[v]))
}

/// Exact chromatic number by trying k = 1, 2, ... with backtracking.
pub fn chromatic_number_bruteforce(g: &Graph) -> Result<usize> {
    if g.n > CHROMATIC_BRUTEFORCE_LIMIT {
        return Err(Error::TooLarge {
            n: g.n,
            limit: CHROMATIC_BRUTEFORCE_LIMIT,
        });
    }
    let mut colors = vec![usize::MAX; g.n];
    for k in 1..=g.n {
        if try_color(g, 0, k, 0, &mut colors) {
            return Ok(k);
        }
    }
    unreachable!("n colors always suffice")
}

// Colors are introduced in order (node u may use at most `used` as a new
// color), which removes relabelling symmetry.
fn try_color(g: &Graph, u: usize, k: usize, used: usize, colors: &mut [usize]) -> bool {
    if u == g.n {
        return true;
    }
    for c in 0..k.min(used + 1) {
        if (0..u).any(|v| colors[v] == c && g.has_edge(u, v)) {
            continue;
        }
        colors[u] = c;
        if try_color(g, u + 1, k, used.max(c + 1), colors) {
            return true;
        }
    }
    colors[u] = usize::MAX;
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_small() {
        let g = parse_dimacs("p edge 3 2\ne 1 2\ne 2 3").unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        let g = parse_dimacs("c empty\np edge 2 0\n").unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.num_edges(), 0);
    }

    #[test]
    fn parse_errors() {
        let e = parse_dimacs("p edge 3 1\ne 1 5").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        assert!(parse_dimacs("e 1 2").is_err());
        assert!(parse_dimacs("c nothing").is_err());
        assert!(parse_dimacs("p edge 3 0\np edge 3 0").is_err());
        assert!(matches!(
            parse_dimacs("p edge 3 1\ne 2 2"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_dimacs("p edge 3 1\ne 1 x").is_err());
    }

    #[test]
    fn parse_counts_duplicates() {
        let (g, rep) = parse_dimacs_with_report("p edge 3 3\ne 1 2\ne 2 1\ne 1 2\n").unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(rep.duplicate_edges, 2);
        assert_eq!(rep.declared_edges, 3);
    }

    #[test]
    fn partite_edges() {
        let g = complete_partite(&[2, 2]).unwrap();
        assert_eq!(g.edges(), &[(0, 2), (0, 3), (1, 2), (1, 3)]);
        assert_eq!(complete_partite(&[1, 1, 1]).unwrap().num_edges(), 3);
        assert_eq!(complete_partite(&[5, 5, 5]).unwrap().num_edges(), 75);
        assert!(complete_partite(&[4]).is_err());
    }

    #[test]
    fn sparsify_contract() {
        let g = complete_partite(&[5, 5, 5]).unwrap();
        assert_eq!(sparsify(&g, 1.0, 3).unwrap(), g);
        let a = sparsify(&g, 0.5, 11).unwrap();
        let b = sparsify(&g, 0.5, 11).unwrap();
        assert_eq!(a, b);
        let c = sparsify(&g, 0.5, 12).unwrap();
        assert_ne!(a.edges(), c.edges());
        assert_eq!(a.planted_classes(), g.planted_classes());
        assert!(sparsify(&g, 0.0, 1).is_err());
        assert!(sparsify(&g, 1.5, 1).is_err());
        assert!(sparsify(&path(3).unwrap(), 0.5, 1).is_err());
    }

    #[test]
    fn chromatic_small() {
        assert_eq!(
            chromatic_number_bruteforce(&complete(3).unwrap()).unwrap(),
            3
        );
        assert_eq!(
            chromatic_number_bruteforce(&complete_partite(&[2, 2]).unwrap()).unwrap(),
            2
        );
        assert_eq!(chromatic_number_bruteforce(&petersen()).unwrap(), 3);
        assert_eq!(chromatic_number_bruteforce(&cycle(5).unwrap()).unwrap(), 3);
        assert_eq!(
            chromatic_number_bruteforce(&Graph::new(4, []).unwrap()).unwrap(),
            1
        );
        assert!(matches!(
            chromatic_number_bruteforce(&path(13).unwrap()),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn chromatic_of_balanced_partite() {
        for m in 1..=3 {
            for k in 2..=4 {
                let g = complete_partite(&vec![m; k]).unwrap();
                if g.n() <= CHROMATIC_BRUTEFORCE_LIMIT {
                    assert_eq!(chromatic_number_bruteforce(&g).unwrap(), k, "m={m} k={k}");
                }
            }
        }
    }

    #[test]
    fn validate() {
        let t = complete(3).unwrap();
        assert!(validate_coloring(&t, &Coloring::from_assignment(vec![0, 1, 2])).unwrap());
        assert!(!validate_coloring(&t, &Coloring::from_assignment(vec![0, 1, 1])).unwrap());
        let e = Graph::new(3, []).unwrap();
        assert!(validate_coloring(&e, &Coloring::from_assignment(vec![0, 0, 0])).unwrap());
        assert!(matches!(
            validate_coloring(&t, &Coloring::from_assignment(vec![0, 1])),
            Err(Error::MissingNode(_))
        ));
    }

    #[test]
    fn planted_partition_is_proper() {
        let g = complete_partite(&[3, 1, 2]).unwrap();
        let c = Coloring::from_assignment(g.planted_labels().unwrap());
        assert_eq!(c.num_colors, 3);
        assert!(validate_coloring(&g, &c).unwrap());
        assert!(Graph::new(3, [(0, 1)])
            .unwrap()
            .with_planted_classes(vec![vec![0, 1], vec![2]])
            .is_err());
    }

    #[test]
    fn graph_spec() {
        let s: GraphSpec = "partite:5,5,5;keep=0.5;seed=7".parse().unwrap();
        assert_eq!(s.class_sizes, vec![5, 5, 5]);
        assert_eq!(s.keep, 0.5);
        assert_eq!(s.seed, 7);
        assert_eq!(
            "partite:1,1,1"
                .parse::<GraphSpec>()
                .unwrap()
                .build()
                .unwrap()
                .num_edges(),
            3
        );
        assert!("grid:3".parse::<GraphSpec>().is_err());
        assert!("partite:2,x".parse::<GraphSpec>().is_err());
    }

    #[test]
    fn json_roundtrip() {
        let g = complete_partite(&[2, 3]).unwrap();
        let back = Graph::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(back, g);
        let plain = Graph::from_json(r#"{"n":3,"edges":[[0,1]]}"#).unwrap();
        assert_eq!(plain.planted_classes(), None);
    }
}
