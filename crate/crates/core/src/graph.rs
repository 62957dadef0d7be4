//! Undirected connected graphs, the edge-list file format, and edge colorings.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Attempts allowed for the random regular construction.
pub const RANDOM_REGULAR_RETRY_CAP: usize = 100;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("infeasible graph parameters: {0}")]
    Infeasible(String),
    #[error("graph is disconnected ({reached} of {n} nodes reachable from node 0)")]
    Disconnected { n: usize, reached: usize },
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(usize, usize),
    #[error("node {node} out of range for n = {n}")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("random_regular: no connected simple graph within {0} attempts")]
    RetryCapExceeded(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Named graph families.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphFamily {
    Hypercube { d: u32 },
    Cycle { n: usize },
    Torus { a: usize, b: usize },
    Complete { n: usize },
    RandomRegular { n: usize, d: usize, seed: u64 },
}

/// Simple undirected connected graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    max_degree: usize,
}

impl Graph {
    /// Validates and builds a graph. Edges may be given in any order and
    /// orientation; they are stored as sorted `(u, v)` pairs with `u < v`.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Infeasible("n must be at least 1".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            for node in [a, b] {
                if node >= n {
                    return Err(GraphError::NodeOutOfRange { node, n });
                }
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            let e = (a.min(b), a.max(b));
            if !set.insert(e) {
                return Err(GraphError::DuplicateEdge(e.0, e.1));
            }
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let max_degree = adjacency.iter().map(Vec::len).max().unwrap_or(0);
        let g = Graph {
            n,
            edges,
            adjacency,
            max_degree,
        };
        let reached = g.reachable_from(0);
        if reached != n {
            return Err(GraphError::Disconnected { n, reached });
        }
        Ok(g)
    }

    pub fn build(family: &GraphFamily) -> Result<Self, GraphError> {
        match *family {
            GraphFamily::Hypercube { d } => hypercube(d),
            GraphFamily::Cycle { n } => cycle(n),
            GraphFamily::Torus { a, b } => torus(a, b),
            GraphFamily::Complete { n } => complete(n),
            GraphFamily::RandomRegular { n, d, seed } => random_regular(n, d, seed),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as sorted `(u, v)` pairs with `u < v`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adjacency[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u].len()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Number of nodes reached by BFS from `start`.
    pub fn reachable_from(&self, start: usize) -> usize {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count
    }

    /// Dimension of the hypercube if the labelling is the standard one.
    pub fn hypercube_dimension(&self) -> Option<u32> {
        if !self.n.is_power_of_two() || self.n < 2 {
            return None;
        }
        let d = self.n.trailing_zeros();
        let expected = self.n * d as usize / 2;
        let ok = self.edge_count() == expected
            && self.edges.iter().all(|&(u, v)| (u ^ v).count_ones() == 1);
        ok.then_some(d)
    }

    /// Parses the edge-list format: a header `n m` followed by `m` lines `u v`.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(GraphError::Parse {
            line: 1,
            message: "missing header `n m`".into(),
        })?;
        let (n, m) = parse_pair(hline, header)?;
        if n == 0 {
            return Err(GraphError::Parse {
                line: hline,
                message: "n must be at least 1".into(),
            });
        }
        let mut seen = BTreeSet::new();
        let mut edges = Vec::with_capacity(m);
        for (line, body) in lines {
            let (u, v) = parse_pair(line, body)?;
            for node in [u, v] {
                if node >= n {
                    return Err(GraphError::Parse {
                        line,
                        message: format!("node {node} out of range for n = {n}"),
                    });
                }
            }
            if u == v {
                return Err(GraphError::Parse {
                    line,
                    message: format!("self-loop at node {u}"),
                });
            }
            let e = (u.min(v), u.max(v));
            if !seen.insert(e) {
                return Err(GraphError::Parse {
                    line,
                    message: format!("duplicate edge {{{}, {}}}", e.0, e.1),
                });
            }
            edges.push(e);
        }
        if edges.len() != m {
            return Err(GraphError::Parse {
                line: hline,
                message: format!("header declares {m} edges, found {}", edges.len()),
            });
        }
        Graph::from_edges(n, edges).map_err(|e| match e {
            GraphError::Disconnected { .. } => GraphError::Parse {
                line: hline,
                message: e.to_string(),
            },
            other => other,
        })
    }

    /// Canonical edge-list text: header, then edges in lexicographic order.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(8 * (self.edges.len() + 1));
        writeln!(out, "{} {}", self.n, self.edges.len()).unwrap();
        for &(u, v) in &self.edges {
            writeln!(out, "{u} {v}").unwrap();
        }
        out
    }
}

fn parse_pair(line: usize, body: &str) -> Result<(usize, usize), GraphError> {
    let fields: Vec<&str> = body.split_whitespace().collect();
    if fields.len() != 2 {
        return Err(GraphError::Parse {
            line,
            message: format!("expected two fields, found {}", fields.len()),
        });
    }
    let parse = |s: &str| {
        s.parse::<usize>().map_err(|_| GraphError::Parse {
            line,
            message: format!("not a non-negative integer: {s:?}"),
        })
    };
    Ok((parse(fields[0])?, parse(fields[1])?))
}

pub fn hypercube(d: u32) -> Result<Graph, GraphError> {
    if d == 0 || d > 24 {
        return Err(GraphError::Infeasible(format!(
            "hypercube dimension must satisfy 1 <= d <= 24, got {d}"
        )));
    }
    let n = 1usize << d;
    let edges = (0..n).flat_map(|u| {
        (0..d)
            .map(move |b| (u, u ^ (1 << b)))
            .filter(|&(u, v)| u < v)
    });
    Graph::from_edges(n, edges)
}

pub fn cycle(n: usize) -> Result<Graph, GraphError> {
    if n < 3 {
        return Err(GraphError::Infeasible(format!(
            "cycle needs n >= 3, got {n}"
        )));
    }
    Graph::from_edges(n, (0..n).map(|u| (u, (u + 1) % n)))
}

/// `a × b` grid with wrap-around; node `(i, j)` is labelled `i * b + j`.
pub fn torus(a: usize, b: usize) -> Result<Graph, GraphError> {
    if a < 3 || b < 3 {
        return Err(GraphError::Infeasible(format!(
            "torus needs a >= 3 and b >= 3, got ({a}, {b})"
        )));
    }
    let id = |i: usize, j: usize| i * b + j;
    let edges = (0..a).flat_map(|i| {
        (0..b).flat_map(move |j| {
            [
                (id(i, j), id((i + 1) % a, j)),
                (id(i, j), id(i, (j + 1) % b)),
            ]
        })
    });
    Graph::from_edges(a * b, edges)
}

pub fn complete(n: usize) -> Result<Graph, GraphError> {
    if n < 2 {
        return Err(GraphError::Infeasible(format!(
            "complete graph needs n >= 2, got {n}"
        )));
    }
    Graph::from_edges(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
}

/// Random `d`-regular graph from the configuration model.
///
/// Stubs are paired in shuffled passes; a pair that would create a self-loop
/// or a multi-edge is rejected and its stubs go back into the pool. An attempt
/// that gets stuck, or ends disconnected, is discarded.
pub fn random_regular(n: usize, d: usize, seed: u64) -> Result<Graph, GraphError> {
    if d == 0 || n < 2 || d >= n || (n * d) % 2 != 0 {
        return Err(GraphError::Infeasible(format!(
            "random_regular needs d >= 1, n >= 2, d < n and n*d even, got n = {n}, d = {d}"
        )));
    }
    for attempt in 0..RANDOM_REGULAR_RETRY_CAP {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::rng::derive_seed(
            seed,
            attempt as u64,
            crate::rng::Purpose::Schedule,
        ));
        if let Some(edges) = pair_stubs(n, d, &mut rng) {
            match Graph::from_edges(n, edges) {
                Ok(g) => return Ok(g),
                Err(GraphError::Disconnected { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
    }
    Err(GraphError::RetryCapExceeded(RANDOM_REGULAR_RETRY_CAP))
}

fn pair_stubs(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Option<Vec<(usize, usize)>> {
    let mut edges = BTreeSet::new();
    let mut stubs: Vec<usize> = (0..n).flat_map(|u| std::iter::repeat_n(u, d)).collect();
    while !stubs.is_empty() {
        stubs.shuffle(rng);
        let mut rest = Vec::new();
        for pair in stubs.chunks_exact(2) {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if u != v && edges.insert((u, v)) {
                continue;
            }
            rest.extend_from_slice(pair);
        }
        if rest.len() == stubs.len() {
            // no progress in a full pass: give up unless a legal pair exists
            let nodes: BTreeSet<usize> = rest.iter().copied().collect();
            let stuck = nodes.iter().all(|&u| {
                nodes
                    .iter()
                    .all(|&v| u == v || edges.contains(&(u.min(v), u.max(v))))
            });
            if stuck {
                return None;
            }
        }
        stubs = rest;
    }
    Some(edges.into_iter().collect())
}

/// Partition of the edge set into matchings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeColoring {
    pub classes: Vec<Vec<(usize, usize)>>,
}

impl EdgeColoring {
    pub fn width(&self) -> usize {
        self.classes.len()
    }

    /// Checks that the classes are matchings partitioning the edges of `g`.
    pub fn is_proper_for(&self, g: &Graph) -> bool {
        let mut seen = BTreeSet::new();
        for class in &self.classes {
            let mut used = vec![false; g.n()];
            for &(u, v) in class {
                if !g.has_edge(u, v) || used[u] || used[v] || !seen.insert((u, v)) {
                    return false;
                }
                used[u] = true;
                used[v] = true;
            }
        }
        seen.len() == g.edge_count()
    }
}

/// Proper edge coloring.
///
/// Hypercubes get the dimension-exchange coloring (class `i` flips bit `i`).
/// Everything else is colored greedily in lexicographic edge order with the
/// smallest class free at both endpoints, which uses at most `2Δ − 1` classes.
pub fn edge_color(g: &Graph) -> EdgeColoring {
    if let Some(d) = g.hypercube_dimension() {
        let classes = (0..d)
            .map(|b| {
                g.edges()
                    .iter()
                    .copied()
                    .filter(|&(u, v)| u ^ v == 1 << b)
                    .collect()
            })
            .collect();
        return EdgeColoring { classes };
    }
    let mut used: Vec<Vec<bool>> = vec![Vec::new(); g.n()];
    let mut classes: Vec<Vec<(usize, usize)>> = Vec::new();
    for &(u, v) in g.edges() {
        let c = (0..)
            .find(|&c| {
                !used[u].get(c).copied().unwrap_or(false)
                    && !used[v].get(c).copied().unwrap_or(false)
            })
            .unwrap();
        for w in [u, v] {
            if used[w].len() <= c {
                used[w].resize(c + 1, false);
            }
            used[w][c] = true;
        }
        if classes.len() <= c {
            classes.resize(c + 1, Vec::new());
        }
        classes[c].push((u, v));
    }
    EdgeColoring { classes }
}
