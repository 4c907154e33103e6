//! Static communication graphs: complete, ring, line and Barabási–Albert
//! scale-free networks.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_SCALE_FREE_M: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("{kind} topology needs at least {min} nodes, got {got}")]
    TooFewNodes { kind: &'static str, min: usize, got: usize },
    #[error("scale-free attachment count m = {m} must satisfy 1 <= m < n = {n}")]
    InvalidAttachment { n: usize, m: usize },
    #[error("robot id {id} out of range for a graph of {n} nodes")]
    OutOfRange { id: usize, n: usize },
    #[error("edge list line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown topology `{0}` (expected fully-connected, ring, line or scale-free[:m])")]
    UnknownKind(String),
}

/// Descriptor of a static topology, resolved into a graph per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Topology {
    FullyConnected,
    Ring,
    Line,
    ScaleFree { m: usize },
}

impl Topology {
    pub fn build<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<TopologyGraph, TopologyError> {
        match *self {
            Topology::FullyConnected => TopologyGraph::fully_connected(n),
            Topology::Ring => TopologyGraph::ring(n),
            Topology::Line => TopologyGraph::line(n),
            Topology::ScaleFree { m } => TopologyGraph::scale_free(n, m, rng),
        }
    }

    /// Checks that `n` nodes suffice, without building anything.
    pub fn validate(&self, n: usize) -> Result<(), TopologyError> {
        let (kind, min) = match *self {
            Topology::FullyConnected => ("fully-connected", 2),
            Topology::Ring => ("ring", 3),
            Topology::Line => ("line", 2),
            Topology::ScaleFree { m } => {
                return if m >= 1 && m < n {
                    Ok(())
                } else {
                    Err(TopologyError::InvalidAttachment { n, m })
                }
            }
        };
        if n < min {
            Err(TopologyError::TooFewNodes { kind, min, got: n })
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topology::FullyConnected => f.write_str("fully-connected"),
            Topology::Ring => f.write_str("ring"),
            Topology::Line => f.write_str("line"),
            Topology::ScaleFree { m } => write!(f, "scale-free:{m}"),
        }
    }
}

impl FromStr for Topology {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fully-connected" | "full" => Ok(Topology::FullyConnected),
            "ring" => Ok(Topology::Ring),
            "line" => Ok(Topology::Line),
            "scale-free" => Ok(Topology::ScaleFree {
                m: DEFAULT_SCALE_FREE_M,
            }),
            other => other
                .strip_prefix("scale-free:")
                .and_then(|m| m.parse().ok())
                .map(|m| Topology::ScaleFree { m })
                .ok_or_else(|| TopologyError::UnknownKind(other.to_string())),
        }
    }
}

/// Undirected simple graph over robot ids `0..n`. Neighbour lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyGraph {
    adjacency: Vec<Vec<usize>>,
}

impl TopologyGraph {
    fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for (a, b) in edges {
            debug_assert_ne!(a, b);
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Self { adjacency }
    }

    pub fn fully_connected(n: usize) -> Result<Self, TopologyError> {
        Topology::FullyConnected.validate(n)?;
        Ok(Self::from_edges(
            n,
            (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))),
        ))
    }

    pub fn ring(n: usize) -> Result<Self, TopologyError> {
        Topology::Ring.validate(n)?;
        Ok(Self::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))))
    }

    pub fn line(n: usize) -> Result<Self, TopologyError> {
        Topology::Line.validate(n)?;
        Ok(Self::from_edges(n, (0..n - 1).map(|i| (i, i + 1))))
    }

    /// Barabási–Albert preferential attachment. Nodes `0..=m` form a seed
    /// clique; every later node links to `m` distinct existing nodes drawn
    /// with probability proportional to their current degree.
    pub fn scale_free<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Self, TopologyError> {
        Topology::ScaleFree { m }.validate(n)?;
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(m * (m + 1) / 2 + m * (n - m - 1));
        for i in 0..=m {
            for j in (i + 1)..=m {
                edges.push((i, j));
            }
        }
        // Every edge contributes both endpoints, so a uniform pick from this
        // list is a degree-weighted pick over nodes.
        let mut endpoints: Vec<usize> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
        let mut targets = Vec::with_capacity(m);
        for node in (m + 1)..n {
            targets.clear();
            while targets.len() < m {
                let candidate = endpoints[rng.random_range(0..endpoints.len())];
                if !targets.contains(&candidate) {
                    targets.push(candidate);
                }
            }
            for &t in &targets {
                edges.push((node, t));
                endpoints.push(node);
                endpoints.push(t);
            }
        }
        Ok(Self::from_edges(n, edges))
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, id: usize) -> Result<&[usize], TopologyError> {
        self.adjacency
            .get(id)
            .map(Vec::as_slice)
            .ok_or(TopologyError::OutOfRange {
                id,
                n: self.n_nodes(),
            })
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn degree(&self, id: usize) -> usize {
        self.adjacency[id].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n_nodes();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut visited = 1;
        while let Some(v) = queue.pop_front() {
            for &u in &self.adjacency[v] {
                if !seen[u] {
                    seen[u] = true;
                    visited += 1;
                    queue.push_back(u);
                }
            }
        }
        visited == n
    }

    /// Plain-text edge list: a `nodes N` header then one `i j` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("nodes {}\n", self.n_nodes());
        for (i, j) in self.edges() {
            out.push_str(&format!("{i} {j}\n"));
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self, TopologyError> {
        let parse_err = |line: usize, message: &str| TopologyError::Parse {
            line,
            message: message.to_string(),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| parse_err(1, "missing `nodes N` header"))?;
        let n: usize = header
            .trim()
            .strip_prefix("nodes ")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| parse_err(1, "expected `nodes N`"))?;
        let mut edges = Vec::new();
        for (idx, line) in lines {
            let mut parts = line.split_whitespace().map(str::parse::<usize>);
            match (parts.next(), parts.next(), parts.next()) {
                (Some(Ok(a)), Some(Ok(b)), None) if a < n && b < n && a != b => edges.push((a, b)),
                _ => return Err(parse_err(idx + 1, "expected two distinct in-range node ids")),
            }
        }
        Ok(Self::from_edges(n, edges))
    }
}
