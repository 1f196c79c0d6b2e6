//! Undirected mesh topology, the edge-list file format, BFS layering and
//! graph generators.

mod bfs;
mod generate;

use std::collections::VecDeque;
use std::fmt::Write as _;

use thiserror::Error;

pub use self::bfs::{bfs_layering, diameter, eccentricity, BfsLayering};
pub use self::generate::{generate_graph, GeneratorSpec};

pub type NodeId = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("line {line}: malformed input: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: NodeId },
    #[error("line {line}: duplicate edge {{{u}, {v}}}")]
    DuplicateEdge { line: usize, u: NodeId, v: NodeId },
    #[error("graph is disconnected: node {unreached} is unreachable from node 0")]
    Disconnected { unreached: NodeId },
    #[error("node {node} out of range for graph with {n} nodes")]
    NodeOutOfRange { node: NodeId, n: usize },
    #[error("infeasible generator spec `{spec}`: {reason}")]
    Infeasible { spec: String, reason: String },
    #[error("invalid generator spec `{0}`")]
    BadSpec(String),
}

/// Connected, undirected, simple graph over dense node ids `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeshGraph {
    adj: Vec<Vec<NodeId>>,
    edge_count: usize,
}

impl MeshGraph {
    /// Builds a graph from an edge list. Edges may be given in either
    /// orientation; self-loops and duplicates are rejected, as is a
    /// disconnected result.
    pub fn from_edges(n: usize, edges: &[(NodeId, NodeId)]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Malformed {
                line: 1,
                reason: "graph must have at least one node".into(),
            });
        }
        let mut adj = vec![Vec::new(); n];
        for (idx, &(u, v)) in edges.iter().enumerate() {
            let line = idx + 2;
            for node in [u, v] {
                if node >= n {
                    return Err(GraphError::NodeOutOfRange { node, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop { line, node: u });
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for (u, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                let v = w[0];
                let (a, b) = (u.min(v), u.max(v));
                let line = edges
                    .iter()
                    .enumerate()
                    .filter(|(_, &(x, y))| (x.min(y), x.max(y)) == (a, b))
                    .nth(1)
                    .map(|(i, _)| i + 2)
                    .unwrap_or(0);
                return Err(GraphError::DuplicateEdge { line, u: a, v: b });
            }
        }
        let g = Self {
            adj,
            edge_count: edges.len(),
        };
        if let Some(unreached) = g.first_unreachable() {
            return Err(GraphError::Disconnected { unreached });
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Sorted neighbor list.
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adj[v]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    fn first_unreachable(&self) -> Option<NodeId> {
        let n = self.adj.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.iter().position(|s| !s)
    }

    /// Serializes to the edge-list format: `"n m"` then one `"u v"` line per
    /// edge with `u < v`, LF terminated.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(16 + self.edge_count * 10);
        let _ = writeln!(out, "{} {}", self.node_count(), self.edge_count);
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }
}

fn parse_usize(tok: &str, line: usize, what: &str) -> Result<usize, GraphError> {
    // `usize::from_str` accepts a leading '+', the format does not.
    if tok.is_empty() || !tok.bytes().all(|b| b.is_ascii_digit()) {
        return Err(GraphError::Malformed {
            line,
            reason: format!("expected decimal {what}, found `{tok}`"),
        });
    }
    tok.parse().map_err(|_| GraphError::Malformed {
        line,
        reason: format!("{what} `{tok}` does not fit"),
    })
}

fn split_pair(text: &str, line: usize) -> Result<(&str, &str), GraphError> {
    let mut parts = text.split(' ');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(a), Some(b), None) => Ok((a, b)),
        _ => Err(GraphError::Malformed {
            line,
            reason: format!("expected two space-separated integers, found `{text}`"),
        }),
    }
}

/// Parses the edge-list graph format.
///
/// The first line is `"n m"`; then exactly `m` lines `"u v"` with
/// `0 <= u < v < n`. Lines end in LF; a single trailing LF after the last
/// line is optional. Comments, blank lines and CR are rejected.
pub fn parse_graph(text: &str) -> Result<MeshGraph, GraphError> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let mut lines = body.split('\n');
    let header = lines.next().unwrap_or("");
    let (n_tok, m_tok) = split_pair(header, 1)?;
    let n = parse_usize(n_tok, 1, "node count")?;
    let m = parse_usize(m_tok, 1, "edge count")?;
    if n == 0 {
        return Err(GraphError::Malformed {
            line: 1,
            reason: "node count must be positive".into(),
        });
    }
    let mut edges = Vec::with_capacity(m);
    for (idx, raw) in lines.enumerate() {
        let line = idx + 2;
        if edges.len() == m {
            return Err(GraphError::Malformed {
                line,
                reason: format!("more than the declared {m} edges"),
            });
        }
        let (a, b) = split_pair(raw, line)?;
        let u = parse_usize(a, line, "node id")?;
        let v = parse_usize(b, line, "node id")?;
        if u == v {
            return Err(GraphError::SelfLoop { line, node: u });
        }
        if u > v {
            return Err(GraphError::Malformed {
                line,
                reason: format!("edge endpoints must satisfy u < v, found {u} {v}"),
            });
        }
        if v >= n {
            return Err(GraphError::Malformed {
                line,
                reason: format!("node id {v} out of range for n = {n}"),
            });
        }
        edges.push((u, v));
    }
    if edges.len() != m {
        return Err(GraphError::Malformed {
            line: edges.len() + 2,
            reason: format!("declared {m} edges, found {}", edges.len()),
        });
    }
    MeshGraph::from_edges(n, &edges)
}
