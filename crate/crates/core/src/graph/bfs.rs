use std::collections::VecDeque;

use super::{GraphError, MeshGraph, NodeId};

/// Hop-distance layering from a root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BfsLayering {
    pub root: NodeId,
    pub layer_of: Vec<usize>,
    pub layers: Vec<Vec<NodeId>>,
}

impl BfsLayering {
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn layer(&self, v: NodeId) -> usize {
        self.layer_of[v]
    }
}

/// Distances from `root`; `usize::MAX` never appears because the graph is
/// connected.
fn distances(g: &MeshGraph, root: NodeId) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.node_count()];
    let mut queue = VecDeque::with_capacity(g.node_count());
    dist[root] = 0;
    queue.push_back(root);
    while let Some(u) = queue.pop_front() {
        let d = dist[u] + 1;
        for &v in g.neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = d;
                queue.push_back(v);
            }
        }
    }
    dist
}

pub fn bfs_layering(g: &MeshGraph, root: NodeId) -> Result<BfsLayering, GraphError> {
    if root >= g.node_count() {
        return Err(GraphError::NodeOutOfRange {
            node: root,
            n: g.node_count(),
        });
    }
    let layer_of = distances(g, root);
    let depth = layer_of.iter().copied().max().unwrap_or(0);
    let mut layers = vec![Vec::new(); depth + 1];
    for (v, &l) in layer_of.iter().enumerate() {
        layers[l].push(v);
    }
    Ok(BfsLayering {
        root,
        layer_of,
        layers,
    })
}

pub fn eccentricity(g: &MeshGraph, v: NodeId) -> usize {
    distances(g, v).into_iter().max().unwrap_or(0)
}

/// Exact diameter by one BFS per node.
pub fn diameter(g: &MeshGraph) -> usize {
    (0..g.node_count())
        .map(|v| eccentricity(g, v))
        .max()
        .unwrap_or(0)
}
