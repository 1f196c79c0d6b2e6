//! Super gathering spanning trees: a BFS tree from the broadcast source,
//! ranked under thresholds 2 and `x`, whose fast transmission sets are
//! collision-free and whose slow competition per parent is below `x`.

mod build;
mod path;
mod rank;
mod verify;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{bfs_layering, BfsLayering, GraphError, MeshGraph, NodeId};

pub use self::build::{build_sgst, build_sgst_with_stats, BuildStats, REPAIR_ITERATIONS_PER_NODE};
pub use self::path::{decompose_path, PathDecomposition, Segment, SegmentKind};
pub use self::rank::{
    ceil_log, check_rank_bound, rank_from_children, rank_tree, ranks_with_threshold, RankError,
    RankedTree,
};
pub use self::verify::{verify_sgst, Property, PropertyCheck, ValidationReport, Witness};

#[derive(Debug, Error)]
pub enum SgstError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error("parent map has {found} entries, graph has {expected} nodes")]
    SizeMismatch { expected: usize, found: usize },
    #[error("node {node}: parent {parent} is not a neighbor on the previous BFS layer")]
    NotBfsParent { node: NodeId, parent: NodeId },
    #[error("node {0} is not the source but has no parent")]
    MissingParent(NodeId),
    #[error("source {0} must not have a parent")]
    SourceHasParent(NodeId),
    #[error("construction failed after {iterations} repair iterations: {violation}")]
    ConstructionFailed { iterations: usize, violation: String },
}

/// Transmission class of a node, decided by how its ranks compare with its
/// parent's.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxClass {
    Root,
    Fast,
    Slow,
    SuperSlow,
}

impl TxClass {
    /// Fast if threshold-2 ranks agree; otherwise slow if threshold-`x` ranks
    /// agree; otherwise super-slow.
    pub fn classify(rank2: u32, parent_rank2: u32, rankx: u32, parent_rankx: u32) -> Self {
        if rank2 == parent_rank2 {
            TxClass::Fast
        } else if rankx == parent_rankx {
            TxClass::Slow
        } else {
            TxClass::SuperSlow
        }
    }
}

#[derive(Clone, Debug)]
pub struct Sgst {
    pub layering: BfsLayering,
    pub ranked: RankedTree,
    pub class_of: Vec<TxClass>,
    fast_child: Vec<Option<NodeId>>,
    slow_children: Vec<Vec<NodeId>>,
}

impl Sgst {
    /// Wraps a parent map, checking that it is a BFS tree of `g` rooted at
    /// `source`, and derives ranks and classes. Does not check the
    /// collision properties; see [`verify_sgst`].
    pub fn from_parents(
        g: &MeshGraph,
        source: NodeId,
        parent_of: Vec<Option<NodeId>>,
        x: u32,
    ) -> Result<Self, SgstError> {
        let layering = bfs_layering(g, source)?;
        if parent_of.len() != g.node_count() {
            return Err(SgstError::SizeMismatch {
                expected: g.node_count(),
                found: parent_of.len(),
            });
        }
        for (v, p) in parent_of.iter().enumerate() {
            match (*p, v == source) {
                (Some(_), true) => return Err(SgstError::SourceHasParent(v)),
                (None, false) => return Err(SgstError::MissingParent(v)),
                (None, true) => {}
                (Some(p), false) => {
                    if p >= g.node_count()
                        || !g.has_edge(v, p)
                        || layering.layer_of[p] + 1 != layering.layer_of[v]
                    {
                        return Err(SgstError::NotBfsParent { node: v, parent: p });
                    }
                }
            }
        }
        let ranked = rank_tree(&parent_of, x)?;
        Ok(Self::assemble(layering, ranked))
    }

    pub(crate) fn assemble(layering: BfsLayering, ranked: RankedTree) -> Self {
        let n = ranked.node_count();
        let class_of: Vec<TxClass> = (0..n)
            .map(|v| match ranked.parent_of[v] {
                None => TxClass::Root,
                Some(p) => TxClass::classify(
                    ranked.rank2[v],
                    ranked.rank2[p],
                    ranked.rankx[v],
                    ranked.rankx[p],
                ),
            })
            .collect();
        let mut fast_child = vec![None; n];
        let mut slow_children = vec![Vec::new(); n];
        for v in 0..n {
            if let Some(p) = ranked.parent_of[v] {
                match class_of[v] {
                    // A node has at most one child of its own threshold-2 rank.
                    TxClass::Fast => fast_child[p] = Some(v),
                    TxClass::Slow => slow_children[p].push(v),
                    _ => {}
                }
            }
        }
        Self {
            layering,
            ranked,
            class_of,
            fast_child,
            slow_children,
        }
    }

    pub fn node_count(&self) -> usize {
        self.class_of.len()
    }

    pub fn source(&self) -> NodeId {
        self.layering.root
    }

    pub fn x(&self) -> u32 {
        self.ranked.x
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.ranked.parent_of[v]
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.ranked.children[v]
    }

    pub fn layer(&self, v: NodeId) -> usize {
        self.layering.layer_of[v]
    }

    pub fn rank2(&self, v: NodeId) -> u32 {
        self.ranked.rank2[v]
    }

    pub fn rankx(&self, v: NodeId) -> u32 {
        self.ranked.rankx[v]
    }

    pub fn rmax2(&self) -> u32 {
        self.ranked.rmax2
    }

    pub fn rmaxx(&self) -> u32 {
        self.ranked.rmaxx
    }

    /// The child reached by a fast transmission from `v`, if any.
    pub fn fast_child(&self, v: NodeId) -> Option<NodeId> {
        self.fast_child[v]
    }

    /// Children of `v` reached over slow edges.
    pub fn slow_children(&self, v: NodeId) -> &[NodeId] {
        &self.slow_children[v]
    }

    /// `FAST^k_j`: fast nodes on layer `k` with threshold-2 rank `j`.
    pub fn fast_set(&self, layer: usize, rank: u32) -> Vec<NodeId> {
        self.class_set(layer, |s, v| s.class_of[v] == TxClass::Fast && s.rank2(v) == rank)
    }

    /// `SLOW^k_j`.
    pub fn slow_set(&self, layer: usize, rank: u32) -> Vec<NodeId> {
        self.class_set(layer, |s, v| s.class_of[v] == TxClass::Slow && s.rank2(v) == rank)
    }

    /// `SS^k_j`, indexed by the threshold-`x` rank.
    pub fn superslow_set(&self, layer: usize, rankx: u32) -> Vec<NodeId> {
        self.class_set(layer, |s, v| s.class_of[v] == TxClass::SuperSlow && s.rankx(v) == rankx)
    }

    fn class_set(&self, layer: usize, keep: impl Fn(&Self, NodeId) -> bool) -> Vec<NodeId> {
        self.layering
            .layers
            .get(layer)
            .map(|nodes| nodes.iter().copied().filter(|&v| keep(self, v)).collect())
            .unwrap_or_default()
    }

    /// Counts of nodes per class, for reporting.
    pub fn class_counts(&self) -> BTreeMap<&'static str, usize> {
        let mut m = BTreeMap::new();
        for c in &self.class_of {
            let name = match c {
                TxClass::Root => "root",
                TxClass::Fast => "fast",
                TxClass::Slow => "slow",
                TxClass::SuperSlow => "superslow",
            };
            *m.entry(name).or_insert(0) += 1;
        }
        m
    }

    pub fn export(&self) -> SgstExport {
        SgstExport {
            x: self.x(),
            source: self.source(),
            parent: self.ranked.parent_of.clone(),
            layer: self.layering.layer_of.clone(),
            rank2: self.ranked.rank2.clone(),
            rankx: self.ranked.rankx.clone(),
            class: self.class_of.clone(),
        }
    }
}

/// JSON form of an SGST: per-node arrays plus the ranking threshold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SgstExport {
    pub x: u32,
    pub source: NodeId,
    pub parent: Vec<Option<NodeId>>,
    pub layer: Vec<usize>,
    pub rank2: Vec<u32>,
    pub rankx: Vec<u32>,
    pub class: Vec<TxClass>,
}

impl SgstExport {
    /// Rebuilds the tree on `g`; ranks, layers and classes are recomputed and
    /// must agree with the exported arrays.
    pub fn import(&self, g: &MeshGraph) -> Result<Sgst, SgstError> {
        let s = Sgst::from_parents(g, self.source, self.parent.clone(), self.x)?;
        if s.export() != *self {
            return Err(SgstError::ConstructionFailed {
                iterations: 0,
                violation: "imported arrays disagree with recomputed ranks or classes".into(),
            });
        }
        Ok(s)
    }
}

/// Default ranking threshold `max(2, ceil(log2 n))`.
pub fn default_x(n: usize) -> u32 {
    ceil_log(n, 2).max(2)
}
