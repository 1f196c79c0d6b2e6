use std::collections::VecDeque;

use thiserror::Error;

use crate::graph::NodeId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RankError {
    #[error("ranking threshold x = {0} is below 2")]
    ThresholdTooSmall(u32),
    #[error("parent map is empty")]
    Empty,
    #[error("parent map has no root")]
    NoRoot,
    #[error("parent map has several roots ({0} and {1})")]
    MultipleRoots(NodeId, NodeId),
    #[error("node {node} names parent {parent}, which is out of range")]
    ParentOutOfRange { node: NodeId, parent: NodeId },
    #[error("cycle detected: node {0} is not reachable from the root")]
    Cycle(NodeId),
}

/// Smallest `e` with `base^e >= n`, i.e. `ceil(log_base n)` for `n >= 1`.
pub fn ceil_log(n: usize, base: u64) -> u32 {
    assert!(base >= 2, "logarithm base must be at least 2");
    let mut e = 0;
    let mut pow: u128 = 1;
    while pow < n as u128 {
        pow *= base as u128;
        e += 1;
    }
    e
}

/// Rank of each node under threshold `x`, given children lists and a
/// root-first order (each node after its parent).
///
/// Leaves get rank 1. An inner node takes the largest child rank, plus one
/// when at least `x` children attain it.
pub fn ranks_with_threshold(children: &[Vec<NodeId>], order: &[NodeId], x: u32) -> Vec<u32> {
    let mut rank = vec![1u32; children.len()];
    for &v in order.iter().rev() {
        rank[v] = rank_from_children(children[v].iter().map(|&c| rank[c]), x);
    }
    rank
}

/// Rank of a node whose children carry the given ranks.
pub fn rank_from_children(child_ranks: impl Iterator<Item = u32>, x: u32) -> u32 {
    let mut best = 0u32;
    let mut count = 0u32;
    for r in child_ranks {
        if r > best {
            best = r;
            count = 1;
        } else if r == best {
            count += 1;
        }
    }
    match best {
        0 => 1,
        _ if count >= x => best + 1,
        _ => best,
    }
}

/// A rooted tree annotated with ranks for threshold 2 and threshold `x`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankedTree {
    pub root: NodeId,
    pub parent_of: Vec<Option<NodeId>>,
    pub children: Vec<Vec<NodeId>>,
    pub rank2: Vec<u32>,
    pub rankx: Vec<u32>,
    pub x: u32,
    pub rmax2: u32,
    pub rmaxx: u32,
}

impl RankedTree {
    pub fn node_count(&self) -> usize {
        self.parent_of.len()
    }
}

/// Ranks a tree given as a parent map (exactly one `None`, the root).
pub fn rank_tree(parent_of: &[Option<NodeId>], x: u32) -> Result<RankedTree, RankError> {
    if x < 2 {
        return Err(RankError::ThresholdTooSmall(x));
    }
    let n = parent_of.len();
    if n == 0 {
        return Err(RankError::Empty);
    }
    let mut root = None;
    let mut children = vec![Vec::new(); n];
    for (v, p) in parent_of.iter().enumerate() {
        match *p {
            None => match root {
                None => root = Some(v),
                Some(r) => return Err(RankError::MultipleRoots(r, v)),
            },
            Some(p) if p >= n => return Err(RankError::ParentOutOfRange { node: v, parent: p }),
            Some(p) => children[p].push(v),
        }
    }
    let root = root.ok_or(RankError::NoRoot)?;

    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([root]);
    let mut seen = vec![false; n];
    seen[root] = true;
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &c in &children[v] {
            if !seen[c] {
                seen[c] = true;
                queue.push_back(c);
            }
        }
    }
    if let Some(v) = seen.iter().position(|s| !s) {
        return Err(RankError::Cycle(v));
    }

    let rank2 = ranks_with_threshold(&children, &order, 2);
    let rankx = ranks_with_threshold(&children, &order, x);
    let rmax2 = rank2.iter().copied().max().unwrap_or(1);
    let rmaxx = rankx.iter().copied().max().unwrap_or(1);
    Ok(RankedTree {
        root,
        parent_of: parent_of.to_vec(),
        children,
        rank2,
        rankx,
        x,
        rmax2,
        rmaxx,
    })
}

/// The logarithmic rank bound: `rmax <= ceil(log_x n)` for both thresholds.
/// A single-node tree has rank 1, so the bound is floored at 1.
pub fn check_rank_bound(rt: &RankedTree, n: usize) -> bool {
    let bound = |base: u32| ceil_log(n, base as u64).max(1);
    rt.rmax2 <= bound(2) && rt.rmaxx <= bound(rt.x)
}
