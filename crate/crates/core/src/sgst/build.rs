//! SGST construction.
//!
//! Ranks depend only on subtrees, so the tree is built bottom-up one layer
//! boundary at a time: when parents for layer `k+1` are chosen, the ranks of
//! every layer-`k+1` node are already final, and the choice only affects the
//! ranks of layer `k` and the classes of layer `k+1`. Each boundary is solved
//! locally:
//!
//! 1. threshold-2 merges: for each rank `j` (descending), a previous-layer
//!    node with at least two unassigned rank-`j` neighbors adopts all of
//!    them. Afterwards every candidate parent sees at most one unassigned
//!    node per rank, which makes every fast set collision-free;
//! 2. threshold-`x` merges on the remaining nodes, which caps the slow
//!    competitors contributed by later assignments at `x - 1`;
//! 3. leftovers take their lowest-id previous-layer neighbor;
//! 4. validator-guided repair for the slow overloads that merges in step 1
//!    can still produce.

use super::verify::{layer_violations, LayerView, Scratch, Witness};
use super::{rank_from_children, RankError, Sgst, SgstError, TxClass};
use crate::graph::{bfs_layering, MeshGraph, NodeId};
use crate::sgst::rank_tree;

/// Repair budget per node.
pub const REPAIR_ITERATIONS_PER_NODE: usize = 50;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BuildStats {
    /// Parent reassignments applied by the repair loop.
    pub repair_moves: usize,
    /// Repair iterations that fell back to merging a whole witness set.
    pub merge_moves: usize,
}

struct Builder<'g> {
    g: &'g MeshGraph,
    layer_of: &'g [usize],
    x: u32,
    parent: Vec<Option<NodeId>>,
    kids: Vec<Vec<NodeId>>,
    rank2: Vec<u32>,
    rankx: Vec<u32>,
    class: Vec<TxClass>,
}

impl LayerView for Builder<'_> {
    fn parent(&self, v: NodeId) -> NodeId {
        self.parent[v].expect("assigned before checking")
    }
    fn class(&self, v: NodeId) -> TxClass {
        self.class[v]
    }
    fn rank2(&self, v: NodeId) -> u32 {
        self.rank2[v]
    }
    fn rankx(&self, v: NodeId) -> u32 {
        self.rankx[v]
    }
}

impl<'g> Builder<'g> {
    fn candidates(&self, w: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let target = self.layer_of[w] - 1;
        self.g
            .neighbors(w)
            .iter()
            .copied()
            .filter(move |&u| self.layer_of[u] == target)
    }

    fn attach(&mut self, w: NodeId, u: NodeId) -> Option<NodeId> {
        let old = self.parent[w].replace(u);
        if let Some(o) = old {
            let pos = self.kids[o].iter().position(|&c| c == w).expect("child listed");
            self.kids[o].swap_remove(pos);
        }
        self.kids[u].push(w);
        old
    }

    /// Recomputes the ranks of `u` and the classes of its children.
    fn refresh(&mut self, u: NodeId) {
        self.rank2[u] = rank_from_children(self.kids[u].iter().map(|&c| self.rank2[c]), 2);
        self.rankx[u] = rank_from_children(self.kids[u].iter().map(|&c| self.rankx[c]), self.x);
        for i in 0..self.kids[u].len() {
            let c = self.kids[u][i];
            self.class[c] = TxClass::classify(self.rank2[c], self.rank2[u], self.rankx[c], self.rankx[u]);
        }
    }

    /// Reparents every `(child, new_parent)` pair and returns the undo list.
    fn apply(&mut self, moves: &[(NodeId, NodeId)]) -> Vec<(NodeId, NodeId)> {
        let mut undo = Vec::with_capacity(moves.len());
        let mut touched = Vec::with_capacity(moves.len() * 2);
        for &(w, u) in moves {
            if self.parent[w] == Some(u) {
                continue;
            }
            let old = self.attach(w, u).expect("only assigned nodes are moved");
            undo.push((w, old));
            touched.push(old);
            touched.push(u);
        }
        touched.sort_unstable();
        touched.dedup();
        for u in touched {
            self.refresh(u);
        }
        undo
    }

    fn revert(&mut self, undo: Vec<(NodeId, NodeId)>) {
        let moves: Vec<_> = undo.into_iter().rev().collect();
        self.apply(&moves);
    }

    fn excess(&self, k: usize, layer: &[NodeId], scratch: &mut Scratch) -> usize {
        let (f, s, _, _) = layer_violations(self.g, k, layer, self, self.x, scratch, false);
        f + s
    }

    fn witness(&self, k: usize, layer: &[NodeId], scratch: &mut Scratch) -> Option<Witness> {
        let (_, _, f, s) = layer_violations(self.g, k, layer, self, self.x, scratch, true);
        f.or(s)
    }

    /// Adopts groups of at least `threshold` unassigned nodes sharing a rank.
    fn merge_phase(
        &mut self,
        pending: &mut [bool],
        layer: &[NodeId],
        threshold: usize,
        key: fn(&Self, NodeId) -> u32,
        count: &mut [usize],
    ) {
        let mut values: Vec<u32> = layer.iter().map(|&w| key(self, w)).collect();
        values.sort_unstable_by(|a, b| b.cmp(a));
        values.dedup();
        for val in values {
            loop {
                let group: Vec<NodeId> = layer
                    .iter()
                    .copied()
                    .filter(|&w| pending[w] && key(self, w) == val)
                    .collect();
                if group.len() < threshold {
                    break;
                }
                let mut best: Option<(usize, NodeId)> = None;
                for &w in &group {
                    for u in self.candidates(w) {
                        count[u] += 1;
                    }
                }
                for &w in &group {
                    for u in self.candidates(w) {
                        let c = count[u];
                        let better = match best {
                            None => true,
                            Some((bc, bu)) => c > bc || (c == bc && u < bu),
                        };
                        if c >= threshold && better {
                            best = Some((c, u));
                        }
                    }
                }
                for &w in &group {
                    for u in self.candidates(w).collect::<Vec<_>>() {
                        count[u] = 0;
                    }
                }
                let Some((_, u)) = best else { break };
                for &w in &group {
                    if self.g.has_edge(w, u) {
                        pending[w] = false;
                        self.attach(w, u);
                    }
                }
            }
        }
    }

    fn assign_layer(&mut self, upper: &[NodeId], lower: &[NodeId], count: &mut [usize]) {
        let mut pending = vec![false; self.g.node_count()];
        for &w in lower {
            pending[w] = true;
        }
        self.merge_phase(&mut pending, lower, 2, |b, w| b.rank2[w], count);
        let x = self.x as usize;
        self.merge_phase(&mut pending, lower, x, |b, w| b.rankx[w], count);
        for &w in lower {
            if pending[w] {
                let u = self.candidates(w).next().expect("BFS layer has a previous-layer neighbor");
                self.attach(w, u);
            }
        }
        for &u in upper {
            self.refresh(u);
        }
    }

    /// Single reparentings of witness members, plus the move that gives the
    /// overloaded parent the whole witness set.
    fn candidate_moves(&self, w: &Witness) -> Vec<Vec<(NodeId, NodeId)>> {
        let mut out = vec![w.offenders.iter().map(|&c| (c, w.node)).collect::<Vec<_>>()];
        for &c in &w.offenders {
            for u in self.candidates(c) {
                if self.parent[c] != Some(u) {
                    out.push(vec![(c, u)]);
                }
            }
        }
        out
    }

    fn repair_layer(
        &mut self,
        k: usize,
        lower: &[NodeId],
        budget: &mut usize,
        stats: &mut BuildStats,
        scratch: &mut Scratch,
    ) -> Result<(), SgstError> {
        let mut current = self.excess(k, lower, scratch);
        let mut iterations = 0;
        while current > 0 {
            let w = self.witness(k, lower, scratch).expect("positive excess has a witness");
            if *budget == 0 {
                return Err(SgstError::ConstructionFailed {
                    iterations,
                    violation: w.to_string(),
                });
            }
            *budget -= 1;
            iterations += 1;

            let mut best: Option<(usize, usize)> = None;
            let moves = self.candidate_moves(&w);
            for (i, m) in moves.iter().enumerate() {
                let undo = self.apply(m);
                let e = self.excess(k, lower, scratch);
                self.revert(undo);
                if best.is_none_or(|(be, _)| e < be) {
                    best = Some((e, i));
                }
            }
            let (e, i) = best.expect("the merge move is always a candidate");
            // Without an improving move, merge the whole witness set; it always
            // clears the witnessed overload even if it shifts trouble elsewhere.
            let i = if e < current { i } else { 0 };
            if i == 0 {
                stats.merge_moves += 1;
            }
            self.apply(&moves[i]);
            stats.repair_moves += 1;
            current = self.excess(k, lower, scratch);
        }
        Ok(())
    }
}

/// Builds an SGST rooted at `source` that passes
/// [`verify_sgst`](super::verify_sgst). Node ids break ties, so the result is
/// deterministic.
pub fn build_sgst(g: &MeshGraph, source: NodeId, x: u32) -> Result<Sgst, SgstError> {
    build_sgst_with_stats(g, source, x).map(|(s, _)| s)
}

pub fn build_sgst_with_stats(
    g: &MeshGraph,
    source: NodeId,
    x: u32,
) -> Result<(Sgst, BuildStats), SgstError> {
    if x < 2 {
        return Err(RankError::ThresholdTooSmall(x).into());
    }
    let layering = bfs_layering(g, source)?;
    let n = g.node_count();
    let mut b = Builder {
        g,
        layer_of: &layering.layer_of,
        x,
        parent: vec![None; n],
        kids: vec![Vec::new(); n],
        rank2: vec![1; n],
        rankx: vec![1; n],
        class: vec![TxClass::Root; n],
    };
    let mut scratch = Scratch::new(n);
    let mut count = vec![0usize; n];
    let mut budget = REPAIR_ITERATIONS_PER_NODE * n;
    let mut stats = BuildStats::default();
    for k in (0..layering.depth()).rev() {
        let (upper, lower) = (&layering.layers[k], &layering.layers[k + 1]);
        b.assign_layer(upper, lower, &mut count);
        b.repair_layer(k + 1, lower, &mut budget, &mut stats, &mut scratch)?;
    }
    let ranked = rank_tree(&b.parent, x)?;
    debug_assert_eq!(ranked.rank2, b.rank2);
    debug_assert_eq!(ranked.rankx, b.rankx);
    let sgst = Sgst::assemble(layering, ranked);
    Ok((sgst, stats))
}
