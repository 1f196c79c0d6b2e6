use std::fmt;

use serde::Serialize;

use super::{rank_tree, Sgst, TxClass};
use crate::graph::{bfs_layering, MeshGraph, NodeId};

/// The checked tree properties. The tree is rooted at the broadcast source,
/// so the first property asserts a BFS spanning tree from that source rather
/// than from the graph center.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    BfsSpanningTree,
    Ranking,
    FastCollisionFree,
    SlowCompetition,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Property::BfsSpanningTree => "(1) BFS spanning tree from the source",
            Property::Ranking => "(2) ranks and classes follow the ranking procedure",
            Property::FastCollisionFree => "(3) fast sets reach their parents collision-free",
            Property::SlowCompetition => "(4) each parent sees at most x-1 slow competitors",
        };
        f.write_str(s)
    }
}

/// A concrete counterexample.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub layer: usize,
    pub rank2: u32,
    /// Threshold-`x` rank of the slow class; `None` for fast-set witnesses.
    pub rankx: Option<u32>,
    /// The parent whose neighborhood is overloaded (or the offending node for
    /// structural failures).
    pub node: NodeId,
    /// The members of the set adjacent to `node`.
    pub offenders: Vec<NodeId>,
    pub detail: String,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "layer {} rank2 {}{} at node {}: {:?} ({})",
            self.layer,
            self.rank2,
            self.rankx.map(|r| format!(" rankx {r}")).unwrap_or_default(),
            self.node,
            self.offenders,
            self.detail
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PropertyCheck {
    pub property: Property,
    pub passed: bool,
    /// Total excess over the allowed neighbor count, summed over all sets.
    pub violations: usize,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<PropertyCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, p: Property) -> &PropertyCheck {
        self.checks.iter().find(|c| c.property == p).expect("all properties are checked")
    }

    pub fn first_failure(&self) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            write!(f, "{} {}", if c.passed { "PASS" } else { "FAIL" }, c.property)?;
            if let Some(w) = &c.witness {
                write!(f, ": {w}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Reusable marker arrays for neighborhood counting.
pub(crate) struct Scratch {
    member: Vec<u32>,
    seen_parent: Vec<u32>,
    stamp: u32,
    order: Vec<NodeId>,
}

impl Scratch {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            member: vec![0; n],
            seen_parent: vec![0; n],
            stamp: 0,
            order: Vec::new(),
        }
    }

    fn next_stamp(&mut self) -> u32 {
        self.stamp += 1;
        self.stamp
    }
}

/// Per-node facts needed to check properties (3) and (4) on one layer.
pub(crate) trait LayerView {
    fn parent(&self, v: NodeId) -> NodeId;
    fn class(&self, v: NodeId) -> TxClass;
    fn rank2(&self, v: NodeId) -> u32;
    fn rankx(&self, v: NodeId) -> u32;
}

/// Counts violations of (3) and (4) among the children in `layer_nodes`.
/// Returns `(fast_excess, slow_excess, first fast witness, first slow witness)`.
pub(crate) fn layer_violations(
    g: &MeshGraph,
    layer: usize,
    layer_nodes: &[NodeId],
    view: &impl LayerView,
    x: u32,
    scratch: &mut Scratch,
    want_witness: bool,
) -> (usize, usize, Option<Witness>, Option<Witness>) {
    let mut order = std::mem::take(&mut scratch.order);
    order.clear();
    order.extend(
        layer_nodes
            .iter()
            .copied()
            .filter(|&v| matches!(view.class(v), TxClass::Fast | TxClass::Slow)),
    );
    let key = |v: NodeId| {
        let c = view.class(v);
        let ix = if c == TxClass::Slow { view.rankx(v) } else { 0 };
        (c == TxClass::Slow, view.rank2(v), ix)
    };
    order.sort_unstable_by_key(|&v| (key(v), v));

    let (mut fast_excess, mut slow_excess) = (0usize, 0usize);
    let (mut fast_w, mut slow_w) = (None, None);
    let mut start = 0;
    while start < order.len() {
        let k = key(order[start]);
        let end = start + order[start..].iter().take_while(|&&v| key(v) == k).count();
        let group = &order[start..end];
        let gstamp = scratch.next_stamp();
        for &v in group {
            scratch.member[v] = gstamp;
        }
        let (is_slow, rank2, rankx) = k;
        let allowed = if is_slow { x as usize - 1 } else { 1 };
        for &v in group {
            let u = view.parent(v);
            if scratch.seen_parent[u] == gstamp {
                continue;
            }
            scratch.seen_parent[u] = gstamp;
            let count = g
                .neighbors(u)
                .iter()
                .filter(|&&w| scratch.member[w] == gstamp)
                .count();
            if count > allowed {
                let excess = count - allowed;
                let slot = if is_slow {
                    slow_excess += excess;
                    &mut slow_w
                } else {
                    fast_excess += excess;
                    &mut fast_w
                };
                if want_witness && slot.is_none() {
                    let offenders = g
                        .neighbors(u)
                        .iter()
                        .copied()
                        .filter(|&w| scratch.member[w] == gstamp)
                        .collect();
                    *slot = Some(Witness {
                        layer,
                        rank2,
                        rankx: is_slow.then_some(rankx),
                        node: u,
                        offenders,
                        detail: format!("{count} neighbors in the set, at most {allowed} allowed"),
                    });
                }
            }
        }
        start = end;
    }
    scratch.order = order;
    (fast_excess, slow_excess, fast_w, slow_w)
}

impl LayerView for Sgst {
    fn parent(&self, v: NodeId) -> NodeId {
        self.ranked.parent_of[v].expect("non-root nodes have parents")
    }
    fn class(&self, v: NodeId) -> TxClass {
        self.class_of[v]
    }
    fn rank2(&self, v: NodeId) -> u32 {
        self.ranked.rank2[v]
    }
    fn rankx(&self, v: NodeId) -> u32 {
        self.ranked.rankx[v]
    }
}

fn structural_check(g: &MeshGraph, s: &Sgst) -> PropertyCheck {
    let fail = |node: NodeId, detail: String| PropertyCheck {
        property: Property::BfsSpanningTree,
        passed: false,
        violations: 1,
        witness: Some(Witness {
            layer: s.layering.layer_of.get(node).copied().unwrap_or(0),
            rank2: 0,
            rankx: None,
            node,
            offenders: vec![node],
            detail,
        }),
    };
    if s.node_count() != g.node_count() {
        return fail(0, "tree does not span the graph".into());
    }
    let layering = match bfs_layering(g, s.source()) {
        Ok(l) => l,
        Err(e) => return fail(s.source(), e.to_string()),
    };
    if layering != s.layering {
        return fail(s.source(), "stored layering is not the BFS layering of the source".into());
    }
    for v in 0..g.node_count() {
        match s.ranked.parent_of[v] {
            None if v == s.source() => {}
            None => return fail(v, "missing parent".into()),
            Some(_) if v == s.source() => return fail(v, "source has a parent".into()),
            Some(p) => {
                if !g.has_edge(v, p) || layering.layer_of[p] + 1 != layering.layer_of[v] {
                    return fail(v, format!("parent {p} is not a previous-layer neighbor"));
                }
            }
        }
    }
    PropertyCheck {
        property: Property::BfsSpanningTree,
        passed: true,
        violations: 0,
        witness: None,
    }
}

fn ranking_check(s: &Sgst) -> PropertyCheck {
    let mut check = PropertyCheck {
        property: Property::Ranking,
        passed: true,
        violations: 0,
        witness: None,
    };
    let mut flag = |v: NodeId, detail: String| {
        check.violations += 1;
        if check.passed {
            check.passed = false;
            check.witness = Some(Witness {
                layer: s.layering.layer_of[v],
                rank2: s.ranked.rank2[v],
                rankx: Some(s.ranked.rankx[v]),
                node: v,
                offenders: vec![v],
                detail,
            });
        }
    };
    match rank_tree(&s.ranked.parent_of, s.x()) {
        Err(e) => flag(s.source(), e.to_string()),
        Ok(fresh) => {
            for v in 0..s.node_count() {
                if fresh.rank2[v] != s.ranked.rank2[v] || fresh.rankx[v] != s.ranked.rankx[v] {
                    flag(v, "stored rank differs from recomputed rank".into());
                }
            }
            for v in 0..s.node_count() {
                let expected = match fresh.parent_of[v] {
                    None => TxClass::Root,
                    Some(p) => TxClass::classify(
                        fresh.rank2[v],
                        fresh.rank2[p],
                        fresh.rankx[v],
                        fresh.rankx[p],
                    ),
                };
                if expected != s.class_of[v] {
                    flag(v, format!("class {:?}, expected {:?}", s.class_of[v], expected));
                }
            }
        }
    }
    check
}

/// Checks all four tree properties and reports a witness for each failure.
pub fn verify_sgst(g: &MeshGraph, s: &Sgst) -> ValidationReport {
    let structural = structural_check(g, s);
    let ranking = ranking_check(s);
    let mut fast = PropertyCheck {
        property: Property::FastCollisionFree,
        passed: true,
        violations: 0,
        witness: None,
    };
    let mut slow = PropertyCheck {
        property: Property::SlowCompetition,
        ..fast.clone()
    };
    if structural.passed {
        let mut scratch = Scratch::new(g.node_count());
        for (k, nodes) in s.layering.layers.iter().enumerate().skip(1) {
            let (fe, se, fw, sw) = layer_violations(g, k, nodes, s, s.x(), &mut scratch, true);
            fast.violations += fe;
            slow.violations += se;
            if fast.witness.is_none() {
                fast.witness = fw;
            }
            if slow.witness.is_none() {
                slow.witness = sw;
            }
        }
        fast.passed = fast.violations == 0;
        slow.passed = slow.violations == 0;
    }
    ValidationReport {
        checks: vec![structural, ranking, fast, slow],
    }
}
