use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::decay::{decay_decide, DecayClock};
use crate::graph::{MeshGraph, NodeId};
use crate::rng::CoinStream;
use crate::sgst::Sgst;
use crate::sim::{Payload, Protocol, RoundOutcome, SimError, SlotKind, Transmission};

/// Deterministic slot kinds in an exported table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotClass {
    Fast,
    Slow,
}

/// Node transmits in round `t` when `t mod modulus == residue`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotEntry {
    pub modulus: u64,
    pub residue: u64,
    pub kind: SlotClass,
}

/// Super-slow rounds: informed nodes of layer `i` run Decay on rounds
/// `t ≡ i + offset (mod modulus)`, with round-in-phase `(t div modulus) mod
/// phase_len + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuperSlowParams {
    pub modulus: u64,
    pub offset: u64,
    pub phase_len: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultlessExport {
    pub protocol: String,
    pub n: usize,
    pub source: NodeId,
    pub x: u32,
    pub rmax2: u32,
    pub layer: Vec<usize>,
    pub super_slow: SuperSlowParams,
    pub slots: BTreeMap<NodeId, Vec<SlotEntry>>,
}

impl FaultlessExport {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("export is always serializable")
    }

    /// The deterministic slot `v` holds in round `t`, read from the table.
    pub fn slot_at(&self, v: NodeId, t: u64) -> Option<SlotClass> {
        self.slots
            .get(&v)?
            .iter()
            .find(|e| t % e.modulus == e.residue)
            .map(|e| e.kind)
    }
}

/// Precomputed slot structure of the faultless schedule; shared read-only by
/// all trials.
#[derive(Clone, Debug)]
pub struct FaultlessSchedule<'a> {
    graph: &'a MeshGraph,
    sgst: &'a Sgst,
    fast_modulus: u64,
    fast_by_residue: Vec<Vec<NodeId>>,
    fast_target: Vec<Option<NodeId>>,
    slow_color: Vec<Option<u32>>,
    layer_colors: Vec<u32>,
    slow_groups: Vec<Vec<Vec<NodeId>>>,
    ss_clock: DecayClock,
}

const NINE: u64 = 9;

impl<'a> FaultlessSchedule<'a> {
    pub fn new(graph: &'a MeshGraph, sgst: &'a Sgst) -> Self {
        let n = graph.node_count();
        let fast_modulus = NINE * sgst.rmax2() as u64;
        let mut fast_by_residue = vec![Vec::new(); fast_modulus as usize];
        let fast_target: Vec<Option<NodeId>> = (0..n).map(|v| sgst.fast_child(v)).collect();
        for v in 0..n {
            if fast_target[v].is_some() {
                fast_by_residue[Self::fast_residue(sgst, v, fast_modulus) as usize].push(v);
            }
        }
        let (slow_color, layer_colors) = color_slow_parents(graph, sgst);
        let mut slow_groups: Vec<Vec<Vec<NodeId>>> =
            layer_colors.iter().map(|&m| vec![Vec::new(); m as usize]).collect();
        for v in 0..n {
            if let Some(c) = slow_color[v] {
                slow_groups[sgst.layer(v)][c as usize].push(v);
            }
        }
        Self {
            graph,
            sgst,
            fast_modulus,
            fast_by_residue,
            fast_target,
            slow_color,
            layer_colors,
            slow_groups,
            ss_clock: DecayClock::for_nodes(n),
        }
    }

    fn fast_residue(sgst: &Sgst, v: NodeId, modulus: u64) -> u64 {
        (sgst.layer(v) as u64 + NINE * sgst.rank2(v) as u64) % modulus
    }

    pub fn graph(&self) -> &'a MeshGraph {
        self.graph
    }

    pub fn sgst(&self) -> &'a Sgst {
        self.sgst
    }

    /// Number of slow colors used on `layer`.
    pub fn slow_colors(&self, layer: usize) -> u32 {
        self.layer_colors.get(layer).copied().unwrap_or(0)
    }

    /// The deterministic slot `v` holds in round `t`, from the congruences.
    pub fn deterministic_slot(&self, v: NodeId, t: u64) -> Option<SlotClass> {
        let layer = self.sgst.layer(v) as u64;
        if self.fast_target[v].is_some()
            && t % self.fast_modulus == Self::fast_residue(self.sgst, v, self.fast_modulus)
        {
            return Some(SlotClass::Fast);
        }
        if let Some(c) = self.slow_color[v] {
            let m = self.layer_colors[layer as usize] as u64;
            if t % (NINE * m) == NINE * c as u64 + (layer + 3) % NINE {
                return Some(SlotClass::Slow);
            }
        }
        None
    }

    pub fn export(&self) -> FaultlessExport {
        let n = self.graph.node_count();
        let mut slots = BTreeMap::new();
        for v in 0..n {
            let layer = self.sgst.layer(v) as u64;
            let mut entries = Vec::new();
            if self.fast_target[v].is_some() {
                entries.push(SlotEntry {
                    modulus: self.fast_modulus,
                    residue: Self::fast_residue(self.sgst, v, self.fast_modulus),
                    kind: SlotClass::Fast,
                });
            }
            if let Some(c) = self.slow_color[v] {
                let m = self.layer_colors[layer as usize] as u64;
                entries.push(SlotEntry {
                    modulus: NINE * m,
                    residue: NINE * c as u64 + (layer + 3) % NINE,
                    kind: SlotClass::Slow,
                });
            }
            slots.insert(v, entries);
        }
        FaultlessExport {
            protocol: "faultless".into(),
            n,
            source: self.sgst.source(),
            x: self.sgst.x(),
            rmax2: self.sgst.rmax2(),
            layer: self.sgst.layering.layer_of.clone(),
            super_slow: SuperSlowParams {
                modulus: NINE,
                offset: 6,
                phase_len: self.ss_clock.phase_len(),
            },
            slots,
        }
    }

    pub fn start(&self) -> FaultlessState<'_, 'a> {
        let n = self.graph.node_count();
        let source = self.sgst.source();
        let mut informed = vec![false; n];
        informed[source] = true;
        let mut informed_by_layer = vec![Vec::new(); self.sgst.layering.layers.len()];
        informed_by_layer[0].push(source);
        FaultlessState {
            sched: self,
            informed,
            informed_by_layer,
        }
    }
}

/// Greedy coloring, in node-id order, of the layer's slow parents: two
/// parents conflict when one is adjacent to a slow child of the other.
/// Parents of one color can transmit together without colliding at any
/// slow child.
fn color_slow_parents(g: &MeshGraph, s: &Sgst) -> (Vec<Option<u32>>, Vec<u32>) {
    let n = g.node_count();
    let mut color: Vec<Option<u32>> = vec![None; n];
    let mut per_layer = Vec::with_capacity(s.layering.layers.len());
    let mut conflicts: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for (i, nodes) in s.layering.layers.iter().enumerate() {
        let mut parents: Vec<NodeId> = nodes
            .iter()
            .copied()
            .filter(|&v| !s.slow_children(v).is_empty())
            .collect();
        parents.sort_unstable();
        for &u in &parents {
            for &w in s.slow_children(u) {
                for &y in g.neighbors(w) {
                    if y != u && s.layer(y) == i && !s.slow_children(y).is_empty() {
                        conflicts[u].push(y);
                        conflicts[y].push(u);
                    }
                }
            }
        }
        let mut used = 0u32;
        let mut taken: Vec<bool> = Vec::new();
        for &u in &parents {
            taken.clear();
            taken.resize(used as usize + 1, false);
            for &y in &conflicts[u] {
                if let Some(c) = color[y] {
                    taken[c as usize] = true;
                }
            }
            let c = taken.iter().position(|&t| !t).unwrap() as u32;
            color[u] = Some(c);
            used = used.max(c + 1);
        }
        per_layer.push(used);
    }
    (color, per_layer)
}

/// Per-trial state of the faultless schedule.
#[derive(Clone, Debug)]
pub struct FaultlessState<'s, 'a> {
    sched: &'s FaultlessSchedule<'a>,
    informed: Vec<bool>,
    informed_by_layer: Vec<Vec<NodeId>>,
}

impl Protocol for FaultlessState<'_, '_> {
    fn initially_complete(&self) -> Vec<NodeId> {
        vec![self.sched.sgst.source()]
    }

    fn can_transmit(&self, v: NodeId) -> bool {
        self.informed[v]
    }

    fn decide(&mut self, t: u64, coins: &CoinStream, out: &mut Vec<Transmission>) {
        let sc = self.sched;
        for &v in &sc.fast_by_residue[(t % sc.fast_modulus) as usize] {
            if self.informed[v] {
                out.push(Transmission::new(v, Payload::Source, SlotKind::Fast));
            }
        }
        let phase = (t % NINE) as usize;
        let depth = self.informed_by_layer.len();
        let slot = t / NINE;
        for i in ((phase + 6) % 9..depth).step_by(9) {
            let m = sc.layer_colors[i];
            if m == 0 {
                continue;
            }
            for &v in &sc.slow_groups[i][(slot % m as u64) as usize] {
                if self.informed[v] {
                    out.push(Transmission::new(v, Payload::Source, SlotKind::Slow));
                }
            }
        }
        let rip = (slot % sc.ss_clock.phase_len() as u64) as u32 + 1;
        for i in ((phase + 3) % 9..depth).step_by(9) {
            decay_decide(self.informed_by_layer[i].iter().copied(), rip, coins, t, |v| {
                out.push(Transmission::new(v, Payload::Source, SlotKind::SuperSlow))
            });
        }
    }

    fn intended_receivers(&self, tx: &Transmission) -> &[NodeId] {
        match tx.slot {
            SlotKind::Fast => self.sched.fast_target[tx.node].as_slice(),
            SlotKind::Slow => self.sched.sgst.slow_children(tx.node),
            _ => &[],
        }
    }

    fn deliver(
        &mut self,
        outcome: &RoundOutcome,
        _coins: &CoinStream,
        completed: &mut Vec<NodeId>,
    ) -> Result<(), SimError> {
        for (v, _) in outcome.messages() {
            if !self.informed[v] {
                self.informed[v] = true;
                self.informed_by_layer[self.sched.sgst.layer(v)].push(v);
                completed.push(v);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_graph;
    use crate::sgst::build_sgst;
    use crate::sim::{run_protocol, SimConfig, TraceLevel};

    fn gen(spec: &str, seed: u64) -> MeshGraph {
        generate_graph(&spec.parse().unwrap(), seed).unwrap()
    }

    #[test]
    fn fast_congruence_example() {
        // Layer 4, rank 2, rmax2 = 3: slots t ≡ 4 + 18 = 22 (mod 27).
        let modulus = 27u64;
        assert_eq!((4 + 9 * 2) % modulus, 22);
    }

    #[test]
    fn path_is_pipelined() {
        let g = gen("path(8)", 0);
        let s = build_sgst(&g, 0, 2).unwrap();
        let sched = FaultlessSchedule::new(&g, &s);
        let cfg = SimConfig {
            strict_slots: true,
            ..SimConfig::default()
        };
        let t = run_protocol(&g, &mut sched.start(), &cfg, TraceLevel::Summary).unwrap();
        assert!(t.success);
        let bound = 7 + 9 * s.rmax2() as u64;
        assert!(t.completion_round.unwrap() <= bound);
        for w in t.informed_round.windows(2).skip(1) {
            assert_eq!(w[1].unwrap(), w[0].unwrap() + 1);
        }
    }

    #[test]
    fn path_export_has_one_fast_entry_per_transmitter() {
        let g = gen("path(8)", 0);
        let s = build_sgst(&g, 0, 2).unwrap();
        let e = FaultlessSchedule::new(&g, &s).export();
        for v in 0..7 {
            assert_eq!(e.slots[&v].len(), 1);
            assert_eq!(e.slots[&v][0].kind, SlotClass::Fast);
            assert_eq!(e.slots[&v][0].modulus, 9 * s.rmax2() as u64);
        }
        assert!(e.slots[&7].is_empty());
    }

    #[test]
    fn export_round_trip_is_idempotent() {
        let g = gen("rand(80,0.08)", 5);
        let s = build_sgst(&g, 0, 3).unwrap();
        let sched = FaultlessSchedule::new(&g, &s);
        let first = sched.export().to_json();
        let back = FaultlessExport::from_json(&first).unwrap();
        assert_eq!(back.to_json(), first);
        for v in 0..80 {
            for t in 1..=400 {
                assert_eq!(back.slot_at(v, t), sched.deterministic_slot(v, t));
            }
        }
    }

    #[test]
    fn decisions_follow_the_table_when_all_informed() {
        let g = gen("rand(60,0.1)", 9);
        let s = build_sgst(&g, 0, 3).unwrap();
        let sched = FaultlessSchedule::new(&g, &s);
        let table = sched.export();
        let mut st = sched.start();
        st.informed.iter_mut().for_each(|b| *b = true);
        let coins = CoinStream::new(0, 0);
        for t in 1..=300 {
            let mut out = Vec::new();
            st.decide(t, &coins, &mut out);
            for v in 0..60 {
                let from_run = out.iter().find(|x| x.node == v && x.slot != SlotKind::SuperSlow).map(|x| match x.slot {
                    SlotKind::Fast => SlotClass::Fast,
                    _ => SlotClass::Slow,
                });
                assert_eq!(from_run, table.slot_at(v, t), "node {v} round {t}");
            }
        }
    }

    #[test]
    fn active_layers_are_three_apart() {
        let g = gen("expander(20,4)", 1);
        let s = build_sgst(&g, 0, 3).unwrap();
        let sched = FaultlessSchedule::new(&g, &s);
        let mut st = sched.start();
        st.informed.iter_mut().for_each(|b| *b = true);
        for l in st.informed_by_layer.iter_mut() {
            l.clear();
        }
        for v in 0..g.node_count() {
            st.informed_by_layer[s.layer(v)].push(v);
        }
        let coins = CoinStream::new(1, 0);
        for t in 1..=200u64 {
            let mut out = Vec::new();
            st.decide(t, &coins, &mut out);
            for x in &out {
                assert_eq!(s.layer(x.node) as u64 % 3, t % 3, "round {t}");
            }
        }
    }

    #[test]
    fn slow_colors_separate_conflicting_parents() {
        let g = gen("rand(120,0.06)", 2);
        let s = build_sgst(&g, 0, 4).unwrap();
        let sched = FaultlessSchedule::new(&g, &s);
        for u in 0..120 {
            let Some(cu) = sched.slow_color[u] else { continue };
            for &w in s.slow_children(u) {
                for &y in g.neighbors(w) {
                    if y != u && s.layer(y) == s.layer(u) {
                        assert_ne!(sched.slow_color[y], Some(cu));
                    }
                }
            }
        }
    }

    #[test]
    fn binary_tree_completes_without_fast_edges() {
        let g = gen("cbt(63)", 0);
        let s = build_sgst(&g, 0, 2).unwrap();
        let sched = FaultlessSchedule::new(&g, &s);
        let cfg = SimConfig {
            strict_slots: true,
            max_rounds: 20_000,
            ..SimConfig::default()
        };
        let t = run_protocol(&g, &mut sched.start(), &cfg, TraceLevel::Summary).unwrap();
        assert!(t.success);
        assert_eq!(t.slot_collisions, 0);
    }
}
