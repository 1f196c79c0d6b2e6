use serde::{Deserialize, Serialize};

use super::contract::{contract_supernodes, Contraction};
use super::decay::{decay_decide, DecayClock};
use crate::graph::{MeshGraph, NodeId};
use crate::rng::CoinStream;
use crate::sgst::{ceil_log, Sgst};
use crate::sim::{Payload, Protocol, RoundOutcome, SimError, SlotKind, Transmission};

/// Block size `max(1, ceil(log2 ceil(log2 n)))`.
pub fn default_block_size(n: usize) -> u32 {
    ceil_log(ceil_log(n, 2).max(1) as usize, 2).max(1)
}

pub const PHASE_LAYOUT: [&str; 9] = [
    "fast", "fast", "fast", "slow", "slow", "slow", "super_slow", "super_slow", "super_slow",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobustExport {
    pub protocol: String,
    pub n: usize,
    pub source: NodeId,
    pub x: u32,
    pub rmax2: u32,
    pub block_size: u32,
    pub c_mult: u32,
    /// Fast rounds per superround, `c_mult * block_size`.
    pub superround_fast_rounds: u32,
    /// Superround modulus for block activation, `9 rmax2`.
    pub superround_modulus: u64,
    pub phase_layout: Vec<String>,
    pub slow_decay_len: u32,
    pub super_slow_decay_len: u32,
    pub blocks: usize,
    pub max_contracted_level: u32,
    pub barriers: usize,
    pub connectors: usize,
}

/// Attempts to cross an active block within one superround.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TransitStats {
    pub attempts: u64,
    pub failures: u64,
}

impl TransitStats {
    pub fn failure_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.failures as f64 / self.attempts as f64
        }
    }
}

#[derive(Clone, Debug)]
pub struct RobustSchedule<'a> {
    graph: &'a MeshGraph,
    sgst: &'a Sgst,
    contraction: Contraction,
    c_mult: u32,
    superround: u64,
    modulus: u64,
    blocks_by_residue: Vec<Vec<usize>>,
    slow_parent: Vec<bool>,
    slow_clock: DecayClock,
    ss_clock: DecayClock,
}

impl<'a> RobustSchedule<'a> {
    pub fn new(graph: &'a MeshGraph, sgst: &'a Sgst, block_size: u32, c_mult: u32) -> Self {
        let n = graph.node_count();
        let contraction = contract_supernodes(sgst, block_size);
        let modulus = 9 * sgst.rmax2() as u64;
        let mut blocks_by_residue = vec![Vec::new(); modulus as usize];
        for (id, b) in contraction.blocks.iter().enumerate() {
            if b.members.iter().any(|&m| sgst.fast_child(m).is_some()) {
                let r = (b.level as u64 + 9 * b.rank as u64) % modulus;
                blocks_by_residue[r as usize].push(id);
            }
        }
        Self {
            graph,
            sgst,
            contraction,
            c_mult,
            superround: c_mult as u64 * block_size as u64,
            modulus,
            blocks_by_residue,
            slow_parent: (0..n).map(|v| !sgst.slow_children(v).is_empty()).collect(),
            slow_clock: DecayClock::new(ceil_log(sgst.x() as usize, 2) + 1),
            ss_clock: DecayClock::for_nodes(n),
        }
    }

    pub fn contraction(&self) -> &Contraction {
        &self.contraction
    }

    pub fn graph(&self) -> &'a MeshGraph {
        self.graph
    }

    pub fn sgst(&self) -> &'a Sgst {
        self.sgst
    }

    pub fn export(&self) -> RobustExport {
        RobustExport {
            protocol: "robust".into(),
            n: self.graph.node_count(),
            source: self.sgst.source(),
            x: self.sgst.x(),
            rmax2: self.sgst.rmax2(),
            block_size: self.contraction.block_size,
            c_mult: self.c_mult,
            superround_fast_rounds: self.superround as u32,
            superround_modulus: self.modulus,
            phase_layout: PHASE_LAYOUT.iter().map(|s| s.to_string()).collect(),
            slow_decay_len: self.slow_clock.phase_len(),
            super_slow_decay_len: self.ss_clock.phase_len(),
            blocks: self.contraction.blocks.len(),
            max_contracted_level: self.contraction.max_level(),
            barriers: self.contraction.barriers.len(),
            connectors: self.contraction.connectors.len(),
        }
    }

    pub fn start(&self) -> RobustState<'_, 'a> {
        let n = self.graph.node_count();
        let depth = self.sgst.layering.layers.len();
        let mut st = RobustState {
            sched: self,
            informed: vec![false; n],
            by_layer: vec![Vec::new(); depth],
            slow_by_layer: vec![Vec::new(); depth],
            watching: Vec::new(),
            stats: TransitStats::default(),
        };
        st.mark(self.sgst.source());
        st
    }
}

/// Per-trial state of the robust schedule.
#[derive(Clone, Debug)]
pub struct RobustState<'s, 'a> {
    sched: &'s RobustSchedule<'a>,
    informed: Vec<bool>,
    by_layer: Vec<Vec<NodeId>>,
    slow_by_layer: Vec<Vec<NodeId>>,
    /// Blocks entered at the start of the current superround.
    watching: Vec<usize>,
    stats: TransitStats,
}

impl RobustState<'_, '_> {
    pub fn is_informed(&self, v: NodeId) -> bool {
        self.informed[v]
    }

    /// Marks `v` informed; returns whether it was new.
    pub fn mark(&mut self, v: NodeId) -> bool {
        if self.informed[v] {
            return false;
        }
        self.informed[v] = true;
        let l = self.sched.sgst.layer(v);
        self.by_layer[l].push(v);
        if self.sched.slow_parent[v] {
            self.slow_by_layer[l].push(v);
        }
        true
    }

    pub fn transit_stats(&self) -> TransitStats {
        self.stats
    }

    fn crossed(&self, b: usize) -> bool {
        let block = &self.sched.contraction.blocks[b];
        block.members.iter().all(|&m| self.informed[m])
            && block.exit.is_none_or(|e| self.informed[e])
    }

    /// Index of fast round `t`; meaningful when `t mod 9 < 3`.
    fn fast_clock(t: u64) -> u64 {
        3 * (t / 9) + t % 9
    }

    /// Transmitters for round `t`, all carrying [`Payload::Source`].
    pub fn decide_nodes(&mut self, t: u64, coins: &CoinStream, out: &mut Vec<Transmission>) {
        let sc = self.sched;
        let phase = t % 9;
        let sub = (phase % 3) as usize;
        let cycle = t / 9;
        match phase / 3 {
            0 => {
                let fc = Self::fast_clock(t);
                let tau = fc / sc.superround;
                let active = &sc.blocks_by_residue[(tau % sc.modulus) as usize];
                if fc % sc.superround == 0 {
                    self.watching.clear();
                    for &b in active {
                        let head = sc.contraction.blocks[b].members[0];
                        if self.informed[head] && !self.crossed(b) {
                            self.watching.push(b);
                        }
                    }
                }
                for &b in active {
                    for &v in &sc.contraction.blocks[b].members {
                        if self.informed[v]
                            && sc.sgst.fast_child(v).is_some()
                            && sc.sgst.layer(v) as u64 % 3 == fc % 3
                        {
                            out.push(Transmission::new(v, Payload::Source, SlotKind::Fast));
                        }
                    }
                }
            }
            1 => {
                let rip = sc.slow_clock.round_in_phase(cycle + 1);
                for l in (sub..self.slow_by_layer.len()).step_by(3) {
                    decay_decide(self.slow_by_layer[l].iter().copied(), rip, coins, t, |v| {
                        out.push(Transmission::new(v, Payload::Source, SlotKind::Decay))
                    });
                }
            }
            _ => {
                let rip = sc.ss_clock.round_in_phase(cycle + 1);
                for l in (sub..self.by_layer.len()).step_by(3) {
                    decay_decide(self.by_layer[l].iter().copied(), rip, coins, t, |v| {
                        out.push(Transmission::new(v, Payload::Source, SlotKind::SuperSlow))
                    });
                }
            }
        }
    }

    /// Closes transit bookkeeping at the last fast round of a superround.
    pub fn end_round(&mut self, t: u64) {
        if t % 9 >= 3 {
            return;
        }
        let fc = Self::fast_clock(t);
        if fc % self.sched.superround != self.sched.superround - 1 {
            return;
        }
        let watching = std::mem::take(&mut self.watching);
        for &b in &watching {
            self.stats.attempts += 1;
            if !self.crossed(b) {
                self.stats.failures += 1;
            }
        }
    }
}

impl Protocol for RobustState<'_, '_> {
    fn initially_complete(&self) -> Vec<NodeId> {
        vec![self.sched.sgst.source()]
    }

    fn can_transmit(&self, v: NodeId) -> bool {
        self.informed[v]
    }

    fn decide(&mut self, round: u64, coins: &CoinStream, out: &mut Vec<Transmission>) {
        self.decide_nodes(round, coins, out);
    }

    fn deliver(
        &mut self,
        outcome: &RoundOutcome,
        _coins: &CoinStream,
        completed: &mut Vec<NodeId>,
    ) -> Result<(), SimError> {
        for (v, _) in outcome.messages() {
            if self.mark(v) {
                completed.push(v);
            }
        }
        self.end_round(outcome.round);
        Ok(())
    }
}
