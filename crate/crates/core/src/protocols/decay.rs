use crate::graph::{MeshGraph, NodeId};
use crate::rng::{CoinStream, Purpose};
use crate::sgst::ceil_log;
use crate::sim::{Payload, Protocol, RoundOutcome, SimError, SlotKind, Transmission};

/// Phase structure of Decay: in round `i` of a phase of `phase_len` rounds,
/// each participant transmits with probability `2^-i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecayClock {
    phase_len: u32,
}

impl DecayClock {
    pub fn new(phase_len: u32) -> Self {
        assert!(phase_len >= 1, "phase length must be positive");
        Self { phase_len }
    }

    /// `ceil(log2 n) + 1` levels.
    pub fn for_nodes(n: usize) -> Self {
        Self::new(ceil_log(n, 2) + 1)
    }

    pub fn phase_len(&self) -> u32 {
        self.phase_len
    }

    /// Round-in-phase `1..=phase_len` for the 1-based `step`.
    pub fn round_in_phase(&self, step: u64) -> u32 {
        ((step.max(1) - 1) % self.phase_len as u64) as u32 + 1
    }

    pub fn probability(round_in_phase: u32) -> f64 {
        0.5f64.powi(round_in_phase as i32)
    }
}

/// Independent `2^-i` coins for each participant. The coin for `v` is keyed
/// by `(v, round)`, so the draw does not depend on who else participates.
pub fn decay_decide(
    participants: impl IntoIterator<Item = NodeId>,
    round_in_phase: u32,
    coins: &CoinStream,
    round: u64,
    mut emit: impl FnMut(NodeId),
) {
    let prob = DecayClock::probability(round_in_phase);
    for v in participants {
        if coins.bernoulli(Purpose::Transmit, v, round, prob) {
            emit(v);
        }
    }
}

/// Per-phase progress counts: how many (phase, node) pairs started with the
/// node uninformed but adjacent to an informed node, and how many of those
/// ended the phase informed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PhaseStats {
    pub samples: u64,
    pub successes: u64,
}

impl PhaseStats {
    pub fn rate(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.successes as f64 / self.samples as f64
        }
    }
}

/// Decay broadcast from a single source: every informed node runs Decay.
#[derive(Clone, Debug)]
pub struct DecayState<'g> {
    graph: &'g MeshGraph,
    source: NodeId,
    clock: DecayClock,
    informed: Vec<bool>,
    informed_list: Vec<NodeId>,
    track_phases: bool,
    pending: Vec<NodeId>,
    stats: PhaseStats,
}

impl<'g> DecayState<'g> {
    pub fn new(graph: &'g MeshGraph, source: NodeId, clock: DecayClock) -> Self {
        let mut informed = vec![false; graph.node_count()];
        informed[source] = true;
        Self {
            graph,
            source,
            clock,
            informed,
            informed_list: vec![source],
            track_phases: false,
            pending: Vec::new(),
            stats: PhaseStats::default(),
        }
    }

    /// Records [`PhaseStats`] while running.
    pub fn with_phase_tracking(mut self) -> Self {
        self.track_phases = true;
        self
    }

    pub fn clock(&self) -> DecayClock {
        self.clock
    }

    /// Completed phases only, plus a cut-off final phase if every node it
    /// sampled is already informed.
    pub fn phase_stats(&self) -> PhaseStats {
        let mut s = self.stats;
        if self.pending.iter().all(|&v| self.informed[v]) {
            s.samples += self.pending.len() as u64;
            s.successes += self.pending.len() as u64;
        }
        s
    }

    pub fn is_informed(&self, v: NodeId) -> bool {
        self.informed[v]
    }

    fn close_phase(&mut self) {
        for &v in &self.pending {
            self.stats.samples += 1;
            if self.informed[v] {
                self.stats.successes += 1;
            }
        }
        self.pending.clear();
    }

    fn open_phase(&mut self) {
        let mut seen = vec![false; self.graph.node_count()];
        for &u in &self.informed_list {
            for &v in self.graph.neighbors(u) {
                if !self.informed[v] && !seen[v] {
                    seen[v] = true;
                    self.pending.push(v);
                }
            }
        }
    }
}

impl Protocol for DecayState<'_> {
    fn initially_complete(&self) -> Vec<NodeId> {
        vec![self.source]
    }

    fn can_transmit(&self, v: NodeId) -> bool {
        self.informed[v]
    }

    fn decide(&mut self, round: u64, coins: &CoinStream, out: &mut Vec<Transmission>) {
        let i = self.clock.round_in_phase(round);
        if self.track_phases && i == 1 {
            self.close_phase();
            self.open_phase();
        }
        decay_decide(self.informed_list.iter().copied(), i, coins, round, |v| {
            out.push(Transmission::new(v, Payload::Source, SlotKind::Decay))
        });
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
                self.informed_list.push(v);
                completed.push(v);
            }
        }
        if self.track_phases && self.clock.round_in_phase(outcome.round) == self.clock.phase_len() {
            self.close_phase();
        }
        Ok(())
    }
}
