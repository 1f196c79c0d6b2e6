//! Round-synchronous radio simulator.
//!
//! Each round the protocol proposes transmitters, the channel resolves
//! collisions and faults, and the protocol consumes what each node heard.

mod channel;

use std::io::{self, Write};

use thiserror::Error;

use crate::graph::{MeshGraph, NodeId};
use crate::rng::CoinStream;

pub use self::channel::{
    classic_receptions, resolve_round, FaultMode, NoiseCause, NoiseModel, Observed, Payload,
    Reception, Resolver, RoundOutcome, SlotKind, Transmission,
};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("round {round}: node {node}: {reason}")]
    StateViolation {
        round: u64,
        node: NodeId,
        reason: String,
    },
    #[error("round {round}: scheduled transmission from {transmitter} collided at intended receiver {receiver}")]
    SlotCollision {
        round: u64,
        transmitter: NodeId,
        receiver: NodeId,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub p: f64,
    pub delta: f64,
    /// Ranking threshold; `None` selects the default for the graph size.
    pub x: Option<u32>,
    pub c_mult: u32,
    /// Robust block size; `None` selects the default for the graph size.
    pub block_size: Option<u32>,
    pub seed: u64,
    pub max_rounds: u64,
    pub trial_id: u64,
    pub fault_mode: FaultMode,
    /// Abort when a fast or slow slot collides at one of its intended
    /// receivers.
    pub strict_slots: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            p: 0.0,
            delta: 0.1,
            x: None,
            c_mult: 6,
            block_size: None,
            seed: 0,
            max_rounds: 10_000,
            trial_id: 0,
            fault_mode: FaultMode::Both,
            strict_slots: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(SimError::InvalidConfig(format!("p = {} is outside [0, 1]", self.p)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(SimError::InvalidConfig(format!(
                "delta = {} is outside (0, 1)",
                self.delta
            )));
        }
        if self.max_rounds < 1 {
            return Err(SimError::InvalidConfig("max_rounds must be at least 1".into()));
        }
        if self.c_mult < 1 {
            return Err(SimError::InvalidConfig("c_mult must be at least 1".into()));
        }
        if matches!(self.x, Some(x) if x < 2) {
            return Err(SimError::InvalidConfig("x must be at least 2".into()));
        }
        if self.block_size == Some(0) {
            return Err(SimError::InvalidConfig("block size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel {
            p: self.p,
            mode: self.fault_mode,
        }
    }

    pub fn coins(&self) -> CoinStream {
        CoinStream::new(self.seed, self.trial_id)
    }

    pub fn with_trial(&self, trial_id: u64) -> Self {
        Self {
            trial_id,
            ..self.clone()
        }
    }
}

/// Round budget `16 (D + ceil(log2 n)^2)`, plus `16 k ceil(log2 n)` when
/// `k` messages are sent.
pub fn default_max_rounds(n: usize, diameter: usize, k: Option<usize>) -> u64 {
    let lg = crate::sgst::ceil_log(n, 2) as u64;
    let base = 16 * (diameter as u64 + lg * lg);
    base + k.map_or(0, |k| 16 * k as u64 * lg)
}

/// A broadcast protocol as a per-round transmit-decision state machine.
pub trait Protocol {
    /// Nodes that are complete before the first round.
    fn initially_complete(&self) -> Vec<NodeId>;

    /// Whether `v` holds something it may transmit.
    fn can_transmit(&self, v: NodeId) -> bool;

    /// Appends this round's transmissions to `out`. Rounds start at 1.
    fn decide(&mut self, round: u64, coins: &CoinStream, out: &mut Vec<Transmission>);

    /// Receivers a deterministic slot is meant to reach. A collision at any
    /// of them is a schedule defect.
    fn intended_receivers(&self, _tx: &Transmission) -> &[NodeId] {
        &[]
    }

    /// Consumes the round's receptions; pushes nodes that became complete
    /// this round onto `completed`.
    fn deliver(
        &mut self,
        outcome: &RoundOutcome,
        coins: &CoinStream,
        completed: &mut Vec<NodeId>,
    ) -> Result<(), SimError>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TraceLevel {
    #[default]
    Summary,
    Events,
    /// Events plus every [`RoundOutcome`].
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Tx,
    RxMsg,
    RxNoise,
    Informed,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Tx => "TX",
            EventKind::RxMsg => "RX_MSG",
            EventKind::RxNoise => "RX_NOISE",
            EventKind::Informed => "INFORMED",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub round: u64,
    pub node: NodeId,
    pub kind: EventKind,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub trial: u64,
    pub informed_round: Vec<Option<u64>>,
    pub completion_round: Option<u64>,
    pub success: bool,
    pub rounds_run: u64,
    pub transmissions: u64,
    /// Collisions at intended receivers of fast or slow slots.
    pub slot_collisions: u64,
    pub events: Option<Vec<Event>>,
    pub outcomes: Option<Vec<RoundOutcome>>,
}

pub const EVENTS_HEADER: &str = "trial,round,node,event,detail";

impl Trace {
    pub fn write_events_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        for e in self.events.iter().flatten() {
            writeln!(w, "{},{},{},{},{}", self.trial, e.round, e.node, e.kind.as_str(), e.detail)?;
        }
        Ok(())
    }
}

/// Runs `protocol` on `g` until every node is complete or the round budget
/// is spent.
pub fn run_protocol(
    g: &MeshGraph,
    protocol: &mut dyn Protocol,
    cfg: &SimConfig,
    level: TraceLevel,
) -> Result<Trace, SimError> {
    cfg.validate()?;
    let n = g.node_count();
    let coins = cfg.coins();
    let noise = cfg.noise();
    let mut events = (level != TraceLevel::Summary).then(Vec::new);
    let mut outcomes = (level == TraceLevel::Full).then(Vec::new);

    let mut informed_round = vec![None; n];
    let mut done = 0usize;
    for v in protocol.initially_complete() {
        if informed_round[v].is_none() {
            informed_round[v] = Some(0);
            done += 1;
            if let Some(ev) = events.as_mut() {
                ev.push(Event {
                    round: 0,
                    node: v,
                    kind: EventKind::Informed,
                    detail: String::new(),
                });
            }
        }
    }

    let mut trace = Trace {
        trial: cfg.trial_id,
        informed_round,
        completion_round: None,
        success: false,
        rounds_run: 0,
        transmissions: 0,
        slot_collisions: 0,
        events: None,
        outcomes: None,
    };
    if done == n {
        trace.completion_round = Some(0);
        trace.success = true;
        trace.events = events;
        trace.outcomes = outcomes;
        return Ok(trace);
    }

    let mut resolver = Resolver::new(n);
    let mut tx_seen = vec![0u64; n];
    let mut got_msg = vec![0u64; n];
    let mut buf: Vec<Transmission> = Vec::new();
    let mut completed: Vec<NodeId> = Vec::new();

    for round in 1..=cfg.max_rounds {
        buf.clear();
        protocol.decide(round, &coins, &mut buf);
        for t in &buf {
            if t.node >= n || tx_seen[t.node] == round {
                return Err(SimError::StateViolation {
                    round,
                    node: t.node,
                    reason: "duplicate or out-of-range transmitter".into(),
                });
            }
            tx_seen[t.node] = round;
            if !protocol.can_transmit(t.node) {
                return Err(SimError::StateViolation {
                    round,
                    node: t.node,
                    reason: "asked to transmit without holding the message".into(),
                });
            }
        }
        trace.transmissions += buf.len() as u64;
        let outcome = resolver.resolve(g, round, std::mem::take(&mut buf), noise, &coins);

        for t in &outcome.transmitters {
            if !matches!(t.slot, SlotKind::Fast | SlotKind::Slow) {
                continue;
            }
            for &r in protocol.intended_receivers(t) {
                if outcome.reception(r) == Reception::Noise(NoiseCause::Collision) {
                    trace.slot_collisions += 1;
                    if cfg.strict_slots {
                        return Err(SimError::SlotCollision {
                            round,
                            transmitter: t.node,
                            receiver: r,
                        });
                    }
                }
            }
        }
        for (v, _) in outcome.messages() {
            got_msg[v] = round;
        }
        if let Some(ev) = events.as_mut() {
            let mut sorted: Vec<&Transmission> = outcome.transmitters.iter().collect();
            sorted.sort_by_key(|t| t.node);
            for t in sorted {
                ev.push(Event {
                    round,
                    node: t.node,
                    kind: EventKind::Tx,
                    detail: t.payload.tag(),
                });
            }
            for &(v, r) in &outcome.receptions {
                match r {
                    Reception::Message { tx } => ev.push(Event {
                        round,
                        node: v,
                        kind: EventKind::RxMsg,
                        detail: outcome.transmitters[tx].payload.tag(),
                    }),
                    Reception::Noise(_) => ev.push(Event {
                        round,
                        node: v,
                        kind: EventKind::RxNoise,
                        detail: String::new(),
                    }),
                    _ => {}
                }
            }
        }

        completed.clear();
        protocol.deliver(&outcome, &coins, &mut completed)?;
        completed.sort_unstable();
        completed.dedup();
        for &v in &completed {
            if trace.informed_round[v].is_some() {
                continue;
            }
            if got_msg[v] != round {
                return Err(SimError::StateViolation {
                    round,
                    node: v,
                    reason: "marked complete without receiving a message".into(),
                });
            }
            trace.informed_round[v] = Some(round);
            done += 1;
            if let Some(ev) = events.as_mut() {
                ev.push(Event {
                    round,
                    node: v,
                    kind: EventKind::Informed,
                    detail: String::new(),
                });
            }
        }
        trace.rounds_run = round;
        match outcomes.as_mut() {
            Some(out) => out.push(outcome),
            None => buf = outcome.transmitters,
        }
        if done == n {
            trace.completion_round = Some(round);
            trace.success = true;
            break;
        }
    }
    trace.events = events;
    trace.outcomes = outcomes;
    Ok(trace)
}
