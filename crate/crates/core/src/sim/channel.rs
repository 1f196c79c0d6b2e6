use crate::graph::{MeshGraph, NodeId};
use crate::rlnc::CodedPacket;
use crate::rng::{CoinStream, Purpose};

/// What a transmission carries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    /// The single broadcast message.
    Source,
    Coded(CodedPacket),
}

impl Payload {
    pub fn tag(&self) -> String {
        match self {
            Payload::Source => "m".to_string(),
            Payload::Coded(p) => p.tag(),
        }
    }
}

/// Which part of a schedule produced a transmission.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SlotKind {
    Fast,
    Slow,
    SuperSlow,
    Decay,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transmission {
    pub node: NodeId,
    pub payload: Payload,
    pub slot: SlotKind,
}

impl Transmission {
    pub fn new(node: NodeId, payload: Payload, slot: SlotKind) -> Self {
        Self { node, payload, slot }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NoiseCause {
    /// Two or more transmitting neighbors.
    Collision,
    /// The only transmitting neighbor sent noise.
    SenderFault,
    /// A clean single transmission was corrupted at the receiver.
    ReceiverFault,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Reception {
    Transmitting,
    Silence,
    Noise(NoiseCause),
    /// Index into [`RoundOutcome::transmitters`] of the sender.
    Message { tx: usize },
}

impl Reception {
    pub fn is_noise(&self) -> bool {
        matches!(self, Reception::Noise(_))
    }

    /// Collapses noise causes; receivers cannot tell them apart.
    pub fn observed(&self) -> Observed {
        match self {
            Reception::Transmitting => Observed::Transmitting,
            Reception::Silence => Observed::Silence,
            Reception::Noise(_) => Observed::Noise,
            Reception::Message { .. } => Observed::Message,
        }
    }
}

/// A reception as seen by the node itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Observed {
    Transmitting,
    Silence,
    Noise,
    Message,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaultMode {
    Both,
    SenderOnly,
    ReceiverOnly,
}

impl FaultMode {
    fn sender(self) -> bool {
        !matches!(self, FaultMode::ReceiverOnly)
    }

    fn receiver(self) -> bool {
        !matches!(self, FaultMode::SenderOnly)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub p: f64,
    pub mode: FaultMode,
}

impl NoiseModel {
    pub fn faultless() -> Self {
        Self {
            p: 0.0,
            mode: FaultMode::Both,
        }
    }

    pub fn new(p: f64) -> Self {
        Self {
            p,
            mode: FaultMode::Both,
        }
    }
}

/// Result of one round. Receptions are sparse: every node not listed heard
/// silence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundOutcome {
    pub round: u64,
    pub transmitters: Vec<Transmission>,
    pub sender_faulted: Vec<bool>,
    /// Sorted by node id; includes every transmitter and every listener with
    /// at least one transmitting neighbor.
    pub receptions: Vec<(NodeId, Reception)>,
}

impl RoundOutcome {
    pub fn reception(&self, v: NodeId) -> Reception {
        match self.receptions.binary_search_by_key(&v, |&(u, _)| u) {
            Ok(i) => self.receptions[i].1,
            Err(_) => Reception::Silence,
        }
    }

    pub fn dense(&self, n: usize) -> Vec<Reception> {
        let mut out = vec![Reception::Silence; n];
        for &(v, r) in &self.receptions {
            out[v] = r;
        }
        out
    }

    /// Every `(receiver, transmission)` pair delivered this round.
    pub fn messages(&self) -> impl Iterator<Item = (NodeId, &Transmission)> + '_ {
        self.receptions.iter().filter_map(|&(v, r)| match r {
            Reception::Message { tx } => Some((v, &self.transmitters[tx])),
            _ => None,
        })
    }
}

/// Reusable scratch space for [`resolve_round`]; avoids an O(n) clear per
/// round.
#[derive(Clone, Debug)]
pub struct Resolver {
    stamp: Vec<u64>,
    count: Vec<u32>,
    sender: Vec<usize>,
    tx_stamp: Vec<u64>,
    epoch: u64,
    touched: Vec<NodeId>,
}

impl Resolver {
    pub fn new(n: usize) -> Self {
        Self {
            stamp: vec![0; n],
            count: vec![0; n],
            sender: vec![0; n],
            tx_stamp: vec![0; n],
            epoch: 0,
            touched: Vec::new(),
        }
    }

    /// Applies the collision rule and the fault coins.
    ///
    /// One sender-fault coin per transmitter; a faulted transmitter still
    /// occupies the channel. A receiver-fault coin is drawn only for a
    /// listener that would otherwise receive a message.
    pub fn resolve(
        &mut self,
        g: &MeshGraph,
        round: u64,
        transmitters: Vec<Transmission>,
        noise: NoiseModel,
        coins: &CoinStream,
    ) -> RoundOutcome {
        self.epoch += 1;
        let e = self.epoch;
        self.touched.clear();
        let sender_faulted: Vec<bool> = transmitters
            .iter()
            .map(|t| {
                noise.mode.sender() && coins.bernoulli(Purpose::SenderFault, t.node, round, noise.p)
            })
            .collect();
        for t in &transmitters {
            self.tx_stamp[t.node] = e;
            if self.stamp[t.node] != e {
                self.stamp[t.node] = e;
                self.count[t.node] = 0;
                self.touched.push(t.node);
            }
        }
        for (i, t) in transmitters.iter().enumerate() {
            for &u in g.neighbors(t.node) {
                if self.stamp[u] != e {
                    self.stamp[u] = e;
                    self.count[u] = 0;
                    self.touched.push(u);
                }
                self.count[u] += 1;
                self.sender[u] = i;
            }
        }
        self.touched.sort_unstable();
        let receptions = self
            .touched
            .iter()
            .map(|&u| {
                let r = if self.tx_stamp[u] == e {
                    Reception::Transmitting
                } else if self.count[u] >= 2 {
                    Reception::Noise(NoiseCause::Collision)
                } else if sender_faulted[self.sender[u]] {
                    Reception::Noise(NoiseCause::SenderFault)
                } else if noise.mode.receiver()
                    && coins.bernoulli(Purpose::ReceiverFault, u, round, noise.p)
                {
                    Reception::Noise(NoiseCause::ReceiverFault)
                } else {
                    Reception::Message { tx: self.sender[u] }
                };
                (u, r)
            })
            .collect();
        RoundOutcome {
            round,
            transmitters,
            sender_faulted,
            receptions,
        }
    }
}

/// One-shot form of [`Resolver::resolve`].
pub fn resolve_round(
    g: &MeshGraph,
    round: u64,
    transmitters: Vec<Transmission>,
    noise: NoiseModel,
    coins: &CoinStream,
) -> RoundOutcome {
    Resolver::new(g.node_count()).resolve(g, round, transmitters, noise, coins)
}

/// The faultless collision rule, written independently of the noisy
/// resolver: a listener hears a message iff exactly one neighbor transmits.
/// Returns, per node, the observed outcome and the sending node if any.
pub fn classic_receptions(g: &MeshGraph, transmitters: &[NodeId]) -> Vec<(Observed, Option<NodeId>)> {
    let n = g.node_count();
    let mut is_tx = vec![false; n];
    for &t in transmitters {
        is_tx[t] = true;
    }
    (0..n)
        .map(|v| {
            if is_tx[v] {
                return (Observed::Transmitting, None);
            }
            let senders: Vec<NodeId> = g.neighbors(v).iter().copied().filter(|&u| is_tx[u]).collect();
            match senders.as_slice() {
                [] => (Observed::Silence, None),
                [s] => (Observed::Message, Some(*s)),
                _ => (Observed::Noise, None),
            }
        })
        .collect()
}
