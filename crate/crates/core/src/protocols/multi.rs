use rand::Rng;

use super::robust::{RobustSchedule, RobustState};
use crate::graph::NodeId;
use crate::rlnc::{DecoderState, PAYLOAD_LEN};
use crate::rng::{CoinStream, Purpose};
use crate::sim::{Payload, Protocol, RoundOutcome, SimError, Transmission};

/// The `k` source messages of a trial, drawn from the trial's coding stream.
pub fn source_messages(coins: &CoinStream, source: NodeId, k: usize) -> Vec<Vec<u8>> {
    let mut rng = coins.rng(Purpose::Coding, source, 0);
    (0..k)
        .map(|_| (0..PAYLOAD_LEN).map(|_| rng.gen()).collect())
        .collect()
}

/// `k`-message broadcast: the robust schedule decides who transmits, and
/// every transmission carries a fresh random combination of the sender's
/// received span. A node takes part in the schedule once its decoder rank
/// is positive and is complete at rank `k`.
pub struct MultiState<'s, 'a> {
    core: RobustState<'s, 'a>,
    source: NodeId,
    messages: Vec<Vec<u8>>,
    decoders: Vec<DecoderState>,
}

impl<'s, 'a> MultiState<'s, 'a> {
    pub fn new(sched: &'s RobustSchedule<'a>, k: usize, coins: &CoinStream) -> Self {
        assert!(k >= 1, "at least one message");
        let n = sched.graph().node_count();
        let source = sched.sgst().source();
        let messages = source_messages(coins, source, k);
        let mut decoders = vec![DecoderState::new(k, PAYLOAD_LEN); n];
        decoders[source] = DecoderState::with_messages(&messages).expect("well-formed messages");
        Self {
            core: sched.start(),
            source,
            messages,
            decoders,
        }
    }

    pub fn rank(&self, v: NodeId) -> usize {
        self.decoders[v].rank()
    }

    pub fn decoder(&self, v: NodeId) -> &DecoderState {
        &self.decoders[v]
    }

    pub fn messages(&self) -> &[Vec<u8>] {
        &self.messages
    }

    pub fn k(&self) -> usize {
        self.messages.len()
    }
}

impl Protocol for MultiState<'_, '_> {
    fn initially_complete(&self) -> Vec<NodeId> {
        vec![self.source]
    }

    fn can_transmit(&self, v: NodeId) -> bool {
        self.decoders[v].rank() > 0
    }

    fn decide(&mut self, round: u64, coins: &CoinStream, out: &mut Vec<Transmission>) {
        let start = out.len();
        self.core.decide_nodes(round, coins, out);
        for tx in &mut out[start..] {
            let mut rng = coins.rng(Purpose::Coding, tx.node, round);
            let pkt = self.decoders[tx.node]
                .encode(&mut rng)
                .expect("transmitters hold a nonempty span");
            tx.payload = Payload::Coded(pkt);
        }
    }

    fn deliver(
        &mut self,
        outcome: &RoundOutcome,
        _coins: &CoinStream,
        completed: &mut Vec<NodeId>,
    ) -> Result<(), SimError> {
        let k = self.k();
        for (v, tx) in outcome.messages() {
            let Payload::Coded(pkt) = &tx.payload else {
                return Err(SimError::StateViolation {
                    round: outcome.round,
                    node: tx.node,
                    reason: "uncoded payload in a coded broadcast".into(),
                });
            };
            let innovative = self.decoders[v]
                .absorb(pkt.clone())
                .map_err(|e| SimError::StateViolation {
                    round: outcome.round,
                    node: v,
                    reason: e.to_string(),
                })?;
            if innovative {
                self.core.mark(v);
                if self.decoders[v].rank() == k {
                    completed.push(v);
                }
            }
        }
        self.core.end_round(outcome.round);
        Ok(())
    }
}
