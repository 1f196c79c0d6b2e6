//! Broadcast protocols behind a common strategy interface.
//!
//! A [`BroadcastStrategy`] turns a graph (and SGST, when it needs one) into a
//! [`Schedule`]: the precomputed, read-only part shared by all trials. Each
//! trial then calls [`Schedule::start`] for a fresh per-trial state machine.
//! Strategies are looked up by name in a [`Registry`].

pub mod contract;
pub mod decay;
pub mod faultless;
pub mod multi;
pub mod robust;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::{MeshGraph, NodeId};
use crate::sgst::{default_x, Sgst};
use crate::sim::{Protocol, SimConfig};

pub use self::contract::{contract_supernodes, Block, Contraction};
pub use self::decay::{decay_decide, DecayClock, DecayState, PhaseStats};
pub use self::faultless::{FaultlessExport, FaultlessSchedule, FaultlessState, SlotClass, SlotEntry};
pub use self::multi::{source_messages, MultiState};
pub use self::robust::{default_block_size, RobustExport, RobustSchedule, RobustState, TransitStats};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("unknown protocol '{0}'")]
    Unknown(String),
    #[error("protocol '{0}' needs an SGST")]
    MissingSgst(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Schedule parameters resolved for one graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProtocolParams {
    pub x: u32,
    pub c_mult: u32,
    pub block_size: u32,
    pub k: usize,
}

impl ProtocolParams {
    /// Fills unset values with the defaults for an `n`-node graph.
    pub fn resolve(n: usize, cfg: &SimConfig, k: usize) -> Self {
        Self {
            x: cfg.x.unwrap_or_else(|| default_x(n)),
            c_mult: cfg.c_mult,
            block_size: cfg.block_size.unwrap_or_else(|| default_block_size(n)),
            k,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Env<'a> {
    pub graph: &'a MeshGraph,
    pub source: NodeId,
    pub sgst: Option<&'a Sgst>,
    pub params: ProtocolParams,
}

impl<'a> Env<'a> {
    fn require_sgst(&self, name: &'static str) -> Result<&'a Sgst, ProtocolError> {
        self.sgst.ok_or(ProtocolError::MissingSgst(name))
    }
}

/// The shared, precomputed part of a protocol.
pub trait Schedule: Send + Sync {
    fn name(&self) -> &'static str;

    /// A fresh state machine for one trial.
    fn start(&self, cfg: &SimConfig) -> Box<dyn Protocol + '_>;

    /// Slot table or parameter block, for protocols that have one.
    fn export(&self) -> Option<serde_json::Value> {
        None
    }
}

pub trait BroadcastStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    fn uses_sgst(&self) -> bool;

    fn prepare<'a>(&self, env: &Env<'a>) -> Result<Box<dyn Schedule + 'a>, ProtocolError>;
}

struct DecaySchedule<'a> {
    graph: &'a MeshGraph,
    source: NodeId,
    clock: DecayClock,
}

impl Schedule for DecaySchedule<'_> {
    fn name(&self) -> &'static str {
        "decay"
    }

    fn start(&self, _cfg: &SimConfig) -> Box<dyn Protocol + '_> {
        Box::new(DecayState::new(self.graph, self.source, self.clock))
    }
}

impl Schedule for FaultlessSchedule<'_> {
    fn name(&self) -> &'static str {
        "faultless"
    }

    fn start(&self, _cfg: &SimConfig) -> Box<dyn Protocol + '_> {
        Box::new(FaultlessSchedule::start(self))
    }

    fn export(&self) -> Option<serde_json::Value> {
        serde_json::to_value(FaultlessSchedule::export(self)).ok()
    }
}

impl Schedule for RobustSchedule<'_> {
    fn name(&self) -> &'static str {
        "robust"
    }

    fn start(&self, _cfg: &SimConfig) -> Box<dyn Protocol + '_> {
        Box::new(RobustSchedule::start(self))
    }

    fn export(&self) -> Option<serde_json::Value> {
        serde_json::to_value(RobustSchedule::export(self)).ok()
    }
}

struct MultiSchedule<'a> {
    robust: RobustSchedule<'a>,
    k: usize,
}

impl Schedule for MultiSchedule<'_> {
    fn name(&self) -> &'static str {
        "multi"
    }

    fn start(&self, cfg: &SimConfig) -> Box<dyn Protocol + '_> {
        Box::new(MultiState::new(&self.robust, self.k, &cfg.coins()))
    }
}

pub struct Decay;
pub struct Faultless;
pub struct Robust;
pub struct Multi;

impl BroadcastStrategy for Decay {
    fn name(&self) -> &'static str {
        "decay"
    }

    fn uses_sgst(&self) -> bool {
        false
    }

    fn prepare<'a>(&self, env: &Env<'a>) -> Result<Box<dyn Schedule + 'a>, ProtocolError> {
        Ok(Box::new(DecaySchedule {
            graph: env.graph,
            source: env.source,
            clock: DecayClock::for_nodes(env.graph.node_count()),
        }))
    }
}

impl BroadcastStrategy for Faultless {
    fn name(&self) -> &'static str {
        "faultless"
    }

    fn uses_sgst(&self) -> bool {
        true
    }

    fn prepare<'a>(&self, env: &Env<'a>) -> Result<Box<dyn Schedule + 'a>, ProtocolError> {
        let s = env.require_sgst("faultless")?;
        Ok(Box::new(FaultlessSchedule::new(env.graph, s)))
    }
}

impl BroadcastStrategy for Robust {
    fn name(&self) -> &'static str {
        "robust"
    }

    fn uses_sgst(&self) -> bool {
        true
    }

    fn prepare<'a>(&self, env: &Env<'a>) -> Result<Box<dyn Schedule + 'a>, ProtocolError> {
        let s = env.require_sgst("robust")?;
        let p = env.params;
        Ok(Box::new(RobustSchedule::new(env.graph, s, p.block_size, p.c_mult)))
    }
}

impl BroadcastStrategy for Multi {
    fn name(&self) -> &'static str {
        "multi"
    }

    fn uses_sgst(&self) -> bool {
        true
    }

    fn prepare<'a>(&self, env: &Env<'a>) -> Result<Box<dyn Schedule + 'a>, ProtocolError> {
        let s = env.require_sgst("multi")?;
        let p = env.params;
        if p.k == 0 {
            return Err(ProtocolError::InvalidParameter("k must be at least 1".into()));
        }
        Ok(Box::new(MultiSchedule {
            robust: RobustSchedule::new(env.graph, s, p.block_size, p.c_mult),
            k: p.k,
        }))
    }
}

/// Strategies by name.
pub struct Registry {
    strategies: BTreeMap<&'static str, Box<dyn BroadcastStrategy>>,
}

impl Registry {
    pub fn empty() -> Self {
        Self {
            strategies: BTreeMap::new(),
        }
    }

    /// Adds or replaces a strategy under its own name.
    pub fn register(&mut self, strategy: Box<dyn BroadcastStrategy>) {
        self.strategies.insert(strategy.name(), strategy);
    }

    pub fn get(&self, name: &str) -> Result<&dyn BroadcastStrategy, ProtocolError> {
        self.strategies
            .get(name)
            .map(|s| s.as_ref())
            .ok_or_else(|| ProtocolError::Unknown(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.strategies.keys().copied().collect()
    }
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Decay));
        r.register(Box::new(Faultless));
        r.register(Box::new(Robust));
        r.register(Box::new(Multi));
        r
    }
}
