//! Broadcast scheduling for known-topology radio mesh networks.
//!
//! Graphs and generators, ranked spanning trees (SGSTs), a round-based radio
//! simulator with sender and receiver faults, four broadcast protocols, RLNC
//! over GF(2^8) and an experiment harness.

pub mod graph;
pub mod harness;
pub mod protocols;
pub mod rlnc;
pub mod rng;
pub mod sgst;
pub mod sim;
pub mod stats;
