//! Step semantics, bounded model checking and constructive procedures for
//! population protocols and their message-loss ("unreliable") variants.
//!
//! The crate is `no_std` and only needs `alloc`. All configurations are kept
//! in ordered collections, so every enumeration, graph and trace it produces
//! is deterministic.
//!
//! Layout:
//! - [`protocol`], [`config`], [`step`]: protocols of every supported class
//!   and their exact one-step semantics, identified and anonymous.
//! - [`unreliable`]: the message-loss transform applied to every base step.
//! - [`graph`], [`fairness`], [`verify`], [`simulate`]: reachability graphs,
//!   fair schedules, stable consensus and predicate verification.
//! - [`predicate`]: counting predicates, their DSL and the immediate
//!   observation synthesizer.
//! - [`constructions`]: shadow extensions, truncation constants, careful
//!   executions and the one-versus-two agent check.
//! - [`corpus`]: the built-in protocol fixtures.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod config;
pub mod constructions;
pub mod corpus;
pub mod error;
pub mod fairness;
pub mod graph;
pub mod predicate;
pub mod protocol;
pub mod simulate;
pub mod step;
pub mod trace;
pub mod unreliable;
pub mod verify;

pub use config::{AgentId, IdConfig, MultiConfig, PacketId, StepInstance, StepSchema};
pub use error::{Error, Result};
pub use protocol::{Kind, MessageId, PacketCap, ProtocolSpec, StateId, Transitions};
