//! Core engine for a dynamic trade network of economic agents.
//!
//! Agents exchange unit-sized "economic energy" over directed connections.
//! The price of a connection is a logistic function of the degree imbalance
//! between the two endpoints, so an agent's balance and leverage are pure
//! functions of the network topology. Connections are created by degree-biased
//! attachment; when an agent's leverage drops below a capital threshold it
//! defaults, losing all incoming connections but one, which can push its
//! creditors under the threshold in turn and trigger an avalanche.
//!
//! The crate is `no_std` compatible (with `alloc`); all IO, file formats and
//! the experiment harness live in the companion `econet` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dynamics;
pub(crate) mod math;
pub mod measures;
pub mod network;
pub mod tail;

pub use dynamics::{AvalancheEvent, DynamicsParams, GrowthMode, SimError, StepRecord};
pub use network::{alpha, pair_balance, AgentId, Connection, ConnectionId, Network, NetworkError};
pub use tail::{SizeSample, TailError, TailFit};
