//! Simulation engine: degree-biased growth, insolvency detection and the
//! bankruptcy-avalanche cascade.
//!
//! One run is a sequential event loop owning its [`Network`] and random
//! stream. At every step one new connection forms; if the receiving agent's
//! mean-field leverage drops below the capital threshold it defaults, losing
//! all incoming connections but one. Each severed connection lowers the
//! creditor's leverage by exactly `1 / k_in`, which can push further agents
//! under the threshold; the chain is processed breadth-first by generation
//! until every agent is back above the threshold.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::network::{AgentId, Connection, Network, NetworkError};

/// Attachment rule used when growing the network.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GrowthMode {
    /// Degree-biased: an agent is drawn with probability proportional to its
    /// (out- or in-) degree plus the smoothing offset.
    Preferential,
    /// Every agent is equally likely, regardless of degree.
    Uniform,
}

/// Parameters of the growth/default dynamics.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct DynamicsParams {
    /// Number of agents in the operating neighbourhood.
    pub num_agents: u32,
    /// Minimum capital level; an agent defaults when its mean-field leverage
    /// drops strictly below this. Must lie in (-1, 0).
    pub c_th: f64,
    /// Additive attractiveness offset applied to degrees when sampling, so
    /// the attachment probability stays defined with all-zero degrees.
    pub smoothing: f64,
    pub mode: GrowthMode,
}

impl DynamicsParams {
    pub fn new(num_agents: u32, c_th: f64) -> Result<Self, SimError> {
        if num_agents < 2 {
            return Err(SimError::PopulationTooSmall { num_agents });
        }
        if !(c_th > -1.0 && c_th < 0.0) {
            return Err(SimError::ThresholdOutOfRange { c_th });
        }
        Ok(DynamicsParams {
            num_agents,
            c_th,
            smoothing: 1.0,
            mode: GrowthMode::Preferential,
        })
    }

    pub fn with_mode(mut self, mode: GrowthMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_smoothing(mut self, smoothing: f64) -> Self {
        self.smoothing = smoothing;
        self
    }
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub enum SimError {
    PopulationTooSmall { num_agents: u32 },
    ThresholdOutOfRange { c_th: f64 },
    /// `bankrupt` called on an agent already at the consumption floor.
    BankruptcyFloor { agent: AgentId, k_in: u32 },
    /// Target redraws collided with the source too many times.
    TargetDrawExhausted { src: AgentId },
    Network(NetworkError),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::PopulationTooSmall { num_agents } => {
                write!(f, "population must be at least 2, got {num_agents}")
            }
            SimError::ThresholdOutOfRange { c_th } => {
                write!(f, "c_th must lie in (-1, 0), got {c_th}")
            }
            SimError::BankruptcyFloor { agent, k_in } => {
                write!(f, "agent {agent} has k_in = {k_in} < 2; nothing to sever")
            }
            SimError::TargetDrawExhausted { src } => {
                write!(f, "could not draw a target distinct from source {src}")
            }
            SimError::Network(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SimError {}

impl From<NetworkError> for SimError {
    fn from(e: NetworkError) -> Self {
        SimError::Network(e)
    }
}

/// One chain of defaults triggered by a single insolvency.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AvalancheEvent {
    pub trigger_time: u64,
    pub trigger_agent: AgentId,
    /// Defaulted agents in processing order; no duplicates within one event.
    pub bankrupt_agents: Vec<AgentId>,
    /// Total number of severed connections.
    pub size: u64,
    /// Number of breadth-first waves in the cascade.
    pub generations: u32,
}

/// Outcome of one time step.
#[derive(Clone, PartialEq, Debug)]
pub struct StepRecord {
    pub time: u64,
    /// Overall product after the step (growth plus any cascade).
    pub u_t: f64,
    pub avalanche: Option<AvalancheEvent>,
}

/// Builds the seed network: every agent receives exactly one incoming
/// connection from a uniformly chosen other agent, so leverage is defined
/// everywhere from step zero.
pub fn initialize<R: Rng + ?Sized>(params: &DynamicsParams, rng: &mut R) -> Network {
    let l = params.num_agents;
    let mut net = Network::new(l);
    for dst in 0..l {
        let mut src = rng.gen_range(0..l - 1);
        if src >= dst {
            src += 1;
        }
        net.add_connection(AgentId(src), AgentId(dst))
            .expect("seed wiring has no self-loops");
    }
    net
}

#[inline]
fn weighted_pick<R: Rng + ?Sized, F: Fn(usize) -> AgentId>(
    net: &Network,
    params: &DynamicsParams,
    rng: &mut R,
    by_edge: F,
) -> AgentId {
    let l = params.num_agents;
    if params.mode == GrowthMode::Uniform {
        return AgentId(rng.gen_range(0..l));
    }
    let edges = net.num_edges();
    let total = edges as f64 + params.smoothing * l as f64;
    // Mixture: each edge endpoint contributes one unit of degree weight, the
    // smoothing offset contributes uniformly.
    if total > 0.0 && rng.gen::<f64>() * total < edges as f64 {
        by_edge(rng.gen_range(0..edges))
    } else {
        AgentId(rng.gen_range(0..l))
    }
}

/// Draws the source of a new connection with probability proportional to
/// `k_out + smoothing` (or uniformly in uniform mode).
pub fn pick_source<R: Rng + ?Sized>(
    net: &Network,
    params: &DynamicsParams,
    rng: &mut R,
) -> AgentId {
    weighted_pick(net, params, rng, |slot| net.edge_src(slot))
}

/// Draws the target of a new connection with probability proportional to
/// `k_in + smoothing`, redrawing while it collides with `src`.
pub fn pick_target<R: Rng + ?Sized>(
    net: &Network,
    params: &DynamicsParams,
    rng: &mut R,
    src: AgentId,
) -> Result<AgentId, SimError> {
    for _ in 0..params.num_agents.max(64) {
        let dst = weighted_pick(net, params, rng, |slot| net.edge_dst(slot));
        if dst != src {
            return Ok(dst);
        }
    }
    Err(SimError::TargetDrawExhausted { src })
}

/// Forms one new connection and advances time by one step.
pub fn growth_step<R: Rng + ?Sized>(
    net: &mut Network,
    params: &DynamicsParams,
    rng: &mut R,
) -> Result<Connection, SimError> {
    let src = pick_source(net, params, rng);
    let dst = pick_target(net, params, rng, src)?;
    net.advance_time();
    Ok(net.add_connection(src, dst)?)
}

/// Defaults `agent`: all incoming connections except one retained consumption
/// connection (chosen uniformly at random) are severed in a single batch.
/// Returns the severed connections.
pub fn bankrupt<R: Rng + ?Sized>(
    net: &mut Network,
    agent: AgentId,
    rng: &mut R,
) -> Result<Vec<Connection>, SimError> {
    let k_in = net.k_in(agent);
    if k_in < 2 {
        return Err(SimError::BankruptcyFloor { agent, k_in });
    }
    let ids = net.in_connection_ids(agent);
    debug_assert_eq!(ids.len(), k_in as usize);
    let keep = rng.gen_range(0..ids.len());
    let severed_records: Vec<Connection> = ids
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != keep)
        .map(|(_, &id)| net.connection(id).expect("live in-edge"))
        .collect();
    let severed_ids: Vec<_> = severed_records.iter().map(|c| c.id).collect();
    net.remove_many(&severed_ids)?;
    net.set_insolvent(agent, true);
    debug_assert_eq!(net.k_in(agent), 1);
    Ok(severed_records)
}

#[inline]
fn eligible(net: &Network, c_th: f64, agent: AgentId) -> bool {
    let k_in = net.k_in(agent);
    // Agents already at the consumption floor are inert: there is nothing
    // left to sever, so they sit out until they regain incoming connections.
    k_in >= 2 && (net.k_out(agent) as f64 / k_in as f64 - 1.0) < c_th
}

/// Runs a cascade seeded from `candidates`: every eligible candidate defaults,
/// their creditors are re-examined, and so on in breadth-first waves (FIFO
/// within a wave, ties broken by agent id). Returns the aggregate event, or
/// `None` if nobody was below the threshold.
///
/// Only agents whose degrees changed can become eligible, so between steps it
/// suffices to seed with the endpoints of the new connection.
pub fn cascade_from<R: Rng + ?Sized>(
    net: &mut Network,
    params: &DynamicsParams,
    rng: &mut R,
    candidates: &[AgentId],
) -> Result<Option<AvalancheEvent>, SimError> {
    let mut wave: Vec<AgentId> = candidates
        .iter()
        .copied()
        .filter(|&a| eligible(net, params.c_th, a))
        .collect();
    wave.sort_unstable();
    wave.dedup();
    if wave.is_empty() {
        return Ok(None);
    }

    let trigger_time = net.time();
    let trigger_agent = wave[0];
    let mut bankrupt_agents = Vec::new();
    let mut size = 0u64;
    let mut generations = 0u32;
    let mut next: Vec<AgentId> = Vec::new();

    while !wave.is_empty() {
        generations += 1;
        next.clear();
        for &agent in &wave {
            // Eligibility is monotone during a cascade (other defaults can
            // only lower an agent's leverage), but an agent that already
            // defaulted this event sits at the floor and is skipped here.
            if !eligible(net, params.c_th, agent) {
                continue;
            }
            let severed = bankrupt(net, agent, rng)?;
            size += severed.len() as u64;
            bankrupt_agents.push(agent);
            for conn in &severed {
                next.push(conn.src);
            }
        }
        next.sort_unstable();
        next.dedup();
        next.retain(|&a| eligible(net, params.c_th, a));
        core::mem::swap(&mut wave, &mut next);
    }

    if bankrupt_agents.is_empty() {
        return Ok(None);
    }
    Ok(Some(AvalancheEvent {
        trigger_time,
        trigger_agent,
        bankrupt_agents,
        size,
        generations,
    }))
}

/// Cascade entry that scans the whole population for eligible agents. Used
/// on arbitrary networks (tests, diagnostics); the step loop seeds from the
/// endpoints of the new connection instead.
pub fn cascade<R: Rng + ?Sized>(
    net: &mut Network,
    params: &DynamicsParams,
    rng: &mut R,
) -> Result<Option<AvalancheEvent>, SimError> {
    let all: Vec<AgentId> = (0..net.num_agents()).map(AgentId).collect();
    cascade_from(net, params, rng, &all)
}

/// One full step: growth, cascade, measurement.
pub fn step<R: Rng + ?Sized>(
    net: &mut Network,
    params: &DynamicsParams,
    rng: &mut R,
) -> Result<StepRecord, SimError> {
    let conn = growth_step(net, params, rng)?;
    let avalanche = cascade_from(net, params, rng, &[conn.src, conn.dst])?;
    Ok(StepRecord {
        time: net.time(),
        u_t: net.overall_product(),
        avalanche,
    })
}
