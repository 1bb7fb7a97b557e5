//! Dynamic directed multigraph of agents with O(1) degree bookkeeping.
//!
//! Every connection delivers one unit of energy from its source (out-side)
//! to its destination (in-side). The price coefficient of a connection is a
//! logistic function of the degree imbalance between the endpoints and is
//! always evaluated from the *current* degrees. The network maintains the
//! overall product (sum of `1 - alpha` over all live connections)
//! incrementally: every add/remove re-prices exactly the edges incident to
//! the agents whose degrees changed.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;

/// Dense agent index, stable for the lifetime of a run.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct AgentId(pub u32);

impl AgentId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Stable connection id, unique and monotonically increasing within a run.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ConnectionId(pub u64);

impl fmt::Display for ConnectionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One live trade connection delivering a single unit of energy.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Connection {
    pub id: ConnectionId,
    /// Energy deliverer (out-side).
    pub src: AgentId,
    /// Energy receiver (in-side).
    pub dst: AgentId,
    /// Time step at which the connection was created.
    pub created_at: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NetworkError {
    /// Self-trades are forbidden.
    SelfLoop { agent: AgentId },
    AgentOutOfRange { agent: AgentId, len: u32 },
    UnknownConnection { id: ConnectionId },
    /// An agent with no incoming connections has undefined leverage. The
    /// initial wiring guarantees `k_in >= 1` everywhere, so reaching this is
    /// a bug signal.
    DegenerateDegree { agent: AgentId },
}

impl fmt::Display for NetworkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetworkError::SelfLoop { agent } => write!(f, "self-loop rejected on agent {agent}"),
            NetworkError::AgentOutOfRange { agent, len } => {
                write!(f, "agent {agent} out of range (population {len})")
            }
            NetworkError::UnknownConnection { id } => write!(f, "unknown connection id {id}"),
            NetworkError::DegenerateDegree { agent } => {
                write!(f, "agent {agent} has k_in = 0; leverage undefined")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for NetworkError {}

/// Price coefficient of a connection from an agent with `k_out_src` outgoing
/// connections to one with `k_in_dst` incoming connections:
/// `2 / (1 + exp(-(k_out_src - k_in_dst)))`, bounded in (0, 2).
#[inline]
pub fn alpha(k_out_src: u32, k_in_dst: u32) -> f64 {
    alpha_diff(k_out_src as i64 - k_in_dst as i64)
}

#[inline]
pub(crate) fn alpha_diff(d: i64) -> f64 {
    2.0 / (1.0 + math::exp(-(d as f64)))
}

/// Energy balance of a single connection for its source: `1 - alpha`.
#[inline]
pub fn pair_balance(k_out_src: u32, k_in_dst: u32) -> f64 {
    1.0 - alpha(k_out_src, k_in_dst)
}

/// Lookup table for `1 - alpha` indexed by the degree difference
/// `k_out_src - k_in_dst`. Entries are the exact formula values, cached;
/// the table grows on demand when degrees exceed the covered range.
#[derive(Clone, Debug)]
struct BalanceTable {
    lo: i64,
    vals: Vec<f64>,
}

impl BalanceTable {
    fn with_range(lo: i64, hi: i64) -> Self {
        let mut vals = Vec::with_capacity((hi - lo + 1) as usize);
        for d in lo..=hi {
            vals.push(1.0 - alpha_diff(d));
        }
        BalanceTable { lo, vals }
    }

    #[inline]
    fn get(&mut self, d: i64) -> f64 {
        let hi = self.lo + self.vals.len() as i64 - 1;
        if d < self.lo || d > hi {
            let span = d.abs().max(hi.abs()).max(self.lo.abs()) * 2;
            *self = BalanceTable::with_range(-span, span);
        }
        self.vals[(d - self.lo) as usize]
    }

    /// The cached values together with the lowest covered difference, for
    /// direct indexing in hot loops (`vals[(d - lo) as usize]`).
    #[inline]
    fn window(&self) -> (&[f64], i64) {
        (&self.vals, self.lo)
    }
}

/// Degree difference beyond which `1 - alpha` equals -/+1 exactly in f64
/// (the logistic saturates long before 64), so shifting such an edge by one
/// leaves its balance term bit-identical.
const SATURATION: i64 = 64;

#[derive(Clone, Debug, Default)]
struct Agent {
    k_in: u32,
    k_out: u32,
    insolvent: bool,
    /// Slots of live edges with `src == self`, positions mirrored in the edges.
    out_edges: Vec<u32>,
    /// Slots of live edges with `dst == self`.
    in_edges: Vec<u32>,
}

const DEAD: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct EdgeRec {
    id: u64,
    src: u32,
    dst: u32,
    created_at: u64,
    pos_src_out: u32,
    pos_dst_in: u32,
    /// Deduplication epoch used while collecting re-pricing sets.
    mark: u32,
}

/// The dynamic multigraph. Parallel edges between the same ordered pair are
/// permitted (one per traded energy unit); self-loops are not.
#[derive(Clone, Debug)]
pub struct Network {
    agents: Vec<Agent>,
    /// Dense slab of live edges; removal is swap-remove with slot fixups.
    edges: Vec<EdgeRec>,
    /// Maps connection id -> current slot (`DEAD` once removed).
    slot_of_id: Vec<u32>,
    next_id: u64,
    time: u64,
    /// Incrementally maintained overall product, sum of `1 - alpha` over all
    /// live edges. Audited against a full recount via `resync_overall_product`.
    u_t: f64,
    balance: BalanceTable,
    edge_epoch: u32,
    src_mark: Vec<u32>,
    dst_mark: Vec<u32>,
    agent_epoch: u32,
    // Scratch buffer reused across operations to keep the hot loop
    // allocation-free.
    scratch_affected: Vec<u64>,
}

impl Network {
    pub fn new(num_agents: u32) -> Self {
        Network {
            agents: vec![Agent::default(); num_agents as usize],
            edges: Vec::new(),
            slot_of_id: Vec::new(),
            next_id: 0,
            time: 0,
            u_t: 0.0,
            balance: BalanceTable::with_range(-64, 64),
            edge_epoch: 0,
            src_mark: vec![0; num_agents as usize],
            dst_mark: vec![0; num_agents as usize],
            agent_epoch: 0,
            scratch_affected: Vec::new(),
        }
    }

    #[inline]
    pub fn num_agents(&self) -> u32 {
        self.agents.len() as u32
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn time(&self) -> u64 {
        self.time
    }

    #[inline]
    pub(crate) fn advance_time(&mut self) {
        self.time += 1;
    }

    #[inline]
    pub fn k_in(&self, agent: AgentId) -> u32 {
        self.agents[agent.index()].k_in
    }

    #[inline]
    pub fn k_out(&self, agent: AgentId) -> u32 {
        self.agents[agent.index()].k_out
    }

    #[inline]
    pub fn is_insolvent(&self, agent: AgentId) -> bool {
        self.agents[agent.index()].insolvent
    }

    /// Total out-degree over all agents; equals the live edge count.
    #[inline]
    pub fn total_out_degree(&self) -> u64 {
        self.edges.len() as u64
    }

    /// Total in-degree over all agents; equals the live edge count.
    #[inline]
    pub fn total_in_degree(&self) -> u64 {
        self.edges.len() as u64
    }

    /// Incrementally maintained overall product.
    #[inline]
    pub fn overall_product(&self) -> f64 {
        self.u_t
    }

    /// Source agent of the edge in `slot`; used for degree-weighted sampling
    /// (every edge contributes exactly one unit to its source's out-degree).
    #[inline]
    pub(crate) fn edge_src(&self, slot: usize) -> AgentId {
        AgentId(self.edges[slot].src)
    }

    #[inline]
    pub(crate) fn edge_dst(&self, slot: usize) -> AgentId {
        AgentId(self.edges[slot].dst)
    }

    #[inline]
    pub(crate) fn set_insolvent(&mut self, agent: AgentId, flag: bool) {
        self.agents[agent.index()].insolvent = flag;
    }

    pub fn connection(&self, id: ConnectionId) -> Option<Connection> {
        let slot = *self.slot_of_id.get(id.0 as usize)?;
        if slot == DEAD {
            return None;
        }
        let e = &self.edges[slot as usize];
        Some(Connection {
            id: ConnectionId(e.id),
            src: AgentId(e.src),
            dst: AgentId(e.dst),
            created_at: e.created_at,
        })
    }

    /// Iterates over all live connections in slot order.
    pub fn connections(&self) -> impl Iterator<Item = Connection> + '_ {
        self.edges.iter().map(|e| Connection {
            id: ConnectionId(e.id),
            src: AgentId(e.src),
            dst: AgentId(e.dst),
            created_at: e.created_at,
        })
    }

    /// Ids of the live incoming connections of `agent`, sorted ascending.
    pub fn in_connection_ids(&self, agent: AgentId) -> Vec<ConnectionId> {
        let mut ids: Vec<ConnectionId> = self.agents[agent.index()]
            .in_edges
            .iter()
            .map(|&s| ConnectionId(self.edges[s as usize].id))
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Mean-field leverage `k_out / k_in - 1`. Always `>= -1`, with equality
    /// iff `k_out = 0`.
    pub fn leverage_mean_field(&self, agent: AgentId) -> Result<f64, NetworkError> {
        let a = self
            .agents
            .get(agent.index())
            .ok_or(NetworkError::AgentOutOfRange {
                agent,
                len: self.num_agents(),
            })?;
        if a.k_in == 0 {
            return Err(NetworkError::DegenerateDegree { agent });
        }
        Ok(a.k_out as f64 / a.k_in as f64 - 1.0)
    }

    /// Exact energy balance of `agent`: sum of `1 - alpha` over outgoing
    /// edges plus `alpha - 1` over incoming edges, from current degrees.
    /// Diagnostic path, not used in the step loop.
    pub fn energy_balance_exact(&self, agent: AgentId) -> f64 {
        let a = &self.agents[agent.index()];
        let mut u = 0.0;
        for &slot in &a.out_edges {
            let e = &self.edges[slot as usize];
            u += pair_balance(a.k_out, self.agents[e.dst as usize].k_in);
        }
        for &slot in &a.in_edges {
            let e = &self.edges[slot as usize];
            u += alpha(self.agents[e.src as usize].k_out, a.k_in) - 1.0;
        }
        u
    }

    #[inline]
    fn edge_term(&mut self, slot: usize) -> f64 {
        let e = &self.edges[slot];
        let d = self.agents[e.src as usize].k_out as i64 - self.agents[e.dst as usize].k_in as i64;
        self.balance.get(d)
    }

    fn check_agent(&self, agent: AgentId) -> Result<(), NetworkError> {
        if agent.index() >= self.agents.len() {
            return Err(NetworkError::AgentOutOfRange {
                agent,
                len: self.num_agents(),
            });
        }
        Ok(())
    }

    /// Adds one connection `src -> dst`, re-pricing the edges incident to the
    /// two endpoints in the incremental overall product.
    pub fn add_connection(
        &mut self,
        src: AgentId,
        dst: AgentId,
    ) -> Result<Connection, NetworkError> {
        if src == dst {
            return Err(NetworkError::SelfLoop { agent: src });
        }
        self.check_agent(src)?;
        self.check_agent(dst)?;

        // Edges whose price changes: out-edges of src (difference rises by
        // one) and in-edges of dst (difference drops by one). Differences at
        // or beyond saturation contribute a bit-identical -/+1 before and
        // after the shift, so those edges are skipped outright.
        let mut delta = 0.0f64;
        {
            let (tbl, lo) = self.balance.window();
            let agents = &self.agents;
            let edges = &self.edges;
            let k_out_src = agents[src.index()].k_out as i64;
            for &slot in &agents[src.index()].out_edges {
                let e = &edges[slot as usize];
                let d = k_out_src - agents[e.dst as usize].k_in as i64;
                if (-SATURATION..SATURATION).contains(&d) {
                    let i = (d - lo) as usize;
                    delta += tbl[i + 1] - tbl[i];
                }
            }
        }
        self.agents[src.index()].k_out += 1;
        // Parallel src->dst edges see the already-raised out-degree here, so
        // the two single-axis shifts compose to the correct net zero.
        {
            let (tbl, lo) = self.balance.window();
            let agents = &self.agents;
            let edges = &self.edges;
            let k_in_dst = agents[dst.index()].k_in as i64;
            for &slot in &agents[dst.index()].in_edges {
                let e = &edges[slot as usize];
                let d = agents[e.src as usize].k_out as i64 - k_in_dst;
                if (-SATURATION + 1..=SATURATION).contains(&d) {
                    let i = (d - lo) as usize;
                    delta += tbl[i - 1] - tbl[i];
                }
            }
        }
        self.agents[dst.index()].k_in += 1;

        let id = self.next_id;
        self.next_id += 1;
        let slot = self.edges.len() as u32;
        let pos_src_out = self.agents[src.index()].out_edges.len() as u32;
        let pos_dst_in = self.agents[dst.index()].in_edges.len() as u32;
        self.edges.push(EdgeRec {
            id,
            src: src.0,
            dst: dst.0,
            created_at: self.time,
            pos_src_out,
            pos_dst_in,
            mark: 0,
        });
        self.slot_of_id.push(slot);
        debug_assert_eq!(self.slot_of_id.len(), id as usize + 1);
        self.agents[src.index()].out_edges.push(slot);
        self.agents[dst.index()].in_edges.push(slot);
        // A defaulted agent that gains an incoming connection re-enters
        // normal dynamics.
        self.agents[dst.index()].insolvent = false;

        self.u_t += delta + self.edge_term(slot as usize);

        Ok(Connection {
            id: ConnectionId(id),
            src,
            dst,
            created_at: self.time,
        })
    }

    /// Removes one connection by id.
    pub fn remove_connection(&mut self, id: ConnectionId) -> Result<(), NetworkError> {
        self.remove_many(&[id])
    }

    /// Removes a batch of connections, re-pricing every edge incident to an
    /// agent whose degree changes exactly once. Used by the bankruptcy update
    /// so a default with many incoming edges costs O(affected edges), not
    /// O(k_in^2).
    pub fn remove_many(&mut self, ids: &[ConnectionId]) -> Result<(), NetworkError> {
        for &id in ids {
            match self.slot_of_id.get(id.0 as usize) {
                Some(&slot) if slot != DEAD => {}
                _ => return Err(NetworkError::UnknownConnection { id }),
            }
        }

        // Agents whose out-degree (sources) or in-degree (destinations)
        // will change.
        self.agent_epoch += 1;
        let aep = self.agent_epoch;
        self.edge_epoch += 1;
        let eep = self.edge_epoch;
        let mut affected = core::mem::take(&mut self.scratch_affected);
        affected.clear();

        for &id in ids {
            let slot = self.slot_of_id[id.0 as usize] as usize;
            let (src, dst) = (self.edges[slot].src, self.edges[slot].dst);
            if self.src_mark[src as usize] != aep {
                self.src_mark[src as usize] = aep;
                for &s in &self.agents[src as usize].out_edges {
                    let e = &mut self.edges[s as usize];
                    if e.mark != eep {
                        e.mark = eep;
                        affected.push(e.id);
                    }
                }
            }
            if self.dst_mark[dst as usize] != aep {
                self.dst_mark[dst as usize] = aep;
                for &s in &self.agents[dst as usize].in_edges {
                    let e = &mut self.edges[s as usize];
                    if e.mark != eep {
                        e.mark = eep;
                        affected.push(e.id);
                    }
                }
            }
        }
        for &aid in &affected {
            let slot = self.slot_of_id[aid as usize] as usize;
            self.u_t -= self.edge_term(slot);
        }
        for &id in ids {
            let slot = self.slot_of_id[id.0 as usize];
            self.unlink(slot as usize);
        }
        for &aid in &affected {
            let slot = self.slot_of_id[aid as usize];
            if slot != DEAD {
                self.u_t += self.edge_term(slot as usize);
            }
        }
        self.scratch_affected = affected;
        Ok(())
    }

    /// Detaches the edge in `slot` from both incidence lists, updates degree
    /// counters and compacts the edge slab.
    fn unlink(&mut self, slot: usize) {
        let EdgeRec {
            id,
            src,
            dst,
            pos_src_out,
            pos_dst_in,
            ..
        } = self.edges[slot];

        let out = &mut self.agents[src as usize].out_edges;
        out.swap_remove(pos_src_out as usize);
        if let Some(&moved) = out.get(pos_src_out as usize) {
            self.edges[moved as usize].pos_src_out = pos_src_out;
        }
        let inl = &mut self.agents[dst as usize].in_edges;
        inl.swap_remove(pos_dst_in as usize);
        if let Some(&moved) = inl.get(pos_dst_in as usize) {
            self.edges[moved as usize].pos_dst_in = pos_dst_in;
        }
        self.agents[src as usize].k_out -= 1;
        self.agents[dst as usize].k_in -= 1;
        self.slot_of_id[id as usize] = DEAD;

        self.edges.swap_remove(slot);
        if slot < self.edges.len() {
            // A different edge moved into this slot; repoint everything that
            // referenced its old slot.
            let moved = &self.edges[slot];
            let (mid, msrc, mdst, mpo, mpi) = (
                moved.id,
                moved.src,
                moved.dst,
                moved.pos_src_out,
                moved.pos_dst_in,
            );
            self.slot_of_id[mid as usize] = slot as u32;
            self.agents[msrc as usize].out_edges[mpo as usize] = slot as u32;
            self.agents[mdst as usize].in_edges[mpi as usize] = slot as u32;
        }
    }

    /// Recomputes the overall product from scratch, snaps the incremental
    /// accumulator to it and returns the relative deviation observed.
    pub fn resync_overall_product(&mut self) -> f64 {
        let exact = crate::measures::overall_product_recompute(self);
        let dev = if exact == 0.0 {
            math::abs(self.u_t)
        } else {
            math::abs(self.u_t - exact) / math::abs(exact)
        };
        self.u_t = exact;
        dev
    }

    /// Verifies the stored degree counters and totals against a full recount
    /// of the edge store. Diagnostic; used heavily in tests.
    pub fn check_degree_consistency(&self) -> bool {
        let n = self.agents.len();
        let mut k_in = vec![0u32; n];
        let mut k_out = vec![0u32; n];
        for e in &self.edges {
            k_out[e.src as usize] += 1;
            k_in[e.dst as usize] += 1;
        }
        for (i, a) in self.agents.iter().enumerate() {
            if a.k_in != k_in[i]
                || a.k_out != k_out[i]
                || a.out_edges.len() != k_out[i] as usize
                || a.in_edges.len() != k_in[i] as usize
            {
                return false;
            }
        }
        self.total_out_degree() == self.edges.len() as u64
    }
}
