//! Brute-force cascade reference. Works on a plain edge list, recomputes
//! degrees from scratch at every decision point, and draws from the random
//! stream in the same order as the engine (waves sorted by agent id, one
//! draw per default over the id-sorted incoming edges). Slow on purpose:
//! its only job is to disagree with the engine when the engine is wrong.

use rand::Rng;

/// An edge list with stable creation-ordered ids.
#[derive(Clone, Debug)]
pub struct EdgeList {
    pub num_agents: u32,
    /// (id, src, dst); ids strictly increasing in creation order.
    pub edges: Vec<(u64, u32, u32)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleCascade {
    /// Defaulted agents in processing order.
    pub bankrupt: Vec<u32>,
    /// Total severed edges.
    pub size: u64,
    pub generations: u32,
}

fn degrees(el: &EdgeList) -> (Vec<u32>, Vec<u32>) {
    let mut k_in = vec![0u32; el.num_agents as usize];
    let mut k_out = vec![0u32; el.num_agents as usize];
    for &(_, s, d) in &el.edges {
        k_out[s as usize] += 1;
        k_in[d as usize] += 1;
    }
    (k_in, k_out)
}

fn is_eligible(k_in: u32, k_out: u32, c_th: f64) -> bool {
    k_in >= 2 && (k_out as f64 / k_in as f64 - 1.0) < c_th
}

/// Runs one full cascade to quiescence, mutating the edge list. Returns
/// `None` when nobody is below the threshold.
pub fn cascade<R: Rng + ?Sized>(
    el: &mut EdgeList,
    c_th: f64,
    rng: &mut R,
) -> Option<OracleCascade> {
    let mut bankrupt = Vec::new();
    let mut defaulted = vec![false; el.num_agents as usize];
    let mut size = 0u64;
    let mut generations = 0u32;

    loop {
        let (k_in, k_out) = degrees(el);
        let wave: Vec<u32> = (0..el.num_agents)
            .filter(|&a| {
                !defaulted[a as usize]
                    && is_eligible(k_in[a as usize], k_out[a as usize], c_th)
            })
            .collect();
        if wave.is_empty() {
            break;
        }
        generations += 1;
        for agent in wave {
            // degrees may have moved since the wave was fixed; re-check
            let (k_in, k_out) = degrees(el);
            if !is_eligible(k_in[agent as usize], k_out[agent as usize], c_th) {
                continue;
            }
            let mut incoming: Vec<u64> = el
                .edges
                .iter()
                .filter(|&&(_, _, d)| d == agent)
                .map(|&(id, _, _)| id)
                .collect();
            incoming.sort_unstable();
            let keep = rng.gen_range(0..incoming.len());
            let keep_id = incoming[keep];
            let before = el.edges.len();
            el.edges.retain(|&(id, _, d)| d != agent || id == keep_id);
            size += (before - el.edges.len()) as u64;
            defaulted[agent as usize] = true;
            bankrupt.push(agent);
        }
    }

    if bankrupt.is_empty() {
        None
    } else {
        Some(OracleCascade { bankrupt, size, generations })
    }
}
