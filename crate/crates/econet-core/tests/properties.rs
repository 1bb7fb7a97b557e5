//! Randomized structural invariants, checked over generated op sequences.

use econet_core::measures::{overall_product, overall_product_recompute};
use econet_core::network::{alpha, AgentId, Network};
use econet_core::dynamics::{cascade, initialize, step};
use econet_core::DynamicsParams;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
enum Op {
    Add { src: u8, dst: u8 },
    Remove { pick: u16 },
}

fn op_strategy() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => (0u8..12, 0u8..12).prop_map(|(src, dst)| Op::Add { src, dst }),
        1 => (0u16..u16::MAX).prop_map(|pick| Op::Remove { pick }),
    ]
}

proptest! {
    #[test]
    fn alpha_antisymmetry(a in 0u32..200, b in 0u32..200) {
        // swapping the degree roles mirrors the exchange around 1
        let s = alpha(a, b) + alpha(b, a);
        prop_assert!((s - 2.0).abs() < 1e-12, "sum = {s}");
    }

    #[test]
    fn alpha_bounded_and_monotone(a in 0u32..500, b in 0u32..500) {
        let v = alpha(a, b);
        prop_assert!((0.0..=2.0).contains(&v));
        prop_assert!(alpha(a + 1, b) >= v);
        prop_assert!(alpha(a, b + 1) <= v);
    }

    #[test]
    fn network_invariants_under_random_ops(ops in prop::collection::vec(op_strategy(), 1..200)) {
        let mut net = Network::new(12);
        let mut live = Vec::new();
        for op in ops {
            match op {
                Op::Add { src, dst } => {
                    if src != dst {
                        let c = net.add_connection(AgentId(src as u32), AgentId(dst as u32)).unwrap();
                        live.push(c.id);
                    }
                }
                Op::Remove { pick } => {
                    if !live.is_empty() {
                        let id = live.swap_remove(pick as usize % live.len());
                        net.remove_connection(id).unwrap();
                    }
                }
            }
        }
        prop_assert!(net.check_degree_consistency());
        prop_assert_eq!(net.num_edges(), live.len());
        prop_assert_eq!(net.total_out_degree(), net.total_in_degree());
        let exact = overall_product_recompute(&net);
        let inc = overall_product(&net);
        let denom = exact.abs().max(1.0);
        prop_assert!(((inc - exact) / denom).abs() < 1e-9, "inc {inc} vs exact {exact}");
    }

    #[test]
    fn simulation_leaves_no_eligible_bankrupts(seed in 0u64..1000) {
        let params = DynamicsParams::new(40, -0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = initialize(&params, &mut rng);
        for _ in 0..400 {
            step(&mut net, &params, &mut rng).unwrap();
        }
        prop_assert!(net.check_degree_consistency());
        // a quiescent state: a full scan finds nothing left to topple
        let ev = cascade(&mut net, &params, &mut rng).unwrap();
        prop_assert!(ev.is_none());
        for i in 0..40 {
            let a = AgentId(i);
            // every solvent agent still owes exactly its funding energy
            prop_assert!(net.k_in(a) >= 1);
            prop_assert!(net.energy_balance_exact(a).is_finite());
        }
    }
}
