//! Sub-stream seed derivation. Every replica of every grid cell gets its own
//! 64-bit seed derived from the master seed, so cells run in any order (or in
//! parallel) and still produce identical streams.

/// One splitmix64 step: advances `state` and returns the mixed output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one replica of one cell: a splitmix64 chain absorbing, in order,
/// `L`, the raw IEEE-754 bits of `c_th`, and the replica index. The chain
/// state starts at the master seed and each word is XORed in before the
/// splitmix64 step; the final output is the replica seed.
pub fn replica_seed(master: u64, l: u32, c_th: f64, replica: u32) -> u64 {
    let mut state = master;
    let mut out = 0u64;
    for word in [l as u64, c_th.to_bits(), replica as u64] {
        state ^= word;
        out = splitmix64(&mut state);
    }
    out
}
