//! Deterministic seed derivation and keyed permutations.
//!
//! Every random choice in the pipeline flows from a single run seed through
//! the functions in this module, so any stage can be re-run in isolation and
//! reproduce its output on any machine. The generator is fixed by definition,
//! not by dependency version:
//!
//! - `stream(seed, k)` is element `k` of the splitmix64 output stream for
//!   `seed`: `mix(seed + GAMMA * (k + 1))` with the constants below.
//! - `permutation(len, seed)` sorts the indices `0..len` by
//!   `(stream(seed, i), i)`; the trailing index makes the order total even if
//!   two stream values collide.
//! - `stage_seed(seed, name)` mixes the run seed with an FNV-1a hash of the
//!   stage name, giving each pipeline stage an independent stream.
//! - `item_seed(stage, index)` is `stream(stage, index)`, used to seed the
//!   per-item ChaCha8 generators so batch results do not depend on execution
//!   order.

/// splitmix64 increment (golden-ratio constant).
pub const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

const MIX_MUL_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_MUL_2: u64 = 0x94D0_49BB_1331_11EB;

const FNV_OFFSET: u64 = 0xCBF2_9CE4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01B3;

/// The splitmix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_MUL_1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_MUL_2);
    z ^ (z >> 31)
}

/// Element `k` of the splitmix64 stream seeded with `seed`.
pub fn stream(seed: u64, k: u64) -> u64 {
    mix(seed.wrapping_add(GAMMA.wrapping_mul(k.wrapping_add(1))))
}

/// FNV-1a over a byte string; used only to tag stage names.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Derive the seed for a named pipeline stage from the run seed.
pub fn stage_seed(run_seed: u64, stage: &str) -> u64 {
    mix(run_seed ^ fnv1a64(stage.as_bytes()))
}

/// Derive the seed for item `index` within a stage.
pub fn item_seed(stage_seed: u64, index: usize) -> u64 {
    stream(stage_seed, index as u64)
}

/// Keyed permutation of `0..len`: indices sorted by `(stream(seed, i), i)`.
pub fn permutation(len: usize, seed: u64) -> Vec<usize> {
    let mut keyed: Vec<(u64, usize)> = (0..len).map(|i| (stream(seed, i as u64), i)).collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Apply the keyed permutation to a slice, returning a shuffled copy.
pub fn shuffled<T: Clone>(items: &[T], seed: u64) -> Vec<T> {
    permutation(items.len(), seed)
        .into_iter()
        .map(|i| items[i].clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn permutation_is_a_permutation() {
        for seed in [0u64, 1, 7, 42, u64::MAX] {
            let mut p = permutation(100, seed);
            p.sort_unstable();
            assert_eq!(p, (0..100).collect::<Vec<_>>());
        }
    }

    #[test]
    fn permutation_is_deterministic() {
        assert_eq!(permutation(50, 7), permutation(50, 7));
        assert_ne!(permutation(50, 7), permutation(50, 8));
    }

    // Independent re-derivation of the documented shuffle: insert indices into
    // an ordered map keyed by (stream value, index) instead of sorting a vec.
    fn reference_permutation(len: usize, seed: u64) -> Vec<usize> {
        let mut by_key: BTreeMap<(u64, usize), usize> = BTreeMap::new();
        for i in 0..len {
            let z = seed.wrapping_add(GAMMA.wrapping_mul(i as u64 + 1));
            let z1 = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            let z2 = (z1 ^ (z1 >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            let key = z2 ^ (z2 >> 31);
            by_key.insert((key, i), i);
        }
        by_key.into_values().collect()
    }

    #[test]
    fn permutation_matches_reference_implementation() {
        for seed in [0u64, 3, 7, 8, 12345, 0xDEAD_BEEF] {
            for len in [0usize, 1, 2, 5, 30, 257] {
                assert_eq!(permutation(len, seed), reference_permutation(len, seed));
            }
        }
    }

    #[test]
    fn stage_seeds_differ_by_name() {
        let s = 42;
        assert_ne!(stage_seed(s, "sample"), stage_seed(s, "poison-eval"));
        assert_eq!(stage_seed(s, "sample"), stage_seed(s, "sample"));
    }

    #[test]
    fn item_seeds_differ_by_index() {
        let s = stage_seed(9, "poison-eval");
        assert_ne!(item_seed(s, 0), item_seed(s, 1));
    }
}
