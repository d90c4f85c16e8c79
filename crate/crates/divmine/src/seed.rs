//! Stable derivation of per-stage RNG seeds from one master seed.

/// Derives a child seed from `master` for the given stage and key.
///
/// The mapping is a fixed FNV-1a hash with a final mixing step, so it is
/// stable across runs, platforms, and crate versions. Distinct
/// (stage, key) pairs get statistically independent streams.
pub fn derive_seed(master: u64, stage: &str, key: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;

    let mut h = OFFSET;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(PRIME);
        }
    };
    eat(&master.to_le_bytes());
    eat(&[0x1f]);
    eat(stage.as_bytes());
    eat(&[0x1f]);
    eat(key.as_bytes());

    // splitmix64 finalizer: spreads low-entropy keys over the full range.
    h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_across_calls() {
        assert_eq!(derive_seed(7, "x", "y"), derive_seed(7, "x", "y"));
    }

    #[test]
    fn distinguishes_stage_and_key() {
        let base = derive_seed(7, "cluster", "k=5");
        assert_ne!(base, derive_seed(7, "cluster", "k=6"));
        assert_ne!(base, derive_seed(7, "select", "k=5"));
        assert_ne!(base, derive_seed(8, "cluster", "k=5"));
    }

    #[test]
    fn boundary_is_unambiguous() {
        // stage/key split must matter, not just the concatenation
        assert_ne!(derive_seed(1, "ab", "c"), derive_seed(1, "a", "bc"));
    }
}
