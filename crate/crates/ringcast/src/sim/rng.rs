//! Named deterministic random streams. One scenario seed fans out into
//! independent sub-streams so that, e.g., extra protocol jitter draws never
//! perturb the mobility sample sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-subsystem RNG streams derived from one seed.
#[derive(Debug, Clone)]
pub struct RngStreams {
    pub mobility: ChaCha8Rng,
    pub protocol: ChaCha8Rng,
    pub channel: ChaCha8Rng,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        let derive = |tag: u64| ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(tag)));
        Self {
            mobility: derive(1),
            protocol: derive(2),
            channel: derive(3),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_independent() {
        let mut a = RngStreams::new(42);
        let mut b = RngStreams::new(42);
        let seq_a: Vec<u64> = (0..16).map(|_| a.protocol.random()).collect();
        // Consuming another stream must not shift this one.
        let _: u64 = b.mobility.random();
        let _: u64 = b.channel.random();
        let seq_b: Vec<u64> = (0..16).map(|_| b.protocol.random()).collect();
        assert_eq!(seq_a, seq_b);

        let mut c = RngStreams::new(43);
        let seq_c: Vec<u64> = (0..16).map(|_| c.protocol.random()).collect();
        assert_ne!(seq_a, seq_c);
    }
}
