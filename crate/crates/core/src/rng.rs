//! Seed derivation for independent random substreams.
//!
//! A trial owns a single `trial_seed`; every randomized component (node
//! placement, elasticity draw, WTP draws, per-round visit shuffles, ...)
//! derives its own generator from that seed plus a purpose tag. The paired
//! unicast baseline re-derives the same world substreams, so both arms of a
//! trial see identical generated inputs. Visit order is the exception: each
//! arm draws the shuffle stream keyed by whether it serves peers, so the
//! baseline is an independent operational run of the same world rather than
//! a lockstep replay, while two arms in the same mode stay bit-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_TOPOLOGY: u64 = 1;
pub const STREAM_MAX_DEMAND: u64 = 2;
pub const STREAM_ELASTICITY: u64 = 3;
pub const STREAM_WTP: u64 = 4;
pub const STREAM_SHUFFLE: u64 = 5;
pub const STREAM_SHUFFLE_UNICAST: u64 = 6;

/// Shuffle purpose tag for an arm: keyed by the arm's peer-serving mode.
pub fn shuffle_stream(peer_serving: bool) -> u64 {
    if peer_serving {
        STREAM_SHUFFLE
    } else {
        STREAM_SHUFFLE_UNICAST
    }
}

/// SplitMix64 finalizer over (base, purpose); decorrelates substream seeds.
pub fn derive_seed(base: u64, purpose: u64) -> u64 {
    let mut z = base ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic generator for one purpose within one trial.
pub fn stream_rng(base: u64, purpose: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, purpose))
}
