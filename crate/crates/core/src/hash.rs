//! Stable, seeded 64-bit hashing.
//!
//! Everything that has to be reproducible across machines, input orderings and
//! shard layouts (id dedup, sampling ranks, synthetic id suffixes) goes through
//! these functions. They are not cryptographic.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Fixed key used for id fingerprints in the dedup structure.
pub(crate) const ID_KEY: u64 = 0x6471_6b69_745f_6964;

#[inline]
pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Keyed hash over a sequence of byte strings.
///
/// Parts are length-prefixed so that `["ab", "c"]` and `["a", "bc"]` hash
/// differently.
pub fn keyed_hash(seed: u64, parts: &[&[u8]]) -> u64 {
    let mut h = FNV_OFFSET ^ splitmix64(seed);
    for part in parts {
        for b in (part.len() as u64).to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        for &b in *part {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    splitmix64(h ^ seed.rotate_left(32))
}

/// Fingerprint of a record id, used by the duplicate-id tracker.
#[inline]
pub fn id_fingerprint(id: &str) -> u64 {
    keyed_hash(ID_KEY, &[id.as_bytes()])
}

/// Sampling rank of a record within its class. Selecting "n samples" from a
/// class means taking the n smallest ranks (ties by id).
#[inline]
pub fn sample_rank(seed: u64, class: &str, id: &str) -> u64 {
    keyed_hash(seed, &[class.as_bytes(), id.as_bytes()])
}
