//! Keyed bijective relabeling of the 32-bit address space.
//!
//! A balanced Feistel network over the two 16-bit halves gives a structural
//! bijection for any key with O(1) memory, deterministic across matrices
//! (the same address always maps the same way) and invertible for
//! authorized deanonymization. The round mixer is a keyed integer hash, not
//! a vetted cipher; no cryptographic strength is claimed.

use crate::matrix::TrafficMatrix;
use crate::subrange::SubrangeSpec;
use thiserror::Error;

pub const DEFAULT_ROUNDS: u8 = 4;
/// Default cap on how many addresses [`anonymize_range`] will materialize.
pub const DEFAULT_RANGE_IMAGE_CAP: u64 = 1 << 24;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnonError {
    /// Carries only the offending length so key material never reaches
    /// error output.
    #[error("key must be 32 hex characters (128 bits), got {got} characters")]
    BadKey { got: usize },
    #[error("rounds must be between 1 and 16")]
    BadRounds,
    #[error(
        "range covers {addresses} addresses, over the cap of {cap}; \
         anonymize the matrix first and select in anonymized space instead"
    )]
    RangeTooLarge { addresses: u64, cap: u64 },
}

/// A 128-bit secret plus round count; induces the permutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnonKey {
    subkeys: [u64; 16],
    rounds: u8,
}

impl AnonKey {
    pub fn new(key: [u8; 16]) -> Self {
        Self::with_rounds(key, DEFAULT_ROUNDS).expect("default rounds are valid")
    }

    pub fn with_rounds(key: [u8; 16], rounds: u8) -> Result<Self, AnonError> {
        if rounds == 0 || rounds > 16 {
            return Err(AnonError::BadRounds);
        }
        let lo = u64::from_le_bytes(key[..8].try_into().expect("8 bytes"));
        let hi = u64::from_le_bytes(key[8..].try_into().expect("8 bytes"));
        let mut subkeys = [0u64; 16];
        for (i, sk) in subkeys.iter_mut().enumerate() {
            *sk = mix64(
                lo ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ hi.rotate_left(i as u32),
            );
        }
        Ok(Self { subkeys, rounds })
    }

    /// Parses 32 hex characters into a key with the default round count.
    pub fn from_hex(s: &str) -> Result<Self, AnonError> {
        let s = s.trim();
        if s.len() != 32 || !s.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(AnonError::BadKey { got: s.len() });
        }
        let mut key = [0u8; 16];
        for (i, slot) in key.iter_mut().enumerate() {
            *slot = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).expect("hex checked");
        }
        Ok(Self::new(key))
    }

    pub fn rounds(&self) -> u8 {
        self.rounds
    }

    /// The forward permutation of one address.
    pub fn permute(&self, addr: u32) -> u32 {
        let mut left = (addr >> 16) as u16;
        let mut right = (addr & 0xFFFF) as u16;
        for round in 0..self.rounds {
            let next_right = left ^ round_mix(right, self.subkeys[round as usize]);
            left = right;
            right = next_right;
        }
        (left as u32) << 16 | right as u32
    }

    /// The inverse permutation: rounds replayed in reverse.
    pub fn invert(&self, addr: u32) -> u32 {
        let mut left = (addr >> 16) as u16;
        let mut right = (addr & 0xFFFF) as u16;
        for round in (0..self.rounds).rev() {
            let prev_left = right ^ round_mix(left, self.subkeys[round as usize]);
            right = left;
            left = prev_left;
        }
        (left as u32) << 16 | right as u32
    }
}

// splitmix64 finalizer: full-avalanche 64-bit mix
fn mix64(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn round_mix(half: u16, subkey: u64) -> u16 {
    mix64(half as u64 ^ subkey) as u16
}

/// Relabels every coordinate through the key's permutation; counts are
/// untouched and the result is re-canonicalized.
pub fn anonymize_matrix(matrix: &TrafficMatrix, key: &AnonKey) -> TrafficMatrix {
    TrafficMatrix::from_triples(
        matrix
            .iter()
            .map(|(c, n)| (key.permute(c.src), key.permute(c.dst), n)),
    )
    .expect("a bijection cannot merge coordinates")
}

/// Undoes [`anonymize_matrix`] under the same key.
pub fn deanonymize_matrix(matrix: &TrafficMatrix, key: &AnonKey) -> TrafficMatrix {
    TrafficMatrix::from_triples(
        matrix
            .iter()
            .map(|(c, n)| (key.invert(c.src), key.invert(c.dst), n)),
    )
    .expect("a bijection cannot merge coordinates")
}

/// Maps a subrange into anonymized space by materializing its image.
///
/// The permutation fragments intervals, so the result may hold up to one
/// interval per address; `cap` bounds the materialization.
pub fn anonymize_range(
    range: &SubrangeSpec,
    key: &AnonKey,
    cap: u64,
) -> Result<SubrangeSpec, AnonError> {
    let addresses = range.address_count();
    if addresses > cap {
        return Err(AnonError::RangeTooLarge { addresses, cap });
    }
    let mut image: Vec<u32> = range.iter_addresses().map(|a| key.permute(a)).collect();
    image.sort_unstable();
    let spec = SubrangeSpec::new(range.name(), image.into_iter().map(|a| (a, a)))
        .expect("degenerate intervals are valid");
    Ok(spec)
}
