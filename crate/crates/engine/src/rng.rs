//! The guest's random source: OS entropy, or a deterministic stream-cipher
//! expansion of a fixed seed.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use rand::rngs::OsRng;
use rand::RngCore;
use rand_chacha::ChaCha20Rng;
use rand_chacha::rand_core::SeedableRng;

use crate::error::EngineError;

/// Per-call cap on random bytes: 64 KiB.
pub const MAX_RANDOM_FILL: usize = 64 * 1024;

/// Where random bytes come from.  The seeded variant advances with every
/// call, so consecutive requests draw disjoint stream segments.
pub enum RngState {
    Seeded(Box<ChaCha20Rng>),
    Os,
}

impl RngState {
    pub fn new(seed: Option<[u8; 32]>) -> RngState {
        match seed {
            Some(seed) => RngState::Seeded(Box::new(ChaCha20Rng::from_seed(seed))),
            None => RngState::Os,
        }
    }

    pub(crate) fn fill(&mut self, buf: &mut [u8]) -> Result<(), EngineError> {
        if buf.len() > MAX_RANDOM_FILL {
            return Err(EngineError::TooLarge);
        }
        match self {
            RngState::Seeded(rng) => rng.fill_bytes(buf),
            RngState::Os => OsRng.fill_bytes(buf),
        }
        Ok(())
    }
}

/// Draws `n` random bytes from `state`.
pub fn random_fill(state: &mut RngState, n: usize) -> Result<Vec<u8>, EngineError> {
    let mut out = vec![0u8; n];
    state.fill(&mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent reference implementation of the ChaCha20 block function,
    /// used as the oracle for the seeded stream.
    mod chacha_oracle {
        fn quarter_round(state: &mut [u32; 16], a: usize, b: usize, c: usize, d: usize) {
            state[a] = state[a].wrapping_add(state[b]);
            state[d] = (state[d] ^ state[a]).rotate_left(16);
            state[c] = state[c].wrapping_add(state[d]);
            state[b] = (state[b] ^ state[c]).rotate_left(12);
            state[a] = state[a].wrapping_add(state[b]);
            state[d] = (state[d] ^ state[a]).rotate_left(8);
            state[c] = state[c].wrapping_add(state[d]);
            state[b] = (state[b] ^ state[c]).rotate_left(7);
        }

        /// One 64-byte keystream block for (key, counter, nonce).
        pub fn block(key: &[u8; 32], counter: u32, nonce: &[u8; 12]) -> [u8; 64] {
            let mut state = [0u32; 16];
            state[0] = 0x6170_7865;
            state[1] = 0x3320_646e;
            state[2] = 0x7962_2d32;
            state[3] = 0x6b20_6574;
            for i in 0..8 {
                state[4 + i] =
                    u32::from_le_bytes(key[4 * i..4 * i + 4].try_into().unwrap());
            }
            state[12] = counter;
            for i in 0..3 {
                state[13 + i] =
                    u32::from_le_bytes(nonce[4 * i..4 * i + 4].try_into().unwrap());
            }
            let mut working = state;
            for _ in 0..10 {
                quarter_round(&mut working, 0, 4, 8, 12);
                quarter_round(&mut working, 1, 5, 9, 13);
                quarter_round(&mut working, 2, 6, 10, 14);
                quarter_round(&mut working, 3, 7, 11, 15);
                quarter_round(&mut working, 0, 5, 10, 15);
                quarter_round(&mut working, 1, 6, 11, 12);
                quarter_round(&mut working, 2, 7, 8, 13);
                quarter_round(&mut working, 3, 4, 9, 14);
            }
            let mut out = [0u8; 64];
            for i in 0..16 {
                let word = working[i].wrapping_add(state[i]);
                out[4 * i..4 * i + 4].copy_from_slice(&word.to_le_bytes());
            }
            out
        }
    }

    #[test]
    fn seeded_stream_matches_reference_cipher() {
        // The zero-seed stream must equal the ChaCha20 keystream for the
        // all-zero key and nonce, counter starting at 0.
        let expected = chacha_oracle::block(&[0u8; 32], 0, &[0u8; 12]);
        let mut state = RngState::new(Some([0u8; 32]));
        let bytes = random_fill(&mut state, 64).unwrap();
        assert_eq!(bytes, expected);
        // First 8 bytes frozen from the oracle.
        assert_eq!(
            &bytes[..8],
            &[0x76, 0xb8, 0xe0, 0xad, 0xa0, 0xf1, 0x3d, 0x90]
        );
    }

    #[test]
    fn same_seed_same_output() {
        let mut a = RngState::new(Some([7u8; 32]));
        let mut b = RngState::new(Some([7u8; 32]));
        assert_eq!(random_fill(&mut a, 256).unwrap(), random_fill(&mut b, 256).unwrap());
    }

    #[test]
    fn consecutive_calls_advance_the_stream() {
        let mut state = RngState::new(Some([7u8; 32]));
        let first = random_fill(&mut state, 32).unwrap();
        let second = random_fill(&mut state, 32).unwrap();
        assert_ne!(first, second);

        // The concatenation equals one 64-byte draw from a fresh state.
        let mut fresh = RngState::new(Some([7u8; 32]));
        let combined = random_fill(&mut fresh, 64).unwrap();
        assert_eq!(&combined[..32], &first[..]);
        assert_eq!(&combined[32..], &second[..]);
    }

    #[test]
    fn per_call_limit() {
        let mut state = RngState::new(Some([0u8; 32]));
        assert!(random_fill(&mut state, MAX_RANDOM_FILL).is_ok());
        assert!(matches!(
            random_fill(&mut state, MAX_RANDOM_FILL + 1),
            Err(EngineError::TooLarge)
        ));
    }

    #[test]
    fn os_mode_differs_between_draws() {
        let mut state = RngState::new(None);
        let a = random_fill(&mut state, 32).unwrap();
        let b = random_fill(&mut state, 32).unwrap();
        assert_ne!(a, b);
    }
}
