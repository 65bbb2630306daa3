//! Data whitening with a 9-bit maximal-length LFSR.
//!
//! Polynomial `x^9 + x^5 + 1`, seed `0x1FF`. The output bit is the register
//! LSB; the feedback `b0 ^ b5` enters at bit 8. The sequence restarts at the
//! seed for every call, so whitening is position-dependent within a block and
//! identical across runs.

use super::BitBlock;

const SEED: u16 = 0x1FF;

/// First `len` bits of the whitening sequence.
pub fn whitening_sequence(len: usize) -> Vec<u8> {
    let mut state = SEED;
    (0..len)
        .map(|_| {
            let out = (state & 1) as u8;
            let fb = (state ^ (state >> 5)) & 1;
            state = (state >> 1) | (fb << 8);
            out
        })
        .collect()
}

pub fn whiten(data: &BitBlock) -> BitBlock {
    let seq = whitening_sequence(data.len());
    BitBlock::new(data.iter().zip(seq).map(|(a, b)| a ^ b).collect())
}

/// XOR is its own inverse.
pub fn dewhiten(data: &BitBlock) -> BitBlock {
    whiten(data)
}
