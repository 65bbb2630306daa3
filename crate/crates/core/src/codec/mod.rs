//! Bit-domain chain between payload bits and modulation symbols.
//!
//! Transmit order: Hamming encode, whiten, interleave, Gray mapping.
//! Receive applies the inverses in reverse order.

mod gray;
mod hamming;
mod interleave;
mod whitening;

use std::ops::{Deref, DerefMut};

pub use gray::{gray_deindex, gray_index};
pub use hamming::{hamming_decode, hamming_encode, DecodeStats};
pub use interleave::{deinterleave, interleave};
pub use whitening::{dewhiten, whiten, whitening_sequence};

use crate::error::{Error, Result};
use crate::modulator::Symbol;
use crate::params::LoraParams;

/// Sequence of bits, one per byte, each 0 or 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BitBlock(Vec<u8>);

impl BitBlock {
    pub fn new(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        BitBlock(bits)
    }

    pub fn zeros(len: usize) -> Self {
        BitBlock(vec![0; len])
    }

    /// Expands bytes MSB first.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        BitBlock(bytes.iter().flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1)).collect())
    }

    /// Packs bits MSB first; a trailing partial byte is zero-filled.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.chunks(8).map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b << (7 - i)))).collect()
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.0
    }

    /// Appends zeros up to the next multiple of `multiple`.
    pub fn pad_to(&mut self, multiple: usize) {
        let rem = self.0.len() % multiple;
        if rem != 0 {
            self.0.resize(self.0.len() + multiple - rem, 0);
        }
    }
}

impl Deref for BitBlock {
    type Target = Vec<u8>;

    fn deref(&self) -> &Vec<u8> {
        &self.0
    }
}

impl DerefMut for BitBlock {
    fn deref_mut(&mut self) -> &mut Vec<u8> {
        &mut self.0
    }
}

impl From<Vec<u8>> for BitBlock {
    fn from(bits: Vec<u8>) -> Self {
        BitBlock::new(bits)
    }
}

/// Hamming code rate: `4 + cr` coded bits per 4 data bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CodeRate(u32);

impl CodeRate {
    pub const CR_4_5: CodeRate = CodeRate(1);
    pub const CR_4_6: CodeRate = CodeRate(2);
    pub const CR_4_7: CodeRate = CodeRate(3);
    pub const CR_4_8: CodeRate = CodeRate(4);

    pub fn new(cr: u32) -> Result<Self> {
        if !(1..=4).contains(&cr) {
            return Err(Error::CodeRate(cr));
        }
        Ok(CodeRate(cr))
    }

    pub fn value(self) -> u32 {
        self.0
    }

    pub fn codeword_len(self) -> usize {
        4 + self.0 as usize
    }
}

/// Data bits per interleaving block (`sf` nibbles).
pub fn data_bits_per_block(sf: u32) -> usize {
    4 * sf as usize
}

/// Symbols per interleaving block.
pub fn symbols_per_block(cr: CodeRate) -> usize {
    cr.codeword_len()
}

/// Maps payload bits to symbols. The payload must fill whole interleaving
/// blocks (`4 * sf` bits each).
pub fn tx_chain(payload: &BitBlock, params: &LoraParams, cr: CodeRate) -> Result<Vec<Symbol>> {
    let sf = params.sf();
    let block = data_bits_per_block(sf);
    if !payload.len().is_multiple_of(block) {
        return Err(Error::BitLength { len: payload.len(), multiple: block });
    }
    let coded = whiten(&hamming_encode(payload, cr)?);
    let cw_len = cr.codeword_len();
    let mut out = Vec::with_capacity(payload.len() / block * cw_len);
    for chunk in coded.chunks(sf as usize * cw_len) {
        for word in interleave(&BitBlock::new(chunk.to_vec()), sf, cr)? {
            out.push(Symbol::new(gray_deindex(word, sf)?, sf)?);
        }
    }
    Ok(out)
}

/// Inverse of [`tx_chain`]. Returns the payload bits and decoder statistics.
pub fn rx_chain(symbols: &[Symbol], params: &LoraParams, cr: CodeRate) -> Result<(BitBlock, DecodeStats)> {
    let sf = params.sf();
    let per_block = symbols_per_block(cr);
    if !symbols.len().is_multiple_of(per_block) {
        return Err(Error::BitLength { len: symbols.len(), multiple: per_block });
    }
    let mut coded = BitBlock::default();
    for block in symbols.chunks(per_block) {
        let words = block.iter().map(|s| gray_index(s.value(), sf)).collect::<Result<Vec<_>>>()?;
        coded.extend(deinterleave(&words, sf, cr)?.iter());
    }
    hamming_decode(&dewhiten(&coded), cr)
}
