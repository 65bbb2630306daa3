//! Systematic Hamming codes on 4-bit nibbles.
//!
//! Codeword layout is `d0 d1 d2 d3` followed by parity bits:
//!
//! ```text
//! p0 = d0 ^ d1 ^ d2
//! p1 = d1 ^ d2 ^ d3
//! p2 = d0 ^ d1 ^ d3
//! p3 = d0 ^ d1 ^ d2 ^ d3 ^ p0 ^ p1 ^ p2   (overall parity, cr = 4 only)
//! ```
//!
//! cr = 3 keeps `p0 p1 p2` (Hamming(7,4), single error correction), cr = 4
//! adds `p3` (extended Hamming(8,4), single correction plus double detection).
//! cr = 2 keeps `p0 p1` and cr = 1 sends a single data parity bit; both only
//! detect errors.

use super::{BitBlock, CodeRate};
use crate::error::{Error, Result};

/// Parity-check columns `(p0, p1, p2)` membership for `d0..d3`, then `p0..p2`.
const COLUMNS: [u8; 7] = [0b101, 0b111, 0b011, 0b110, 0b001, 0b010, 0b100];

/// Per-codeword decode outcomes summed over a block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecodeStats {
    /// Codewords in which one bit was corrected.
    pub corrected: usize,
    /// Codewords with a detected error that could not be corrected.
    pub uncorrectable: usize,
}

impl DecodeStats {
    pub fn any_uncorrectable(&self) -> bool {
        self.uncorrectable > 0
    }
}

fn parities(d: [u8; 4]) -> [u8; 3] {
    [d[0] ^ d[1] ^ d[2], d[1] ^ d[2] ^ d[3], d[0] ^ d[1] ^ d[3]]
}

fn encode_nibble(d: [u8; 4], cr: CodeRate, out: &mut Vec<u8>) {
    out.extend_from_slice(&d);
    let p = parities(d);
    match cr.value() {
        1 => out.push(d[0] ^ d[1] ^ d[2] ^ d[3]),
        2 => out.extend_from_slice(&p[..2]),
        3 => out.extend_from_slice(&p),
        _ => {
            out.extend_from_slice(&p);
            out.push(d.iter().chain(p.iter()).fold(0, |a, b| a ^ b));
        }
    }
}

/// Encodes each nibble of `data` into a `4 + cr` bit codeword.
pub fn hamming_encode(data: &BitBlock, cr: CodeRate) -> Result<BitBlock> {
    if !data.len().is_multiple_of(4) {
        return Err(Error::BitLength { len: data.len(), multiple: 4 });
    }
    let mut out = Vec::with_capacity(data.len() / 4 * cr.codeword_len());
    for nib in data.chunks(4) {
        encode_nibble([nib[0], nib[1], nib[2], nib[3]], cr, &mut out);
    }
    Ok(BitBlock::new(out))
}

fn syndrome(c: &[u8]) -> u8 {
    c[..7].iter().zip(COLUMNS.iter()).fold(0, |acc, (&bit, &col)| if bit == 1 { acc ^ col } else { acc })
}

/// Decodes codewords back to nibbles, correcting where the code allows.
///
/// Uncorrectable codewords return their (possibly wrong) systematic data bits.
pub fn hamming_decode(coded: &BitBlock, cr: CodeRate) -> Result<(BitBlock, DecodeStats)> {
    let n = cr.codeword_len();
    if !coded.len().is_multiple_of(n) {
        return Err(Error::BitLength { len: coded.len(), multiple: n });
    }
    let mut out = Vec::with_capacity(coded.len() / n * 4);
    let mut stats = DecodeStats::default();
    for cw in coded.chunks(n) {
        let mut c = [0u8; 8];
        c[..n].copy_from_slice(cw);
        match cr.value() {
            1 => {
                if c[..5].iter().fold(0, |a, b| a ^ b) != 0 {
                    stats.uncorrectable += 1;
                }
            }
            2 => {
                let p = parities([c[0], c[1], c[2], c[3]]);
                if p[0] != c[4] || p[1] != c[5] {
                    stats.uncorrectable += 1;
                }
            }
            3 => {
                let s = syndrome(&c);
                if s != 0 {
                    let pos = COLUMNS.iter().position(|&col| col == s).expect("all syndromes map");
                    c[pos] ^= 1;
                    stats.corrected += 1;
                }
            }
            _ => {
                let s = syndrome(&c);
                let overall = c.iter().fold(0, |a, b| a ^ b);
                match (s, overall) {
                    (0, 0) => {}
                    (0, _) => {
                        // error in the overall parity bit itself
                        stats.corrected += 1;
                    }
                    (s, 1) => {
                        let pos = COLUMNS.iter().position(|&col| col == s).expect("all syndromes map");
                        c[pos] ^= 1;
                        stats.corrected += 1;
                    }
                    _ => stats.uncorrectable += 1,
                }
            }
        }
        out.extend_from_slice(&c[..4]);
    }
    Ok((BitBlock::new(out), stats))
}
