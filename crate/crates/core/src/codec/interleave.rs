//! Diagonal block interleaver.
//!
//! One block holds `sf` codewords of `4 + cr` bits. It is spread over
//! `4 + cr` words of `sf` bits: bit `i` of codeword `j` lands in word `i`
//! at bit position `(i + j) mod sf`. A corrupted word therefore touches each
//! codeword at most once.

use super::{BitBlock, CodeRate};
use crate::error::{Error, Result};

pub fn interleave(block: &BitBlock, sf: u32, cr: CodeRate) -> Result<Vec<u32>> {
    let sf_us = sf as usize;
    let n = cr.codeword_len();
    if block.len() != sf_us * n {
        return Err(Error::LengthMismatch { expected: sf_us * n, actual: block.len() });
    }
    let mut words = vec![0u32; n];
    for (i, word) in words.iter_mut().enumerate() {
        for j in 0..sf_us {
            let bit = block[j * n + i] as u32;
            *word |= bit << ((i + j) % sf_us);
        }
    }
    Ok(words)
}

pub fn deinterleave(words: &[u32], sf: u32, cr: CodeRate) -> Result<BitBlock> {
    let sf_us = sf as usize;
    let n = cr.codeword_len();
    if words.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: words.len() });
    }
    let mut bits = vec![0u8; sf_us * n];
    for (i, &word) in words.iter().enumerate() {
        for j in 0..sf_us {
            bits[j * n + i] = ((word >> ((i + j) % sf_us)) & 1) as u8;
        }
    }
    Ok(BitBlock::new(bits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrong_length_rejected() {
        assert!(interleave(&BitBlock::zeros(10), 8, CodeRate::CR_4_8).is_err());
        assert!(deinterleave(&[0; 7], 8, CodeRate::CR_4_8).is_err());
    }

    #[test]
    fn word_flip_touches_one_bit_per_codeword() {
        for sf in 6..=12u32 {
            for cr in 1..=4 {
                let cr = CodeRate::new(cr).unwrap();
                let n = cr.codeword_len();
                let block = BitBlock::zeros(sf as usize * n);
                let words = interleave(&block, sf, cr).unwrap();
                for w in 0..n {
                    for bit in 0..sf {
                        let mut bad = words.clone();
                        bad[w] ^= 1 << bit;
                        let out = deinterleave(&bad, sf, cr).unwrap();
                        let flipped: Vec<usize> = (0..out.len()).filter(|&k| out[k] == 1).collect();
                        assert_eq!(flipped.len(), 1);
                        // codeword index and bit index within it
                        let (cw, b) = (flipped[0] / n, flipped[0] % n);
                        assert_eq!(b, w);
                        assert_eq!(cw, (bit as usize + sf as usize - w % sf as usize) % sf as usize);
                    }
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn roundtrip_and_permutation(sf in 6u32..=12, cr in 1u32..=4, seed in any::<u64>()) {
            let cr = CodeRate::new(cr).unwrap();
            let len = sf as usize * cr.codeword_len();
            let bits: Vec<u8> = (0..len).map(|i| ((seed.rotate_left(i as u32 % 64) ^ i as u64) & 1) as u8).collect();
            let block = BitBlock::new(bits);
            let words = interleave(&block, sf, cr).unwrap();
            prop_assert!(words.iter().all(|&w| w < (1 << sf)));
            let ones_in: u32 = block.iter().map(|&b| b as u32).sum();
            let ones_out: u32 = words.iter().map(|w| w.count_ones()).sum();
            prop_assert_eq!(ones_in, ones_out);
            prop_assert_eq!(deinterleave(&words, sf, cr).unwrap(), block);
        }
    }
}
