//! Binary-reflected Gray mapping between `sf`-bit words and symbols.
//!
//! The receiver applies [`gray_index`] to demodulated symbols, so a symbol
//! off by one bin (cyclically) yields a word off by exactly one bit. The
//! transmitter applies the inverse, [`gray_deindex`].

use crate::error::{Error, Result};

fn check(word: u32, sf: u32) -> Result<()> {
    if word >= (1 << sf) {
        return Err(Error::SymbolOutOfRange { value: word, sf });
    }
    Ok(())
}

pub fn gray_index(word: u32, sf: u32) -> Result<u32> {
    check(word, sf)?;
    Ok(word ^ (word >> 1))
}

pub fn gray_deindex(gray: u32, sf: u32) -> Result<u32> {
    check(gray, sf)?;
    let mut out = gray;
    let mut shift = gray >> 1;
    while shift != 0 {
        out ^= shift;
        shift >>= 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_fixed() {
        assert_eq!(gray_index(0, 8).unwrap(), 0);
        assert_eq!(gray_deindex(0, 8).unwrap(), 0);
    }

    #[test]
    fn out_of_range() {
        assert!(gray_index(256, 8).is_err());
        assert!(gray_deindex(64, 6).is_err());
    }

    #[test]
    fn bijection_and_adjacency_all_sf() {
        for sf in 6..=12 {
            let m = 1u32 << sf;
            for w in 0..m {
                assert_eq!(gray_deindex(gray_index(w, sf).unwrap(), sf).unwrap(), w);
                assert_eq!(gray_index(gray_deindex(w, sf).unwrap(), sf).unwrap(), w);
                // cyclic: m-1 and 0 are adjacent too
                let next = (w + 1) % m;
                let diff = gray_index(w, sf).unwrap() ^ gray_index(next, sf).unwrap();
                assert_eq!(diff.count_ones(), 1, "sf {sf} w {w}");
            }
        }
    }
}
