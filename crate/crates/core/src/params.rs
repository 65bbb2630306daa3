//! PHY parameter set shared by every signal-domain operation.

use crate::error::{Error, Result};

/// Supported chirp bandwidths in Hz.
pub const BANDWIDTHS: [u32; 3] = [125_000, 250_000, 500_000];

pub const DEFAULT_PREAMBLE_LEN: u32 = 8;

pub const MAX_OVERSAMPLING: u32 = 64;

/// Validated spreading factor, bandwidth, oversampling and preamble length.
///
/// The receiver sample rate is always an integer multiple of the bandwidth,
/// `fs = os * bw`, so every derived integer quantity is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LoraParams {
    sf: u32,
    bw: u32,
    os: u32,
    n_pre: u32,
}

impl LoraParams {
    pub fn new(sf: u32, bw: u32, os: u32, n_pre: u32) -> Result<Self> {
        if !(6..=12).contains(&sf) {
            return Err(Error::SpreadingFactor(sf));
        }
        if !BANDWIDTHS.contains(&bw) {
            return Err(Error::Bandwidth(bw));
        }
        if !(1..=MAX_OVERSAMPLING).contains(&os) {
            return Err(Error::Oversampling(os));
        }
        if n_pre < 2 {
            return Err(Error::PreambleLength(n_pre));
        }
        Ok(Self { sf, bw, os, n_pre })
    }

    /// Same parameters with a different oversampling factor.
    pub fn with_os(self, os: u32) -> Result<Self> {
        Self::new(self.sf, self.bw, os, self.n_pre)
    }

    pub fn with_preamble(self, n_pre: u32) -> Result<Self> {
        Self::new(self.sf, self.bw, self.os, n_pre)
    }

    pub fn sf(&self) -> u32 {
        self.sf
    }

    pub fn bw(&self) -> u32 {
        self.bw
    }

    pub fn os(&self) -> u32 {
        self.os
    }

    pub fn n_pre(&self) -> u32 {
        self.n_pre
    }

    /// `2^sf`, the number of chips (and decision bins) per symbol.
    pub fn chips_per_symbol(&self) -> usize {
        1usize << self.sf
    }

    /// Samples per symbol at the receiver rate, `os * 2^sf`.
    pub fn samples_per_symbol(&self) -> usize {
        self.os as usize * self.chips_per_symbol()
    }

    /// Receiver sample rate in Hz.
    pub fn sample_rate(&self) -> u64 {
        self.os as u64 * self.bw as u64
    }

    /// Symbol duration `2^sf / bw` in seconds.
    pub fn symbol_duration(&self) -> f64 {
        self.chips_per_symbol() as f64 / self.bw as f64
    }

    /// Bits carried by one symbol before coding.
    pub fn bits_per_symbol(&self) -> usize {
        self.sf as usize
    }
}

/// Shorthand for [`LoraParams::new`].
pub fn make_params(sf: u32, bw: u32, os: u32, n_pre: u32) -> Result<LoraParams> {
    LoraParams::new(sf, bw, os, n_pre)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sf8_derived_values() {
        let p = make_params(8, 125_000, 1, 8).unwrap();
        assert_eq!(p.chips_per_symbol(), 256);
        assert_eq!(p.samples_per_symbol(), 256);
        assert!((p.symbol_duration() - 2.048e-3).abs() < 1e-15);
    }

    #[test]
    fn sf12_oversampled() {
        let p = make_params(12, 500_000, 2, 8).unwrap();
        assert_eq!(p.chips_per_symbol(), 4096);
        assert_eq!(p.samples_per_symbol(), 8192);
        assert_eq!(p.sample_rate(), 1_000_000);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(make_params(5, 125_000, 1, 8), Err(Error::SpreadingFactor(5))));
        assert!(matches!(make_params(13, 125_000, 1, 8), Err(Error::SpreadingFactor(13))));
        assert!(matches!(make_params(8, 100_000, 1, 8), Err(Error::Bandwidth(100_000))));
        assert!(matches!(make_params(8, 125_000, 0, 8), Err(Error::Oversampling(0))));
        assert!(matches!(make_params(8, 125_000, 65, 8), Err(Error::Oversampling(65))));
        assert!(make_params(12, 500_000, 64, 8).is_ok());
        assert!(matches!(make_params(8, 125_000, 1, 1), Err(Error::PreambleLength(1))));
    }

    #[test]
    fn derived_quantities_exact_for_all_valid() {
        for sf in 6..=12 {
            for &bw in &BANDWIDTHS {
                for os in 1..=4 {
                    let p = make_params(sf, bw, os, 8).unwrap();
                    assert_eq!(p.chips_per_symbol(), 1 << sf);
                    assert_eq!(p.sample_rate(), os as u64 * bw as u64);
                    // Ts * bw == 2^sf
                    assert_eq!(p.symbol_duration() * bw as f64, (1u64 << sf) as f64);
                }
            }
        }
    }
}
