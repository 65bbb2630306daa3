//! Discrete-time CSS symbol generation.
//!
//! A symbol `S` is a linear up-sweep that starts at `S * bw / 2^sf - bw / 2`,
//! folds from `+bw/2` to `-bw/2` at chip `2^sf - S`, and ends where it began.
//! Every symbol starts at phase zero.

use std::f64::consts::TAU;
use std::ops::Deref;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::LoraParams;

/// A data symbol in `[0, 2^sf)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(u32);

impl Symbol {
    pub fn new(value: u32, sf: u32) -> Result<Self> {
        if sf >= 32 || value >= (1u32 << sf) {
            return Err(Error::SymbolOutOfRange { value, sf });
        }
        Ok(Symbol(value))
    }

    /// Builds a symbol known to be in range for `params`.
    pub fn for_params(value: u32, params: &LoraParams) -> Result<Self> {
        Self::new(value, params.sf())
    }

    pub fn value(self) -> u32 {
        self.0
    }

    /// Initial chirp frequency offset `S * bw / 2^sf` in Hz.
    pub fn frequency_offset(self, params: &LoraParams) -> f64 {
        self.0 as f64 * params.bw() as f64 / params.chips_per_symbol() as f64
    }

    /// Sample index at which the instantaneous frequency folds.
    pub fn fold_index(self, params: &LoraParams) -> usize {
        (params.chips_per_symbol() - self.0 as usize) * params.os() as usize
    }
}

/// Complex baseband samples with their sample rate in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct IqBuffer {
    samples: Vec<Complex64>,
    rate: f64,
}

impl IqBuffer {
    pub fn new(samples: Vec<Complex64>, rate: f64) -> Self {
        assert!(rate > 0.0, "sample rate must be positive");
        Self { samples, rate }
    }

    pub fn empty(rate: f64) -> Self {
        Self::new(Vec::new(), rate)
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn extend_from_slice(&mut self, other: &[Complex64]) {
        self.samples.extend_from_slice(other);
    }

    /// Copies `len` samples starting at `start`; positions outside the buffer
    /// read as zero.
    pub fn window(&self, start: isize, len: usize) -> IqBuffer {
        let mut out = vec![Complex64::new(0.0, 0.0); len];
        for (i, v) in out.iter_mut().enumerate() {
            let idx = start + i as isize;
            if idx >= 0 && (idx as usize) < self.samples.len() {
                *v = self.samples[idx as usize];
            }
        }
        IqBuffer::new(out, self.rate)
    }
}

impl Deref for IqBuffer {
    type Target = [Complex64];

    fn deref(&self) -> &[Complex64] {
        &self.samples
    }
}

/// One waveform segment of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chirp {
    /// Up-sweep carrying a symbol value (0 is the plain upchirp).
    Up(Symbol),
    /// Full downchirp.
    Down,
    /// First quarter of a downchirp.
    QuarterDown,
}

impl Chirp {
    /// Duration in chips.
    pub fn chips(self, params: &LoraParams) -> usize {
        match self {
            Chirp::Up(_) | Chirp::Down => params.chips_per_symbol(),
            Chirp::QuarterDown => params.chips_per_symbol() / 4,
        }
    }

    pub fn samples(self, params: &LoraParams) -> usize {
        self.chips(params) * params.os() as usize
    }

    /// Phase in cycles at continuous local time `t` seconds from the segment
    /// start. Used when the receiver clock differs from the transmitter's.
    pub fn phase_cycles_at(self, t: f64, params: &LoraParams) -> f64 {
        let bw = params.bw() as f64;
        let m = params.chips_per_symbol() as f64;
        let ts = m / bw;
        let (s, sign) = match self {
            Chirp::Up(s) => (s.value() as f64, 1.0),
            Chirp::Down | Chirp::QuarterDown => (0.0, -1.0),
        };
        let t_fold = (m - s) / bw;
        let start = if t < t_fold { -0.5 * bw } else { -1.5 * bw };
        sign * (bw / (2.0 * ts) * t * t + (s * bw / m + start) * t)
    }
}

/// Phase of sample `n` of symbol `s` as an exact fraction of a cycle.
///
/// The exponent is a rational number with denominator `2 * 2^sf * os^2`; the
/// numerator is reduced modulo that denominator in integer arithmetic so the
/// result carries no accumulated rounding. With `sf <= 12` and `os <= 64`
/// every term stays below `2^40`.
fn symbol_phase(n: usize, s: u32, params: &LoraParams) -> f64 {
    let m = params.chips_per_symbol() as i64;
    let os = params.os() as i64;
    let n = n as i64;
    let s = s as i64;
    let folded = n >= (m - s) * os;
    let mut num = n * n + 2 * os * n * s - os * n * m;
    if folded {
        num -= 2 * os * n * m;
    }
    let den = 2 * m * os * os;
    num.rem_euclid(den) as f64 / den as f64
}

/// Samples of one symbol at `fs = os * bw`.
pub fn gen_symbol(s: Symbol, params: &LoraParams) -> IqBuffer {
    let len = params.samples_per_symbol();
    let samples = (0..len).map(|n| Complex64::from_polar(1.0, TAU * symbol_phase(n, s.value(), params))).collect();
    IqBuffer::new(samples, params.sample_rate() as f64)
}

pub fn gen_upchirp(params: &LoraParams) -> IqBuffer {
    gen_symbol(Symbol(0), params)
}

pub fn gen_downchirp(params: &LoraParams) -> IqBuffer {
    let up = gen_upchirp(params);
    let rate = up.rate();
    IqBuffer::new(up.into_samples().into_iter().map(|z| z.conj()).collect(), rate)
}

/// Concatenates symbols with no gaps.
pub fn modulate_symbols(symbols: &[Symbol], params: &LoraParams) -> IqBuffer {
    render(symbols.iter().map(|&s| Chirp::Up(s)), params)
}

/// Renders a sequence of chirp segments at the nominal rate.
pub fn render<I>(segments: I, params: &LoraParams) -> IqBuffer
where
    I: IntoIterator<Item = Chirp>,
{
    let mut out = IqBuffer::empty(params.sample_rate() as f64);
    let down = gen_downchirp(params);
    for seg in segments {
        match seg {
            Chirp::Up(s) => out.extend_from_slice(&gen_symbol(s, params)),
            Chirp::Down => out.extend_from_slice(&down),
            Chirp::QuarterDown => out.extend_from_slice(&down[..seg.samples(params)]),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::make_params;

    fn p(sf: u32, os: u32) -> LoraParams {
        make_params(sf, 125_000, os, 8).unwrap()
    }

    #[test]
    fn upchirp_starts_at_one() {
        let up = gen_upchirp(&p(8, 1));
        assert!((up[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let down = gen_downchirp(&p(8, 1));
        assert!((down[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn fold_index_sf7() {
        let params = p(7, 1);
        assert_eq!(Symbol::new(64, 7).unwrap().fold_index(&params), 64);
    }

    #[test]
    fn phase_of_sample_one_sf7() {
        // 2*pi*(1/256 + 1/128 - 1/2) evaluated by hand
        let params = p(7, 1);
        let x = gen_symbol(Symbol::new(1, 7).unwrap(), &params);
        let expected = Complex64::from_polar(1.0, TAU * (1.0 / 256.0 + 1.0 / 128.0 - 0.5));
        assert!((x[1] - expected).norm() < 1e-12);
    }

    #[test]
    fn symbol_range_checked() {
        assert!(Symbol::new(255, 8).is_ok());
        assert!(Symbol::new(256, 8).is_err());
    }

    #[test]
    fn upchirp_is_symbol_zero_and_conjugate_of_downchirp() {
        for os in 1..=3 {
            let params = p(9, os);
            let up = gen_upchirp(&params);
            let s0 = gen_symbol(Symbol(0), &params);
            let down = gen_downchirp(&params);
            assert_eq!(up, s0);
            for (u, d) in up.iter().zip(down.iter()) {
                assert!((u.norm() - 1.0).abs() < 1e-12);
                assert!((u - d.conj()).norm() < 1e-15);
                assert!((u * d - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn modulate_lengths() {
        let params = p(8, 2);
        assert!(modulate_symbols(&[], &params).is_empty());
        let one = modulate_symbols(&[Symbol(17)], &params);
        assert_eq!(one, gen_symbol(Symbol(17), &params));
        let three = modulate_symbols(&[Symbol(1), Symbol(2), Symbol(3)], &params);
        assert_eq!(three.len(), 3 * 2 * 256);
    }

    #[test]
    fn os1_matches_simplified_closed_form() {
        // At fs = bw the fold term is an integer number of cycles and drops out.
        let params = p(8, 1);
        let m = 256.0;
        for s in [0u32, 1, 100, 255] {
            let x = gen_symbol(Symbol(s), &params);
            for (n, v) in x.iter().enumerate() {
                let n = n as f64;
                let ph = TAU * (n * n / (2.0 * m) + (s as f64 / m - 0.5) * n);
                assert!((v - Complex64::from_polar(1.0, ph)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn continuous_phase_matches_discrete() {
        for os in [1, 2, 4] {
            let params = p(7, os);
            let fs = params.sample_rate() as f64;
            for s in [0u32, 5, 64, 127] {
                let x = gen_symbol(Symbol(s), &params);
                for (n, v) in x.iter().enumerate() {
                    let ph = Chirp::Up(Symbol(s)).phase_cycles_at(n as f64 / fs, &params);
                    assert!((v - Complex64::from_polar(1.0, TAU * ph)).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn instantaneous_frequency_folds_once() {
        let params = p(7, 4);
        let fs = params.sample_rate() as f64;
        let bw = params.bw() as f64;
        for s in [1u32, 30, 64, 127] {
            let x = gen_symbol(Symbol(s), &params);
            let freq: Vec<f64> = x.windows(2).map(|w| (w[1] * w[0].conj()).arg() / TAU * fs).collect();
            let fold = Symbol(s).fold_index(&params);
            let mut drops = Vec::new();
            for i in 1..freq.len() {
                let step = freq[i] - freq[i - 1];
                if step < -0.5 * bw {
                    drops.push(i);
                } else {
                    assert!(step > 0.0);
                }
            }
            // The jump shows up between the differences that straddle n_fold.
            assert_eq!(drops, vec![fold]);
        }
    }
}
