//! Non-coherent symbol decisions.
//!
//! Two routes compute the same statistic: a bank of `2^sf` matched filters,
//! and dechirping followed by a DFT. At `os = 1` they agree bin for bin.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::modulator::{gen_downchirp, gen_symbol, IqBuffer, Symbol};
use crate::params::LoraParams;

/// Decision bins and the argmax symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct DemodResult {
    pub symbol: Symbol,
    /// `|X_k|` for every decision bin `k` in `[0, 2^sf)`.
    pub magnitudes: Vec<f64>,
    pub peak_magnitude: f64,
}

impl DemodResult {
    fn from_magnitudes(magnitudes: Vec<f64>, sf: u32) -> Self {
        let (idx, peak) = argmax(&magnitudes);
        DemodResult {
            symbol: Symbol::new(idx as u32, sf).expect("bin index below 2^sf"),
            magnitudes,
            peak_magnitude: peak,
        }
    }

    /// Largest magnitude outside the peak bin.
    pub fn second_magnitude(&self) -> f64 {
        let peak = self.symbol.value() as usize;
        self.magnitudes.iter().enumerate().filter(|&(i, _)| i != peak).map(|(_, &m)| m).fold(0.0, f64::max)
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    (best, best_val)
}

/// Dechirp + DFT demodulator with a cached transform plan.
///
/// Not `Sync`-shared by design of the scratch buffer; create one per worker.
pub struct Demodulator {
    params: LoraParams,
    downchirp: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for Demodulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Demodulator").field("params", &self.params).finish()
    }
}

impl Demodulator {
    pub fn new(params: &LoraParams) -> Self {
        let len = params.samples_per_symbol();
        let fft = FftPlanner::new().plan_fft_forward(len);
        let scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        Demodulator {
            params: *params,
            downchirp: gen_downchirp(params).into_samples(),
            fft,
            buf: vec![Complex64::new(0.0, 0.0); len],
            scratch,
        }
    }

    pub fn params(&self) -> &LoraParams {
        &self.params
    }

    fn check_len(&self, len: usize) -> Result<()> {
        let expected = self.params.samples_per_symbol();
        if len != expected {
            return Err(Error::LengthMismatch { expected, actual: len });
        }
        Ok(())
    }

    /// Full `os * 2^sf`-point spectrum of the dechirped block.
    pub fn spectrum(&mut self, y: &[Complex64]) -> Result<&[Complex64]> {
        self.check_len(y.len())?;
        for ((b, &s), &d) in self.buf.iter_mut().zip(y).zip(&self.downchirp) {
            *b = s * d;
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        Ok(&self.buf)
    }

    /// Decision magnitudes: for `os > 1`, bins `k + m * 2^sf` are summed into
    /// decision bin `k`.
    pub fn magnitudes(&mut self, y: &[Complex64]) -> Result<Vec<f64>> {
        let chips = self.params.chips_per_symbol();
        let spec = self.spectrum(y)?;
        let mut mags = vec![0.0; chips];
        for (i, z) in spec.iter().enumerate() {
            mags[i % chips] += z.norm();
        }
        Ok(mags)
    }

    pub fn demod(&mut self, y: &[Complex64]) -> Result<DemodResult> {
        let mags = self.magnitudes(y)?;
        Ok(DemodResult::from_magnitudes(mags, self.params.sf()))
    }
}

/// Multiplies `y` by the conjugate reference upchirp.
pub fn dechirp(y: &IqBuffer, params: &LoraParams) -> Result<IqBuffer> {
    let expected = params.samples_per_symbol();
    if y.len() != expected {
        return Err(Error::LengthMismatch { expected, actual: y.len() });
    }
    let down = gen_downchirp(params);
    let out = y.iter().zip(down.iter()).map(|(a, b)| a * b).collect();
    Ok(IqBuffer::new(out, y.rate()))
}

/// Dechirp + DFT decision for a single block.
pub fn demod_dft(y: &IqBuffer, params: &LoraParams) -> Result<DemodResult> {
    Demodulator::new(params).demod(y)
}

/// Precomputed conjugate references for the matched-filter bank.
pub struct MatchedFilterBank {
    params: LoraParams,
    refs: Vec<Vec<Complex64>>,
}

impl MatchedFilterBank {
    pub fn new(params: &LoraParams) -> Self {
        let refs = (0..params.chips_per_symbol() as u32)
            .map(|k| {
                gen_symbol(Symbol::new(k, params.sf()).unwrap(), params)
                    .into_samples()
                    .into_iter()
                    .map(|z| z.conj())
                    .collect()
            })
            .collect();
        MatchedFilterBank { params: *params, refs }
    }

    /// `X_k = sum_n y[n] conj(x_k[n])` for every candidate `k`.
    pub fn correlate(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        let expected = self.params.samples_per_symbol();
        if y.len() != expected {
            return Err(Error::LengthMismatch { expected, actual: y.len() });
        }
        Ok(self.refs.iter().map(|r| y.iter().zip(r).map(|(a, b)| a * b).sum()).collect())
    }

    pub fn demod(&self, y: &[Complex64]) -> Result<DemodResult> {
        let mags = self.correlate(y)?.iter().map(|z| z.norm()).collect();
        Ok(DemodResult::from_magnitudes(mags, self.params.sf()))
    }
}

pub fn demod_matched_filter(y: &IqBuffer, params: &LoraParams) -> Result<DemodResult> {
    MatchedFilterBank::new(params).demod(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulator::{gen_upchirp, modulate_symbols};
    use crate::params::make_params;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::TAU;

    fn p8() -> LoraParams {
        make_params(8, 125_000, 1, 8).unwrap()
    }

    #[test]
    fn dechirp_cases() {
        let params = p8();
        let ones = dechirp(&gen_upchirp(&params), &params).unwrap();
        assert!(ones.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-12));

        let zeros = IqBuffer::new(vec![Complex64::new(0.0, 0.0); 256], 125e3);
        assert!(dechirp(&zeros, &params).unwrap().iter().all(|z| z.norm() == 0.0));

        // symbol s dechirps to a tone of s cycles per symbol
        let s = 37;
        let tone = dechirp(&gen_symbol(Symbol::new(s, 8).unwrap(), &params), &params).unwrap();
        for (n, z) in tone.iter().enumerate() {
            let expected = Complex64::from_polar(1.0, TAU * (n as f64) * s as f64 / 256.0);
            assert!((z - expected).norm() < 1e-9);
        }

        let short = IqBuffer::new(vec![Complex64::new(0.0, 0.0); 10], 125e3);
        assert!(matches!(dechirp(&short, &params), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn noiseless_peak_is_exact() {
        let params = p8();
        for s in [0u32, 1, 77, 255] {
            let y = gen_symbol(Symbol::new(s, 8).unwrap(), &params);
            for r in [demod_dft(&y, &params).unwrap(), demod_matched_filter(&y, &params).unwrap()] {
                assert_eq!(r.symbol.value(), s);
                assert!((r.peak_magnitude - 256.0).abs() < 1e-9);
                for (k, m) in r.magnitudes.iter().enumerate() {
                    if k as u32 != s {
                        assert!(*m < 1e-9, "bin {k} = {m}");
                    }
                }
            }
        }
    }

    #[test]
    fn upchirp_times_downchirp_concentrates_in_bin_zero() {
        let params = p8();
        let up = gen_upchirp(&params);
        let down = gen_downchirp(&params);
        let prod: Vec<_> = up.iter().zip(down.iter()).map(|(a, b)| a * b).collect();
        // Multiplying by the upchirp again brings the product back to an upchirp.
        let y = IqBuffer::new(prod.iter().zip(up.iter()).map(|(a, b)| a * b).collect(), 125e3);
        let r = demod_dft(&y, &params).unwrap();
        assert_eq!(r.symbol.value(), 0);
        assert!((r.peak_magnitude - 256.0).abs() < 1e-9);
    }

    #[test]
    fn scale_invariance() {
        let params = p8();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut demod = Demodulator::new(&params);
        for _ in 0..50 {
            let s = rng.gen_range(0..256);
            let y: Vec<Complex64> = gen_symbol(Symbol::new(s, 8).unwrap(), &params)
                .iter()
                .map(|z| z + Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
                .collect();
            let base = demod.demod(&y).unwrap().symbol;
            let h = Complex64::from_polar(rng.gen_range(0.01..10.0), rng.gen_range(0.0..TAU));
            let scaled: Vec<_> = y.iter().map(|z| z * h).collect();
            assert_eq!(demod.demod(&scaled).unwrap().symbol, base);
        }
    }

    #[test]
    fn oversampled_roundtrip() {
        for os in [2, 3, 4] {
            let params = make_params(7, 250_000, os, 8).unwrap();
            let mut demod = Demodulator::new(&params);
            let mf = MatchedFilterBank::new(&params);
            for s in 0..128 {
                let y = gen_symbol(Symbol::new(s, 7).unwrap(), &params);
                assert_eq!(demod.demod(&y).unwrap().symbol.value(), s);
                assert_eq!(mf.demod(&y).unwrap().symbol.value(), s);
            }
        }
    }

    #[test]
    fn argmax_ties_take_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]).0, 1);
        assert_eq!(argmax(&[0.0; 4]).0, 0);
    }

    #[test]
    fn concatenated_blocks_demodulate() {
        let params = make_params(6, 125_000, 1, 8).unwrap();
        let syms: Vec<_> = (0..64).map(|v| Symbol::new(v, 6).unwrap()).collect();
        let buf = modulate_symbols(&syms, &params);
        let mut demod = Demodulator::new(&params);
        for (i, block) in buf.chunks(64).enumerate() {
            assert_eq!(demod.demod(block).unwrap().symbol.value(), i as u32);
        }
    }
}
