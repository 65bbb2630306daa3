//! Receiver synchronization: preamble detection, symbol-boundary alignment,
//! residual CFO estimation and compensation, and SFO boundary realignment.
//!
//! Alignment deliberately keeps the timing offset that a CFO induces: a
//! frequency offset of `k` bins makes the preamble look shifted by `k`
//! samples, and aligning to that shifted boundary cancels the integer part of
//! the offset. Only the fractional residual is then estimated from the phase
//! advance between consecutive upchirps and removed.
//!
//! Sign convention: a CFO of `+df` rotates the received samples by
//! `exp(+j 2 pi n df / fs)`. The lag-one-symbol correlation
//! `sum y[n] conj(y[n + L])` then has phase `-2 pi df L / fs`, and rotating by
//! `exp(j n dphi / L)` cancels it.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::demodulator::{argmax, Demodulator};
use crate::error::{Error, Result};
use crate::modulator::IqBuffer;
use crate::params::LoraParams;

/// Detection threshold on the peak decision-bin magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Threshold {
    /// `4 * sqrt(2^sf) * sigma`, with `sigma` estimated per block from the
    /// median of the non-peak bin magnitudes.
    #[default]
    Adaptive,
    Absolute(f64),
}

impl Threshold {
    fn level(&self, mags: &[f64], peak_bin: usize) -> f64 {
        match *self {
            Threshold::Absolute(v) => v,
            Threshold::Adaptive => {
                let mut rest: Vec<f64> =
                    mags.iter().enumerate().filter(|&(i, _)| i != peak_bin).map(|(_, &m)| m).collect();
                let mid = rest.len() / 2;
                let (_, median, _) = rest.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
                // Rayleigh median = sigma_bin * sqrt(ln 2), sigma_bin = sqrt(2^sf) * sigma
                let chips = mags.len() as f64;
                let sigma = *median / (chips * std::f64::consts::LN_2).sqrt();
                4.0 * chips.sqrt() * sigma
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SyncState {
    pub detected: bool,
    /// Preamble peak bin, i.e. the offset of the block start past the
    /// nearest preceding upchirp boundary, in chips.
    pub s_pre_hat: u32,
    /// Start of the block that completed the detection.
    pub block_start: usize,
}

/// Maps a bin index to the signed range `(-2^sf / 2, 2^sf / 2]`.
pub fn signed_bin(bin: u32, chips: usize) -> i64 {
    let b = bin as i64;
    if b > chips as i64 / 2 {
        b - chips as i64
    } else {
        b
    }
}

fn circular_distance(a: u32, b: u32, chips: usize) -> u32 {
    let d = (a as i64 - b as i64).rem_euclid(chips as i64) as u32;
    d.min(chips as u32 - d)
}

/// Slides one symbol at a time over `stream` until `n_pre - 1` consecutive
/// blocks exceed `threshold` with the same peak bin.
pub fn detect_preamble(stream: &IqBuffer, params: &LoraParams, threshold: Threshold) -> Result<SyncState> {
    let len = params.samples_per_symbol();
    let needed = params.n_pre() as usize * len;
    if stream.len() < needed {
        return Err(Error::InsufficientSamples { needed, available: stream.len() });
    }
    let want = params.n_pre() as usize - 1;
    let mut demod = Demodulator::new(params);
    let mut run = 0usize;
    let mut last_bin = 0usize;
    for (b, block) in stream.chunks_exact(len).enumerate() {
        let mags = demod.magnitudes(block)?;
        let (bin, peak) = argmax(&mags);
        if peak > 0.0 && peak > threshold.level(&mags, bin) {
            run = if run > 0 && bin == last_bin { run + 1 } else { 1 };
            last_bin = bin;
            if run == want {
                return Ok(SyncState { detected: true, s_pre_hat: bin as u32, block_start: b * len });
            }
        } else {
            run = 0;
        }
    }
    Ok(SyncState::default())
}

/// Sums decision magnitudes over the `n_pre` blocks starting at `start` and
/// returns the strongest bin. Used when the frame start is known to within a
/// symbol.
pub fn coarse_preamble_bin(
    stream: &IqBuffer,
    start: isize,
    params: &LoraParams,
    demod: &mut Demodulator,
) -> Result<u32> {
    let len = params.samples_per_symbol();
    let mut acc = vec![0.0; params.chips_per_symbol()];
    for k in 0..params.n_pre() as isize {
        let w = stream.window(start + k * len as isize, len);
        for (a, m) in acc.iter_mut().zip(demod.magnitudes(&w)?) {
            *a += m;
        }
    }
    Ok(argmax(&acc).0 as u32)
}

/// Peak bin of the magnitudes accumulated over the detection run, and with
/// oversampling the sample phase in `0..os` that maximizes it.
fn refine_sample_phase(
    stream: &IqBuffer,
    sync: &SyncState,
    params: &LoraParams,
    demod: &mut Demodulator,
) -> Result<(usize, u32)> {
    let os = params.os() as usize;
    let len = params.samples_per_symbol();
    let run = params.n_pre() as usize - 1;
    let mut best = (0, sync.s_pre_hat, f64::NEG_INFINITY);
    for phase in 0..os {
        let mut acc = vec![0.0; params.chips_per_symbol()];
        for j in 0..run {
            let start = (sync.block_start + phase) as isize - (j * len) as isize;
            for (a, m) in acc.iter_mut().zip(demod.magnitudes(&stream.window(start, len))?) {
                *a += m;
            }
        }
        let (bin, peak) = argmax(&acc);
        if peak > best.2 {
            best = (phase, bin as u32, peak);
        }
    }
    Ok((best.0, best.1))
}

/// Finds the first data sample after a detected preamble.
///
/// Re-estimates the preamble bin over the whole detection run (choosing the
/// best sample phase when oversampled), skips `2^sf - bin` chips from the
/// detection block to reach an upchirp boundary, then steps symbol by symbol
/// until the two sync-word symbols appear (each within one bin); the data
/// starts 4.25 symbols after the first of them. Any CFO-induced timing offset is kept.
pub fn synchronize(stream: &IqBuffer, sync: &SyncState, params: &LoraParams, sync_word: [u32; 2]) -> Result<usize> {
    if !sync.detected {
        return Err(Error::NoPreamble);
    }
    let len = params.samples_per_symbol();
    let chips = params.chips_per_symbol();
    let os = params.os() as usize;
    let mut demod = Demodulator::new(params);
    let (phase, bin) = refine_sample_phase(stream, sync, params, &mut demod)?;
    let first = sync.block_start + phase + (chips - bin as usize) * os;
    let mut bins = Vec::new();
    for i in 0..(params.n_pre() as usize + 3) {
        let w = first + i * len;
        if w >= stream.len() {
            break;
        }
        let r = demod.demod(&stream.window(w as isize, len))?;
        bins.push(r.symbol.value());
    }
    for i in 0..bins.len().saturating_sub(1) {
        if circular_distance(bins[i], sync_word[0], chips) <= 1
            && circular_distance(bins[i + 1], sync_word[1], chips) <= 1
        {
            let sync_start = first + i * len;
            return Ok(sync_start + crate::framing::DELIMITER_QUARTERS * len / 4);
        }
    }
    Err(Error::SyncWordNotFound)
}

/// Window over the detection run for residual CFO estimation. The last
/// block of the run may overlap the sync word, so it is left out unless the
/// run would otherwise be shorter than two blocks.
pub fn detection_run_window(sync: &SyncState, params: &LoraParams) -> (isize, usize) {
    let len = params.samples_per_symbol();
    let run = params.n_pre() as usize - 1;
    let blocks = if run > 2 { run - 1 } else { run };
    (sync.block_start as isize - (blocks * len) as isize, blocks * len)
}

/// Residual phase advance per symbol between consecutive upchirps.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CfoEstimate {
    /// Radians in `[-pi, pi)`.
    pub delta_phi_hat: f64,
}

impl CfoEstimate {
    /// Residual offset in Hz that this estimate corresponds to.
    pub fn residual_hz(&self, params: &LoraParams) -> f64 {
        -self.delta_phi_hat * params.sample_rate() as f64 / (TAU * params.samples_per_symbol() as f64)
    }
}

fn wrap_phase(x: f64) -> f64 {
    let w = (x + PI).rem_euclid(TAU) - PI;
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// `arg(sum_n y[n] conj(y[n + L]))` over every lag-`L` pair in the buffer,
/// `L = os * 2^sf`. The buffer should contain consecutive upchirps only.
pub fn estimate_residual_cfo(preamble: &IqBuffer, params: &LoraParams) -> Result<CfoEstimate> {
    let len = params.samples_per_symbol();
    if preamble.len() < 2 * len {
        return Err(Error::InsufficientSamples { needed: 2 * len, available: preamble.len() });
    }
    let acc: Complex64 = preamble.iter().zip(&preamble[len..]).map(|(a, b)| a * b.conj()).sum();
    Ok(CfoEstimate { delta_phi_hat: wrap_phase(acc.arg()) })
}

/// `y[n] * exp(j n dphi / L)` with `n` the index into `samples`.
pub fn compensate_cfo(samples: &IqBuffer, est: &CfoEstimate, params: &LoraParams) -> IqBuffer {
    if est.delta_phi_hat == 0.0 {
        return samples.clone();
    }
    let step = est.delta_phi_hat / params.samples_per_symbol() as f64;
    let out = samples
        .iter()
        .enumerate()
        .map(|(n, z)| z * Complex64::from_polar(1.0, (n as f64 * step).rem_euclid(TAU)))
        .collect();
    IqBuffer::new(out, samples.rate())
}

/// Whether the receiver gains (drops) or loses (inserts) samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftKind {
    Drop,
    Insert,
}

/// Tracks accumulated sampling drift against the nominal timebase.
///
/// The `k`-th correction (counting from zero) happens at the first raw
/// sample index `m` for which half a sample has drifted:
/// `(m + 1/2) / fs_rx < (m - k) / fs` when the receiver is fast (drop sample
/// `m`), or `(m - 1/2) / fs_rx > (m + k) / fs` when it is slow (repeat it).
#[derive(Debug, Clone, PartialEq)]
pub struct SfoTracker {
    fs_nominal: f64,
    fs_rx: f64,
    samples_per_symbol: usize,
    corrections: usize,
    next_drift_sample: Option<usize>,
}

impl SfoTracker {
    pub fn new(params: &LoraParams, fs_rx: f64) -> Self {
        let mut t = SfoTracker {
            fs_nominal: params.sample_rate() as f64,
            fs_rx,
            samples_per_symbol: params.samples_per_symbol(),
            corrections: 0,
            next_drift_sample: None,
        };
        t.next_drift_sample = t.compute_next();
        t
    }

    pub fn fs_rx(&self) -> f64 {
        self.fs_rx
    }

    pub fn kind(&self) -> Option<DriftKind> {
        if self.fs_rx > self.fs_nominal {
            Some(DriftKind::Drop)
        } else if self.fs_rx < self.fs_nominal {
            Some(DriftKind::Insert)
        } else {
            None
        }
    }

    pub fn corrections(&self) -> usize {
        self.corrections
    }

    /// Raw sample index of the next correction.
    pub fn next_drift_sample(&self) -> Option<usize> {
        self.next_drift_sample
    }

    fn fires(&self, m: usize) -> bool {
        let (m, k) = (m as f64, self.corrections as f64);
        match self.kind() {
            Some(DriftKind::Drop) => (2.0 * m + 1.0) * self.fs_nominal < 2.0 * (m - k) * self.fs_rx,
            Some(DriftKind::Insert) => (2.0 * m - 1.0) * self.fs_nominal > 2.0 * (m + k) * self.fs_rx,
            None => false,
        }
    }

    fn compute_next(&self) -> Option<usize> {
        self.kind()?;
        let k = self.corrections as f64;
        let bound = (self.fs_nominal + 2.0 * k * self.fs_rx) / (2.0 * (self.fs_rx - self.fs_nominal).abs());
        let mut m = (bound.floor() as usize).saturating_sub(2);
        if let Some(prev) = self.next_drift_sample {
            m = m.max(prev + 1);
        }
        while !self.fires(m) {
            m += 1;
        }
        Some(m)
    }

    /// Commits the pending correction and schedules the next one.
    pub fn advance(&mut self) {
        if self.next_drift_sample.is_some() {
            self.corrections += 1;
            self.next_drift_sample = self.compute_next();
        }
    }
}

/// Next correction point as `(symbol index d, sample index n within symbol)`.
pub fn sfo_next_drift(tracker: &SfoTracker) -> Option<(usize, usize)> {
    let m = tracker.next_drift_sample()?;
    Some((m / tracker.samples_per_symbol, m % tracker.samples_per_symbol))
}

/// Applies every correction to `samples`, returning a stream whose index
/// tracks the nominal timebase to within half a sample. Index 0 of `samples`
/// must be the frame start.
pub fn realign_samples(samples: &[Complex64], tracker: &mut SfoTracker) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(samples.len() + 8);
    for (m, &z) in samples.iter().enumerate() {
        if tracker.next_drift_sample() == Some(m) {
            match tracker.kind() {
                Some(DriftKind::Drop) => {}
                Some(DriftKind::Insert) => {
                    out.push(z);
                    out.push(z);
                }
                None => out.push(z),
            }
            tracker.advance();
        } else {
            out.push(z);
        }
    }
    out
}

/// Realigned symbol blocks: `n_symbols` blocks of `os * 2^sf` samples
/// starting at nominal index `start`.
pub fn realign_stream(
    samples: &IqBuffer,
    tracker: &mut SfoTracker,
    params: &LoraParams,
    start: usize,
    n_symbols: usize,
) -> Result<Vec<IqBuffer>> {
    let fixed = realign_samples(samples, tracker);
    let len = params.samples_per_symbol();
    let needed = start + n_symbols * len;
    if fixed.len() < needed {
        return Err(Error::InsufficientSamples { needed, available: fixed.len() });
    }
    Ok(fixed[start..needed].chunks_exact(len).map(|c| IqBuffer::new(c.to_vec(), params.sample_rate() as f64)).collect())
}

/// Reference upchirp at the receiver rate `fs_rx` whose sweep matches the
/// transmitter bandwidth: `exp(j 2 pi (bw/(2 Ts) t^2 - bw/2 t))`, `t = n / fs_rx`.
pub fn matched_reference_upchirp(params: &LoraParams, fs_rx: f64) -> IqBuffer {
    let bw = params.bw() as f64;
    let ts = params.symbol_duration();
    let samples = (0..params.samples_per_symbol())
        .map(|n| {
            let t = n as f64 / fs_rx;
            let cycles = bw / (2.0 * ts) * t * t - 0.5 * bw * t;
            Complex64::from_polar(1.0, TAU * cycles.fract())
        })
        .collect();
    IqBuffer::new(samples, fs_rx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_cfo, apply_delay, gaussian_noise, ChannelImpairments};
    use crate::framing::{build_frame, preamble_and_delimiter_samples, Frame, FrameConfig, DEFAULT_SYNC_WORD};
    use crate::modulator::{gen_upchirp, modulate_symbols, Symbol};
    use crate::params::make_params;

    fn p8() -> LoraParams {
        make_params(8, 125_000, 1, 8).unwrap()
    }

    fn test_frame(params: &LoraParams) -> IqBuffer {
        let f = Frame::new(b"sync test".to_vec(), FrameConfig::default()).unwrap();
        build_frame(&f, params).unwrap()
    }

    #[test]
    fn signed_bins() {
        assert_eq!(signed_bin(0, 256), 0);
        assert_eq!(signed_bin(20, 256), 20);
        assert_eq!(signed_bin(128, 256), 128);
        assert_eq!(signed_bin(236, 256), -20);
    }

    #[test]
    fn aligned_preamble_detects_bin_zero() {
        let params = p8();
        let s = detect_preamble(&test_frame(&params), &params, Threshold::Adaptive).unwrap();
        assert!(s.detected);
        assert_eq!(s.s_pre_hat, 0);
        assert_eq!(s.block_start, 6 * 256);
    }

    #[test]
    fn delayed_preamble_bin_is_circular_shift() {
        let params = p8();
        let frame = test_frame(&params);
        for tau in [1usize, 17, 100] {
            let y = apply_delay(&frame, &ChannelImpairments { delay_samples: tau, ..Default::default() });
            let s = detect_preamble(&y, &params, Threshold::Adaptive).unwrap();
            assert!(s.detected);
            assert_eq!(s.s_pre_hat as usize, 256 - tau);
            let start = synchronize(&y, &s, &params, DEFAULT_SYNC_WORD).unwrap();
            assert_eq!(start, tau + preamble_and_delimiter_samples(&params));
        }
    }

    #[test]
    fn oversampled_sync_is_sample_exact() {
        let params = make_params(7, 125_000, 4, 8).unwrap();
        let frame = test_frame(&params);
        for tau in [0usize, 1, 2, 3, 5, 37, 301] {
            let y = apply_delay(&frame, &ChannelImpairments { delay_samples: tau, ..Default::default() });
            let s = detect_preamble(&y, &params, Threshold::Adaptive).unwrap();
            let start = synchronize(&y, &s, &params, DEFAULT_SYNC_WORD).unwrap();
            assert_eq!(start, tau + preamble_and_delimiter_samples(&params), "tau {tau}");
        }
    }

    #[test]
    fn short_stream_is_an_error() {
        let params = p8();
        let y = gen_upchirp(&params);
        assert!(matches!(detect_preamble(&y, &params, Threshold::Adaptive), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn noise_only_is_not_detected() {
        let params = p8();
        for seed in 0..20 {
            let noise = IqBuffer::new(gaussian_noise(40 * 256, 1000.0, seed), 125e3);
            let s = detect_preamble(&noise, &params, Threshold::Absolute(0.5 * 256.0)).unwrap();
            assert!(!s.detected);
            let s = detect_preamble(&noise, &params, Threshold::Adaptive).unwrap();
            assert!(!s.detected);
        }
    }

    #[test]
    fn zero_cfo_estimate() {
        let params = p8();
        let pre = modulate_symbols(&[Symbol::new(0, 8).unwrap(); 8], &params);
        let est = estimate_residual_cfo(&pre, &params).unwrap();
        assert!(est.delta_phi_hat.abs() < 1e-9);
        assert_eq!(compensate_cfo(&pre, &CfoEstimate::default(), &params), pre);
    }

    #[test]
    fn cfo_estimate_matches_phase_advance() {
        let params = p8();
        let pre = modulate_symbols(&[Symbol::new(0, 8).unwrap(); 8], &params);
        for df in [-300.0, 50.0, 200.0, 10_000.0, 10_100.0] {
            let y = apply_cfo(&pre, &ChannelImpairments { cfo_hz: df, ..Default::default() });
            let est = estimate_residual_cfo(&y, &params).unwrap();
            let expected = wrap_phase(-TAU * df / 125_000.0 * 256.0);
            assert!((est.delta_phi_hat - expected).abs() < 1e-9, "df {df}");
            assert!(est.delta_phi_hat >= -PI && est.delta_phi_hat < PI);
        }
    }

    #[test]
    fn compensation_preserves_magnitude_and_removes_small_cfo() {
        let params = p8();
        let frame = test_frame(&params);
        let df = 150.0; // below half a bin (244 Hz)
        let y = apply_cfo(&frame, &ChannelImpairments { cfo_hz: df, ..Default::default() });
        let est = estimate_residual_cfo(&y.window(0, 8 * 256), &params).unwrap();
        assert!((est.residual_hz(&params) - df).abs() < 1e-6);
        let fixed = compensate_cfo(&y, &est, &params);
        for (a, b) in fixed.iter().zip(y.iter()) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
        // the compensated stream equals the clean one up to a constant phase
        let rot = fixed[0] * frame[0].conj();
        for (a, b) in fixed.iter().zip(frame.iter()) {
            assert!((a - b * rot).norm() < 1e-9);
        }
    }

    #[test]
    fn tracker_never_fires_without_offset() {
        let params = make_params(8, 250_000, 1, 8).unwrap();
        let t = SfoTracker::new(&params, 250_000.0);
        assert_eq!(sfo_next_drift(&t), None);
        let x = modulate_symbols(&[Symbol::new(3, 8).unwrap(); 4], &params);
        let mut t = t;
        let blocks = realign_stream(&x, &mut t, &params, 0, 4).unwrap();
        for (i, b) in blocks.iter().enumerate() {
            assert_eq!(&b[..], &x[i * 256..(i + 1) * 256]);
        }
    }

    #[test]
    fn first_drift_at_5hz() {
        let params = make_params(8, 250_000, 1, 8).unwrap();
        let t = SfoTracker::new(&params, 250_005.0);
        // (m + 1/2)/250005 < m/250000  <=>  m > 25000
        assert_eq!(t.next_drift_sample(), Some(25_001));
        assert_eq!(sfo_next_drift(&t), Some((97, 25_001 - 97 * 256)));
        let t10 = SfoTracker::new(&params, 250_010.0);
        let (d10, _) = sfo_next_drift(&t10).unwrap();
        assert!((d10 as i64 - 97 / 2).abs() <= 1);
    }

    #[test]
    fn drift_points_increase() {
        let params = make_params(8, 250_000, 2, 8).unwrap();
        for fs_rx in [500_020.0, 499_980.0] {
            let mut t = SfoTracker::new(&params, fs_rx);
            let mut prev = None;
            for _ in 0..20 {
                let m = t.next_drift_sample().unwrap();
                if let Some(p) = prev {
                    assert!(m > p);
                }
                prev = Some(m);
                t.advance();
            }
        }
    }

    #[test]
    fn slow_receiver_inserts() {
        let params = make_params(8, 250_000, 1, 8).unwrap();
        let mut t = SfoTracker::new(&params, 249_990.0);
        assert_eq!(t.kind(), Some(DriftKind::Insert));
        let m = t.next_drift_sample().unwrap();
        let x: Vec<Complex64> = (0..m + 10).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let y = realign_samples(&x, &mut t);
        assert_eq!(y.len(), x.len() + 1);
        assert_eq!(y[m], y[m + 1]);
    }
}
