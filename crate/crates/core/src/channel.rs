//! Channel impairments: AWGN, block fading, carrier and sampling frequency
//! offsets, and integer delay.
//!
//! [`simulate`] composes them in a fixed order: synthesis (with SFO if any),
//! fading, CFO, delay, then AWGN.
//!
//! SNR is per sample: with unit-magnitude signal samples the complex noise
//! variance is `10^(-snr_db / 10)`, split equally between I and Q. Noise for
//! a given seed comes from `ChaCha8Rng::seed_from_u64(seed)` drawing
//! standard normals, I then Q for each sample in order.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::modulator::{render, Chirp, IqBuffer};
use crate::params::LoraParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelImpairments {
    /// Per-sample SNR in dB; `f64::INFINITY` disables noise.
    pub snr_db: f64,
    /// Block-fading coefficient, constant over a frame.
    pub h: Complex64,
    /// Carrier frequency offset, transmitter minus receiver LO, in Hz.
    pub cfo_hz: f64,
    /// Receiver sample clock error in Hz at the chip rate: the receiver
    /// samples at `os * (bw + sfo_hz)`.
    pub sfo_hz: f64,
    pub delay_samples: usize,
    pub seed: u64,
}

impl Default for ChannelImpairments {
    fn default() -> Self {
        ChannelImpairments {
            snr_db: f64::INFINITY,
            h: Complex64::new(1.0, 0.0),
            cfo_hz: 0.0,
            sfo_hz: 0.0,
            delay_samples: 0,
            seed: 0,
        }
    }
}

impl ChannelImpairments {
    pub fn noise_variance(&self) -> f64 {
        if self.snr_db.is_infinite() && self.snr_db > 0.0 {
            0.0
        } else {
            10f64.powf(-self.snr_db / 10.0)
        }
    }

    /// Receiver sample rate under the configured SFO.
    pub fn rx_sample_rate(&self, params: &LoraParams) -> f64 {
        params.os() as f64 * (params.bw() as f64 + self.sfo_hz)
    }
}

/// Circular complex Gaussian noise of the given variance.
pub fn gaussian_noise(len: usize, variance: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = (variance / 2.0).sqrt();
    (0..len)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * sigma, im * sigma)
        })
        .collect()
}

fn add_noise(samples: &mut [Complex64], imp: &ChannelImpairments) {
    let var = imp.noise_variance();
    if var == 0.0 {
        return;
    }
    let noise = gaussian_noise(samples.len(), var, imp.seed);
    for (z, w) in samples.iter_mut().zip(noise) {
        *z += w;
    }
}

fn rotate(samples: &mut [Complex64], cfo_hz: f64, rate: f64) {
    if cfo_hz == 0.0 {
        return;
    }
    let step = cfo_hz / rate;
    for (n, z) in samples.iter_mut().enumerate() {
        *z *= Complex64::from_polar(1.0, TAU * (n as f64 * step).fract());
    }
}

pub fn apply_awgn(y: &IqBuffer, imp: &ChannelImpairments) -> IqBuffer {
    let mut out = y.clone();
    add_noise(out.samples_mut(), imp);
    out
}

pub fn apply_fading(y: &IqBuffer, imp: &ChannelImpairments) -> Result<IqBuffer> {
    if imp.h.norm() == 0.0 {
        return Err(Error::ZeroFading);
    }
    Ok(IqBuffer::new(y.iter().map(|z| z * imp.h).collect(), y.rate()))
}

/// Rotates sample `n` by `exp(j 2 pi n cfo / fs)` with `fs` the buffer rate.
pub fn apply_cfo(y: &IqBuffer, imp: &ChannelImpairments) -> IqBuffer {
    let mut out = y.clone();
    rotate(out.samples_mut(), imp.cfo_hz, y.rate());
    out
}

/// Prepends `delay_samples` zeros.
pub fn apply_delay(y: &IqBuffer, imp: &ChannelImpairments) -> IqBuffer {
    let mut out = vec![Complex64::new(0.0, 0.0); imp.delay_samples];
    out.extend_from_slice(y);
    IqBuffer::new(out, y.rate())
}

/// Samples the transmitted waveform at the receiver clock.
///
/// The transmitter emits `segments` back to back at chip rate `bw`; the
/// receiver samples at `os * (bw + sfo_hz)`. Each sample instant is mapped to
/// the segment active at that time and the chirp is evaluated analytically,
/// so no resampling filter is involved.
pub fn synthesize_with_sfo(segments: &[Chirp], params: &LoraParams, imp: &ChannelImpairments) -> IqBuffer {
    if imp.sfo_hz == 0.0 {
        return render(segments.iter().copied(), params);
    }
    sample_waveform(segments, params, imp.rx_sample_rate(params))
}

/// Evaluates the continuous-time waveform of `segments` at instants `m / fs_rx`.
pub fn sample_waveform(segments: &[Chirp], params: &LoraParams, fs_rx: f64) -> IqBuffer {
    let bw = params.bw() as f64;
    let total_chips: usize = segments.iter().map(|s| s.chips(params)).sum();
    let duration = total_chips as f64 / bw;

    let mut out = Vec::new();
    let mut seg = 0;
    let mut seg_start_chips = 0usize;
    let mut m = 0usize;
    loop {
        let t = m as f64 / fs_rx;
        if t >= duration {
            break;
        }
        while seg + 1 < segments.len() && t >= (seg_start_chips + segments[seg].chips(params)) as f64 / bw {
            seg_start_chips += segments[seg].chips(params);
            seg += 1;
        }
        let local = t - seg_start_chips as f64 / bw;
        let phase = segments[seg].phase_cycles_at(local, params);
        out.push(Complex64::from_polar(1.0, TAU * phase.fract()));
        m += 1;
    }
    IqBuffer::new(out, fs_rx)
}

/// Full channel: synthesis, fading, CFO, delay, AWGN.
///
/// Equivalent to chaining the individual `apply_*` functions, without the
/// intermediate copies.
pub fn simulate(segments: &[Chirp], params: &LoraParams, imp: &ChannelImpairments) -> Result<IqBuffer> {
    if imp.h.norm() == 0.0 {
        return Err(Error::ZeroFading);
    }
    let y = synthesize_with_sfo(segments, params, imp);
    let rate = y.rate();
    let mut out = Vec::with_capacity(imp.delay_samples + y.len());
    out.resize(imp.delay_samples, Complex64::new(0.0, 0.0));
    out.extend(y.iter().map(|z| z * imp.h));
    rotate(&mut out[imp.delay_samples..], imp.cfo_hz, rate);
    add_noise(&mut out, imp);
    Ok(IqBuffer::new(out, rate))
}
