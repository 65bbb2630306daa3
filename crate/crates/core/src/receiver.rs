//! End-to-end frame reception: detection, residual CFO compensation,
//! alignment, optional SFO realignment, demodulation and frame parsing.
//!
//! The residual CFO is estimated from the detection run before the preamble
//! bin is fixed, so that the integer bin chosen for alignment and the
//! fractional part removed by compensation always agree. Estimating after
//! alignment can wrap by a whole bin when the offset sits near half a bin.

use crate::demodulator::Demodulator;
use crate::error::{Error, Result};
use crate::framing::{
    body_symbol_count, decode_header, header_symbol_count, parse_frame, preamble_and_delimiter_samples, FrameConfig,
    ParsedFrame,
};
use crate::modulator::{IqBuffer, Symbol};
use crate::params::LoraParams;
use crate::sync::{
    compensate_cfo, detect_preamble, detection_run_window, estimate_residual_cfo, realign_samples, synchronize,
    CfoEstimate, SfoTracker, SyncState, Threshold,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverConfig {
    pub threshold: Threshold,
    pub cfo_compensation: bool,
    /// Actual receiver sample rate when it differs from `os * bw`; enables
    /// boundary realignment.
    pub sfo_rx_rate: Option<f64>,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        ReceiverConfig { threshold: Threshold::Adaptive, cfo_compensation: true, sfo_rx_rate: None }
    }
}

/// Per-symbol diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolTrace {
    pub index: usize,
    /// Offset of the symbol block in the (possibly realigned) stream.
    pub sample_offset: isize,
    pub peak_bin: u32,
    pub peak_magnitude: f64,
    pub second_magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeReport {
    pub parsed: ParsedFrame,
    pub sync: SyncState,
    /// First data sample in the input stream.
    pub data_start: usize,
    pub cfo: Option<CfoEstimate>,
    pub symbols: Vec<Symbol>,
    pub trace: Vec<SymbolTrace>,
}

struct SymbolReader<'a> {
    stream: &'a IqBuffer,
    start: isize,
    len: usize,
    demod: Demodulator,
    symbols: Vec<Symbol>,
    trace: Vec<SymbolTrace>,
}

impl SymbolReader<'_> {
    fn read(&mut self, count: usize) -> Result<()> {
        for _ in 0..count {
            let index = self.symbols.len();
            let offset = self.start + (index * self.len) as isize;
            let r = self.demod.demod(&self.stream.window(offset, self.len))?;
            self.trace.push(SymbolTrace {
                index,
                sample_offset: offset,
                peak_bin: r.symbol.value(),
                peak_magnitude: r.peak_magnitude,
                second_magnitude: r.second_magnitude(),
            });
            self.symbols.push(r.symbol);
        }
        Ok(())
    }
}

/// Receives one frame from `stream`.
///
/// `frame_cfg` supplies the sync word and, for implicit-header frames, the
/// payload length, code rate and CRC flag.
pub fn decode_stream(
    stream: &IqBuffer,
    params: &LoraParams,
    frame_cfg: &FrameConfig,
    rx: &ReceiverConfig,
) -> Result<DecodeReport> {
    let sync = detect_preamble(stream, params, rx.threshold)?;
    if !sync.detected {
        return Err(Error::NoPreamble);
    }
    // a two-upchirp preamble leaves a single block in the run: nothing to correlate
    let (run_start, run_len) = detection_run_window(&sync, params);
    let cfo = if rx.cfo_compensation && run_len >= 2 * params.samples_per_symbol() {
        Some(estimate_residual_cfo(&stream.window(run_start, run_len), params)?)
    } else {
        None
    };
    let compensated;
    let working = match &cfo {
        Some(est) => {
            compensated = compensate_cfo(stream, est, params);
            &compensated
        }
        None => stream,
    };
    let data_start = synchronize(working, &sync, params, frame_cfg.sync_word)?;
    let lead = preamble_and_delimiter_samples(params);
    let frame_start = data_start as isize - lead as isize;
    let len = params.samples_per_symbol();

    let realigned;
    let (buffer, start) = match rx.sfo_rx_rate {
        Some(fs_rx) => {
            let tail = working.window(frame_start, (working.len() as isize - frame_start).max(0) as usize);
            let mut tracker = SfoTracker::new(params, fs_rx);
            realigned = IqBuffer::new(realign_samples(&tail, &mut tracker), params.sample_rate() as f64);
            (&realigned, lead as isize)
        }
        None => (working, data_start as isize),
    };

    let mut reader = SymbolReader {
        stream: buffer,
        start,
        len,
        demod: Demodulator::new(params),
        symbols: Vec::new(),
        trace: Vec::new(),
    };
    let cfg = if frame_cfg.has_header {
        reader.read(header_symbol_count(frame_cfg))?;
        decode_header(&reader.symbols, frame_cfg, params)?
    } else {
        *frame_cfg
    };
    reader.read(body_symbol_count(&cfg, params.sf()))?;
    let parsed = parse_frame(&reader.symbols, frame_cfg, params)?;
    Ok(DecodeReport { parsed, sync, data_start, cfo, symbols: reader.symbols, trace: reader.trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{simulate, ChannelImpairments};
    use crate::framing::{frame_data_symbols, frame_segments, Frame};
    use crate::params::make_params;

    fn send(payload: &[u8], params: &LoraParams, imp: &ChannelImpairments) -> (Frame, IqBuffer) {
        let frame = Frame::new(payload.to_vec(), FrameConfig::default()).unwrap();
        let data = frame_data_symbols(&frame, params).unwrap();
        let segs = frame_segments(&data, frame.config.sync_word, params).unwrap();
        (frame.clone(), simulate(&segs, params, imp).unwrap())
    }

    #[test]
    fn clean_frame_roundtrip() {
        let params = make_params(8, 125_000, 1, 8).unwrap();
        let (frame, y) = send(b"hello", &params, &ChannelImpairments::default());
        let r = decode_stream(&y, &params, &FrameConfig::default(), &ReceiverConfig::default()).unwrap();
        assert!(r.parsed.crc_ok);
        assert_eq!(r.parsed.frame.payload, frame.payload);
        assert_eq!(r.trace.len(), r.symbols.len());
        assert_eq!(r.data_start, preamble_and_delimiter_samples(&params));
    }

    #[test]
    fn delay_and_cfo() {
        let params = make_params(8, 125_000, 1, 8).unwrap();
        let imp =
            ChannelImpairments { delay_samples: 100, cfo_hz: 10_000.0, snr_db: 20.0, seed: 3, ..Default::default() };
        let (frame, y) = send(b"offset frame", &params, &imp);
        let r = decode_stream(&y, &params, &FrameConfig::default(), &ReceiverConfig::default()).unwrap();
        assert!(r.parsed.crc_ok);
        assert_eq!(r.parsed.frame.payload, frame.payload);
    }

    #[test]
    fn implicit_header() {
        let params = make_params(7, 250_000, 2, 8).unwrap();
        let cfg = FrameConfig { has_header: false, ..Default::default() };
        let frame = Frame::new(vec![7, 1, 2, 3], cfg).unwrap();
        let data = frame_data_symbols(&frame, &params).unwrap();
        let segs = frame_segments(&data, cfg.sync_word, &params).unwrap();
        let imp = ChannelImpairments { delay_samples: 37, ..Default::default() };
        let y = simulate(&segs, &params, &imp).unwrap();
        let r = decode_stream(&y, &params, &frame.config, &ReceiverConfig::default()).unwrap();
        assert_eq!(r.parsed.frame.payload, frame.payload);
    }

    #[test]
    fn sfo_with_realignment() {
        let params = make_params(8, 250_000, 1, 8).unwrap();
        let payload: Vec<u8> = (0..120u8).collect();
        let imp = ChannelImpairments { sfo_hz: 10.0, ..Default::default() };
        let (frame, y) = send(&payload, &params, &imp);
        let rx = ReceiverConfig { sfo_rx_rate: Some(imp.rx_sample_rate(&params)), ..Default::default() };
        let r = decode_stream(&y, &params, &FrameConfig::default(), &rx).unwrap();
        assert!(r.parsed.crc_ok);
        assert_eq!(r.parsed.frame.payload, frame.payload);
    }
}
