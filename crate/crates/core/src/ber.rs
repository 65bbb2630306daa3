//! Monte-Carlo BER engine and the built-in CFO and SFO experiments.
//!
//! Each frame trial draws its payload bits and noise seed from
//! `ChaCha8Rng::seed_from_u64(point_seed ^ trial_index)`, where the point
//! seed depends only on the master seed and the index of the SNR point.
//! Receiver modes and impairment values therefore see the same payloads and
//! noise (common random numbers), and results do not depend on the number of
//! worker threads: trials run in fixed batches and the stopping rule is only
//! checked between batches.
//!
//! SNR is referenced to the signal bandwidth: at oversampling `os` the
//! per-sample SNR handed to the channel is `snr_db - 10 log10(os)`.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{simulate, ChannelImpairments};
use crate::codec::{data_bits_per_block, rx_chain, symbols_per_block, tx_chain, BitBlock, CodeRate};
use crate::demodulator::Demodulator;
use crate::error::{Error, Result};
use crate::framing::{frame_segments, preamble_and_delimiter_samples, DEFAULT_SYNC_WORD};
use crate::modulator::{IqBuffer, Symbol};
use crate::params::LoraParams;
use crate::sync::{
    coarse_preamble_bin, compensate_cfo, estimate_residual_cfo, realign_samples, signed_bin, SfoTracker,
};

const BATCH: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReceiverMode {
    /// Genie symbol boundaries, no frequency correction.
    AlignedNoComp,
    /// Boundaries from the preamble peak bin, keeping the CFO-induced offset.
    TimeOffsetSync,
    /// As [`ReceiverMode::TimeOffsetSync`] plus residual CFO compensation.
    /// The residual is removed before the preamble bin is picked so that
    /// the two agree when the offset is close to half a bin.
    TimeOffsetSyncCfoComp,
    /// Nominal boundaries on a stream sampled with SFO.
    SfoNoRealign,
    /// Boundaries corrected by sample dropping/insertion.
    SfoRealign,
}

impl ReceiverMode {
    pub const ALL: [ReceiverMode; 5] = [
        ReceiverMode::AlignedNoComp,
        ReceiverMode::TimeOffsetSync,
        ReceiverMode::TimeOffsetSyncCfoComp,
        ReceiverMode::SfoNoRealign,
        ReceiverMode::SfoRealign,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ReceiverMode::AlignedNoComp => "aligned-no-comp",
            ReceiverMode::TimeOffsetSync => "timeoffset-sync",
            ReceiverMode::TimeOffsetSyncCfoComp => "timeoffset-sync+cfo-comp",
            ReceiverMode::SfoNoRealign => "sfo-no-realign",
            ReceiverMode::SfoRealign => "sfo-realign",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.label() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    pub min_bit_errors: u64,
    pub max_frames: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { min_bit_errors: 100, max_frames: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub params: LoraParams,
    pub cr: CodeRate,
    /// Payload symbols per frame; a multiple of the block length `4 + cr`.
    pub frame_len_symbols: usize,
    pub snr_points: Vec<f64>,
    /// Template; `snr_db` and `seed` are set per trial. `delay_samples` is
    /// the frame start known to the receiver.
    pub impairments: ChannelImpairments,
    pub mode: ReceiverMode,
    pub stop: StopRule,
    pub seed: u64,
    /// End the sweep after the first point whose BER falls below this.
    pub stop_below_ber: Option<f64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.snr_points.is_empty() {
            return Err(Error::EmptySweep);
        }
        if self.stop.min_bit_errors == 0 || self.stop.max_frames == 0 {
            return Err(Error::Sweep("stop.min_bit_errors and stop.max_frames must be at least 1".into()));
        }
        let per_block = symbols_per_block(self.cr);
        if self.frame_len_symbols == 0 || !self.frame_len_symbols.is_multiple_of(per_block) {
            return Err(Error::Sweep(format!(
                "frame_len_symbols {} is not a positive multiple of {per_block}",
                self.frame_len_symbols
            )));
        }
        if self.snr_points.iter().any(|s| s.is_nan()) {
            return Err(Error::Sweep("SNR point is NaN".into()));
        }
        Ok(())
    }

    fn bits_per_frame(&self) -> usize {
        self.frame_len_symbols / symbols_per_block(self.cr) * data_bits_per_block(self.params.sf())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MinErrors,
    MaxFrames,
}

impl StopReason {
    pub fn label(self) -> &'static str {
        match self {
            StopReason::MinErrors => "min-errors",
            StopReason::MaxFrames => "max-frames",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerRecord {
    pub snr_db: f64,
    pub frames: u64,
    pub bits: u64,
    pub bit_errors: u64,
    /// Pre-decoding symbol errors.
    pub symbol_errors: u64,
    pub frame_errors: u64,
    pub ber: f64,
    pub stopped: StopReason,
    pub wall_time: Duration,
}

impl BerRecord {
    pub fn ser(&self, frame_len_symbols: usize) -> f64 {
        self.symbol_errors as f64 / (self.frames as f64 * frame_len_symbols as f64)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    bit_errors: u64,
    symbol_errors: u64,
    frame_errors: u64,
}

impl std::ops::Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts {
            bit_errors: self.bit_errors + o.bit_errors,
            symbol_errors: self.symbol_errors + o.symbol_errors,
            frame_errors: self.frame_errors + o.frame_errors,
        }
    }
}

fn demod_blocks(stream: &IqBuffer, start: isize, count: usize, demod: &mut Demodulator) -> Result<Vec<Symbol>> {
    let len = demod.params().samples_per_symbol();
    (0..count).map(|i| Ok(demod.demod(&stream.window(start + (i * len) as isize, len))?.symbol)).collect()
}

/// Runs the receiver of `mode` on a stream whose frame starts at
/// `frame_start` and returns `count` data symbols.
pub fn receive_symbols(
    stream: &IqBuffer,
    frame_start: usize,
    count: usize,
    mode: ReceiverMode,
    imp: &ChannelImpairments,
    demod: &mut Demodulator,
) -> Result<Vec<Symbol>> {
    let params = *demod.params();
    let lead = preamble_and_delimiter_samples(&params) as isize;
    let start = frame_start as isize;
    match mode {
        ReceiverMode::AlignedNoComp | ReceiverMode::SfoNoRealign => demod_blocks(stream, start + lead, count, demod),
        ReceiverMode::TimeOffsetSync => {
            let bin = coarse_preamble_bin(stream, start, &params, demod)?;
            let shifted = start - signed_bin(bin, params.chips_per_symbol()) as isize * params.os() as isize;
            demod_blocks(stream, shifted + lead, count, demod)
        }
        ReceiverMode::TimeOffsetSyncCfoComp => {
            let pre = stream.window(start, params.n_pre() as usize * params.samples_per_symbol());
            let fixed = compensate_cfo(stream, &estimate_residual_cfo(&pre, &params)?, &params);
            let bin = coarse_preamble_bin(&fixed, start, &params, demod)?;
            let shifted = start - signed_bin(bin, params.chips_per_symbol()) as isize * params.os() as isize;
            demod_blocks(&fixed, shifted + lead, count, demod)
        }
        ReceiverMode::SfoRealign => {
            let mut tracker = SfoTracker::new(&params, imp.rx_sample_rate(&params));
            let tail = &stream[frame_start.min(stream.len())..];
            let fixed = IqBuffer::new(realign_samples(tail, &mut tracker), stream.rate());
            demod_blocks(&fixed, lead, count, demod)
        }
    }
}

fn run_trial(spec: &SweepSpec, snr_db: f64, seed: u64, demod: &mut Demodulator) -> Result<Counts> {
    let params = &spec.params;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits = BitBlock::new((0..spec.bits_per_frame()).map(|_| rng.gen::<bool>() as u8).collect());
    let imp = ChannelImpairments {
        snr_db: snr_db - 10.0 * (params.os() as f64).log10(),
        seed: rng.gen(),
        ..spec.impairments
    };
    let tx = tx_chain(&bits, params, spec.cr)?;
    let segments = frame_segments(&tx, DEFAULT_SYNC_WORD, params)?;
    let stream = simulate(&segments, params, &imp)?;
    let rx = receive_symbols(&stream, imp.delay_samples, tx.len(), spec.mode, &imp, demod)?;
    let (decoded, _) = rx_chain(&rx, params, spec.cr)?;
    let bit_errors = decoded.iter().zip(bits.iter()).filter(|(a, b)| a != b).count() as u64;
    Ok(Counts {
        bit_errors,
        symbol_errors: rx.iter().zip(&tx).filter(|(a, b)| a != b).count() as u64,
        frame_errors: (bit_errors > 0) as u64,
    })
}

/// Runs frame trials at one SNR until `spec.stop` is met.
pub fn run_point(spec: &SweepSpec, snr_db: f64, seed: u64) -> Result<BerRecord> {
    spec.validate()?;
    let started = Instant::now();
    let mut total = Counts::default();
    let mut frames = 0u64;
    let stopped = loop {
        if total.bit_errors >= spec.stop.min_bit_errors {
            break StopReason::MinErrors;
        }
        if frames >= spec.stop.max_frames {
            break StopReason::MaxFrames;
        }
        let end = (frames + BATCH).min(spec.stop.max_frames);
        let batch = (frames..end)
            .into_par_iter()
            .map_init(|| Demodulator::new(&spec.params), |demod, i| run_trial(spec, snr_db, seed ^ i, demod))
            .try_reduce(Counts::default, |a, b| Ok(a + b))?;
        total = total + batch;
        frames = end;
    };
    let bits = frames * spec.bits_per_frame() as u64;
    Ok(BerRecord {
        snr_db,
        frames,
        bits,
        bit_errors: total.bit_errors,
        symbol_errors: total.symbol_errors,
        frame_errors: total.frame_errors,
        ber: total.bit_errors as f64 / bits as f64,
        stopped,
        wall_time: started.elapsed(),
    })
}

/// Seed of the `index`-th SNR point.
pub fn point_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64 + 1);
    rng.gen()
}

/// Runs every SNR point in order, stopping early per `spec.stop_below_ber`.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<BerRecord>> {
    run_sweep_with(spec, |_| {})
}

/// [`run_sweep`] with a callback invoked after each point.
pub fn run_sweep_with(spec: &SweepSpec, mut progress: impl FnMut(&BerRecord)) -> Result<Vec<BerRecord>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.snr_points.len());
    for (i, &snr) in spec.snr_points.iter().enumerate() {
        let rec = run_point(spec, snr, point_seed(spec.seed, i))?;
        progress(&rec);
        out.push(rec);
        if spec.stop_below_ber.is_some_and(|t| rec.ber < t) {
            break;
        }
    }
    Ok(out)
}

/// One labelled BER curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub spec: SweepSpec,
    pub records: Vec<BerRecord>,
}

impl Curve {
    /// SNR at which the curve first drops below `target`, interpolated
    /// linearly in `log10(BER)` between the bracketing points.
    pub fn crossing(&self, target: f64) -> Option<f64> {
        let i = self.records.iter().position(|r| r.ber < target)?;
        if i == 0 {
            return Some(self.records[0].snr_db);
        }
        let (a, b) = (&self.records[i - 1], &self.records[i]);
        if b.ber == 0.0 {
            return Some(b.snr_db);
        }
        let (la, lb, lt) = (a.ber.log10(), b.ber.log10(), target.log10());
        Some(a.snr_db + (la - lt) / (la - lb) * (b.snr_db - a.snr_db))
    }
}

pub const CSV_HEADER: &str =
    "snr_db,frames,bits,bit_errors,symbol_errors,frame_errors,ber,mode,cfo_hz,sfo_hz,sf,cr,os,seed,frame_len,stop";

/// CSV rows for `curves`, header included. Wall time is omitted so that
/// output is reproducible byte for byte.
pub fn curves_to_csv(curves: &[Curve]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for c in curves {
        let sp = &c.spec;
        for r in &c.records {
            writeln!(
                s,
                "{},{},{},{},{},{},{:.6e},{},{},{},{},{},{},{},{},{}",
                r.snr_db,
                r.frames,
                r.bits,
                r.bit_errors,
                r.symbol_errors,
                r.frame_errors,
                r.ber,
                sp.mode.label(),
                sp.impairments.cfo_hz,
                sp.impairments.sfo_hz,
                sp.params.sf(),
                sp.cr.value(),
                sp.params.os(),
                sp.seed,
                sp.frame_len_symbols,
                r.stopped.label()
            )
            .expect("writing to a String cannot fail");
        }
    }
    s
}

/// Knobs for the built-in experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOptions {
    pub seed: u64,
    pub snr_points: Vec<f64>,
    pub stop: StopRule,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

fn snr_range(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

impl ReplicationOptions {
    pub fn fig2() -> Self {
        ReplicationOptions { seed: DEFAULT_SEED, snr_points: snr_range(-16.0, -2.0, 0.5), stop: StopRule::default() }
    }

    pub fn fig3() -> Self {
        ReplicationOptions {
            seed: DEFAULT_SEED,
            snr_points: snr_range(-16.0, 0.0, 2.0),
            stop: StopRule { min_bit_errors: 100, max_frames: 1_000 },
        }
    }
}

pub const FIG2_CFO_HZ: [f64; 2] = [10_000.0, 10_100.0];
pub const FIG2_FRAME_LEN: usize = 32;
pub const FIG3_SFO_HZ: [f64; 2] = [5.0, 10.0];
/// Short frames end before the first drift at 10 Hz (symbol 48); long
/// frames run well past it at 5 Hz (symbol 97).
pub const FIG3_FRAME_LENS: [usize; 2] = [32, 200];

/// The CFO experiment: SF 8, 125 kHz, code rate 4/8, 32 payload symbols.
///
/// For each CFO value the three CFO receiver modes are swept until their
/// BER drops below 1e-3; a zero-CFO aligned curve serves as the baseline.
pub fn fig2_specs(opts: &ReplicationOptions) -> Result<Vec<SweepSpec>> {
    let params = LoraParams::new(8, 125_000, 1, 8)?;
    let base = SweepSpec {
        params,
        cr: CodeRate::CR_4_8,
        frame_len_symbols: FIG2_FRAME_LEN,
        snr_points: opts.snr_points.clone(),
        impairments: ChannelImpairments::default(),
        mode: ReceiverMode::AlignedNoComp,
        stop: opts.stop,
        seed: opts.seed,
        stop_below_ber: Some(1e-3),
    };
    let mut specs = vec![base.clone()];
    for cfo in FIG2_CFO_HZ {
        for mode in [ReceiverMode::AlignedNoComp, ReceiverMode::TimeOffsetSync, ReceiverMode::TimeOffsetSyncCfoComp] {
            specs.push(SweepSpec {
                impairments: ChannelImpairments { cfo_hz: cfo, ..Default::default() },
                mode,
                ..base.clone()
            });
        }
    }
    Ok(specs)
}

/// The SFO experiment: SF 8, 250 kHz, code rate 4/8, for each SFO value and
/// frame length the modes no-realign (os 1), realign (os 1) and realign (os 2).
pub fn fig3_specs(opts: &ReplicationOptions) -> Result<Vec<SweepSpec>> {
    let mut specs = Vec::new();
    for sfo in FIG3_SFO_HZ {
        for len in FIG3_FRAME_LENS {
            for (mode, os) in
                [(ReceiverMode::SfoNoRealign, 1), (ReceiverMode::SfoRealign, 1), (ReceiverMode::SfoRealign, 2)]
            {
                specs.push(SweepSpec {
                    params: LoraParams::new(8, 250_000, os, 8)?,
                    cr: CodeRate::CR_4_8,
                    frame_len_symbols: len,
                    snr_points: opts.snr_points.clone(),
                    impairments: ChannelImpairments { sfo_hz: sfo, ..Default::default() },
                    mode,
                    stop: opts.stop,
                    seed: opts.seed,
                    stop_below_ber: Some(1e-6),
                });
            }
        }
    }
    Ok(specs)
}

fn run_all(specs: Vec<SweepSpec>, progress: &mut dyn FnMut(&SweepSpec, &BerRecord)) -> Result<Vec<Curve>> {
    specs
        .into_iter()
        .map(|spec| {
            let records = run_sweep_with(&spec, |r| progress(&spec, r))?;
            Ok(Curve { spec, records })
        })
        .collect()
}

pub fn replicate_fig2(
    opts: &ReplicationOptions,
    progress: &mut dyn FnMut(&SweepSpec, &BerRecord),
) -> Result<Vec<Curve>> {
    run_all(fig2_specs(opts)?, progress)
}

pub fn replicate_fig3(
    opts: &ReplicationOptions,
    progress: &mut dyn FnMut(&SweepSpec, &BerRecord),
) -> Result<Vec<Curve>> {
    run_all(fig3_specs(opts)?, progress)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(mode: ReceiverMode, imp: ChannelImpairments) -> SweepSpec {
        SweepSpec {
            params: LoraParams::new(8, 125_000, 1, 8).unwrap(),
            cr: CodeRate::CR_4_8,
            frame_len_symbols: 16,
            snr_points: vec![f64::INFINITY],
            impairments: imp,
            mode,
            stop: StopRule { min_bit_errors: 100, max_frames: 20 },
            seed: 1,
            stop_below_ber: None,
        }
    }

    #[test]
    fn noiseless_is_error_free() {
        for mode in [ReceiverMode::AlignedNoComp, ReceiverMode::TimeOffsetSync, ReceiverMode::TimeOffsetSyncCfoComp] {
            let r = run_point(&spec(mode, ChannelImpairments::default()), f64::INFINITY, 9).unwrap();
            assert_eq!(r.bit_errors, 0);
            assert_eq!(r.frames, 20);
            assert_eq!(r.bits, 20 * 64);
            assert_eq!(r.stopped, StopReason::MaxFrames);
        }
    }

    #[test]
    fn cfo_above_half_bin_breaks_aligned_receiver() {
        // 0.505 bins at SF 8, 125 kHz
        let cfo = 125_000.0 / 512.0 * 1.01;
        let s = spec(ReceiverMode::AlignedNoComp, ChannelImpairments { cfo_hz: cfo, ..Default::default() });
        let r = run_point(&s, f64::INFINITY, 2).unwrap();
        assert_eq!(r.ser(s.frame_len_symbols), 1.0);
        let s = spec(ReceiverMode::TimeOffsetSyncCfoComp, s.impairments);
        assert_eq!(run_point(&s, f64::INFINITY, 2).unwrap().bit_errors, 0);
    }

    #[test]
    fn deterministic() {
        let mut s =
            spec(ReceiverMode::TimeOffsetSyncCfoComp, ChannelImpairments { cfo_hz: 10_000.0, ..Default::default() });
        s.snr_points = vec![-14.0, -12.0];
        s.stop = StopRule { min_bit_errors: 50, max_frames: 300 };
        let a = run_sweep(&s).unwrap();
        let b = run_sweep(&s).unwrap();
        assert_eq!(
            curves_to_csv(&[Curve { spec: s.clone(), records: a }]),
            curves_to_csv(&[Curve { spec: s, records: b }])
        );
    }

    #[test]
    fn stops_on_min_errors() {
        let mut s = spec(ReceiverMode::AlignedNoComp, ChannelImpairments::default());
        s.stop = StopRule { min_bit_errors: 10, max_frames: 100_000 };
        let r = run_point(&s, -30.0, 4).unwrap();
        assert_eq!(r.stopped, StopReason::MinErrors);
        assert!(r.bit_errors >= 10);
        assert!(r.frames < 100_000 && r.frames.is_multiple_of(BATCH));
        assert!(r.ber > 0.0 && r.ber <= 1.0);
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec(ReceiverMode::AlignedNoComp, ChannelImpairments::default());
        s.snr_points.clear();
        assert!(matches!(run_sweep(&s), Err(Error::EmptySweep)));
        let mut s = spec(ReceiverMode::AlignedNoComp, ChannelImpairments::default());
        s.frame_len_symbols = 12;
        assert!(matches!(run_sweep(&s), Err(Error::Sweep(_))));
        let mut s = spec(ReceiverMode::AlignedNoComp, ChannelImpairments::default());
        s.stop.min_bit_errors = 0;
        assert!(run_sweep(&s).is_err());
    }

    #[test]
    fn crossing_interpolates_in_log_domain() {
        let s = spec(ReceiverMode::AlignedNoComp, ChannelImpairments::default());
        let rec = |snr, ber| BerRecord {
            snr_db: snr,
            frames: 1,
            bits: 1,
            bit_errors: 0,
            symbol_errors: 0,
            frame_errors: 0,
            ber,
            stopped: StopReason::MaxFrames,
            wall_time: Duration::ZERO,
        };
        let c = Curve { spec: s, records: vec![rec(0.0, 1e-2), rec(2.0, 1e-4)] };
        assert!((c.crossing(1e-3).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(c.crossing(1e-5), None);
    }

    #[test]
    fn mode_labels_roundtrip() {
        for m in ReceiverMode::ALL {
            assert_eq!(ReceiverMode::from_label(m.label()), Some(m));
        }
    }

    #[test]
    fn figure_specs_shape() {
        assert_eq!(fig2_specs(&ReplicationOptions::fig2()).unwrap().len(), 7);
        let f3 = fig3_specs(&ReplicationOptions::fig3()).unwrap();
        assert_eq!(f3.len(), 12);
        assert!(f3.iter().all(|s| s.validate().is_ok()));
    }
}
