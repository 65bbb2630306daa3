//! TOML configuration for the command-line tool.
//!
//! Every section and key is optional; omitted values take the defaults shown.
//!
//! ```toml
//! seed = 20240601            # master seed for sweeps
//!
//! [params]
//! sf = 8
//! bw = 125000                # 125000, 250000 or 500000
//! os = 1
//! n_pre = 8
//!
//! [frame]
//! header = true
//! crc = true
//! cr = 4                     # 1..=4, i.e. 4/5..4/8
//! payload_len = 0            # only read for implicit-header frames
//! sync_word = [24, 16]
//!
//! [channel]
//! snr_db = 10.0              # omit for a noiseless channel
//! h_re = 1.0
//! h_im = 0.0
//! cfo_hz = 0.0
//! sfo_hz = 0.0
//! delay_samples = 0
//! seed = 0
//!
//! [receiver]
//! threshold = 40.0           # omit for the adaptive threshold
//! cfo_compensation = true
//! sfo_realign = false        # realign using channel.sfo_hz
//!
//! [sweep]
//! mode = "timeoffset-sync+cfo-comp"
//! frame_len_symbols = 32
//! snr_db = [-14.0, -12.0, -10.0]
//! min_bit_errors = 100
//! max_frames = 100000
//! stop_below_ber = 1e-3      # optional
//! ```

use num_complex::Complex64;
use serde::Deserialize;

use crate::ber::{ReceiverMode, StopRule, SweepSpec, DEFAULT_SEED};
use crate::channel::ChannelImpairments;
use crate::codec::CodeRate;
use crate::error::{Error, Result};
use crate::framing::{FrameConfig, DEFAULT_SYNC_WORD};
use crate::params::LoraParams;
use crate::receiver::ReceiverConfig;
use crate::sync::Threshold;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsSection {
    pub sf: u32,
    pub bw: u32,
    pub os: u32,
    pub n_pre: u32,
}

impl Default for ParamsSection {
    fn default() -> Self {
        ParamsSection { sf: 8, bw: 125_000, os: 1, n_pre: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameSection {
    pub header: bool,
    pub crc: bool,
    pub cr: u32,
    pub payload_len: usize,
    pub sync_word: [u32; 2],
}

impl Default for FrameSection {
    fn default() -> Self {
        FrameSection { header: true, crc: true, cr: 4, payload_len: 0, sync_word: DEFAULT_SYNC_WORD }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub snr_db: Option<f64>,
    pub h_re: f64,
    pub h_im: f64,
    pub cfo_hz: f64,
    pub sfo_hz: f64,
    pub delay_samples: usize,
    pub seed: u64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection { snr_db: None, h_re: 1.0, h_im: 0.0, cfo_hz: 0.0, sfo_hz: 0.0, delay_samples: 0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverSection {
    pub threshold: Option<f64>,
    pub cfo_compensation: bool,
    pub sfo_realign: bool,
}

impl Default for ReceiverSection {
    fn default() -> Self {
        ReceiverSection { threshold: None, cfo_compensation: true, sfo_realign: false }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub mode: String,
    pub frame_len_symbols: usize,
    pub snr_db: Vec<f64>,
    pub min_bit_errors: u64,
    pub max_frames: u64,
    pub stop_below_ber: Option<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        let stop = StopRule::default();
        SweepSection {
            mode: ReceiverMode::TimeOffsetSyncCfoComp.label().to_string(),
            frame_len_symbols: 32,
            snr_db: Vec::new(),
            min_bit_errors: stop.min_bit_errors,
            max_frames: stop.max_frames,
            stop_below_ber: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub params: ParamsSection,
    pub frame: FrameSection,
    pub channel: ChannelSection,
    pub receiver: ReceiverSection,
    pub sweep: SweepSection,
}

fn key_err(key: &str, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {e}"))
}

impl Config {
    /// Parses and validates a configuration document.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let params = self.lora_params()?;
        self.frame_config(&params)?;
        self.impairments()?;
        self.receiver_config(&params)?;
        self.sweep_mode()?;
        Ok(())
    }

    pub fn master_seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn lora_params(&self) -> Result<LoraParams> {
        let p = &self.params;
        LoraParams::new(p.sf, p.bw, p.os, p.n_pre).map_err(|e| {
            let key = match e {
                Error::SpreadingFactor(_) => "params.sf",
                Error::Bandwidth(_) => "params.bw",
                Error::Oversampling(_) => "params.os",
                _ => "params.n_pre",
            };
            key_err(key, e)
        })
    }

    pub fn frame_config(&self, params: &LoraParams) -> Result<FrameConfig> {
        let f = &self.frame;
        let cr = CodeRate::new(f.cr).map_err(|e| key_err("frame.cr", e))?;
        for w in f.sync_word {
            if w >= 1 << params.sf() {
                return Err(key_err("frame.sync_word", format!("value {w} does not fit SF {}", params.sf())));
            }
        }
        if f.header && f.payload_len > u8::MAX as usize {
            return Err(key_err("frame.payload_len", "must be at most 255"));
        }
        Ok(FrameConfig { has_header: f.header, has_crc: f.crc, cr, payload_len: f.payload_len, sync_word: f.sync_word })
    }

    pub fn impairments(&self) -> Result<ChannelImpairments> {
        let c = &self.channel;
        if c.snr_db.is_some_and(f64::is_nan) {
            return Err(key_err("channel.snr_db", "must be a number"));
        }
        let h = Complex64::new(c.h_re, c.h_im);
        if h.norm() == 0.0 || !h.norm().is_finite() {
            return Err(key_err("channel.h_re", "fading coefficient must be finite and nonzero"));
        }
        if !c.cfo_hz.is_finite() {
            return Err(key_err("channel.cfo_hz", "must be finite"));
        }
        if !c.sfo_hz.is_finite() || c.sfo_hz <= -(self.params.bw as f64) {
            return Err(key_err("channel.sfo_hz", "must be finite and above -bw"));
        }
        Ok(ChannelImpairments {
            snr_db: c.snr_db.unwrap_or(f64::INFINITY),
            h,
            cfo_hz: c.cfo_hz,
            sfo_hz: c.sfo_hz,
            delay_samples: c.delay_samples,
            seed: c.seed,
        })
    }

    pub fn receiver_config(&self, params: &LoraParams) -> Result<ReceiverConfig> {
        let r = &self.receiver;
        let threshold = match r.threshold {
            None => Threshold::Adaptive,
            Some(t) if t.is_finite() && t >= 0.0 => Threshold::Absolute(t),
            Some(_) => return Err(key_err("receiver.threshold", "must be a non-negative number")),
        };
        let sfo_rx_rate = if r.sfo_realign { Some(self.impairments()?.rx_sample_rate(params)) } else { None };
        Ok(ReceiverConfig { threshold, cfo_compensation: r.cfo_compensation, sfo_rx_rate })
    }

    fn sweep_mode(&self) -> Result<ReceiverMode> {
        ReceiverMode::from_label(&self.sweep.mode).ok_or_else(|| {
            let all: Vec<&str> = ReceiverMode::ALL.iter().map(|m| m.label()).collect();
            key_err("sweep.mode", format!("unknown mode `{}`, expected one of {}", self.sweep.mode, all.join(", ")))
        })
    }

    /// The `[sweep]` section as a runnable spec.
    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let params = self.lora_params()?;
        let s = &self.sweep;
        let spec = SweepSpec {
            params,
            cr: self.frame_config(&params)?.cr,
            frame_len_symbols: s.frame_len_symbols,
            snr_points: s.snr_db.clone(),
            impairments: self.impairments()?,
            mode: self.sweep_mode()?,
            stop: StopRule { min_bit_errors: s.min_bit_errors, max_frames: s.max_frames },
            seed: self.master_seed(),
            stop_below_ber: s.stop_below_ber,
        };
        spec.validate().map_err(|e| {
            let key = match &e {
                Error::EmptySweep => "sweep.snr_db",
                Error::Sweep(m) if m.contains("frame_len") => "sweep.frame_len_symbols",
                Error::Sweep(m) if m.contains("NaN") => "sweep.snr_db",
                _ => "sweep.min_bit_errors",
            };
            key_err(key, e)
        })?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = Config::from_toml("").unwrap();
        let p = c.lora_params().unwrap();
        assert_eq!((p.sf(), p.bw(), p.os(), p.n_pre()), (8, 125_000, 1, 8));
        assert_eq!(c.frame_config(&p).unwrap(), FrameConfig::default());
        assert_eq!(c.impairments().unwrap(), ChannelImpairments::default());
        assert_eq!(c.receiver_config(&p).unwrap(), ReceiverConfig::default());
        assert_eq!(c.master_seed(), DEFAULT_SEED);
    }

    #[test]
    fn full_document() {
        let text = r#"
            seed = 7
            [params]
            sf = 9
            bw = 250000
            os = 2
            [frame]
            header = false
            payload_len = 12
            cr = 3
            [channel]
            snr_db = -3.5
            cfo_hz = 1200.0
            delay_samples = 5
            [receiver]
            threshold = 12.5
            [sweep]
            mode = "sfo-realign"
            frame_len_symbols = 14
            snr_db = [-10.0, -8.0]
        "#;
        let c = Config::from_toml(text).unwrap();
        let spec = c.sweep_spec().unwrap();
        assert_eq!(spec.seed, 7);
        assert_eq!(spec.mode, ReceiverMode::SfoRealign);
        assert_eq!(spec.params.os(), 2);
        assert_eq!(spec.impairments.snr_db, -3.5);
        assert_eq!(spec.impairments.delay_samples, 5);
        let p = c.lora_params().unwrap();
        assert_eq!(c.receiver_config(&p).unwrap().threshold, Threshold::Absolute(12.5));
        assert!(!c.frame_config(&p).unwrap().has_header);
    }

    #[test]
    fn errors_name_the_key() {
        let cases = [
            ("[params]\nsf = 5", "params.sf"),
            ("[params]\nbw = 100000", "params.bw"),
            ("[params]\nos = 0", "params.os"),
            ("[params]\nn_pre = 1", "params.n_pre"),
            ("[frame]\ncr = 7", "frame.cr"),
            ("[frame]\nsync_word = [300, 1]", "frame.sync_word"),
            ("[channel]\nh_re = 0.0", "channel.h_re"),
            ("[receiver]\nthreshold = -1.0", "receiver.threshold"),
            ("[sweep]\nmode = \"magic\"", "sweep.mode"),
            ("[params]\nsff = 8", "sff"),
            ("[params]\nsf = \"eight\"", "sf"),
            ("[bogus]\nx = 1", "bogus"),
        ];
        for (text, key) in cases {
            let e = Config::from_toml(text).unwrap_err().to_string();
            assert!(e.contains(key), "{text:?} -> {e}");
        }
        let c = Config::from_toml("[sweep]\nframe_len_symbols = 10\nsnr_db = [0.0]").unwrap();
        assert!(c.sweep_spec().unwrap_err().to_string().contains("sweep.frame_len_symbols"));
        let c = Config::from_toml("").unwrap();
        assert!(c.sweep_spec().unwrap_err().to_string().contains("sweep.snr_db"));
    }
}
