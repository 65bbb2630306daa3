//! Chirp spread spectrum (LoRa-style) physical layer.
//!
//! The transmit path maps payload bytes through [`codec::tx_chain`] to
//! symbols and renders them as chirps ([`modulator`]), framed by a preamble
//! and sync word ([`framing`]). [`channel`] applies AWGN, fading, carrier and
//! sampling frequency offsets and delay. The receive path detects and aligns
//! frames ([`sync`]), demodulates by dechirping and FFT ([`demodulator`]) and
//! decodes ([`receiver`]). [`ber`] runs Monte-Carlo error-rate sweeps.
//!
//! ```
//! use cssphy::framing::{build_frame, Frame, FrameConfig};
//! use cssphy::params::LoraParams;
//! use cssphy::receiver::{decode_stream, ReceiverConfig};
//!
//! let params = LoraParams::new(8, 125_000, 1, 8).unwrap();
//! let frame = Frame::new(b"hi".to_vec(), FrameConfig::default()).unwrap();
//! let iq = build_frame(&frame, &params).unwrap();
//! let rx = decode_stream(&iq, &params, &FrameConfig::default(), &ReceiverConfig::default()).unwrap();
//! assert_eq!(rx.parsed.frame.payload, b"hi");
//! ```

pub mod ber;
pub mod channel;
pub mod codec;
pub mod config;
pub mod demodulator;
pub mod error;
pub mod framing;
pub mod iq;
pub mod modulator;
pub mod params;
pub mod receiver;
pub mod sync;

pub use error::{Error, Result};
pub use modulator::{IqBuffer, Symbol};
pub use params::LoraParams;
