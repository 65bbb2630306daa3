//! PHY frame assembly and parsing.
//!
//! Layout on air:
//!
//! ```text
//! n_pre upchirps | 2 sync-word symbols | 2.25 downchirps | [header] | payload (+ CRC)
//! ```
//!
//! The optional header is one interleaving block at code rate 4/8 carrying
//! 16 bits, MSB first: payload length (8), code rate (3), CRC flag (1) and a
//! 4-bit checksum equal to the XOR of the three preceding nibbles. Payload
//! bytes are followed by the CRC-16 (big-endian) when enabled, and the
//! resulting bit stream is zero-padded to whole interleaving blocks.

use crate::codec::{data_bits_per_block, rx_chain, symbols_per_block, tx_chain, BitBlock, CodeRate, DecodeStats};
use crate::error::{Error, Result};
use crate::modulator::{render, Chirp, IqBuffer, Symbol};
use crate::params::LoraParams;

/// Default two-symbol sync word.
pub const DEFAULT_SYNC_WORD: [u32; 2] = [0x18, 0x10];

const HEADER_BITS: usize = 16;

/// Delimiter length between the preamble and the first data symbol, in
/// quarter symbols (2 sync words + 2.25 downchirps).
pub const DELIMITER_QUARTERS: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameConfig {
    pub has_header: bool,
    pub has_crc: bool,
    pub cr: CodeRate,
    /// Payload length in bytes. Taken from the header when one is present.
    pub payload_len: usize,
    pub sync_word: [u32; 2],
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            has_header: true,
            has_crc: true,
            cr: CodeRate::CR_4_8,
            payload_len: 0,
            sync_word: DEFAULT_SYNC_WORD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub payload: Vec<u8>,
    pub config: FrameConfig,
}

impl Frame {
    /// Wraps `payload`, setting `config.payload_len` to match.
    pub fn new(payload: Vec<u8>, mut config: FrameConfig) -> Result<Self> {
        if config.has_header && payload.len() > u8::MAX as usize {
            return Err(Error::PayloadTooLong(payload.len()));
        }
        config.payload_len = payload.len();
        Ok(Frame { payload, config })
    }
}

/// Result of [`parse_frame`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedFrame {
    pub frame: Frame,
    /// CRC verdict; `true` when the frame carries no CRC.
    pub crc_ok: bool,
    pub stats: DecodeStats,
}

/// CRC-16/CCITT, polynomial 0x1021, initial value 0x0000, no reflection.
pub fn crc16(data: &[u8]) -> u16 {
    let mut crc: u16 = 0;
    for &byte in data {
        crc ^= (byte as u16) << 8;
        for _ in 0..8 {
            crc = if crc & 0x8000 != 0 { (crc << 1) ^ 0x1021 } else { crc << 1 };
        }
    }
    crc
}

fn header_checksum(len: u8, cr: u32, has_crc: bool) -> u8 {
    (len >> 4) ^ (len & 0xF) ^ (((cr as u8) << 1) | has_crc as u8)
}

fn push_bits(out: &mut Vec<u8>, value: u32, width: u32) {
    for i in (0..width).rev() {
        out.push(((value >> i) & 1) as u8);
    }
}

fn read_bits(bits: &[u8]) -> u32 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as u32)
}

fn header_symbols(cfg: &FrameConfig, params: &LoraParams) -> Result<Vec<Symbol>> {
    let len = u8::try_from(cfg.payload_len).map_err(|_| Error::PayloadTooLong(cfg.payload_len))?;
    let mut bits = Vec::with_capacity(data_bits_per_block(params.sf()));
    push_bits(&mut bits, len as u32, 8);
    push_bits(&mut bits, cfg.cr.value(), 3);
    push_bits(&mut bits, cfg.has_crc as u32, 1);
    push_bits(&mut bits, header_checksum(len, cfg.cr.value(), cfg.has_crc) as u32, 4);
    let mut block = BitBlock::new(bits);
    block.pad_to(data_bits_per_block(params.sf()));
    tx_chain(&block, params, CodeRate::CR_4_8)
}

/// Number of symbols occupied by the header (zero without one).
pub fn header_symbol_count(cfg: &FrameConfig) -> usize {
    if cfg.has_header {
        symbols_per_block(CodeRate::CR_4_8)
    } else {
        0
    }
}

fn body_bits(cfg: &FrameConfig) -> usize {
    cfg.payload_len * 8 + if cfg.has_crc { 16 } else { 0 }
}

/// Number of payload (+CRC) symbols after the header.
pub fn body_symbol_count(cfg: &FrameConfig, sf: u32) -> usize {
    body_bits(cfg).div_ceil(data_bits_per_block(sf)) * symbols_per_block(cfg.cr)
}

/// All symbols after the delimiter.
pub fn data_symbol_count(cfg: &FrameConfig, sf: u32) -> usize {
    header_symbol_count(cfg) + body_symbol_count(cfg, sf)
}

/// Symbols after the delimiter: header (if any) then payload and CRC.
pub fn frame_data_symbols(frame: &Frame, params: &LoraParams) -> Result<Vec<Symbol>> {
    let cfg = &frame.config;
    let mut out = if cfg.has_header { header_symbols(cfg, params)? } else { Vec::new() };
    let mut bytes = frame.payload.clone();
    if cfg.has_crc {
        bytes.extend_from_slice(&crc16(&frame.payload).to_be_bytes());
    }
    let mut bits = BitBlock::from_bytes(&bytes);
    bits.pad_to(data_bits_per_block(params.sf()));
    out.extend(tx_chain(&bits, params, cfg.cr)?);
    Ok(out)
}

/// Preamble and delimiter segments followed by `data` symbols.
pub fn frame_segments(data: &[Symbol], sync_word: [u32; 2], params: &LoraParams) -> Result<Vec<Chirp>> {
    let up = Chirp::Up(Symbol::new(0, params.sf())?);
    let mut segs = vec![up; params.n_pre() as usize];
    for &w in &sync_word {
        segs.push(Chirp::Up(Symbol::new(w, params.sf())?));
    }
    segs.extend([Chirp::Down, Chirp::Down, Chirp::QuarterDown]);
    segs.extend(data.iter().map(|&s| Chirp::Up(s)));
    Ok(segs)
}

/// Samples from the frame start to the first data symbol.
pub fn preamble_and_delimiter_samples(params: &LoraParams) -> usize {
    params.n_pre() as usize * params.samples_per_symbol() + DELIMITER_QUARTERS * params.samples_per_symbol() / 4
}

pub fn build_frame(frame: &Frame, params: &LoraParams) -> Result<IqBuffer> {
    let data = frame_data_symbols(frame, params)?;
    Ok(render(frame_segments(&data, frame.config.sync_word, params)?, params))
}

/// Decodes the header block; returns the config it describes.
pub fn decode_header(symbols: &[Symbol], base: &FrameConfig, params: &LoraParams) -> Result<FrameConfig> {
    let n = symbols_per_block(CodeRate::CR_4_8);
    if symbols.len() < n {
        return Err(Error::HeaderDecode("truncated header"));
    }
    let (bits, stats) = rx_chain(&symbols[..n], params, CodeRate::CR_4_8)?;
    if stats.any_uncorrectable() {
        return Err(Error::HeaderDecode("uncorrectable header codeword"));
    }
    let len = read_bits(&bits[0..8]) as u8;
    let cr = read_bits(&bits[8..11]);
    let has_crc = bits[11] == 1;
    let check = read_bits(&bits[12..HEADER_BITS]) as u8;
    if check != header_checksum(len, cr, has_crc) {
        return Err(Error::HeaderDecode("checksum mismatch"));
    }
    let cr = CodeRate::new(cr).map_err(|_| Error::HeaderDecode("invalid code rate"))?;
    Ok(FrameConfig { has_header: true, has_crc, cr, payload_len: len as usize, sync_word: base.sync_word })
}

/// Inverse of the post-delimiter part of [`build_frame`].
///
/// With a header, `cfg.cr`, `cfg.has_crc` and `cfg.payload_len` are taken
/// from the header. A CRC mismatch is reported in the result, not as an error.
pub fn parse_frame(symbols: &[Symbol], cfg: &FrameConfig, params: &LoraParams) -> Result<ParsedFrame> {
    let (cfg, body) = if cfg.has_header {
        let hdr = decode_header(symbols, cfg, params)?;
        (hdr, &symbols[header_symbol_count(&hdr)..])
    } else {
        (*cfg, symbols)
    };
    let needed = body_symbol_count(&cfg, params.sf());
    if body.len() < needed {
        return Err(Error::LengthMismatch { expected: needed, actual: body.len() });
    }
    let (bits, stats) = rx_chain(&body[..needed], params, cfg.cr)?;
    let bytes = bits.to_bytes();
    let payload = bytes[..cfg.payload_len].to_vec();
    let crc_ok = if cfg.has_crc {
        let rx = u16::from_be_bytes([bytes[cfg.payload_len], bytes[cfg.payload_len + 1]]);
        rx == crc16(&payload)
    } else {
        true
    };
    Ok(ParsedFrame { frame: Frame { payload, config: cfg }, crc_ok, stats })
}
