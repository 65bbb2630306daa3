//! IQ sample files: interleaved little-endian `f32` I/Q pairs behind a
//! 32-byte header.
//!
//! ```text
//! offset  size  field
//!      0     8  magic "CSSIQ\0\0\0"
//!      8     4  version (u32 LE) = 1
//!     12     4  format tag (u32 LE) = 1, complex float32 interleaved
//!     16     8  sample rate in Hz (f64 LE)
//!     24     8  sample count (u64 LE)
//! ```
//!
//! Headerless ("raw") files hold only the sample body, as written by most SDR
//! tools; the sample rate must then be supplied by the caller.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::modulator::IqBuffer;

pub const MAGIC: [u8; 8] = *b"CSSIQ\0\0\0";
pub const VERSION: u32 = 1;
pub const FORMAT_CF32: u32 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IqFileHeader {
    pub version: u32,
    pub format: u32,
    pub sample_rate: f64,
    pub sample_count: u64,
}

impl IqFileHeader {
    pub fn for_buffer(buf: &IqBuffer) -> Self {
        IqFileHeader { version: VERSION, format: FORMAT_CF32, sample_rate: buf.rate(), sample_count: buf.len() as u64 }
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..8].copy_from_slice(&MAGIC);
        out[8..12].copy_from_slice(&self.version.to_le_bytes());
        out[12..16].copy_from_slice(&self.format.to_le_bytes());
        out[16..24].copy_from_slice(&self.sample_rate.to_le_bytes());
        out[24..32].copy_from_slice(&self.sample_count.to_le_bytes());
        out
    }

    pub fn parse(bytes: &[u8; HEADER_LEN]) -> Result<Self> {
        if bytes[0..8] != MAGIC {
            return Err(Error::IqFormat("bad magic".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        let version = u32_at(8);
        if version != VERSION {
            return Err(Error::IqFormat(format!("unsupported version {version}")));
        }
        let format = u32_at(12);
        if format != FORMAT_CF32 {
            return Err(Error::IqFormat(format!("unsupported sample format {format}")));
        }
        let sample_rate = f64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::IqFormat(format!("invalid sample rate {sample_rate}")));
        }
        let sample_count = u64::from_le_bytes(bytes[24..32].try_into().expect("8 bytes"));
        Ok(IqFileHeader { version, format, sample_rate, sample_count })
    }
}

fn encode_body(buf: &IqBuffer) -> Vec<u8> {
    let mut body = Vec::with_capacity(buf.len() * 8);
    for z in buf.iter() {
        body.extend_from_slice(&(z.re as f32).to_le_bytes());
        body.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
    body
}

fn decode_body(bytes: &[u8]) -> Result<Vec<Complex64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::IqFormat(format!("body of {} bytes is not a whole number of samples", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[0..4].try_into().expect("4 bytes"));
            let im = f32::from_le_bytes(c[4..8].try_into().expect("4 bytes"));
            Complex64::new(re as f64, im as f64)
        })
        .collect())
}

/// Writes `buf` with a header. Samples are narrowed to `f32`.
pub fn write_iq<W: Write>(mut w: W, buf: &IqBuffer) -> Result<()> {
    w.write_all(&IqFileHeader::for_buffer(buf).to_bytes())?;
    w.write_all(&encode_body(buf))?;
    Ok(())
}

/// Writes only the sample body.
pub fn write_iq_raw<W: Write>(mut w: W, buf: &IqBuffer) -> Result<()> {
    w.write_all(&encode_body(buf))?;
    Ok(())
}

pub fn read_iq<R: Read>(mut r: R) -> Result<IqBuffer> {
    let mut head = [0u8; HEADER_LEN];
    r.read_exact(&mut head).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::IqFormat("file shorter than the header".into()),
        _ => Error::Io(e),
    })?;
    let header = IqFileHeader::parse(&head)?;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let samples = decode_body(&body)?;
    if samples.len() as u64 != header.sample_count {
        return Err(Error::IqFormat(format!(
            "header declares {} samples, body holds {}",
            header.sample_count,
            samples.len()
        )));
    }
    Ok(IqBuffer::new(samples, header.sample_rate))
}

pub fn read_iq_raw<R: Read>(mut r: R, sample_rate: f64) -> Result<IqBuffer> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::IqFormat(format!("invalid sample rate {sample_rate}")));
    }
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    Ok(IqBuffer::new(decode_body(&body)?, sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulator::{modulate_symbols, Symbol};
    use crate::params::make_params;

    fn sample_buffer() -> IqBuffer {
        let params = make_params(7, 125_000, 2, 8).unwrap();
        let y = modulate_symbols(&[Symbol::new(3, 7).unwrap(), Symbol::new(100, 7).unwrap()], &params);
        // narrow to f32 so the file holds the exact values
        let s = y.iter().map(|z| Complex64::new(z.re as f32 as f64, z.im as f32 as f64)).collect();
        IqBuffer::new(s, y.rate())
    }

    #[test]
    fn header_layout() {
        let h = IqFileHeader { version: 1, format: 1, sample_rate: 250e3, sample_count: 7 };
        let b = h.to_bytes();
        assert_eq!(&b[..8], b"CSSIQ\0\0\0");
        assert_eq!(b[8..12], [1, 0, 0, 0]);
        assert_eq!(b[24..32], [7, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(IqFileHeader::parse(&b).unwrap(), h);
    }

    #[test]
    fn bit_exact_roundtrip() {
        let y = sample_buffer();
        let mut file = Vec::new();
        write_iq(&mut file, &y).unwrap();
        assert_eq!(file.len(), HEADER_LEN + 8 * y.len());
        let back = read_iq(file.as_slice()).unwrap();
        assert_eq!(back, y);
        let mut again = Vec::new();
        write_iq(&mut again, &back).unwrap();
        assert_eq!(again, file);
    }

    #[test]
    fn raw_roundtrip() {
        let y = sample_buffer();
        let mut file = Vec::new();
        write_iq_raw(&mut file, &y).unwrap();
        assert_eq!(read_iq_raw(file.as_slice(), y.rate()).unwrap(), y);
        assert!(read_iq_raw(file.as_slice(), 0.0).is_err());
    }

    #[test]
    fn rejects_corrupt_files() {
        let y = sample_buffer();
        let mut file = Vec::new();
        write_iq(&mut file, &y).unwrap();

        let mut bad = file.clone();
        bad[0] = b'X';
        assert!(matches!(read_iq(bad.as_slice()), Err(Error::IqFormat(_))));
        let mut bad = file.clone();
        bad[8] = 2;
        assert!(matches!(read_iq(bad.as_slice()), Err(Error::IqFormat(_))));
        let mut bad = file.clone();
        bad[12] = 9;
        assert!(matches!(read_iq(bad.as_slice()), Err(Error::IqFormat(_))));
        assert!(matches!(read_iq(&file[..file.len() - 8]), Err(Error::IqFormat(_))));
        assert!(matches!(read_iq(&file[..file.len() - 3]), Err(Error::IqFormat(_))));
        assert!(matches!(read_iq(&file[..10]), Err(Error::IqFormat(_))));
    }
}
