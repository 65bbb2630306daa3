//! C ABI for the `cssphy` PHY library.
//!
//! Objects are opaque handles created by `*_new` / producer functions and
//! released with the matching `*_free`. Every fallible function returns a
//! [`CssphyStatus`]; on failure a description is available from
//! [`cssphy_last_error_message`] on the same thread. Panics never cross the
//! boundary: they are reported as `CSSPHY_STATUS_INTERNAL`.
//!
//! IQ samples cross the boundary as interleaved `float` pairs (I then Q).

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cssphy::demodulator::Demodulator;
use cssphy::framing::{build_frame, Frame, FrameConfig};
use cssphy::modulator::{modulate_symbols, IqBuffer, Symbol};
use cssphy::params::LoraParams;
use cssphy::receiver::{decode_stream, ReceiverConfig};
use cssphy::Error;
use num_complex::Complex64;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CssphyStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    NoPreamble = 4,
    SyncWordNotFound = 5,
    HeaderInvalid = 6,
    CrcMismatch = 7,
    Internal = 8,
}

/// Validated PHY parameters.
pub struct CssphyParams {
    inner: LoraParams,
}

/// A buffer of complex baseband samples with its sample rate.
pub struct CssphyIq {
    inner: IqBuffer,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(CssphyStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::NoPreamble => CssphyStatus::NoPreamble,
            Error::SyncWordNotFound => CssphyStatus::SyncWordNotFound,
            Error::HeaderDecode(_) => CssphyStatus::HeaderInvalid,
            _ => CssphyStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(CssphyStatus::NullPointer, format!("{name} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CssphyStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CssphyStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal error");
            CssphyStatus::Internal
        }
    }
}

unsafe fn slice<'a, T>(data: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn params_ref<'a>(p: *const CssphyParams) -> Result<&'a LoraParams, Failure> {
    p.as_ref().map(|p| &p.inner).ok_or_else(|| null("params"))
}

unsafe fn iq_ref<'a>(iq: *const CssphyIq) -> Result<&'a IqBuffer, Failure> {
    iq.as_ref().map(|b| &b.inner).ok_or_else(|| null("iq"))
}

unsafe fn emit_iq(out: *mut *mut CssphyIq, buf: IqBuffer) {
    *out = Box::into_raw(Box::new(CssphyIq { inner: buf }));
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn cssphy_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn cssphy_status_string(status: CssphyStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        CssphyStatus::Ok => b"ok\0",
        CssphyStatus::NullPointer => b"null pointer\0",
        CssphyStatus::InvalidArgument => b"invalid argument\0",
        CssphyStatus::BufferTooSmall => b"buffer too small\0",
        CssphyStatus::NoPreamble => b"no preamble found\0",
        CssphyStatus::SyncWordNotFound => b"sync word not found\0",
        CssphyStatus::HeaderInvalid => b"header invalid\0",
        CssphyStatus::CrcMismatch => b"CRC mismatch\0",
        CssphyStatus::Internal => b"internal error\0",
    };
    s.as_ptr().cast()
}

/// Creates a parameter set. `bw` is 125000, 250000 or 500000 Hz.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn cssphy_params_new(
    sf: u32,
    bw: u32,
    os: u32,
    n_pre: u32,
    out: *mut *mut CssphyParams,
) -> CssphyStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = LoraParams::new(sf, bw, os, n_pre)?;
        *out = Box::into_raw(Box::new(CssphyParams { inner }));
        Ok(())
    })
}

/// # Safety
/// `params` must be null or a handle from [`cssphy_params_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cssphy_params_free(params: *mut CssphyParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Samples per symbol, `os * 2^sf`; 0 for a null handle.
///
/// # Safety
/// `params` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cssphy_params_samples_per_symbol(params: *const CssphyParams) -> usize {
    params.as_ref().map_or(0, |p| p.inner.samples_per_symbol())
}

/// Copies `n_samples` interleaved I/Q pairs into a new buffer.
///
/// # Safety
/// `samples` must point to `2 * n_samples` floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cssphy_iq_new(
    samples: *const f32,
    n_samples: usize,
    sample_rate: f64,
    out: *mut *mut CssphyIq,
) -> CssphyStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Failure(CssphyStatus::InvalidArgument, format!("invalid sample rate {sample_rate}")));
        }
        let data = slice(samples, 2 * n_samples, "samples")?;
        let buf = data.chunks_exact(2).map(|c| Complex64::new(c[0] as f64, c[1] as f64)).collect();
        emit_iq(out, IqBuffer::new(buf, sample_rate));
        Ok(())
    })
}

/// # Safety
/// `iq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cssphy_iq_free(iq: *mut CssphyIq) {
    if !iq.is_null() {
        drop(Box::from_raw(iq));
    }
}

/// Number of complex samples; 0 for a null handle.
///
/// # Safety
/// `iq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cssphy_iq_len(iq: *const CssphyIq) -> usize {
    iq.as_ref().map_or(0, |b| b.inner.len())
}

/// Sample rate in Hz; 0 for a null handle.
///
/// # Safety
/// `iq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cssphy_iq_sample_rate(iq: *const CssphyIq) -> f64 {
    iq.as_ref().map_or(0.0, |b| b.inner.rate())
}

/// Copies the samples as interleaved floats into `out`, which holds room
/// for `capacity` complex samples.
///
/// # Safety
/// `iq` must be a live handle; `out` must point to `2 * capacity` floats.
#[no_mangle]
pub unsafe extern "C" fn cssphy_iq_copy(iq: *const CssphyIq, out: *mut f32, capacity: usize) -> CssphyStatus {
    guard(|| {
        let buf = iq_ref(iq)?;
        if capacity < buf.len() {
            return Err(Failure(
                CssphyStatus::BufferTooSmall,
                format!("need room for {} samples, have {capacity}", buf.len()),
            ));
        }
        if buf.is_empty() {
            return Ok(());
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let dst = std::slice::from_raw_parts_mut(out, 2 * buf.len());
        for (d, z) in dst.chunks_exact_mut(2).zip(buf.iter()) {
            d[0] = z.re as f32;
            d[1] = z.im as f32;
        }
        Ok(())
    })
}

/// Modulates `n` symbol values back to back.
///
/// # Safety
/// `params` must be live; `symbols` must point to `n` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cssphy_modulate_symbols(
    params: *const CssphyParams,
    symbols: *const u32,
    n: usize,
    out: *mut *mut CssphyIq,
) -> CssphyStatus {
    guard(|| {
        let p = params_ref(params)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let syms =
            slice(symbols, n, "symbols")?.iter().map(|&v| Symbol::for_params(v, p)).collect::<Result<Vec<_>, _>>()?;
        emit_iq(out, modulate_symbols(&syms, p));
        Ok(())
    })
}

/// Demodulates the symbol starting at sample `offset`.
///
/// # Safety
/// `params` and `iq` must be live handles; `symbol` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cssphy_demod_symbol(
    params: *const CssphyParams,
    iq: *const CssphyIq,
    offset: usize,
    symbol: *mut u32,
) -> CssphyStatus {
    guard(|| {
        let p = params_ref(params)?;
        let buf = iq_ref(iq)?;
        if symbol.is_null() {
            return Err(null("symbol"));
        }
        let len = p.samples_per_symbol();
        let end = offset.checked_add(len).filter(|&e| e <= buf.len()).ok_or_else(|| {
            Failure(CssphyStatus::InvalidArgument, format!("symbol at {offset} runs past {} samples", buf.len()))
        })?;
        *symbol = Demodulator::new(p).demod(&buf[offset..end])?.symbol.value();
        Ok(())
    })
}

/// Builds a frame with explicit header, CRC and code rate 4/8 (at most 255
/// payload bytes).
///
/// # Safety
/// `params` must be live; `payload` must point to `len` bytes; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cssphy_build_frame(
    params: *const CssphyParams,
    payload: *const u8,
    len: usize,
    out: *mut *mut CssphyIq,
) -> CssphyStatus {
    guard(|| {
        let p = params_ref(params)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let frame = Frame::new(slice(payload, len, "payload")?.to_vec(), FrameConfig::default())?;
        emit_iq(out, build_frame(&frame, p)?);
        Ok(())
    })
}

/// Detects, synchronizes and decodes one frame built by
/// [`cssphy_build_frame`]. On success the payload is copied to `payload` and
/// its length stored in `len`. With `CSSPHY_STATUS_BUFFER_TOO_SMALL`, `len`
/// receives the required size.
///
/// # Safety
/// `params` and `iq` must be live; `payload` must have room for `capacity`
/// bytes; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cssphy_decode_frame(
    params: *const CssphyParams,
    iq: *const CssphyIq,
    payload: *mut u8,
    capacity: usize,
    len: *mut usize,
) -> CssphyStatus {
    guard(|| {
        let p = params_ref(params)?;
        let buf = iq_ref(iq)?;
        if len.is_null() {
            return Err(null("len"));
        }
        let report = decode_stream(buf, p, &FrameConfig::default(), &ReceiverConfig::default())?;
        if !report.parsed.crc_ok {
            return Err(Failure(CssphyStatus::CrcMismatch, "payload CRC mismatch".into()));
        }
        let data = &report.parsed.frame.payload;
        *len = data.len();
        if capacity < data.len() {
            return Err(Failure(
                CssphyStatus::BufferTooSmall,
                format!("payload is {} bytes, buffer holds {capacity}", data.len()),
            ));
        }
        if !data.is_empty() {
            if payload.is_null() {
                return Err(null("payload"));
            }
            ptr::copy_nonoverlapping(data.as_ptr(), payload, data.len());
        }
        Ok(())
    })
}
