//! C ABI over `snnlab`.
//!
//! Every fallible function returns a [`SnnlabStatus`]. On failure the message
//! is kept per thread and can be copied out with [`snnlab_last_error`].
//! Networks are opaque handles created by `snnlab_network_*` constructors and
//! released with [`snnlab_network_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use snnlab::coherence::{coherence_fn, firing_rate, CoherenceParams};
use snnlab::encoding::{encode_noisy, normalize, stream_rng, NoiseSpec};
use snnlab::io::{load_checkpoint, save_checkpoint};
use snnlab::network::{Architecture, Network};
use snnlab::neuron::{NeuronConfig, TimeConstant};
use snnlab::SnnError;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnnlabStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Bad argument, configuration, or architecture string.
    InvalidArgument = 2,
    /// File could not be read or written.
    Io = 3,
    /// Malformed checkpoint or dataset file.
    Format = 4,
    /// Quadrature failure or coherence outside [0, 1].
    Numerical = 5,
    /// Caller buffer too small; the required length was written back.
    BufferTooSmall = 6,
    /// Internal panic caught at the boundary.
    Panic = 7,
}

/// Opaque network handle.
pub struct SnnlabNetwork {
    net: Network,
}

/// Parameters of the scaled LIF diffusion model.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SnnlabCoherenceParams {
    /// Mean drive.
    pub mu: f64,
    /// Total noise intensity.
    pub d: f64,
    /// Stimulus share of the noise intensity, `0 <= d_st <= d`.
    pub d_st: f64,
    /// Absolute refractory period.
    pub tau_r: f64,
    pub v_th: f64,
    pub u_rest: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &SnnError) -> SnnlabStatus {
    match err {
        SnnError::Io { .. } => SnnlabStatus::Io,
        SnnError::Checkpoint(_) | SnnError::IdxFormat { .. } | SnnError::IdxTruncated { .. } | SnnError::IdxOverflow(_) => {
            SnnlabStatus::Format
        }
        SnnError::Quadrature { .. } | SnnError::CoherenceBound { .. } => SnnlabStatus::Numerical,
        _ => SnnlabStatus::InvalidArgument,
    }
}

struct Failure(SnnlabStatus, String);

impl From<SnnError> for Failure {
    fn from(e: SnnError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SnnlabStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SnnlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SnnlabStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SnnlabStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SnnlabStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn tau_of(tau_m: f64) -> TimeConstant {
    if tau_m.is_infinite() && tau_m > 0.0 {
        TimeConstant::Infinite
    } else {
        TimeConstant::Finite(tau_m)
    }
}

fn params_of(p: &SnnlabCoherenceParams) -> Result<CoherenceParams, Failure> {
    let params = CoherenceParams {
        mu: p.mu,
        d: p.d,
        d_st: p.d_st,
        tau_r: p.tau_r,
        v_th: p.v_th,
        u_rest: p.u_rest,
    };
    params.validate()?;
    Ok(params)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn snnlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the calling thread's last error message into `buf`.
///
/// Writes the required size (including the NUL) to `len` when it is non-null.
/// Returns `SNNLAB_STATUS_BUFFER_TOO_SMALL` if `capacity` is insufficient;
/// an empty string is written when no error has occurred.
///
/// # Safety
/// `buf` must be valid for `capacity` bytes, or null when `capacity` is 0.
#[no_mangle]
pub unsafe extern "C" fn snnlab_last_error(buf: *mut c_char, capacity: usize, len: *mut usize) -> SnnlabStatus {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&b"\0"[..], |c| c.as_bytes_with_nul());
        if !len.is_null() {
            *len = bytes.len();
        }
        if capacity < bytes.len() {
            return SnnlabStatus::BufferTooSmall;
        }
        if buf.is_null() {
            return SnnlabStatus::NullPointer;
        }
        ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, bytes.len());
        SnnlabStatus::Ok
    })
}

/// Build a network with freshly initialised weights.
///
/// `tau_m = INFINITY` selects the non-leaky integrate-and-fire neuron.
///
/// # Safety
/// `architecture` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn snnlab_network_create(
    architecture: *const c_char,
    tau_m: f64,
    v_th: f64,
    u_rest: f64,
    epsilon: f64,
    seed: u64,
    init_gain: f64,
    out: *mut *mut SnnlabNetwork,
) -> SnnlabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let arch = Architecture::parse(str_arg(architecture, "architecture")?)?;
        let neuron = NeuronConfig::new(tau_of(tau_m), v_th, u_rest, epsilon)?;
        let net = Network::build(arch, neuron, seed, init_gain)?;
        *out = Box::into_raw(Box::new(SnnlabNetwork { net }));
        Ok(())
    })
}

/// Load a network from a checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn snnlab_network_load(path: *const c_char, out: *mut *mut SnnlabNetwork) -> SnnlabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let net = load_checkpoint(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(SnnlabNetwork { net }));
        Ok(())
    })
}

/// Write a network to a checkpoint file.
///
/// # Safety
/// `net` must come from a constructor and `path` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn snnlab_network_save(net: *const SnnlabNetwork, path: *const c_char) -> SnnlabStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        save_checkpoint(&net.net, Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// Release a network. Null is ignored.
///
/// # Safety
/// `net` must come from a constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn snnlab_network_free(net: *mut SnnlabNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Number of input pixels, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or come from a constructor.
#[no_mangle]
pub unsafe extern "C" fn snnlab_network_input_size(net: *const SnnlabNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.net.input_size())
}

/// Number of output classes, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or come from a constructor.
#[no_mangle]
pub unsafe extern "C" fn snnlab_network_output_size(net: *const SnnlabNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.net.output_size())
}

/// Poisson-encode `pixels` (values in [0, 1]) for `steps` time-steps and run
/// the network, writing the time-averaged output potentials to `prediction`.
///
/// # Safety
/// `pixels` must hold `pixel_count` values and `prediction` `prediction_len`.
#[no_mangle]
pub unsafe extern "C" fn snnlab_network_predict(
    net: *const SnnlabNetwork,
    pixels: *const f64,
    pixel_count: usize,
    steps: usize,
    seed: u64,
    prediction: *mut f64,
    prediction_len: usize,
) -> SnnlabStatus {
    guard(|| {
        let net = &net.as_ref().ok_or_else(|| null("net"))?.net;
        if pixels.is_null() {
            return Err(null("pixels"));
        }
        if prediction.is_null() {
            return Err(null("prediction"));
        }
        let pixels = std::slice::from_raw_parts(pixels, pixel_count);
        if pixel_count != net.input_size() {
            return Err(Failure(
                SnnlabStatus::InvalidArgument,
                format!("network takes {} pixels, got {pixel_count}", net.input_size()),
            ));
        }
        if prediction_len < net.output_size() {
            return Err(Failure(
                SnnlabStatus::BufferTooSmall,
                format!("prediction needs {} values, got {prediction_len}", net.output_size()),
            ));
        }
        let x = encode_noisy(&normalize(pixels)?, steps, &NoiseSpec::clean(), &mut stream_rng(seed, 0))?;
        let (pred, _) = net.forward(&x)?;
        std::slice::from_raw_parts_mut(prediction, pred.len()).copy_from_slice(&pred);
        Ok(())
    })
}

/// Stationary firing rate of the LIF diffusion model.
///
/// # Safety
/// `params` and `rate` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn snnlab_firing_rate(params: *const SnnlabCoherenceParams, rate: *mut f64) -> SnnlabStatus {
    guard(|| {
        let p = params_of(params.as_ref().ok_or_else(|| null("params"))?)?;
        let rate = out_arg(rate, "rate")?;
        *rate = firing_rate(&p)?;
        Ok(())
    })
}

/// Stimulus-response coherence at each of `count` angular frequencies.
///
/// # Safety
/// `omegas` and `coherence` must each hold `count` values.
#[no_mangle]
pub unsafe extern "C" fn snnlab_coherence(
    params: *const SnnlabCoherenceParams,
    omegas: *const f64,
    count: usize,
    coherence: *mut f64,
) -> SnnlabStatus {
    guard(|| {
        let p = params_of(params.as_ref().ok_or_else(|| null("params"))?)?;
        if count == 0 {
            return Ok(());
        }
        if omegas.is_null() {
            return Err(null("omegas"));
        }
        if coherence.is_null() {
            return Err(null("coherence"));
        }
        let omegas = std::slice::from_raw_parts(omegas, count);
        let out = std::slice::from_raw_parts_mut(coherence, count);
        for (c, &w) in out.iter_mut().zip(omegas) {
            *c = coherence_fn(w, &p)?;
        }
        Ok(())
    })
}
