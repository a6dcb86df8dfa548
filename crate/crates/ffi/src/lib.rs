//! C ABI over `gnclab`.
//!
//! Networks are opaque handles created by [`gnclab_network_new`] and
//! released with [`gnclab_network_free`]. Every fallible call returns a
//! [`GnclabStatus`]; on failure the message is kept per thread and can be
//! copied out with [`gnclab_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gnclab::arch::ArchChoice;
use gnclab::data::DatasetKind;
use gnclab::error::Error;
use gnclab::gnc;
use gnclab::nn::{Evaluator, NetworkSpec, ParameterSet};
use gnclab::prior::{sample_weights, Prior, SeedPlan};
use gnclab::sgd;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnclabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Architecture = 4,
    Shape = 5,
    BufferTooSmall = 6,
    Degenerate = 7,
    Panic = 8,
}

/// A network topology together with one parameter vector.
pub struct GnclabNetwork {
    spec: NetworkSpec,
    params: ParameterSet,
}

/// Fit-probability estimate from a guess-and-check run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnclabFitEstimate {
    pub accepted: usize,
    pub draws: u64,
    pub p_hat: f64,
    pub neg_log2: f64,
    /// In bits; NaN when `upper_bound_only`.
    pub std_err: f64,
    pub censored: bool,
    pub upper_bound_only: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(GnclabStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Shape { .. } | Error::Tensor(_) => GnclabStatus::Shape,
            Error::Architecture(_) => GnclabStatus::Architecture,
            Error::Degenerate(_) => GnclabStatus::Degenerate,
            _ => GnclabStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard<F>(f: F) -> GnclabStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            GnclabStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            GnclabStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(GnclabStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(GnclabStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn read_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn network<'a>(p: *const GnclabNetwork) -> Result<&'a GnclabNetwork, Failure> {
    p.as_ref().ok_or_else(|| null("network"))
}

unsafe fn network_mut<'a>(p: *mut GnclabNetwork) -> Result<&'a mut GnclabNetwork, Failure> {
    p.as_mut().ok_or_else(|| null("network"))
}

fn build_spec(arch: &str, dataset: &str) -> Result<NetworkSpec, Failure> {
    let choice: ArchChoice = arch.parse()?;
    let kind = DatasetKind::parse(dataset)?;
    Ok(choice.build(&kind.input_shape())?)
}

fn check_input(net: &GnclabNetwork, len: usize) -> Result<(), Failure> {
    if len != net.spec.input_len() {
        return Err(Failure(
            GnclabStatus::Shape,
            format!("input has {len} values, network expects {}", net.spec.input_len()),
        ));
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gnclab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL,
/// or 0 when the last call succeeded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn gnclab_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let Some(msg) = slot.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Builds a network from an architecture descriptor such as
/// `"lenet:2/6:2c-3f"`, `"mlp:1:0"` or `"dense:8-8"` and a dataset name
/// (`"mnist"`, `"cifar10"`, `"synthetic"`). Parameters start at zero.
///
/// # Safety
/// `arch` and `dataset` must be NUL-terminated strings; `out` must be
/// writable. Free the result with [`gnclab_network_free`].
#[no_mangle]
pub unsafe extern "C" fn gnclab_network_new(
    arch: *const c_char,
    dataset: *const c_char,
    out: *mut *mut GnclabNetwork,
) -> GnclabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let spec = build_spec(read_str(arch, "arch")?, read_str(dataset, "dataset")?)?;
        let params = ParameterSet::zeros(&spec);
        *out = Box::into_raw(Box::new(GnclabNetwork { spec, params }));
        Ok(())
    })
}

/// # Safety
/// `net` must be null or a handle from [`gnclab_network_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gnclab_network_free(net: *mut GnclabNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Number of weights and biases; 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gnclab_network_param_count(net: *const GnclabNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.spec.count_params())
}

/// Flattened input length; 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gnclab_network_input_len(net: *const GnclabNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.spec.input_len())
}

/// Replaces the parameters with draw `index` of `prior` under `seed`.
/// `prior` is one of `uniform1`, `uniform02`, `kaiming_uniform`,
/// `kaiming_gaussian` or `uniform(<bound>)`, optionally suffixed with
/// `+zero_bias`.
///
/// # Safety
/// `net` must be a live handle and `prior` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gnclab_network_sample(
    net: *mut GnclabNetwork,
    prior: *const c_char,
    seed: u64,
    index: u64,
) -> GnclabStatus {
    guard(|| {
        let net = network_mut(net)?;
        let prior: Prior = read_str(prior, "prior")?.parse()?;
        net.params = sample_weights(&net.spec, &prior, &SeedPlan::new(seed), index);
        Ok(())
    })
}

/// Copies the flattened parameters (layer order, weight then bias) into
/// `out`, which must hold `len >= param_count` values.
///
/// # Safety
/// `net` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gnclab_network_get_params(
    net: *const GnclabNetwork,
    out: *mut f64,
    len: usize,
) -> GnclabStatus {
    guard(|| {
        let net = network(net)?;
        let need = net.spec.count_params();
        if len < need {
            return Err(Failure(GnclabStatus::BufferTooSmall, format!("need {need} values, got {len}")));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let dst = std::slice::from_raw_parts_mut(out, need);
        for (d, s) in dst.iter_mut().zip(net.params.values()) {
            *d = *s;
        }
        Ok(())
    })
}

/// Replaces the parameters from a flat vector of exactly `param_count`
/// values.
///
/// # Safety
/// `net` must be a live handle; `values` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gnclab_network_set_params(
    net: *mut GnclabNetwork,
    values: *const f64,
    len: usize,
) -> GnclabStatus {
    guard(|| {
        let net = network_mut(net)?;
        let values = read_slice(values, len, "values")?;
        net.params = ParameterSet::from_flat(&net.spec, values)?;
        Ok(())
    })
}

/// Writes the two logits at `input` to `logits[0..2]`.
///
/// # Safety
/// `net` must be a live handle, `input` must point to `input_len` doubles
/// and `logits` to two writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gnclab_network_forward(
    net: *const GnclabNetwork,
    input: *const f64,
    input_len: usize,
    logits: *mut f64,
) -> GnclabStatus {
    guard(|| {
        let net = network(net)?;
        check_input(net, input_len)?;
        let x = read_slice(input, input_len, "input")?;
        if logits.is_null() {
            return Err(null("logits"));
        }
        let mut eval = Evaluator::new(&net.spec);
        let out = eval.forward(&net.params, x)?;
        ptr::copy_nonoverlapping(out.as_ptr(), logits, out.len());
        Ok(())
    })
}

/// Logit difference `g = f_0 - f_1` at `input`.
///
/// # Safety
/// As for [`gnclab_network_forward`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gnclab_network_margin(
    net: *const GnclabNetwork,
    input: *const f64,
    input_len: usize,
    out: *mut f64,
) -> GnclabStatus {
    guard(|| {
        let net = network(net)?;
        check_input(net, input_len)?;
        let x = read_slice(input, input_len, "input")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Evaluator::new(&net.spec).margin(&net.params, x)?;
        Ok(())
    })
}

/// Gradient of `g` with respect to the input, written to `grad[0..input_len]`.
/// `margin` may be null; otherwise it receives `g`.
///
/// # Safety
/// `input` and `grad` must each point to `input_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gnclab_network_grad_input(
    net: *const GnclabNetwork,
    input: *const f64,
    input_len: usize,
    grad: *mut f64,
    margin: *mut f64,
) -> GnclabStatus {
    guard(|| {
        let net = network(net)?;
        check_input(net, input_len)?;
        let x = read_slice(input, input_len, "input")?;
        if grad.is_null() {
            return Err(null("grad"));
        }
        let (g, dx) = Evaluator::new(&net.spec).input_gradient(&net.params, x)?;
        ptr::copy_nonoverlapping(dx.as_ptr(), grad, input_len);
        if !margin.is_null() {
            *margin = g;
        }
        Ok(())
    })
}

/// Parameter count of an architecture without allocating a handle.
///
/// # Safety
/// `arch` and `dataset` must be NUL-terminated strings; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gnclab_count_params(
    arch: *const c_char,
    dataset: *const c_char,
    out: *mut usize,
) -> GnclabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = build_spec(read_str(arch, "arch")?, read_str(dataset, "dataset")?)?;
        *out = spec.count_params();
        Ok(())
    })
}

/// `log(1 + exp(-y g))`, stable for large `|g|`.
#[no_mangle]
pub extern "C" fn gnclab_logistic_loss(g: f64, y: f64) -> f64 {
    sgd::logistic_loss(g, y)
}

/// Fit-probability estimate after `accepted` acceptances in `draws` draws.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gnclab_fit_estimate(
    accepted: usize,
    draws: u64,
    censored: bool,
    out: *mut GnclabFitEstimate,
) -> GnclabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if accepted as u64 > draws {
            return Err(Failure(
                GnclabStatus::InvalidArgument,
                format!("{accepted} acceptances exceed {draws} draws"),
            ));
        }
        let e = gnc::fit_estimate(accepted, draws, censored);
        *out = GnclabFitEstimate {
            accepted: e.accepted,
            draws: e.draws,
            p_hat: e.p_hat,
            neg_log2: e.neg_log2,
            std_err: e.std_err,
            censored: e.censored,
            upper_bound_only: e.upper_bound_only,
        };
        Ok(())
    })
}
