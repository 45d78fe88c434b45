//! C ABI for the `mqpc` simulator.
//!
//! Every function returns an [`MqpcStatus`]. On failure a message is stored
//! per thread and can be read with [`mqpc_last_error_message`]. Strings
//! handed out by the library are owned by the caller and must be released
//! with [`mqpc_string_free`]; run handles with [`mqpc_run_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mqpc::channel::detection_probability;
use mqpc::cli::{cmd_demo, Format, EXIT_OK};
use mqpc::config::{parse_attack, AttackParams, RunConfig};
use mqpc::metrics::efficiency_from_transcript;
use mqpc::protocol::{run_protocol, share_keys, ProtocolParams, RunRecord};
use mqpc::rng::SeedStream;
use mqpc::security::attack_experiment;
use mqpc::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MqpcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    /// The run stopped at a failed security check.
    Aborted = 4,
    /// Reference values were not reproduced.
    Mismatch = 5,
    NoClosedForm = 6,
    Internal = 7,
    Panic = 8,
}

/// Opaque handle to one finished protocol run.
pub struct MqpcRun {
    record: RunRecord,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MqpcAttackResult {
    pub trials: u64,
    pub detections: u64,
    pub empirical_rate: f64,
    /// Meaningful only when `has_theoretical_rate` is true.
    pub theoretical_rate: f64,
    pub has_theoretical_rate: bool,
    pub std_error: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn status_for(err: &Error) -> MqpcStatus {
    match err {
        Error::NoClosedForm(_) => MqpcStatus::NoClosedForm,
        Error::IncompleteRun => MqpcStatus::Aborted,
        Error::Io(_) | Error::Json(_) => MqpcStatus::Internal,
        _ => MqpcStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<MqpcStatus, (MqpcStatus, String)>) -> MqpcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err((status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            MqpcStatus::Panic
        }
    }
}

fn lib_err(err: Error) -> (MqpcStatus, String) {
    (status_for(&err), err.to_string())
}

fn null(name: &str) -> (MqpcStatus, String) {
    (MqpcStatus::NullPointer, format!("{name} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, (MqpcStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (MqpcStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), (MqpcStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    let c = CString::new(s).map_err(|_| (MqpcStatus::Internal, "string contains a nul byte".to_string()))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn run_ref<'a>(run: *const MqpcRun) -> Result<&'a MqpcRun, (MqpcStatus, String)> {
    run.as_ref().ok_or_else(|| null("run"))
}

/// Message for the most recent failure on this thread, or null. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mqpc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn mqpc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Runs the protocol from a JSON configuration. An aborted run still yields
/// a handle; query it with [`mqpc_run_is_completed`].
///
/// # Safety
/// `config_json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mqpc_run_new(config_json: *const c_char, out: *mut *mut MqpcRun) -> MqpcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = RunConfig::from_json(read_str(config_json, "config_json")?).map_err(lib_err)?;
        let params = ProtocolParams::new(config.d, config.n, config.decoys, config.seed).map_err(lib_err)?;
        let secrets = share_keys(&params, &config.p).map_err(lib_err)?;
        let record = run_protocol(&params, &secrets, &config.model().map_err(lib_err)?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(MqpcRun { record }));
        Ok(MqpcStatus::Ok)
    })
}

/// # Safety
/// `run` must be null or a handle from [`mqpc_run_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mqpc_run_free(run: *mut MqpcRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mqpc_run_is_completed(run: *const MqpcRun, out: *mut bool) -> MqpcStatus {
    guard(|| {
        let run = run_ref(run)?;
        *out.as_mut().ok_or_else(|| null("out"))? = !run.record.outcome.is_aborted();
        Ok(MqpcStatus::Ok)
    })
}

/// Rendered ordering such as `P4>P1>P2>P3`. Returns `Aborted` for runs that
/// did not complete.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mqpc_run_announcement(run: *const MqpcRun, out: *mut *mut c_char) -> MqpcStatus {
    guard(|| {
        let run = run_ref(run)?;
        let ann = run.record.outcome.announcement().ok_or((MqpcStatus::Aborted, "run was aborted".to_string()))?;
        write_string(out, ann.to_string())?;
        Ok(MqpcStatus::Ok)
    })
}

/// JSON-lines transcript, one event per line plus a summary record.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mqpc_run_transcript_jsonl(run: *const MqpcRun, out: *mut *mut c_char) -> MqpcStatus {
    guard(|| {
        write_string(out, run_ref(run)?.record.transcript.to_jsonl())?;
        Ok(MqpcStatus::Ok)
    })
}

/// Qudit efficiency as an exact fraction.
///
/// # Safety
/// `run` must be a live handle; `numerator` and `denominator` writable.
#[no_mangle]
pub unsafe extern "C" fn mqpc_run_efficiency(
    run: *const MqpcRun,
    numerator: *mut u64,
    denominator: *mut u64,
) -> MqpcStatus {
    guard(|| {
        let report = efficiency_from_transcript(&run_ref(run)?.record.transcript).map_err(lib_err)?;
        *numerator.as_mut().ok_or_else(|| null("numerator"))? = *report.eta.numer();
        *denominator.as_mut().ok_or_else(|| null("denominator"))? = *report.eta.denom();
        Ok(MqpcStatus::Ok)
    })
}

/// Closed-form detection probability for `intercept_resend` or
/// `measure_resend` over `decoys` decoys.
///
/// # Safety
/// `model` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mqpc_detection_probability(
    model: *const c_char,
    d: usize,
    decoys: usize,
    out: *mut f64,
) -> MqpcStatus {
    guard(|| {
        let model = parse_attack(read_str(model, "model")?, d, &AttackParams::default()).map_err(lib_err)?;
        let p = detection_probability(&model, d, decoys).map_err(lib_err)?;
        *out.as_mut().ok_or_else(|| null("out"))? = p;
        Ok(MqpcStatus::Ok)
    })
}

/// Monte Carlo detection experiment.
///
/// # Safety
/// `model` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mqpc_attack_experiment(
    model: *const c_char,
    d: usize,
    decoys: usize,
    trials: u64,
    seed: u64,
    out: *mut MqpcAttackResult,
) -> MqpcStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let model = parse_attack(read_str(model, "model")?, d, &AttackParams::default()).map_err(lib_err)?;
        let r = attack_experiment(&model, d, decoys, trials, &SeedStream::new(seed)).map_err(lib_err)?;
        *out = MqpcAttackResult {
            trials: r.trials,
            detections: r.detections,
            empirical_rate: r.empirical_rate,
            theoretical_rate: r.theoretical_rate.unwrap_or(f64::NAN),
            has_theoretical_rate: r.theoretical_rate.is_some(),
            std_error: r.std_error,
        };
        Ok(MqpcStatus::Ok)
    })
}

/// Runs the pinned four-user example and writes its report. Returns
/// `Mismatch` (with the report still written) if any value differs.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mqpc_demo(out: *mut *mut c_char) -> MqpcStatus {
    guard(|| {
        let report = cmd_demo(2, 0, Format::Text).map_err(lib_err)?;
        write_string(out, report.text)?;
        Ok(if report.code == EXIT_OK { MqpcStatus::Ok } else { MqpcStatus::Mismatch })
    })
}
