//! C ABI over `specshare`.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `ss_*_new`/`ss_*_parse` function and released by the matching `ss_*_free`.
//! Fallible calls return an [`SsStatus`] and write results through out
//! pointers; on failure `ss_last_error_message` describes what went wrong on
//! the calling thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use specshare::io::parse_scenario;
use specshare::sim::{replicate, Scenario};
use specshare::traffic::LevelDistribution;
use specshare::verifier::{verify_scenario, DeviationFinding};
use specshare::{max_entrants, Error, UtilityFamily, UtilityModel};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Domain = 3,
    Contract = 4,
    Infeasible = 5,
    CapExceeded = 6,
    NoEquilibrium = 7,
    Hypothesis = 8,
    Config = 9,
    Parse = 10,
    Io = 11,
    OutOfRange = 12,
    Panic = 13,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsFamily {
    Linear = 0,
    /// `a = 24, s = 0.5, e = 0.9`.
    CobbDouglas = 1,
}

pub struct SsModel(UtilityModel);

pub struct SsScenario(Scenario);

pub struct SsReport {
    mean: Vec<f64>,
    std_err: Vec<f64>,
}

pub struct SsFindings {
    items: Vec<DeviationFinding>,
    states: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SsStatus {
    match e {
        Error::Domain(_) => SsStatus::Domain,
        Error::Contract(_) => SsStatus::Contract,
        Error::Infeasible(_) => SsStatus::Infeasible,
        Error::CapExceeded { .. } => SsStatus::CapExceeded,
        Error::NoEquilibrium(_) => SsStatus::NoEquilibrium,
        Error::Hypothesis(_) => SsStatus::Hypothesis,
        Error::Config(_) => SsStatus::Config,
        Error::Parse { .. } => SsStatus::Parse,
        Error::Io(_) => SsStatus::Io,
    }
}

/// Runs `f`, turning errors and panics into a status plus the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), SsStatus>) -> SsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SsStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside specshare".into());
            SsStatus::Panic
        }
    }
}

fn fail(e: Error) -> SsStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

unsafe fn borrow<'a, T>(p: *const T) -> Result<&'a T, SsStatus> {
    if p.is_null() {
        set_error("null handle".into());
        return Err(SsStatus::NullPointer);
    }
    Ok(&*p)
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, SsStatus> {
    if p.is_null() {
        set_error("null out pointer".into());
        return Err(SsStatus::NullPointer);
    }
    Ok(&mut *p)
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, SsStatus> {
    if p.is_null() {
        set_error("null string".into());
        return Err(SsStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string is not UTF-8".into());
        SsStatus::InvalidUtf8
    })
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next `ss_*` call on the same thread.
#[no_mangle]
pub extern "C" fn ss_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Shannon-rate model on `w_mhz` MHz with normalized PSD cap `power`;
/// `family` is an `SsFamily` value.
#[no_mangle]
pub unsafe extern "C" fn ss_model_new(w_mhz: f64, power: f64, family: u32, model: *mut *mut SsModel) -> SsStatus {
    guard(|| {
        let slot = out(model)?;
        let family = match family {
            f if f == SsFamily::Linear as u32 => UtilityFamily::Linear,
            f if f == SsFamily::CobbDouglas as u32 => UtilityFamily::cobb_douglas(),
            f => {
                set_error(format!("unknown utility family {f}"));
                return Err(SsStatus::Domain);
            }
        };
        let m = UtilityModel::shannon(w_mhz, power, family).map_err(fail)?;
        *slot = Box::into_raw(Box::new(SsModel(m)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ss_model_free(model: *mut SsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// `π(x, λ)`.
#[no_mangle]
pub unsafe extern "C" fn ss_model_pi(model: *const SsModel, x_mhz: f64, lambda: f64, value: *mut f64) -> SsStatus {
    guard(|| {
        let m = borrow(model)?;
        *out(value)? = m.0.pi(x_mhz, lambda);
        Ok(())
    })
}

/// Per-operator utility when `n` operators all use the whole band.
#[no_mangle]
pub unsafe extern "C" fn ss_model_full_spectrum_utility(
    model: *const SsModel,
    n: usize,
    lambda: f64,
    value: *mut f64,
) -> SsStatus {
    guard(|| {
        let m = borrow(model)?;
        *out(value)? = m.0.full_spectrum_utility(n, lambda).map_err(fail)?;
        Ok(())
    })
}

/// Equilibrium market size for investment cost `cost` and two-level traffic.
#[no_mangle]
pub unsafe extern "C" fn ss_max_entrants(
    model: *const SsModel,
    cost: f64,
    p_high: f64,
    n_star: *mut usize,
) -> SsStatus {
    guard(|| {
        let m = borrow(model)?;
        let dist = LevelDistribution::two_level(p_high).map_err(fail)?;
        *out(n_star)? = max_entrants(cost, &m.0, &dist, specshare::entry::DEFAULT_ENTRY_CAP).map_err(fail)?;
        Ok(())
    })
}

/// Parses scenario-file text.
#[no_mangle]
pub unsafe extern "C" fn ss_scenario_parse(source: *const c_char, scenario: *mut *mut SsScenario) -> SsStatus {
    guard(|| {
        let slot = out(scenario)?;
        let s = parse_scenario(text(source)?).map_err(fail)?;
        *slot = Box::into_raw(Box::new(SsScenario(s)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ss_scenario_free(scenario: *mut SsScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

#[no_mangle]
pub unsafe extern "C" fn ss_scenario_operators(scenario: *const SsScenario, n: *mut usize) -> SsStatus {
    guard(|| {
        *out(n)? = borrow(scenario)?.0.n();
        Ok(())
    })
}

/// Runs all replications of the scenario without deviations.
#[no_mangle]
pub unsafe extern "C" fn ss_simulate(scenario: *const SsScenario, report: *mut *mut SsReport) -> SsStatus {
    guard(|| {
        let s = borrow(scenario)?;
        let slot = out(report)?;
        let summary = replicate(&s.0, &[]).map_err(fail)?;
        *slot = Box::into_raw(Box::new(SsReport {
            mean: summary.mean,
            std_err: summary.std_err,
        }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ss_report_free(report: *mut SsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Mean normalized revenue and its standard error for operator `index` (0-based).
#[no_mangle]
pub unsafe extern "C" fn ss_report_revenue(
    report: *const SsReport,
    index: usize,
    mean: *mut f64,
    std_err: *mut f64,
) -> SsStatus {
    guard(|| {
        let r = borrow(report)?;
        if index >= r.mean.len() {
            set_error(format!("operator {index} out of range ({} operators)", r.mean.len()));
            return Err(SsStatus::OutOfRange);
        }
        *out(mean)? = r.mean[index];
        *out(std_err)? = r.std_err[index];
        Ok(())
    })
}

/// Every one-shot deviation finding for the scenario's scheme.
#[no_mangle]
pub unsafe extern "C" fn ss_verify(scenario: *const SsScenario, findings: *mut *mut SsFindings) -> SsStatus {
    guard(|| {
        let s = borrow(scenario)?;
        let slot = out(findings)?;
        let items = verify_scenario(&s.0).map_err(fail)?;
        let states = items
            .iter()
            .map(|f| CString::new(f.state.clone()).expect("state labels have no nul bytes"))
            .collect();
        *slot = Box::into_raw(Box::new(SsFindings { items, states }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ss_findings_free(findings: *mut SsFindings) {
    if !findings.is_null() {
        drop(Box::from_raw(findings));
    }
}

#[no_mangle]
pub unsafe extern "C" fn ss_findings_len(findings: *const SsFindings, len: *mut usize) -> SsStatus {
    guard(|| {
        *out(len)? = borrow(findings)?.items.len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ss_findings_profitable(findings: *const SsFindings, count: *mut usize) -> SsStatus {
    guard(|| {
        *out(count)? = borrow(findings)?.items.iter().filter(|f| f.profitable).count();
        Ok(())
    })
}

/// Finding `index`: its state label (owned by the handle), gain, loss and
/// verdict. Any out pointer may be NULL to skip that field.
#[no_mangle]
pub unsafe extern "C" fn ss_findings_get(
    findings: *const SsFindings,
    index: usize,
    state: *mut *const c_char,
    gain: *mut f64,
    loss: *mut f64,
    profitable: *mut bool,
) -> SsStatus {
    guard(|| {
        let f = borrow(findings)?;
        let Some(item) = f.items.get(index) else {
            set_error(format!("finding {index} out of range ({} findings)", f.items.len()));
            return Err(SsStatus::OutOfRange);
        };
        if !state.is_null() {
            *state = f.states[index].as_ptr();
        }
        if !gain.is_null() {
            *gain = item.gain;
        }
        if !loss.is_null() {
            *loss = item.loss;
        }
        if !profitable.is_null() {
            *profitable = item.profitable;
        }
        Ok(())
    })
}
