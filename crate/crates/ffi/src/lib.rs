//! C ABI for the pcplab core: opaque handles, integer status codes,
//! and caller-freed strings. Every function is safe to call from any
//! thread; the last error message is thread-local.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use pcplab::csp::CspInstance;
use pcplab::dinur::{parse_dimacs, run_manifest, run_pipeline, PipelineConfig};
use pcplab::error::Error;
use pcplab::exactmath::{rat_to_string, Rat};
use pcplab::specgraph::{find_base_expander, lambda_auto, RotationGraph};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcplabStatus {
    Ok = 0,
    Domain = 1,
    Parameter = 2,
    Shape = 3,
    Index = 4,
    Precondition = 5,
    Resource = 6,
    NotFound = 7,
    Construction = 8,
    Parse = 9,
    Io = 10,
    NullArgument = 11,
    InvalidUtf8 = 12,
}

/// Opaque CSP instance handle.
pub struct PcplabCsp(CspInstance);

/// Opaque rotation-graph handle.
pub struct PcplabGraph(RotationGraph);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PcplabStatus {
    match e {
        Error::Domain(_) => PcplabStatus::Domain,
        Error::Parameter(_) => PcplabStatus::Parameter,
        Error::Shape(_) => PcplabStatus::Shape,
        Error::Index(_) => PcplabStatus::Index,
        Error::Precondition(_) => PcplabStatus::Precondition,
        Error::Resource(_) => PcplabStatus::Resource,
        Error::NotFound(_) => PcplabStatus::NotFound,
        Error::Construction(_) => PcplabStatus::Construction,
        Error::Parse(_) => PcplabStatus::Parse,
        Error::Io(_) => PcplabStatus::Io,
    }
}

fn fail(e: Error) -> PcplabStatus {
    set_error(&e.to_string());
    status_of(&e)
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, PcplabStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(PcplabStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        PcplabStatus::InvalidUtf8
    })
}

fn give_string(s: String, out: *mut *mut c_char) -> PcplabStatus {
    if out.is_null() {
        set_error("null output pointer");
        return PcplabStatus::NullArgument;
    }
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            PcplabStatus::Ok
        }
        Err(_) => {
            set_error("output contains an interior NUL");
            PcplabStatus::Parse
        }
    }
}

/// Message for the most recent error on this thread. Borrowed; valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pcplab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Frees a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn pcplab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a CSP from its text format into a new handle.
#[no_mangle]
pub unsafe extern "C" fn pcplab_csp_from_text(
    text: *const c_char,
    out: *mut *mut PcplabCsp,
) -> PcplabStatus {
    let text = match read_str(text) {
        Ok(t) => t,
        Err(s) => return s,
    };
    if out.is_null() {
        set_error("null output pointer");
        return PcplabStatus::NullArgument;
    }
    match CspInstance::from_text(text) {
        Ok(csp) => {
            *out = Box::into_raw(Box::new(PcplabCsp(csp)));
            PcplabStatus::Ok
        }
        Err(e) => fail(e),
    }
}

#[no_mangle]
pub unsafe extern "C" fn pcplab_csp_free(csp: *mut PcplabCsp) {
    if !csp.is_null() {
        drop(Box::from_raw(csp));
    }
}

#[no_mangle]
pub unsafe extern "C" fn pcplab_csp_n(csp: *const PcplabCsp) -> u64 {
    csp.as_ref().map_or(0, |c| c.0.n as u64)
}

#[no_mangle]
pub unsafe extern "C" fn pcplab_csp_m(csp: *const PcplabCsp) -> u64 {
    csp.as_ref().map_or(0, |c| c.0.m() as u64)
}

#[no_mangle]
pub unsafe extern "C" fn pcplab_csp_alphabet(csp: *const PcplabCsp) -> u64 {
    csp.as_ref().map_or(0, |c| c.0.w as u64)
}

/// Exact value as a "num/den" string (caller frees); Resource when the
/// enumeration exceeds the budget.
#[no_mangle]
pub unsafe extern "C" fn pcplab_csp_val_exact(
    csp: *const PcplabCsp,
    budget: u64,
    out: *mut *mut c_char,
) -> PcplabStatus {
    let csp = match csp.as_ref() {
        Some(c) => c,
        None => {
            set_error("null csp handle");
            return PcplabStatus::NullArgument;
        }
    };
    match csp.0.val_exact(budget) {
        Ok(v) => give_string(rat_to_string(&v), out),
        Err(e) => fail(e),
    }
}

/// Serializes a CSP handle back to text (caller frees).
#[no_mangle]
pub unsafe extern "C" fn pcplab_csp_to_text(
    csp: *const PcplabCsp,
    out: *mut *mut c_char,
) -> PcplabStatus {
    match csp.as_ref() {
        Some(c) => give_string(c.0.to_text(), out),
        None => {
            set_error("null csp handle");
            PcplabStatus::NullArgument
        }
    }
}

/// Searches for an n-vertex d-regular expander with certified
/// λ ≤ lambda_num/lambda_den.
#[no_mangle]
pub unsafe extern "C" fn pcplab_expander_build(
    n: u64,
    d: u64,
    lambda_num: i64,
    lambda_den: i64,
    seed: u64,
    budget: u64,
    out: *mut *mut PcplabGraph,
) -> PcplabStatus {
    if out.is_null() {
        set_error("null output pointer");
        return PcplabStatus::NullArgument;
    }
    if lambda_den <= 0 || lambda_num < 0 {
        set_error("lambda must be a nonnegative rational with positive denominator");
        return PcplabStatus::Parameter;
    }
    let target = Rat::new(lambda_num.into(), lambda_den.into());
    match find_base_expander(n as usize, d as usize, &target, seed, budget as usize) {
        Ok(g) => {
            *out = Box::into_raw(Box::new(PcplabGraph(g)));
            PcplabStatus::Ok
        }
        Err(e) => fail(e),
    }
}

#[no_mangle]
pub unsafe extern "C" fn pcplab_graph_free(g: *mut PcplabGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

#[no_mangle]
pub unsafe extern "C" fn pcplab_graph_n(g: *const PcplabGraph) -> u64 {
    g.as_ref().map_or(0, |g| g.0.n() as u64)
}

#[no_mangle]
pub unsafe extern "C" fn pcplab_graph_degree(g: *const PcplabGraph) -> u64 {
    g.as_ref().map_or(0, |g| g.0.d() as u64)
}

/// Certified spectral bound as a "num/den" string (caller frees).
#[no_mangle]
pub unsafe extern "C" fn pcplab_graph_lambda_upper(
    g: *const PcplabGraph,
    out: *mut *mut c_char,
) -> PcplabStatus {
    let g = match g.as_ref() {
        Some(g) => g,
        None => {
            set_error("null graph handle");
            return PcplabStatus::NullArgument;
        }
    };
    match lambda_auto(&g.0) {
        Ok(est) => give_string(rat_to_string(&est.lambda_upper), out),
        Err(e) => fail(e),
    }
}

#[no_mangle]
pub unsafe extern "C" fn pcplab_graph_to_text(
    g: *const PcplabGraph,
    out: *mut *mut c_char,
) -> PcplabStatus {
    match g.as_ref() {
        Some(g) => give_string(g.0.to_text(), out),
        None => {
            set_error("null graph handle");
            PcplabStatus::NullArgument
        }
    }
}

#[no_mangle]
pub unsafe extern "C" fn pcplab_graph_from_text(
    text: *const c_char,
    out: *mut *mut PcplabGraph,
) -> PcplabStatus {
    let text = match read_str(text) {
        Ok(t) => t,
        Err(s) => return s,
    };
    if out.is_null() {
        set_error("null output pointer");
        return PcplabStatus::NullArgument;
    }
    match RotationGraph::from_text(text) {
        Ok(g) => {
            *out = Box::into_raw(Box::new(PcplabGraph(g)));
            PcplabStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Runs the amplification pipeline on a DIMACS CNF string with the
/// default configuration at this seed; returns the JSON run manifest
/// (caller frees).
#[no_mangle]
pub unsafe extern "C" fn pcplab_pipeline_run(
    dimacs: *const c_char,
    rounds: u64,
    seed: u64,
    out: *mut *mut c_char,
) -> PcplabStatus {
    let text = match read_str(dimacs) {
        Ok(t) => t,
        Err(s) => return s,
    };
    let cfg = PipelineConfig::desk_default(seed);
    let run = parse_dimacs(text).and_then(|cnf| run_pipeline(&cnf, rounds as usize, &cfg));
    match run {
        Ok(run) => {
            let manifest = run_manifest(&run, &cfg);
            give_string(serde_json::to_string(&manifest).unwrap_or_default(), out)
        }
        Err(e) => fail(e),
    }
}
