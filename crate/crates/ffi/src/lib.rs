//! C ABI for the simulator.
//!
//! Decks and simulations are opaque handles owned by the caller and
//! released with the matching `_free` function. Every fallible call returns
//! a [`StrataStatus`]; on failure the message is kept per thread and read
//! with [`strata_last_error`]. Arrays are copied into caller buffers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use strata::deck::{parse_deck, serialize_deck, validate_deck, DeckModel, Method};
use strata::solver::{RunOptions, Simulation, SolverError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrataStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Validation = 5,
    Solver = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Solution method; `Deck` keeps the deck's SOLVER METHOD.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrataMethod {
    Deck = 0,
    Fim = 1,
    Impec = 2,
    CddmFim = 3,
    AddmFim = 4,
}

/// Run totals; wasted iterations are included in the totals.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StrataStats {
    pub steps: usize,
    pub cuts: usize,
    pub nr_iters: usize,
    pub nr_wasted: usize,
    pub ls_iters: usize,
    pub ls_wasted: usize,
    pub nr_local: usize,
    pub ls_local: usize,
}

/// A parsed deck.
pub struct StrataDeck {
    model: DeckModel,
}

/// A simulation in progress.
pub struct StrataSim {
    sim: Simulation,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: impl AsRef<str>) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.extend_from_slice(msg.as_ref().as_bytes());
    });
}

fn fail(status: StrataStatus, msg: impl AsRef<str>) -> StrataStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> StrataStatus) -> StrataStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(StrataStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, StrataStatus> {
    if p.is_null() {
        return Err(fail(StrataStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(StrataStatus::InvalidUtf8, "argument is not UTF-8"))
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length
/// without the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn strata_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            ptr::copy_nonoverlapping(e.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn strata_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses deck text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn strata_deck_parse(text: *const c_char, out: *mut *mut StrataDeck) -> StrataStatus {
    guard(|| {
        if out.is_null() {
            return fail(StrataStatus::NullPointer, "null output handle");
        }
        *out = ptr::null_mut();
        let text = match str_arg(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_deck(text) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(StrataDeck { model }));
                StrataStatus::Ok
            }
            Err(e) => fail(StrataStatus::Parse, e.to_string()),
        }
    })
}

/// Reads and parses a deck file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn strata_deck_load(path: *const c_char, out: *mut *mut StrataDeck) -> StrataStatus {
    guard(|| {
        if out.is_null() {
            return fail(StrataStatus::NullPointer, "null output handle");
        }
        *out = ptr::null_mut();
        let path = match str_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return fail(StrataStatus::Io, format!("{path}: {e}")),
        };
        match parse_deck(&text) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(StrataDeck { model }));
                StrataStatus::Ok
            }
            Err(e) => fail(StrataStatus::Parse, format!("{path}: {e}")),
        }
    })
}

/// Checks the deck's invariants. On violations returns `Validation`, sets
/// `*count` to their number and the error message to all of them, one per
/// line.
///
/// # Safety
/// `deck` must be a live handle; `count` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn strata_deck_validate(deck: *const StrataDeck, count: *mut usize) -> StrataStatus {
    guard(|| {
        let Some(deck) = deck.as_ref() else {
            return fail(StrataStatus::NullPointer, "null deck");
        };
        let report = validate_deck(&deck.model);
        if !count.is_null() {
            *count = report.violations.len();
        }
        if report.is_clean() {
            return StrataStatus::Ok;
        }
        let text: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        fail(StrataStatus::Validation, text.join("\n"))
    })
}

/// Writes the canonical deck text into `buf` (NUL terminated). `*needed`
/// receives the text length plus one; `BufferTooSmall` when `len` is less.
///
/// # Safety
/// `deck` must be a live handle; `buf` valid for `len` bytes or null;
/// `needed` writable or null.
#[no_mangle]
pub unsafe extern "C" fn strata_deck_serialize(
    deck: *const StrataDeck,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> StrataStatus {
    guard(|| {
        let Some(deck) = deck.as_ref() else {
            return fail(StrataStatus::NullPointer, "null deck");
        };
        let text = serialize_deck(&deck.model);
        if !needed.is_null() {
            *needed = text.len() + 1;
        }
        if buf.is_null() || len < text.len() + 1 {
            return fail(StrataStatus::BufferTooSmall, "buffer too small for deck text");
        }
        ptr::copy_nonoverlapping(text.as_ptr(), buf.cast::<u8>(), text.len());
        *buf.add(text.len()) = 0;
        StrataStatus::Ok
    })
}

/// # Safety
/// `deck` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn strata_deck_free(deck: *mut StrataDeck) {
    if !deck.is_null() {
        drop(Box::from_raw(deck));
    }
}

fn solver_status(e: &SolverError) -> StrataStatus {
    match e {
        SolverError::Grid(_) | SolverError::Config(_) => StrataStatus::Validation,
        _ => StrataStatus::Solver,
    }
}

/// Builds and initializes a simulation from a validated copy of `deck`.
/// `workers == 0` keeps the deck's worker count.
///
/// # Safety
/// `deck` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn strata_sim_new(
    deck: *const StrataDeck,
    workers: usize,
    method: StrataMethod,
    out: *mut *mut StrataSim,
) -> StrataStatus {
    guard(|| {
        if out.is_null() {
            return fail(StrataStatus::NullPointer, "null output handle");
        }
        *out = ptr::null_mut();
        let Some(deck) = deck.as_ref() else {
            return fail(StrataStatus::NullPointer, "null deck");
        };
        let mut model = deck.model.clone();
        if workers > 0 {
            model.solver_cfg.n_workers = workers;
        }
        match method {
            StrataMethod::Deck => {}
            StrataMethod::Fim => model.solver_cfg.method = Method::Fim,
            StrataMethod::Impec => model.solver_cfg.method = Method::Impec,
            StrataMethod::CddmFim => model.solver_cfg.method = Method::CddmFim,
            StrataMethod::AddmFim => model.solver_cfg.method = Method::AddmFim,
        }
        let report = validate_deck(&model);
        if !report.is_clean() {
            let text: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            return fail(StrataStatus::Validation, text.join("\n"));
        }
        match Simulation::new(model, &RunOptions::default()) {
            Ok(sim) => {
                *out = Box::into_raw(Box::new(StrataSim { sim }));
                StrataStatus::Ok
            }
            Err(e) => fail(solver_status(&e), e.to_string()),
        }
    })
}

/// Advances one accepted time step. `*done` becomes true once the schedule
/// is complete (no step is taken then).
///
/// # Safety
/// `sim` must be a live handle; `done` writable or null.
#[no_mangle]
pub unsafe extern "C" fn strata_sim_step(sim: *mut StrataSim, done: *mut bool) -> StrataStatus {
    guard(|| {
        let Some(s) = sim.as_mut() else {
            return fail(StrataStatus::NullPointer, "null simulation");
        };
        match s.sim.step() {
            Ok(r) => {
                if !done.is_null() {
                    *done = r.is_none() || s.sim.finished();
                }
                StrataStatus::Ok
            }
            Err(e) => fail(solver_status(&e), e.to_string()),
        }
    })
}

/// Runs the rest of the schedule.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn strata_sim_run(sim: *mut StrataSim) -> StrataStatus {
    guard(|| {
        let Some(s) = sim.as_mut() else {
            return fail(StrataStatus::NullPointer, "null simulation");
        };
        match s.sim.run() {
            Ok(_) => StrataStatus::Ok,
            Err(e) => fail(solver_status(&e), e.to_string()),
        }
    })
}

/// Current simulation time in days; NaN for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn strata_sim_time(sim: *const StrataSim) -> f64 {
    sim.as_ref().map_or(f64::NAN, |s| s.sim.time)
}

/// Number of active cells; 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn strata_sim_cell_count(sim: *const StrataSim) -> usize {
    sim.as_ref().map_or(0, |s| s.sim.grid.n_active)
}

/// Number of phases; 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn strata_sim_phase_count(sim: *const StrataSim) -> usize {
    sim.as_ref().map_or(0, |s| s.sim.props.np())
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> StrataStatus {
    if buf.is_null() {
        return fail(StrataStatus::NullPointer, "null buffer");
    }
    if len < src.len() {
        return fail(
            StrataStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        );
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    StrataStatus::Ok
}

/// Copies cell pressures (Pa) in active-cell order; `len` must be at least
/// the cell count.
///
/// # Safety
/// `sim` must be a live handle; `buf` valid for `len` values.
#[no_mangle]
pub unsafe extern "C" fn strata_sim_copy_pressure(sim: *const StrataSim, buf: *mut f64, len: usize) -> StrataStatus {
    guard(|| {
        let Some(s) = sim.as_ref() else {
            return fail(StrataStatus::NullPointer, "null simulation");
        };
        copy_out(&s.sim.gather_state().0, buf, len)
    })
}

/// Copies saturations, phase-fastest (`cell * n_phases + phase`), phases
/// in the order WATER, OIL, GAS restricted to those present.
///
/// # Safety
/// `sim` must be a live handle; `buf` valid for `len` values.
#[no_mangle]
pub unsafe extern "C" fn strata_sim_copy_saturation(sim: *const StrataSim, buf: *mut f64, len: usize) -> StrataStatus {
    guard(|| {
        let Some(s) = sim.as_ref() else {
            return fail(StrataStatus::NullPointer, "null simulation");
        };
        copy_out(&s.sim.gather_saturation(), buf, len)
    })
}

/// Pore-volume weighted average pressure (Pa); NaN for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn strata_sim_field_pressure(sim: *const StrataSim) -> f64 {
    sim.as_ref().map_or(f64::NAN, |s| s.sim.field_pressure())
}

/// # Safety
/// `sim` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn strata_sim_stats(sim: *const StrataSim, out: *mut StrataStats) -> StrataStatus {
    guard(|| {
        let (Some(s), false) = (sim.as_ref(), out.is_null()) else {
            return fail(StrataStatus::NullPointer, "null argument");
        };
        let st = &s.sim.stats;
        *out = StrataStats {
            steps: st.steps,
            cuts: st.cuts,
            nr_iters: st.nr,
            nr_wasted: st.wasted_nr,
            ls_iters: st.ls,
            ls_wasted: st.wasted_ls,
            nr_local: st.nr_local,
            ls_local: st.ls_local,
        };
        StrataStatus::Ok
    })
}

/// # Safety
/// `sim` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn strata_sim_free(sim: *mut StrataSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}
