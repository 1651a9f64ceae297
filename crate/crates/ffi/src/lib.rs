//! C ABI over `scatterlab`.
//!
//! Tables are opaque `SlTable` handles created by `sl_table_from_*` and
//! released with `sl_table_free`. Every fallible call returns an `SlStatus`;
//! on failure `sl_last_error` holds a message for the calling thread.
//! Phase points use chart coordinates padded to four slots.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use scatterlab::dynamics::{self, ChordRecord, ReflectionLaw};
use scatterlab::geometry::{config::TableConfig, presets, Vector};
use scatterlab::{ergodic, measure, Error, PhasePoint, Table};

/// Opaque billiard table.
pub struct SlTable {
    inner: Table,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidTable = 3,
    Config = 4,
    Unsupported = 5,
    Trapped = 6,
    DegenerateStart = 7,
    NotOnBoundary = 8,
    GrazingExit = 9,
    DegenerateSet = 10,
    TooManyTrapped = 11,
    BufferTooSmall = 12,
    Io = 13,
    Internal = 14,
    Panic = 15,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SlPhasePoint {
    pub q: [f64; 4],
    pub v: [f64; 4],
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SlChord {
    pub entry: SlPhasePoint,
    pub exit: SlPhasePoint,
    pub length: f64,
    /// Cosine between the exit velocity and the inward normal; negative for
    /// a transversal exit.
    pub exit_cos_in: f64,
    pub entry_piece: u32,
    pub exit_piece: u32,
    /// Lattice translate of the exit piece (flat torus only).
    pub exit_image: [i32; 3],
    /// Nonzero when the chord starts or ends in the grazing band.
    pub degenerate: u8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SlVolumes {
    pub vol_m: f64,
    pub vol_dm: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SlMeanFreePath {
    pub prediction: f64,
    pub mean: f64,
    pub stderr: f64,
    pub count: u64,
    pub relative_gap: f64,
    pub z_score: f64,
    pub excluded_fraction: f64,
    pub vol_m: f64,
    pub vol_dm: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> SlStatus {
    match e {
        Error::Trapped { .. } => SlStatus::Trapped,
        Error::DegenerateStart { .. } => SlStatus::DegenerateStart,
        Error::NotOnBoundary { .. } => SlStatus::NotOnBoundary,
        Error::GrazingExit(_) => SlStatus::GrazingExit,
        Error::DegenerateSet => SlStatus::DegenerateSet,
        Error::TooManyTrapped { .. } => SlStatus::TooManyTrapped,
        Error::InvalidTable(_) => SlStatus::InvalidTable,
        Error::Config(_) | Error::Json(_) => SlStatus::Config,
        Error::Unsupported(_) => SlStatus::Unsupported,
        Error::Io(_) => SlStatus::Io,
        Error::BodyTooSmall(_) | Error::EmptySequence | Error::AmbiguousGeodesic => SlStatus::Internal,
    }
}

fn fail(status: SlStatus, msg: impl Into<String>) -> SlStatus {
    set_error(msg);
    status
}

fn fail_with(e: &Error) -> SlStatus {
    fail(status_of(e), format!("{}: {e}", e.kind()))
}

/// Runs `f` with panics converted to `SlStatus::Panic`.
fn guard(f: impl FnOnce() -> SlStatus) -> SlStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SlStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn table_ref<'a>(t: *const SlTable) -> Option<&'a Table> {
    t.as_ref().map(|t| &t.inner)
}

unsafe fn str_arg<'a>(s: *const c_char) -> Result<&'a str, SlStatus> {
    if s.is_null() {
        return Err(fail(SlStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(SlStatus::InvalidArgument, "string is not UTF-8"))
}

fn to_c(z: &PhasePoint) -> SlPhasePoint {
    let mut p = SlPhasePoint::default();
    for i in 0..4 {
        p.q[i] = z.q[i];
        p.v[i] = z.v[i];
    }
    p
}

fn from_c(p: &SlPhasePoint) -> Result<PhasePoint, SlStatus> {
    if p.q.iter().chain(p.v.iter()).any(|x| !x.is_finite()) {
        return Err(fail(SlStatus::InvalidArgument, "phase point has non-finite coordinates"));
    }
    Ok(PhasePoint::new(Vector::from(p.q), Vector::from(p.v)))
}

fn chord_to_c(c: &ChordRecord) -> SlChord {
    SlChord {
        entry: to_c(&c.entry),
        exit: to_c(&c.exit),
        length: c.length,
        exit_cos_in: c.exit_cos_in,
        entry_piece: c.entry_piece as u32,
        exit_piece: c.exit_piece as u32,
        exit_image: c.exit_image,
        degenerate: c.degenerate as u8,
    }
}

fn install(table: Table, out: *mut *mut SlTable) -> SlStatus {
    unsafe { *out = Box::into_raw(Box::new(SlTable { inner: table })) };
    SlStatus::Ok
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next `sl_*` call on the same thread.
#[no_mangle]
pub extern "C" fn sl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Builds a named preset table, e.g. `"disk"` or `"torus-two-balls"`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_table_from_preset(name: *const c_char, out: *mut *mut SlTable) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlStatus::NullPointer, "null output handle");
        }
        *out = ptr::null_mut();
        let name = match str_arg(name) {
            Ok(s) => s,
            Err(s) => return s,
        };
        match presets::by_name(name) {
            Ok(t) => install(t, out),
            Err(e) => fail_with(&e),
        }
    })
}

/// Builds a table from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_table_from_toml(toml: *const c_char, out: *mut *mut SlTable) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlStatus::NullPointer, "null output handle");
        }
        *out = ptr::null_mut();
        let text = match str_arg(toml) {
            Ok(s) => s,
            Err(s) => return s,
        };
        match TableConfig::from_toml(text).and_then(|c| c.build()) {
            Ok(t) => install(t, out),
            Err(e) => fail_with(&e),
        }
    })
}

/// Builds a table from a TOML file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_table_from_file(path: *const c_char, out: *mut *mut SlTable) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlStatus::NullPointer, "null output handle");
        }
        *out = ptr::null_mut();
        let path = match str_arg(path) {
            Ok(s) => s,
            Err(s) => return s,
        };
        match scatterlab::geometry::config::load_table(Path::new(path)) {
            Ok(t) => install(t, out),
            Err(e) => fail_with(&e),
        }
    })
}

/// Releases a table. NULL is ignored.
///
/// # Safety
/// `table` must come from `sl_table_from_*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sl_table_free(table: *mut SlTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Intrinsic dimension n of the table, or 0 for NULL.
///
/// # Safety
/// `table` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_table_dim(table: *const SlTable) -> u32 {
    table_ref(table).map_or(0, |t| t.dim() as u32)
}

/// Number of meaningful chart coordinates in `SlPhasePoint::q`.
///
/// # Safety
/// `table` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_table_chart_len(table: *const SlTable) -> u32 {
    table_ref(table).map_or(0, |t| t.space().chart_len() as u32)
}

/// Domain volume and boundary volume.
///
/// # Safety
/// `table` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_domain_volumes(table: *const SlTable, out: *mut SlVolumes) -> SlStatus {
    guard(|| {
        let (Some(t), false) = (table_ref(table), out.is_null()) else {
            return fail(SlStatus::NullPointer, "null argument");
        };
        match measure::domain_volumes(t) {
            Ok(v) => {
                *out = SlVolumes { vol_m: v.vol_m, vol_dm: v.vol_dm };
                SlStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Total cosine-measure mass of the inward boundary bundle.
///
/// # Safety
/// `table` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_trajectory_space_volume(table: *const SlTable, out: *mut f64) -> SlStatus {
    guard(|| {
        let (Some(t), false) = (table_ref(table), out.is_null()) else {
            return fail(SlStatus::NullPointer, "null argument");
        };
        match measure::trajectory_space_volume(t) {
            Ok(v) => {
                *out = v;
                SlStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Monte Carlo mean chord length against the volume prediction.
/// Deterministic in `seed` for any worker count.
///
/// # Safety
/// `table` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_mean_free_path(
    table: *const SlTable,
    samples: u64,
    seed: u64,
    out: *mut SlMeanFreePath,
) -> SlStatus {
    guard(|| {
        let (Some(t), false) = (table_ref(table), out.is_null()) else {
            return fail(SlStatus::NullPointer, "null argument");
        };
        if samples == 0 {
            return fail(SlStatus::InvalidArgument, "samples must be positive");
        }
        match ergodic::mean_free_path(t, samples as usize, seed) {
            Ok(m) => {
                *out = SlMeanFreePath {
                    prediction: m.prediction,
                    mean: m.space.mean,
                    stderr: m.space.stderr,
                    count: m.space.count,
                    relative_gap: m.relative_gap,
                    z_score: m.z_score,
                    excluded_fraction: m.excluded_fraction,
                    vol_m: m.vol_m,
                    vol_dm: m.vol_dm,
                };
                SlStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Follows an inward boundary phase point to the next boundary hit.
/// On `GrazingExit` the chord is still written.
///
/// # Safety
/// `table` must be a live handle; `z` readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sl_causality_map(
    table: *const SlTable,
    z: *const SlPhasePoint,
    out: *mut SlChord,
) -> SlStatus {
    guard(|| {
        let (Some(t), Some(z), false) = (table_ref(table), z.as_ref(), out.is_null()) else {
            return fail(SlStatus::NullPointer, "null argument");
        };
        let z = match from_c(z) {
            Ok(z) => z,
            Err(s) => return s,
        };
        match dynamics::causality_map(t, &z) {
            Ok(c) => {
                *out = chord_to_c(&c);
                SlStatus::Ok
            }
            Err(Error::GrazingExit(c)) => {
                *out = chord_to_c(&c);
                fail(SlStatus::GrazingExit, "grazing_exit: chord leaves through the grazing band")
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// One elastic bounce: chord to the next hit, then reflection.
/// `chord` may be NULL.
///
/// # Safety
/// `table` must be a live handle; `z` readable; `next` writable; `chord`
/// NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn sl_billiard_map(
    table: *const SlTable,
    z: *const SlPhasePoint,
    next: *mut SlPhasePoint,
    chord: *mut SlChord,
) -> SlStatus {
    guard(|| {
        let (Some(t), Some(z), false) = (table_ref(table), z.as_ref(), next.is_null()) else {
            return fail(SlStatus::NullPointer, "null argument");
        };
        let z = match from_c(z) {
            Ok(z) => z,
            Err(s) => return s,
        };
        match dynamics::billiard_map(t, &ReflectionLaw::Elastic, &z) {
            Ok((w, c)) => {
                *next = to_c(&w);
                if !chord.is_null() {
                    *chord = chord_to_c(&c);
                }
                SlStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Draws `count` inward boundary phase points from the normalised cosine
/// measure into `out`. `total_mass` (may be NULL) receives the measure's
/// total mass.
///
/// # Safety
/// `table` must be a live handle; `out` must hold `capacity` elements.
#[no_mangle]
pub unsafe extern "C" fn sl_sample(
    table: *const SlTable,
    count: usize,
    seed: u64,
    out: *mut SlPhasePoint,
    capacity: usize,
    total_mass: *mut f64,
) -> SlStatus {
    guard(|| {
        let Some(t) = table_ref(table) else {
            return fail(SlStatus::NullPointer, "null table");
        };
        if count == 0 {
            return fail(SlStatus::InvalidArgument, "count must be positive");
        }
        if out.is_null() {
            return fail(SlStatus::NullPointer, "null output buffer");
        }
        if capacity < count {
            return fail(SlStatus::BufferTooSmall, format!("buffer holds {capacity}, need {count}"));
        }
        match measure::sample_mu_theta(t, count, seed) {
            Ok(set) => {
                let dst = std::slice::from_raw_parts_mut(out, count);
                for (d, z) in dst.iter_mut().zip(&set.points) {
                    *d = to_c(z);
                }
                if !total_mass.is_null() {
                    *total_mass = set.total_mass;
                }
                SlStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_status() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, SlStatus::Panic);
        let msg = unsafe { CStr::from_ptr(sl_last_error()) }.to_str().unwrap().to_owned();
        assert_eq!(msg, "panic: boom");
        assert_eq!(guard(|| SlStatus::Ok), SlStatus::Ok);
        assert!(sl_last_error().is_null());
    }

    #[test]
    fn error_mapping() {
        assert_eq!(status_of(&Error::Trapped { l_max: 1.0 }), SlStatus::Trapped);
        assert_eq!(status_of(&Error::Config("x".into())), SlStatus::Config);
        assert_eq!(status_of(&Error::DegenerateSet), SlStatus::DegenerateSet);
    }

    #[test]
    fn interior_nul_is_replaced() {
        set_error("a\0b");
        let msg = unsafe { CStr::from_ptr(sl_last_error()) }.to_str().unwrap().to_owned();
        assert_eq!(msg, "a b");
    }

    #[test]
    fn phase_point_round_trip() {
        let z = PhasePoint::new(Vector::new(0.1, 0.2, 0.3, 0.4), Vector::new(1.0, 0.0, 0.0, 0.0));
        assert_eq!(from_c(&to_c(&z)).unwrap(), z);
    }
}
