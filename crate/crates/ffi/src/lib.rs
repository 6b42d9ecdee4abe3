//! C ABI for the sonotherm simulator.
//!
//! Conventions:
//! * objects are opaque handles created/destroyed by paired
//!   `st_*_new`/`st_*_free` calls; never free them any other way,
//! * every fallible call returns an [`StStatus`]; on failure a
//!   thread-local message is readable via [`st_last_error_message`] until
//!   the next failing call on the same thread,
//! * strings are NUL-terminated UTF-8,
//! * panics are caught at the boundary and reported as
//!   `ST_STATUS_PANIC_CAUGHT`.
//!
//! The generated header lives at `include/sonotherm.h`.

// validations use `!(x > 0.0)` so NaN is rejected together with the
// out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use sonotherm::acoustics::{focus_phases, intensity_at, pressure_at, DriveVector};
use sonotherm::analysis::{export_run, time_to_threshold, PerceptionModel};
use sonotherm::config::{Scenario, DEFAULT_SQUARE_DUTY, DEFAULT_SQUARE_FREQ_HZ};
use sonotherm::modulation::Envelope;
use sonotherm::thermal::{calibrate_eta, simulate, SimulationRun};
use sonotherm::Error;

/// Status code returned by every fallible API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Configuration file or parameter validation failed.
    ConfigError = 3,
    /// Solver or I/O failure at run time.
    RuntimeError = 4,
    /// An index was outside the valid range.
    IndexOutOfRange = 5,
    /// A panic was caught at the FFI boundary.
    PanicCaught = 6,
}

/// Drive envelope selector for [`st_simulate`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StEnvelope {
    /// Carrier at full amplitude for the whole run.
    Static = 0,
    /// Square-wave on/off modulation; frequency and duty come from the
    /// scene config (50 Hz / 0.9 when the config envelope is static).
    Square = 1,
}

/// Scene geometry/medium/skin summary filled by [`st_scene_info`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct StSceneInfo {
    pub units: usize,
    pub enabled_units: usize,
    pub transducers: usize,
    pub enabled_transducers: usize,
    pub wavelength_m: f64,
    pub wavenumber_rad_m: f64,
    pub focus_m: [f64; 3],
    pub absorbed_fraction: f64,
}

/// Opaque loaded scene (assembly, medium, skin, grid, solver settings).
pub struct StScene {
    scenario: Scenario,
}

/// Opaque simulation result (ΔT time series plus snapshot maps).
pub struct StRun {
    run: SimulationRun,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> StStatus {
    match err {
        Error::Config { .. } => StStatus::ConfigError,
        _ => StStatus::RuntimeError,
    }
}

fn fail(err: &Error) -> StStatus {
    set_last_error(&err.to_string());
    status_of(err)
}

/// Catch panics and turn them into a status; never unwind across the ABI.
fn guarded(f: impl FnOnce() -> StStatus) -> StStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_last_error("panic caught at FFI boundary");
            StStatus::PanicCaught
        }
    }
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, StStatus> {
    if ptr.is_null() {
        set_last_error("NULL string argument");
        return Err(StStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error("string argument is not valid UTF-8");
        StStatus::InvalidUtf8
    })
}

macro_rules! not_null {
    ($ptr:expr) => {
        match unsafe { $ptr.as_ref() } {
            Some(r) => r,
            None => {
                set_last_error(concat!("NULL argument: ", stringify!($ptr)));
                return StStatus::NullArgument;
            }
        }
    };
}

macro_rules! not_null_mut {
    ($ptr:expr) => {
        match unsafe { $ptr.as_mut() } {
            Some(r) => r,
            None => {
                set_last_error(concat!("NULL argument: ", stringify!($ptr)));
                return StStatus::NullArgument;
            }
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn st_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent failure on this thread. Valid until the next
/// failing call on the same thread; never NULL.
#[no_mangle]
pub extern "C" fn st_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Load a scene from a JSON config file. On success `*out` owns the scene;
/// release it with [`st_scene_free`].
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be valid for a
/// single pointer write.
#[no_mangle]
pub unsafe extern "C" fn st_scene_load(path: *const c_char, out: *mut *mut StScene) -> StStatus {
    guarded(|| {
        let out = not_null_mut!(out);
        let path = match cstr_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match Scenario::load(path) {
            Ok(scenario) => {
                *out = Box::into_raw(Box::new(StScene { scenario }));
                StStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Release a scene created by [`st_scene_load`]. NULL is a no-op.
///
/// # Safety
/// `scene` must be a pointer previously returned by [`st_scene_load`] and
/// not freed since.
#[no_mangle]
pub unsafe extern "C" fn st_scene_free(scene: *mut StScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Fill `info` with scene counts and derived constants.
///
/// # Safety
/// `scene` must be a live scene handle; `info` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn st_scene_info(scene: *const StScene, info: *mut StSceneInfo) -> StStatus {
    guarded(|| {
        let scene = not_null!(scene);
        let info = not_null_mut!(info);
        let s = &scene.scenario;
        *info = StSceneInfo {
            units: s.assembly.num_units(),
            enabled_units: s.assembly.enabled_indices().len(),
            transducers: s.assembly.total_transducer_count(),
            enabled_transducers: s.assembly.enabled_transducer_count(),
            wavelength_m: s.medium.wavelength(),
            wavenumber_rad_m: s.medium.wavenumber(),
            focus_m: [s.focus.x, s.focus.y, s.focus.z],
            absorbed_fraction: s.skin.absorbed_fraction,
        };
        StStatus::Ok
    })
}

/// Set the absorbed fraction η used by subsequent simulations.
///
/// # Safety
/// `scene` must be a live scene handle.
#[no_mangle]
pub unsafe extern "C" fn st_scene_set_absorbed_fraction(
    scene: *mut StScene,
    eta: f64,
) -> StStatus {
    guarded(|| {
        let scene = not_null_mut!(scene);
        if !eta.is_finite() || eta < 0.0 {
            set_last_error("absorbed fraction must be finite and >= 0");
            return StStatus::ConfigError;
        }
        scene.scenario.skin.absorbed_fraction = eta;
        StStatus::Ok
    })
}

fn focus_drive(scene: &StScene) -> Result<DriveVector, Error> {
    let s = &scene.scenario;
    focus_phases(&s.assembly, &s.medium, &s.focus)
}

/// Complex pressure (Pa) of the focused field at a point.
///
/// # Safety
/// `scene` must be a live scene handle; `re`/`im` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn st_pressure_at(
    scene: *const StScene,
    x: f64,
    y: f64,
    z: f64,
    re: *mut f64,
    im: *mut f64,
) -> StStatus {
    guarded(|| {
        let scene = not_null!(scene);
        let re = not_null_mut!(re);
        let im = not_null_mut!(im);
        let s = &scene.scenario;
        let drive = match focus_drive(scene) {
            Ok(d) => d,
            Err(e) => return fail(&e),
        };
        match pressure_at(
            &s.assembly,
            &s.medium,
            &drive,
            &nalgebra_point(x, y, z),
        ) {
            Ok(p) => {
                *re = p.re;
                *im = p.im;
                StStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Time-averaged intensity (W/m²) of the focused field at a point.
///
/// # Safety
/// `scene` must be a live scene handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn st_intensity_at(
    scene: *const StScene,
    x: f64,
    y: f64,
    z: f64,
    out: *mut f64,
) -> StStatus {
    guarded(|| {
        let scene = not_null!(scene);
        let out = not_null_mut!(out);
        let s = &scene.scenario;
        let drive = match focus_drive(scene) {
            Ok(d) => d,
            Err(e) => return fail(&e),
        };
        match intensity_at(&s.assembly, &s.medium, &drive, &nalgebra_point(x, y, z)) {
            Ok(i) => {
                *out = i;
                StStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

fn nalgebra_point(x: f64, y: f64, z: f64) -> sonotherm::nalgebra::Vector3<f64> {
    sonotherm::nalgebra::Vector3::new(x, y, z)
}

/// Fit the absorbed fraction so a static run reaches `target_dt_c` at
/// `target_t_s`, store it on the scene and return it through `eta_out`.
///
/// # Safety
/// `scene` must be a live scene handle; `eta_out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn st_calibrate(
    scene: *mut StScene,
    target_dt_c: f64,
    target_t_s: f64,
    eta_out: *mut f64,
) -> StStatus {
    guarded(|| {
        let scene = not_null_mut!(scene);
        let eta_out = not_null_mut!(eta_out);
        let drive = match focus_drive(scene) {
            Ok(d) => d,
            Err(e) => return fail(&e),
        };
        let s = &scene.scenario;
        match calibrate_eta(
            &s.assembly,
            &s.medium,
            &drive,
            &s.skin,
            &s.grid,
            &s.solver,
            s.probe,
            target_dt_c,
            target_t_s,
        ) {
            Ok(cal) => {
                scene.scenario.skin.absorbed_fraction = cal.eta;
                *eta_out = cal.eta;
                StStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Run the thermal simulation. `snapshot_times_s` may be NULL when
/// `n_snapshots` is 0. On success `*out` owns the run; release it with
/// [`st_run_free`].
///
/// # Safety
/// `scene` must be a live scene handle; `snapshot_times_s` must point to
/// `n_snapshots` readable doubles (or be NULL when `n_snapshots` is 0);
/// `out` must be valid for a single pointer write.
#[no_mangle]
pub unsafe extern "C" fn st_simulate(
    scene: *const StScene,
    envelope: StEnvelope,
    duration_s: f64,
    snapshot_times_s: *const f64,
    n_snapshots: usize,
    out: *mut *mut StRun,
) -> StStatus {
    guarded(|| {
        let scene = not_null!(scene);
        let out = not_null_mut!(out);
        let snaps: &[f64] = if n_snapshots == 0 {
            &[]
        } else if snapshot_times_s.is_null() {
            set_last_error("snapshot_times_s is NULL but n_snapshots > 0");
            return StStatus::NullArgument;
        } else {
            std::slice::from_raw_parts(snapshot_times_s, n_snapshots)
        };
        let s = &scene.scenario;
        let env = match envelope {
            StEnvelope::Static => Envelope::Static,
            StEnvelope::Square => match s.envelope {
                sq @ Envelope::Square { .. } => sq,
                Envelope::Static => Envelope::Square {
                    freq_hz: DEFAULT_SQUARE_FREQ_HZ,
                    duty: DEFAULT_SQUARE_DUTY,
                },
            },
        };
        let drive = match focus_drive(scene) {
            Ok(d) => d,
            Err(e) => return fail(&e),
        };
        match simulate(
            &s.assembly, &s.medium, &drive, &env, &s.skin, &s.grid, &s.solver, duration_s,
            s.probe, snaps,
        ) {
            Ok(run) => {
                *out = Box::into_raw(Box::new(StRun { run }));
                StStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Release a run created by [`st_simulate`]. NULL is a no-op.
///
/// # Safety
/// `run` must be a pointer previously returned by [`st_simulate`] and not
/// freed since.
#[no_mangle]
pub unsafe extern "C" fn st_run_free(run: *mut StRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of recorded time samples; 0 for NULL.
///
/// # Safety
/// `run` must be a live run handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn st_run_sample_count(run: *const StRun) -> usize {
    match run.as_ref() {
        Some(r) => r.run.times.len(),
        None => 0,
    }
}

/// Read sample `index` of the probe ΔT series.
///
/// # Safety
/// `run` must be a live run handle; `time_s`/`delta_t_c` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn st_run_sample(
    run: *const StRun,
    index: usize,
    time_s: *mut f64,
    delta_t_c: *mut f64,
) -> StStatus {
    guarded(|| {
        let run = not_null!(run);
        let time_s = not_null_mut!(time_s);
        let delta_t_c = not_null_mut!(delta_t_c);
        if index >= run.run.times.len() {
            set_last_error("sample index out of range");
            return StStatus::IndexOutOfRange;
        }
        *time_s = run.run.times[index];
        *delta_t_c = run.run.probe_delta_t[index];
        StStatus::Ok
    })
}

/// Probe ΔT at the final recorded time.
///
/// # Safety
/// `run` must be a live run handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn st_run_final_delta_t(run: *const StRun, out: *mut f64) -> StStatus {
    guarded(|| {
        let run = not_null!(run);
        let out = not_null_mut!(out);
        *out = run.run.final_delta_t();
        StStatus::Ok
    })
}

/// First time the probe ΔT reaches `threshold_c`, linearly interpolated.
/// `*reached` is false when the series never crosses (then `*t_out` is 0).
///
/// # Safety
/// `run` must be a live run handle; `reached`/`t_out` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn st_run_time_to_threshold(
    run: *const StRun,
    threshold_c: f64,
    reached: *mut bool,
    t_out: *mut f64,
) -> StStatus {
    guarded(|| {
        let run = not_null!(run);
        let reached = not_null_mut!(reached);
        let t_out = not_null_mut!(t_out);
        if !(threshold_c > 0.0) || !threshold_c.is_finite() {
            set_last_error("threshold must be finite and > 0");
            return StStatus::ConfigError;
        }
        let model = PerceptionModel {
            warm_threshold: threshold_c,
            ..PerceptionModel::default()
        };
        match time_to_threshold(&run.run, &model) {
            Some(t) => {
                *reached = true;
                *t_out = t;
            }
            None => {
                *reached = false;
                *t_out = 0.0;
            }
        }
        StStatus::Ok
    })
}

/// Export the run (timeseries.csv, snapshot maps, meta.json) into a
/// directory, creating it if needed.
///
/// # Safety
/// `run` must be a live run handle; `out_dir` must be a valid
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn st_run_export(run: *const StRun, out_dir: *const c_char) -> StStatus {
    guarded(|| {
        let run = not_null!(run);
        let dir = match cstr_arg(out_dir) {
            Ok(d) => d,
            Err(s) => return s,
        };
        match export_run(&run.run, std::path::Path::new(dir)) {
            Ok(_) => StStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}
