//! C ABI over the relmcl localization engine.
//!
//! Objects are opaque handles created by `relmcl_*_new`/`_load` calls and
//! released with the matching `_free`. Every call returns a
//! [`RelmclStatus`]; on failure [`relmcl_last_error`] describes the cause.
//! Strings returned by the library are freed with [`relmcl_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use relmcl::cli::config::RunConfig;
use relmcl::geometry::Pose2D;
use relmcl::map::{load_map_from_meta, CellState, OccupancyGrid};
use relmcl::mcl_core::Localizer;
use relmcl::models::{train_decision_model, DecisionModel, OdometryInput, Scan};
use relmcl::sim::{build_localizer, maps, RunSetup, SimScene};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelmclStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    Io = 4,
    Parse = 5,
    InsufficientData = 6,
    Panic = 7,
}

/// An occupancy grid.
pub struct RelmclMap {
    grid: Arc<OccupancyGrid>,
}

/// A trained or loaded MAE decision model.
pub struct RelmclDecisionModel {
    dm: DecisionModel,
}

/// A running filter.
pub struct RelmclLocalizer {
    loc: Localizer,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RelmclMapInfo {
    pub width: usize,
    pub height: usize,
    /// Cell size, m.
    pub resolution: f64,
    pub free_cells: usize,
    pub occupied_cells: usize,
    /// Free area, m².
    pub free_area: f64,
}

/// Filter output of one cycle.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RelmclEstimate {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub reliability: f64,
    /// NaN when no beam passed the residual cutoff.
    pub mae: f64,
    pub n_global_samples: usize,
    pub n_unknown_beams: usize,
}

/// Geometry of a scan passed to [`relmcl_localizer_step`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RelmclScanInfo {
    pub angle_min: f64,
    pub angle_increment: f64,
    pub range_min: f64,
    pub range_max: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

struct Fail(RelmclStatus, String);

type R<T> = Result<T, Fail>;

fn fail<T>(status: RelmclStatus, msg: impl Into<String>) -> R<T> {
    Err(Fail(status, msg.into()))
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> R<()>) -> RelmclStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RelmclStatus::Ok,
        Ok(Err(Fail(s, m))) => {
            set_error(m);
            s
        }
        Err(p) => {
            let m = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {m}"));
            RelmclStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> R<&'a str> {
    if p.is_null() {
        return fail(RelmclStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(RelmclStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> R<&'a T> {
    p.as_ref()
        .ok_or_else(|| Fail(RelmclStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> R<&'a mut T> {
    p.as_mut()
        .ok_or_else(|| Fail(RelmclStatus::NullPointer, format!("{what} is null")))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Library version, a static string that must not be freed.
#[no_mangle]
pub extern "C" fn relmcl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Free the
/// result with [`relmcl_string_free`].
#[no_mangle]
pub extern "C" fn relmcl_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null_mut(), |s| s.clone().into_raw()))
}

/// Frees a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn relmcl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds one of the bundled maps by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn relmcl_map_bundled(name: *const c_char, resolution: f64, out: *mut *mut RelmclMap) -> RelmclStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let name = str_arg(name, "name")?;
        if !(resolution > 0.0 && resolution.is_finite()) {
            return fail(RelmclStatus::InvalidArgument, format!("resolution must be > 0, got {resolution}"));
        }
        let grid = maps::by_name(name, resolution, 0)
            .ok_or_else(|| Fail(RelmclStatus::InvalidArgument, format!("unknown bundled map `{name}`")))?;
        *out = boxed(RelmclMap { grid: Arc::new(grid) });
        Ok(())
    })
}

/// Loads a map from a metadata file referencing a PGM image.
///
/// # Safety
/// `meta_path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn relmcl_map_load(meta_path: *const c_char, out: *mut *mut RelmclMap) -> RelmclStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let p = str_arg(meta_path, "meta_path")?;
        let grid = load_map_from_meta(Path::new(p)).map_err(|e| {
            let s = match e {
                relmcl::map::MapError::Io { .. } => RelmclStatus::Io,
                _ => RelmclStatus::Parse,
            };
            Fail(s, e.to_string())
        })?;
        *out = boxed(RelmclMap { grid: Arc::new(grid) });
        Ok(())
    })
}

/// # Safety
/// `map` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn relmcl_map_info(map: *const RelmclMap, out: *mut RelmclMapInfo) -> RelmclStatus {
    guard(|| {
        let g = &ref_arg(map, "map")?.grid;
        *out_arg(out, "out")? = RelmclMapInfo {
            width: g.width(),
            height: g.height(),
            resolution: g.resolution(),
            free_cells: g.count(CellState::Free),
            occupied_cells: g.count(CellState::Occupied),
            free_area: g.free_area(),
        };
        Ok(())
    })
}

/// Frees a map; null is ignored. Localizers built from it stay valid.
///
/// # Safety
/// `map` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn relmcl_map_free(map: *mut RelmclMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Loads a decision model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn relmcl_decision_model_load(path: *const c_char, out: *mut *mut RelmclDecisionModel) -> RelmclStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let p = str_arg(path, "path")?;
        let text = std::fs::read_to_string(p).or_else(|e| fail(RelmclStatus::Io, format!("{p}: {e}")))?;
        let dm = DecisionModel::parse(&text).map_err(|e| Fail(RelmclStatus::Parse, e.to_string()))?;
        *out = boxed(RelmclDecisionModel { dm });
        Ok(())
    })
}

/// Trains a decision model on simulated scans of `map`.
///
/// # Safety
/// `map` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn relmcl_decision_model_train(
    map: *const RelmclMap,
    n_samples: usize,
    seed: u64,
    out: *mut *mut RelmclDecisionModel,
) -> RelmclStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let map = ref_arg(map, "map")?;
        let cfg = RunConfig::default();
        let training = relmcl::models::TrainingConfig { n_samples, ..cfg.training };
        let scene = SimScene::new(map.grid.clone(), cfg.lidar, cfg.training_margin, cfg.training_clutter);
        if !scene.has_free_space() {
            return fail(RelmclStatus::InsufficientData, "map has no free space to train on");
        }
        let (dm, _) = train_decision_model(&scene, &training, seed).map_err(|e| match e {
            relmcl::models::ModelError::Training(_) => Fail(RelmclStatus::InsufficientData, e.to_string()),
            _ => Fail(RelmclStatus::InvalidConfig, e.to_string()),
        })?;
        *out = boxed(RelmclDecisionModel { dm });
        Ok(())
    })
}

/// The model's MAE threshold, m; NaN for a null handle.
///
/// # Safety
/// `dm` must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn relmcl_decision_model_threshold(dm: *const RelmclDecisionModel) -> f64 {
    dm.as_ref().map_or(f64::NAN, |d| d.dm.d_th)
}

/// # Safety
/// `dm` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn relmcl_decision_model_free(dm: *mut RelmclDecisionModel) {
    if !dm.is_null() {
        drop(Box::from_raw(dm));
    }
}

/// Creates a localizer at an initial pose. `config` is optional text in
/// the sectioned `key = value` format of the command-line tool.
///
/// # Safety
/// `map` and `dm` must be valid, `config` null or NUL-terminated, `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn relmcl_localizer_new(
    map: *const RelmclMap,
    dm: *const RelmclDecisionModel,
    config: *const c_char,
    x: f64,
    y: f64,
    theta: f64,
    seed: u64,
    out: *mut *mut RelmclLocalizer,
) -> RelmclStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let map = ref_arg(map, "map")?;
        let dm = ref_arg(dm, "dm")?;
        let mut cfg = RunConfig::default();
        if !config.is_null() {
            cfg.apply_text(str_arg(config, "config")?)
                .map_err(|e| Fail(RelmclStatus::InvalidConfig, e.to_string()))?;
        }
        cfg.validate().map_err(|e| Fail(RelmclStatus::InvalidConfig, e.to_string()))?;
        if ![x, y, theta].iter().all(|v| v.is_finite()) {
            return fail(RelmclStatus::InvalidArgument, "initial pose must be finite");
        }
        let setup = RunSetup {
            filter: cfg.filter.clone(),
            global: cfg.global_enabled.then_some(cfg.global),
            keypoints: None,
            dm: dm.dm.clone(),
            lidar: cfg.lidar,
        };
        let loc = build_localizer(map.grid.clone(), &setup, Pose2D::new(x, y, theta), seed)
            .map_err(|e| Fail(RelmclStatus::InvalidConfig, e.to_string()))?;
        *out = boxed(RelmclLocalizer { loc });
        Ok(())
    })
}

/// Runs one cycle with odometry `(v, omega)` over `dt` seconds and a scan
/// of `n_ranges` readings.
///
/// # Safety
/// `loc` must be valid, `ranges` must point to `n_ranges` doubles, `scan`
/// readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn relmcl_localizer_step(
    loc: *mut RelmclLocalizer,
    v: f64,
    omega: f64,
    dt: f64,
    ranges: *const f64,
    n_ranges: usize,
    scan: *const RelmclScanInfo,
    out: *mut RelmclEstimate,
) -> RelmclStatus {
    guard(|| {
        let loc = out_arg(loc, "loc")?;
        let info = *ref_arg(scan, "scan")?;
        let out = out_arg(out, "out")?;
        if ranges.is_null() && n_ranges > 0 {
            return fail(RelmclStatus::NullPointer, "ranges is null");
        }
        if ![v, omega, dt].iter().all(|a| a.is_finite()) || dt < 0.0 {
            return fail(RelmclStatus::InvalidArgument, "odometry must be finite with dt >= 0");
        }
        if !(info.range_max > info.range_min && info.range_min >= 0.0) {
            return fail(RelmclStatus::InvalidArgument, "need 0 <= range_min < range_max");
        }
        let ranges = if n_ranges == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(ranges, n_ranges).to_vec()
        };
        let scan = Scan {
            ranges,
            angle_min: info.angle_min,
            angle_increment: info.angle_increment,
            range_min: info.range_min,
            range_max: info.range_max,
            sensor_offset: Pose2D::default(),
        };
        let r = loc.loc.step(&OdometryInput::new(v, omega, dt), &scan, &[]);
        *out = RelmclEstimate {
            x: r.estimate.x,
            y: r.estimate.y,
            theta: r.estimate.theta,
            reliability: r.reliability,
            mae: r.mae.unwrap_or(f64::NAN),
            n_global_samples: r.n_global_samples,
            n_unknown_beams: r.unknown_beams.len(),
        };
        Ok(())
    })
}

/// # Safety
/// `loc` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn relmcl_localizer_free(loc: *mut RelmclLocalizer) {
    if !loc.is_null() {
        drop(Box::from_raw(loc));
    }
}
