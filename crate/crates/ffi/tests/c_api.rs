use std::ffi::{CStr, CString};
use std::ptr;
use std::sync::Arc;

use relmcl::geometry::Pose2D;
use relmcl::rng;
use relmcl::sim::{cast_scan_at, maps, LidarConfig};
use relmcl_ffi::*;

fn last_error() -> String {
    let p = relmcl_last_error();
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
    unsafe { relmcl_string_free(p) };
    s
}

fn cross() -> *mut RelmclMap {
    let mut m = ptr::null_mut();
    let name = CString::new("corridor_cross").unwrap();
    assert_eq!(unsafe { relmcl_map_bundled(name.as_ptr(), 0.05, &mut m) }, RelmclStatus::Ok);
    m
}

fn trained(map: *const RelmclMap) -> *mut RelmclDecisionModel {
    let mut dm = ptr::null_mut();
    assert_eq!(unsafe { relmcl_decision_model_train(map, 500, 1, &mut dm) }, RelmclStatus::Ok);
    dm
}

#[test]
fn tracks_a_straight_drive() {
    let map = cross();
    let dm = trained(map);
    let cfg = CString::new("[filter]\nn_particles = 300\n[fusion]\nunif_value = auto\n").unwrap();
    let mut loc = ptr::null_mut();
    let st = unsafe { relmcl_localizer_new(map, dm, cfg.as_ptr(), 4.0, 10.0, 0.0, 11, &mut loc) };
    assert_eq!(st, RelmclStatus::Ok, "{}", last_error());

    let grid = Arc::new(maps::corridor_cross(0.05));
    let lidar = LidarConfig::default();
    let mut noise = rng::stream(5, &[0]);
    let info = RelmclScanInfo {
        angle_min: -0.5 * lidar.fov,
        angle_increment: lidar.angle_increment,
        range_min: lidar.range_min,
        range_max: lidar.range_max,
    };
    let mut est = RelmclEstimate::default();
    for k in 1..=40 {
        let truth = Pose2D::new(4.0 + 0.05 * k as f64, 10.0, 0.0);
        let scan = cast_scan_at(&grid, &[], &truth, &lidar, &mut noise);
        let st = unsafe {
            relmcl_localizer_step(loc, 0.5, 0.0, 0.1, scan.ranges.as_ptr(), scan.ranges.len(), &info, &mut est)
        };
        assert_eq!(st, RelmclStatus::Ok);
    }
    let err = (est.x - 6.0).hypot(est.y - 10.0);
    assert!(err < 0.2, "final error {err}");
    assert!(est.reliability > 0.5 && est.reliability <= 1.0);
    assert!(est.mae.is_finite());

    unsafe {
        relmcl_localizer_free(loc);
        relmcl_decision_model_free(dm);
        relmcl_map_free(map);
    }
}

#[test]
fn map_info_reports_geometry() {
    let map = cross();
    let mut info = RelmclMapInfo::default();
    assert_eq!(unsafe { relmcl_map_info(map, &mut info) }, RelmclStatus::Ok);
    assert_eq!((info.width, info.height), (400, 400));
    assert_eq!(info.resolution, 0.05);
    // two 18 m x 2 m corridors crossing in a 2 m x 2 m square
    assert!((info.free_area - 68.0).abs() < 1.0, "{}", info.free_area);
    unsafe { relmcl_map_free(map) };
}

#[test]
fn errors_set_status_and_message() {
    let mut m = ptr::null_mut();
    let bad = CString::new("nowhere").unwrap();
    assert_eq!(unsafe { relmcl_map_bundled(bad.as_ptr(), 0.05, &mut m) }, RelmclStatus::InvalidArgument);
    assert!(last_error().contains("nowhere"));
    assert!(m.is_null());

    let name = CString::new("cross").unwrap();
    assert_eq!(unsafe { relmcl_map_bundled(name.as_ptr(), -1.0, &mut m) }, RelmclStatus::InvalidArgument);
    assert_eq!(unsafe { relmcl_map_bundled(ptr::null(), 0.05, &mut m) }, RelmclStatus::NullPointer);

    let missing = CString::new("/nonexistent/map.yaml").unwrap();
    assert_eq!(unsafe { relmcl_map_load(missing.as_ptr(), &mut m) }, RelmclStatus::Io);
    assert_eq!(unsafe { relmcl_decision_model_load(missing.as_ptr(), &mut ptr::null_mut()) }, RelmclStatus::Io);

    let map = cross();
    let mut dm = ptr::null_mut();
    assert_eq!(unsafe { relmcl_decision_model_train(map, 0, 1, &mut dm) }, RelmclStatus::InsufficientData);
    let dm = trained(map);

    let mut loc = ptr::null_mut();
    let cfg = CString::new("[filter]\nn_particles = 0\n").unwrap();
    let st = unsafe { relmcl_localizer_new(map, dm, cfg.as_ptr(), 4.0, 10.0, 0.0, 1, &mut loc) };
    assert_eq!(st, RelmclStatus::InvalidConfig);
    assert!(last_error().contains("n_particles"));
    let cfg = CString::new("[filter]\nbogus = 1\n").unwrap();
    let st = unsafe { relmcl_localizer_new(map, dm, cfg.as_ptr(), 4.0, 10.0, 0.0, 1, &mut loc) };
    assert_eq!(st, RelmclStatus::InvalidConfig);

    assert_eq!(unsafe { relmcl_localizer_new(map, dm, ptr::null(), 4.0, 10.0, 0.0, 1, &mut loc) }, RelmclStatus::Ok);
    let info = RelmclScanInfo { angle_min: 0.0, angle_increment: 0.1, range_min: 0.1, range_max: 0.05 };
    let r = [1.0; 3];
    let mut est = RelmclEstimate::default();
    let st = unsafe { relmcl_localizer_step(loc, 0.0, 0.0, 0.1, r.as_ptr(), 3, &info, &mut est) };
    assert_eq!(st, RelmclStatus::InvalidArgument);
    let info = RelmclScanInfo { range_max: 10.0, ..info };
    let st = unsafe { relmcl_localizer_step(loc, f64::NAN, 0.0, 0.1, r.as_ptr(), 3, &info, &mut est) };
    assert_eq!(st, RelmclStatus::InvalidArgument);
    let st = unsafe { relmcl_localizer_step(loc, 0.0, 0.0, 0.1, ptr::null(), 3, &info, &mut est) };
    assert_eq!(st, RelmclStatus::NullPointer);

    unsafe {
        relmcl_localizer_free(loc);
        relmcl_decision_model_free(dm);
        relmcl_map_free(map);
        // null is a no-op everywhere
        relmcl_localizer_free(ptr::null_mut());
        relmcl_decision_model_free(ptr::null_mut());
        relmcl_map_free(ptr::null_mut());
        relmcl_string_free(ptr::null_mut());
    }
    assert!(unsafe { relmcl_decision_model_threshold(ptr::null()) }.is_nan());
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(relmcl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
