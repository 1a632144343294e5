use std::f64::consts::PI;

use proptest::prelude::*;

use relmcl::data_io::{parse_carmen, parse_carmen_str, FlaserConvention, LaserRecord, LogRecord, OdomRecord};
use relmcl::geometry::Pose2D;
use relmcl::rng;

fn laser(conv: &FlaserConvention, ranges: Vec<f64>, laser_pose: Pose2D, odom_pose: Pose2D, t: f64, host: &str) -> LogRecord {
    LogRecord::Laser(LaserRecord {
        scan: conv.scan(ranges),
        laser_pose,
        odom_pose,
        timestamp: t,
        host: host.into(),
        log_timestamp: t + 0.5,
    })
}

fn pose(r: &mut relmcl::rng::Rng) -> Pose2D {
    Pose2D::new(r.random_range(-100.0..100.0), r.random_range(-100.0..100.0), r.random_range(-PI..PI))
}

fn synthetic_log(n: usize, seed: u64) -> Vec<LogRecord> {
    let conv = FlaserConvention::default();
    let mut r = rng::stream(seed, &[]);
    let mut t = 1_000_000_000.0 + r.random_range(0.0..1.0);
    (0..n)
        .map(|i| {
            t += r.random_range(0.001..0.2);
            if i % 3 == 0 {
                LogRecord::Odom(OdomRecord {
                    pose: pose(&mut r),
                    tv: r.random_range(-1.0..1.0),
                    rv: r.random_range(-1.0..1.0),
                    accel: 0.0,
                    timestamp: t,
                    host: "robot".into(),
                    log_timestamp: t + 0.01,
                })
            } else {
                let n = r.random_range(1..361);
                let ranges = (0..n).map(|_| r.random_range(0.0..60.0)).collect();
                laser(&conv, ranges, pose(&mut r), pose(&mut r), t, "laserhost")
            }
        })
        .collect()
}

#[test]
fn thousand_lines_round_trip() {
    let records = synthetic_log(1000, 42);
    let text: String = records.iter().map(|r| r.to_line() + "\n").collect();
    let log = parse_carmen_str(&text, &FlaserConvention::default()).unwrap();
    assert_eq!(log.skipped, 0);
    assert_eq!(log.records.len(), 1000);
    assert_eq!(log.records, records);
    // and once more through the text form
    let again: String = log.records.iter().map(|r| r.to_line() + "\n").collect();
    assert_eq!(again, text);
}

#[test]
fn file_and_string_parsers_agree() {
    let records = synthetic_log(50, 7);
    let mut text = String::from("# comment\n\nPARAM robot_name x\n");
    for r in &records {
        text += &r.to_line();
        text.push('\n');
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.txt");
    std::fs::write(&path, &text).unwrap();
    let a = parse_carmen(&path, &FlaserConvention::default()).unwrap();
    let b = parse_carmen_str(&text, &FlaserConvention::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.skipped, 1);
    assert_eq!(a.lasers().count() + a.odometry().count(), 50);
}

#[test]
fn out_of_order_records_are_sorted() {
    let mut records = synthetic_log(30, 3);
    let text: String = records.iter().rev().map(|r| r.to_line() + "\n").collect();
    let log = parse_carmen_str(&text, &FlaserConvention::default()).unwrap();
    records.sort_by(|a, b| a.timestamp().total_cmp(&b.timestamp()));
    assert_eq!(log.records, records);
}

proptest! {
    #[test]
    fn laser_record_round_trips(
        ranges in prop::collection::vec(0.0f64..80.0, 1..200),
        x in -1e4f64..1e4, y in -1e4f64..1e4, th in -PI..PI,
        t in 0.0f64..2e9,
        host in "[a-z][a-z0-9_]{0,12}",
    ) {
        let conv = FlaserConvention::default();
        let rec = laser(&conv, ranges, Pose2D::new(x, y, th), Pose2D::new(y, x, -th), t, &host);
        let log = parse_carmen_str(&rec.to_line(), &conv).unwrap();
        prop_assert_eq!(log.records, vec![rec]);
    }
}
