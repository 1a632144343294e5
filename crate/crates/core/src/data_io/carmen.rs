use std::fmt::Write as _;
use std::path::Path;

use crate::geometry::Pose2D;
use crate::models::Scan;

#[derive(Debug, thiserror::Error)]
pub enum CarmenError {
    #[error("cannot read log: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// How FLASER ranges map to beam angles and validity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlaserConvention {
    /// Total field of view, rad; beams span `[-fov/2, fov/2]`.
    pub fov: f64,
    pub range_min: f64,
    /// Readings at or above this are treated as no-return, m.
    pub range_max: f64,
}

impl Default for FlaserConvention {
    fn default() -> Self {
        Self {
            fov: std::f64::consts::PI,
            range_min: 0.0,
            range_max: 50.0,
        }
    }
}

impl FlaserConvention {
    pub fn scan(&self, ranges: Vec<f64>) -> Scan {
        let n = ranges.len();
        Scan {
            ranges,
            angle_min: -0.5 * self.fov,
            angle_increment: if n > 1 { self.fov / (n - 1) as f64 } else { 0.0 },
            range_min: self.range_min,
            range_max: self.range_max,
            sensor_offset: Pose2D::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaserRecord {
    pub scan: Scan,
    /// Laser pose stamp.
    pub laser_pose: Pose2D,
    /// Robot odometry pose stamp.
    pub odom_pose: Pose2D,
    pub timestamp: f64,
    pub host: String,
    pub log_timestamp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdomRecord {
    pub pose: Pose2D,
    /// Translational velocity, m/s.
    pub tv: f64,
    /// Rotational velocity, rad/s.
    pub rv: f64,
    pub accel: f64,
    pub timestamp: f64,
    pub host: String,
    pub log_timestamp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LogRecord {
    Laser(LaserRecord),
    Odom(OdomRecord),
}

impl LogRecord {
    pub fn timestamp(&self) -> f64 {
        match self {
            LogRecord::Laser(l) => l.timestamp,
            LogRecord::Odom(o) => o.timestamp,
        }
    }

    /// The record as one CARMEN line (no trailing newline).
    pub fn to_line(&self) -> String {
        let mut s = String::new();
        match self {
            LogRecord::Laser(l) => {
                let _ = write!(s, "FLASER {}", l.scan.len());
                for r in &l.scan.ranges {
                    let _ = write!(s, " {r}");
                }
                let (p, o) = (&l.laser_pose, &l.odom_pose);
                let _ = write!(
                    s,
                    " {} {} {} {} {} {} {} {} {}",
                    p.x, p.y, p.theta, o.x, o.y, o.theta, l.timestamp, l.host, l.log_timestamp
                );
            }
            LogRecord::Odom(o) => {
                let p = &o.pose;
                let _ = write!(
                    s,
                    "ODOM {} {} {} {} {} {} {} {} {}",
                    p.x, p.y, p.theta, o.tv, o.rv, o.accel, o.timestamp, o.host, o.log_timestamp
                );
            }
        }
        s
    }
}

/// Parsed log: records sorted by timestamp (stable) plus the number of
/// lines with an unknown message type.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CarmenLog {
    pub records: Vec<LogRecord>,
    pub skipped: usize,
}

impl CarmenLog {
    pub fn lasers(&self) -> impl Iterator<Item = &LaserRecord> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Laser(l) => Some(l),
            LogRecord::Odom(_) => None,
        })
    }

    pub fn odometry(&self) -> impl Iterator<Item = &OdomRecord> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Odom(o) => Some(o),
            LogRecord::Laser(_) => None,
        })
    }
}

fn num(tok: &str, line: usize, what: &str) -> Result<f64, CarmenError> {
    tok.parse::<f64>().map_err(|_| CarmenError::Parse {
        line,
        msg: format!("{what}: `{tok}` is not a number"),
    })
}

fn parse_flaser(toks: &[&str], line: usize, conv: &FlaserConvention) -> Result<LaserRecord, CarmenError> {
    let n_tok = toks.get(1).ok_or_else(|| CarmenError::Parse {
        line,
        msg: "FLASER without beam count".into(),
    })?;
    let n: usize = n_tok.parse().map_err(|_| CarmenError::Parse {
        line,
        msg: format!("beam count `{n_tok}` is not a non-negative integer"),
    })?;
    let want = n + 11;
    if toks.len() != want {
        return Err(CarmenError::Parse {
            line,
            msg: format!("FLASER with {n} beams needs {want} tokens, found {}", toks.len()),
        });
    }
    let ranges = toks[2..2 + n]
        .iter()
        .enumerate()
        .map(|(k, t)| num(t, line, &format!("range {k}")))
        .collect::<Result<Vec<_>, _>>()?;
    let f = |k: usize, what: &str| num(toks[2 + n + k], line, what);
    Ok(LaserRecord {
        scan: conv.scan(ranges),
        laser_pose: Pose2D::new(f(0, "x")?, f(1, "y")?, f(2, "theta")?),
        odom_pose: Pose2D::new(f(3, "odom_x")?, f(4, "odom_y")?, f(5, "odom_theta")?),
        timestamp: f(6, "timestamp")?,
        host: toks[2 + n + 7].to_string(),
        log_timestamp: f(8, "logger timestamp")?,
    })
}

fn parse_odom(toks: &[&str], line: usize) -> Result<OdomRecord, CarmenError> {
    if toks.len() != 10 {
        return Err(CarmenError::Parse {
            line,
            msg: format!("ODOM needs 10 tokens, found {}", toks.len()),
        });
    }
    let f = |k: usize, what: &str| num(toks[k], line, what);
    Ok(OdomRecord {
        pose: Pose2D::new(f(1, "x")?, f(2, "y")?, f(3, "theta")?),
        tv: f(4, "tv")?,
        rv: f(5, "rv")?,
        accel: f(6, "accel")?,
        timestamp: f(7, "timestamp")?,
        host: toks[8].to_string(),
        log_timestamp: f(9, "logger timestamp")?,
    })
}

/// Parses CARMEN text. Blank lines and `#` comments are ignored; other
/// message types are skipped and counted.
pub fn parse_carmen_str(text: &str, conv: &FlaserConvention) -> Result<CarmenLog, CarmenError> {
    let mut log = CarmenLog::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        match toks.first() {
            None => {}
            Some(t) if t.starts_with('#') => {}
            Some(&"FLASER") => log.records.push(LogRecord::Laser(parse_flaser(&toks, line, conv)?)),
            Some(&"ODOM") => log.records.push(LogRecord::Odom(parse_odom(&toks, line)?)),
            Some(_) => log.skipped += 1,
        }
    }
    log.records.sort_by(|a, b| a.timestamp().total_cmp(&b.timestamp()));
    Ok(log)
}

pub fn parse_carmen(path: &Path, conv: &FlaserConvention) -> Result<CarmenLog, CarmenError> {
    parse_carmen_str(&std::fs::read_to_string(path)?, conv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn odom_line() {
        let log = parse_carmen_str("ODOM 1.0 2.0 0.5 0.3 0.1 0.0 100.0 host 100.0", &FlaserConvention::default()).unwrap();
        let o = log.odometry().next().unwrap();
        assert_eq!(o.pose, Pose2D::new(1.0, 2.0, 0.5));
        assert_eq!((o.tv, o.rv), (0.3, 0.1));
        assert_eq!(o.host, "host");
    }

    #[test]
    fn minimal_flaser_spans_half_circle() {
        let log = parse_carmen_str("FLASER 2 1.5 2.5 0 0 0 0 0 0 3.0 h 3.0", &FlaserConvention::default()).unwrap();
        let l = log.lasers().next().unwrap();
        assert_eq!(l.scan.ranges, vec![1.5, 2.5]);
        assert_relative_eq!(l.scan.beam_angle(0), -std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(l.scan.beam_angle(1), std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn unknown_types_counted() {
        let text = "PARAM foo bar\n# comment\n\nTRUEPOS 1 2 3\nODOM 0 0 0 0 0 0 1 h 1\n";
        let log = parse_carmen_str(text, &FlaserConvention::default()).unwrap();
        assert_eq!(log.skipped, 2);
        assert_eq!(log.records.len(), 1);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let conv = FlaserConvention::default();
        match parse_carmen_str("ODOM 0 0 0 0 0 0 1 h 1\nODOM 0 x 0 0 0 0 1 h 1", &conv) {
            Err(CarmenError::Parse { line: 2, msg }) => assert!(msg.contains('y'), "{msg}"),
            other => panic!("{other:?}"),
        }
        // three ranges declared, two given
        match parse_carmen_str("FLASER 3 1 2 0 0 0 0 0 0 1 h 1", &conv) {
            Err(CarmenError::Parse { line: 1, msg }) => assert!(msg.contains("tokens"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_carmen_str("FLASER -1", &conv),
            Err(CarmenError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn records_sorted_by_timestamp() {
        let text = "ODOM 0 0 0 0 0 0 2 h 2\nODOM 1 0 0 0 0 0 1 h 1\n";
        let log = parse_carmen_str(text, &FlaserConvention::default()).unwrap();
        let ts: Vec<f64> = log.records.iter().map(|r| r.timestamp()).collect();
        assert_eq!(ts, vec![1.0, 2.0]);
    }

    #[test]
    fn fov_override() {
        let conv = FlaserConvention {
            fov: std::f64::consts::PI / 2.0,
            ..Default::default()
        };
        let log = parse_carmen_str("FLASER 3 1 1 1 0 0 0 0 0 0 0 h 0", &conv).unwrap();
        assert_relative_eq!(log.lasers().next().unwrap().scan.angle_increment, std::f64::consts::PI / 4.0);
    }
}
