//! Plain-text keypoint cache keyed by the map checksum.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::geometry::Point2;
use crate::global_loc::{Keypoint, KeypointKind, DESCRIPTOR_BINS};

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("keypoint cache line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub fn keypoints_to_text(kps: &[Keypoint], checksum: u64) -> String {
    let mut s = format!("# keypoints checksum {checksum:016x}\n");
    for k in kps {
        let _ = write!(
            s,
            "{} {} {} {} {}",
            k.position.x,
            k.position.y,
            k.kind.as_str(),
            k.dominant_orientation,
            k.avg_df
        );
        for b in &k.descriptor {
            let _ = write!(s, " {b}");
        }
        s.push('\n');
    }
    s
}

/// Parses a cache; returns `None` when its checksum differs from `checksum`.
pub fn keypoints_from_text(text: &str, checksum: u64) -> Result<Option<Vec<Keypoint>>, CacheError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    let stored = header
        .strip_prefix("# keypoints checksum ")
        .and_then(|h| u64::from_str_radix(h.trim(), 16).ok())
        .ok_or_else(|| CacheError::Parse { line: 1, msg: "missing checksum header".into() })?;
    if stored != checksum {
        return Ok(None);
    }
    let mut out = Vec::new();
    for (i, l) in lines.enumerate() {
        let line = i + 2;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.is_empty() {
            continue;
        }
        if t.len() != 5 + DESCRIPTOR_BINS {
            return Err(CacheError::Parse { line, msg: format!("expected {} fields, found {}", 5 + DESCRIPTOR_BINS, t.len()) });
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| CacheError::Parse { line, msg: format!("bad number {s:?}") });
        let kind = KeypointKind::parse(t[2]).ok_or_else(|| CacheError::Parse { line, msg: format!("bad kind {:?}", t[2]) })?;
        let mut descriptor = [0.0; DESCRIPTOR_BINS];
        for (d, s) in descriptor.iter_mut().zip(&t[5..]) {
            *d = num(s)?;
        }
        out.push(Keypoint {
            position: Point2::new(num(t[0])?, num(t[1])?),
            kind,
            dominant_orientation: num(t[3])?,
            avg_df: num(t[4])?,
            descriptor,
        });
    }
    Ok(Some(out))
}

pub fn save_keypoints(path: &Path, kps: &[Keypoint], checksum: u64) -> Result<(), CacheError> {
    std::fs::write(path, keypoints_to_text(kps, checksum)).map_err(|source| CacheError::Io { path: path.into(), source })
}

/// Reads a cache file; `Ok(None)` if missing or stale.
pub fn load_keypoints(path: &Path, checksum: u64) -> Result<Option<Vec<Keypoint>>, CacheError> {
    match std::fs::read_to_string(path) {
        Ok(text) => keypoints_from_text(&text, checksum),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(source) => Err(CacheError::Io { path: path.into(), source }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_staleness() {
        let mut descriptor = [0.0; DESCRIPTOR_BINS];
        descriptor[3] = 0.25;
        descriptor[16] = 0.75;
        let kps = vec![Keypoint {
            position: Point2::new(1.125, -3.0),
            kind: KeypointKind::Saddle,
            dominant_orientation: 0.1234567891234,
            avg_df: 0.7,
            descriptor,
        }];
        let text = keypoints_to_text(&kps, 42);
        assert_eq!(keypoints_from_text(&text, 42).unwrap().unwrap(), kps);
        assert!(keypoints_from_text(&text, 43).unwrap().is_none());
    }
}
