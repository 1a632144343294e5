use std::fmt::Write as _;
use std::path::Path;

use crate::error::{ensure, ConfigError};
use crate::geometry::Pose2D;
use crate::map::io::encode_pgm16;
use crate::map::DistanceField;
use crate::models::{evaluate_pose, BeamSet, MeasurementConfig, MeasurementMode};

/// Log-likelihood of one scan evaluated on a square grid of positions
/// around `center` at a fixed heading.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodGrid {
    pub center: Pose2D,
    pub resolution: f64,
    /// Offsets per axis, m; symmetric around 0.
    pub offsets: Vec<f64>,
    /// Row-major, row = y offset, column = x offset.
    pub log_likelihood: Vec<f64>,
}

impl LikelihoodGrid {
    pub fn side(&self) -> usize {
        self.offsets.len()
    }

    pub fn pose(&self, ix: usize, iy: usize) -> Pose2D {
        Pose2D::new(self.center.x + self.offsets[ix], self.center.y + self.offsets[iy], self.center.theta)
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.log_likelihood[iy * self.side() + ix]
    }

    /// Pose of the highest log-likelihood; the first one on ties.
    pub fn argmax(&self) -> Pose2D {
        let mut best = 0;
        for (i, v) in self.log_likelihood.iter().enumerate() {
            if *v > self.log_likelihood[best] {
                best = i;
            }
        }
        let n = self.side();
        self.pose(best % n, best / n)
    }

    /// 16-bit image of exp(ll − max); the top row is the largest y offset.
    pub fn to_pgm(&self) -> Vec<u8> {
        let n = self.side();
        let max = self.log_likelihood.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut px = Vec::with_capacity(n * n);
        for iy in (0..n).rev() {
            for ix in 0..n {
                let p = (self.value(ix, iy) - max).exp();
                px.push((p * 65535.0).round() as u16);
            }
        }
        encode_pgm16(n, n, &px)
    }

    /// `x,y,theta,log_likelihood` per grid point.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,theta,log_likelihood\n");
        let n = self.side();
        for iy in 0..n {
            for ix in 0..n {
                let p = self.pose(ix, iy);
                let _ = writeln!(s, "{},{},{},{}", p.x, p.y, p.theta, self.value(ix, iy));
            }
        }
        s
    }

    pub fn write(&self, pgm: &Path, csv: &Path) -> std::io::Result<()> {
        std::fs::write(pgm, self.to_pgm())?;
        std::fs::write(csv, self.to_csv())
    }
}

/// Offsets `k·resolution` for `k = -n..=n` with `n = floor(extent / resolution)`.
/// A resolution above the extent gives the single offset 0.
pub fn grid_offsets(extent: f64, resolution: f64) -> Result<Vec<f64>, ConfigError> {
    ensure(extent.is_finite() && extent > 0.0, "extent", || format!("must be positive, got {extent}"))?;
    ensure(resolution.is_finite() && resolution > 0.0, "resolution", || {
        format!("must be positive, got {resolution}")
    })?;
    let n = (extent / resolution + 1e-9).floor() as i64;
    Ok((-n..=n).map(|k| k as f64 * resolution).collect())
}

/// Evaluates the beams at every grid offset around `center`.
pub fn likelihood_grid(
    beams: &BeamSet,
    center: &Pose2D,
    df: &DistanceField,
    cfg: &MeasurementConfig,
    mode: MeasurementMode,
    extent: f64,
    resolution: f64,
) -> Result<LikelihoodGrid, ConfigError> {
    let offsets = grid_offsets(extent, resolution)?;
    let mut g = LikelihoodGrid {
        center: *center,
        resolution,
        offsets,
        log_likelihood: Vec::new(),
    };
    let n = g.side();
    g.log_likelihood = (0..n * n)
        .map(|i| {
            evaluate_pose(beams, &g.pose(i % n, i / n), df, cfg, f64::INFINITY, mode)
                .map_or(f64::NEG_INFINITY, |e| e.log_likelihood)
        })
        .collect();
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::DEFAULT_CLAMP;
    use crate::rng::stream;
    use crate::sim::{cast_scan_at, maps, LidarConfig};

    #[test]
    fn offsets_are_symmetric() {
        let o = grid_offsets(0.5, 0.1).unwrap();
        assert_eq!(o.len(), 11);
        assert!((o[0] + 0.5).abs() < 1e-12 && (o[10] - 0.5).abs() < 1e-12);
        assert_eq!(grid_offsets(0.1, 0.5).unwrap(), vec![0.0]);
        assert_eq!(grid_offsets(0.3, 0.1).unwrap().len(), 7);
    }

    #[test]
    fn non_positive_inputs_rejected() {
        assert_eq!(grid_offsets(0.0, 0.1).unwrap_err().field, "extent");
        assert_eq!(grid_offsets(1.0, -0.1).unwrap_err().field, "resolution");
        assert!(grid_offsets(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn clean_scan_peaks_at_truth() {
        let g = maps::cluttered_office(0.025, 1).hollowed(0.025);
        let df = DistanceField::build(&g, DEFAULT_CLAMP);
        let truth = Pose2D::new(5.0, 5.0, 0.4);
        let lidar = LidarConfig {
            sigma_r: 0.0,
            ..Default::default()
        };
        let scan = cast_scan_at(&g, &[], &truth, &lidar, &mut stream(1, &[]));
        let beams = BeamSet::new(&scan, 1);
        let lg = likelihood_grid(&beams, &truth, &df, &MeasurementConfig::default(), MeasurementMode::Ccmm, 0.5, 0.05).unwrap();
        assert_eq!(lg.side(), 21);
        assert_eq!(lg.argmax(), truth);

        let pgm = lg.to_pgm();
        assert!(pgm.starts_with(b"P5\n21 21\n65535\n"));
        assert_eq!(pgm.len(), b"P5\n21 21\n65535\n".len() + 2 * 21 * 21);
        let csv = lg.to_csv();
        assert_eq!(csv.lines().count(), 1 + 21 * 21);
    }
}
