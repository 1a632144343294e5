use crate::geometry::{Point2, Pose2D};

/// One planar range scan.
#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub ranges: Vec<f64>,
    pub angle_min: f64,
    pub angle_increment: f64,
    pub range_min: f64,
    pub range_max: f64,
    /// LiDAR pose in the robot frame.
    pub sensor_offset: Pose2D,
}

impl Scan {
    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn beam_angle(&self, k: usize) -> f64 {
        self.angle_min + k as f64 * self.angle_increment
    }

    /// Beams outside `[range_min, range_max]` or non-finite are invalid.
    pub fn is_valid(&self, k: usize) -> bool {
        let r = self.ranges[k];
        r.is_finite() && r >= self.range_min && r <= self.range_max
    }

    /// Beam endpoint in the robot frame.
    pub fn endpoint_robot(&self, k: usize) -> Point2 {
        let (s, c) = self.beam_angle(k).sin_cos();
        let r = self.ranges[k];
        self.sensor_offset.transform_point(Point2::new(r * c, r * s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beam {
    /// Index into the source scan.
    pub index: usize,
    pub range: f64,
    /// Endpoint in the robot frame.
    pub end: Point2,
    pub max_range: bool,
}

/// The valid, strided beams of a scan with robot-frame endpoints cached.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSet {
    pub beams: Vec<Beam>,
    pub range_max: f64,
}

impl BeamSet {
    pub fn new(scan: &Scan, stride: usize) -> Self {
        let stride = stride.max(1);
        let beams = (0..scan.len())
            .step_by(stride)
            .filter(|&k| scan.is_valid(k))
            .map(|k| Beam {
                index: k,
                range: scan.ranges[k],
                end: scan.endpoint_robot(k),
                max_range: scan.ranges[k] >= scan.range_max,
            })
            .collect();
        Self {
            beams,
            range_max: scan.range_max,
        }
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scan() -> Scan {
        Scan {
            ranges: vec![1.0, f64::NAN, 31.0, 30.0, 0.01, 2.0],
            angle_min: -1.0,
            angle_increment: 0.5,
            range_min: 0.05,
            range_max: 30.0,
            sensor_offset: Pose2D::new(0.2, 0.0, 0.0),
        }
    }

    #[test]
    fn invalid_beams_skipped() {
        let s = scan();
        let b = BeamSet::new(&s, 1);
        let idx: Vec<usize> = b.beams.iter().map(|b| b.index).collect();
        assert_eq!(idx, vec![0, 3, 5]);
        assert!(b.beams[1].max_range);
        let b2 = BeamSet::new(&s, 3);
        assert_eq!(b2.beams.iter().map(|b| b.index).collect::<Vec<_>>(), vec![0, 3]);
    }

    #[test]
    fn endpoint_includes_sensor_offset() {
        let s = Scan { angle_min: 0.0, ..scan() };
        let e = s.endpoint_robot(0);
        assert_relative_eq!(e.x, 1.2);
        assert_relative_eq!(e.y, 0.0);
    }
}
