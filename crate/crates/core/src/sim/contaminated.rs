use rand::Rng as _;

use crate::geometry::{Point2, Pose2D};
use crate::map::{DistanceField, OccupancyGrid};
use crate::models::Scan;
use crate::rng::{label, stream, Rng};
use crate::sim::raycast::Shape;
use crate::sim::{cast_scan_at, LidarConfig, ROBOT_RADIUS};

/// A static scene in which unmapped discs occlude part of the scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ContaminatedScene {
    pub pose: Pose2D,
    pub shapes: Vec<Shape>,
    /// Noisy scan including the unmapped discs.
    pub scan: Scan,
    /// Fraction of beams whose noise-free range the discs shorten.
    pub contaminated_fraction: f64,
}

/// Beams shortened by at least this much count as contaminated, m.
const CONTAMINATION_MARGIN: f64 = 0.05;

fn contaminated_fraction(clean: &Scan, dirty: &Scan) -> f64 {
    if clean.is_empty() {
        return 0.0;
    }
    let n = clean
        .ranges
        .iter()
        .zip(&dirty.ranges)
        .filter(|(c, d)| *d + CONTAMINATION_MARGIN < **c)
        .count();
    n as f64 / clean.len() as f64
}

/// Adds discs in front of `pose` until `target ± tolerance` of the
/// noise-free beams are shortened; `None` when 40 tries fall short.
fn place_discs(
    grid: &OccupancyGrid,
    exact: &LidarConfig,
    pose: &Pose2D,
    target: f64,
    tolerance: f64,
    rng: &mut Rng,
) -> Option<(Vec<Shape>, f64)> {
    let clean = cast_scan_at(grid, &[], pose, exact, rng);
    let mut shapes = Vec::new();
    let mut frac = 0.0;
    for _ in 0..40 {
        if frac >= target - tolerance {
            break;
        }
        let d = rng.random_range(0.8..4.0);
        let a = pose.theta + rng.random_range(-0.5 * exact.fov..0.5 * exact.fov);
        let center = Point2::new(pose.x + d * a.cos(), pose.y + d * a.sin());
        let radius = rng.random_range(0.15..0.4);
        if !grid.is_free_at(center) || center.dist(&pose.position()) < radius + ROBOT_RADIUS {
            continue;
        }
        shapes.push(Shape::Disc { center, radius });
        let dirty = cast_scan_at(grid, &shapes, pose, exact, rng);
        let f = contaminated_fraction(&clean, &dirty);
        if f > target + tolerance {
            shapes.pop();
        } else {
            frac = f;
        }
    }
    ((frac - target).abs() <= tolerance).then_some((shapes, frac))
}

fn finish(grid: &OccupancyGrid, lidar: &LidarConfig, pose: Pose2D, shapes: Vec<Shape>, frac: f64, seed: u64) -> ContaminatedScene {
    let mut scan_rng = stream(seed, &[label::SCAN, 0x6c6b]);
    let scan = cast_scan_at(grid, &shapes, &pose, lidar, &mut scan_rng);
    ContaminatedScene {
        pose,
        shapes,
        scan,
        contaminated_fraction: frac,
    }
}

/// Places a robot with at least `clearance` to the walls and adds discs
/// until `target ± tolerance` of the beams are contaminated. `None` when
/// no such scene is found.
pub fn contaminated_scene(
    grid: &OccupancyGrid,
    df: &DistanceField,
    lidar: &LidarConfig,
    target: f64,
    tolerance: f64,
    clearance: f64,
    seed: u64,
) -> Option<ContaminatedScene> {
    let cells: Vec<(usize, usize)> = grid.free_cells().filter(|&(x, y)| df.at(x, y) >= clearance).collect();
    if cells.is_empty() || !(0.0..1.0).contains(&target) {
        return None;
    }
    let mut rng = stream(seed, &[label::SCENE, 0x6c6b]);
    let exact = LidarConfig { sigma_r: 0.0, ..*lidar };
    for _ in 0..200 {
        let (cx, cy) = cells[rng.random_range(0..cells.len())];
        let c = grid.cell_center(cx, cy);
        let pose = Pose2D::new(c.x, c.y, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
        if let Some((shapes, frac)) = place_discs(grid, &exact, &pose, target, tolerance, &mut rng) {
            return Some(finish(grid, lidar, pose, shapes, frac, seed));
        }
    }
    None
}

/// Like [`contaminated_scene`] with the robot fixed at `pose`.
pub fn contaminated_scene_at(
    grid: &OccupancyGrid,
    lidar: &LidarConfig,
    pose: Pose2D,
    target: f64,
    tolerance: f64,
    seed: u64,
) -> Option<ContaminatedScene> {
    if !grid.is_free_at(pose.position()) || !(0.0..1.0).contains(&target) {
        return None;
    }
    let mut rng = stream(seed, &[label::SCENE, 0x6c6b]);
    let exact = LidarConfig { sigma_r: 0.0, ..*lidar };
    (0..20)
        .find_map(|_| place_discs(grid, &exact, &pose, target, tolerance, &mut rng))
        .map(|(shapes, frac)| finish(grid, lidar, pose, shapes, frac, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::DEFAULT_CLAMP;
    use crate::sim::maps;

    #[test]
    fn hits_target_fraction_and_is_seeded() {
        let g = maps::cluttered_office(0.05, 1);
        let df = DistanceField::build(&g, DEFAULT_CLAMP);
        let lidar = LidarConfig::default();
        let a = contaminated_scene(&g, &df, &lidar, 0.3, 0.05, 0.5, 7).unwrap();
        assert!((a.contaminated_fraction - 0.3).abs() <= 0.05, "{}", a.contaminated_fraction);
        assert!(!a.shapes.is_empty());
        assert_eq!(a, contaminated_scene(&g, &df, &lidar, 0.3, 0.05, 0.5, 7).unwrap());
    }

    #[test]
    fn fixed_pose_scene() {
        let g = maps::cluttered_office(0.05, 1);
        let pose = Pose2D::new(9.0, 7.0, 0.3);
        let s = contaminated_scene_at(&g, &LidarConfig::default(), pose, 0.3, 0.05, 2).unwrap();
        assert_eq!(s.pose, pose);
        assert!((s.contaminated_fraction - 0.3).abs() <= 0.05);
        assert!(contaminated_scene_at(&g, &LidarConfig::default(), Pose2D::new(0.2, 0.2, 0.0), 0.3, 0.05, 2).is_none());
    }

    #[test]
    fn full_occupancy_has_no_scene() {
        let g = OccupancyGrid::new(20, 20, 0.1, Pose2D::default(), crate::map::CellState::Occupied).unwrap();
        let df = DistanceField::build(&g, DEFAULT_CLAMP);
        assert!(contaminated_scene(&g, &df, &LidarConfig::default(), 0.3, 0.05, 0.5, 1).is_none());
    }
}
