use std::collections::VecDeque;

use crate::geometry::{Point2, Pose2D};
use crate::map::{CellState, OccupancyGrid};
use crate::models::Scan;

/// Accumulates the most recent scans at their odometry-frame poses.
#[derive(Debug, Clone)]
pub struct ScanHistory {
    capacity: usize,
    entries: VecDeque<(Pose2D, Scan)>,
}

impl ScanHistory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            entries: VecDeque::new(),
        }
    }

    pub fn push(&mut self, odom_pose: Pose2D, scan: Scan) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((odom_pose, scan));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn latest_pose(&self) -> Option<Pose2D> {
        self.entries.back().map(|(p, _)| *p)
    }

    pub fn entries(&self) -> impl Iterator<Item = &(Pose2D, Scan)> {
        self.entries.iter()
    }
}

/// Visits the cells crossed by the segment `a → b` in grid coordinates,
/// excluding the cell containing `b`.
fn for_cells_between(a: (f64, f64), b: (f64, f64), mut f: impl FnMut(i64, i64)) {
    let (mut cx, mut cy) = (a.0.floor() as i64, a.1.floor() as i64);
    let (ex, ey) = (b.0.floor() as i64, b.1.floor() as i64);
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
    let tdx = if dx != 0.0 { (1.0 / dx).abs() } else { f64::INFINITY };
    let tdy = if dy != 0.0 { (1.0 / dy).abs() } else { f64::INFINITY };
    let mut tmx = if dx > 0.0 {
        (cx as f64 + 1.0 - a.0) * tdx
    } else if dx < 0.0 {
        (a.0 - cx as f64) * tdx
    } else {
        f64::INFINITY
    };
    let mut tmy = if dy > 0.0 {
        (cy as f64 + 1.0 - a.1) * tdy
    } else if dy < 0.0 {
        (a.1 - cy as f64) * tdy
    } else {
        f64::INFINITY
    };
    let max_steps = (ex - cx).abs() + (ey - cy).abs() + 2;
    for _ in 0..max_steps {
        if cx == ex && cy == ey {
            return;
        }
        f(cx, cy);
        if tmx < tmy {
            if tmx > 1.0 {
                return;
            }
            cx += step_x;
            tmx += tdx;
        } else {
            if tmy > 1.0 {
                return;
            }
            cy += step_y;
            tmy += tdy;
        }
    }
}

/// Occupancy grid in the odometry frame built from the history by endpoint
/// marking and free-space carving, limited to `max_range` around each scan.
/// Returns the grid and the latest odometry pose.
pub fn build_local_map(history: &ScanHistory, resolution: f64, max_range: f64) -> Option<(OccupancyGrid, Pose2D)> {
    let current = history.latest_pose()?;
    let (mut lo, mut hi) = (
        Point2::new(f64::INFINITY, f64::INFINITY),
        Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
    );
    for (p, _) in history.entries() {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let pad = max_range + 2.0 * resolution;
    let origin = Pose2D::new(
        ((lo.x - pad) / resolution).floor() * resolution,
        ((lo.y - pad) / resolution).floor() * resolution,
        0.0,
    );
    let w = (((hi.x + pad - origin.x) / resolution).ceil() as usize).max(1);
    let h = (((hi.y + pad - origin.y) / resolution).ceil() as usize).max(1);
    let mut hits = vec![0u32; w * h];
    let mut passes = vec![0u32; w * h];
    let to_grid = |p: Point2| ((p.x - origin.x) / resolution, (p.y - origin.y) / resolution);
    let inside = |x: i64, y: i64| x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h;
    for (pose, scan) in history.entries() {
        let sensor = pose.compose(&scan.sensor_offset);
        let a = to_grid(sensor.position());
        for k in 0..scan.len() {
            if !scan.is_valid(k) {
                continue;
            }
            let r = scan.ranges[k];
            let hit = r < scan.range_max && r <= max_range;
            let reach = r.min(max_range);
            let ang = sensor.theta + scan.beam_angle(k);
            let end = Point2::new(sensor.x + reach * ang.cos(), sensor.y + reach * ang.sin());
            let b = to_grid(end);
            for_cells_between(a, b, |x, y| {
                if inside(x, y) {
                    passes[y as usize * w + x as usize] += 1;
                }
            });
            let (bx, by) = (b.0.floor() as i64, b.1.floor() as i64);
            if inside(bx, by) {
                let i = by as usize * w + bx as usize;
                if hit {
                    hits[i] += 1;
                } else {
                    passes[i] += 1;
                }
            }
        }
    }
    let cells = hits
        .iter()
        .zip(&passes)
        .map(|(&hc, &pc)| {
            if hc > 0 && 3 * hc >= pc {
                CellState::Occupied
            } else if pc > 0 {
                CellState::Free
            } else {
                CellState::Unknown
            }
        })
        .collect();
    let grid = OccupancyGrid::from_cells(w, h, resolution, origin, cells).ok()?;
    Some((grid, current))
}
