use crate::geometry::{Point2, Pose2D};
use crate::map::{CellState, OccupancyGrid};

/// Distance along a ray to the first occupied cell (cell-boundary entry),
/// or `None` if nothing is hit within `max_range`. Grid traversal is exact
/// (Amanatides–Woo DDA).
pub fn cast_grid(grid: &OccupancyGrid, from: Point2, angle: f64, max_range: f64) -> Option<f64> {
    let res = grid.resolution();
    let (gx, gy) = grid.world_to_grid(from);
    let a = angle - grid.origin().theta;
    let (dy, dx) = a.sin_cos();
    let (w, h) = (grid.width() as i64, grid.height() as i64);
    let (mut cx, mut cy) = (gx.floor() as i64, gy.floor() as i64);
    let inside = |cx: i64, cy: i64| cx >= 0 && cy >= 0 && cx < w && cy < h;
    if inside(cx, cy) && grid.get(cx as usize, cy as usize) == CellState::Occupied {
        return Some(0.0);
    }
    let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
    // parametric distance (cells) to the next vertical / horizontal boundary
    let t_delta_x = if dx != 0.0 { (1.0 / dx).abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { (1.0 / dy).abs() } else { f64::INFINITY };
    let mut t_max_x = if dx > 0.0 {
        (cx as f64 + 1.0 - gx) * t_delta_x
    } else if dx < 0.0 {
        (gx - cx as f64) * t_delta_x
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy > 0.0 {
        (cy as f64 + 1.0 - gy) * t_delta_y
    } else if dy < 0.0 {
        (gy - cy as f64) * t_delta_y
    } else {
        f64::INFINITY
    };
    let t_limit = max_range / res;
    loop {
        let t = if t_max_x < t_max_y {
            cx += step_x;
            let t = t_max_x;
            t_max_x += t_delta_x;
            t
        } else {
            cy += step_y;
            let t = t_max_y;
            t_max_y += t_delta_y;
            t
        };
        if t > t_limit {
            return None;
        }
        if !inside(cx, cy) {
            // a ray that left the grid can't come back
            let leaving = (cx < 0 && step_x < 0)
                || (cx >= w && step_x > 0)
                || (cy < 0 && step_y < 0)
                || (cy >= h && step_y > 0);
            if leaving {
                return None;
            }
            continue;
        }
        if grid.get(cx as usize, cy as usize) == CellState::Occupied {
            return Some(t * res);
        }
    }
}

/// Ray/circle intersection distance; a ray starting inside hits at 0.
pub fn cast_disc(from: Point2, angle: f64, center: Point2, radius: f64) -> Option<f64> {
    let (dy, dx) = angle.sin_cos();
    let (fx, fy) = (from.x - center.x, from.y - center.y);
    let b = fx * dx + fy * dy;
    let c = fx * fx + fy * fy - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let (t1, t2) = (-b - sq, -b + sq);
    if t2 < 0.0 {
        None
    } else if t1 < 0.0 {
        Some(0.0)
    } else {
        Some(t1)
    }
}

/// Ray/segment intersection distance.
pub fn cast_segment(from: Point2, angle: f64, a: Point2, b: Point2) -> Option<f64> {
    let (dy, dx) = angle.sin_cos();
    let (ex, ey) = (b.x - a.x, b.y - a.y);
    let denom = dx * ey - dy * ex;
    if denom.abs() < 1e-12 {
        return None;
    }
    let (wx, wy) = (a.x - from.x, a.y - from.y);
    let t = (wx * ey - wy * ex) / denom;
    let s = (wx * dy - wy * dx) / denom;
    (t >= 0.0 && (0.0..=1.0).contains(&s)).then_some(t)
}

/// Obstacle geometry at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Disc { center: Point2, radius: f64 },
    Segment { a: Point2, b: Point2 },
}

impl Shape {
    pub fn cast(&self, from: Point2, angle: f64) -> Option<f64> {
        match *self {
            Shape::Disc { center, radius } => cast_disc(from, angle, center, radius),
            Shape::Segment { a, b } => cast_segment(from, angle, a, b),
        }
    }

    /// Whether this shape covers a point, with `margin` of inflation.
    pub fn contains(&self, p: Point2, margin: f64) -> bool {
        match *self {
            Shape::Disc { center, radius } => center.dist(&p) <= radius + margin,
            Shape::Segment { a, b } => {
                let (ex, ey) = (b.x - a.x, b.y - a.y);
                let l2 = ex * ex + ey * ey;
                let s = if l2 > 0.0 {
                    (((p.x - a.x) * ex + (p.y - a.y) * ey) / l2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                Point2::new(a.x + s * ex, a.y + s * ey).dist(&p) <= margin
            }
        }
    }
}

/// First hit among the static map and `shapes`, or `None`.
pub fn cast_ray(
    grid: &OccupancyGrid,
    shapes: &[Shape],
    from: Point2,
    angle: f64,
    max_range: f64,
) -> Option<f64> {
    let mut best = cast_grid(grid, from, angle, max_range);
    for s in shapes {
        if let Some(t) = s.cast(from, angle) {
            if t <= max_range && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        }
    }
    best
}

/// Sensor pose in the world frame.
pub fn sensor_pose(robot: &Pose2D, offset: &Pose2D) -> Pose2D {
    robot.compose(offset)
}
