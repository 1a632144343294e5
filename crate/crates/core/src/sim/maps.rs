//! Procedurally generated test worlds.

use rand::Rng as _;

use crate::geometry::Pose2D;
use crate::map::{CellState, OccupancyGrid};
use crate::rng::{self, label};

/// Sets every cell whose center lies in `[x0, x1) × [y0, y1)`.
pub fn fill_rect(g: &mut OccupancyGrid, x0: f64, y0: f64, x1: f64, y1: f64, state: CellState) {
    let res = g.resolution();
    let o = g.origin();
    let cx0 = (((x0 - o.x) / res) - 0.5).ceil().max(0.0) as usize;
    let cy0 = (((y0 - o.y) / res) - 0.5).ceil().max(0.0) as usize;
    let cx1 = ((((x1 - o.x) / res) - 0.5).ceil().max(0.0) as usize).min(g.width());
    let cy1 = ((((y1 - o.y) / res) - 0.5).ceil().max(0.0) as usize).min(g.height());
    for cy in cy0..cy1 {
        for cx in cx0..cx1 {
            g.set(cx, cy, state);
        }
    }
}

fn solid(w_m: f64, h_m: f64, res: f64) -> OccupancyGrid {
    let w = (w_m / res).round() as usize;
    let h = (h_m / res).round() as usize;
    OccupancyGrid::new(w, h, res, Pose2D::default(), CellState::Occupied)
        .expect("procedural map geometry is valid")
}

/// Two 2 m corridors crossing at (10, 10) inside a 20 m × 20 m block.
pub fn corridor_cross(res: f64) -> OccupancyGrid {
    let mut g = solid(20.0, 20.0, res);
    fill_rect(&mut g, 1.0, 9.0, 19.0, 11.0, CellState::Free);
    fill_rect(&mut g, 9.0, 1.0, 11.0, 19.0, CellState::Free);
    g
}

/// A 30 m corridor with rooms of different sizes on both sides, each with
/// a doorway and some furniture.
pub fn rooms_off_corridor(res: f64) -> OccupancyGrid {
    let mut g = solid(32.0, 14.0, res);
    let free = CellState::Free;
    let occ = CellState::Occupied;
    fill_rect(&mut g, 1.0, 6.0, 31.0, 8.0, free);
    // (x0, x1, door_x0) below and above the corridor
    let below = [(1.0, 7.0, 4.5), (7.2, 12.0, 7.8), (12.2, 20.0, 15.0), (20.2, 25.0, 23.4), (25.2, 31.0, 26.0)];
    let above = [(1.0, 5.0, 1.6), (5.2, 13.0, 10.5), (13.2, 18.0, 14.0), (18.2, 26.0, 21.0), (26.2, 31.0, 29.2)];
    for &(x0, x1, d) in &below {
        fill_rect(&mut g, x0, 1.0, x1, 5.8, free);
        fill_rect(&mut g, d, 5.8, d + 1.0, 6.0, free);
    }
    for &(x0, x1, d) in &above {
        fill_rect(&mut g, x0, 8.2, x1, 13.0, free);
        fill_rect(&mut g, d, 8.0, d + 1.0, 8.2, free);
    }
    // furniture
    for &(x0, y0, x1, y1) in &[
        (2.0, 1.5, 3.5, 2.3),
        (9.0, 3.0, 10.0, 4.0),
        (16.0, 1.0, 19.0, 1.6),
        (13.0, 4.0, 13.6, 4.6),
        (22.0, 2.0, 22.5, 4.5),
        (28.5, 3.5, 30.0, 5.0),
        (2.5, 11.5, 4.0, 13.0),
        (7.0, 10.0, 8.5, 11.0),
        (11.5, 12.0, 13.0, 13.0),
        (15.0, 10.0, 16.0, 10.6),
        (19.0, 9.0, 19.8, 12.0),
        (23.5, 11.0, 25.0, 12.2),
        (27.0, 9.5, 27.8, 10.3),
    ] {
        fill_rect(&mut g, x0, y0, x1, y1, occ);
    }
    g
}

/// A 16 m × 12 m room with seeded random boxes and two partial partitions.
pub fn cluttered_office(res: f64, seed: u64) -> OccupancyGrid {
    let mut g = solid(18.0, 14.0, res);
    fill_rect(&mut g, 1.0, 1.0, 17.0, 13.0, CellState::Free);
    fill_rect(&mut g, 6.0, 1.0, 6.2, 6.0, CellState::Occupied);
    fill_rect(&mut g, 11.0, 8.0, 17.0, 8.2, CellState::Occupied);
    let mut r = rng::stream(seed, &[label::SCENE, 0x6f66_6669_6365]);
    let mut placed = 0;
    while placed < 14 {
        let w: f64 = r.random_range(0.3..1.2);
        let h: f64 = r.random_range(0.3..1.2);
        let x: f64 = r.random_range(1.5..(16.5 - w));
        let y: f64 = r.random_range(1.5..(12.5 - h));
        // leave a clear ring around the room center for starting poses
        if (x - 9.0).abs() < 1.5 && (y - 7.0).abs() < 1.5 {
            continue;
        }
        fill_rect(&mut g, x, y, x + w, y + h, CellState::Occupied);
        placed += 1;
    }
    g
}

/// A 58 m corridor (y ∈ [9, 11]) with alcove doorways every 3.1 m, north
/// of which lies a large hall. Poses 3 m apart along the corridor look
/// almost alike to a sensor that cannot see the corridor ends.
pub fn aliased_corridor(res: f64) -> OccupancyGrid {
    let free = CellState::Free;
    let mut g = solid(60.0, 60.0, res);
    fill_rect(&mut g, 1.0, 9.0, 59.0, 11.0, free);
    let mut x = 2.0;
    while x < 57.0 {
        fill_rect(&mut g, x, 11.0, x + 1.0, 11.2, free);
        fill_rect(&mut g, x - 0.5, 11.2, x + 1.5, 12.5, free);
        x += 3.1;
    }
    fill_rect(&mut g, 1.0, 14.0, 59.0, 59.0, free);
    g
}

/// Looks up a bundled map by name.
pub fn by_name(name: &str, res: f64, seed: u64) -> Option<OccupancyGrid> {
    match name {
        "corridor_cross" | "cross" => Some(corridor_cross(res)),
        "rooms_off_corridor" | "rooms" => Some(rooms_off_corridor(res)),
        "cluttered_office" | "office" => Some(cluttered_office(res, seed)),
        "aliased_corridor" | "aliased" => Some(aliased_corridor(res)),
        _ => None,
    }
}

pub const BUNDLED: [&str; 4] = ["corridor_cross", "rooms_off_corridor", "cluttered_office", "aliased_corridor"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    #[test]
    fn cross_geometry() {
        let g = corridor_cross(0.05);
        assert_eq!((g.width(), g.height()), (400, 400));
        assert!(g.is_free_at(Point2::new(10.0, 10.0)));
        assert!(g.is_free_at(Point2::new(2.0, 10.0)));
        assert!(!g.is_free_at(Point2::new(2.0, 2.0)));
    }

    #[test]
    fn rooms_connected_through_doors() {
        let g = rooms_off_corridor(0.05);
        assert!(g.is_free_at(Point2::new(5.0, 5.9)));
        assert!(!g.is_free_at(Point2::new(3.0, 5.9)));
        assert!(g.is_free_at(Point2::new(11.0, 8.1)));
    }

    #[test]
    fn aliased_corridor_alcoves_are_periodic() {
        let g = aliased_corridor(0.05);
        assert!(g.is_free_at(Point2::new(2.5, 11.1)));
        assert!(g.is_free_at(Point2::new(5.6, 11.1)));
        assert!(!g.is_free_at(Point2::new(4.0, 11.1)));
        // the hall is walled off from the corridor
        assert!(!g.is_free_at(Point2::new(10.0, 13.0)));
        assert!(g.is_free_at(Point2::new(10.0, 30.0)));
    }

    #[test]
    fn office_is_seeded() {
        assert_eq!(cluttered_office(0.1, 3), cluttered_office(0.1, 3));
        assert_ne!(cluttered_office(0.1, 3), cluttered_office(0.1, 4));
        assert!(cluttered_office(0.1, 3).is_free_at(Point2::new(9.0, 7.0)));
    }
}
