use std::f64::consts::{PI, TAU};

use crate::geometry::{Point2, Pose2D};
use crate::map::{CellState, DistanceField, OccupancyGrid};

pub const ORIENTATION_BINS: usize = 36;
pub const DESCRIPTOR_BINS: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KeypointKind {
    Maxima,
    Minima,
    Saddle,
}

impl KeypointKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            KeypointKind::Maxima => "maxima",
            KeypointKind::Minima => "minima",
            KeypointKind::Saddle => "saddle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "maxima" => Some(KeypointKind::Maxima),
            "minima" => Some(KeypointKind::Minima),
            "saddle" => Some(KeypointKind::Saddle),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    pub position: Point2,
    pub kind: KeypointKind,
    pub dominant_orientation: f64,
    pub avg_df: f64,
    pub descriptor: [f64; DESCRIPTOR_BINS],
}

impl Keypoint {
    pub fn pose(&self) -> Pose2D {
        Pose2D::new(self.position.x, self.position.y, self.dominant_orientation)
    }
}

/// A detected critical point before description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub cell: (usize, usize),
    pub position: Point2,
    pub kind: KeypointKind,
}

/// Smoothed distance field with its derivatives, ready for detection and
/// description. All derivatives are in meters.
#[derive(Debug, Clone)]
pub struct FeatureField {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: Pose2D,
    pub free: Vec<bool>,
    pub raw: Vec<f64>,
    pub smooth: Vec<f64>,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

fn gaussian_kernel(sigma_cells: f64) -> Vec<f64> {
    let r = (3.0 * sigma_cells).ceil().max(1.0) as i64;
    let k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma_cells * sigma_cells)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian blur with edge replication.
pub fn gaussian_smooth(values: &[f64], width: usize, height: usize, sigma_cells: f64) -> Vec<f64> {
    let k = gaussian_kernel(sigma_cells);
    let r = (k.len() / 2) as i64;
    let mut tmp = vec![0.0; values.len()];
    for y in 0..height {
        let row = &values[y * width..(y + 1) * width];
        for x in 0..width {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                let xi = (x as i64 + j as i64 - r).clamp(0, width as i64 - 1) as usize;
                acc += kv * row[xi];
            }
            tmp[y * width + x] = acc;
        }
    }
    let mut out = vec![0.0; values.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                let yi = (y as i64 + j as i64 - r).clamp(0, height as i64 - 1) as usize;
                acc += kv * tmp[yi * width + x];
            }
            out[y * width + x] = acc;
        }
    }
    out
}

impl FeatureField {
    /// Distance field smoothed with `sigma_smooth` meters by normalized
    /// convolution over free cells only, so unobserved space is treated as
    /// missing data rather than as obstacle or free.
    pub fn from_grid(grid: &OccupancyGrid, sigma_smooth: f64) -> Self {
        let df = DistanceField::build(grid, crate::map::DEFAULT_CLAMP);
        let free = grid.cells().iter().map(|&c| c == CellState::Free).collect();
        Self::from_distance_field(&df, free, sigma_smooth)
    }

    pub fn from_distance_field(df: &DistanceField, free: Vec<bool>, sigma_smooth: f64) -> Self {
        assert!(sigma_smooth > 0.0, "sigma_smooth must be positive");
        let (w, h, res) = (df.width(), df.height(), df.resolution());
        let raw = df.values().to_vec();
        let mask: Vec<f64> = free.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();
        let masked: Vec<f64> = raw.iter().zip(&mask).map(|(d, m)| d * m).collect();
        let num = gaussian_smooth(&masked, w, h, sigma_smooth / res);
        let den = gaussian_smooth(&mask, w, h, sigma_smooth / res);
        let smooth: Vec<f64> = num
            .iter()
            .zip(&den)
            .map(|(n, d)| if *d > 1e-6 { n / d } else { 0.0 })
            .collect();
        let mut gx = vec![0.0; w * h];
        let mut gy = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
                let (yl, yr) = (y.saturating_sub(1), (y + 1).min(h - 1));
                if xr > xl {
                    gx[i] = (smooth[y * w + xr] - smooth[y * w + xl]) / ((xr - xl) as f64 * res);
                }
                if yr > yl {
                    gy[i] = (smooth[yr * w + x] - smooth[yl * w + x]) / ((yr - yl) as f64 * res);
                }
            }
        }
        Self {
            width: w,
            height: h,
            resolution: res,
            origin: df.origin(),
            free,
            raw,
            smooth,
            gx,
            gy,
        }
    }

    fn cell_center(&self, x: usize, y: usize) -> Point2 {
        self.origin.transform_point(Point2::new(
            (x as f64 + 0.5) * self.resolution,
            (y as f64 + 0.5) * self.resolution,
        ))
    }

    /// World angle of the grid-frame gradient at cell `i`.
    fn gradient_angle(&self, i: usize) -> f64 {
        self.gy[i].atan2(self.gx[i]) + self.origin.theta
    }

    /// Critical points of the smoothed field on free cells: cells whose
    /// Newton step to the stationary point stays inside the cell and whose
    /// Hessian eigenvalues both exceed `hess_eps` in magnitude. One point
    /// per kind survives in each 3×3 neighbourhood.
    pub fn detect(&self, hess_eps: f64) -> Vec<CriticalPoint> {
        let (w, h) = (self.width, self.height);
        if w < 3 || h < 3 {
            return Vec::new();
        }
        let s = &self.smooth;
        let r = self.resolution;
        let mut found: Vec<Option<(KeypointKind, f64)>> = vec![None; w * h];
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let i = y * w + x;
                if !self.free[i] {
                    continue;
                }
                let (gx, gy) = (self.gx[i], self.gy[i]);
                let hxx = (s[i + 1] - 2.0 * s[i] + s[i - 1]) / (r * r);
                let hyy = (s[i + w] - 2.0 * s[i] + s[i - w]) / (r * r);
                let hxy = (s[i + w + 1] - s[i + w - 1] - s[i - w + 1] + s[i - w - 1]) / (4.0 * r * r);
                let det = hxx * hyy - hxy * hxy;
                let half_tr = 0.5 * (hxx + hyy);
                let disc = (half_tr * half_tr - det).max(0.0).sqrt();
                let (l1, l2) = (half_tr - disc, half_tr + disc);
                if l1.abs() < hess_eps || l2.abs() < hess_eps {
                    continue;
                }
                // Newton step −H⁻¹g
                let dx = -(hyy * gx - hxy * gy) / det;
                let dy = -(-hxy * gx + hxx * gy) / det;
                // slack so a stationary point on a cell edge is not lost
                if dx.abs() > 0.525 * r || dy.abs() > 0.525 * r {
                    continue;
                }
                let kind = if l2 < 0.0 {
                    KeypointKind::Maxima
                } else if l1 > 0.0 {
                    KeypointKind::Minima
                } else {
                    KeypointKind::Saddle
                };
                found[i] = Some((kind, gx.hypot(gy)));
            }
        }
        let mut out = Vec::new();
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let i = y * w + x;
                let Some((kind, g)) = found[i] else { continue };
                let mut keep = true;
                'nb: for ny in y - 1..=y + 1 {
                    for nx in x - 1..=x + 1 {
                        let j = ny * w + nx;
                        if j == i {
                            continue;
                        }
                        if let Some((k2, g2)) = found[j] {
                            if k2 == kind && (g2 < g || (g2 == g && j < i)) {
                                keep = false;
                                break 'nb;
                            }
                        }
                    }
                }
                if keep {
                    out.push(CriticalPoint {
                        cell: (x, y),
                        position: self.cell_center(x, y),
                        kind,
                    });
                }
            }
        }
        out
    }

    /// `(dominant_orientation, avg_df, descriptor)` over the free cells of a
    /// circular window of diameter `window` around `cell`.
    pub fn describe(
        &self,
        cell: (usize, usize),
        window: f64,
        grad_eps: f64,
    ) -> Option<(f64, f64, [f64; DESCRIPTOR_BINS])> {
        let w = self.width;
        let rad = 0.5 * window / self.resolution;
        let ri = rad.ceil() as i64;
        let (cx, cy) = (cell.0 as i64, cell.1 as i64);
        let mut cells = Vec::new();
        for y in (cy - ri).max(0)..=(cy + ri).min(self.height as i64 - 1) {
            for x in (cx - ri).max(0)..=(cx + ri).min(w as i64 - 1) {
                let (dx, dy) = ((x - cx) as f64, (y - cy) as f64);
                if dx * dx + dy * dy > rad * rad {
                    continue;
                }
                let i = y as usize * w + x as usize;
                if self.free[i] {
                    cells.push(i);
                }
            }
        }
        if cells.is_empty() {
            return None;
        }
        let avg_df = cells.iter().map(|&i| self.raw[i]).sum::<f64>() / cells.len() as f64;

        let bw = TAU / ORIENTATION_BINS as f64;
        let mut hist = [0.0; ORIENTATION_BINS];
        for &i in &cells {
            let m = self.gx[i].hypot(self.gy[i]);
            if m < grad_eps {
                continue;
            }
            let f = self.gradient_angle(i).rem_euclid(TAU) / bw - 0.5;
            let b0 = f.floor();
            let t = f - b0;
            let b0 = (b0 as i64).rem_euclid(ORIENTATION_BINS as i64) as usize;
            hist[b0] += m * (1.0 - t);
            hist[(b0 + 1) % ORIENTATION_BINS] += m * t;
        }
        let best = (0..ORIENTATION_BINS).fold(0, |b, i| if hist[i] > hist[b] { i } else { b });
        let dominant = crate::geometry::normalize_angle((best as f64 + 0.5) * bw);

        let rel_bw = TAU / (DESCRIPTOR_BINS - 1) as f64;
        let mut desc = [0.0; DESCRIPTOR_BINS];
        for &i in &cells {
            if self.gx[i].hypot(self.gy[i]) < grad_eps {
                desc[DESCRIPTOR_BINS - 1] += 1.0;
                continue;
            }
            let rel = (self.gradient_angle(i) - dominant).rem_euclid(TAU);
            let b = ((rel / rel_bw) as usize).min(DESCRIPTOR_BINS - 2);
            desc[b] += 1.0;
        }
        let n = cells.len() as f64;
        desc.iter_mut().for_each(|v| *v /= n);
        Some((dominant, avg_df, desc))
    }

    /// Detected and described keypoints; undescribable points are dropped.
    pub fn keypoints(&self, hess_eps: f64, window: f64, grad_eps: f64) -> Vec<Keypoint> {
        self.detect(hess_eps)
            .into_iter()
            .filter_map(|c| {
                let (dominant_orientation, avg_df, descriptor) = self.describe(c.cell, window, grad_eps)?;
                Some(Keypoint {
                    position: c.position,
                    kind: c.kind,
                    dominant_orientation,
                    avg_df,
                    descriptor,
                })
            })
            .collect()
    }
}

/// Angular width of one orientation-histogram bin.
pub const ORIENTATION_BIN_WIDTH: f64 = 2.0 * PI / ORIENTATION_BINS as f64;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::maps::{corridor_cross, fill_rect};

    fn disc_room(res: f64) -> OccupancyGrid {
        let n = (8.0 / res) as usize;
        let mut g = OccupancyGrid::new(n, n, res, Pose2D::default(), CellState::Occupied).unwrap();
        for y in 0..n {
            for x in 0..n {
                if g.cell_center(x, y).dist(&Point2::new(4.0, 4.0)) < 3.0 {
                    g.set(x, y, CellState::Free);
                }
            }
        }
        g
    }

    #[test]
    fn circular_room_has_one_central_maximum() {
        let ff = FeatureField::from_grid(&disc_room(0.05), 0.5);
        let kps = ff.detect(0.05);
        assert_eq!(kps.len(), 1, "{kps:?}");
        assert_eq!(kps[0].kind, KeypointKind::Maxima);
        assert!(kps[0].position.dist(&Point2::new(4.0, 4.0)) < 0.1);
    }

    #[test]
    fn fully_occupied_has_no_keypoints() {
        let g = OccupancyGrid::new(40, 40, 0.05, Pose2D::default(), CellState::Occupied).unwrap();
        assert!(FeatureField::from_grid(&g, 0.5).detect(0.05).is_empty());
    }

    /// Independent reference: eigenvalue signs of a directly convolved
    /// field at one cell.
    fn reference_hessian_signs(grid: &OccupancyGrid, sigma: f64, at: (usize, usize)) -> (f64, f64) {
        let (w, h, r) = (grid.width(), grid.height(), grid.resolution());
        // brute-force non-free distance and 2-D Gaussian sum with replicated edges
        let sites: Vec<Point2> = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .filter(|&(x, y)| grid.get(x, y) != CellState::Free)
            .map(|(x, y)| grid.cell_center(x, y))
            .collect();
        let dist = |x: i64, y: i64| -> f64 {
            let (x, y) = (x.clamp(0, w as i64 - 1) as usize, y.clamp(0, h as i64 - 1) as usize);
            let c = grid.cell_center(x, y);
            sites.iter().map(|s| s.dist(&c)).fold(f64::INFINITY, f64::min).min(10.0)
        };
        let sc = sigma / r;
        let rr = (3.0 * sc).ceil() as i64;
        let norm: f64 = (-rr..=rr).map(|i| (-(i * i) as f64 / (2.0 * sc * sc)).exp()).sum();
        let sm = |x: i64, y: i64| -> f64 {
            let mut acc = 0.0;
            for j in -rr..=rr {
                for i in -rr..=rr {
                    let wgt = (-((i * i + j * j) as f64) / (2.0 * sc * sc)).exp();
                    acc += wgt * dist(x + i, y + j);
                }
            }
            acc / (norm * norm)
        };
        let (x, y) = (at.0 as i64, at.1 as i64);
        let c = sm(x, y);
        let hxx = sm(x + 1, y) - 2.0 * c + sm(x - 1, y);
        let hyy = sm(x, y + 1) - 2.0 * c + sm(x, y - 1);
        let hxy = (sm(x + 1, y + 1) - sm(x + 1, y - 1) - sm(x - 1, y + 1) + sm(x - 1, y - 1)) / 4.0;
        let half = 0.5 * (hxx + hyy);
        let d = (half * half - (hxx * hyy - hxy * hxy)).max(0.0).sqrt();
        (half - d, half + d)
    }

    #[test]
    fn cross_junction_classified_like_reference() {
        // coarse grid keeps the brute-force reference cheap
        let g = corridor_cross(0.2);
        let ff = FeatureField::from_grid(&g, 0.5);
        let kps = ff.detect(0.05);
        let near: Vec<_> = kps.iter().filter(|k| k.position.dist(&Point2::new(10.0, 10.0)) < 0.5).collect();
        assert_eq!(near.len(), 1, "{kps:?}");
        let (l1, l2) = reference_hessian_signs(&g, 0.5, near[0].cell);
        let want = if l2 < 0.0 {
            KeypointKind::Maxima
        } else if l1 > 0.0 {
            KeypointKind::Minima
        } else {
            KeypointKind::Saddle
        };
        assert_eq!(near[0].kind, want);
    }

    #[test]
    fn doorway_between_rooms_is_a_saddle() {
        let mut g = OccupancyGrid::new(240, 120, 0.05, Pose2D::default(), CellState::Occupied).unwrap();
        fill_rect(&mut g, 0.5, 0.5, 5.8, 5.5, CellState::Free);
        fill_rect(&mut g, 6.2, 0.5, 11.5, 5.5, CellState::Free);
        fill_rect(&mut g, 5.8, 2.5, 6.2, 3.5, CellState::Free);
        let ff = FeatureField::from_grid(&g, 0.5);
        let kps = ff.detect(0.05);
        let door = kps
            .iter()
            .find(|k| k.position.dist(&Point2::new(6.0, 3.0)) < 0.3)
            .expect("keypoint at doorway");
        assert_eq!(door.kind, KeypointKind::Saddle);
        let maxima = kps.iter().filter(|k| k.kind == KeypointKind::Maxima).count();
        assert!(maxima >= 2);
    }

    #[test]
    fn descriptors_are_normalised() {
        let g = crate::sim::maps::rooms_off_corridor(0.1);
        let ff = FeatureField::from_grid(&g, 0.5);
        let kps = ff.keypoints(0.05, 2.0, 0.01);
        assert!(!kps.is_empty());
        for k in &kps {
            assert!(k.descriptor.iter().all(|&v| v >= 0.0));
            assert!((k.descriptor.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(g.is_free_at(k.position));
        }
    }

    #[test]
    fn flat_field_puts_mass_in_low_gradient_bin() {
        let g = OccupancyGrid::new(60, 60, 0.05, Pose2D::default(), CellState::Free).unwrap();
        let ff = FeatureField::from_grid(&g, 0.5);
        let (_, avg, desc) = ff.describe((30, 30), 2.0, 0.01).unwrap();
        assert_eq!(avg, 10.0);
        assert_eq!(desc[DESCRIPTOR_BINS - 1], 1.0);
    }

    fn rotate90(g: &OccupancyGrid) -> OccupancyGrid {
        // (x, y) -> (H-1-y, x): a +90° rotation of the cell array
        let (w, h) = (g.width(), g.height());
        let mut r = OccupancyGrid::new(h, w, g.resolution(), Pose2D::default(), CellState::Free).unwrap();
        for y in 0..h {
            for x in 0..w {
                r.set(h - 1 - y, x, g.get(x, y));
            }
        }
        r
    }

    #[test]
    fn rotation_shifts_dominant_orientation() {
        let g = crate::sim::maps::rooms_off_corridor(0.1);
        let gr = rotate90(&g);
        let a = FeatureField::from_grid(&g, 0.5);
        let b = FeatureField::from_grid(&gr, 0.5);
        let ka = a.keypoints(0.05, 2.0, 0.01);
        let kb = b.keypoints(0.05, 2.0, 0.01);
        let h = g.height() as f64 * g.resolution();
        let mut checked = 0;
        for k in &ka {
            // rotated position of k
            let p = Point2::new(h - k.position.y, k.position.x);
            let Some(m) = kb.iter().find(|m| m.position.dist(&p) < 1e-6) else { continue };
            assert_eq!(m.kind, k.kind);
            let d = crate::geometry::angle_diff(m.dominant_orientation, k.dominant_orientation + PI / 2.0);
            assert!(d.abs() <= ORIENTATION_BIN_WIDTH + 1e-9, "{d}");
            let l1: f64 = m.descriptor.iter().zip(&k.descriptor).map(|(a, b)| (a - b).abs()).sum();
            assert!(l1 < 0.5, "{l1}");
            checked += 1;
        }
        assert!(checked * 2 >= ka.len(), "{checked} of {}", ka.len());
    }
}
