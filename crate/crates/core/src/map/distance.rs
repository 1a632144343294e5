use crate::geometry::{Point2, Pose2D};
use crate::map::{CellState, OccupancyGrid};

/// Default saturation distance in meters.
pub const DEFAULT_CLAMP: f64 = 10.0;

/// Per-cell Euclidean distance (meters) to the nearest occupied cell center,
/// saturated at `clamp`. Unknown cells count as non-occupied.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Pose2D,
    clamp: f64,
    dist: Vec<f64>,
}

/// Exact 1-D squared distance transform (lower envelope of parabolas).
/// `f[i]` is the squared distance seed at `i` (0 for sites, infinity
/// elsewhere); writes `min_j (i - j)² + f[j]` into `out`.
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    v.clear();
    z.clear();
    for (q, &fq) in f.iter().enumerate() {
        if !fq.is_finite() {
            continue;
        }
        let qf = q as f64;
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let pf = p as f64;
                    let s = ((fq + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf));
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while k + 1 < v.len() && z[k + 1] < qf {
            k += 1;
        }
        let d = qf - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared distances in cell units for an arbitrary site mask.
fn squared_edt(width: usize, height: usize, site: impl Fn(usize) -> bool) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..width * height)
        .map(|i| if site(i) { 0.0 } else { f64::INFINITY })
        .collect();
    let (mut v, mut z) = (Vec::new(), Vec::new());
    let mut col = vec![0.0; height];
    let mut col_out = vec![0.0; height];
    for x in 0..width {
        for y in 0..height {
            col[y] = grid[y * width + x];
        }
        edt_1d(&col, &mut col_out, &mut v, &mut z);
        for y in 0..height {
            grid[y * width + x] = col_out[y];
        }
    }
    let mut row_out = vec![0.0; width];
    for y in 0..height {
        let row = &grid[y * width..(y + 1) * width];
        edt_1d(row, &mut row_out, &mut v, &mut z);
        grid[y * width..(y + 1) * width].copy_from_slice(&row_out);
    }
    grid
}

impl DistanceField {
    pub fn build(grid: &OccupancyGrid, clamp: f64) -> Self {
        Self::build_from(grid, clamp, |s| s == CellState::Occupied)
    }

    /// Distance to the nearest cell that is not free (occupied or unknown).
    pub fn build_non_free(grid: &OccupancyGrid, clamp: f64) -> Self {
        Self::build_from(grid, clamp, |s| s != CellState::Free)
    }

    pub(crate) fn build_from(grid: &OccupancyGrid, clamp: f64, site: impl Fn(CellState) -> bool) -> Self {
        assert!(clamp > 0.0, "distance clamp must be positive");
        let (w, h) = (grid.width(), grid.height());
        let cells = grid.cells();
        let sq = squared_edt(w, h, |i| site(cells[i]));
        let res = grid.resolution();
        let dist = sq
            .into_iter()
            .map(|d2| if d2.is_finite() { (d2.sqrt() * res).min(clamp) } else { clamp })
            .collect();
        Self {
            width: w,
            height: h,
            resolution: res,
            origin: grid.origin(),
            clamp,
            dist,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Pose2D {
        self.origin
    }

    pub fn clamp(&self) -> f64 {
        self.clamp
    }

    pub fn values(&self) -> &[f64] {
        &self.dist
    }

    #[inline]
    pub fn at(&self, cx: usize, cy: usize) -> f64 {
        self.dist[cy * self.width + cx]
    }

    /// Nearest-cell lookup; points outside the grid read as `clamp`.
    #[inline]
    pub fn lookup(&self, p: Point2) -> f64 {
        let (mut x, mut y) = (p.x - self.origin.x, p.y - self.origin.y);
        if self.origin.theta != 0.0 {
            let (s, c) = self.origin.theta.sin_cos();
            (x, y) = (c * x + s * y, -s * x + c * y);
        }
        let gx = (x / self.resolution).floor();
        let gy = (y / self.resolution).floor();
        if gx < 0.0 || gy < 0.0 || gx >= self.width as f64 || gy >= self.height as f64 {
            return self.clamp;
        }
        self.dist[gy as usize * self.width + gx as usize]
    }
}
