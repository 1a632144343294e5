use crate::geometry::{Point2, Pose2D};
use crate::map::{DistanceField, MapError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellState {
    Free,
    Occupied,
    Unknown,
}

/// Tri-state occupancy grid. Cell `(0, 0)` is the lower-left cell; `origin`
/// is the world pose of its lower-left corner. Storage is row-major with
/// rows ordered by increasing world y.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Pose2D,
    cells: Vec<CellState>,
}

impl OccupancyGrid {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose2D,
        fill: CellState,
    ) -> Result<Self, MapError> {
        Self::from_cells(width, height, resolution, origin, vec![fill; width * height])
    }

    pub fn from_cells(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose2D,
        cells: Vec<CellState>,
    ) -> Result<Self, MapError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(MapError::InvalidGeometry(format!(
                "resolution must be > 0, got {resolution}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(MapError::InvalidGeometry(format!(
                "grid must be non-empty, got {width}x{height}"
            )));
        }
        if cells.len() != width * height {
            return Err(MapError::DimensionMismatch {
                expected: width * height,
                found: cells.len(),
            });
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            cells,
        })
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

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    #[inline]
    pub fn index(&self, cx: usize, cy: usize) -> usize {
        cy * self.width + cx
    }

    #[inline]
    pub fn get(&self, cx: usize, cy: usize) -> CellState {
        self.cells[self.index(cx, cy)]
    }

    pub fn set(&mut self, cx: usize, cy: usize, state: CellState) {
        let i = self.index(cx, cy);
        self.cells[i] = state;
    }

    /// Continuous grid coordinates (in cells) of a world point.
    #[inline]
    pub fn world_to_grid(&self, p: Point2) -> (f64, f64) {
        let (x, y) = if self.origin.theta == 0.0 {
            (p.x - self.origin.x, p.y - self.origin.y)
        } else {
            let l = self.origin.inverse().transform_point(p);
            (l.x, l.y)
        };
        (x / self.resolution, y / self.resolution)
    }

    /// Cell containing a world point, if inside the grid.
    #[inline]
    pub fn world_to_cell(&self, p: Point2) -> Option<(usize, usize)> {
        let (gx, gy) = self.world_to_grid(p);
        let (fx, fy) = (gx.floor(), gy.floor());
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn cell_center(&self, cx: usize, cy: usize) -> Point2 {
        let local = Point2::new(
            (cx as f64 + 0.5) * self.resolution,
            (cy as f64 + 0.5) * self.resolution,
        );
        self.origin.transform_point(local)
    }

    pub fn state_at(&self, p: Point2) -> Option<CellState> {
        self.world_to_cell(p).map(|(cx, cy)| self.get(cx, cy))
    }

    pub fn is_free_at(&self, p: Point2) -> bool {
        self.state_at(p) == Some(CellState::Free)
    }

    pub fn free_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == CellState::Free)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|s| **s == state).count()
    }

    /// Free-space area in m².
    pub fn free_area(&self) -> f64 {
        self.count(CellState::Free) as f64 * self.resolution * self.resolution
    }

    /// World-frame axis-aligned bounds `(min, max)` of the grid extent.
    pub fn world_bounds(&self) -> (Point2, Point2) {
        let w = self.width as f64 * self.resolution;
        let h = self.height as f64 * self.resolution;
        let corners = [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)]
            .map(|(x, y)| self.origin.transform_point(Point2::new(x, y)));
        let min = Point2::new(
            corners.iter().map(|p| p.x).fold(f64::INFINITY, f64::min),
            corners.iter().map(|p| p.y).fold(f64::INFINITY, f64::min),
        );
        let max = Point2::new(
            corners.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max),
            corners.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max),
        );
        (min, max)
    }

    /// Coarser grid with `factor × factor` blocks: occupied if any cell is,
    /// else free if any cell is, else unknown.
    pub fn downsample(&self, factor: usize) -> OccupancyGrid {
        let f = factor.max(1);
        if f == 1 {
            return self.clone();
        }
        let (w, h) = (self.width.div_ceil(f), self.height.div_ceil(f));
        let mut cells = vec![CellState::Unknown; w * h];
        for y in 0..self.height {
            for x in 0..self.width {
                let c = &mut cells[(y / f) * w + x / f];
                match (self.get(x, y), *c) {
                    (CellState::Occupied, _) => *c = CellState::Occupied,
                    (CellState::Free, CellState::Unknown) => *c = CellState::Free,
                    _ => {}
                }
            }
        }
        OccupancyGrid {
            width: w,
            height: h,
            resolution: self.resolution * f as f64,
            origin: self.origin,
            cells,
        }
    }

    /// Copy in which occupied cells farther than `thickness` from any free
    /// cell become unknown, as in a scanned map where only wall surfaces
    /// are observed.
    pub fn hollowed(&self, thickness: f64) -> OccupancyGrid {
        let to_free = DistanceField::build_from(self, thickness + self.resolution, |s| s == CellState::Free);
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) == CellState::Occupied && to_free.at(x, y) > thickness + 1e-9 {
                    out.set(x, y, CellState::Unknown);
                }
            }
        }
        out
    }

    /// FNV-1a over geometry and cell states; identifies a map for caches.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |b: u8| {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        };
        for b in (self.width as u64).to_le_bytes() {
            eat(b);
        }
        for b in (self.height as u64).to_le_bytes() {
            eat(b);
        }
        for v in [self.resolution, self.origin.x, self.origin.y, self.origin.theta] {
            for b in v.to_bits().to_le_bytes() {
                eat(b);
            }
        }
        for s in &self.cells {
            eat(*s as u8);
        }
        h
    }
}
