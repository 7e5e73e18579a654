use serde::{Deserialize, Serialize};

use super::pose::{Point2, Pose2D};

/// Binary occupancy grid. Cell `(i, j)` has column `i` and row `j`; row 0 is at the origin
/// (bottom) and the cell centre sits at `origin ⊕ ((i + ½)·res, (j + ½)·res)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: Pose2D,
    pub cells: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("grid resolution must be positive, got {0}")]
    Resolution(f64),
    #[error("grid is {width}x{height} but holds {cells} cells")]
    CellCount {
        width: usize,
        height: usize,
        cells: usize,
    },
    #[error("row {row} has length {len}, expected {width}")]
    RowLength { row: usize, len: usize, width: usize },
    #[error("unexpected character {ch:?} in row {row}")]
    BadChar { row: usize, ch: char },
}

impl OccupancyGrid {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose2D,
        cells: Vec<bool>,
    ) -> Result<Self, GridError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(GridError::Resolution(resolution));
        }
        if width * height != cells.len() {
            return Err(GridError::CellCount {
                width,
                height,
                cells: cells.len(),
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

    pub fn empty(width: usize, height: usize, resolution: f64) -> Self {
        Self::new(width, height, resolution, Pose2D::identity(), vec![false; width * height])
            .expect("valid empty grid")
    }

    /// Parses `#`/`.` rows, first row on top.
    pub fn from_rows<S: AsRef<str>>(
        rows: &[S],
        resolution: f64,
        origin: Pose2D,
    ) -> Result<Self, GridError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().chars().count());
        let mut cells = vec![false; width * height];
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            let len = row.chars().count();
            if len != width {
                return Err(GridError::RowLength { row: r, len, width });
            }
            let j = height - 1 - r;
            for (i, ch) in row.chars().enumerate() {
                cells[j * width + i] = match ch {
                    '#' => true,
                    '.' => false,
                    _ => return Err(GridError::BadChar { row: r, ch }),
                };
            }
        }
        Self::new(width, height, resolution, origin, cells)
    }

    pub fn to_rows(&self) -> Vec<String> {
        (0..self.height)
            .rev()
            .map(|j| {
                (0..self.width)
                    .map(|i| if self.cells[j * self.width + i] { '#' } else { '.' })
                    .collect()
            })
            .collect()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    #[inline]
    pub fn in_bounds(&self, i: i64, j: i64) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.width && (j as usize) < self.height
    }

    /// Out-of-bounds cells count as occupied.
    #[inline]
    pub fn occupied(&self, i: i64, j: i64) -> bool {
        !self.in_bounds(i, j) || self.cells[self.index(i as usize, j as usize)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        let k = self.index(i, j);
        self.cells[k] = value;
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// World point → continuous grid coordinates (cell units, not floored).
    #[inline]
    pub fn to_grid_coords(&self, p: Point2) -> Point2 {
        let local = (p - self.origin.position()).rotate(-self.origin.theta);
        Point2::new(local.x / self.resolution, local.y / self.resolution)
    }

    #[inline]
    pub fn world_to_cell(&self, p: Point2) -> (i64, i64) {
        let g = self.to_grid_coords(p);
        (g.x.floor() as i64, g.y.floor() as i64)
    }

    pub fn cell_center(&self, i: i64, j: i64) -> Point2 {
        let local = Point2::new(
            (i as f64 + 0.5) * self.resolution,
            (j as f64 + 0.5) * self.resolution,
        );
        self.origin.apply(local)
    }

    pub fn is_free_at(&self, p: Point2) -> bool {
        let (i, j) = self.world_to_cell(p);
        !self.occupied(i, j)
    }
}

/// Distance from a point to the axis-aligned unit square `[i, i+1] × [j, j+1]`, all in cell units.
#[inline]
pub fn dist_to_cell(gx: f64, gy: f64, i: i64, j: i64) -> f64 {
    let dx = (i as f64 - gx).max(gx - (i + 1) as f64).max(0.0);
    let dy = (j as f64 - gy).max(gy - (j + 1) as f64).max(0.0);
    dx.hypot(dy)
}

/// Marks every cell whose centre lies within `radius` of an occupied cell's area.
pub fn inflate_grid(g: &OccupancyGrid, radius: f64) -> OccupancyGrid {
    let mut out = g.clone();
    if radius <= 0.0 {
        return out;
    }
    let r = radius / g.resolution;
    let reach = r.ceil() as i64 + 1;
    for j in 0..g.height as i64 {
        for i in 0..g.width as i64 {
            if !g.cells[g.index(i as usize, j as usize)] {
                continue;
            }
            for dj in -reach..=reach {
                for di in -reach..=reach {
                    let (ni, nj) = (i + di, j + dj);
                    if !g.in_bounds(ni, nj) {
                        continue;
                    }
                    let k = g.index(ni as usize, nj as usize);
                    if out.cells[k] {
                        continue;
                    }
                    if dist_to_cell(ni as f64 + 0.5, nj as f64 + 0.5, i, j) <= r + 1e-9 {
                        out.cells[k] = true;
                    }
                }
            }
        }
    }
    out
}

/// Grid serialized in the scene-file layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridFile {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: Pose2D,
    pub rows: Vec<String>,
}

impl TryFrom<GridFile> for OccupancyGrid {
    type Error = GridError;
    fn try_from(f: GridFile) -> Result<Self, GridError> {
        let g = OccupancyGrid::from_rows(&f.rows, f.resolution, f.origin)?;
        if g.width != f.width || g.height != f.height {
            return Err(GridError::CellCount {
                width: f.width,
                height: f.height,
                cells: g.cells.len(),
            });
        }
        Ok(g)
    }
}

impl From<&OccupancyGrid> for GridFile {
    fn from(g: &OccupancyGrid) -> Self {
        GridFile {
            width: g.width,
            height: g.height,
            resolution: g.resolution,
            origin: g.origin,
            rows: g.to_rows(),
        }
    }
}
