use std::f64::consts::SQRT_2;

use super::grid::{dist_to_cell, OccupancyGrid};
use super::pose::Point2;

/// Occupancy grid plus an exact Euclidean distance transform used to skip most per-cell checks.
#[derive(Debug, Clone)]
pub struct CollisionMap {
    grid: OccupancyGrid,
    /// Metres from each cell centre to the nearest occupied cell centre (grid border counts as occupied).
    dist: Vec<f64>,
}

impl CollisionMap {
    pub fn new(grid: OccupancyGrid) -> Self {
        let dist = distance_transform(&grid);
        Self { grid, dist }
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    /// Approximate clearance at `p`: distance from its cell centre to the nearest occupied centre.
    pub fn clearance(&self, p: Point2) -> f64 {
        let (i, j) = self.grid.world_to_cell(p);
        if !self.grid.in_bounds(i, j) {
            return 0.0;
        }
        self.dist[self.grid.index(i as usize, j as usize)]
    }

    /// True if a disc of `radius` around `c` overlaps any occupied cell.
    pub fn disc_hits(&self, c: Point2, radius: f64) -> bool {
        let res = self.grid.resolution;
        if self.clearance(c) - SQRT_2 * res >= radius {
            return false;
        }
        let g = self.grid.to_grid_coords(c);
        let r = radius / res;
        let (i0, i1) = ((g.x - r).floor() as i64, (g.x + r).floor() as i64);
        let (j0, j1) = ((g.y - r).floor() as i64, (g.y + r).floor() as i64);
        for j in j0..=j1 {
            for i in i0..=i1 {
                if self.grid.occupied(i, j) && dist_to_cell(g.x, g.y, i, j) < r {
                    return true;
                }
            }
        }
        false
    }

    /// True if the convex polygon (world coordinates) overlaps any occupied cell.
    pub fn polygon_hits(&self, poly: &[Point2]) -> bool {
        if poly.is_empty() {
            return false;
        }
        let res = self.grid.resolution;
        let n = poly.len() as f64;
        let centroid = poly.iter().fold(Point2::default(), |a, &p| a + p) * (1.0 / n);
        let reach = poly.iter().map(|p| p.distance(centroid)).fold(0.0, f64::max);
        if self.clearance(centroid) - SQRT_2 * res >= reach {
            return false;
        }
        let gp: Vec<Point2> = poly.iter().map(|&p| self.grid.to_grid_coords(p)).collect();
        let (mut lo, mut hi) = (gp[0], gp[0]);
        for p in &gp {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        for j in lo.y.floor() as i64..=hi.y.floor() as i64 {
            for i in lo.x.floor() as i64..=hi.x.floor() as i64 {
                if self.grid.occupied(i, j) && convex_overlaps_cell(&gp, i, j) {
                    return true;
                }
            }
        }
        false
    }
}

/// Separating-axis test between a convex polygon and the unit square at `(i, j)` (grid units).
/// Touching boundaries do not count as overlap.
pub fn convex_overlaps_cell(poly: &[Point2], i: i64, j: i64) -> bool {
    let square = [
        Point2::new(i as f64, j as f64),
        Point2::new((i + 1) as f64, j as f64),
        Point2::new((i + 1) as f64, (j + 1) as f64),
        Point2::new(i as f64, (j + 1) as f64),
    ];
    let mut axes = vec![Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
    for k in 0..poly.len() {
        let e = poly[(k + 1) % poly.len()] - poly[k];
        if e.norm() > 1e-12 {
            axes.push(Point2::new(-e.y, e.x));
        }
    }
    axes.iter().all(|&a| {
        let (amin, amax) = project(poly, a);
        let (bmin, bmax) = project(&square, a);
        amax > bmin && bmax > amin
    })
}

fn project(pts: &[Point2], axis: Point2) -> (f64, f64) {
    pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let d = p.dot(axis);
        (lo.min(d), hi.max(d))
    })
}

/// Exact squared-EDT (lower envelope of parabolas), separable over rows then columns.
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let inf = f64::INFINITY;
    // Skip leading cells with infinite cost; parabolas from them never win.
    let mut started = false;
    for q in 0..n {
        if f[q] == inf {
            continue;
        }
        if !started {
            v[0] = q;
            started = true;
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * q as f64 - 2.0 * p as f64);
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    if !started {
        out.iter_mut().for_each(|o| *o = inf);
        return;
    }
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

fn distance_transform(g: &OccupancyGrid) -> Vec<f64> {
    // Pad by one ring of occupied cells so map edges behave like walls.
    let (w, h) = (g.width + 2, g.height + 2);
    let mut f = vec![f64::INFINITY; w * h];
    for j in 0..h {
        for i in 0..w {
            let border = i == 0 || j == 0 || i == w - 1 || j == h - 1;
            if border || g.cells[g.index(i - 1, j - 1)] {
                f[j * w + i] = 0.0;
            }
        }
    }
    let mut col = vec![0.0; h];
    let mut col_out = vec![0.0; h];
    for i in 0..w {
        for j in 0..h {
            col[j] = f[j * w + i];
        }
        edt_1d(&col, &mut col_out);
        for j in 0..h {
            f[j * w + i] = col_out[j];
        }
    }
    let mut row_out = vec![0.0; w];
    for j in 0..h {
        edt_1d(&f[j * w..(j + 1) * w], &mut row_out);
        f[j * w..(j + 1) * w].copy_from_slice(&row_out);
    }
    let mut out = vec![0.0; g.width * g.height];
    for j in 0..g.height {
        for i in 0..g.width {
            out[g.index(i, j)] = f[(j + 1) * w + (i + 1)].sqrt() * g.resolution;
        }
    }
    out
}
