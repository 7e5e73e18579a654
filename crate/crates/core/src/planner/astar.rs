use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::world::{OccupancyGrid, Point2, Pose2D};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub cells: Vec<(usize, usize)>,
    pub waypoints: Vec<Point2>,
    /// Length in metres.
    pub cost: f64,
    pub straight_steps: u32,
    pub diagonal_steps: u32,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("start cell is occupied or outside the map")]
    StartOccupied,
    #[error("goal cell is occupied after inflation")]
    GoalOccupied,
    #[error("no path between start and goal")]
    NoPath,
}

/// Exact step cost as (straight, diagonal) counts; its value is `s + d·√2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepCount {
    pub straight: u32,
    pub diagonal: u32,
}

impl StepCount {
    pub fn value(self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * SQRT_2
    }
}

pub const MOVES: [(i64, i64); 8] = [(1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, 1), (-1, -1), (1, -1)];

/// Free 8-neighbours. Diagonal moves may not cut past an occupied orthogonal neighbour.
pub fn neighbors(g: &OccupancyGrid, i: i64, j: i64) -> impl Iterator<Item = (i64, i64, bool)> + '_ {
    MOVES.iter().filter_map(move |&(di, dj)| {
        let (ni, nj) = (i + di, j + dj);
        if g.occupied(ni, nj) {
            return None;
        }
        let diag = di != 0 && dj != 0;
        if diag && (g.occupied(i + di, j) || g.occupied(i, j + dj)) {
            return None;
        }
        Some((ni, nj, diag))
    })
}

fn octile(a: (i64, i64), b: (i64, i64)) -> f64 {
    let dx = (a.0 - b.0).abs() as f64;
    let dy = (a.1 - b.1).abs() as f64;
    dx.max(dy) + (SQRT_2 - 1.0) * dx.min(dy)
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    h: f64,
    seq: u64,
    cell: usize,
}

impl Eq for Open {}

impl Ord for Open {
    // Min-heap on f, then h, then insertion order.
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f)
            .then_with(|| o.h.total_cmp(&self.h))
            .then_with(|| o.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// 8-connected A* with the octile heuristic on an (already inflated) grid.
pub fn plan_global(grid: &OccupancyGrid, start: &Pose2D, goal: &Pose2D) -> Result<Path, PlanError> {
    let s = grid.world_to_cell(start.position());
    let t = grid.world_to_cell(goal.position());
    if grid.occupied(s.0, s.1) {
        return Err(PlanError::StartOccupied);
    }
    if grid.occupied(t.0, t.1) {
        return Err(PlanError::GoalOccupied);
    }
    plan_cells(grid, s, t)
}

pub fn plan_cells(grid: &OccupancyGrid, s: (i64, i64), t: (i64, i64)) -> Result<Path, PlanError> {
    let n = grid.width * grid.height;
    let idx = |c: (i64, i64)| grid.index(c.0 as usize, c.1 as usize);
    let mut g: Vec<Option<StepCount>> = vec![None; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    g[idx(s)] = Some(StepCount::default());
    heap.push(Open { f: octile(s, t), h: octile(s, t), seq, cell: idx(s) });
    let goal = idx(t);
    while let Some(Open { cell, .. }) = heap.pop() {
        if closed[cell] {
            continue;
        }
        closed[cell] = true;
        if cell == goal {
            break;
        }
        let c = ((cell % grid.width) as i64, (cell / grid.width) as i64);
        let gc = g[cell].expect("expanded cells have a cost");
        for (ni, nj, diag) in neighbors(grid, c.0, c.1) {
            let k = idx((ni, nj));
            if closed[k] {
                continue;
            }
            let mut cand = gc;
            if diag {
                cand.diagonal += 1;
            } else {
                cand.straight += 1;
            }
            if g[k].is_none_or(|old| cand.value() < old.value()) {
                g[k] = Some(cand);
                parent[k] = cell;
                let h = octile((ni, nj), t);
                seq += 1;
                heap.push(Open { f: cand.value() + h, h, seq, cell: k });
            }
        }
    }
    let Some(total) = g[goal].filter(|_| closed[goal]) else {
        return Err(PlanError::NoPath);
    };
    let mut cells = vec![goal];
    while let Some(&last) = cells.last() {
        if parent[last] == usize::MAX {
            break;
        }
        cells.push(parent[last]);
    }
    cells.reverse();
    let cells: Vec<(usize, usize)> = cells.iter().map(|&k| (k % grid.width, k / grid.width)).collect();
    let waypoints = cells.iter().map(|&(i, j)| grid.cell_center(i as i64, j as i64)).collect();
    Ok(Path {
        cells,
        waypoints,
        cost: total.value() * grid.resolution,
        straight_steps: total.straight,
        diagonal_steps: total.diagonal,
    })
}

impl Path {
    /// Walks forward from `from` while waypoints stay within `lookahead` of `p`; returns the last
    /// one reached. Later stretches of the path that happen to pass nearby are not considered.
    pub fn carrot_index(&self, from: usize, p: Point2, lookahead: f64) -> usize {
        let mut best = from.min(self.waypoints.len().saturating_sub(1));
        for k in best + 1..self.waypoints.len() {
            if self.waypoints[k].distance(p) > lookahead {
                break;
            }
            best = k;
        }
        best
    }

    /// Index of the waypoint nearest to `p` among the next `window` waypoints after `from`.
    pub fn progress_index(&self, from: usize, p: Point2, window: usize) -> usize {
        let end = (from + window + 1).min(self.waypoints.len());
        (from..end)
            .min_by(|&a, &b| self.waypoints[a].distance(p).total_cmp(&self.waypoints[b].distance(p)))
            .unwrap_or(from)
    }
}
