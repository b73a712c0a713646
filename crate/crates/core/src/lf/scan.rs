use alloc::vec;
use alloc::vec::Vec;

use super::LfError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanEntry {
    pub poc: usize,
    pub s: usize,
    pub t: usize,
}

/// Frame order of a light field linearised into a pseudo-video sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoSequence {
    grid_s: usize,
    grid_t: usize,
    order: Vec<ScanEntry>,
    // (s, t) -> poc
    inverse: Vec<usize>,
}

impl PseudoSequence {
    /// Wraps an explicit order; it must visit every cell exactly once.
    pub fn from_cells(grid_s: usize, grid_t: usize, cells: &[(usize, usize)]) -> Result<Self, LfError> {
        if grid_s == 0 || grid_t == 0 || cells.len() != grid_s * grid_t {
            return Err(LfError::InvalidGrid(grid_s, grid_t));
        }
        let mut inverse = vec![usize::MAX; grid_s * grid_t];
        let mut order = Vec::with_capacity(cells.len());
        for (poc, &(s, t)) in cells.iter().enumerate() {
            if s >= grid_s || t >= grid_t || inverse[s * grid_t + t] != usize::MAX {
                return Err(LfError::InvalidGrid(grid_s, grid_t));
            }
            inverse[s * grid_t + t] = poc;
            order.push(ScanEntry { poc, s, t });
        }
        Ok(Self { grid_s, grid_t, order, inverse })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.grid_s, self.grid_t)
    }

    pub fn entries(&self) -> &[ScanEntry] {
        &self.order
    }

    /// Grid cell coded at `poc`.
    pub fn cell(&self, poc: usize) -> (usize, usize) {
        let e = self.order[poc];
        (e.s, e.t)
    }

    pub fn poc_of(&self, s: usize, t: usize) -> usize {
        self.inverse[s * self.grid_t + t]
    }
}

/// Spiral scan starting at the (upper-left) centre cell, moving right first
/// and turning clockwise with arm lengths 1, 1, 2, 2, 3, 3, ...
/// Cells outside the grid are skipped.
pub fn spiral_scan(grid_s: usize, grid_t: usize) -> Result<PseudoSequence, LfError> {
    if grid_s == 0 || grid_t == 0 {
        return Err(LfError::InvalidGrid(grid_s, grid_t));
    }
    let total = grid_s * grid_t;
    let mut cells = Vec::with_capacity(total);
    let mut s = (grid_s as i64 + 1) / 2 - 1;
    let mut t = (grid_t as i64 + 1) / 2 - 1;
    cells.push((s as usize, t as usize));

    // right, down, left, up
    const DIRS: [(i64, i64); 4] = [(0, 1), (1, 0), (0, -1), (-1, 0)];
    let mut arm = 1;
    let mut dir = 0;
    while cells.len() < total {
        for _ in 0..2 {
            let (ds, dt) = DIRS[dir % 4];
            for _ in 0..arm {
                s += ds;
                t += dt;
                if s >= 0 && t >= 0 && (s as usize) < grid_s && (t as usize) < grid_t {
                    cells.push((s as usize, t as usize));
                }
            }
            dir += 1;
        }
        arm += 1;
    }
    PseudoSequence::from_cells(grid_s, grid_t, &cells)
}
