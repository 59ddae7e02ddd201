//! Spatial-pyramid geometry: quad-tree cell rectangles per level and the
//! per-level weights shared by all three descriptors.
//!
//! Level `l` partitions the image into `4^l` cells. Cell boundaries are
//! placed at `floor(c * extent / 2^l)` so that the cells of one level tile
//! the image exactly for any extent, with at most one pixel of size
//! variance between cells.

use crate::error::{Error, Result};

/// Pyramid configuration. `levels` is the highest level L; the pyramid
/// contains levels `0..=L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PyramidParams {
    pub levels: u32,
}

impl Default for PyramidParams {
    fn default() -> Self {
        PyramidParams { levels: 2 }
    }
}

/// One cell of the quad-tree partition. Pixel coordinates, half-open:
/// `x0 <= x < x1`, `y0 <= y < y1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub level: u32,
}

impl CellRect {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn area(&self) -> usize {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// The `4^l` cells of level `l`, in row-major cell order.
pub fn cell_rects(width: usize, height: usize, level: u32) -> Result<Vec<CellRect>> {
    let n = 1usize << level; // cells per side
    if width < n || height < n {
        return Err(Error::ImageTooSmallForLevel { width, height, level });
    }
    let col_bound = |c: usize| c * width / n;
    let row_bound = |r: usize| r * height / n;
    let mut cells = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            cells.push(CellRect {
                x0: col_bound(c),
                y0: row_bound(r),
                x1: col_bound(c + 1),
                y1: row_bound(r + 1),
                level,
            });
        }
    }
    Ok(cells)
}

/// Index of the cell of `level` containing pixel `(x, y)`.
///
/// Matches the boundaries produced by [`cell_rects`]: returns `row * 2^l + col`
/// where `col` is the largest `c` with `floor(c*width/2^l) <= x`.
pub fn cell_index(width: usize, height: usize, level: u32, x: usize, y: usize) -> usize {
    let n = 1usize << level;
    let find = |v: usize, extent: usize| -> usize {
        // candidate from the inverse map, then correct for flooring
        let mut c = (v * n / extent).min(n - 1);
        while c > 0 && c * extent / n > v {
            c -= 1;
        }
        while c + 1 < n && (c + 1) * extent / n <= v {
            c += 1;
        }
        c
    };
    let col = find(x, width);
    let row = find(y, height);
    row * n + col
}

/// Level weight: `1/2^L` for level 0, `1/2^(L-l+1)` for `l > 0`.
/// The weights over `0..=L` sum to exactly 1.
pub fn level_weight(level: u32, highest: u32) -> Result<f64> {
    if level > highest {
        return Err(Error::LevelOutOfRange { level, highest });
    }
    let exp = if level == 0 { highest } else { highest - level + 1 };
    Ok(1.0 / (1u64 << exp) as f64)
}

/// Total concatenated dimension: `per_cell_dim * sum_{l=0..=L} 4^l`.
pub fn pyramid_dim(per_cell_dim: usize, highest: u32) -> usize {
    let cells: usize = (0..=highest).map(|l| 1usize << (2 * l)).sum();
    per_cell_dim * cells
}
