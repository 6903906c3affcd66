//! Open rectangular lattice and its snake mapping onto a 1D chain.
//!
//! Tensor-network code in this crate is strictly one-dimensional; the 2D
//! lattice enters only through (a) the order in which sites are placed
//! along the chain and (b) the list of nearest-neighbour bonds expressed
//! in chain indices. Sites are ordered boustrophedon ("snake"): row 0
//! runs left to right, row 1 right to left, and so on. Horizontal bonds
//! then connect chain neighbours, while vertical bonds reach at most
//! `2*cols - 1` sites along the chain.

use crate::error::{Error, Result};

/// An open `rows x cols` rectangular lattice.
///
/// Both extents are at least 1; a `rows x 1` or `1 x cols` geometry is an
/// ordinary open chain. The struct is plain data and is freely copied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeGeometry {
    rows: usize,
    cols: usize,
}

impl LatticeGeometry {
    /// Create a geometry with `rows * cols` sites.
    ///
    /// Errors if either extent is zero.
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "lattice extents must be positive, got {rows} x {cols}"
            )));
        }
        Ok(LatticeGeometry { rows, cols })
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Total number of sites.
    pub fn n_sites(&self) -> usize {
        self.rows * self.cols
    }

    /// Short label such as `"3x4"`, used in file headers and CSV rows.
    pub fn label(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    /// Chain index of the site at (`row`, `col`) under snake ordering.
    ///
    /// Even rows run left to right, odd rows right to left, so the chain
    /// walks the lattice without ever jumping more than one site.
    pub fn snake_index(&self, row: usize, col: usize) -> Result<usize> {
        if row >= self.rows || col >= self.cols {
            return Err(Error::invalid(format!(
                "site ({row}, {col}) outside {} lattice",
                self.label()
            )));
        }
        let along = if row % 2 == 0 { col } else { self.cols - 1 - col };
        Ok(row * self.cols + along)
    }

    /// Inverse of [`snake_index`](Self::snake_index): 2D coordinates of a
    /// chain site.
    pub fn site_coords(&self, site: usize) -> Result<(usize, usize)> {
        if site >= self.n_sites() {
            return Err(Error::invalid(format!(
                "chain index {site} outside {} lattice",
                self.label()
            )));
        }
        let row = site / self.cols;
        let along = site % self.cols;
        let col = if row % 2 == 0 { along } else { self.cols - 1 - along };
        Ok((row, col))
    }

    /// All nearest-neighbour bonds as chain-index pairs `(a, b)` with
    /// `a < b`.
    ///
    /// Each unordered pair appears exactly once. The list is generated in
    /// a fixed 2D scan order, so it is deterministic for a given geometry.
    /// An `n`-site lattice with open boundaries yields
    /// `rows*(cols-1) + (rows-1)*cols` bonds.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.rows * (self.cols - 1) + (self.rows - 1) * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let here = self.snake_index(r, c).expect("in range");
                if c + 1 < self.cols {
                    let right = self.snake_index(r, c + 1).expect("in range");
                    out.push((here.min(right), here.max(right)));
                }
                if r + 1 < self.rows {
                    let below = self.snake_index(r + 1, c).expect("in range");
                    out.push((here.min(below), here.max(below)));
                }
            }
        }
        out
    }

    /// Chain indices of the 2–4 nearest neighbours of `site`, in a fixed
    /// (up, down, left, right) 2D order.
    pub fn neighbors(&self, site: usize) -> Result<Vec<usize>> {
        let (r, c) = self.site_coords(site)?;
        let mut out = Vec::with_capacity(4);
        if r > 0 {
            out.push(self.snake_index(r - 1, c)?);
        }
        if r + 1 < self.rows {
            out.push(self.snake_index(r + 1, c)?);
        }
        if c > 0 {
            out.push(self.snake_index(r, c - 1)?);
        }
        if c + 1 < self.cols {
            out.push(self.snake_index(r, c + 1)?);
        }
        Ok(out)
    }
}
