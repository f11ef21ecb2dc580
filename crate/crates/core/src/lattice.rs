//! Open-boundary square lattices.
//!
//! Sites are numbered row-major, `index = row * cols + col`, and site `i`
//! is qubit `i` of every statevector in this crate. Bonds are stored as
//! `(min, max)` index pairs sorted lexicographically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default simulability guard on `rows * cols`.
pub const DEFAULT_MAX_SITES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeGeometry {
    rows: usize,
    cols: usize,
    sites: Vec<Site>,
    nn_bonds: Vec<(usize, usize)>,
    nnn_bonds: Vec<(usize, usize)>,
}

/// Builds a `rows x cols` lattice with the default size guard.
pub fn build_lattice(rows: usize, cols: usize) -> Result<LatticeGeometry> {
    LatticeGeometry::with_limit(rows, cols, DEFAULT_MAX_SITES)
}

impl LatticeGeometry {
    pub fn with_limit(rows: usize, cols: usize, max_sites: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "lattice dimensions must be positive, got {rows}x{cols}"
            )));
        }
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::invalid("lattice size overflows"))?;
        if n > max_sites {
            return Err(Error::Capacity {
                what: "lattice sites",
                requested: n,
                limit: max_sites,
            });
        }

        let idx = |r: usize, c: usize| r * cols + c;
        let sites = (0..rows)
            .flat_map(|row| (0..cols).map(move |col| Site { row, col }))
            .collect();

        let mut nn = Vec::new();
        let mut nnn = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    nn.push((idx(r, c), idx(r, c + 1)));
                }
                if r + 1 < rows {
                    nn.push((idx(r, c), idx(r + 1, c)));
                    if c + 1 < cols {
                        nnn.push((idx(r, c), idx(r + 1, c + 1)));
                    }
                    if c >= 1 {
                        nnn.push((idx(r, c), idx(r + 1, c - 1)));
                    }
                }
            }
        }
        nn.sort_unstable();
        nnn.sort_unstable();

        Ok(LatticeGeometry {
            rows,
            cols,
            sites,
            nn_bonds: nn,
            nnn_bonds: nnn,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of sites `L`.
    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, index: usize) -> Site {
        self.sites[index]
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn nn_bonds(&self) -> &[(usize, usize)] {
        &self.nn_bonds
    }

    pub fn nnn_bonds(&self) -> &[(usize, usize)] {
        &self.nnn_bonds
    }

    /// Index of the nearest-neighbour bond joining `a` and `b`, if any.
    pub fn nn_bond_index(&self, a: usize, b: usize) -> Option<usize> {
        let key = (a.min(b), a.max(b));
        self.nn_bonds.binary_search(&key).ok()
    }

    /// Nearest neighbours of a site, ordered up, left, down, right.
    pub fn neighbors(&self, index: usize) -> Vec<usize> {
        let Site { row, col } = self.sites[index];
        let mut out = Vec::with_capacity(4);
        if row > 0 {
            out.push(self.index(row - 1, col));
        }
        if col > 0 {
            out.push(self.index(row, col - 1));
        }
        if row + 1 < self.rows {
            out.push(self.index(row + 1, col));
        }
        if col + 1 < self.cols {
            out.push(self.index(row, col + 1));
        }
        out
    }
}
