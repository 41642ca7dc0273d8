//! Uniform Cartesian mesh on the unit square.
//!
//! Cells are indexed `(i, j)` with `i` along x and `j` along y, both 0-based,
//! and stored with `i` running fastest. Interfaces are listed as interior
//! vertical edges, interior horizontal edges, then boundary edges on the left,
//! right, bottom and top sides, each group in lexicographic order.

use std::ops::Range;

use crate::error::{Error, Result};

/// One of the four edges of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn outward_normal(self) -> (f64, f64) {
        match self {
            Side::Left => (-1.0, 0.0),
            Side::Right => (1.0, 0.0),
            Side::Bottom => (0.0, -1.0),
            Side::Top => (0.0, 1.0),
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
            Side::Bottom => Side::Top,
            Side::Top => Side::Bottom,
        }
    }

    /// 0-based basis indices anchored on this edge.
    pub fn centered_range(self, m: usize) -> Range<usize> {
        let start = match self {
            Side::Left => 0,
            Side::Right => 2 * m,
            Side::Bottom => 4 * m,
            Side::Top => 6 * m,
        };
        start..start + 2 * m
    }

    /// Edge midpoint in cell-local coordinates for spacing `h`.
    pub fn local_midpoint(self, h: f64) -> (f64, f64) {
        match self {
            Side::Left => (0.0, 0.5 * h),
            Side::Right => (h, 0.5 * h),
            Side::Bottom => (0.5 * h, 0.0),
            Side::Top => (0.5 * h, h),
        }
    }
}

/// Partition of a cell's `8M` basis indices relative to one of its edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisPartition {
    pub centered: Vec<usize>,
    pub opposite: Vec<usize>,
    pub perpendicular: Vec<usize>,
}

/// Splits `0..8M` into the indices centered on `side`, on the facing edge,
/// and on the two perpendicular edges.
pub fn partition_basis(side: Side, m: usize) -> BasisPartition {
    let centered: Vec<usize> = side.centered_range(m).collect();
    let opposite: Vec<usize> = side.opposite().centered_range(m).collect();
    let perpendicular = (0..8 * m)
        .filter(|k| !centered.contains(k) && !opposite.contains(k))
        .collect();
    BasisPartition {
        centered,
        opposite,
        perpendicular,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
    pub x_l: f64,
    pub x_r: f64,
    pub y_b: f64,
    pub y_t: f64,
}

impl Cell {
    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x_l + self.x_r), 0.5 * (self.y_b + self.y_t))
    }

    /// Offsets of `(x, y)` from the lower-left corner, or an error when the
    /// point lies outside the closed cell (with a small round-off allowance).
    pub fn local(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let h = self.x_r - self.x_l;
        let tol = 1e-12 * h.max(1.0);
        if x < self.x_l - tol || x > self.x_r + tol || y < self.y_b - tol || y > self.y_t + tol {
            return Err(Error::PointOutsideCell {
                x,
                y,
                i: self.i,
                j: self.j,
            });
        }
        Ok(((x - self.x_l).clamp(0.0, h), (y - self.y_b).clamp(0.0, h)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Vertical,
    Horizontal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterfaceKind {
    /// Shared edge; `minus` is the left (or lower) cell.
    Interior { minus: usize, plus: usize },
    /// Edge on the domain boundary, given as the owning cell and its side.
    Boundary { cell: usize, side: Side },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interface {
    pub id: usize,
    pub orientation: Orientation,
    pub midpoint: (f64, f64),
    pub kind: InterfaceKind,
}

impl Interface {
    pub fn is_boundary(&self) -> bool {
        matches!(self.kind, InterfaceKind::Boundary { .. })
    }

    /// `(cell, side of that cell)` pairs touching this interface, minus first.
    pub fn adjacent(&self) -> Vec<(usize, Side)> {
        match self.kind {
            InterfaceKind::Interior { minus, plus } => match self.orientation {
                Orientation::Vertical => vec![(minus, Side::Right), (plus, Side::Left)],
                Orientation::Horizontal => vec![(minus, Side::Top), (plus, Side::Bottom)],
            },
            InterfaceKind::Boundary { cell, side } => vec![(cell, side)],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    n: usize,
    h: f64,
    cells: Vec<Cell>,
    interfaces: Vec<Interface>,
}

impl Mesh {
    /// `I x I` cells over `[0,1]^2`.
    pub fn new(cells_per_side: usize) -> Result<Self> {
        if cells_per_side == 0 {
            return Err(Error::InvalidParameter {
                name: "I",
                reason: "mesh needs at least one cell per side".into(),
            });
        }
        let n = cells_per_side;
        let h = 1.0 / n as f64;
        let coord = |k: usize| k as f64 / n as f64;
        let mut cells = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                cells.push(Cell {
                    i,
                    j,
                    x_l: coord(i),
                    x_r: coord(i + 1),
                    y_b: coord(j),
                    y_t: coord(j + 1),
                });
            }
        }
        let idx = |i: usize, j: usize| j * n + i;
        let mid = |k: usize| (k as f64 + 0.5) / n as f64;
        let mut interfaces = Vec::with_capacity(2 * n * (n - 1) + 4 * n);
        let mut push = |orientation, midpoint, kind| {
            let id = interfaces.len();
            interfaces.push(Interface {
                id,
                orientation,
                midpoint,
                kind,
            });
        };
        for j in 0..n {
            for i in 0..n - 1 {
                push(
                    Orientation::Vertical,
                    (coord(i + 1), mid(j)),
                    InterfaceKind::Interior {
                        minus: idx(i, j),
                        plus: idx(i + 1, j),
                    },
                );
            }
        }
        for j in 0..n - 1 {
            for i in 0..n {
                push(
                    Orientation::Horizontal,
                    (mid(i), coord(j + 1)),
                    InterfaceKind::Interior {
                        minus: idx(i, j),
                        plus: idx(i, j + 1),
                    },
                );
            }
        }
        for j in 0..n {
            push(
                Orientation::Vertical,
                (0.0, mid(j)),
                InterfaceKind::Boundary {
                    cell: idx(0, j),
                    side: Side::Left,
                },
            );
        }
        for j in 0..n {
            push(
                Orientation::Vertical,
                (1.0, mid(j)),
                InterfaceKind::Boundary {
                    cell: idx(n - 1, j),
                    side: Side::Right,
                },
            );
        }
        for i in 0..n {
            push(
                Orientation::Horizontal,
                (mid(i), 0.0),
                InterfaceKind::Boundary {
                    cell: idx(i, 0),
                    side: Side::Bottom,
                },
            );
        }
        for i in 0..n {
            push(
                Orientation::Horizontal,
                (mid(i), 1.0),
                InterfaceKind::Boundary {
                    cell: idx(i, n - 1),
                    side: Side::Top,
                },
            );
        }
        Ok(Mesh {
            n,
            h,
            cells,
            interfaces,
        })
    }

    pub fn cells_per_side(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    pub fn interfaces(&self) -> &[Interface] {
        &self.interfaces
    }

    pub fn interior_count(&self) -> usize {
        2 * self.n * (self.n - 1)
    }

    pub fn boundary_count(&self) -> usize {
        4 * self.n
    }

    /// Cell containing `(x, y)`; points on shared edges go to the upper/right
    /// cell except on the domain's top and right sides.
    pub fn locate(&self, x: f64, y: f64) -> Option<usize> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return None;
        }
        let snap = |v: f64| ((v * self.n as f64).floor() as usize).min(self.n - 1);
        Some(self.cell_index(snap(x), snap(y)))
    }

    /// Cell permutation from recursive coordinate bisection: each block lists
    /// its two halves first and the separating line of cells last.
    pub fn dissection_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.cells.len());
        self.dissect(0, self.n, 0, self.n, &mut order);
        order
    }

    fn dissect(&self, i0: usize, i1: usize, j0: usize, j1: usize, out: &mut Vec<usize>) {
        let (wi, wj) = (i1 - i0, j1 - j0);
        if wi == 0 || wj == 0 {
            return;
        }
        if wi * wj <= 4 || (wi < 3 && wj < 3) {
            for j in j0..j1 {
                for i in i0..i1 {
                    out.push(self.cell_index(i, j));
                }
            }
            return;
        }
        if wi >= wj {
            let s = i0 + wi / 2;
            self.dissect(i0, s, j0, j1, out);
            self.dissect(s + 1, i1, j0, j1, out);
            for j in j0..j1 {
                out.push(self.cell_index(s, j));
            }
        } else {
            let s = j0 + wj / 2;
            self.dissect(i0, i1, j0, s, out);
            self.dissect(i0, i1, s + 1, j1, out);
            for i in i0..i1 {
                out.push(self.cell_index(i, s));
            }
        }
    }
}
