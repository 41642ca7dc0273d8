//! Assembly of the interface and boundary conditions into sparse systems.
//!
//! Every system here is built from one routine: at an interface, each basis
//! function of the adjacent cells is evaluated at the edge midpoint,
//! restricted to the interface ordinates, and mapped through a row operator
//! `P`. The full scheme uses `P = I` (componentwise continuity and inflow
//! conditions). The adaptive scheme uses the selected rows of `E^{-1}` and only
//! selected basis functions. The projected full system uses the selected rows
//! of `E^{-1}` together with generator coordinates for the unselected rows, and
//! keeps every basis function.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::angular::QuadratureSet;
use crate::error::{Error, Result};
use crate::linsolve::CsrMatrix;
use crate::local_basis::{special_solution, CellBasis, CellMedium};
use crate::mesh::{Interface, InterfaceKind, Mesh};
use crate::problems::BoundaryData;
use crate::reduction::{InterfaceSpace, Selection};

/// An assembled square system with its row and column bookkeeping.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Column -> `(cell, k)`.
    pub unknowns: Vec<(usize, usize)>,
    /// Row -> `(interface, local index)`; the local index is an ordinate
    /// position for the full system and a mode position otherwise.
    pub constraints: Vec<(usize, usize)>,
    /// First column of each cell.
    pub cell_offsets: Vec<usize>,
}

impl SparseSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// Column order grouping cells by the mesh's nested dissection.
    pub fn dissection_columns(&self, mesh: &Mesh) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.dim());
        for c in mesh.dissection_order() {
            order.extend(self.cell_offsets[c]..self.cell_offsets[c + 1]);
        }
        order
    }

    /// Coefficients grouped per cell, in selection order.
    pub fn split_by_cell(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (0..self.cell_offsets.len() - 1)
            .map(|c| x[self.cell_offsets[c]..self.cell_offsets[c + 1]].to_vec())
            .collect()
    }

    /// `(interface, cell)` blocks that hold at least one nonzero, sorted.
    pub fn block_pattern(&self) -> Vec<(usize, usize)> {
        let mut blocks = Vec::new();
        for r in 0..self.matrix.nrows() {
            let f = self.constraints[r].0;
            for (c, _) in self.matrix.row(r) {
                blocks.push((f, self.unknowns[c].0));
            }
        }
        blocks.sort();
        blocks.dedup();
        blocks
    }

    pub fn write_matrix_market<W: Write>(&self, out: W) -> std::io::Result<()> {
        self.matrix.write_matrix_market(out)
    }

    /// Right-hand side, one value per line.
    pub fn write_rhs<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for v in &self.rhs {
            writeln!(out, "{v:.17e}")?;
        }
        Ok(())
    }
}

struct Block {
    triplets: Vec<(usize, usize, f64)>,
    rhs: Vec<f64>,
}

/// Everything the per-interface row builder needs.
struct Context<'a> {
    bases: &'a [CellBasis],
    media: &'a [CellMedium],
    boundary: &'a BoundaryData,
    /// Per cell: `(k, column)` pairs taking part in the system.
    columns: &'a [Vec<(usize, usize)>],
}

impl Context<'_> {
    fn block(&self, iface: &Interface, ordinates: &[usize], proj: &DMatrix<f64>) -> Result<Block> {
        let dim = ordinates.len();
        let rows = proj.nrows();
        let mut triplets = Vec::new();
        let mut v = DVector::zeros(dim);
        for (n, (cell, side)) in iface.adjacent().into_iter().enumerate() {
            let sign = if n == 0 { 1.0 } else { -1.0 };
            let basis = &self.bases[cell];
            let (dx, dy) = side.local_midpoint(basis.spacing());
            for &(k, col) in &self.columns[cell] {
                let z = basis.zeta(k, dx, dy);
                let xi = basis.xi(k);
                for (r, &m) in ordinates.iter().enumerate() {
                    v[r] = xi[m] * z;
                }
                let y = proj * &v;
                for rr in 0..rows {
                    if y[rr] != 0.0 {
                        triplets.push((rr, col, sign * y[rr]));
                    }
                }
            }
        }
        let source = match iface.kind {
            InterfaceKind::Interior { minus, plus } => {
                let jump = special_solution(&self.media[plus])? - special_solution(&self.media[minus])?;
                DVector::from_element(dim, jump)
            }
            InterfaceKind::Boundary { cell, .. } => {
                let s = special_solution(&self.media[cell])?;
                let data = self.boundary.values(iface.id);
                if data.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: data.len(),
                    });
                }
                DVector::from_iterator(dim, data.iter().map(|v| v - s))
            }
        };
        let rhs = (proj * source).as_slice().to_vec();
        Ok(Block { triplets, rhs })
    }
}

fn column_lists(selection: &Selection) -> (Vec<Vec<(usize, usize)>>, Vec<(usize, usize)>, Vec<usize>) {
    let mut lists = Vec::with_capacity(selection.cells());
    let mut unknowns = Vec::with_capacity(selection.total());
    let mut offsets = Vec::with_capacity(selection.cells() + 1);
    for c in 0..selection.cells() {
        offsets.push(unknowns.len());
        let list: Vec<(usize, usize)> = selection
            .selected(c)
            .iter()
            .map(|&k| {
                unknowns.push((c, k));
                (k, unknowns.len() - 1)
            })
            .collect();
        lists.push(list);
    }
    offsets.push(unknowns.len());
    (lists, unknowns, offsets)
}

fn check_inputs(mesh: &Mesh, bases: &[CellBasis], media: &[CellMedium]) -> Result<()> {
    for len in [bases.len(), media.len()] {
        if len != mesh.cell_count() {
            return Err(Error::DimensionMismatch {
                expected: mesh.cell_count(),
                got: len,
            });
        }
    }
    Ok(())
}

fn stitch(
    blocks: Vec<(usize, Block)>,
    n_cols: usize,
    unknowns: Vec<(usize, usize)>,
    offsets: Vec<usize>,
) -> Result<SparseSystem> {
    let mut triplets = Vec::new();
    let mut rhs = Vec::new();
    let mut constraints = Vec::new();
    for (f, b) in blocks {
        let base = rhs.len();
        triplets.extend(b.triplets.into_iter().map(|(r, c, v)| (base + r, c, v)));
        constraints.extend((0..b.rhs.len()).map(|r| (f, r)));
        rhs.extend(b.rhs);
    }
    if rhs.len() != n_cols {
        return Err(Error::CountMismatch {
            rows: rhs.len(),
            cols: n_cols,
        });
    }
    let matrix = CsrMatrix::from_triplets(rhs.len(), n_cols, &triplets)?;
    Ok(SparseSystem {
        matrix,
        rhs,
        unknowns,
        constraints,
        cell_offsets: offsets,
    })
}

/// Componentwise continuity at interior midpoints and inflow conditions at
/// boundary midpoints, over all `8M` basis functions of every cell.
pub fn assemble_full(
    mesh: &Mesh,
    quad: &QuadratureSet,
    bases: &[CellBasis],
    media: &[CellMedium],
    boundary: &BoundaryData,
) -> Result<SparseSystem> {
    check_inputs(mesh, bases, media)?;
    let basis_len = 2 * quad.len();
    let selection = Selection::full(mesh.cell_count(), basis_len);
    let (columns, unknowns, offsets) = column_lists(&selection);
    let ctx = Context {
        bases,
        media,
        boundary,
        columns: &columns,
    };
    let blocks: Vec<(usize, Block)> = mesh
        .interfaces()
        .par_iter()
        .map(|f| {
            let ords = match f.kind {
                InterfaceKind::Boundary { side, .. } => quad.inflow(side.outward_normal()),
                InterfaceKind::Interior { .. } => (0..quad.len()).collect(),
            };
            let proj = DMatrix::identity(ords.len(), ords.len());
            ctx.block(f, &ords, &proj).map(|b| (f.id, b))
        })
        .collect::<Result<_>>()?;
    stitch(blocks, unknowns.len(), unknowns, offsets)
}

/// The compressed system: one row per selected mode of every interface,
/// columns over the selected basis functions only.
pub fn assemble_adaptive(
    mesh: &Mesh,
    bases: &[CellBasis],
    media: &[CellMedium],
    selection: &Selection,
    spaces: &[InterfaceSpace],
    boundary: &BoundaryData,
) -> Result<SparseSystem> {
    check_inputs(mesh, bases, media)?;
    if spaces.len() != mesh.interfaces().len() {
        return Err(Error::DimensionMismatch {
            expected: mesh.interfaces().len(),
            got: spaces.len(),
        });
    }
    let (columns, unknowns, offsets) = column_lists(selection);
    let ctx = Context {
        bases,
        media,
        boundary,
        columns: &columns,
    };
    let blocks: Vec<(usize, Block)> = mesh
        .interfaces()
        .par_iter()
        .zip(spaces.par_iter())
        .map(|(f, s)| {
            let proj = s.e_inv.rows(0, s.n_selected()).into_owned();
            ctx.block(f, &s.ordinates, &proj).map(|b| (f.id, b))
        })
        .collect::<Result<_>>()?;
    stitch(blocks, unknowns.len(), unknowns, offsets)
}

/// The full system rewritten in interface-mode coordinates and permuted so
/// that selected rows and columns come first.
#[derive(Debug, Clone)]
pub struct ProjectedBlocks {
    /// Permuted matrix `[[A_d, B_d], [C_d, D_d]]`.
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Number of selected rows (and columns).
    pub n_selected: usize,
    /// Column -> `(cell, k)`.
    pub unknowns: Vec<(usize, usize)>,
    pub constraints: Vec<(usize, usize)>,
}

impl ProjectedBlocks {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    fn block_norm(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>, minus_identity: bool) -> f64 {
        let mut worst = 0.0f64;
        for r in rows.clone() {
            let mut sum = 0.0;
            let mut diag_seen = false;
            for (c, v) in self.matrix.row(r) {
                if cols.contains(&c) {
                    let on_diag = minus_identity && c - cols.start == r - rows.start;
                    if on_diag {
                        diag_seen = true;
                        sum += (v - 1.0).abs();
                    } else {
                        sum += v.abs();
                    }
                }
            }
            if minus_identity && !diag_seen {
                sum += 1.0;
            }
            worst = worst.max(sum);
        }
        worst
    }

    /// Dense copy of the selected-selected block.
    pub fn a_block(&self) -> CsrMatrix {
        let ns = self.n_selected;
        let mut t = Vec::new();
        for r in 0..ns {
            for (c, v) in self.matrix.row(r) {
                if c < ns {
                    t.push((r, c, v));
                }
            }
        }
        CsrMatrix::from_triplets(ns, ns, &t).expect("in-range triplets")
    }

    pub fn norm_b(&self) -> f64 {
        self.block_norm(0..self.n_selected, self.n_selected..self.dim(), false)
    }

    pub fn norm_c(&self) -> f64 {
        self.block_norm(self.n_selected..self.dim(), 0..self.n_selected, false)
    }

    pub fn norm_d_minus_identity(&self) -> f64 {
        self.block_norm(self.n_selected..self.dim(), self.n_selected..self.dim(), true)
    }

    pub fn norm_rhs_selected(&self) -> f64 {
        self.rhs[..self.n_selected].iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn norm_rhs_unselected(&self) -> f64 {
        self.rhs[self.n_selected..].iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

/// Builds the projected full system. Intended for diagnostic mesh sizes.
pub fn assemble_projected_full(
    mesh: &Mesh,
    bases: &[CellBasis],
    media: &[CellMedium],
    selection: &Selection,
    spaces: &[InterfaceSpace],
    boundary: &BoundaryData,
) -> Result<ProjectedBlocks> {
    check_inputs(mesh, bases, media)?;
    let (sel_columns, mut unknowns, _) = column_lists(selection);
    let n_selected = unknowns.len();
    // Unselected columns follow the unselected rows, interface by interface.
    let mut columns = sel_columns;
    for s in spaces {
        for g in &s.unselected {
            unknowns.push((g.cell, g.k));
            columns[g.cell].push((g.k, unknowns.len() - 1));
        }
    }
    let ctx = Context {
        bases,
        media,
        boundary,
        columns: &columns,
    };
    let blocks: Vec<(usize, Block, Block)> = mesh
        .interfaces()
        .par_iter()
        .zip(spaces.par_iter())
        .map(|(f, s)| {
            let ns = s.n_selected();
            let sel = s.e_inv.rows(0, ns).into_owned();
            let hat = s.generator_inverse()?;
            let unsel = hat.rows(ns, s.dim() - ns).into_owned();
            Ok((f.id, ctx.block(f, &s.ordinates, &sel)?, ctx.block(f, &s.ordinates, &unsel)?))
        })
        .collect::<Result<_>>()?;
    let mut triplets = Vec::new();
    let mut rhs = Vec::new();
    let mut constraints = Vec::new();
    for pass in 0..2 {
        for (f, sel, unsel) in &blocks {
            let b = if pass == 0 { sel } else { unsel };
            let base = rhs.len();
            triplets.extend(b.triplets.iter().map(|&(r, c, v)| (base + r, c, v)));
            constraints.extend((0..b.rhs.len()).map(|r| (*f, r)));
            rhs.extend_from_slice(&b.rhs);
        }
    }
    if rhs.len() != unknowns.len() {
        return Err(Error::CountMismatch {
            rows: rhs.len(),
            cols: unknowns.len(),
        });
    }
    let matrix = CsrMatrix::from_triplets(rhs.len(), unknowns.len(), &triplets)?;
    Ok(ProjectedBlocks {
        matrix,
        rhs,
        n_selected,
        unknowns,
        constraints,
    })
}
