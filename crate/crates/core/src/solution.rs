//! Reconstruction of angular-flux fields from basis coefficients and the
//! comparison metrics between full and compressed solutions.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::local_basis::{special_solution, CellBasis, CellMedium};
use crate::mesh::Mesh;
use crate::reduction::Selection;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Flavor {
    Full,
    Adaptive(f64),
}

/// Piecewise field `sum_k alpha_k phi_k + q/sigma_a` over the mesh.
#[derive(Debug, Clone)]
pub struct SolutionField {
    pub flavor: Flavor,
    mesh: Mesh,
    bases: Vec<CellBasis>,
    specials: Vec<f64>,
    active: Vec<Vec<usize>>,
    coeffs: Vec<Vec<f64>>,
}

impl SolutionField {
    pub fn new(
        flavor: Flavor,
        mesh: &Mesh,
        bases: &[CellBasis],
        media: &[CellMedium],
        selection: &Selection,
        coeffs: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let cells = mesh.cell_count();
        for len in [bases.len(), media.len(), selection.cells(), coeffs.len()] {
            if len != cells {
                return Err(Error::DimensionMismatch {
                    expected: cells,
                    got: len,
                });
            }
        }
        let active: Vec<Vec<usize>> = (0..cells).map(|c| selection.selected(c).to_vec()).collect();
        for (a, x) in active.iter().zip(&coeffs) {
            if a.len() != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: a.len(),
                    got: x.len(),
                });
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "coefficients",
                    reason: "non-finite coefficient".into(),
                });
            }
        }
        let specials = media.iter().map(special_solution).collect::<Result<_>>()?;
        Ok(SolutionField {
            flavor,
            mesh: mesh.clone(),
            bases: bases.to_vec(),
            specials,
            active,
            coeffs,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn ordinates(&self) -> usize {
        self.bases.first().map_or(0, |b| b.ordinates())
    }

    pub fn active(&self, cell: usize) -> &[usize] {
        &self.active[cell]
    }

    pub fn coefficients(&self, cell: usize) -> &[f64] {
        &self.coeffs[cell]
    }

    /// `max |alpha|` over all cells.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// Coefficient of basis `k` in `cell`, zero when inactive.
    pub fn coefficient(&self, cell: usize, k: usize) -> f64 {
        self.active[cell]
            .iter()
            .position(|&a| a == k)
            .map_or(0.0, |p| self.coeffs[cell][p])
    }

    /// Field at cell-local offsets.
    pub fn eval_local(&self, cell: usize, dx: f64, dy: f64) -> DVector<f64> {
        let basis = &self.bases[cell];
        let mut psi = DVector::from_element(basis.ordinates(), self.specials[cell]);
        for (&k, &a) in self.active[cell].iter().zip(&self.coeffs[cell]) {
            psi.axpy(a * basis.zeta(k, dx, dy), &basis.xi(k), 1.0);
        }
        psi
    }

    /// Field at a point of `cell`.
    pub fn eval(&self, cell: usize, x: f64, y: f64) -> Result<DVector<f64>> {
        let (dx, dy) = self.mesh.cells()[cell].local(x, y)?;
        Ok(self.eval_local(cell, dx, dy))
    }

    pub fn center(&self, cell: usize) -> DVector<f64> {
        let h = self.mesh.spacing();
        self.eval_local(cell, 0.5 * h, 0.5 * h)
    }

    pub fn centers(&self) -> Vec<DVector<f64>> {
        (0..self.mesh.cell_count()).into_par_iter().map(|c| self.center(c)).collect()
    }

    /// Unweighted ordinate sum at the cell center.
    pub fn scalar_flux(&self, cell: usize) -> f64 {
        self.center(cell).sum()
    }

    /// Quadrature-weighted ordinate sum at the cell center.
    pub fn scalar_flux_weighted(&self, cell: usize, weights: &[f64]) -> f64 {
        self.center(cell).iter().zip(weights).map(|(p, w)| p * w).sum()
    }

    /// `max_{C, m} |psi_m(x_C)|`.
    pub fn center_norm(&self) -> f64 {
        self.centers().iter().fold(0.0f64, |a, v| a.max(v.amax()))
    }

    /// Writes `i,j,x_c,y_c,phi` (1-based indices, unweighted scalar flux).
    pub fn write_phi_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "i,j,x_c,y_c,phi")?;
        let centers = self.centers();
        for (c, cell) in self.mesh.cells().iter().enumerate() {
            let (x, y) = cell.center();
            writeln!(out, "{},{},{:.16e},{:.16e},{:.16e}", cell.i + 1, cell.j + 1, x, y, centers[c].sum())?;
        }
        Ok(())
    }

    /// Writes `i,j,m,psi_m` (1-based indices) at the cell centers.
    pub fn write_psi_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "i,j,m,psi_m")?;
        let centers = self.centers();
        for (c, cell) in self.mesh.cells().iter().enumerate() {
            for (m, v) in centers[c].iter().enumerate() {
                writeln!(out, "{},{},{},{:.16e}", cell.i + 1, cell.j + 1, m + 1, v)?;
            }
        }
        Ok(())
    }
}

fn check_shape(a: &SolutionField, b: &SolutionField) -> Result<()> {
    if a.mesh.cells_per_side() != b.mesh.cells_per_side() {
        return Err(Error::DimensionMismatch {
            expected: a.mesh.cells_per_side(),
            got: b.mesh.cells_per_side(),
        });
    }
    if a.ordinates() != b.ordinates() {
        return Err(Error::DimensionMismatch {
            expected: a.ordinates(),
            got: b.ordinates(),
        });
    }
    Ok(())
}

/// `max` over cell centers and ordinates of `|a - b|`.
pub fn error_metric(a: &SolutionField, b: &SolutionField) -> Result<f64> {
    check_shape(a, b)?;
    Ok((0..a.mesh.cell_count())
        .into_par_iter()
        .map(|c| (a.center(c) - b.center(c)).amax())
        .reduce(|| 0.0, f64::max))
}

/// Fraction of basis functions kept.
pub fn ratio_metric(selection: &Selection) -> f64 {
    selection.ratio()
}

/// One sample of a line probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSample {
    pub x: f64,
    pub y: f64,
    pub phi_a: f64,
    pub phi_b: f64,
}

impl ProbeSample {
    pub fn diff(&self) -> f64 {
        self.phi_a - self.phi_b
    }
}

/// Unweighted scalar flux of both fields at `n` equally spaced points of the
/// segment `(x0, y0) -> (x1, y1)`.
pub fn line_probe(a: &SolutionField, b: &SolutionField, segment: [f64; 4], n: usize) -> Result<Vec<ProbeSample>> {
    check_shape(a, b)?;
    let [x0, y0, x1, y1] = segment;
    let inside = |v: f64| (0.0..=1.0).contains(&v);
    if !(inside(x0) && inside(y0) && inside(x1) && inside(y1)) {
        return Err(Error::InvalidParameter {
            name: "probe-line",
            reason: format!("segment ({x0}, {y0}) -> ({x1}, {y1}) leaves the unit square"),
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "probe-line",
            reason: "need at least one sample".into(),
        });
    }
    (0..n)
        .map(|s| {
            let t = if n == 1 { 0.0 } else { s as f64 / (n - 1) as f64 };
            let (x, y) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
            let c = a.mesh.locate(x, y).expect("point inside the domain");
            Ok(ProbeSample {
                x,
                y,
                phi_a: a.eval(c, x, y)?.sum(),
                phi_b: b.eval(c, x, y)?.sum(),
            })
        })
        .collect()
}

/// Writes `x,y,phi_full,phi_delta,diff`.
pub fn write_probe_csv<W: Write>(samples: &[ProbeSample], mut out: W) -> std::io::Result<()> {
    writeln!(out, "x,y,phi_full,phi_delta,diff")?;
    for s in samples {
        writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", s.x, s.y, s.phi_a, s.phi_b, s.diff())?;
    }
    Ok(())
}
