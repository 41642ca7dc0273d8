//! End-to-end solves: per-cell bases, selection, interface spaces, assembly
//! and the sparse solve, with per-phase timings.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::angular::QuadratureSet;
use crate::assembly::{assemble_adaptive, assemble_full, assemble_projected_full, ProjectedBlocks, SparseSystem};
use crate::error::Result;
use crate::linsolve::{LuOptions, SparseLu};
use crate::local_basis::{CellBasis, CellMedium, EigenCache};
use crate::mesh::Mesh;
use crate::problems::{BoundaryData, ProblemSpec};
use crate::reduction::{build_interface_spaces, InterfaceSpace, Selection};
use crate::solution::{Flavor, SolutionField};

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseTimings {
    pub eigen: f64,
    pub selection: f64,
    pub assembly: f64,
    pub solve: f64,
}

impl PhaseTimings {
    pub fn total(&self) -> f64 {
        self.eigen + self.selection + self.assembly + self.solve
    }

    pub fn add(&mut self, other: &PhaseTimings) {
        self.eigen += other.eigen;
        self.selection += other.selection;
        self.assembly += other.assembly;
        self.solve += other.solve;
    }
}

/// Mesh, quadrature, media, per-cell bases and boundary data of one problem.
#[derive(Debug)]
pub struct Discretization {
    pub mesh: Mesh,
    pub quad: Arc<QuadratureSet>,
    pub cache: EigenCache,
    pub media: Vec<CellMedium>,
    pub bases: Vec<CellBasis>,
    pub boundary: BoundaryData,
    pub eigen_seconds: f64,
}

/// A solved full system.
#[derive(Debug)]
pub struct FullSolve {
    pub system: SparseSystem,
    pub lu: SparseLu,
    pub field: SolutionField,
    pub timings: PhaseTimings,
}

/// A solved compressed system with everything the diagnostics need.
#[derive(Debug)]
pub struct AdaptiveSolve {
    pub delta: f64,
    pub selection: Selection,
    pub spaces: Vec<InterfaceSpace>,
    pub system: SparseSystem,
    pub lu: SparseLu,
    pub field: SolutionField,
    pub timings: PhaseTimings,
}

impl Discretization {
    pub fn new(mesh: Mesh, quad: QuadratureSet, media: Vec<CellMedium>, boundary: BoundaryData) -> Result<Self> {
        let start = Instant::now();
        let quad = Arc::new(quad);
        let cache = EigenCache::new(quad.clone());
        let h = mesh.spacing();
        let bases = media
            .par_iter()
            .map(|m| Ok(CellBasis::new(cache.spectrum(m)?, m.sigma_t, h)))
            .collect::<Result<Vec<_>>>()?;
        log::info!(
            "{} cells, {} ordinates, {} distinct spectra",
            mesh.cell_count(),
            quad.len(),
            cache.len()
        );
        Ok(Discretization {
            mesh,
            quad,
            cache,
            media,
            bases,
            boundary,
            eigen_seconds: start.elapsed().as_secs_f64(),
        })
    }

    pub fn from_problem(spec: &ProblemSpec) -> Result<Self> {
        let mesh = spec.mesh()?;
        let quad = spec.quadrature()?;
        let media = spec.media()?;
        let boundary = spec.boundary_data(&mesh, &quad)?;
        Self::new(mesh, quad, media, boundary)
    }

    fn factor(&self, system: &SparseSystem) -> Result<SparseLu> {
        let order = system.dissection_columns(&self.mesh);
        SparseLu::factorize(&system.matrix, Some(&order), LuOptions::default())
    }

    pub fn solve_full(&self) -> Result<FullSolve> {
        let mut timings = PhaseTimings::default();
        let t = Instant::now();
        let selection = Selection::full(self.mesh.cell_count(), 2 * self.quad.len());
        timings.selection = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let system = assemble_full(&self.mesh, &self.quad, &self.bases, &self.media, &self.boundary)?;
        timings.assembly = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let lu = self.factor(&system)?;
        let x = lu.solve(&system.rhs)?;
        let (nl, nu) = lu.fill();
        log::info!("full system: n = {}, nnz = {}, fill L+U = {}", system.dim(), system.matrix.nnz(), nl + nu);
        let field = SolutionField::new(
            Flavor::Full,
            &self.mesh,
            &self.bases,
            &self.media,
            &selection,
            system.split_by_cell(&x),
        )?;
        timings.solve = t.elapsed().as_secs_f64();
        Ok(FullSolve {
            system,
            lu,
            field,
            timings,
        })
    }

    pub fn select(&self, delta: f64) -> Result<(Selection, Vec<InterfaceSpace>)> {
        let selection = Selection::new(&self.bases, delta)?;
        let spaces = build_interface_spaces(&self.mesh, &self.quad, &self.bases, &selection)?;
        Ok((selection, spaces))
    }

    pub fn solve_adaptive(&self, delta: f64) -> Result<AdaptiveSolve> {
        let mut timings = PhaseTimings::default();
        let t = Instant::now();
        let (selection, spaces) = self.select(delta)?;
        timings.selection = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let system = assemble_adaptive(&self.mesh, &self.bases, &self.media, &selection, &spaces, &self.boundary)?;
        timings.assembly = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let lu = self.factor(&system)?;
        let x = lu.solve(&system.rhs)?;
        log::info!(
            "adaptive system (delta = {delta:e}): n = {}, ratio = {:.4}",
            system.dim(),
            selection.ratio()
        );
        let field = SolutionField::new(
            Flavor::Adaptive(delta),
            &self.mesh,
            &self.bases,
            &self.media,
            &selection,
            system.split_by_cell(&x),
        )?;
        timings.solve = t.elapsed().as_secs_f64();
        Ok(AdaptiveSolve {
            delta,
            selection,
            spaces,
            system,
            lu,
            field,
            timings,
        })
    }

    pub fn projected_blocks(&self, selection: &Selection, spaces: &[InterfaceSpace]) -> Result<ProjectedBlocks> {
        assemble_projected_full(&self.mesh, &self.bases, &self.media, selection, spaces, &self.boundary)
    }

    /// `max |q / sigma_a|` over cells.
    pub fn source_norm(&self) -> f64 {
        self.media.iter().fold(0.0f64, |a, m| a.max((m.q / m.sigma_a()).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::lattice_problem;
    use crate::solution::error_metric;

    #[test]
    fn zero_delta_matches_full_on_small_lattice() {
        let spec = lattice_problem(4, 4).unwrap();
        let d = Discretization::from_problem(&spec).unwrap();
        assert_eq!(d.cache.len(), 2);
        let full = d.solve_full().unwrap();
        let ad = d.solve_adaptive(0.0).unwrap();
        let err = error_metric(&full.field, &ad.field).unwrap();
        assert!(err <= 1e-8 * (1.0 + full.field.center_norm()), "err {err}");
    }
}
