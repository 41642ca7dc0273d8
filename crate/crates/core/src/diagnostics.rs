//! A posteriori error bound, block-norm checks, the neglected-term probe and
//! the assumption studies on two-cell configurations.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::angular::{QuadratureSet, ScatterKernel};
use crate::assembly::ProjectedBlocks;
use crate::error::Result;
use crate::local_basis::{CellBasis, Spectrum};
use crate::mesh::{InterfaceKind, Side};
use crate::pipeline::{AdaptiveSolve, Discretization};
use crate::reduction::{select_basis, Generator, InterfaceSpace, Selection};
use crate::solution::SolutionField;

fn mat_inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|r| m.row(r).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest `||E^{-1}||_inf`, `||E^{-1}||_2` and generator-coordinate
/// `||Ê^{-1}||_inf` over a set of interface spaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpaceConstants {
    pub c_inf: f64,
    pub c_2: f64,
    pub c_hat_inf: f64,
}

impl SpaceConstants {
    pub fn of(spaces: &[InterfaceSpace]) -> Result<Self> {
        let hats = spaces
            .par_iter()
            .map(|s| s.generator_inverse().map(|h| mat_inf_norm(&h)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(SpaceConstants {
            c_inf: spaces.iter().fold(0.0, |a, s| a.max(s.inv_norm_inf)),
            c_2: spaces.iter().fold(0.0, |a, s| a.max(s.inv_norm_2)),
            c_hat_inf: hats.into_iter().fold(0.0, f64::max),
        })
    }

    /// Constant used in the bounds: the larger of the two infinity norms,
    /// since the unselected rows of the projected system use `Ê^{-1}`.
    pub fn used(&self) -> f64 {
        self.c_inf.max(self.c_hat_inf)
    }

    /// `1 <= C_inf <= sqrt(dim) C_2`.
    pub fn chain_holds(&self, dim: usize) -> bool {
        let tol = 1e-10;
        self.c_inf >= 1.0 - tol && self.c_inf <= (dim as f64).sqrt() * self.c_2 * (1.0 + tol)
    }
}

/// Ingredients and value of the a posteriori bound.
#[derive(Debug, Clone, Serialize)]
pub struct PosteriorReport {
    pub m: usize,
    pub delta: f64,
    pub c_inf: f64,
    pub c_2: f64,
    pub c_hat_inf: f64,
    pub c_used: f64,
    /// Lower estimate of `||A^{-1}||_inf` for the compressed matrix.
    pub inv_norm_estimate: f64,
    pub coeff_norm: f64,
    pub inflow_norm: f64,
    pub source_norm: f64,
    pub delta0: f64,
    /// `delta > delta0`: the bound is reported but its hypotheses fail.
    pub beyond_delta0: bool,
    pub chain_holds: bool,
    pub bound: f64,
}

impl PosteriorReport {
    pub fn is_finite(&self) -> bool {
        [
            self.c_inf,
            self.c_2,
            self.c_used,
            self.inv_norm_estimate,
            self.coeff_norm,
            self.inflow_norm,
            self.source_norm,
            self.delta0,
            self.bound,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// `96 M^2 (24 M C ||A^{-1}|| + 3) C^2 delta (||Psi|| + 2 ||q/sa|| + 12 M ||alpha||)`.
pub fn bound_formula(m: usize, c: f64, inv_norm: f64, delta: f64, inflow: f64, source: f64, coeff: f64) -> f64 {
    let m = m as f64;
    96.0 * m * m * (24.0 * m * c * inv_norm + 3.0) * c * c * delta * (inflow + 2.0 * source + 12.0 * m * coeff)
}

/// `1 / (24 M C (24 M C ||A^{-1}|| + 1))`.
pub fn delta0_formula(m: usize, c: f64, inv_norm: f64) -> f64 {
    let a = 24.0 * m as f64 * c;
    1.0 / (a * (a * inv_norm + 1.0))
}

pub fn posterior_bound(disc: &Discretization, solve: &AdaptiveSolve) -> Result<PosteriorReport> {
    let m = disc.quad.m();
    let consts = SpaceConstants::of(&solve.spaces)?;
    let c = consts.used();
    let inv = solve.lu.inv_inf_norm_estimate()?.value;
    let coeff = solve.field.coeff_norm();
    let inflow = disc.boundary.max_abs();
    let source = disc.source_norm();
    let delta0 = delta0_formula(m, c, inv);
    let report = PosteriorReport {
        m,
        delta: solve.delta,
        c_inf: consts.c_inf,
        c_2: consts.c_2,
        c_hat_inf: consts.c_hat_inf,
        c_used: c,
        inv_norm_estimate: inv,
        coeff_norm: coeff,
        inflow_norm: inflow,
        source_norm: source,
        delta0,
        beyond_delta0: solve.delta > delta0,
        chain_holds: consts.chain_holds(disc.quad.len()),
        bound: bound_formula(m, c, inv, solve.delta, inflow, source, coeff),
    };
    if report.beyond_delta0 {
        log::info!("delta = {:e} exceeds delta0 = {:.3e}; bound is not guaranteed", solve.delta, delta0);
    }
    Ok(report)
}

/// One inequality of the block-norm check.
#[derive(Debug, Clone, Serialize)]
pub struct NormCheck {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
}

impl NormCheck {
    pub fn margin(&self) -> f64 {
        self.limit - self.value
    }

    pub fn holds(&self) -> bool {
        self.value <= self.limit
    }
}

/// Evaluates the four block inequalities of the projected system.
pub fn block_norm_check(blocks: &ProjectedBlocks, c: f64, m: usize, delta: f64, source: f64, inflow: f64) -> Vec<NormCheck> {
    let k = 12.0 * m as f64 * c;
    vec![
        NormCheck {
            name: "B",
            value: blocks.norm_b(),
            limit: k * delta,
        },
        NormCheck {
            name: "C",
            value: blocks.norm_c(),
            limit: k,
        },
        NormCheck {
            name: "D-I",
            value: blocks.norm_d_minus_identity(),
            limit: k * delta,
        },
        NormCheck {
            name: "b",
            value: blocks.norm_rhs_selected().max(blocks.norm_rhs_unselected()),
            limit: c * (2.0 * source + inflow),
        },
    ]
}

/// Neglected interface term at the midpoint of one interface: the
/// contribution of unselected, non-centered basis functions of the adjacent
/// cells, weighted by the full solution's coefficients.
pub fn tau_probe(disc: &Discretization, full: &SolutionField, selection: &Selection, interface: usize) -> f64 {
    let iface = &disc.mesh.interfaces()[interface];
    let m = disc.quad.m();
    let h = disc.mesh.spacing();
    let ordinates: Vec<usize> = match iface.kind {
        InterfaceKind::Boundary { side, .. } => disc.quad.inflow(side.outward_normal()),
        InterfaceKind::Interior { .. } => (0..disc.quad.len()).collect(),
    };
    let mut tau = DVector::zeros(ordinates.len());
    for (n, (cell, side)) in iface.adjacent().into_iter().enumerate() {
        let sign = if n == 0 { -1.0 } else { 1.0 };
        let basis = &disc.bases[cell];
        let centered = side.centered_range(m);
        let (dx, dy) = side.local_midpoint(h);
        for k in 0..basis.len() {
            if centered.contains(&k) || selection.is_selected(cell, k) {
                continue;
            }
            let a = full.coefficient(cell, k) * basis.zeta(k, dx, dy) * sign;
            let xi = basis.xi(k);
            for (r, &o) in ordinates.iter().enumerate() {
                tau[r] += a * xi[o];
            }
        }
    }
    tau.amax()
}

/// A two-cell configuration across a vertical interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairConfig {
    pub gamma_minus: f64,
    pub gamma_plus: f64,
    pub g_minus: f64,
    pub g_plus: f64,
    pub order: usize,
}

impl PairConfig {
    pub fn four_m(&self) -> usize {
        self.order * (self.order + 2) / 2
    }
}

/// Quadrature order with `N(N+2)/2 = four_m`.
pub fn order_for_four_m(four_m: usize) -> Option<usize> {
    (2..=64).step_by(2).find(|n| n * (n + 2) / 2 == four_m)
}

/// Grid of pair configurations with `gamma_minus, gamma_plus` from `gammas`.
pub fn pair_grid(gammas: &[f64], g_pairs: &[(f64, f64)], four_ms: &[usize]) -> Vec<PairConfig> {
    let mut out = Vec::new();
    for &fm in four_ms {
        let Some(order) = order_for_four_m(fm) else {
            log::warn!("no quadrature order gives 4M = {fm}");
            continue;
        };
        for &(gm, gp) in g_pairs {
            for &a in gammas {
                for &b in gammas {
                    out.push(PairConfig {
                        gamma_minus: a,
                        gamma_plus: b,
                        g_minus: gm,
                        g_plus: gp,
                        order,
                    });
                }
            }
        }
    }
    out
}

fn spectrum(quad: &QuadratureSet, gamma: f64, g: f64) -> Result<std::sync::Arc<Spectrum>> {
    let kernel = ScatterKernel::new(quad, g)?;
    Ok(std::sync::Arc::new(Spectrum::compute(quad, &kernel, gamma)?))
}

/// Numerical rank (threshold `1e-10 sigma_max`) divided by the column count.
pub fn svd_rank_ratio(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 {
        return 1.0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.max();
    let rank = sv.iter().filter(|&&s| s > 1e-10 * smax).count();
    rank as f64 / m.ncols() as f64
}

fn centered_columns(basis: &CellBasis, side: Side, ordinates: &[usize], m: usize) -> Vec<DVector<f64>> {
    side.centered_range(m)
        .map(|k| DVector::from_fn(ordinates.len(), |r, _| basis.xi(k)[ordinates[r]]))
        .collect()
}

/// Rank ratio of the interior-style stacked set: the right-centered vectors
/// of the minus cell and the left-centered vectors of the plus cell.
pub fn interior_rank_ratio(cfg: &PairConfig) -> Result<f64> {
    let quad = QuadratureSet::new(cfg.order)?;
    let m = quad.m();
    let ords: Vec<usize> = (0..quad.len()).collect();
    let a = CellBasis::new(spectrum(&quad, cfg.gamma_minus, cfg.g_minus)?, 1.0, 1.0);
    let b = CellBasis::new(spectrum(&quad, cfg.gamma_plus, cfg.g_plus)?, 1.0, 1.0);
    let mut cols = centered_columns(&a, Side::Right, &ords, m);
    cols.extend(centered_columns(&b, Side::Left, &ords, m));
    Ok(svd_rank_ratio(&DMatrix::from_columns(&cols)))
}

/// Rank ratio of the boundary-style set: the centered vectors of one cell
/// restricted to the inflow ordinates of `side`.
pub fn boundary_rank_ratio(order: usize, gamma: f64, g: f64, side: Side) -> Result<f64> {
    let quad = QuadratureSet::new(order)?;
    let ords = quad.inflow(side.outward_normal());
    let a = CellBasis::new(spectrum(&quad, gamma, g)?, 1.0, 1.0);
    let cols = centered_columns(&a, side, &ords, quad.m());
    Ok(svd_rank_ratio(&DMatrix::from_columns(&cols)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StudyRow {
    pub config: PairConfig,
    pub value: f64,
}

pub fn rank_ratio_study(grid: &[PairConfig]) -> Result<Vec<StudyRow>> {
    grid.par_iter()
        .map(|c| Ok(StudyRow { config: *c, value: interior_rank_ratio(c)? }))
        .collect()
}

/// Boundary-style rank ratio for one medium, minimized over the four sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryRankRow {
    pub gamma: f64,
    pub g: f64,
    pub four_m: usize,
    pub rank_ratio: f64,
}

pub fn boundary_rank_study(gammas: &[f64], gs: &[f64], four_ms: &[usize]) -> Result<Vec<BoundaryRankRow>> {
    let mut grid = Vec::new();
    for &fm in four_ms {
        if let Some(order) = order_for_four_m(fm) {
            for &g in gs {
                for &gamma in gammas {
                    grid.push((order, fm, gamma, g));
                }
            }
        }
    }
    grid.par_iter()
        .map(|&(order, four_m, gamma, g)| {
            let mut worst = 1.0f64;
            for side in Side::ALL {
                worst = worst.min(boundary_rank_ratio(order, gamma, g, side)?);
            }
            Ok(BoundaryRankRow {
                gamma,
                g,
                four_m,
                rank_ratio: worst,
            })
        })
        .collect()
}

/// Writes `gamma,g,fourM,rank_ratio`.
pub fn write_boundary_rank_csv<W: Write>(rows: &[BoundaryRankRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["gamma", "g", "fourM", "rank_ratio"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.gamma.to_string(),
            r.g.to_string(),
            r.four_m.to_string(),
            format!("{:.16e}", r.rank_ratio),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Interface space of two adjacent cells with the given selections.
pub fn pair_space(quad: &QuadratureSet, minus: &CellBasis, plus: &CellBasis, sel_minus: &[usize], sel_plus: &[usize]) -> Result<InterfaceSpace> {
    let m = quad.m();
    let dim = quad.len();
    let mut sel = Vec::new();
    let mut unsel = Vec::new();
    let mut sel_cols = Vec::new();
    let mut unsel_cols = Vec::new();
    for (cell, basis, side, chosen, sign) in [(0, minus, Side::Right, sel_minus, 1.0), (1, plus, Side::Left, sel_plus, -1.0)] {
        for k in side.centered_range(m) {
            let g = Generator { cell, k, sign };
            let v = basis.xi(k).into_owned();
            if chosen.contains(&k) {
                sel.push(g);
                sel_cols.push(v);
            } else {
                unsel.push(g);
                unsel_cols.push(v * sign);
            }
        }
    }
    let to_mat = |cols: &[DVector<f64>]| {
        if cols.is_empty() {
            DMatrix::zeros(dim, 0)
        } else {
            DMatrix::from_columns(cols)
        }
    };
    InterfaceSpace::from_generators(0, (0..dim).collect(), sel, &to_mat(&sel_cols), unsel, &to_mat(&unsel_cols))
}

/// Tolerance grid of the `C_2` sweep.
pub fn c2_deltas() -> Vec<f64> {
    let mut d: Vec<f64> = (1..=10).map(|p| 10f64.powi(-p)).collect();
    d.push(0.0);
    d
}

pub const C2_SIGMA_T: [f64; 3] = [1.0, 10.0, 1000.0];
pub const C2_SPACING: f64 = 1.0 / 32.0;

/// Max over the tolerance grid and total cross sections of `||E^{-1}||_2`.
pub fn c2_max(cfg: &PairConfig, deltas: &[f64], sigma_ts: &[f64], h: f64) -> Result<f64> {
    let quad = QuadratureSet::new(cfg.order)?;
    let sa = spectrum(&quad, cfg.gamma_minus, cfg.g_minus)?;
    let sb = spectrum(&quad, cfg.gamma_plus, cfg.g_plus)?;
    let mut worst = 0.0f64;
    for &st in sigma_ts {
        let a = CellBasis::new(sa.clone(), st, h);
        let b = CellBasis::new(sb.clone(), st, h);
        for &d in deltas {
            let space = pair_space(&quad, &a, &b, &select_basis(&a, d), &select_basis(&b, d))?;
            worst = worst.max(space.inv_norm_2);
        }
    }
    Ok(worst)
}

pub fn c2_sweep(grid: &[PairConfig]) -> Result<Vec<StudyRow>> {
    let deltas = c2_deltas();
    grid.par_iter()
        .map(|c| {
            Ok(StudyRow {
                config: *c,
                value: c2_max(c, &deltas, &C2_SIGMA_T, C2_SPACING)?,
            })
        })
        .collect()
}

/// Writes study rows under `gamma_minus,gamma_plus,g_minus,g_plus,fourM,<value_name>`.
pub fn write_study_csv<W: Write>(rows: &[StudyRow], value_name: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["gamma_minus", "gamma_plus", "g_minus", "g_plus", "fourM", value_name])
        .map_err(csv_err)?;
    for r in rows {
        let c = &r.config;
        w.write_record([
            c.gamma_minus.to_string(),
            c.gamma_plus.to_string(),
            c.g_minus.to_string(),
            c.g_plus.to_string(),
            c.four_m().to_string(),
            format!("{:.16e}", r.value),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> crate::Error {
    crate::Error::Io(std::io::Error::other(e.to_string()))
}
