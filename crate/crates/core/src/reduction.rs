//! Threshold selection of basis functions and the per-interface mode spaces.
//!
//! At an interface, the centered basis vectors of the adjacent cells split into
//! a selected and an unselected family. Each family is orthonormalized with a
//! Householder QR, and `E = [chi_sel | chi_unsel]` expresses any interface
//! vector `l` through `E y = l`. The leading entries of `y` are the oblique
//! coordinates of `l` along the selected modes.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::angular::QuadratureSet;
use crate::error::{Error, Result};
use crate::local_basis::CellBasis;
use crate::mesh::{Interface, Mesh};

/// Indices `k` (ascending) whose center decay exceeds `delta`.
pub fn select_basis(basis: &CellBasis, delta: f64) -> Vec<usize> {
    (0..basis.len()).filter(|&k| basis.center_decay(k) > delta).collect()
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("tolerance must lie in [0, 1), got {delta}"),
        });
    }
    Ok(())
}

/// Selected index sets for every cell of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    delta: f64,
    basis_len: usize,
    selected: Vec<Vec<usize>>,
    flags: Vec<Vec<bool>>,
}

impl Selection {
    pub fn new(bases: &[CellBasis], delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let basis_len = bases.first().map_or(0, |b| b.len());
        let selected: Vec<Vec<usize>> = bases.iter().map(|b| select_basis(b, delta)).collect();
        let empty = selected.iter().filter(|s| s.is_empty()).count();
        if empty > 0 {
            log::warn!("{empty} cells keep no basis function at delta = {delta:e}");
        }
        Ok(Self::from_sets(delta, basis_len, selected))
    }

    /// Every basis function selected; equivalent to `delta = 0`.
    pub fn full(cells: usize, basis_len: usize) -> Self {
        Self::from_sets(0.0, basis_len, vec![(0..basis_len).collect(); cells])
    }

    fn from_sets(delta: f64, basis_len: usize, selected: Vec<Vec<usize>>) -> Self {
        let flags = selected
            .iter()
            .map(|s| {
                let mut f = vec![false; basis_len];
                for &k in s {
                    f[k] = true;
                }
                f
            })
            .collect();
        Selection {
            delta,
            basis_len,
            selected,
            flags,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn cells(&self) -> usize {
        self.selected.len()
    }

    pub fn basis_len(&self) -> usize {
        self.basis_len
    }

    pub fn selected(&self, cell: usize) -> &[usize] {
        &self.selected[cell]
    }

    pub fn is_selected(&self, cell: usize, k: usize) -> bool {
        self.flags[cell][k]
    }

    pub fn count(&self, cell: usize) -> usize {
        self.selected[cell].len()
    }

    pub fn total(&self) -> usize {
        self.selected.iter().map(Vec::len).sum()
    }

    /// Fraction of basis functions kept over the whole mesh.
    pub fn ratio(&self) -> f64 {
        let all = self.basis_len * self.selected.len();
        if all == 0 {
            return 1.0;
        }
        self.total() as f64 / all as f64
    }

    /// Writes `i,j,n_selected` with 1-based cell indices.
    pub fn write_csv<W: Write>(&self, mesh: &Mesh, mut out: W) -> std::io::Result<()> {
        writeln!(out, "i,j,n_selected")?;
        for (c, cell) in mesh.cells().iter().enumerate() {
            writeln!(out, "{},{},{}", cell.i + 1, cell.j + 1, self.count(c))?;
        }
        Ok(())
    }
}

/// A generating vector of an interface space: the centered basis function `k`
/// of `cell`, entering the interface relation with `sign`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generator {
    pub cell: usize,
    pub k: usize,
    pub sign: f64,
}

/// Orthonormal mode families of one interface and the inverse of `E`.
#[derive(Debug, Clone)]
pub struct InterfaceSpace {
    pub interface: usize,
    /// Ordinates the interface relation acts on (all `4M`, or the inflow set).
    pub ordinates: Vec<usize>,
    pub selected: Vec<Generator>,
    pub unselected: Vec<Generator>,
    /// `[chi_sel | chi_unsel]`.
    pub e: DMatrix<f64>,
    pub e_inv: DMatrix<f64>,
    /// Signed unselected generators as columns.
    unselected_vectors: DMatrix<f64>,
    pub inv_norm_inf: f64,
    pub inv_norm_2: f64,
    pub cond_2: f64,
}

/// `min |R_ii| / max |R_ii|` of a column-pivoted QR.
pub fn rank_ratio_qr(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 {
        return 1.0;
    }
    let qr = m.clone().col_piv_qr();
    let r = qr.r();
    let d: Vec<f64> = (0..r.nrows().min(r.ncols())).map(|i| r[(i, i)].abs()).collect();
    let max = d.iter().cloned().fold(0.0, f64::max);
    let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    if d.len() < m.ncols() || max == 0.0 {
        return 0.0;
    }
    min / max
}

fn orthonormal_columns(g: &DMatrix<f64>) -> DMatrix<f64> {
    if g.ncols() == 0 {
        return DMatrix::zeros(g.nrows(), 0);
    }
    g.clone().qr().q()
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|r| m.row(r).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl InterfaceSpace {
    /// Builds the space from explicit generator matrices whose columns
    /// correspond to `selected` and `unselected`.
    pub fn from_generators(
        interface: usize,
        ordinates: Vec<usize>,
        selected: Vec<Generator>,
        sel_vectors: &DMatrix<f64>,
        unselected: Vec<Generator>,
        unsel_vectors: &DMatrix<f64>,
    ) -> Result<Self> {
        let dim = ordinates.len();
        let (ns, nu) = (sel_vectors.ncols(), unsel_vectors.ncols());
        if ns + nu != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: ns + nu,
            });
        }
        let mut all = DMatrix::zeros(dim, dim);
        all.columns_mut(0, ns).copy_from(sel_vectors);
        all.columns_mut(ns, nu).copy_from(unsel_vectors);
        let ratio = rank_ratio_qr(&all);
        if !(ratio > 1e-13) {
            return Err(Error::RankDeficient { interface, ratio });
        }
        let mut e = DMatrix::zeros(dim, dim);
        e.columns_mut(0, ns).copy_from(&orthonormal_columns(sel_vectors));
        e.columns_mut(ns, nu).copy_from(&orthonormal_columns(unsel_vectors));
        let e_inv = e.clone().try_inverse().ok_or(Error::SingularE { interface })?;
        if e_inv.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularE { interface });
        }
        let sv = e.clone().singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        let cond_2 = smax / smin;
        if cond_2 > 1e6 {
            log::warn!("interface {interface}: cond(E) = {cond_2:.3e}");
        }
        Ok(InterfaceSpace {
            interface,
            ordinates,
            selected,
            unselected,
            inv_norm_inf: inf_norm(&e_inv),
            inv_norm_2: 1.0 / smin,
            cond_2,
            e,
            e_inv,
            unselected_vectors: unsel_vectors.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.ordinates.len()
    }

    pub fn n_selected(&self) -> usize {
        self.selected.len()
    }

    pub fn chi_selected(&self) -> nalgebra::DMatrixView<'_, f64> {
        self.e.columns(0, self.n_selected())
    }

    pub fn chi_unselected(&self) -> nalgebra::DMatrixView<'_, f64> {
        self.e.columns(self.n_selected(), self.dim() - self.n_selected())
    }

    /// Oblique coordinates `y` with `E y = l`.
    pub fn oblique_coeffs(&self, l: &DVector<f64>) -> Result<DVector<f64>> {
        if l.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: l.len(),
            });
        }
        Ok(&self.e_inv * l)
    }

    /// Projection onto the selected modes along the unselected ones.
    pub fn project(&self, l: &DVector<f64>) -> Result<DVector<f64>> {
        let y = self.oblique_coeffs(l)?;
        let ns = self.n_selected();
        Ok(self.chi_selected() * y.rows(0, ns))
    }

    /// Inverse of `[chi_sel | signed unselected generators]`. Its leading
    /// `n_selected` rows coincide with those of `E^{-1}`; the trailing rows give
    /// coordinates along the raw generators rather than orthonormal modes.
    pub fn generator_inverse(&self) -> Result<DMatrix<f64>> {
        let (dim, ns) = (self.dim(), self.n_selected());
        let mut e_hat = DMatrix::zeros(dim, dim);
        e_hat.columns_mut(0, ns).copy_from(&self.chi_selected());
        e_hat.columns_mut(ns, dim - ns).copy_from(&self.unselected_vectors);
        e_hat.try_inverse().ok_or(Error::SingularE {
            interface: self.interface,
        })
    }
}

/// Generator list and matrix for the centered basis of `(cell, side)` pairs.
fn gather(
    mesh_side: &[(usize, crate::mesh::Side, f64)],
    bases: &[CellBasis],
    selection: &Selection,
    ordinates: &[usize],
    m: usize,
) -> (Vec<Generator>, DMatrix<f64>, Vec<Generator>, DMatrix<f64>) {
    let mut sel = Vec::new();
    let mut unsel = Vec::new();
    for &(cell, side, sign) in mesh_side {
        for k in side.centered_range(m) {
            let g = Generator { cell, k, sign };
            if selection.is_selected(cell, k) {
                sel.push(g);
            } else {
                unsel.push(g);
            }
        }
    }
    let build = |gens: &[Generator], signed: bool| {
        DMatrix::from_fn(ordinates.len(), gens.len(), |r, c| {
            let g = gens[c];
            let s = if signed { g.sign } else { 1.0 };
            s * bases[g.cell].xi(g.k)[ordinates[r]]
        })
    };
    // Only the unselected generators keep their sign; see `generator_inverse`.
    let (sm, um) = (build(&sel, false), build(&unsel, true));
    (sel, sm, unsel, um)
}

pub fn build_interface_space(
    iface: &Interface,
    quad: &QuadratureSet,
    bases: &[CellBasis],
    selection: &Selection,
) -> Result<InterfaceSpace> {
    let m = quad.m();
    let adjacent = iface.adjacent();
    let ordinates: Vec<usize> = if iface.is_boundary() {
        quad.inflow(adjacent[0].1.outward_normal())
    } else {
        (0..quad.len()).collect()
    };
    let signed: Vec<(usize, crate::mesh::Side, f64)> = adjacent
        .iter()
        .enumerate()
        .map(|(n, &(c, s))| (c, s, if n == 0 { 1.0 } else { -1.0 }))
        .collect();
    let (sel, sm, unsel, um) = gather(&signed, bases, selection, &ordinates, m);
    InterfaceSpace::from_generators(iface.id, ordinates, sel, &sm, unsel, &um)
}

/// Interface spaces for every interface of the mesh, in interface order.
pub fn build_interface_spaces(
    mesh: &Mesh,
    quad: &QuadratureSet,
    bases: &[CellBasis],
    selection: &Selection,
) -> Result<Vec<InterfaceSpace>> {
    mesh.interfaces()
        .par_iter()
        .map(|f| build_interface_space(f, quad, bases, selection))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::ScatterKernel;
    use crate::local_basis::{cell_eigenbasis, CellMedium};
    use crate::mesh::Side;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cell(order: usize, sigma_t: f64, sigma_s: f64, g: f64, h: f64) -> (QuadratureSet, CellBasis) {
        let q = QuadratureSet::new(order).unwrap();
        let k = ScatterKernel::new(&q, g).unwrap();
        let m = CellMedium::new(sigma_t, sigma_s, g, 0.0).unwrap();
        let b = cell_eigenbasis(&q, &k, &m, h).unwrap();
        (q, b)
    }

    #[test]
    fn diffusive_cell_keeps_four() {
        for order in [2, 4, 6] {
            let (_, b) = cell(order, 1000.0, 999.9995, 0.0, 1.0 / 32.0);
            for delta in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5] {
                assert_eq!(select_basis(&b, delta).len(), 4);
            }
        }
    }

    #[test]
    fn transport_cell_keeps_everything() {
        let (q, b) = cell(6, 1.0, 0.5, 0.0, 1.0 / 32.0);
        for delta in [0.0, 1e-1, 1e-3, 1e-5] {
            assert_eq!(select_basis(&b, delta).len(), 2 * q.len());
        }
    }

    #[test]
    fn selection_bookkeeping() {
        let (_, a) = cell(4, 1000.0, 999.9995, 0.0, 1.0 / 32.0);
        let (_, b) = cell(4, 1.0, 0.5, 0.0, 1.0 / 32.0);
        let s = Selection::new(&[a.clone(), b.clone()], 0.1).unwrap();
        assert_eq!(s.total(), 4 + 24);
        assert!((s.ratio() - 28.0 / 48.0).abs() < 1e-15);
        assert_eq!(Selection::new(&[a.clone(), b], 0.0).unwrap().ratio(), 1.0);
        assert!(Selection::new(std::slice::from_ref(&a), 1.0).is_err());
        assert!(Selection::new(&[a], -0.1).is_err());
    }

    fn two_cell_space(delta: f64, seed_scale: f64) -> (QuadratureSet, InterfaceSpace) {
        let (q, a) = cell(4, 100.0 * seed_scale, 99.0 * seed_scale, 0.2, 0.1);
        let (_, b) = cell(4, 5.0, 2.0, 0.2, 0.1);
        let bases = vec![a, b];
        let sel = Selection::new(&bases, delta).unwrap();
        let mesh = Mesh::new(2).unwrap();
        // The first interior vertical interface joins cells 0 and 1.
        let f = mesh.interfaces()[0];
        let space = build_interface_space(&f, &q, &bases, &sel).unwrap();
        (q, space)
    }

    #[test]
    fn families_are_orthonormal_and_e_is_inverse() {
        let (_, s) = two_cell_space(1e-2, 1.0);
        let ns = s.n_selected();
        assert!(ns > 0 && ns < s.dim());
        for fam in [s.chi_selected().into_owned(), s.chi_unselected().into_owned()] {
            let gram = fam.transpose() * &fam;
            let err = (gram - DMatrix::identity(fam.ncols(), fam.ncols())).amax();
            assert!(err < 1e-12);
        }
        let prod = &s.e * &s.e_inv;
        assert!((prod - DMatrix::identity(s.dim(), s.dim())).amax() < 1e-10);
        assert!(s.inv_norm_inf >= 1.0 - 1e-12);
        assert!(s.inv_norm_inf <= (s.dim() as f64).sqrt() * s.inv_norm_2 * (1.0 + 1e-12));
    }

    #[test]
    fn full_selection_gives_orthogonal_e() {
        let (_, s) = two_cell_space(0.0, 1.0);
        assert_eq!(s.n_selected(), s.dim());
        assert!((s.inv_norm_2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projector_properties() {
        let (_, s) = two_cell_space(1e-2, 1.0);
        let ns = s.n_selected();
        for k in 0..s.dim() {
            let col = s.e.column(k).into_owned();
            let y = s.oblique_coeffs(&col).unwrap();
            for (i, v) in y.iter().enumerate() {
                let e = if i == k { 1.0 } else { 0.0 };
                assert!((v - e).abs() < 1e-10);
            }
            if k >= ns {
                assert!(s.project(&col).unwrap().amax() < 1e-10);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let l = DVector::from_fn(s.dim(), |_, _| rng.random_range(-1.0..1.0));
            let p = s.project(&l).unwrap();
            let pp = s.project(&p).unwrap();
            assert!((&pp - &p).amax() <= 1e-10 * p.amax().max(1.0));
            let y = s.oblique_coeffs(&l).unwrap();
            assert!(y.amax() <= s.inv_norm_inf * l.amax() * (1.0 + 1e-12));
            let back = &s.e * &y;
            assert!((back - &l).amax() <= 1e-10 * l.amax());
        }
        assert!(s.oblique_coeffs(&DVector::zeros(3)).is_err());
    }

    #[test]
    fn generator_inverse_shares_selected_rows() {
        let (_, s) = two_cell_space(1e-2, 1.0);
        let hat = s.generator_inverse().unwrap();
        let ns = s.n_selected();
        let diff = (hat.rows(0, ns) - s.e_inv.rows(0, ns)).amax();
        assert!(diff < 1e-9 * s.e_inv.amax());
    }

    #[test]
    fn boundary_space_uses_inflow_ordinates() {
        let (q, b) = cell(4, 1.0, 0.5, 0.0, 0.25);
        let bases = vec![b];
        let sel = Selection::new(&bases, 0.0).unwrap();
        let mesh = Mesh::new(1).unwrap();
        for f in mesh.interfaces() {
            let s = build_interface_space(f, &q, &bases, &sel).unwrap();
            assert_eq!(s.dim(), q.len() / 2);
            if let crate::mesh::InterfaceKind::Boundary { side, .. } = f.kind {
                assert_eq!(s.ordinates, q.inflow(side.outward_normal()));
                assert!(s.selected.iter().all(|g| side.centered_range(q.m()).contains(&g.k)));
            }
        }
    }

    #[test]
    fn duplicated_generators_are_rank_deficient() {
        let (q, b) = cell(2, 1.0, 0.5, 0.0, 0.25);
        let n = q.len();
        let v = DMatrix::from_fn(n, 2, |r, _| b.xi(0)[r]);
        let more = DMatrix::from_fn(n, 2, |r, c| b.xi(c + 1)[r]);
        let gens = vec![Generator { cell: 0, k: 0, sign: 1.0 }; 2];
        let err = InterfaceSpace::from_generators(7, (0..n).collect(), gens.clone(), &v, gens, &more);
        assert!(matches!(err, Err(Error::RankDeficient { interface: 7, .. })));
        let _ = Side::Left;
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn selection_is_monotone(d1 in 0.0f64..0.999, d2 in 0.0f64..0.999, st in 1.0f64..2000.0) {
            let (_, b) = cell(6, st, 0.99 * st, 0.1, 1.0 / 32.0);
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let big = select_basis(&b, lo);
            let small = select_basis(&b, hi);
            prop_assert!(small.iter().all(|k| big.contains(k)));
        }
    }
}
