//! Per-cell exponential basis of the constant-coefficient discrete-ordinate
//! equations.
//!
//! In a cell with constant data, `xi * exp(lambda * sigma_t * (x - x_k))`
//! solves the homogeneous equations whenever `lambda xi = M^x xi` with
//! `M^x = D^{-1} (gamma K W - I)`, `D = diag(c)`; the y-family uses
//! `S = diag(s)`. Both matrices are similar to symmetric ones: with
//! `H = I - gamma * W^{1/2} R^{1/2} K0 R^{1/2} W^{1/2}` positive definite and
//! `H = L L^T`, the eigenvalues of `M^x` are the negated eigenvalues of
//! `L^T D^{-1} L`. The spectrum is therefore real by construction and is
//! computed with a symmetric solver.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::angular::{QuadratureSet, ScatterKernel};
use crate::error::{Error, Result};
use crate::mesh::Side;

/// Constant optical data of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMedium {
    pub sigma_t: f64,
    pub sigma_s: f64,
    pub g: f64,
    pub q: f64,
}

impl CellMedium {
    pub fn new(sigma_t: f64, sigma_s: f64, g: f64, q: f64) -> Result<Self> {
        let medium = CellMedium {
            sigma_t,
            sigma_s,
            g,
            q,
        };
        medium.validate()?;
        Ok(medium)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma_t.is_finite()
            && self.sigma_s.is_finite()
            && self.sigma_t > 0.0
            && self.sigma_s >= 0.0
            && self.sigma_t - self.sigma_s > 0.0;
        if !ok {
            return Err(Error::DegenerateMedium {
                sigma_t: self.sigma_t,
                sigma_s: self.sigma_s,
            });
        }
        if !(self.g.abs() < 1.0) {
            return Err(Error::InvalidAnisotropy(self.g));
        }
        if !self.q.is_finite() {
            return Err(Error::InvalidParameter {
                name: "q",
                reason: format!("source must be finite, got {}", self.q),
            });
        }
        Ok(())
    }

    pub fn sigma_a(&self) -> f64 {
        self.sigma_t - self.sigma_s
    }

    pub fn gamma(&self) -> f64 {
        self.sigma_s / self.sigma_t
    }
}

/// The angle-independent particular solution `q / sigma_a`.
pub fn special_solution(medium: &CellMedium) -> Result<f64> {
    let sigma_a = medium.sigma_a();
    if !(sigma_a > 0.0) {
        return Err(Error::DegenerateMedium {
            sigma_t: medium.sigma_t,
            sigma_s: medium.sigma_s,
        });
    }
    Ok(medium.q / sigma_a)
}

/// Eigenpairs of one transport matrix, sorted by ascending eigenvalue.
/// Column `k` of `vectors` has unit infinity norm with a positive peak.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenFamily {
    pub lambda: Vec<f64>,
    pub vectors: DMatrix<f64>,
    /// Largest eigen-relation residual relative to `max |lambda|`.
    pub residual: f64,
    /// 2-norm condition number of the eigenvector matrix.
    pub condition: f64,
}

/// Eigenpairs of `D^{-1} (gamma diag(r) K0 W - I)` through the symmetric
/// reduction described in the module docs. `k0` must be symmetric.
pub(crate) fn reduced_eigen(
    k0: &DMatrix<f64>,
    row_scale: &[f64],
    weights: &[f64],
    d: &[f64],
    gamma: f64,
    family: char,
) -> Result<EigenFamily> {
    let n = weights.len();
    let fail = |reason: String| Error::NonRealSpectrum { family, reason };
    let sq: Vec<f64> = (0..n).map(|m| (weights[m] * row_scale[m]).sqrt()).collect();
    let h = DMatrix::from_fn(n, n, |a, b| {
        let delta = if a == b { 1.0 } else { 0.0 };
        delta - gamma * sq[a] * k0[(a, b)] * sq[b]
    });
    let chol = h
        .cholesky()
        .ok_or_else(|| fail("scattering operator is not positive definite".into()))?;
    let l = chol.l();
    let dinv_l = DMatrix::from_fn(n, n, |a, b| l[(a, b)] / d[a]);
    let mut t = l.transpose() * dinv_l;
    let sym = (&t + t.transpose()) * 0.5;
    t.copy_from(&sym);
    let eig = SymmetricEigen::new(t);
    let eta = l
        .transpose()
        .solve_upper_triangular(&eig.eigenvectors)
        .ok_or_else(|| fail("triangular back-substitution failed".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    let lam_raw: Vec<f64> = eig.eigenvalues.iter().map(|mu| -mu).collect();
    order.sort_by(|&a, &b| lam_raw[a].total_cmp(&lam_raw[b]));
    let lambda: Vec<f64> = order.iter().map(|&k| lam_raw[k]).collect();
    let unscale: Vec<f64> = (0..n).map(|m| (row_scale[m] / weights[m]).sqrt()).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut peak = 0.0f64;
        let mut peak_val = 0.0;
        for m in 0..n {
            let v = eta[(m, k)] * unscale[m];
            vectors[(m, col)] = v;
            if v.abs() > peak {
                peak = v.abs();
                peak_val = v;
            }
        }
        if peak == 0.0 || !peak.is_finite() {
            return Err(fail(format!("eigenvector {col} vanished")));
        }
        for m in 0..n {
            vectors[(m, col)] /= peak_val;
        }
    }

    let negatives = lambda.iter().filter(|&&l| l < 0.0).count();
    if negatives * 2 != n || lambda.iter().any(|l| *l == 0.0 || !l.is_finite()) {
        return Err(fail(format!(
            "expected {} negative eigenvalues, found {negatives}",
            n / 2
        )));
    }

    // Residual of the original nonsymmetric relation.
    let scale = lambda.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    let kw = DMatrix::from_fn(n, n, |a, b| {
        let delta = if a == b { 1.0 } else { 0.0 };
        (gamma * row_scale[a] * k0[(a, b)] * weights[b] - delta) / d[a]
    });
    let applied = &kw * &vectors;
    let mut residual = 0.0f64;
    for col in 0..n {
        for m in 0..n {
            residual = residual.max((applied[(m, col)] - lambda[col] * vectors[(m, col)]).abs());
        }
    }
    residual /= scale;
    if !(residual <= 1e-8) {
        return Err(fail(format!("eigen-relation residual {residual:e}")));
    }
    let sv = vectors.clone().singular_values();
    let condition = sv.max() / sv.min();

    Ok(EigenFamily {
        lambda,
        vectors,
        residual,
        condition,
    })
}

/// The x- and y-family eigenpairs for one `(gamma, g)` pair. Independent of
/// `sigma_t`, which only scales the exponents.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub gamma: f64,
    pub g: f64,
    pub x: EigenFamily,
    pub y: EigenFamily,
}

impl Spectrum {
    pub fn compute(quad: &QuadratureSet, kernel: &ScatterKernel, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("scattering ratio must lie in [0, 1), got {gamma}"),
            });
        }
        let w = quad.weights();
        let r = kernel.row_scale();
        let x = reduced_eigen(kernel.raw(), r, w, &quad.cs(), gamma, 'x')?;
        let y = reduced_eigen(kernel.raw(), r, w, &quad.ss(), gamma, 'y')?;
        Ok(Spectrum {
            gamma,
            g: kernel.g(),
            x,
            y,
        })
    }

    /// Writes `family,k,lambda,xi_1..xi_4M` with 1-based `k` over all `8M`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.x.lambda.len();
        write!(out, "family,k,lambda")?;
        for m in 1..=n {
            write!(out, ",xi_{m}")?;
        }
        writeln!(out)?;
        for (name, fam, offset) in [("x", &self.x, 0), ("y", &self.y, n)] {
            for k in 0..n {
                write!(out, "{name},{},{:.16e}", k + offset + 1, fam.lambda[k])?;
                for m in 0..n {
                    write!(out, ",{:.16e}", fam.vectors[(m, k)])?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

/// The `8M` basis functions of one cell, in cell-local coordinates
/// `(dx, dy) in [0, h]^2`.
///
/// Index `k` in `0..4M` is the x-family (first `2M` anchored on the left
/// edge, the rest on the right edge); `4M..8M` is the y-family (bottom, then
/// top).
#[derive(Debug, Clone)]
pub struct CellBasis {
    spectrum: Arc<Spectrum>,
    sigma_t: f64,
    h: f64,
    four_m: usize,
}

impl CellBasis {
    pub fn new(spectrum: Arc<Spectrum>, sigma_t: f64, h: f64) -> Self {
        let four_m = spectrum.x.lambda.len();
        CellBasis {
            spectrum,
            sigma_t,
            h,
            four_m,
        }
    }

    pub fn spectrum(&self) -> &Arc<Spectrum> {
        &self.spectrum
    }

    pub fn sigma_t(&self) -> f64 {
        self.sigma_t
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Number of basis functions, `8M`.
    pub fn len(&self) -> usize {
        2 * self.four_m
    }

    pub fn is_empty(&self) -> bool {
        self.four_m == 0
    }

    /// Number of ordinates, `4M`.
    pub fn ordinates(&self) -> usize {
        self.four_m
    }

    fn split(&self, k: usize) -> (&EigenFamily, usize, bool) {
        if k < self.four_m {
            (&self.spectrum.x, k, true)
        } else {
            (&self.spectrum.y, k - self.four_m, false)
        }
    }

    pub fn lambda(&self, k: usize) -> f64 {
        let (fam, idx, _) = self.split(k);
        fam.lambda[idx]
    }

    pub fn xi(&self, k: usize) -> nalgebra::DVectorView<'_, f64> {
        let (fam, idx, _) = self.split(k);
        fam.vectors.column(idx)
    }

    pub fn anchor(&self, k: usize) -> Side {
        let (fam, idx, is_x) = self.split(k);
        match (is_x, fam.lambda[idx] < 0.0) {
            (true, true) => Side::Left,
            (true, false) => Side::Right,
            (false, true) => Side::Bottom,
            (false, false) => Side::Top,
        }
    }

    /// Scalar exponential factor of basis `k` at local offsets; lies in (0, 1].
    pub fn zeta(&self, k: usize, dx: f64, dy: f64) -> f64 {
        let (fam, idx, is_x) = self.split(k);
        let lam = fam.lambda[idx];
        let along = if is_x { dx } else { dy };
        let offset = if lam < 0.0 { along } else { along - self.h };
        (lam * self.sigma_t * offset).exp()
    }

    /// Value of `zeta` at the cell center, the quantity compared with the
    /// selection threshold.
    pub fn center_decay(&self, k: usize) -> f64 {
        (-0.5 * self.lambda(k).abs() * self.sigma_t * self.h).exp()
    }

    pub fn eval(&self, k: usize, dx: f64, dy: f64) -> Result<DVector<f64>> {
        if k >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.len(),
            });
        }
        let z = self.zeta(k, dx, dy);
        Ok(self.xi(k) * z)
    }
}

type SpectrumKey = (u64, u64);

/// Thread-safe memo of kernels and spectra keyed by the exact bit patterns of
/// `g` and `gamma`. Concurrent inserts of the same key are harmless: the first
/// stored value wins and both computations are identical.
#[derive(Debug)]
pub struct EigenCache {
    quad: Arc<QuadratureSet>,
    kernels: Mutex<HashMap<u64, Arc<ScatterKernel>>>,
    spectra: Mutex<HashMap<SpectrumKey, Arc<Spectrum>>>,
}

impl EigenCache {
    pub fn new(quad: Arc<QuadratureSet>) -> Self {
        EigenCache {
            quad,
            kernels: Mutex::new(HashMap::new()),
            spectra: Mutex::new(HashMap::new()),
        }
    }

    pub fn quadrature(&self) -> &Arc<QuadratureSet> {
        &self.quad
    }

    pub fn kernel(&self, g: f64) -> Result<Arc<ScatterKernel>> {
        let key = g.to_bits();
        if let Some(k) = self.kernels.lock().expect("kernel cache").get(&key) {
            return Ok(Arc::clone(k));
        }
        let built = Arc::new(ScatterKernel::new(&self.quad, g)?);
        let mut map = self.kernels.lock().expect("kernel cache");
        Ok(Arc::clone(map.entry(key).or_insert(built)))
    }

    pub fn spectrum(&self, medium: &CellMedium) -> Result<Arc<Spectrum>> {
        medium.validate()?;
        let gamma = medium.gamma();
        let key = (gamma.to_bits(), medium.g.to_bits());
        if let Some(s) = self.spectra.lock().expect("spectrum cache").get(&key) {
            return Ok(Arc::clone(s));
        }
        let kernel = self.kernel(medium.g)?;
        let built = Arc::new(Spectrum::compute(&self.quad, &kernel, gamma)?);
        let mut map = self.spectra.lock().expect("spectrum cache");
        Ok(Arc::clone(map.entry(key).or_insert(built)))
    }

    pub fn len(&self) -> usize {
        self.spectra.lock().expect("spectrum cache").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Distinct spectra in a deterministic order (by gamma, then g).
    pub fn spectra(&self) -> Vec<Arc<Spectrum>> {
        let mut all: Vec<Arc<Spectrum>> = self
            .spectra
            .lock()
            .expect("spectrum cache")
            .values()
            .cloned()
            .collect();
        all.sort_by(|a, b| a.gamma.total_cmp(&b.gamma).then(a.g.total_cmp(&b.g)));
        all
    }
}

/// Convenience wrapper building a cell basis without a shared cache.
pub fn cell_eigenbasis(quad: &QuadratureSet, kernel: &ScatterKernel, medium: &CellMedium, h: f64) -> Result<CellBasis> {
    medium.validate()?;
    if kernel.g() != medium.g {
        return Err(Error::InvalidParameter {
            name: "kernel",
            reason: format!("kernel built for g = {}, medium has g = {}", kernel.g(), medium.g),
        });
    }
    let spectrum = Spectrum::compute(quad, kernel, medium.gamma())?;
    Ok(CellBasis::new(Arc::new(spectrum), medium.sigma_t, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn basis(order: usize, medium: CellMedium, h: f64) -> (QuadratureSet, ScatterKernel, CellBasis) {
        let q = QuadratureSet::new(order).unwrap();
        let k = ScatterKernel::new(&q, medium.g).unwrap();
        let b = cell_eigenbasis(&q, &k, &medium, h).unwrap();
        (q, k, b)
    }

    #[test]
    fn pure_absorber_has_closed_form_spectrum() {
        let medium = CellMedium::new(2.0, 0.0, 0.0, 0.0).unwrap();
        let (q, _, b) = basis(4, medium, 0.1);
        let mut expected: Vec<f64> = q.cs().iter().map(|c| -1.0 / c).collect();
        expected.sort_by(f64::total_cmp);
        for (k, e) in expected.iter().enumerate() {
            assert_relative_eq!(b.lambda(k), *e, max_relative = 1e-13);
            let xi = b.xi(k);
            let ones = xi.iter().filter(|v| (**v - 1.0).abs() < 1e-13).count();
            let zeros = xi.iter().filter(|v| v.abs() < 1e-13).count();
            assert_eq!((ones, zeros), (1, q.len() - 1));
        }
    }

    #[test]
    fn sign_split_and_normalization() {
        for (gamma, g) in [(0.5, 0.0), (0.9999995, 0.0), (0.3, 0.2), (0.9, -0.3)] {
            let medium = CellMedium::new(1.0, gamma, g, 0.0).unwrap();
            let (q, _, b) = basis(6, medium, 0.1);
            let two_m = q.len() / 2;
            for fam in [&b.spectrum().x, &b.spectrum().y] {
                assert!(fam.lambda.windows(2).all(|w| w[0] < w[1]));
                assert!(fam.lambda[two_m - 1] < 0.0 && fam.lambda[two_m] > 0.0);
                for col in fam.vectors.column_iter() {
                    let max = col.iter().cloned().fold(f64::MIN, f64::max);
                    let amax = col.amax();
                    assert_eq!(max, 1.0);
                    assert_eq!(amax, 1.0);
                }
                assert!(fam.condition.is_finite());
            }
        }
    }

    #[test]
    fn spectrum_is_symmetric_under_negation() {
        let medium = CellMedium::new(1.0, 0.8, 0.25, 0.0).unwrap();
        let (q, _, b) = basis(8, medium, 0.1);
        let n = q.len();
        for fam in [&b.spectrum().x, &b.spectrum().y] {
            for k in 0..n / 2 {
                assert_relative_eq!(-fam.lambda[k], fam.lambda[n - 1 - k], max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn zeta_at_edges_and_center() {
        let medium = CellMedium::new(3.0, 1.5, 0.0, 0.0).unwrap();
        let h = 0.25;
        let (_, _, b) = basis(4, medium, h);
        for k in 0..b.len() {
            let lam = b.lambda(k);
            let anchor = b.anchor(k);
            let (ax, ay) = anchor.local_midpoint(h);
            assert_eq!(b.zeta(k, ax, ay), 1.0);
            let (ox, oy) = anchor.opposite().local_midpoint(h);
            assert_relative_eq!(b.zeta(k, ox, oy), (-lam.abs() * 3.0 * h).exp(), max_relative = 1e-14);
            assert_eq!(b.zeta(k, h / 2.0, h / 2.0), b.center_decay(k));
            let v = b.eval(k, ax, ay).unwrap();
            assert_eq!(v, b.xi(k).into_owned());
        }
        assert!(b.eval(b.len(), 0.0, 0.0).is_err());
    }

    #[test]
    fn anchors_follow_index_blocks() {
        let medium = CellMedium::new(1.0, 0.5, 0.0, 0.0).unwrap();
        let (q, _, b) = basis(4, medium, 0.1);
        let m = q.m();
        for side in Side::ALL {
            for k in side.centered_range(m) {
                assert_eq!(b.anchor(k), side);
            }
        }
    }

    #[test]
    fn special_solution_values() {
        assert_eq!(special_solution(&CellMedium::new(1.0, 0.5, 0.0, 0.0).unwrap()).unwrap(), 0.0);
        assert_eq!(special_solution(&CellMedium::new(3.0, 1.0, 0.0, 1.0).unwrap()).unwrap(), 0.5);
        assert!(CellMedium::new(1.0, 1.0, 0.0, 0.0).is_err());
        assert!(CellMedium::new(1.0, 0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn cache_reuses_spectra() {
        let cache = EigenCache::new(Arc::new(QuadratureSet::new(4).unwrap()));
        let a = CellMedium::new(1000.0, 999.9995, 0.0, 0.0).unwrap();
        let b = CellMedium::new(1.0, 0.5, 0.0, 0.0).unwrap();
        let s1 = cache.spectrum(&a).unwrap();
        let s2 = cache.spectrum(&b).unwrap();
        let s3 = cache.spectrum(&a).unwrap();
        assert!(Arc::ptr_eq(&s1, &s3));
        assert!(!Arc::ptr_eq(&s1, &s2));
        assert_eq!(cache.len(), 2);
        let fresh = Spectrum::compute(cache.quadrature(), &cache.kernel(0.0).unwrap(), a.gamma()).unwrap();
        assert_eq!(*s1, fresh);
    }

    #[test]
    fn eigen_csv_has_one_row_per_basis_function() {
        let q = QuadratureSet::new(2).unwrap();
        let k = ScatterKernel::new(&q, 0.0).unwrap();
        let s = Spectrum::compute(&q, &k, 0.5).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "family,k,lambda,xi_1,xi_2,xi_3,xi_4");
        assert_eq!(lines.len(), 9);
        assert!(lines[8].starts_with("y,8,"));
    }

    fn residual_of_basis(order: usize, medium: CellMedium, seed: u64) -> f64 {
        let h = 0.2;
        let (q, kern, b) = basis(order, medium, h);
        let n = q.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let (dx, dy) = (rng.random_range(0.0..h), rng.random_range(0.0..h));
            let k = rng.random_range(0..b.len());
            let phi = b.eval(k, dx, dy).unwrap();
            let rate = b.lambda(k) * medium.sigma_t;
            let is_x = k < n;
            let scale = phi.amax() * (rate.abs() + medium.sigma_t);
            for m in 0..n {
                let d = &q.directions()[m];
                let grad = if is_x { d.c } else { d.s } * rate * phi[m];
                let scatter: f64 = (0..n).map(|l| kern.matrix()[(m, l)] * q.weights()[l] * phi[l]).sum();
                let r = grad + medium.sigma_t * phi[m] - medium.sigma_s * scatter;
                worst = worst.max(r.abs() / scale);
            }
        }
        worst
    }

    #[test]
    fn basis_functions_solve_homogeneous_equations() {
        let media = [
            CellMedium::new(1.0, 0.5, 0.0, 0.0).unwrap(),
            CellMedium::new(1000.0, 999.9995, 0.0, 0.0).unwrap(),
            CellMedium::new(50.0, 45.0, 0.2, 0.0).unwrap(),
        ];
        for (i, medium) in media.iter().enumerate() {
            assert!(residual_of_basis(6, *medium, i as u64) < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn admissible_media_give_split_real_spectra(
            order in prop::sample::select(vec![2usize, 4, 6, 8]),
            gamma in 0.0f64..0.9999,
            g in -0.6f64..0.6,
            sigma_t in 0.1f64..100.0,
        ) {
            let medium = CellMedium::new(sigma_t, gamma * sigma_t, g, 0.0).unwrap();
            let (q, _, b) = basis(order, medium, 0.1);
            let n = q.len();
            for fam in [&b.spectrum().x, &b.spectrum().y] {
                prop_assert_eq!(fam.lambda.iter().filter(|l| **l < 0.0).count(), n / 2);
                prop_assert!(fam.residual < 1e-10);
            }
            prop_assert!(residual_of_basis(order, medium, 7) < 1e-9);
        }
    }
}
