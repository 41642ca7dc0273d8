//! One-dimensional slab geometry: the exponential eigenbasis on a single
//! interval, a two-point boundary solve, and threshold truncation of the
//! fast-decaying modes.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::angular::gauss_legendre;
use crate::error::{Error, Result};
use crate::local_basis::{reduced_eigen, EigenFamily};

/// Eigenpairs of `U^{-1} (gamma * 1 w^T - I)` on `2M` Gauss-Legendre
/// ordinates, sorted ascending. The first `M` are anchored at the left end.
#[derive(Debug, Clone)]
pub struct SlabBasis {
    pub mu: Vec<f64>,
    pub weights: Vec<f64>,
    pub gamma: f64,
    pub family: EigenFamily,
}

impl SlabBasis {
    pub fn half(&self) -> usize {
        self.mu.len() / 2
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn lambda(&self, k: usize) -> f64 {
        self.family.lambda[k]
    }
}

pub fn slab_eigenbasis(m: usize, gamma: f64) -> Result<SlabBasis> {
    if m == 0 || m > 64 {
        return Err(Error::InvalidParameter {
            name: "M",
            reason: format!("slab half-order must lie in [1, 64], got {m}"),
        });
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("scattering ratio must lie in [0, 1), got {gamma}"),
        });
    }
    let (mu, w) = gauss_legendre(2 * m);
    let total: f64 = w.iter().sum();
    let weights: Vec<f64> = w.iter().map(|v| v / total).collect();
    let n = 2 * m;
    let ones = DMatrix::from_element(n, n, 1.0);
    let family = reduced_eigen(&ones, &vec![1.0; n], &weights, &mu, gamma, 'z')?;
    Ok(SlabBasis {
        mu,
        weights,
        gamma,
        family,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlabProblem {
    pub sigma_t: f64,
    pub sigma_s: f64,
    pub q: f64,
    pub z_l: f64,
    pub z_r: f64,
    pub m: usize,
    /// Inflow at `z_l` for the `M` ordinates with `mu > 0`, ascending `mu`.
    pub inflow_left: Vec<f64>,
    /// Inflow at `z_r` for the `M` ordinates with `mu < 0`, ascending `mu`.
    pub inflow_right: Vec<f64>,
}

impl SlabProblem {
    fn validate(&self) -> Result<()> {
        if !(self.sigma_t > self.sigma_s && self.sigma_s >= 0.0) {
            return Err(Error::DegenerateMedium {
                sigma_t: self.sigma_t,
                sigma_s: self.sigma_s,
            });
        }
        if !(self.z_l < self.z_r) {
            return Err(Error::InvalidParameter {
                name: "z_r",
                reason: format!("need z_l < z_r, got [{}, {}]", self.z_l, self.z_r),
            });
        }
        for v in [&self.inflow_left, &self.inflow_right] {
            if v.len() != self.m {
                return Err(Error::DimensionMismatch {
                    expected: self.m,
                    got: v.len(),
                });
            }
        }
        Ok(())
    }
}

/// Angular flux `sum_k alpha_k xi_k exp(lambda_k sigma_t (z - z_k)) + q/sigma_a`.
#[derive(Debug, Clone)]
pub struct SlabSolution {
    pub basis: SlabBasis,
    pub sigma_t: f64,
    pub z_l: f64,
    pub z_r: f64,
    pub alpha: Vec<f64>,
    pub special: f64,
}

impl SlabSolution {
    fn factor(&self, k: usize, z: f64) -> f64 {
        let lam = self.basis.lambda(k);
        let anchor = if lam < 0.0 { self.z_l } else { self.z_r };
        (lam * self.sigma_t * (z - anchor)).exp()
    }

    /// Value of mode `k` relative to its anchor at the slab center.
    pub fn center_decay(&self, k: usize) -> f64 {
        (-0.5 * self.basis.lambda(k).abs() * self.sigma_t * (self.z_r - self.z_l)).exp()
    }

    pub fn kept(&self, k: usize, delta: f64) -> bool {
        self.center_decay(k) > delta
    }

    pub fn retained_count(&self, delta: f64) -> usize {
        (0..self.basis.len()).filter(|&k| self.kept(k, delta)).count()
    }

    /// Angular flux at `z`; with `delta = Some(d)` only modes kept at `d` contribute.
    pub fn eval(&self, z: f64, delta: Option<f64>) -> DVector<f64> {
        let n = self.basis.len();
        let mut psi = DVector::from_element(n, self.special);
        for k in 0..n {
            if delta.is_some_and(|d| !self.kept(k, d)) {
                continue;
            }
            let a = self.alpha[k] * self.factor(k, z);
            psi.axpy(a, &self.basis.family.vectors.column(k), 1.0);
        }
        psi
    }

    /// Quadrature-weighted scalar flux (weights sum to one).
    pub fn scalar(&self, z: f64, delta: Option<f64>) -> f64 {
        self.eval(z, delta).dot(&DVector::from_column_slice(&self.basis.weights))
    }

    /// Writes `z,phi,phi_delta_<d>...` on `points` equally spaced nodes.
    pub fn write_profile_csv<W: Write>(&self, mut out: W, deltas: &[f64], points: usize) -> std::io::Result<()> {
        write!(out, "z,phi")?;
        for d in deltas {
            write!(out, ",phi_delta_{d:e}")?;
        }
        writeln!(out)?;
        let points = points.max(2);
        for p in 0..points {
            let z = self.z_l + (self.z_r - self.z_l) * p as f64 / (points - 1) as f64;
            write!(out, "{z:.16e},{:.16e}", self.scalar(z, None))?;
            for d in deltas {
                write!(out, ",{:.16e}", self.scalar(z, Some(*d)))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Inflow traces `(left, right)` produced by the current coefficients.
    pub fn boundary_traces(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.basis.half();
        let left = self.eval(self.z_l, None);
        let right = self.eval(self.z_r, None);
        (left.as_slice()[m..].to_vec(), right.as_slice()[..m].to_vec())
    }
}

pub fn solve_slab(problem: &SlabProblem) -> Result<SlabSolution> {
    problem.validate()?;
    let gamma = problem.sigma_s / problem.sigma_t;
    let basis = slab_eigenbasis(problem.m, gamma)?;
    let special = problem.q / (problem.sigma_t - problem.sigma_s);
    let mut sol = SlabSolution {
        basis,
        sigma_t: problem.sigma_t,
        z_l: problem.z_l,
        z_r: problem.z_r,
        alpha: vec![0.0; 2 * problem.m],
        special,
    };
    let m = problem.m;
    let n = 2 * m;
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for k in 0..n {
        let fl = sol.factor(k, problem.z_l);
        let fr = sol.factor(k, problem.z_r);
        let xi = sol.basis.family.vectors.column(k);
        for r in 0..m {
            a[(r, k)] = xi[m + r] * fl;
            a[(m + r, k)] = xi[r] * fr;
        }
    }
    for r in 0..m {
        b[r] = problem.inflow_left[r] - special;
        b[m + r] = problem.inflow_right[r] - special;
    }
    let lu = a.lu();
    let x = lu.solve(&b).ok_or(Error::SingularMatrix { column: 0, row: 0 })?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix { column: 0, row: 0 });
    }
    sol.alpha = x.as_slice().to_vec();
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(m: usize, inflow: f64) -> SlabProblem {
        SlabProblem {
            sigma_t: 10.0,
            sigma_s: 5.0,
            q: 0.0,
            z_l: 0.0,
            z_r: 1.0,
            m,
            inflow_left: vec![inflow; m],
            inflow_right: vec![0.0; m],
        }
    }

    #[test]
    fn pure_absorber_eigenvalues() {
        let b = slab_eigenbasis(4, 0.0).unwrap();
        for k in 0..8 {
            let expected = -1.0 / b.mu[k];
            let found = b.family.lambda.iter().any(|l| (l - expected).abs() < 1e-12 * expected.abs());
            assert!(found);
        }
    }

    #[test]
    fn spectrum_is_symmetric_and_slow_pair_shrinks() {
        let mut prev = f64::INFINITY;
        for gamma in [0.5, 0.995, 0.99995] {
            let b = slab_eigenbasis(10, gamma).unwrap();
            for k in 0..10 {
                assert_relative_eq!(-b.lambda(k), b.lambda(19 - k), max_relative = 1e-10);
            }
            assert!(b.lambda(9) < 0.0 && b.lambda(10) > 0.0);
            assert!(b.lambda(10) < prev);
            prev = b.lambda(10);
            assert!(b.lambda(19) > 10.0);
        }
    }

    #[test]
    fn inflow_conditions_hold() {
        let p = SlabProblem {
            q: 2.0,
            inflow_right: vec![0.3; 6],
            ..problem(6, 1.0)
        };
        let s = solve_slab(&p).unwrap();
        let (l, r) = s.boundary_traces();
        for v in l {
            assert!((v - 1.0).abs() < 1e-10);
        }
        for v in r {
            assert!((v - 0.3).abs() < 1e-10);
        }
    }

    #[test]
    fn equilibrium_inflow_gives_zero_coefficients() {
        let p = SlabProblem {
            q: 1.5,
            ..problem(5, 0.3)
        };
        let special = 1.5 / 5.0;
        let p = SlabProblem {
            inflow_left: vec![special; 5],
            inflow_right: vec![special; 5],
            ..p
        };
        let s = solve_slab(&p).unwrap();
        assert!(s.alpha.iter().all(|a| a.abs() < 1e-12));
        assert_relative_eq!(s.scalar(0.37, None), special, max_relative = 1e-12);
    }

    #[test]
    fn manufactured_coefficients_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = solve_slab(&problem(10, 1.0)).unwrap();
        let mut truth = base.clone();
        truth.alpha = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (l, r) = truth.boundary_traces();
        let p = SlabProblem {
            inflow_left: l,
            inflow_right: r,
            ..problem(10, 0.0)
        };
        let s = solve_slab(&p).unwrap();
        for (a, b) in s.alpha.iter().zip(&truth.alpha) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
        }
    }

    #[test]
    fn truncation_counts_and_center_error() {
        let s = solve_slab(&problem(10, 1.0)).unwrap();
        assert_eq!(s.retained_count(0.0), 20);
        let amax = s.alpha.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut prev = 0;
        for d in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-8] {
            let kept = s.retained_count(d);
            assert!(kept >= prev);
            prev = kept;
            let err = (s.scalar(0.5, None) - s.scalar(0.5, Some(d))).abs();
            assert!(err <= (20 - kept) as f64 * d * amax + 1e-15);
        }
        assert_eq!(s.scalar(0.2, None), s.scalar(0.2, Some(0.0)));
    }

    #[test]
    fn profile_csv_layout() {
        let s = solve_slab(&problem(2, 1.0)).unwrap();
        let mut buf = Vec::new();
        s.write_profile_csv(&mut buf, &[1e-2, 1e-3], 11).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "z,phi,phi_delta_1e-2,phi_delta_1e-3");
        assert_eq!(lines.len(), 12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(slab_eigenbasis(0, 0.5).is_err());
        assert!(slab_eigenbasis(65, 0.5).is_err());
        assert!(slab_eigenbasis(3, 1.0).is_err());
        assert!(solve_slab(&SlabProblem { sigma_s: 10.0, ..problem(2, 1.0) }).is_err());
        assert!(solve_slab(&SlabProblem { z_r: 0.0, ..problem(2, 1.0) }).is_err());
        assert!(solve_slab(&SlabProblem { inflow_left: vec![1.0], ..problem(2, 1.0) }).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn retained_count_is_monotone(gamma in 0.0f64..0.999, d1 in 0.0f64..1.0, d2 in 0.0f64..1.0) {
            let p = SlabProblem { sigma_s: 10.0 * gamma, ..problem(6, 1.0) };
            let s = solve_slab(&p).unwrap();
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(s.retained_count(hi) <= s.retained_count(lo));
        }
    }
}
