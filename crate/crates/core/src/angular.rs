//! Discrete-ordinate quadrature in x-y geometry and the discretized
//! Henyey-Greenstein scattering kernel.
//!
//! Directions are projections of a triangular level-symmetric layout on the
//! unit sphere. Polar levels are the positive nodes of the N-point
//! Gauss-Legendre rule; the level closest to the pole carries one azimuth per
//! quadrant, the next one two, and so on up to N/2 at the level closest to the
//! equator. Azimuths are equally spaced inside each quadrant at half-step
//! offsets, so no direction is parallel to a mesh edge. This gives
//! `4M = N(N+2)/2` directions, `M` per quadrant.
//!
//! Weights are normalized to sum to one and every kernel row is rescaled so
//! that `sum_n kappa[m][n] * w[n] = 1`. With both conventions the constant
//! vector is a null vector of `gamma K W - I` at `gamma = 1`.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A discrete velocity direction `u = (c, s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub c: f64,
    pub s: f64,
    /// Polar level `zeta` in `[0, 1)`.
    pub zeta: f64,
    /// Azimuth in `[0, 2 pi)`.
    pub theta: f64,
}

impl Direction {
    fn new(zeta: f64, theta: f64) -> Self {
        let r = (1.0 - zeta * zeta).sqrt();
        Direction {
            c: r * theta.cos(),
            s: r * theta.sin(),
            zeta,
            theta,
        }
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        self.c * other.c + self.s * other.s
    }

    /// Component along an outward normal given as `(nx, ny)`.
    pub fn along(&self, normal: (f64, f64)) -> f64 {
        self.c * normal.0 + self.s * normal.1
    }
}

/// Quadrature set `{u_m, w_m}` with `4M` directions.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSet {
    order: usize,
    directions: Vec<Direction>,
    weights: Vec<f64>,
}

/// Quadrant sign patterns in storage order.
const QUADRANTS: [(f64, f64); 4] = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];

impl QuadratureSet {
    /// Builds the S_N set for an even order `2 <= N <= 24`.
    pub fn new(order: usize) -> Result<Self> {
        if !(2..=24).contains(&order) || !order.is_multiple_of(2) {
            return Err(Error::InvalidOrder(order));
        }
        let (nodes, node_weights) = gauss_legendre(order);
        // Positive nodes, pole first.
        let mut levels: Vec<(f64, f64)> = nodes
            .iter()
            .zip(&node_weights)
            .filter(|(z, _)| **z > 0.0)
            .map(|(z, w)| (*z, *w))
            .collect();
        levels.sort_by(|a, b| b.0.total_cmp(&a.0));

        let mut directions = Vec::with_capacity(order * (order + 2) / 2);
        let mut weights = Vec::with_capacity(order * (order + 2) / 2);
        for (sx, sy) in QUADRANTS {
            for (l, &(zeta, level_weight)) in levels.iter().enumerate() {
                let count = l + 1;
                let step = FRAC_PI_2 / count as f64;
                for a in 0..count {
                    let base = (a as f64 + 0.5) * step;
                    let theta = match (sx > 0.0, sy > 0.0) {
                        (true, true) => base,
                        (false, true) => std::f64::consts::PI - base,
                        (false, false) => std::f64::consts::PI + base,
                        (true, false) => 2.0 * std::f64::consts::PI - base,
                    };
                    let mut d = Direction::new(zeta, theta);
                    // Exact reflections instead of trig round-off across quadrants.
                    let r = (1.0 - zeta * zeta).sqrt();
                    d.c = sx * r * base.cos();
                    d.s = sy * r * base.sin();
                    directions.push(d);
                    weights.push(level_weight / count as f64);
                }
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);

        Ok(QuadratureSet {
            order,
            directions,
            weights,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of directions per quadrant.
    pub fn m(&self) -> usize {
        self.directions.len() / 4
    }

    /// Total number of directions, `4M`.
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cs(&self) -> Vec<f64> {
        self.directions.iter().map(|d| d.c).collect()
    }

    pub fn ss(&self) -> Vec<f64> {
        self.directions.iter().map(|d| d.s).collect()
    }

    /// Ordinates with `u . n < 0` for an outward normal `n`, ascending.
    pub fn inflow(&self, normal: (f64, f64)) -> Vec<usize> {
        self.directions
            .iter()
            .enumerate()
            .filter(|(_, d)| d.along(normal) < 0.0)
            .map(|(m, _)| m)
            .collect()
    }

    /// Index of the mirror image of direction `m` under `(c, s) -> (sx c, sy s)`.
    pub fn reflect(&self, m: usize, sx: f64, sy: f64) -> usize {
        let per_quadrant = self.m();
        let (qx, qy) = QUADRANTS[m / per_quadrant];
        let target = (qx * sx, qy * sy);
        let q = QUADRANTS
            .iter()
            .position(|&p| p == target)
            .expect("quadrant pattern");
        q * per_quadrant + m % per_quadrant
    }

    /// Writes `m,c,s,zeta,theta,weight` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "m,c,s,zeta,theta,weight")?;
        for (m, (d, w)) in self.directions.iter().zip(&self.weights).enumerate() {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                m, d.c, d.s, d.zeta, d.theta, w
            )?;
        }
        Ok(())
    }
}

/// Raw Henyey-Greenstein phase value at cosine `mu`.
pub fn henyey_greenstein(g: f64, mu: f64) -> f64 {
    (1.0 - g * g) / (1.0 + g * g - 2.0 * g * mu).powf(1.5)
}

/// Discretized scattering kernel `kappa[m][n]`.
///
/// `entries = diag(row_scale) * raw`, where `raw` holds the Henyey-Greenstein
/// values at `u_m . u_n` and `row_scale` enforces `sum_n kappa w = 1`.
#[derive(Debug, Clone)]
pub struct ScatterKernel {
    g: f64,
    raw: DMatrix<f64>,
    row_scale: Vec<f64>,
    entries: DMatrix<f64>,
}

impl ScatterKernel {
    pub fn new(quad: &QuadratureSet, g: f64) -> Result<Self> {
        if !(g.abs() < 1.0) {
            return Err(Error::InvalidAnisotropy(g));
        }
        let n = quad.len();
        let dirs = quad.directions();
        let raw = if g == 0.0 {
            DMatrix::from_element(n, n, 1.0)
        } else {
            DMatrix::from_fn(n, n, |m, k| henyey_greenstein(g, dirs[m].dot(&dirs[k])))
        };
        let w = quad.weights();
        let row_scale: Vec<f64> = (0..n)
            .map(|m| {
                if g == 0.0 {
                    1.0
                } else {
                    let sum: f64 = (0..n).map(|k| raw[(m, k)] * w[k]).sum();
                    1.0 / sum
                }
            })
            .collect();
        let entries = DMatrix::from_fn(n, n, |m, k| row_scale[m] * raw[(m, k)]);
        Ok(ScatterKernel {
            g,
            raw,
            row_scale,
            entries,
        })
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    /// Normalized kernel matrix `K`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Phase values before row normalization.
    pub fn raw(&self) -> &DMatrix<f64> {
        &self.raw
    }

    pub fn row_scale(&self) -> &[f64] {
        &self.row_scale
    }
}

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Tricomi initial guess, refined by Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
