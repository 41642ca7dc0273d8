//! Benchmark problems, per-cell coefficient averaging, inflow data, and the
//! JSON/CSV problem description format.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::angular::{gauss_legendre, Direction, QuadratureSet};
use crate::error::{Error, Result};
use crate::local_basis::CellMedium;
use crate::mesh::{InterfaceKind, Mesh};

/// Diffusive subregion of the lattice benchmark.
pub const LATTICE_DIFFUSIVE: CellMedium = CellMedium {
    sigma_t: 1000.0,
    sigma_s: 999.9995,
    g: 0.0,
    q: 0.0,
};

/// Transport subregion of the lattice benchmark.
pub const LATTICE_TRANSPORT: CellMedium = CellMedium {
    sigma_t: 1.0,
    sigma_s: 0.5,
    g: 0.0,
    q: 0.0,
};

/// Cross-section and source fields of a problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    /// 4x4 checkerboard; subregion `(a, b)` is diffusive when `a + b` is even.
    Lattice,
    /// Smooth transition from a diffusive to a transport regime along x.
    BufferZone,
    Uniform(CellMedium),
    /// One medium per cell, indexed `j * I + i`.
    Table(Vec<CellMedium>),
}

pub type InflowFn = dyn Fn(f64, f64, &Direction) -> f64 + Send + Sync;

/// Incoming angular flux on the domain boundary.
#[derive(Clone)]
pub enum Inflow {
    Constant(f64),
    Function(Arc<InflowFn>),
}

impl fmt::Debug for Inflow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Inflow::Constant(v) => write!(f, "Constant({v})"),
            Inflow::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl PartialEq for Inflow {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Inflow::Constant(a), Inflow::Constant(b)) => a == b,
            (Inflow::Function(a), Inflow::Function(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl Inflow {
    pub fn eval(&self, x: f64, y: f64, u: &Direction) -> f64 {
        match self {
            Inflow::Constant(v) => *v,
            Inflow::Function(f) => f(x, y, u),
        }
    }

    pub fn max_abs_bound(&self) -> Option<f64> {
        match self {
            Inflow::Constant(v) => Some(v.abs()),
            Inflow::Function(_) => None,
        }
    }
}

/// Inflow values per interface, in the order of the interface's inflow
/// ordinates; empty for interior interfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    values: Vec<Vec<f64>>,
}

impl BoundaryData {
    pub fn from_inflow(mesh: &Mesh, quad: &QuadratureSet, inflow: &Inflow) -> Result<Self> {
        let mut values = Vec::with_capacity(mesh.interfaces().len());
        for f in mesh.interfaces() {
            match f.kind {
                InterfaceKind::Boundary { side, .. } => {
                    let (x, y) = f.midpoint;
                    let row: Vec<f64> = quad
                        .inflow(side.outward_normal())
                        .iter()
                        .map(|&m| inflow.eval(x, y, &quad.directions()[m]))
                        .collect();
                    if row.iter().any(|v| !v.is_finite()) {
                        return Err(Error::InvalidParameter {
                            name: "inflow",
                            reason: format!("non-finite inflow at ({x}, {y})"),
                        });
                    }
                    values.push(row);
                }
                InterfaceKind::Interior { .. } => values.push(Vec::new()),
            }
        }
        Ok(BoundaryData { values })
    }

    /// Wraps explicit values; `values[id]` must match the inflow count of
    /// boundary interface `id`.
    pub fn from_values(mesh: &Mesh, quad: &QuadratureSet, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != mesh.interfaces().len() {
            return Err(Error::DimensionMismatch {
                expected: mesh.interfaces().len(),
                got: values.len(),
            });
        }
        for (f, v) in mesh.interfaces().iter().zip(&values) {
            let expected = if f.is_boundary() { quad.len() / 2 } else { 0 };
            if v.len() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    got: v.len(),
                });
            }
        }
        Ok(BoundaryData { values })
    }

    pub fn values(&self, interface: usize) -> &[f64] {
        &self.values[interface]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

/// A complete problem description.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub name: String,
    pub coefficients: Coefficients,
    pub inflow: Inflow,
    /// Cells per side, `I`.
    pub cells: usize,
    /// Quadrature order, `N`.
    pub order: usize,
    pub deltas: Vec<f64>,
}

pub fn lattice_problem(cells: usize, order: usize) -> Result<ProblemSpec> {
    if cells == 0 || !cells.is_multiple_of(4) {
        return Err(Error::config("I", format!("lattice needs I divisible by 4, got {cells}")));
    }
    QuadratureSet::new(order)?;
    Ok(ProblemSpec {
        name: "lattice".into(),
        coefficients: Coefficients::Lattice,
        inflow: Inflow::Constant(1.0),
        cells,
        order,
        deltas: Vec::new(),
    })
}

pub fn buffer_zone_problem(cells: usize, order: usize) -> Result<ProblemSpec> {
    if cells < 2 {
        return Err(Error::config("I", format!("buffer zone needs I >= 2, got {cells}")));
    }
    QuadratureSet::new(order)?;
    Ok(ProblemSpec {
        name: "buffer_zone".into(),
        coefficients: Coefficients::BufferZone,
        inflow: Inflow::Constant(0.0),
        cells,
        order,
        deltas: Vec::new(),
    })
}

pub fn constant_problem(cells: usize, order: usize, medium: CellMedium, inflow: f64) -> Result<ProblemSpec> {
    medium.validate()?;
    if cells == 0 {
        return Err(Error::config("I", "need at least one cell"));
    }
    QuadratureSet::new(order)?;
    Ok(ProblemSpec {
        name: "constant".into(),
        coefficients: Coefficients::Uniform(medium),
        inflow: Inflow::Constant(inflow),
        cells,
        order,
        deltas: Vec::new(),
    })
}

/// Buffer-zone point values `(sigma_t, sigma_a, q)`.
pub fn buffer_zone_point(x: f64, y: f64) -> (f64, f64, f64) {
    let ramp = 0.02 * x + 0.001;
    let r2 = x * x + y * y;
    ((1.0 + r2) / ramp, ramp * (0.5 + r2), ramp * (x * y).sin())
}

const BUFFER_G: f64 = 0.2;

fn buffer_zone_cell(i: usize, j: usize, h: f64) -> Result<CellMedium> {
    let (nodes, weights) = gauss_legendre(3);
    let (mut st, mut sa, mut q) = (0.0, 0.0, 0.0);
    for (a, wa) in nodes.iter().zip(&weights) {
        for (b, wb) in nodes.iter().zip(&weights) {
            let x = (i as f64 + 0.5 + 0.5 * a) * h;
            let y = (j as f64 + 0.5 + 0.5 * b) * h;
            let w = 0.25 * wa * wb;
            let (t, ab, s) = buffer_zone_point(x, y);
            st += w * t;
            sa += w * ab;
            q += w * s;
        }
    }
    CellMedium::new(st, st - sa, BUFFER_G, q)
}

impl ProblemSpec {
    pub fn mesh(&self) -> Result<Mesh> {
        Mesh::new(self.cells)
    }

    pub fn quadrature(&self) -> Result<QuadratureSet> {
        QuadratureSet::new(self.order)
    }

    /// Cell-averaged media, indexed like the mesh cells.
    pub fn media(&self) -> Result<Vec<CellMedium>> {
        let n = self.cells;
        let h = 1.0 / n as f64;
        let media: Vec<CellMedium> = match &self.coefficients {
            Coefficients::Lattice => {
                if !n.is_multiple_of(4) {
                    return Err(Error::config("I", format!("lattice needs I divisible by 4, got {n}")));
                }
                let block = n / 4;
                (0..n * n)
                    .map(|c| {
                        let (i, j) = (c % n, c / n);
                        if (i / block + j / block).is_multiple_of(2) {
                            LATTICE_DIFFUSIVE
                        } else {
                            LATTICE_TRANSPORT
                        }
                    })
                    .collect()
            }
            Coefficients::BufferZone => (0..n * n)
                .map(|c| buffer_zone_cell(c % n, c / n, h))
                .collect::<Result<_>>()?,
            Coefficients::Uniform(m) => vec![*m; n * n],
            Coefficients::Table(t) => {
                if t.len() != n * n {
                    return Err(Error::config(
                        "coefficients_csv",
                        format!("table has {} cells, mesh has {}", t.len(), n * n),
                    ));
                }
                t.clone()
            }
        };
        for (c, m) in media.iter().enumerate() {
            m.validate().map_err(|e| {
                Error::config("coefficients", format!("cell ({}, {}): {e}", c % n + 1, c / n + 1))
            })?;
        }
        Ok(media)
    }

    pub fn boundary_data(&self, mesh: &Mesh, quad: &QuadratureSet) -> Result<BoundaryData> {
        BoundaryData::from_inflow(mesh, quad, &self.inflow)
    }

    /// Serializable description; table coefficients refer to `table_path`.
    pub fn to_config(&self, table_path: Option<&Path>) -> Result<ProblemConfig> {
        let inflow = match &self.inflow {
            Inflow::Constant(v) => Some(*v),
            Inflow::Function(_) => {
                return Err(Error::config("inflow", "function inflow cannot be serialized"));
            }
        };
        let (problem, medium, csv) = match &self.coefficients {
            Coefficients::Lattice => ("lattice", None, None),
            Coefficients::BufferZone => ("buffer_zone", None, None),
            Coefficients::Uniform(m) => ("constant", Some(MediumConfig::from(*m)), None),
            Coefficients::Table(_) => {
                let path = table_path
                    .ok_or_else(|| Error::config("coefficients_csv", "table problems need a CSV path"))?;
                ("table", None, Some(path.to_path_buf()))
            }
        };
        Ok(ProblemConfig {
            problem: problem.into(),
            cells: self.cells,
            order: self.order,
            deltas: self.deltas.clone(),
            outputs: Vec::new(),
            coefficients_csv: csv,
            inflow,
            medium,
        })
    }

    /// Writes `i,j,sigma_t,sigma_s,g,q` (1-based indices) for every cell.
    pub fn write_coefficients_csv<W: Write>(&self, out: W) -> Result<()> {
        let media = self.media()?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "sigma_t", "sigma_s", "g", "q"])
            .map_err(csv_io)?;
        for (c, m) in media.iter().enumerate() {
            let (i, j) = (c % self.cells + 1, c / self.cells + 1);
            w.write_record([
                i.to_string(),
                j.to_string(),
                format!("{:.17e}", m.sigma_t),
                format!("{:.17e}", m.sigma_s),
                format!("{:.17e}", m.g),
                format!("{:.17e}", m.q),
            ])
            .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumConfig {
    pub sigma_t: f64,
    pub sigma_s: f64,
    #[serde(default)]
    pub g: f64,
    #[serde(default)]
    pub q: f64,
}

impl From<CellMedium> for MediumConfig {
    fn from(m: CellMedium) -> Self {
        MediumConfig {
            sigma_t: m.sigma_t,
            sigma_s: m.sigma_s,
            g: m.g,
            q: m.q,
        }
    }
}

/// On-disk problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// `lattice`, `buffer_zone`, `constant` or `table`.
    pub problem: String,
    #[serde(rename = "I")]
    pub cells: usize,
    #[serde(rename = "N")]
    pub order: usize,
    #[serde(default)]
    pub deltas: Vec<f64>,
    /// Requested outputs: any of `phi`, `psi`, `selection`, `matrix`, `eigen`, `quadrature`.
    #[serde(default)]
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients_csv: Option<PathBuf>,
    /// Constant inflow; defaults to the built-in problem's value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inflow: Option<f64>,
    /// Medium of a `constant` problem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub medium: Option<MediumConfig>,
}

pub const OUTPUT_KINDS: [&str; 6] = ["phi", "psi", "selection", "matrix", "eigen", "quadrature"];

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Resolves into a problem; relative CSV paths are taken from `base_dir`.
    pub fn into_spec(&self, base_dir: &Path) -> Result<ProblemSpec> {
        for d in &self.deltas {
            if !(0.0..1.0).contains(d) {
                return Err(Error::config("deltas", format!("tolerance must lie in [0, 1), got {d}")));
            }
        }
        for o in &self.outputs {
            if !OUTPUT_KINDS.contains(&o.as_str()) {
                return Err(Error::config("outputs", format!("unknown output `{o}`")));
            }
        }
        let mut spec = match self.problem.as_str() {
            "lattice" => lattice_problem(self.cells, self.order)?,
            "buffer_zone" => buffer_zone_problem(self.cells, self.order)?,
            "constant" => {
                let m = self
                    .medium
                    .ok_or_else(|| Error::config("medium", "constant problems need a medium"))?;
                let medium = CellMedium::new(m.sigma_t, m.sigma_s, m.g, m.q)
                    .map_err(|e| Error::config("medium", e.to_string()))?;
                constant_problem(self.cells, self.order, medium, self.inflow.unwrap_or(0.0))?
            }
            "table" => {
                let rel = self
                    .coefficients_csv
                    .as_ref()
                    .ok_or_else(|| Error::config("coefficients_csv", "table problems need a CSV path"))?;
                let path = if rel.is_absolute() { rel.clone() } else { base_dir.join(rel) };
                let table = read_coefficients_csv(&path, self.cells)?;
                QuadratureSet::new(self.order)?;
                ProblemSpec {
                    name: "table".into(),
                    coefficients: Coefficients::Table(table),
                    inflow: Inflow::Constant(0.0),
                    cells: self.cells,
                    order: self.order,
                    deltas: Vec::new(),
                }
            }
            other => return Err(Error::config("problem", format!("unknown problem `{other}`"))),
        };
        if let Some(v) = self.inflow {
            if !v.is_finite() {
                return Err(Error::config("inflow", "inflow must be finite"));
            }
            spec.inflow = Inflow::Constant(v);
        }
        spec.deltas = self.deltas.clone();
        spec.media()?;
        Ok(spec)
    }
}

/// Loads a JSON config file.
pub fn load_problem(path: &Path) -> Result<(ProblemSpec, ProblemConfig)> {
    let text = fs::read_to_string(path)?;
    let config = ProblemConfig::from_json(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok((config.into_spec(base)?, config))
}

#[derive(Debug, Deserialize)]
struct CoefficientRow {
    i: usize,
    j: usize,
    sigma_t: f64,
    sigma_s: f64,
    g: f64,
    q: f64,
}

/// Reads `i,j,sigma_t,sigma_s,g,q` with 1-based indices covering all cells.
pub fn read_coefficients_csv(path: &Path, cells: usize) -> Result<Vec<CellMedium>> {
    let field = "coefficients_csv";
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::config(field, e.to_string()))?;
    let mut table: Vec<Option<CellMedium>> = vec![None; cells * cells];
    for (line, row) in reader.deserialize::<CoefficientRow>().enumerate() {
        let row = row.map_err(|e| Error::config(field, format!("row {}: {e}", line + 2)))?;
        if row.i == 0 || row.j == 0 || row.i > cells || row.j > cells {
            return Err(Error::config(
                field,
                format!("row {}: cell ({}, {}) outside a {cells}x{cells} mesh", line + 2, row.i, row.j),
            ));
        }
        let medium = CellMedium::new(row.sigma_t, row.sigma_s, row.g, row.q)
            .map_err(|e| Error::config(field, format!("cell ({}, {}): {e}", row.i, row.j)))?;
        table[(row.j - 1) * cells + row.i - 1] = Some(medium);
    }
    table
        .into_iter()
        .enumerate()
        .map(|(c, m)| {
            m.ok_or_else(|| Error::config(field, format!("cell ({}, {}) missing", c % cells + 1, c / cells + 1)))
        })
        .collect()
}
