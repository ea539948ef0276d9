//! Structured right-triangle meshes of the unit square and the coefficient
//! fields used by the experiments.
//!
//! Grid squares are indexed `(i, j)` with `i` along x and `j` along y, both
//! starting at the lower-left corner. Square `(i, j)` holds two elements:
//! `t = 0` below the diagonal `(i,j)-(i+1,j+1)` and `t = 1` above it. Element
//! index is `2 * (j * n + i) + t`. Subdomain `k = sj * N + si` covers squares
//! `si*m..(si+1)*m` by `sj*m..(sj+1)*m`.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredMesh {
    subdomains_per_side: usize,
    cells_per_subdomain_side: usize,
}

/// Builds the `(1/H)^2`-subdomain mesh with `H/h` cells per subdomain side.
pub fn build_mesh(subdomains_per_side: usize, cells_per_subdomain_side: usize) -> Result<StructuredMesh> {
    if subdomains_per_side == 0 {
        return Err(Error::InvalidParameter("subdomains_per_side must be at least 1".into()));
    }
    if cells_per_subdomain_side == 0 {
        return Err(Error::InvalidParameter("cells_per_subdomain_side must be at least 1".into()));
    }
    Ok(StructuredMesh { subdomains_per_side, cells_per_subdomain_side })
}

impl StructuredMesh {
    pub fn subdomains_per_side(&self) -> usize {
        self.subdomains_per_side
    }

    pub fn cells_per_subdomain_side(&self) -> usize {
        self.cells_per_subdomain_side
    }

    pub fn subdomain_count(&self) -> usize {
        self.subdomains_per_side * self.subdomains_per_side
    }

    /// Grid squares per side of the whole domain.
    pub fn cells_per_side(&self) -> usize {
        self.subdomains_per_side * self.cells_per_subdomain_side
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells_per_side() as f64
    }

    pub fn coarse_h(&self) -> f64 {
        1.0 / self.subdomains_per_side as f64
    }

    pub fn nodes_per_side(&self) -> usize {
        self.cells_per_side() + 1
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_side() * self.nodes_per_side()
    }

    pub fn element_count(&self) -> usize {
        2 * self.cells_per_side() * self.cells_per_side()
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * self.nodes_per_side() + i
    }

    pub fn node_ij(&self, node: usize) -> (usize, usize) {
        (node % self.nodes_per_side(), node / self.nodes_per_side())
    }

    pub fn node_coords(&self, node: usize) -> [f64; 2] {
        let (i, j) = self.node_ij(node);
        let h = self.h();
        [i as f64 * h, j as f64 * h]
    }

    pub fn is_dirichlet(&self, node: usize) -> bool {
        let (i, j) = self.node_ij(node);
        let n = self.cells_per_side();
        i == 0 || j == 0 || i == n || j == n
    }

    pub fn element_index(&self, i: usize, j: usize, t: usize) -> usize {
        2 * (j * self.cells_per_side() + i) + t
    }

    /// Grid square and half of element `e`.
    pub fn element_cell(&self, e: usize) -> (usize, usize, usize) {
        let n = self.cells_per_side();
        let sq = e / 2;
        (sq % n, sq / n, e % 2)
    }

    /// Counter-clockwise vertex triple of element `e`.
    pub fn element_nodes(&self, e: usize) -> [usize; 3] {
        let (i, j, t) = self.element_cell(e);
        if t == 0 {
            [self.node_index(i, j), self.node_index(i + 1, j), self.node_index(i + 1, j + 1)]
        } else {
            [self.node_index(i, j), self.node_index(i + 1, j + 1), self.node_index(i, j + 1)]
        }
    }

    pub fn element_vertices(&self, e: usize) -> [[f64; 2]; 3] {
        self.element_nodes(e).map(|v| self.node_coords(v))
    }

    pub fn element_subdomain(&self, e: usize) -> usize {
        let (i, j, _) = self.element_cell(e);
        let m = self.cells_per_subdomain_side;
        (j / m) * self.subdomains_per_side + i / m
    }

    /// Subdomain grid position `(si, sj)` of subdomain `k`.
    pub fn subdomain_position(&self, k: usize) -> (usize, usize) {
        (k % self.subdomains_per_side, k / self.subdomains_per_side)
    }

    /// Elements of subdomain `k` in increasing index order.
    pub fn subdomain_elements(&self, k: usize) -> Vec<usize> {
        let (si, sj) = self.subdomain_position(k);
        let m = self.cells_per_subdomain_side;
        let mut out = Vec::with_capacity(2 * m * m);
        for j in sj * m..(sj + 1) * m {
            for i in si * m..(si + 1) * m {
                out.push(self.element_index(i, j, 0));
                out.push(self.element_index(i, j, 1));
            }
        }
        out
    }

    /// Corner, edge or floating, by how many sides touch the outer boundary.
    pub fn subdomain_class(&self, k: usize) -> SubdomainClass {
        let (si, sj) = self.subdomain_position(k);
        let last = self.subdomains_per_side - 1;
        let touches = [si == 0, si == last, sj == 0, sj == last].iter().filter(|b| **b).count();
        match touches {
            0 => SubdomainClass::Floating,
            1 => SubdomainClass::Edge,
            _ => SubdomainClass::Corner,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubdomainClass {
    Corner,
    Edge,
    Floating,
}

impl SubdomainClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            SubdomainClass::Corner => "corner",
            SubdomainClass::Edge => "edge",
            SubdomainClass::Floating => "floating",
        }
    }
}

/// One positive coefficient per element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    rho: Vec<f64>,
    pattern_tag: String,
}

impl CoefficientField {
    pub fn new(mesh: &StructuredMesh, rho: Vec<f64>, pattern_tag: impl Into<String>) -> Result<Self> {
        if rho.len() != mesh.element_count() {
            return Err(Error::Shape { expected: mesh.element_count(), got: rho.len() });
        }
        if let Some((e, v)) = rho.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!("coefficient of element {e} is {v}, must be positive")));
        }
        Ok(CoefficientField { rho, pattern_tag: pattern_tag.into() })
    }

    /// Field with the same value on both triangles of every grid square.
    pub fn from_cells(mesh: &StructuredMesh, tag: impl Into<String>, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        Self::from_elements(mesh, tag, |i, j, _| f(i, j))
    }

    pub fn from_elements(
        mesh: &StructuredMesh,
        tag: impl Into<String>,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let rho = (0..mesh.element_count())
            .map(|e| {
                let (i, j, t) = mesh.element_cell(e);
                f(i, j, t)
            })
            .collect();
        Self::new(mesh, rho, tag)
    }

    pub fn rho(&self, e: usize) -> f64 {
        self.rho[e]
    }

    pub fn values(&self) -> &[f64] {
        &self.rho
    }

    pub fn pattern_tag(&self) -> &str {
        &self.pattern_tag
    }

    pub fn min(&self) -> f64 {
        self.rho.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> CoefficientField {
        CoefficientField {
            rho: self.rho.iter().map(|v| v * factor).collect(),
            pattern_tag: format!("{} x{factor}", self.pattern_tag),
        }
    }
}

fn default_high() -> f64 {
    1e6
}
fn default_low() -> f64 {
    1.0
}
fn default_extra() -> f64 {
    1e12
}
fn default_one() -> usize {
    1
}

/// Coefficient pattern description. Geometry is given in grid cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum PatternSpec {
    Constant {
        #[serde(default = "default_low")]
        value: f64,
    },
    /// Horizontal band crossing the domain, `offset` cells above the
    /// horizontal interface through `y = 1/2` (or through `y = 0` when there
    /// is a single subdomain row). Defaults to `H/(4h)`.
    Channel {
        #[serde(default = "default_high")]
        high: f64,
        #[serde(default = "default_low")]
        low: f64,
        #[serde(default)]
        offset: Option<usize>,
        #[serde(default = "default_one")]
        width: usize,
    },
    /// Spine with four teeth on a 32x32 reference lattice, scaled to the mesh.
    Comb {
        #[serde(default = "default_high")]
        high: f64,
        #[serde(default = "default_low")]
        low: f64,
    },
    /// Thin element chains in two floating subdomains; needs `H/h = 8`.
    String {
        #[serde(default = "default_extra")]
        high: f64,
        #[serde(default = "default_low")]
        low: f64,
    },
    /// Per subdomain: two horizontal and two vertical low channels, nine
    /// high inclusions.
    InclusionGrid {
        #[serde(default = "default_high")]
        high: f64,
        #[serde(default = "default_low")]
        low: f64,
    },
    /// Low background with two high subdomains meeting at `(1/2, 1/2)`.
    DualStripe {
        #[serde(default = "default_high")]
        high: f64,
        #[serde(default = "default_low")]
        low: f64,
    },
    /// Inclusion grid crossed by `channels` (0 to 4) extra-value lines.
    AddedChannels {
        #[serde(default = "default_high")]
        high: f64,
        #[serde(default = "default_low")]
        low: f64,
        #[serde(default = "default_extra")]
        extra: f64,
        channels: usize,
    },
    RasterFile {
        path: String,
    },
}

impl PatternSpec {
    pub fn name(&self) -> &'static str {
        match self {
            PatternSpec::Constant { .. } => "constant",
            PatternSpec::Channel { .. } => "channel",
            PatternSpec::Comb { .. } => "comb",
            PatternSpec::String { .. } => "string",
            PatternSpec::InclusionGrid { .. } => "inclusion_grid",
            PatternSpec::DualStripe { .. } => "dual_stripe",
            PatternSpec::AddedChannels { .. } => "added_channels",
            PatternSpec::RasterFile { .. } => "raster_file",
        }
    }

    /// The `(high, low)` pair for two-valued patterns.
    pub fn contrast(&self) -> Option<(f64, f64)> {
        match *self {
            PatternSpec::Channel { high, low, .. }
            | PatternSpec::Comb { high, low }
            | PatternSpec::String { high, low }
            | PatternSpec::InclusionGrid { high, low }
            | PatternSpec::DualStripe { high, low } => Some((high, low)),
            _ => None,
        }
    }
}

// Comb on a 32x32 lattice (H = 1/2, H/h = 16): spine rows [20, 21) over
// columns [3, 29); teeth two cells wide rising from row y0 to the spine.
const COMB_LATTICE: usize = 32;
const COMB_SPINE: (usize, usize, usize, usize) = (20, 1, 3, 29);
const COMB_TEETH: [(usize, usize); 4] = [(5, 5), (15, 6), (21, 0), (26, 4)];
const COMB_TOOTH_WIDTH: usize = 2;

// String chains as (i, j, t) in local cells of an 8x8 subdomain.
const STRING_ONE: [(usize, usize, usize); 10] = [
    (1, 1, 0),
    (2, 0, 0),
    (2, 0, 1),
    (2, 1, 0),
    (2, 1, 1),
    (3, 0, 1),
    (3, 2, 0),
    (4, 3, 0),
    (4, 4, 1),
    (5, 4, 1),
];
const STRING_TWO: [(usize, usize, usize); 17] = [
    (0, 1, 0),
    (1, 0, 0),
    (1, 1, 0),
    (1, 1, 1),
    (2, 1, 1),
    (1, 6, 0),
    (1, 6, 1),
    (1, 7, 1),
    (2, 3, 1),
    (2, 4, 0),
    (2, 5, 1),
    (3, 4, 1),
    (3, 5, 1),
    (5, 2, 0),
    (5, 2, 1),
    (6, 2, 1),
    (7, 3, 1),
];

/// Subdomains holding string subdomains #1 and #2.
pub fn string_subdomains(mesh: &StructuredMesh) -> (usize, usize) {
    let ns = mesh.subdomains_per_side();
    (ns + 1, 2 * ns + 2)
}

/// Subdomains holding comb subdomains #1 (lower left) and #2 (upper left).
pub fn comb_subdomains(mesh: &StructuredMesh) -> (usize, usize) {
    (0, mesh.subdomains_per_side())
}

/// Subdomains `(j, i)` of the dual stripe pattern: the one whose channels
/// reach its boundary, then the one whose channels stop short of it.
pub fn dual_stripe_subdomains(mesh: &StructuredMesh) -> (usize, usize) {
    let ns = mesh.subdomains_per_side();
    let c = ns / 2;
    ((c - 1) * ns + (c - 1), c * ns + c)
}

/// Subdomain of the channel pattern used for spectral calibration: the
/// floating one right above the midline, or the nearest one above it.
pub fn channel_subdomain(mesh: &StructuredMesh) -> usize {
    let ns = mesh.subdomains_per_side();
    (ns / 2) * ns + (ns.saturating_sub(1)).min(1)
}

fn require(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(what.to_string()))
    }
}

fn check_values(values: &[f64]) -> Result<()> {
    for v in values {
        require(*v > 0.0 && v.is_finite(), "coefficient values must be positive and finite")?;
    }
    Ok(())
}

fn in_band(offset: usize, q: usize) -> bool {
    (2 * q..3 * q).contains(&offset) || (5 * q..6 * q).contains(&offset)
}

/// Generates the field described by `spec`. Pure: equal inputs give equal fields.
pub fn generate_coefficients(mesh: &StructuredMesh, spec: &PatternSpec) -> Result<CoefficientField> {
    let n = mesh.cells_per_side();
    let m = mesh.cells_per_subdomain_side();
    let ns = mesh.subdomains_per_side();
    let tag = serde_json::to_string(spec)?;
    match *spec {
        PatternSpec::Constant { value } => {
            check_values(&[value])?;
            CoefficientField::from_cells(mesh, tag, |_, _| value)
        }
        PatternSpec::Channel { high, low, offset, width } => {
            check_values(&[high, low])?;
            let offset = match offset {
                Some(o) => o,
                None => {
                    require(m >= 4 && m % 4 == 0, "channel default offset H/(4h) needs H/h divisible by 4")?;
                    m / 4
                }
            };
            require(width >= 1, "channel width must be at least one cell")?;
            let row = (ns / 2) * m + offset;
            require(row + width <= n, "channel offset and width must fit inside the domain")?;
            CoefficientField::from_cells(mesh, tag, |_, j| if (row..row + width).contains(&j) { high } else { low })
        }
        PatternSpec::Comb { high, low } => {
            check_values(&[high, low])?;
            require(n % COMB_LATTICE == 0, "comb needs a multiple of 32 cells per side")?;
            let s = n / COMB_LATTICE;
            let (r, ws, a, b) = COMB_SPINE;
            let hit = |i: usize, j: usize| {
                let (x, y) = (i / s, j / s);
                let spine = (r..r + ws).contains(&y) && (a..b).contains(&x);
                let tooth = COMB_TEETH.iter().any(|&(tx, y0)| (tx..tx + COMB_TOOTH_WIDTH).contains(&x) && (y0..r).contains(&y));
                spine || tooth
            };
            CoefficientField::from_cells(mesh, tag, |i, j| if hit(i, j) { high } else { low })
        }
        PatternSpec::String { high, low } => {
            check_values(&[high, low])?;
            require(m == 8, "string pattern needs H/h = 8")?;
            require(ns >= 4, "string pattern needs at least 4 subdomains per side")?;
            let (one, two) = string_subdomains(mesh);
            let hit = |i: usize, j: usize, t: usize| {
                let k = (j / m) * ns + i / m;
                let local = (i % m, j % m, t);
                (k == one && STRING_ONE.contains(&local)) || (k == two && STRING_TWO.contains(&local))
            };
            CoefficientField::from_elements(mesh, tag, |i, j, t| if hit(i, j, t) { high } else { low })
        }
        PatternSpec::InclusionGrid { high, low } => {
            check_values(&[high, low])?;
            require(m % 8 == 0, "inclusion grid needs H/h divisible by 8")?;
            let q = m / 8;
            CoefficientField::from_cells(mesh, tag, |i, j| if in_band(i % m, q) || in_band(j % m, q) { low } else { high })
        }
        PatternSpec::DualStripe { high, low } => {
            check_values(&[high, low])?;
            require(m % 8 == 0, "dual stripe needs H/h divisible by 8")?;
            require(ns >= 4 && ns % 2 == 0, "dual stripe needs an even number (>= 4) of subdomains per side")?;
            let q = m / 8;
            let (sj, si) = dual_stripe_subdomains(mesh);
            CoefficientField::from_cells(mesh, tag, |i, j| {
                let k = (j / m) * ns + i / m;
                let (x, y) = (i % m, j % m);
                if k == sj {
                    if in_band(x, q) || in_band(y, q) {
                        low
                    } else {
                        high
                    }
                } else if k == si {
                    let span = q..m - q;
                    let cut = (in_band(x, q) && span.contains(&y)) || (in_band(y, q) && span.contains(&x));
                    if cut {
                        low
                    } else {
                        high
                    }
                } else {
                    low
                }
            })
        }
        PatternSpec::AddedChannels { high, low, extra, channels } => {
            check_values(&[high, low, extra])?;
            require(m % 8 == 0, "added channels need H/h divisible by 8")?;
            require(channels <= 4, "at most 4 added channels")?;
            let q = m / 8;
            let p = 2 * q + q / 2;
            // (horizontal?, index) in the order the lines are added.
            let lines = [(true, p), (false, p), (true, n - 1 - p), (false, n - 1 - p)];
            let lines = &lines[..channels];
            CoefficientField::from_cells(mesh, tag, |i, j| {
                if lines.iter().any(|&(hz, at)| if hz { j == at } else { i == at }) {
                    extra
                } else if in_band(i % m, q) || in_band(j % m, q) {
                    low
                } else {
                    high
                }
            })
        }
        PatternSpec::RasterFile { ref path } => {
            let file = std::fs::File::open(Path::new(path))?;
            load_coefficient_grid(file, mesh)
        }
    }
}

/// Rectangular table of cell values, first row at the top of the domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

/// Parses comma-separated rows of numbers. Row numbers in errors are 1-based.
pub fn parse_raster<R: Read>(stream: R) -> Result<Raster> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(stream);
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let row = rows + 1;
        let record = record.map_err(|e| Error::Format { row, msg: e.to_string() })?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::Format { row, msg: format!("expected {c} values, found {}", record.len()) });
            }
            _ => {}
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Format { row, msg: format!("column {}: {field:?} is not a number", col + 1) })?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain { row, col: col + 1, value: v });
            }
            values.push(v);
        }
        rows += 1;
    }
    Ok(Raster { rows, cols: cols.unwrap_or(0), values })
}

/// Loads a raster whose dimensions equal the mesh's grid squares.
pub fn load_coefficient_grid<R: Read>(stream: R, mesh: &StructuredMesh) -> Result<CoefficientField> {
    let raster = parse_raster(stream)?;
    let n = mesh.cells_per_side();
    if raster.rows != n {
        return Err(Error::Format { row: raster.rows, msg: format!("raster has {} rows, mesh needs {n}", raster.rows) });
    }
    if raster.cols != n {
        return Err(Error::Format { row: 1, msg: format!("raster has {} columns, mesh needs {n}", raster.cols) });
    }
    CoefficientField::from_cells(mesh, "raster", |i, j| raster.values[(n - 1 - j) * n + i])
}
