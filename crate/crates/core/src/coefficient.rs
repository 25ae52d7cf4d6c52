//! Two-phase diffusion coefficients `A in {1, eps^2}` and the scatterer
//! geometries used in the experiments.
//!
//! Built-in geometries live on a cell grid of width `eps/4`: the unit-cell
//! inclusion `eps * (j + (0.25, 0.75)^2)` is then exactly the middle 2x2
//! block of subcells of each `eps`-cell.

use std::fmt::Write as _;

use crate::error::{LodError, Result};
use crate::mesh::StructuredTriMesh;

pub const MIN_EPSILON_EXPONENT: u32 = 2;
pub const MAX_EPSILON_EXPONENT: u32 = 6;

/// Subcells per `eps`-period along each axis for the built-in geometries.
const SUBCELLS: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub enum GeometryKind {
    /// Periodic inclusions clipped to the box `(0.25, 0.75)^2`.
    MieSquare,
    /// Periodic inclusions clipped to the slab `(0.25, 0.75) x (0, 1)`.
    SlabPeriodic,
    /// Slab with one inclusion removed. `None` picks the inclusion closest to
    /// the centre, ties broken towards the lower-left.
    SlabPointDefect { inclusion: Option<(usize, usize)> },
    /// Slab with the matrix channel around `y = 0.5` widened to
    /// `[0.5 - w eps, 0.5 + w eps]`; the slab alone has `w = 0.25`.
    SlabLineDefect { half_width: f64 },
    ConstantOne,
    /// Arbitrary inclusion grid, row 0 at the bottom.
    CustomCells { rows: usize, cols: usize, cells: Vec<bool> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    pub epsilon_exponent: u32,
}

impl GeometrySpec {
    pub fn new(kind: GeometryKind, epsilon_exponent: u32) -> Self {
        Self {
            kind,
            epsilon_exponent,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            GeometryKind::MieSquare => "mie_square",
            GeometryKind::SlabPeriodic => "slab_periodic",
            GeometryKind::SlabPointDefect { .. } => "slab_point_defect",
            GeometryKind::SlabLineDefect { .. } => "slab_line_defect",
            GeometryKind::ConstantOne => "constant_one",
            GeometryKind::CustomCells { .. } => "custom_cells",
        }
    }
}

/// Piecewise-constant coefficient on a `cols x rows` grid of the unit square.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficient {
    epsilon_exponent: u32,
    rows: usize,
    cols: usize,
    /// Row-major from the bottom row; `true` marks an `eps^2` cell.
    cells: Vec<bool>,
}

pub fn build_coefficient(spec: &GeometrySpec) -> Result<Coefficient> {
    let e = spec.epsilon_exponent;
    if !(MIN_EPSILON_EXPONENT..=MAX_EPSILON_EXPONENT).contains(&e) {
        return Err(LodError::config(format!(
            "epsilon exponent {e} outside [{MIN_EPSILON_EXPONENT}, {MAX_EPSILON_EXPONENT}]"
        )));
    }
    let periods = 1usize << e;
    let n = SUBCELLS * periods;
    // subcell index s lies in the inclusion band iff (s mod 4) is 1 or 2
    let in_band = |s: usize| matches!(s % SUBCELLS, 1 | 2);
    // box (0.25, 0.75) in subcell units is [n/4, 3n/4)
    let in_mid = |s: usize| s >= n / 4 && s < 3 * n / 4;
    let lattice = |i: usize, j: usize| in_band(i) && in_band(j);

    let mut cells = vec![false; n * n];
    match &spec.kind {
        GeometryKind::ConstantOne => {}
        GeometryKind::MieSquare => {
            for j in 0..n {
                for i in 0..n {
                    cells[j * n + i] = in_mid(i) && in_mid(j) && lattice(i, j);
                }
            }
        }
        GeometryKind::SlabPeriodic => fill_slab(&mut cells, n, &in_mid, &lattice),
        GeometryKind::SlabPointDefect { inclusion } => {
            fill_slab(&mut cells, n, &in_mid, &lattice);
            let (jx, jy) = match inclusion {
                Some(idx) => *idx,
                None => default_point_defect(periods),
            };
            let first_col = periods / 4;
            let last_col = 3 * periods / 4;
            if jx < first_col || jx >= last_col || jy >= periods {
                return Err(LodError::config(format!(
                    "point defect ({jx}, {jy}) outside the scatterer (columns {first_col}..{last_col}, rows 0..{periods})"
                )));
            }
            for dj in 1..=2 {
                for di in 1..=2 {
                    cells[(SUBCELLS * jy + dj) * n + SUBCELLS * jx + di] = false;
                }
            }
        }
        GeometryKind::SlabLineDefect { half_width } => {
            fill_slab(&mut cells, n, &in_mid, &lattice);
            let sub = half_width * SUBCELLS as f64;
            if !(sub > 0.0 && sub.fract() == 0.0 && sub <= (n / 2) as f64) {
                return Err(LodError::config(format!(
                    "line defect half width {half_width} must be a positive multiple of 0.25 within the domain"
                )));
            }
            let sub = sub as usize;
            for j in n / 2 - sub..n / 2 + sub {
                for i in 0..n {
                    cells[j * n + i] = false;
                }
            }
        }
        GeometryKind::CustomCells { rows, cols, cells: c } => {
            return Coefficient::from_cells(e, *rows, *cols, c.clone());
        }
    }
    Ok(Coefficient {
        epsilon_exponent: e,
        rows: n,
        cols: n,
        cells,
    })
}

fn fill_slab(cells: &mut [bool], n: usize, in_mid: &dyn Fn(usize) -> bool, lattice: &dyn Fn(usize, usize) -> bool) {
    for j in 0..n {
        for i in 0..n {
            cells[j * n + i] = in_mid(i) && lattice(i, j);
        }
    }
}

/// Inclusion whose centre is closest to `(0.5, 0.5)`, lowest indices first.
fn default_point_defect(periods: usize) -> (usize, usize) {
    let c = (periods - 1) / 2;
    (c, c)
}

impl Coefficient {
    pub fn from_cells(epsilon_exponent: u32, rows: usize, cols: usize, cells: Vec<bool>) -> Result<Self> {
        if !(MIN_EPSILON_EXPONENT..=MAX_EPSILON_EXPONENT).contains(&epsilon_exponent) {
            return Err(LodError::config(format!(
                "epsilon exponent {epsilon_exponent} outside [{MIN_EPSILON_EXPONENT}, {MAX_EPSILON_EXPONENT}]"
            )));
        }
        if !rows.is_power_of_two() || !cols.is_power_of_two() {
            return Err(LodError::config(format!(
                "cell grid {rows}x{cols} must have power-of-two dimensions"
            )));
        }
        if cells.len() != rows * cols {
            return Err(LodError::config(format!(
                "expected {} cell flags, got {}",
                rows * cols,
                cells.len()
            )));
        }
        Ok(Self {
            epsilon_exponent,
            rows,
            cols,
            cells,
        })
    }

    pub fn epsilon_exponent(&self) -> u32 {
        self.epsilon_exponent
    }

    pub fn epsilon(&self) -> f64 {
        2f64.powi(-(self.epsilon_exponent as i32))
    }

    /// The small phase value `eps^2`.
    pub fn low_value(&self) -> f64 {
        let e = self.epsilon();
        e * e
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_inclusion(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.cols + col]
    }

    pub fn cell_value(&self, row: usize, col: usize) -> f64 {
        if self.is_inclusion(row, col) {
            self.low_value()
        } else {
            1.0
        }
    }

    /// Cell containing `p`; cells are closed on the left/bottom and open on
    /// the right/top, except at `x = 1` / `y = 1`.
    pub fn cell_of(&self, p: [f64; 2]) -> (usize, usize) {
        let col = ((p[0] * self.cols as f64).floor() as usize).min(self.cols - 1);
        let row = ((p[1] * self.rows as f64).floor() as usize).min(self.rows - 1);
        (row, col)
    }

    pub fn value_at(&self, p: [f64; 2]) -> f64 {
        let (r, c) = self.cell_of(p);
        self.cell_value(r, c)
    }

    /// Area of `{A = eps^2}`.
    pub fn inclusion_area(&self) -> f64 {
        let n = self.cells.iter().filter(|&&c| c).count();
        n as f64 / (self.rows * self.cols) as f64
    }

    /// `int_Omega A`.
    pub fn integral(&self) -> f64 {
        let a = self.inclusion_area();
        (1.0 - a) + self.low_value() * a
    }

    /// Distance from the inclusion set to the boundary of the unit square
    /// (infinite without inclusions).
    pub fn boundary_clearance(&self) -> f64 {
        let (dx, dy) = (1.0 / self.cols as f64, 1.0 / self.rows as f64);
        let mut d = f64::INFINITY;
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.is_inclusion(r, c) {
                    let x0 = c as f64 * dx;
                    let y0 = r as f64 * dy;
                    d = d.min(x0).min(y0).min(1.0 - x0 - dx).min(1.0 - y0 - dy);
                }
            }
        }
        d
    }

    /// Whether the inclusions keep at least `margin` away from the boundary.
    /// The slab geometries fail this for any coarse-cell margin; callers log it.
    pub fn bounded_away_from_boundary(&self, margin: f64) -> bool {
        self.boundary_clearance() >= margin
    }

    /// Coarsest mesh level whose triangles each lie inside a single cell.
    pub fn min_resolving_level(&self) -> u32 {
        self.rows.max(self.cols).trailing_zeros()
    }

    /// Plain-text export: `"E rows cols"` then one line of 0/1 flags per row,
    /// bottom row first.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.rows * (self.cols + 1) + 16);
        let _ = writeln!(s, "{} {} {}", self.epsilon_exponent, self.rows, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                s.push(if self.is_inclusion(r, c) { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| LodError::config("empty cell grid file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(LodError::config(format!("bad cell grid header {header:?}")));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| LodError::config(format!("bad integer {s:?} in cell grid header")))
        };
        let e = parse(fields[0])? as u32;
        let rows = parse(fields[1])?;
        let cols = parse(fields[2])?;
        let mut cells = Vec::with_capacity(rows * cols);
        for (r, line) in lines.enumerate() {
            let flags: Vec<char> = line.chars().filter(|c| !c.is_whitespace()).collect();
            if flags.len() != cols {
                return Err(LodError::config(format!(
                    "cell grid row {r} has {} flags, expected {cols}",
                    flags.len()
                )));
            }
            for f in flags {
                match f {
                    '0' => cells.push(false),
                    '1' => cells.push(true),
                    other => {
                        return Err(LodError::config(format!("bad cell flag {other:?} in row {r}")));
                    }
                }
            }
        }
        Self::from_cells(e, rows, cols, cells)
    }
}

/// Per-element coefficient values on a mesh that resolves the cell grid.
pub fn element_values(coefficient: &Coefficient, mesh: &StructuredTriMesh) -> Result<Vec<f64>> {
    let need = coefficient.min_resolving_level();
    if mesh.level() < need {
        return Err(LodError::config(format!(
            "mesh level {} does not resolve the coefficient; level >= {need} required",
            mesh.level()
        )));
    }
    let (dx, dy) = (1.0 / coefficient.cols() as f64, 1.0 / coefficient.rows() as f64);
    let mut out = Vec::with_capacity(mesh.num_elements());
    for e in 0..mesh.num_elements() {
        let (r, c) = coefficient.cell_of(mesh.barycenter(e));
        let (x0, y0) = (c as f64 * dx, r as f64 * dy);
        let inside = mesh
            .element_vertices(e)
            .iter()
            .all(|p| p[0] >= x0 && p[0] <= x0 + dx && p[1] >= y0 && p[1] <= y0 + dy);
        if !inside {
            return Err(LodError::config(format!(
                "element {e} straddles a coefficient discontinuity; level >= {need} required"
            )));
        }
        out.push(coefficient.cell_value(r, c));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(kind: GeometryKind, e: u32) -> Coefficient {
        build_coefficient(&GeometrySpec::new(kind, e)).unwrap()
    }

    #[test]
    fn constant_one_is_homogeneous() {
        let c = build(GeometryKind::ConstantOne, 3);
        let mesh = StructuredTriMesh::new(5).unwrap();
        assert!(element_values(&c, &mesh).unwrap().iter().all(|&v| v == 1.0));
        assert_eq!(c.integral(), 1.0);
    }

    #[test]
    fn mie_square_has_four_by_four_inclusions() {
        let c = build(GeometryKind::MieSquare, 3);
        assert_eq!(c.rows(), 32);
        assert_eq!(c.inclusion_area(), 1.0 / 16.0);
        // inclusion of period (2, 2) spans (0.28125, 0.34375)
        let eps = 0.125;
        assert!(c.value_at([eps * 2.5, eps * 2.5]) < 1.0);
        assert_eq!(c.value_at([eps * 2.1, eps * 2.5]), 1.0);
        assert_eq!(c.value_at([eps * 1.5, eps * 2.5]), 1.0);
        assert_eq!(c.value_at([eps * 5.5, eps * 5.5]), c.low_value());
        assert_eq!(c.value_at([eps * 6.5, eps * 5.5]), 1.0);
        // one coarse cell of level 2 away from the boundary
        assert!(c.bounded_away_from_boundary(0.25));
    }

    #[test]
    fn mie_square_is_mirror_symmetric() {
        let c = build(GeometryKind::MieSquare, 4);
        let n = c.rows();
        for r in 0..n {
            for k in 0..n {
                assert_eq!(c.is_inclusion(r, k), c.is_inclusion(r, n - 1 - k));
                assert_eq!(c.is_inclusion(r, k), c.is_inclusion(n - 1 - r, k));
            }
        }
    }

    #[test]
    fn slab_touches_boundary_region() {
        let c = build(GeometryKind::SlabPeriodic, 3);
        assert_eq!(c.inclusion_area(), 0.5 * 0.25);
        assert!(!c.bounded_away_from_boundary(0.125));
    }

    #[test]
    fn line_defect_widens_channel() {
        let eps = 0.125;
        let slab = build(GeometryKind::SlabPeriodic, 3);
        let line = build(GeometryKind::SlabLineDefect { half_width: 0.5 }, 3);
        // the slab gap around y = 0.5 is [3.75, 4.25] eps, the defect gap [3.5, 4.5] eps
        assert_eq!(slab.value_at([3.5 * eps, 3.6 * eps]), slab.low_value());
        assert_eq!(line.value_at([3.5 * eps, 3.6 * eps]), 1.0);
        assert_eq!(slab.value_at([3.5 * eps, 3.9 * eps]), 1.0);
        assert_eq!(line.value_at([3.5 * eps, 3.3 * eps]), line.low_value());
        assert_eq!(build(GeometryKind::SlabLineDefect { half_width: 0.25 }, 3), slab);
        assert!(build_coefficient(&GeometrySpec::new(GeometryKind::SlabLineDefect { half_width: 0.3 }, 3)).is_err());
    }

    #[test]
    fn point_defect_validation() {
        let bad = GeometrySpec::new(GeometryKind::SlabPointDefect { inclusion: Some((0, 3)) }, 3);
        assert!(matches!(build_coefficient(&bad), Err(LodError::Config(_))));
        let c = build(GeometryKind::SlabPointDefect { inclusion: None }, 3);
        let eps = 0.125;
        assert_eq!(c.value_at([3.5 * eps, 3.5 * eps]), 1.0);
        assert_eq!(c.value_at([4.5 * eps, 3.5 * eps]), c.low_value());
    }

    #[test]
    fn resolution_is_enforced() {
        let c = build(GeometryKind::MieSquare, 3);
        let coarse = StructuredTriMesh::new(4).unwrap();
        let err = element_values(&c, &coarse).unwrap_err();
        assert!(err.to_string().contains("level >= 5"));
        assert!(element_values(&c, &StructuredTriMesh::new(5).unwrap()).is_ok());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let c = build(GeometryKind::SlabPointDefect { inclusion: Some((3, 5)) }, 3);
        let text = c.to_text();
        let back = Coefficient::from_text(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), text);
        assert!(Coefficient::from_text("3 2 2\n01\n2 0\n").is_err());
        assert!(Coefficient::from_text("3 2 2\n01\n").is_err());
    }

    #[test]
    fn epsilon_range() {
        assert!(build_coefficient(&GeometrySpec::new(GeometryKind::MieSquare, 1)).is_err());
        assert!(build_coefficient(&GeometrySpec::new(GeometryKind::MieSquare, 7)).is_err());
    }
}
