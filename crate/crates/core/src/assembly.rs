//! P1 assembly of the Helmholtz sesquilinear form
//! `B(u, v) = (A grad u, grad v) - k^2 (u, v) - i k <u, v>_{boundary}`
//! and of the load vector for the smooth bump source.
//!
//! With `B(u, v) = v^H G u` for nodal vectors, the system matrix is
//! `G = S_A - k^2 M - i k B_boundary`, complex symmetric but not Hermitian.

use crate::error::{LodError, Result};
use crate::linalg::{solve_checked, DIRECT_SOLVE_TOL};
use crate::mesh::{Point, StructuredTriMesh};
use crate::sparse::{CsrMatrix, C64};

pub const SOURCE_AMPLITUDE: f64 = 10000.0;
pub const SOURCE_RADIUS: f64 = 0.05;

#[derive(Clone, Debug)]
pub struct OperatorSet {
    /// `int A grad phi_i . grad phi_j`
    pub stiffness_a: CsrMatrix<f64>,
    /// `int phi_i phi_j`
    pub mass: CsrMatrix<f64>,
    /// `int A phi_i phi_j`
    pub mass_a: CsrMatrix<f64>,
    /// `int_{boundary} phi_i phi_j`
    pub boundary_mass: CsrMatrix<f64>,
    pub wave_number: f64,
}

/// P1 stiffness `int grad phi_a . grad phi_b` on a triangle.
pub fn element_stiffness(v: &[Point; 3]) -> [[f64; 3]; 3] {
    let area2 = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
    // gradient of phi_a is the rotated opposite edge / (2 area)
    let mut g = [[0.0; 2]; 3];
    for a in 0..3 {
        let p = v[(a + 1) % 3];
        let q = v[(a + 2) % 3];
        g[a] = [(p[1] - q[1]) / area2, (q[0] - p[0]) / area2];
    }
    let area = 0.5 * area2.abs();
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
        }
    }
    k
}

/// P1 mass `int phi_a phi_b` on a triangle of the given area.
pub fn element_mass(area: f64) -> [[f64; 3]; 3] {
    let d = area / 6.0;
    let o = area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

/// P1 mass on a boundary edge of the given length.
pub fn edge_mass(length: f64) -> [[f64; 2]; 2] {
    [[length / 3.0, length / 6.0], [length / 6.0, length / 3.0]]
}

fn edge_length(mesh: &StructuredTriMesh, ed: [usize; 2]) -> f64 {
    let (a, b) = (mesh.nodes()[ed[0]], mesh.nodes()[ed[1]]);
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn assemble_operators(mesh: &StructuredTriMesh, element_a: &[f64], k: f64) -> Result<OperatorSet> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(LodError::config(format!("wave number must be positive, got {k}")));
    }
    if element_a.len() != mesh.num_elements() {
        return Err(LodError::config(format!(
            "{} coefficient values for {} elements",
            element_a.len(),
            mesh.num_elements()
        )));
    }
    let ne = mesh.num_elements();
    let mut s = Vec::with_capacity(9 * ne);
    let mut m = Vec::with_capacity(9 * ne);
    let mut ma = Vec::with_capacity(9 * ne);
    for (e, tri) in mesh.elements().iter().enumerate() {
        let verts = mesh.element_vertices(e);
        let ks = element_stiffness(&verts);
        let km = element_mass(mesh.signed_area(e).abs());
        let a = element_a[e];
        for i in 0..3 {
            for j in 0..3 {
                s.push((tri[i], tri[j], a * ks[i][j]));
                m.push((tri[i], tri[j], km[i][j]));
                ma.push((tri[i], tri[j], a * km[i][j]));
            }
        }
    }
    let mut bm = Vec::with_capacity(4 * mesh.boundary_edges().len());
    for &ed in mesh.boundary_edges() {
        let kb = edge_mass(edge_length(mesh, ed));
        for i in 0..2 {
            for j in 0..2 {
                bm.push((ed[i], ed[j], kb[i][j]));
            }
        }
    }
    let n = mesh.num_nodes();
    Ok(OperatorSet {
        stiffness_a: CsrMatrix::from_triplets(n, n, &s),
        mass: CsrMatrix::from_triplets(n, n, &m),
        mass_a: CsrMatrix::from_triplets(n, n, &ma),
        boundary_mass: CsrMatrix::from_triplets(n, n, &bm),
        wave_number: k,
    })
}

/// `G = S_A - k^2 M - i k B_boundary`.
pub fn helmholtz_matrix(ops: &OperatorSet) -> CsrMatrix<C64> {
    let k = ops.wave_number;
    let real = ops.stiffness_a.add_scaled(1.0, &ops.mass, -k * k);
    let real = real.to_complex();
    let boundary = ops.boundary_mass.to_complex();
    real.add_scaled(C64::new(1.0, 0.0), &boundary, C64::new(0.0, -k))
}

/// Local Helmholtz matrix of one element (no boundary term).
pub fn element_helmholtz(mesh: &StructuredTriMesh, e: usize, a: f64, k: f64) -> [[C64; 3]; 3] {
    let ks = element_stiffness(&mesh.element_vertices(e));
    let km = element_mass(mesh.signed_area(e).abs());
    let mut g = [[C64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            g[i][j] = C64::new(a * ks[i][j] - k * k * km[i][j], 0.0);
        }
    }
    g
}

/// Local Robin matrix `-i k` times the edge mass of boundary edge `edge`.
pub fn edge_robin(mesh: &StructuredTriMesh, edge: usize, k: f64) -> [[C64; 2]; 2] {
    let kb = edge_mass(edge_length(mesh, mesh.boundary_edges()[edge]));
    let mut g = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            g[i][j] = C64::new(0.0, -k * kb[i][j]);
        }
    }
    g
}

/// The bump `f(x) = 10000 exp(-1 / (1 - (|x - x0| / 0.05)^2))` inside the
/// disk of radius 0.05, zero outside.
pub fn source_term(x: Point, center: Point) -> f64 {
    let r = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt() / SOURCE_RADIUS;
    if r < 1.0 {
        SOURCE_AMPLITUDE * (-1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

/// Symmetric 6-point rule exact for degree 4 on triangles: barycentric
/// points and weights (weights sum to 1).
const QUAD6: [([f64; 3], f64); 6] = [
    ([0.108_103_018_168_070, 0.445_948_490_915_965, 0.445_948_490_915_965], 0.223_381_589_678_011),
    ([0.445_948_490_915_965, 0.108_103_018_168_070, 0.445_948_490_915_965], 0.223_381_589_678_011),
    ([0.445_948_490_915_965, 0.445_948_490_915_965, 0.108_103_018_168_070], 0.223_381_589_678_011),
    ([0.816_847_572_980_459, 0.091_576_213_509_771, 0.091_576_213_509_771], 0.109_951_743_655_322),
    ([0.091_576_213_509_771, 0.816_847_572_980_459, 0.091_576_213_509_771], 0.109_951_743_655_322),
    ([0.091_576_213_509_771, 0.091_576_213_509_771, 0.816_847_572_980_459], 0.109_951_743_655_322),
];

#[derive(Clone, Debug)]
pub struct LoadVector {
    /// `F_i = int f phi_i`
    pub values: Vec<C64>,
    pub center: Point,
    pub amplitude: f64,
    pub radius: f64,
}

pub fn assemble_load(mesh: &StructuredTriMesh, center: Point) -> Result<LoadVector> {
    if !(0.0..=1.0).contains(&center[0]) || !(0.0..=1.0).contains(&center[1]) {
        return Err(LodError::config(format!("source center {center:?} outside the unit square")));
    }
    let mut values = vec![C64::new(0.0, 0.0); mesh.num_nodes()];
    let reach = SOURCE_RADIUS + mesh.mesh_size();
    for (e, tri) in mesh.elements().iter().enumerate() {
        let v = mesh.element_vertices(e);
        let c = mesh.barycenter(e);
        if ((c[0] - center[0]).powi(2) + (c[1] - center[1]).powi(2)).sqrt() > reach {
            continue;
        }
        let area = mesh.signed_area(e).abs();
        for (bary, w) in QUAD6 {
            let x = [
                bary[0] * v[0][0] + bary[1] * v[1][0] + bary[2] * v[2][0],
                bary[0] * v[0][1] + bary[1] * v[1][1] + bary[2] * v[2][1],
            ];
            let f = source_term(x, center);
            if f == 0.0 {
                continue;
            }
            for a in 0..3 {
                values[tri[a]].re += area * w * f * bary[a];
            }
        }
    }
    Ok(LoadVector {
        values,
        center,
        amplitude: SOURCE_AMPLITUDE,
        radius: SOURCE_RADIUS,
    })
}

impl LoadVector {
    /// `int f`, the sum of the nodal loads.
    pub fn total(&self) -> f64 {
        self.values.iter().map(|v| v.re).sum()
    }
}

/// Fine-scale reference solve `G u_h = F` with residual `<= 1e-10`.
pub fn solve_fine_reference(g: &CsrMatrix<C64>, f: &[C64]) -> Result<Vec<C64>> {
    if f.len() != g.nrows() {
        return Err(LodError::config("load vector does not match the system size"));
    }
    solve_checked(g, f, DIRECT_SOLVE_TOL, "fine reference solve")
}
