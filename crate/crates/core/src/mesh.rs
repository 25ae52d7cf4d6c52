//! Nested uniform triangulations of the unit square, element patches, and
//! the coarse-to-fine prolongation.
//!
//! Level `L` has `2^L x 2^L` squares, each split along the diagonal from its
//! lower-left to its upper-right corner. Nodes are numbered row by row
//! (`id = row * (2^L + 1) + col`), elements square by square with the lower
//! triangle first. Because every level uses the same diagonal, each fine
//! triangle lies inside exactly one coarse triangle.

use crate::error::{LodError, Result};
use crate::sparse::CsrMatrix;

pub const MIN_LEVEL: u32 = 1;
pub const MAX_LEVEL: u32 = 12;

pub type Point = [f64; 2];

#[derive(Clone, Debug, PartialEq)]
pub struct StructuredTriMesh {
    level: u32,
    nodes: Vec<Point>,
    elements: Vec<[usize; 3]>,
    boundary_edges: Vec<[usize; 2]>,
    boundary_edge_element: Vec<usize>,
    node_star: Vec<Vec<usize>>,
    element_adjacency: Vec<Vec<usize>>,
}

impl StructuredTriMesh {
    pub fn new(level: u32) -> Result<Self> {
        if !(MIN_LEVEL..=MAX_LEVEL).contains(&level) {
            return Err(LodError::config(format!(
                "mesh level {level} outside [{MIN_LEVEL}, {MAX_LEVEL}]"
            )));
        }
        let n = 1usize << level;
        let h = 1.0 / n as f64;
        let vid = |i: usize, j: usize| j * (n + 1) + i;

        let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                nodes.push([i as f64 * h, j as f64 * h]);
            }
        }

        let mut elements = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                elements.push([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)]);
                elements.push([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)]);
            }
        }

        // counter-clockwise around the square: bottom, right, top, left
        let mut boundary_edges = Vec::with_capacity(4 * n);
        let mut boundary_edge_element = Vec::with_capacity(4 * n);
        let square = |i: usize, j: usize| 2 * (j * n + i);
        for i in 0..n {
            boundary_edges.push([vid(i, 0), vid(i + 1, 0)]);
            boundary_edge_element.push(square(i, 0));
        }
        for j in 0..n {
            boundary_edges.push([vid(n, j), vid(n, j + 1)]);
            boundary_edge_element.push(square(n - 1, j));
        }
        for i in (0..n).rev() {
            boundary_edges.push([vid(i + 1, n), vid(i, n)]);
            boundary_edge_element.push(square(i, n - 1) + 1);
        }
        for j in (0..n).rev() {
            boundary_edges.push([vid(0, j + 1), vid(0, j)]);
            boundary_edge_element.push(square(0, j) + 1);
        }

        let mut node_star = vec![Vec::new(); nodes.len()];
        for (e, tri) in elements.iter().enumerate() {
            for &v in tri {
                node_star[v].push(e);
            }
        }

        let mut element_adjacency = Vec::with_capacity(elements.len());
        for (e, tri) in elements.iter().enumerate() {
            let mut adj: Vec<usize> = tri
                .iter()
                .flat_map(|&v| node_star[v].iter().copied())
                .filter(|&k| k != e)
                .collect();
            adj.sort_unstable();
            adj.dedup();
            element_adjacency.push(adj);
        }

        Ok(Self {
            level,
            nodes,
            elements,
            boundary_edges,
            boundary_edge_element,
            node_star,
            element_adjacency,
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Squares per side, `2^L`.
    pub fn cells_per_side(&self) -> usize {
        1 << self.level
    }

    /// Grid spacing `2^-L` (the leg length of each right triangle).
    pub fn grid_spacing(&self) -> f64 {
        1.0 / self.cells_per_side() as f64
    }

    /// Mesh size `H = max diam T = sqrt(2) 2^-L`.
    pub fn mesh_size(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.grid_spacing()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    /// Element adjacent to each boundary edge (same order as `boundary_edges`).
    pub fn boundary_edge_elements(&self) -> &[usize] {
        &self.boundary_edge_element
    }

    /// Elements containing node `v`.
    pub fn node_star(&self, v: usize) -> &[usize] {
        &self.node_star[v]
    }

    /// Elements sharing at least one node with `e`, excluding `e`.
    pub fn element_neighbors(&self, e: usize) -> &[usize] {
        &self.element_adjacency[e]
    }

    pub fn element_vertices(&self, e: usize) -> [Point; 3] {
        let t = self.elements[e];
        [self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]]
    }

    pub fn signed_area(&self, e: usize) -> f64 {
        let [a, b, c] = self.element_vertices(e);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn barycenter(&self, e: usize) -> Point {
        let [a, b, c] = self.element_vertices(e);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn is_boundary_node(&self, v: usize) -> bool {
        let n = self.cells_per_side();
        let (i, j) = (v % (n + 1), v / (n + 1));
        i == 0 || j == 0 || i == n || j == n
    }

    /// Element containing `p` together with the barycentric coordinates of
    /// `p` with respect to that element's vertices. Points on shared edges
    /// resolve to the lower-index square; the result is exact for dyadic
    /// coordinates.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        if !(0.0..=1.0).contains(&p[0]) || !(0.0..=1.0).contains(&p[1]) {
            return None;
        }
        let n = self.cells_per_side();
        let sx = p[0] * n as f64;
        let sy = p[1] * n as f64;
        let i = (sx.floor() as usize).min(n - 1);
        let j = (sy.floor() as usize).min(n - 1);
        let xi = sx - i as f64;
        let eta = sy - j as f64;
        let base = 2 * (j * n + i);
        if eta <= xi {
            Some((base, [1.0 - xi, xi - eta, eta]))
        } else {
            Some((base + 1, [1.0 - eta, xi, eta - xi]))
        }
    }

    /// Layer count after which every patch is the whole mesh (patches grow
    /// by only one cell per two layers along the anti-diagonal).
    pub fn saturating_layers(&self) -> usize {
        2 * self.cells_per_side()
    }

    /// Fixed-size polynomial growth bound `(2m+2)^2 * 2` on the number of
    /// elements in an `m`-layer patch of this structured mesh.
    pub fn patch_size_bound(m: usize) -> usize {
        (2 * m + 2) * (2 * m + 2) * 2
    }
}

/// `m`-layer element patch `N^m(T)` around a seed element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Patch {
    pub seed: usize,
    pub layers: usize,
    /// Sorted element indices.
    pub elements: Vec<usize>,
}

impl Patch {
    pub fn contains(&self, e: usize) -> bool {
        self.elements.binary_search(&e).is_ok()
    }

    pub fn mask(&self, num_elements: usize) -> Vec<bool> {
        let mut m = vec![false; num_elements];
        for &e in &self.elements {
            m[e] = true;
        }
        m
    }
}

/// `N^0(T) = T`, `N^{m+1}(T) = N(N^m(T))` with neighbourhoods through shared nodes.
pub fn patch(mesh: &StructuredTriMesh, seed: usize, m: usize) -> Result<Patch> {
    let ne = mesh.num_elements();
    if seed >= ne {
        return Err(LodError::Index { index: seed, size: ne });
    }
    let mut inside = vec![false; ne];
    inside[seed] = true;
    let mut elements = vec![seed];
    for _ in 0..m {
        if elements.len() == ne {
            break;
        }
        let mut grown = elements.clone();
        for &e in &elements {
            for &k in mesh.element_neighbors(e) {
                if !inside[k] {
                    inside[k] = true;
                    grown.push(k);
                }
            }
        }
        elements = grown;
    }
    elements.sort_unstable();
    Ok(Patch {
        seed,
        layers: m,
        elements,
    })
}

/// Fine degrees of freedom of a patch: nodes whose whole element star lies
/// inside the patch (this keeps nodes on the outer boundary of the domain),
/// and the boundary edges with both endpoints among those nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchDofs {
    /// Sorted node indices.
    pub interior_nodes: Vec<usize>,
    /// Indices into `mesh.boundary_edges()`.
    pub robin_edges: Vec<usize>,
}

/// Degrees of freedom for the functions supported in the element set given
/// by `in_patch` (one flag per element of `mesh`).
pub fn patch_dof_sets(mesh: &StructuredTriMesh, in_patch: &[bool]) -> PatchDofs {
    assert_eq!(in_patch.len(), mesh.num_elements());
    let mut is_dof = vec![false; mesh.num_nodes()];
    let mut interior_nodes = Vec::new();
    for (v, dof) in is_dof.iter_mut().enumerate() {
        if mesh.node_star(v).iter().all(|&e| in_patch[e]) {
            *dof = true;
            interior_nodes.push(v);
        }
    }
    let robin_edges = mesh
        .boundary_edges()
        .iter()
        .enumerate()
        .filter(|(_, ed)| is_dof[ed[0]] && is_dof[ed[1]])
        .map(|(i, _)| i)
        .collect();
    PatchDofs {
        interior_nodes,
        robin_edges,
    }
}

/// Coarse-to-fine relation of two nested meshes.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub coarse_level: u32,
    pub fine_level: u32,
    /// `P`: fine nodes x coarse nodes, `P[x, z] = lambda_z(x)`.
    pub prolongation: CsrMatrix<f64>,
    /// Coarse element containing each fine element.
    pub fine_to_coarse: Vec<usize>,
    /// Fine elements inside each coarse element, sorted.
    pub coarse_to_fine: Vec<Vec<usize>>,
}

pub fn build_embedding(coarse: &StructuredTriMesh, fine: &StructuredTriMesh) -> Result<Embedding> {
    if fine.level() <= coarse.level() {
        return Err(LodError::config(format!(
            "fine level {} must exceed coarse level {}",
            fine.level(),
            coarse.level()
        )));
    }
    let mut rows = Vec::with_capacity(fine.num_nodes());
    for &x in fine.nodes() {
        let (e, bary) = coarse.locate(x).expect("fine node inside the unit square");
        let tri = coarse.elements()[e];
        let mut row: Vec<(usize, f64)> = tri
            .iter()
            .zip(bary)
            .filter(|(_, b)| *b != 0.0)
            .map(|(&z, b)| (z, b))
            .collect();
        row.sort_unstable_by_key(|&(z, _)| z);
        rows.push(row);
    }
    let prolongation = CsrMatrix::from_sorted_rows(coarse.num_nodes(), rows);

    let fine_to_coarse: Vec<usize> = (0..fine.num_elements())
        .map(|e| coarse.locate(fine.barycenter(e)).expect("barycenter inside").0)
        .collect();
    let mut coarse_to_fine = vec![Vec::new(); coarse.num_elements()];
    for (e, &t) in fine_to_coarse.iter().enumerate() {
        coarse_to_fine[t].push(e);
    }

    Ok(Embedding {
        coarse_level: coarse.level(),
        fine_level: fine.level(),
        prolongation,
        fine_to_coarse,
        coarse_to_fine,
    })
}

impl Embedding {
    /// Fine element mask of a coarse patch.
    pub fn fine_mask(&self, coarse_patch: &Patch) -> Vec<bool> {
        let mut mask = vec![false; self.fine_to_coarse.len()];
        for &t in &coarse_patch.elements {
            for &e in &self.coarse_to_fine[t] {
                mask[e] = true;
            }
        }
        mask
    }
}

/// A coarse mesh, a fine mesh and their embedding.
#[derive(Clone, Debug)]
pub struct MeshPair {
    pub coarse: StructuredTriMesh,
    pub fine: StructuredTriMesh,
    pub embedding: Embedding,
}

impl MeshPair {
    pub fn new(coarse_level: u32, fine_level: u32) -> Result<Self> {
        let coarse = StructuredTriMesh::new(coarse_level)?;
        let fine = StructuredTriMesh::new(fine_level)?;
        Self::from_meshes(coarse, fine)
    }

    pub fn from_meshes(coarse: StructuredTriMesh, fine: StructuredTriMesh) -> Result<Self> {
        let embedding = build_embedding(&coarse, &fine)?;
        Ok(Self {
            coarse,
            fine,
            embedding,
        })
    }
}
