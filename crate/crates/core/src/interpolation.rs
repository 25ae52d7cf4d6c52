//! Quasi-interpolation `I_H v = sum_z P_{w, omega_z}(v)(z) lambda_z` built
//! from local weighted L2 projections onto the coarse space on each node
//! patch `omega_z`, with weight `A` (weighted) or `1` (unweighted).
//!
//! The operator is stored as a sparse matrix mapping fine nodal vectors to
//! coarse nodal vectors. All integrals are evaluated exactly on the fine
//! mesh, where both `A` and the coarse hats are resolved.

use rayon::prelude::*;

use crate::assembly::element_mass;
use crate::error::{LodError, Result};
use crate::linalg::dense_spd_inverse;
use crate::mesh::{Embedding, StructuredTriMesh};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InterpolantKind {
    Weighted,
    Unweighted,
}

impl InterpolantKind {
    pub fn name(self) -> &'static str {
        match self {
            InterpolantKind::Weighted => "weighted",
            InterpolantKind::Unweighted => "unweighted",
        }
    }
}

/// Which coarse nodes carry a row of the operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum InterpolationNodes {
    /// Every coarse node, boundary included (needed with Robin conditions).
    #[default]
    All,
    /// Interior nodes only; boundary rows are left empty.
    Interior,
}

#[derive(Clone, Debug)]
pub struct InterpolationOperator {
    pub kind: InterpolantKind,
    pub nodes: InterpolationNodes,
    /// Coarse nodes x fine nodes.
    pub matrix: CsrMatrix<f64>,
    /// Coarse elements containing each coarse node.
    pub node_patches: Vec<Vec<usize>>,
}

pub fn build_interpolation(
    kind: InterpolantKind,
    coarse: &StructuredTriMesh,
    fine: &StructuredTriMesh,
    embedding: &Embedding,
    element_a_fine: &[f64],
) -> Result<InterpolationOperator> {
    build_interpolation_with_nodes(kind, InterpolationNodes::All, coarse, fine, embedding, element_a_fine)
}

pub fn build_interpolation_with_nodes(
    kind: InterpolantKind,
    nodes: InterpolationNodes,
    coarse: &StructuredTriMesh,
    fine: &StructuredTriMesh,
    embedding: &Embedding,
    element_a_fine: &[f64],
) -> Result<InterpolationOperator> {
    if embedding.coarse_level != coarse.level() || embedding.fine_level != fine.level() {
        return Err(LodError::config("embedding does not connect the given meshes"));
    }
    if element_a_fine.len() != fine.num_elements() {
        return Err(LodError::config("coefficient array does not match the fine mesh"));
    }
    let node_patches: Vec<Vec<usize>> = (0..coarse.num_nodes()).map(|z| coarse.node_star(z).to_vec()).collect();
    let rows: Vec<Vec<(usize, f64)>> = (0..coarse.num_nodes())
        .into_par_iter()
        .map(|z| {
            if nodes == InterpolationNodes::Interior && coarse.is_boundary_node(z) {
                return Ok(Vec::new());
            }
            local_projection_row(kind, z, coarse, fine, embedding, element_a_fine)
        })
        .collect::<Result<_>>()?;
    Ok(InterpolationOperator {
        kind,
        nodes,
        matrix: CsrMatrix::from_sorted_rows(fine.num_nodes(), rows),
        node_patches,
    })
}

/// Row of `I_H` for coarse node `z`: the functional `v -> P_{w, omega_z}(v)(z)`.
fn local_projection_row(
    kind: InterpolantKind,
    z: usize,
    coarse: &StructuredTriMesh,
    fine: &StructuredTriMesh,
    embedding: &Embedding,
    element_a_fine: &[f64],
) -> Result<Vec<(usize, f64)>> {
    let patch = coarse.node_star(z);
    let mut basis: Vec<usize> = patch.iter().flat_map(|&t| coarse.elements()[t]).collect();
    basis.sort_unstable();
    basis.dedup();
    let nb = basis.len();
    let local = |y: usize| basis.binary_search(&y).expect("basis node of the patch");

    let p = &embedding.prolongation;
    let hat_values = |x: usize| -> Vec<(usize, f64)> {
        let (cols, vals) = p.row(x);
        cols.iter()
            .zip(vals)
            .filter_map(|(&y, &v)| basis.binary_search(&y).ok().map(|l| (l, v)))
            .collect()
    };

    let mut gram = vec![vec![0.0; nb]; nb];
    // moments[l] holds the fine-node weights of v -> int_{omega_z} w v lambda_{basis[l]}
    let mut moments: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nb];
    for &t in patch {
        for &e in &embedding.coarse_to_fine[t] {
            let weight = match kind {
                InterpolantKind::Weighted => element_a_fine[e],
                InterpolantKind::Unweighted => 1.0,
            };
            let tri = fine.elements()[e];
            let km = element_mass(fine.signed_area(e).abs());
            let hv: Vec<Vec<(usize, f64)>> = tri.iter().map(|&x| hat_values(x)).collect();
            for a in 0..3 {
                for b in 0..3 {
                    let m = weight * km[a][b];
                    for &(la, va) in &hv[a] {
                        moments[la].push((tri[b], m * va));
                        for &(lb, vb) in &hv[b] {
                            gram[la][lb] += m * va * vb;
                        }
                    }
                }
            }
        }
    }

    let inv = dense_spd_inverse(&gram)
        .map_err(|e| LodError::numerical(format!("local projection at coarse node {z}: {e}")))?;
    let lz = local(z);
    let mut acc: Vec<(usize, f64)> = Vec::new();
    for (l, mom) in moments.iter().enumerate() {
        let c = inv[lz][l];
        acc.extend(mom.iter().map(|&(x, v)| (x, c * v)));
    }
    acc.sort_by_key(|&(x, _)| x);
    let mut row: Vec<(usize, f64)> = Vec::new();
    for (x, v) in acc {
        match row.last_mut() {
            Some((lx, lv)) if *lx == x => *lv += v,
            _ => row.push((x, v)),
        }
    }
    Ok(row)
}

/// Kernel constraints of a patch: rows of `I_H` restricted to the patch
/// degrees of freedom, keeping only rows that do not vanish there.
#[derive(Clone, Debug)]
pub struct ConstraintRows {
    /// Retained rows x patch dofs.
    pub matrix: CsrMatrix<f64>,
    /// Coarse node of each retained row.
    pub coarse_nodes: Vec<usize>,
}

/// Rows are dropped when their largest entry is below this fraction of the
/// largest entry of the whole restriction.
const ZERO_ROW_TOL: f64 = 1e-12;

pub fn kernel_constraint_rows(interp: &InterpolationOperator, patch_dofs: &[usize]) -> ConstraintRows {
    if patch_dofs.is_empty() {
        return ConstraintRows {
            matrix: CsrMatrix::zeros(0, 0),
            coarse_nodes: Vec::new(),
        };
    }
    let all: Vec<usize> = (0..interp.matrix.nrows()).collect();
    let restricted = interp.matrix.restrict(&all, patch_dofs);
    let scale = restricted.max_abs();
    let keep: Vec<usize> = (0..restricted.nrows())
        .filter(|&z| {
            let (_, vals) = restricted.row(z);
            vals.iter().any(|v| v.abs() > ZERO_ROW_TOL * scale)
        })
        .collect();
    let matrix = restricted.restrict(&keep, &(0..patch_dofs.len()).collect::<Vec<_>>());
    ConstraintRows {
        matrix,
        coarse_nodes: keep,
    }
}

/// Faster variant of [`kernel_constraint_rows`] using a precomputed
/// transpose of the interpolation matrix (fine nodes x coarse nodes).
pub fn kernel_constraint_rows_from_transpose(interp_t: &CsrMatrix<f64>, patch_dofs: &[usize]) -> ConstraintRows {
    if patch_dofs.is_empty() {
        return ConstraintRows {
            matrix: CsrMatrix::zeros(0, 0),
            coarse_nodes: Vec::new(),
        };
    }
    // gather (coarse row, local dof, value) in local-dof order
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut scale: f64 = 0.0;
    for (l, &x) in patch_dofs.iter().enumerate() {
        let (rows, vals) = interp_t.row(x);
        for (&z, &v) in rows.iter().zip(vals) {
            entries.push((z, l, v));
            scale = scale.max(v.abs());
        }
    }
    let mut row_max = std::collections::BTreeMap::<usize, f64>::new();
    for &(z, _, v) in &entries {
        let m = row_max.entry(z).or_insert(0.0);
        *m = m.max(v.abs());
    }
    let coarse_nodes: Vec<usize> = row_max
        .into_iter()
        .filter(|&(_, m)| m > ZERO_ROW_TOL * scale)
        .map(|(z, _)| z)
        .collect();
    let mut local_row = vec![usize::MAX; interp_t.ncols()];
    for (r, &z) in coarse_nodes.iter().enumerate() {
        local_row[z] = r;
    }
    let triplets: Vec<(usize, usize, f64)> = entries
        .into_iter()
        .filter(|&(z, _, _)| local_row[z] != usize::MAX)
        .map(|(z, l, v)| (local_row[z], l, v))
        .collect();
    ConstraintRows {
        matrix: CsrMatrix::from_triplets(coarse_nodes.len(), patch_dofs.len(), &triplets),
        coarse_nodes,
    }
}
