//! Shared inputs of the multiscale solve: the fine-scale discretization
//! (mesh, coefficient, operators) and one coarse space on top of it.

use crate::assembly::{assemble_operators, helmholtz_matrix, OperatorSet};
use crate::coefficient::{element_values, Coefficient};
use crate::error::Result;
use crate::interpolation::{build_interpolation_with_nodes, InterpolantKind, InterpolationNodes, InterpolationOperator};
use crate::mesh::{build_embedding, Embedding, StructuredTriMesh};
use crate::sparse::{CsrMatrix, C64};

/// Everything that lives on the fine mesh and does not depend on `H`.
#[derive(Clone, Debug)]
pub struct FineProblem {
    pub mesh: StructuredTriMesh,
    pub coefficient: Coefficient,
    pub element_a: Vec<f64>,
    pub ops: OperatorSet,
    /// `G = S_A - k^2 M - i k B_boundary`
    pub helmholtz: CsrMatrix<C64>,
}

impl FineProblem {
    pub fn new(coefficient: Coefficient, fine_level: u32, wave_number: f64) -> Result<Self> {
        let mesh = StructuredTriMesh::new(fine_level)?;
        let element_a = element_values(&coefficient, &mesh)?;
        let ops = assemble_operators(&mesh, &element_a, wave_number)?;
        let helmholtz = helmholtz_matrix(&ops);
        Ok(Self {
            mesh,
            coefficient,
            element_a,
            ops,
            helmholtz,
        })
    }

    pub fn wave_number(&self) -> f64 {
        self.ops.wave_number
    }
}

/// Coarse mesh, embedding into the fine mesh and the quasi-interpolation.
#[derive(Clone, Debug)]
pub struct CoarseSpace {
    pub mesh: StructuredTriMesh,
    pub embedding: Embedding,
    pub interp: InterpolationOperator,
    /// `I_H^T` (fine nodes x coarse nodes), for gathering patch constraints.
    pub interp_t: CsrMatrix<f64>,
    /// Fine boundary edges inside each coarse element.
    pub robin_edges: Vec<Vec<usize>>,
}

impl CoarseSpace {
    pub fn new(fine: &FineProblem, coarse_level: u32, kind: InterpolantKind) -> Result<Self> {
        Self::with_nodes(fine, coarse_level, kind, InterpolationNodes::All)
    }

    pub fn with_nodes(
        fine: &FineProblem,
        coarse_level: u32,
        kind: InterpolantKind,
        nodes: InterpolationNodes,
    ) -> Result<Self> {
        let mesh = StructuredTriMesh::new(coarse_level)?;
        let embedding = build_embedding(&mesh, &fine.mesh)?;
        let interp = build_interpolation_with_nodes(kind, nodes, &mesh, &fine.mesh, &embedding, &fine.element_a)?;
        let interp_t = interp.matrix.transpose();
        let mut robin_edges = vec![Vec::new(); mesh.num_elements()];
        for (edge, &e) in fine.mesh.boundary_edge_elements().iter().enumerate() {
            robin_edges[embedding.fine_to_coarse[e]].push(edge);
        }
        Ok(Self {
            mesh,
            embedding,
            interp,
            interp_t,
            robin_edges,
        })
    }

    pub fn prolongation(&self) -> &CsrMatrix<f64> {
        &self.embedding.prolongation
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.num_nodes()
    }

    /// Patch layer count that covers the whole mesh from any seed.
    pub fn saturating_layers(&self) -> usize {
        self.mesh.saturating_layers()
    }
}
