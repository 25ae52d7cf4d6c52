//! The Petrov-Galerkin LOD system on the coarse space.
//!
//! Trial functions are `(P + Q) e_z`, test functions `(P + Q*) e_z` with the
//! dual corrector `Q* = conj(Q)`. Since `B(u, v) = v^H G u` this gives
//! `K = (P + Q)^T G (P + Q)` and `rhs = (P + Q)^T F`.

use crate::error::{LodError, Result};
use crate::linalg::{relative_residual, smallest_singular_value, solve_checked, DIRECT_SOLVE_TOL};
use crate::sparse::{CsrMatrix, C64};

#[derive(Clone, Debug)]
pub struct LodSystem {
    pub matrix: CsrMatrix<C64>,
    pub rhs: Vec<C64>,
    /// `P + Q` (fine nodes x coarse nodes).
    pub trial: CsrMatrix<C64>,
}

impl LodSystem {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Test basis `P + conj(Q)`.
    pub fn test_basis(&self, prolongation: &CsrMatrix<f64>) -> CsrMatrix<C64> {
        let p = prolongation.to_complex();
        let q = self.trial.add_scaled(C64::new(1.0, 0.0), &p, C64::new(-1.0, 0.0));
        p.add_scaled(C64::new(1.0, 0.0), &q.conj(), C64::new(1.0, 0.0))
    }

    /// Smallest singular value of the system matrix (dense, small systems only).
    pub fn smallest_singular_value(&self) -> Result<f64> {
        smallest_singular_value(&self.matrix)
    }
}

#[derive(Clone, Debug)]
pub struct LodSolution {
    /// Coarse coefficients `u_H`.
    pub coarse: Vec<C64>,
    /// `u_LOD = (P + Q) u_H` on the fine mesh.
    pub fine: Vec<C64>,
    pub residual: f64,
}

/// Builds the LOD system from the global corrector `q` (fine x coarse), the
/// fine Helmholtz matrix `g`, the fine load `f` and the prolongation `p`.
/// With `q = 0` this is the standard coarse P1 Galerkin system.
pub fn assemble_lod(
    q: &CsrMatrix<C64>,
    g: &CsrMatrix<C64>,
    f: &[C64],
    prolongation: &CsrMatrix<f64>,
) -> Result<LodSystem> {
    let (nf, nc) = (prolongation.nrows(), prolongation.ncols());
    if q.nrows() != nf || q.ncols() != nc {
        return Err(LodError::config(format!(
            "corrector is {}x{}, expected {nf}x{nc}",
            q.nrows(),
            q.ncols()
        )));
    }
    if g.nrows() != nf || g.ncols() != nf || f.len() != nf {
        return Err(LodError::config("fine operator and load do not match the prolongation"));
    }
    let one = C64::new(1.0, 0.0);
    let trial = prolongation.to_complex().add_scaled(one, q, one);
    let trial_t = trial.transpose();
    let matrix = trial_t.matmul(&g.matmul(&trial));
    let rhs = trial_t.mul_vec(f);
    Ok(LodSystem { matrix, rhs, trial })
}

pub fn solve_lod(system: &LodSystem) -> Result<LodSolution> {
    let coarse = solve_checked(&system.matrix, &system.rhs, DIRECT_SOLVE_TOL, "LOD system")?;
    let residual = relative_residual(&system.matrix, &coarse, &system.rhs);
    let fine = system.trial.mul_vec(&coarse);
    Ok(LodSolution { coarse, fine, residual })
}
