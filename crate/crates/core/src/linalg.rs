//! Direct solvers: sparse complex LU (backed by faer) and small dense solves.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{LodError, Result};
use crate::sparse::{norm2, CsrMatrix, C64};

/// Relative residual below which a direct solve is accepted without refinement.
pub const DIRECT_SOLVE_TOL: f64 = 1e-10;

/// Sparse LU factorization of a square complex matrix with partial pivoting.
pub struct SparseLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, C64>,
}

impl SparseLu {
    pub fn factor(a: &CsrMatrix<C64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(LodError::config(format!(
                "cannot factor a {}x{} matrix",
                a.nrows(),
                a.ncols()
            )));
        }
        sequential_kernels();
        let mat = to_faer(a)?;
        let lu = mat
            .sp_lu()
            .map_err(|e| LodError::numerical(format!("sparse LU failed: {e:?}")))?;
        Ok(Self { n: a.nrows(), lu })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[C64]) -> Vec<C64> {
        self.solve_many(&[rhs.to_vec()]).pop().unwrap()
    }

    /// Solves for several right-hand sides given as columns.
    pub fn solve_many(&self, rhs: &[Vec<C64>]) -> Vec<Vec<C64>> {
        if rhs.is_empty() {
            return Vec::new();
        }
        let b = Mat::<C64>::from_fn(self.n, rhs.len(), |i, j| rhs[j][i]);
        let x = self.lu.solve(&b);
        (0..rhs.len())
            .map(|j| (0..self.n).map(|i| x[(i, j)]).collect())
            .collect()
    }
}

/// Dense and sparse kernels run single-threaded; parallelism lives at the
/// level of independent solves, which keeps every result bit-reproducible.
pub fn sequential_kernels() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

fn to_faer(a: &CsrMatrix<C64>) -> Result<SparseColMat<usize, C64>> {
    let triplets: Vec<_> = a.iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
    SparseColMat::try_new_from_triplets(a.nrows(), a.ncols(), &triplets)
        .map_err(|e| LodError::numerical(format!("sparse matrix conversion failed: {e:?}")))
}

/// Relative residual `||A x - b|| / ||b||` (absolute when `b = 0`).
pub fn relative_residual(a: &CsrMatrix<C64>, x: &[C64], b: &[C64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<C64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let nb = norm2(b);
    if nb == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / nb
    }
}

/// Direct solve with up to two steps of iterative refinement; fails if the
/// relative residual stays above `tol`.
pub fn solve_checked(a: &CsrMatrix<C64>, b: &[C64], tol: f64, what: &str) -> Result<Vec<C64>> {
    if norm2(b) == 0.0 {
        return Ok(vec![C64::new(0.0, 0.0); a.ncols()]);
    }
    let lu = SparseLu::factor(a)?;
    let mut x = lu.solve(b);
    let mut res = relative_residual(a, &x, b);
    for _ in 0..2 {
        if res.is_finite() && res <= tol {
            break;
        }
        let ax = a.mul_vec(&x);
        let r: Vec<C64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let dx = lu.solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        res = relative_residual(a, &x, b);
    }
    if !(res.is_finite() && res <= tol) {
        return Err(LodError::numerical(format!(
            "{what}: relative residual {res:.3e} exceeds {tol:.1e} (matrix singular or ill-conditioned)"
        )));
    }
    Ok(x)
}

/// Solves a small dense complex system `A X = B` by partial-pivot LU.
///
/// `a` is row-major `n x n`, `b` holds the right-hand sides as columns.
pub fn dense_solve(a: &[Vec<C64>], b: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
    let n = a.len();
    if b.is_empty() {
        return Ok(Vec::new());
    }
    let am = Mat::<C64>::from_fn(n, n, |i, j| a[i][j]);
    let bm = Mat::<C64>::from_fn(n, b.len(), |i, j| b[j][i]);
    let x = am.partial_piv_lu().solve(&bm);
    let out: Vec<Vec<C64>> = (0..b.len()).map(|j| (0..n).map(|i| x[(i, j)]).collect()).collect();
    if out.iter().flatten().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(LodError::numerical("dense solve produced non-finite values"));
    }
    Ok(out)
}

/// Inverse of a small dense symmetric positive definite real matrix (row-major).
pub fn dense_spd_inverse(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let am = Mat::<f64>::from_fn(n, n, |i, j| a[i][j]);
    let llt = am
        .llt(faer::Side::Lower)
        .map_err(|e| LodError::numerical(format!("local Gram matrix not positive definite: {e:?}")))?;
    let inv = llt.solve(Mat::<f64>::identity(n, n));
    Ok((0..n).map(|i| (0..n).map(|j| inv[(i, j)]).collect()).collect())
}

/// Numerical rank of a dense real matrix via singular values.
pub fn numerical_rank(a: &[Vec<f64>], rel_tol: f64) -> Result<usize> {
    let nr = a.len();
    if nr == 0 {
        return Ok(0);
    }
    let nc = a[0].len();
    let am = Mat::<f64>::from_fn(nr, nc, |i, j| a[i][j]);
    let s = am
        .singular_values()
        .map_err(|e| LodError::numerical(format!("SVD failed: {e:?}")))?;
    let smax = s.iter().cloned().fold(0.0, f64::max);
    Ok(s.iter().filter(|&&v| v > rel_tol * smax).count())
}

/// Smallest singular value of a dense complex matrix given in sparse form.
pub fn smallest_singular_value(a: &CsrMatrix<C64>) -> Result<f64> {
    let am = Mat::<C64>::from_fn(a.nrows(), a.ncols(), |i, j| a.get(i, j));
    let s = am
        .singular_values()
        .map_err(|e| LodError::numerical(format!("SVD failed: {e:?}")))?;
    Ok(s.iter().cloned().fold(f64::INFINITY, f64::min))
}
