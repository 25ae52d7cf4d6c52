//! Element correctors on oversampling patches and the global corrector.
//!
//! For a coarse element `T` and a vertex hat `lambda_z` of `T`, the element
//! corrector `w = Q_{T,m} lambda_z` lives in the kernel of `I_H` on the
//! fine space of the patch `N^m(T)` and solves
//!
//! ```text
//! B(w, v) = -B_T(lambda_z, v)   for all v in ker I_H on the patch,
//! ```
//!
//! which is a saddle-point system with the rows of `I_H` as constraints.
//! The global corrector is `Q_m lambda_z = sum_{T in star(z)} Q_{T,m} lambda_z`.

use std::collections::BTreeMap;
use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::Mat;
use rayon::prelude::*;

use crate::assembly::{edge_robin, element_helmholtz, element_stiffness};
use crate::error::{LodError, Result};
use crate::interpolation::{kernel_constraint_rows_from_transpose, ConstraintRows};
use crate::linalg::{sequential_kernels, SparseLu};
use crate::mesh::{patch, patch_dof_sets, Patch, StructuredTriMesh};
use crate::problem::{CoarseSpace, FineProblem};
use crate::sparse::{dot_h, norm2, quadratic_form, CsrMatrix, C64};

/// Relative residual accepted for a patch saddle-point solve.
pub const SADDLE_TOL: f64 = 1e-10;

const ZERO: C64 = C64::new(0.0, 0.0);

/// How the constrained patch problems are solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum SaddleStrategy {
    /// Factor `G_pp` once and eliminate the multipliers through the small
    /// dense Schur complement; falls back to the monolithic solve when the
    /// residual check fails.
    #[default]
    BlockElimination,
    /// Sparse LU of the full bordered matrix.
    Monolithic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectorOptions {
    /// Oversampling layers `m`.
    pub layers: usize,
    pub strategy: SaddleStrategy,
    /// A warning is logged when `k H / eps` exceeds this value.
    pub resolution_constant: f64,
}

impl CorrectorOptions {
    pub fn new(layers: usize) -> Self {
        Self {
            layers,
            strategy: SaddleStrategy::default(),
            resolution_constant: 1.0,
        }
    }

    pub fn with_strategy(mut self, strategy: SaddleStrategy) -> Self {
        self.strategy = strategy;
        self
    }
}

/// Solution of `[[G, C^T], [C, 0]] [w; l] = [r; 0]` for several columns `r`.
#[derive(Clone, Debug)]
pub struct SaddleSolution {
    pub primal: Vec<Vec<C64>>,
    pub multipliers: Vec<Vec<C64>>,
    /// Largest relative residual of the bordered system over all columns.
    pub residual: f64,
    pub used_fallback: bool,
}

/// Solves the bordered system for every right-hand side in `rhs`.
///
/// `c` must have full row rank. Rows of `c` act on the unknowns of `g`.
pub fn solve_saddle(
    g: &CsrMatrix<C64>,
    c: &CsrMatrix<f64>,
    rhs: &[Vec<C64>],
    strategy: SaddleStrategy,
) -> Result<SaddleSolution> {
    if g.nrows() != g.ncols() || c.ncols() != g.nrows() {
        return Err(LodError::config("saddle system blocks have inconsistent sizes"));
    }
    if rhs.is_empty() {
        return Ok(SaddleSolution {
            primal: Vec::new(),
            multipliers: Vec::new(),
            residual: 0.0,
            used_fallback: false,
        });
    }
    sequential_kernels();
    if strategy == SaddleStrategy::BlockElimination {
        match block_elimination(g, c, rhs) {
            Ok((w, l)) => {
                let residual = saddle_residual(g, c, rhs, &w, &l);
                if residual.is_finite() && residual <= SADDLE_TOL {
                    return Ok(SaddleSolution {
                        primal: w,
                        multipliers: l,
                        residual,
                        used_fallback: false,
                    });
                }
                log::debug!("block elimination residual {residual:.2e}, retrying monolithically");
            }
            Err(e) => log::debug!("block elimination failed ({e}), retrying monolithically"),
        }
    }
    let (w, l) = monolithic(g, c, rhs)?;
    let residual = saddle_residual(g, c, rhs, &w, &l);
    if !(residual.is_finite() && residual <= SADDLE_TOL) {
        return Err(LodError::numerical(format!(
            "constrained solve residual {residual:.3e} exceeds {SADDLE_TOL:.0e}"
        )));
    }
    Ok(SaddleSolution {
        primal: w,
        multipliers: l,
        residual,
        used_fallback: strategy == SaddleStrategy::BlockElimination,
    })
}

fn row_dot(c: &CsrMatrix<f64>, i: usize, x: &[C64]) -> C64 {
    let (cols, vals) = c.row(i);
    let mut s = ZERO;
    for (&j, &v) in cols.iter().zip(vals) {
        s += x[j] * v;
    }
    s
}

/// Residual blocks `(r - G w - C^T l, -C w)` per column.
fn saddle_defect(
    g: &CsrMatrix<C64>,
    c: &CsrMatrix<f64>,
    rhs: &[Vec<C64>],
    w: &[Vec<C64>],
    l: &[Vec<C64>],
) -> (Vec<Vec<C64>>, Vec<Vec<C64>>) {
    let ct = c.transpose();
    let mut r1 = Vec::with_capacity(rhs.len());
    let mut r2 = Vec::with_capacity(rhs.len());
    for j in 0..rhs.len() {
        let gw = g.mul_vec(&w[j]);
        let mut top: Vec<C64> = rhs[j].iter().zip(&gw).map(|(r, q)| r - q).collect();
        for (x, t) in top.iter_mut().enumerate() {
            *t -= row_dot(&ct, x, &l[j]);
        }
        r1.push(top);
        r2.push((0..c.nrows()).map(|i| -row_dot(c, i, &w[j])).collect());
    }
    (r1, r2)
}

fn saddle_residual(g: &CsrMatrix<C64>, c: &CsrMatrix<f64>, rhs: &[Vec<C64>], w: &[Vec<C64>], l: &[Vec<C64>]) -> f64 {
    let (r1, r2) = saddle_defect(g, c, rhs, w, l);
    let mut worst: f64 = 0.0;
    for j in 0..rhs.len() {
        let num = (norm2(&r1[j]).powi(2) + norm2(&r2[j]).powi(2)).sqrt();
        let den = norm2(&rhs[j]);
        let rel = if den > 0.0 { num / den } else { num };
        if rel.is_nan() {
            return f64::NAN;
        }
        worst = worst.max(rel);
    }
    worst
}

type Columns = Vec<Vec<C64>>;

fn block_elimination(g: &CsrMatrix<C64>, c: &CsrMatrix<f64>, rhs: &[Vec<C64>]) -> Result<(Columns, Columns)> {
    let n = g.nrows();
    let nc = c.nrows();
    let lu = SparseLu::factor(g)?;
    let ct_cols: Vec<Vec<C64>> = (0..nc)
        .map(|i| {
            let mut col = vec![ZERO; n];
            let (cols, vals) = c.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                col[j] = C64::new(v, 0.0);
            }
            col
        })
        .collect();
    let x = lu.solve_many(&ct_cols);
    let schur = Mat::<C64>::from_fn(nc, nc, |i, j| row_dot(c, i, &x[j]));
    let schur_lu = schur.partial_piv_lu();

    let solve = |r1: &[Vec<C64>], r2: Option<&[Vec<C64>]>| -> (Columns, Columns) {
        let y = lu.solve_many(r1);
        let z = Mat::<C64>::from_fn(nc, y.len(), |i, j| {
            let cy = row_dot(c, i, &y[j]);
            match r2 {
                Some(r2) => cy - r2[j][i],
                None => cy,
            }
        });
        let lam = if nc > 0 { schur_lu.solve(&z) } else { z };
        let mut w = y;
        for (j, wj) in w.iter_mut().enumerate() {
            for (k, xk) in x.iter().enumerate() {
                let lk = lam[(k, j)];
                if lk != ZERO {
                    for (wi, xi) in wj.iter_mut().zip(xk) {
                        *wi -= xi * lk;
                    }
                }
            }
        }
        let l = (0..r1.len()).map(|j| (0..nc).map(|k| lam[(k, j)]).collect()).collect();
        (w, l)
    };

    let (mut w, mut l) = solve(rhs, None);
    for _ in 0..2 {
        if saddle_residual(g, c, rhs, &w, &l) <= SADDLE_TOL {
            break;
        }
        let (r1, r2) = saddle_defect(g, c, rhs, &w, &l);
        let (dw, dl) = solve(&r1, Some(&r2));
        add_columns(&mut w, &dw);
        add_columns(&mut l, &dl);
    }
    if w.iter().flatten().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(LodError::numerical("block elimination produced non-finite values"));
    }
    Ok((w, l))
}

fn add_columns(a: &mut [Vec<C64>], b: &[Vec<C64>]) {
    for (x, y) in a.iter_mut().zip(b) {
        for (p, q) in x.iter_mut().zip(y) {
            *p += q;
        }
    }
}

fn monolithic(g: &CsrMatrix<C64>, c: &CsrMatrix<f64>, rhs: &[Vec<C64>]) -> Result<(Columns, Columns)> {
    let n = g.nrows();
    let nc = c.nrows();
    let mut trip: Vec<(usize, usize, C64)> = g.iter().collect();
    for (i, j, v) in c.iter() {
        trip.push((n + i, j, C64::new(v, 0.0)));
        trip.push((j, n + i, C64::new(v, 0.0)));
    }
    let k = CsrMatrix::from_triplets(n + nc, n + nc, &trip);
    let lu = SparseLu::factor(&k)?;
    let full: Vec<Vec<C64>> = rhs
        .iter()
        .map(|r| {
            let mut b = r.clone();
            b.resize(n + nc, ZERO);
            b
        })
        .collect();
    let mut sol = lu.solve_many(&full);
    for _ in 0..2 {
        let mut worst: f64 = 0.0;
        let defects: Vec<Vec<C64>> = full
            .iter()
            .zip(&sol)
            .map(|(b, x)| {
                let kx = k.mul_vec(x);
                let d: Vec<C64> = b.iter().zip(&kx).map(|(p, q)| p - q).collect();
                let nb = norm2(b);
                worst = worst.max(if nb > 0.0 { norm2(&d) / nb } else { norm2(&d) });
                d
            })
            .collect();
        if worst <= SADDLE_TOL {
            break;
        }
        let dx = lu.solve_many(&defects);
        add_columns(&mut sol, &dx);
    }
    let w = sol.iter().map(|s| s[..n].to_vec()).collect();
    let l = sol.iter().map(|s| s[n..].to_vec()).collect();
    Ok((w, l))
}

/// Per-element solve report.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectorDiagnostics {
    pub element: usize,
    pub layers: usize,
    pub patch_elements: usize,
    pub dofs: usize,
    pub constraints: usize,
    pub residual: f64,
    pub used_fallback: bool,
    /// Smallest `Re(w^H G w) / |w|_{1,A}^2` over the three correctors of the
    /// element (`1` when the corrector vanishes).
    pub coercivity_ratio: f64,
}

impl CorrectorDiagnostics {
    pub fn elliptic(&self) -> bool {
        self.coercivity_ratio > 0.0
    }
}

/// `Q_{T,m} lambda_z` for the three vertices `z` of one coarse element.
#[derive(Clone, Debug)]
pub struct ElementCorrector {
    pub element: usize,
    /// Fine nodes carrying the corrector (shared by elements with the same patch).
    pub dofs: Arc<Vec<usize>>,
    /// Values on `dofs`, one column per local vertex of the element.
    pub columns: [Vec<C64>; 3],
    pub diagnostics: CorrectorDiagnostics,
}

impl ElementCorrector {
    /// Column `a` as a full fine nodal vector.
    pub fn full_column(&self, a: usize, num_fine_nodes: usize) -> Vec<C64> {
        let mut v = vec![ZERO; num_fine_nodes];
        for (&x, &w) in self.dofs.iter().zip(&self.columns[a]) {
            v[x] = w;
        }
        v
    }
}

/// Logs a warning when the coarse mesh does not resolve the wave and the
/// period (`k H / eps > C`).
pub fn check_resolution(fine: &FineProblem, coarse: &CoarseSpace, constant: f64) -> bool {
    let ratio = fine.wave_number() * coarse.mesh.mesh_size() / fine.coefficient.epsilon();
    let ok = ratio <= constant;
    if !ok {
        log::warn!(
            "k H / eps = {ratio:.3} exceeds the resolution constant {constant}; correctors may lose ellipticity"
        );
    }
    ok
}

/// Right-hand side `-(G_T P e_z)` restricted to the patch dofs (`local` maps
/// fine nodes to dof positions, `usize::MAX` outside).
fn element_load_column(
    fine: &FineProblem,
    coarse: &CoarseSpace,
    t: usize,
    a: usize,
    local: &[usize],
    n: usize,
) -> Vec<C64> {
    let z = coarse.mesh.elements()[t][a];
    let p = coarse.prolongation();
    let k = fine.wave_number();
    let mut b = vec![ZERO; n];
    for &e in &coarse.embedding.coarse_to_fine[t] {
        let tri = fine.mesh.elements()[e];
        let pv = tri.map(|x| p.get(x, z));
        if pv.iter().all(|&v| v == 0.0) {
            continue;
        }
        let ge = element_helmholtz(&fine.mesh, e, fine.element_a[e], k);
        for i in 0..3 {
            let l = local[tri[i]];
            if l == usize::MAX {
                continue;
            }
            for j in 0..3 {
                b[l] -= ge[i][j] * pv[j];
            }
        }
    }
    for &edge in &coarse.robin_edges[t] {
        let ed = fine.mesh.boundary_edges()[edge];
        let pv = ed.map(|x| p.get(x, z));
        if pv.iter().all(|&v| v == 0.0) {
            continue;
        }
        let re = edge_robin(&fine.mesh, edge, k);
        for i in 0..2 {
            let l = local[ed[i]];
            if l == usize::MAX {
                continue;
            }
            for j in 0..2 {
                b[l] -= re[i][j] * pv[j];
            }
        }
    }
    b
}

/// Constraint rows and fine dofs of a coarse patch.
pub fn patch_system(fine: &FineProblem, coarse: &CoarseSpace, p: &Patch) -> (Vec<usize>, ConstraintRows) {
    let mask = coarse.embedding.fine_mask(p);
    let dofs = patch_dof_sets(&fine.mesh, &mask).interior_nodes;
    let cons = kernel_constraint_rows_from_transpose(&coarse.interp_t, &dofs);
    (dofs, cons)
}

/// Solves the correctors of all elements in `seeds`, which share patch `p`.
fn solve_group(
    fine: &FineProblem,
    coarse: &CoarseSpace,
    p: &Patch,
    seeds: &[usize],
    strategy: SaddleStrategy,
) -> Result<Vec<ElementCorrector>> {
    let (dofs, cons) = patch_system(fine, coarse, p);
    let n = dofs.len();
    let mut local = vec![usize::MAX; fine.mesh.num_nodes()];
    for (l, &x) in dofs.iter().enumerate() {
        local[x] = l;
    }
    let rhs: Vec<Vec<C64>> = seeds
        .iter()
        .flat_map(|&t| (0..3).map(move |a| (t, a)))
        .map(|(t, a)| element_load_column(fine, coarse, t, a, &local, n))
        .collect();

    let (columns, residual, used_fallback) = if n == 0 {
        (vec![Vec::new(); rhs.len()], 0.0, false)
    } else {
        let g = fine.helmholtz.restrict(&dofs, &dofs);
        let sol = solve_saddle(&g, &cons.matrix, &rhs, strategy).map_err(|e| {
            LodError::numerical(format!(
                "corrector solve for coarse element(s) {seeds:?} with m = {}: {e}",
                p.layers
            ))
        })?;
        (sol.primal, sol.residual, sol.used_fallback)
    };

    let stiff = if n == 0 {
        CsrMatrix::zeros(0, 0)
    } else {
        fine.ops.stiffness_a.restrict(&dofs, &dofs)
    };
    let g = if n == 0 {
        CsrMatrix::zeros(0, 0)
    } else {
        fine.helmholtz.restrict(&dofs, &dofs)
    };
    let dofs = Arc::new(dofs);
    let mut out = Vec::with_capacity(seeds.len());
    let mut cols = columns.into_iter();
    for &t in seeds {
        let c: [Vec<C64>; 3] = [cols.next().unwrap(), cols.next().unwrap(), cols.next().unwrap()];
        let mut ratio: f64 = 1.0;
        for w in &c {
            let semi = quadratic_form(&stiff, w).re;
            if semi > 0.0 {
                let re = dot_h(w, &g.mul_vec(w)).re;
                ratio = ratio.min(re / semi);
            }
        }
        let diagnostics = CorrectorDiagnostics {
            element: t,
            layers: p.layers,
            patch_elements: p.elements.len(),
            dofs: n,
            constraints: cons.coarse_nodes.len(),
            residual,
            used_fallback,
            coercivity_ratio: ratio,
        };
        if !diagnostics.elliptic() {
            log::warn!(
                "corrector problem of coarse element {t} (m = {}) is not coercive: ratio {ratio:.3e}",
                p.layers
            );
        }
        out.push(ElementCorrector {
            element: t,
            dofs: Arc::clone(&dofs),
            columns: c,
            diagnostics,
        });
    }
    Ok(out)
}

/// Computes `Q_{T,m}` for every coarse element. Elements whose patches
/// coincide share one factorization.
pub fn compute_element_correctors(
    fine: &FineProblem,
    coarse: &CoarseSpace,
    opts: &CorrectorOptions,
) -> Result<Vec<ElementCorrector>> {
    check_resolution(fine, coarse, opts.resolution_constant);
    let ne = coarse.mesh.num_elements();
    let patches: Vec<Patch> = (0..ne)
        .map(|t| patch(&coarse.mesh, t, opts.layers))
        .collect::<Result<_>>()?;
    let mut groups: BTreeMap<&[usize], Vec<usize>> = BTreeMap::new();
    for p in &patches {
        groups.entry(&p.elements).or_default().push(p.seed);
    }
    let groups: Vec<(&Patch, Vec<usize>)> = groups
        .into_values()
        .map(|seeds| (&patches[seeds[0]], seeds))
        .collect();
    log::debug!(
        "{} coarse elements, {} distinct patches for m = {}",
        ne,
        groups.len(),
        opts.layers
    );
    let solved: Vec<Vec<ElementCorrector>> = groups
        .par_iter()
        .map(|(p, seeds)| solve_group(fine, coarse, p, seeds, opts.strategy))
        .collect::<Result<_>>()?;
    let mut out: Vec<Option<ElementCorrector>> = (0..ne).map(|_| None).collect();
    for c in solved.into_iter().flatten() {
        let t = c.element;
        out[t] = Some(c);
    }
    Ok(out.into_iter().map(|c| c.expect("every element has a corrector")).collect())
}

/// The global corrector `Q_m` as a fine x coarse matrix.
#[derive(Clone, Debug)]
pub struct GlobalCorrector {
    pub matrix: CsrMatrix<C64>,
    pub layers: usize,
    pub diagnostics: Vec<CorrectorDiagnostics>,
}

impl GlobalCorrector {
    /// Zero corrector: the LOD system then reduces to plain coarse P1 FEM.
    pub fn zero(num_fine_nodes: usize, num_coarse_nodes: usize) -> Self {
        Self {
            matrix: CsrMatrix::zeros(num_fine_nodes, num_coarse_nodes),
            layers: 0,
            diagnostics: Vec::new(),
        }
    }

    /// Corrector of the adjoint problem, `conj(Q)` (the form is complex symmetric).
    pub fn dual(&self) -> CsrMatrix<C64> {
        self.matrix.conj()
    }

    pub fn max_residual(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.residual).fold(0.0, f64::max)
    }

    pub fn non_coercive_elements(&self) -> Vec<usize> {
        self.diagnostics.iter().filter(|d| !d.elliptic()).map(|d| d.element).collect()
    }
}

/// Sums element correctors over node stars: column `z` of the result is
/// `sum_{T in star(z)} Q_{T,m} lambda_z`, accumulated in element order.
pub fn assemble_global_corrector(
    num_fine_nodes: usize,
    coarse: &StructuredTriMesh,
    correctors: &[ElementCorrector],
    layers: usize,
) -> Result<GlobalCorrector> {
    if correctors.len() != coarse.num_elements() || correctors.iter().enumerate().any(|(t, c)| c.element != t) {
        return Err(LodError::config("need exactly one corrector per coarse element, in element order"));
    }
    let rows: Vec<Vec<(usize, C64)>> = (0..coarse.num_nodes())
        .into_par_iter()
        .map_init(
            || (vec![ZERO; num_fine_nodes], vec![false; num_fine_nodes]),
            |(acc, hit), z| {
                let mut touched = Vec::new();
                for &t in coarse.node_star(z) {
                    let c = &correctors[t];
                    let a = coarse.elements()[t].iter().position(|&v| v == z).expect("vertex of star element");
                    for (&x, &w) in c.dofs.iter().zip(&c.columns[a]) {
                        if !hit[x] {
                            hit[x] = true;
                            touched.push(x);
                        }
                        acc[x] += w;
                    }
                }
                touched.sort_unstable();
                let row: Vec<(usize, C64)> = touched.iter().map(|&x| (x, acc[x])).collect();
                for &x in &touched {
                    acc[x] = ZERO;
                    hit[x] = false;
                }
                row
            },
        )
        .collect();
    let qt = CsrMatrix::from_sorted_rows(num_fine_nodes, rows);
    Ok(GlobalCorrector {
        matrix: qt.transpose(),
        layers,
        diagnostics: correctors.iter().map(|c| c.diagnostics.clone()).collect(),
    })
}

/// Element correctors followed by global assembly.
pub fn compute_corrector(fine: &FineProblem, coarse: &CoarseSpace, opts: &CorrectorOptions) -> Result<GlobalCorrector> {
    let elems = compute_element_correctors(fine, coarse, opts)?;
    assemble_global_corrector(fine.mesh.num_nodes(), &coarse.mesh, &elems, opts.layers)
}

/// Ideal corrector from one constrained solve over the whole fine space:
/// `G Q + I_H^T L = -G P`, `I_H Q = 0`.
pub fn ideal_corrector(fine: &FineProblem, coarse: &CoarseSpace, strategy: SaddleStrategy) -> Result<GlobalCorrector> {
    let nf = fine.mesh.num_nodes();
    let nz = coarse.num_nodes();
    let all: Vec<usize> = (0..nf).collect();
    let cons = kernel_constraint_rows_from_transpose(&coarse.interp_t, &all);
    let gp = fine.helmholtz.matmul(&coarse.prolongation().to_complex());
    let gpt = gp.transpose();
    let rhs: Vec<Vec<C64>> = (0..nz)
        .map(|z| {
            let mut col = vec![ZERO; nf];
            let (rows, vals) = gpt.row(z);
            for (&x, &v) in rows.iter().zip(vals) {
                col[x] = -v;
            }
            col
        })
        .collect();
    let sol = solve_saddle(&fine.helmholtz, &cons.matrix, &rhs, strategy)
        .map_err(|e| LodError::numerical(format!("ideal corrector: {e}")))?;
    let rows: Vec<Vec<(usize, C64)>> = sol
        .primal
        .iter()
        .map(|col| col.iter().enumerate().filter(|(_, v)| **v != ZERO).map(|(x, &v)| (x, v)).collect())
        .collect();
    Ok(GlobalCorrector {
        matrix: CsrMatrix::from_sorted_rows(nf, rows).transpose(),
        layers: coarse.saturating_layers(),
        diagnostics: Vec::new(),
    })
}

/// `sum_e A_e v_e^H K_e v_e` over the fine elements where `include(e)` holds.
pub fn semi_a_squared_on(fine: &FineProblem, v: &[C64], include: impl Fn(usize) -> bool) -> f64 {
    let mut s = 0.0;
    for e in 0..fine.mesh.num_elements() {
        if !include(e) {
            continue;
        }
        let tri = fine.mesh.elements()[e];
        let ke = element_stiffness(&fine.mesh.element_vertices(e));
        let mut q = ZERO;
        for i in 0..3 {
            for j in 0..3 {
                q += v[tri[i]].conj() * v[tri[j]] * ke[i][j];
            }
        }
        s += fine.element_a[e] * q.re;
    }
    s
}

/// Decay of one element corrector with the number of layers.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayProfile {
    pub element: usize,
    pub layers: Vec<usize>,
    /// `|Q_T lambda|_{1,A}` of the ideal element corrector outside `N^m(T)`
    /// (root sum of squares over the three vertex hats).
    pub tail_energies: Vec<f64>,
    /// `|(Q_T - Q_{T,m}) lambda|_{1,A}`, same aggregation.
    pub localization_errors: Vec<f64>,
    /// `|Q_T lambda|_{1,A}` of the ideal element corrector.
    pub ideal_energy: f64,
    /// Least-squares slope of `ln(localization error)` against `m >= 1`.
    pub fitted_slope: f64,
    /// `exp(fitted_slope)`, the per-layer contraction factor.
    pub fitted_beta: f64,
}

/// Coarse element touching the centre of the domain from the lower left.
pub fn central_element(coarse: &StructuredTriMesh) -> usize {
    let h = coarse.grid_spacing();
    coarse
        .locate([0.5 - 0.25 * h, 0.5 - 0.75 * h])
        .map(|(e, _)| e)
        .expect("point inside the unit square")
}

/// Localization study of the corrector of coarse element `element` for
/// `m = 0..=max_layers`, against the ideal element corrector.
pub fn corrector_decay_profile(
    fine: &FineProblem,
    coarse: &CoarseSpace,
    element: usize,
    max_layers: usize,
    strategy: SaddleStrategy,
) -> Result<DecayProfile> {
    let ne = coarse.mesh.num_elements();
    if element >= ne {
        return Err(LodError::Index { index: element, size: ne });
    }
    if max_layers == 0 {
        return Err(LodError::config("decay study needs at least one layer"));
    }
    let nf = fine.mesh.num_nodes();
    let full = patch(&coarse.mesh, element, coarse.saturating_layers())?;
    let ideal = solve_group(fine, coarse, &full, &[element], strategy)?.remove(0);
    let ideal_cols: Vec<Vec<C64>> = (0..3).map(|a| ideal.full_column(a, nf)).collect();
    let ideal_energy = ideal_cols
        .iter()
        .map(|v| semi_a_squared_on(fine, v, |_| true))
        .sum::<f64>()
        .sqrt();

    let layers: Vec<usize> = (0..=max_layers).collect();
    let mut tail_energies = Vec::new();
    let mut localization_errors = Vec::new();
    for &m in &layers {
        let p = patch(&coarse.mesh, element, m)?;
        let mask = coarse.embedding.fine_mask(&p);
        let tail: f64 = ideal_cols.iter().map(|v| semi_a_squared_on(fine, v, |e| !mask[e])).sum();
        tail_energies.push(tail.sqrt());
        let loc = solve_group(fine, coarse, &p, &[element], strategy)?.remove(0);
        let err: f64 = (0..3)
            .map(|a| {
                let lv = loc.full_column(a, nf);
                let d: Vec<C64> = ideal_cols[a].iter().zip(&lv).map(|(x, y)| x - y).collect();
                semi_a_squared_on(fine, &d, |_| true)
            })
            .sum();
        localization_errors.push(err.sqrt());
    }
    let fitted_slope = log_slope(&layers[1..], &localization_errors[1..], 1e-14 * ideal_energy);
    Ok(DecayProfile {
        element,
        layers,
        tail_energies,
        localization_errors,
        ideal_energy,
        fitted_slope,
        fitted_beta: fitted_slope.exp(),
    })
}

/// Least-squares slope of `ln y` against `x`, ignoring values `<= floor`;
/// `NaN` with fewer than two usable points.
pub fn log_slope(x: &[usize], y: &[f64], floor: f64) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, &v)| v > floor && v.is_finite())
        .map(|(&m, &v)| (m as f64, v.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
