//! Weighted norms, relative errors, coarse best approximations and
//! convergence studies against a fine reference solution.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use crate::assembly::OperatorSet;
use crate::cache::cached_corrector;
use crate::correctors::{compute_corrector, CorrectorOptions, GlobalCorrector, SaddleStrategy};
use crate::error::{LodError, Result};
use crate::interpolation::{InterpolantKind, InterpolationNodes};
use crate::linalg::{solve_checked, DIRECT_SOLVE_TOL};
use crate::lod::{assemble_lod, solve_lod};
use crate::problem::{CoarseSpace, FineProblem};
use crate::sparse::{mul_real_complex, quadratic_form, CsrMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormKind {
    /// `(|A^{1/2} grad v|^2 + k^2 |v|^2)^{1/2}`
    Energy,
    /// `|A^{1/2} grad v|`
    SemiA,
    /// `|A^{1/2} v|`
    L2A,
    L2,
}

impl NormKind {
    pub fn name(self) -> &'static str {
        match self {
            NormKind::Energy => "energy",
            NormKind::SemiA => "semi_A",
            NormKind::L2A => "l2_A",
            NormKind::L2 => "l2",
        }
    }
}

/// Relative tolerance for negative rounding in computed squares.
const NEGATIVE_SQUARE_TOL: f64 = 1e-12;

fn checked_square(q: C64, scale: f64) -> Result<f64> {
    if q.re < -NEGATIVE_SQUARE_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(LodError::numerical(format!("negative squared norm {:.3e}", q.re)));
    }
    Ok(q.re.max(0.0))
}

fn form_square(a: &CsrMatrix<f64>, v: &[C64]) -> Result<f64> {
    let scale = a.max_abs() * v.iter().map(|x| x.norm_sqr()).sum::<f64>();
    checked_square(quadratic_form(a, v), scale)
}

pub fn norm_squared(ops: &OperatorSet, v: &[C64], kind: NormKind) -> Result<f64> {
    if v.len() != ops.mass.nrows() {
        return Err(LodError::config("vector does not live on the operator mesh"));
    }
    let k2 = ops.wave_number * ops.wave_number;
    match kind {
        NormKind::Energy => Ok(form_square(&ops.stiffness_a, v)? + k2 * form_square(&ops.mass, v)?),
        NormKind::SemiA => form_square(&ops.stiffness_a, v),
        NormKind::L2A => form_square(&ops.mass_a, v),
        NormKind::L2 => form_square(&ops.mass, v),
    }
}

pub fn norm(ops: &OperatorSet, v: &[C64], kind: NormKind) -> Result<f64> {
    Ok(norm_squared(ops, v, kind)?.sqrt())
}

/// `|approx - reference| / |reference|` in the given norm.
pub fn relative_error(ops: &OperatorSet, approx: &[C64], reference: &[C64], kind: NormKind) -> Result<f64> {
    if approx.len() != reference.len() {
        return Err(LodError::config("vectors of different length"));
    }
    let d: Vec<C64> = approx.iter().zip(reference).map(|(a, b)| a - b).collect();
    let den = norm(ops, reference, kind)?;
    if den == 0.0 {
        return Err(LodError::numerical("reference solution has zero norm"));
    }
    Ok(norm(ops, &d, kind)? / den)
}

/// Inner-product matrix of a norm on the fine mesh.
fn norm_matrix(ops: &OperatorSet, kind: NormKind) -> CsrMatrix<f64> {
    match kind {
        NormKind::Energy => ops
            .stiffness_a
            .add_scaled(1.0, &ops.mass, ops.wave_number * ops.wave_number),
        NormKind::SemiA => ops.stiffness_a.clone(),
        NormKind::L2A => ops.mass_a.clone(),
        NormKind::L2 => ops.mass.clone(),
    }
}

/// Coarse coefficients of the orthogonal projection of `u` onto the range
/// of `prolongation` in the inner product of `kind`.
pub fn best_approximation(
    ops: &OperatorSet,
    prolongation: &CsrMatrix<f64>,
    u: &[C64],
    kind: NormKind,
) -> Result<Vec<C64>> {
    if kind == NormKind::SemiA {
        return Err(LodError::config(
            "best approximation in the A-seminorm is not unique (constants)",
        ));
    }
    if u.len() != prolongation.nrows() {
        return Err(LodError::config("vector does not match the prolongation"));
    }
    let n = norm_matrix(ops, kind);
    let pt = prolongation.transpose();
    let gram = pt.matmul(&n.matmul(prolongation)).to_complex();
    let rhs = mul_real_complex(&pt, &mul_real_complex(&n, u));
    solve_checked(&gram, &rhs, DIRECT_SOLVE_TOL, "best approximation normal equations")
}

/// Empirical orders `log(e_i / e_{i+1}) / log(h_i / h_{i+1})`; the first
/// entry is `NaN`.
pub fn eoc(h: &[f64], e: &[f64]) -> Vec<f64> {
    assert_eq!(h.len(), e.len());
    (0..h.len())
        .map(|i| {
            if i == 0 {
                f64::NAN
            } else {
                (e[i - 1] / e[i]).ln() / (h[i - 1] / h[i]).ln()
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// `u_LOD = (P + Q) u_H`
    LodFull,
    /// `P u_H`, the coarse part of the LOD solution.
    LodCoarse,
    /// Standard P1 Galerkin solution on the coarse mesh.
    P1Fem,
    /// Best approximation in the coarse P1 space, per norm.
    P1Best,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::LodFull, Method::LodCoarse, Method::P1Fem, Method::P1Best];

    pub fn name(self) -> &'static str {
        match self {
            Method::LodFull => "LOD_full",
            Method::LodCoarse => "LOD_coarse",
            Method::P1Fem => "P1FEM",
            Method::P1Best => "P1_best",
        }
    }

    /// Whether the method depends on the number of layers `m`.
    pub fn uses_layers(self) -> bool {
        matches!(self, Method::LodFull | Method::LodCoarse)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub method: Method,
    pub coarse_level: u32,
    /// Coarse grid spacing `2^-level`.
    pub h: f64,
    /// Layers, `0` for methods without correctors.
    pub m: usize,
    pub err_energy: f64,
    pub err_l2a: f64,
    pub err_l2: f64,
    pub dim: usize,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub fine_level: u32,
    pub wave_number: f64,
    pub epsilon: f64,
    pub geometry: String,
    pub interpolant: InterpolantKind,
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    /// Rows of one method and layer count, coarsest first.
    pub fn series(&self, method: Method, m: usize) -> Vec<&ErrorRow> {
        let mut v: Vec<&ErrorRow> = self.rows.iter().filter(|r| r.method == method && r.m == m).collect();
        v.sort_by_key(|r| r.coarse_level);
        v
    }

    /// Layer counts present for a method, ascending.
    pub fn layers(&self, method: Method) -> Vec<usize> {
        let mut v: Vec<usize> = self.rows.iter().filter(|r| r.method == method).map(|r| r.m).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Rows of a method ordered by `m` then coarse level, with EOCs in the
    /// energy and `L2_A` norms.
    pub fn table(&self, method: Method) -> Vec<(ErrorRow, f64, f64)> {
        let mut out = Vec::new();
        for m in self.layers(method) {
            let s = self.series(method, m);
            let h: Vec<f64> = s.iter().map(|r| r.h).collect();
            let ee = eoc(&h, &s.iter().map(|r| r.err_energy).collect::<Vec<_>>());
            let ea = eoc(&h, &s.iter().map(|r| r.err_l2a).collect::<Vec<_>>());
            for (i, r) in s.into_iter().enumerate() {
                out.push(((*r).clone(), ee[i], ea[i]));
            }
        }
        out
    }

    pub fn find(&self, method: Method, coarse_level: u32, m: usize) -> Option<&ErrorRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.coarse_level == coarse_level && r.m == m)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyOptions {
    pub coarse_levels: Vec<u32>,
    pub layers: Vec<usize>,
    pub interpolant: InterpolantKind,
    pub nodes: InterpolationNodes,
    pub strategy: SaddleStrategy,
    pub resolution_constant: f64,
    /// Record wall-clock times (otherwise `0`, keeping outputs reproducible).
    pub timing: bool,
    pub cache_dir: Option<PathBuf>,
}

impl StudyOptions {
    pub fn new(coarse_levels: Vec<u32>, layers: Vec<usize>, interpolant: InterpolantKind) -> Self {
        Self {
            coarse_levels,
            layers,
            interpolant,
            nodes: InterpolationNodes::All,
            strategy: SaddleStrategy::default(),
            resolution_constant: 1.0,
            timing: false,
            cache_dir: None,
        }
    }

    pub fn validate(&self, fine_level: u32) -> Result<()> {
        if self.coarse_levels.is_empty() {
            return Err(LodError::config("at least one coarse level is required"));
        }
        if self.layers.is_empty() {
            return Err(LodError::config("at least one value of m is required"));
        }
        if let Some(&l) = self.coarse_levels.iter().find(|&&l| l >= fine_level) {
            return Err(LodError::config(format!(
                "coarse level {l} must be below the fine level {fine_level}"
            )));
        }
        Ok(())
    }
}

fn errors_of(ops: &OperatorSet, u: &[C64], reference: &[C64]) -> Result<[f64; 3]> {
    Ok([
        relative_error(ops, u, reference, NormKind::Energy)?,
        relative_error(ops, u, reference, NormKind::L2A)?,
        relative_error(ops, u, reference, NormKind::L2)?,
    ])
}

fn seconds(start: Instant, timing: bool) -> f64 {
    if timing {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    }
}

/// Errors of all methods on one coarse level.
fn study_level(
    fine: &FineProblem,
    load: &[C64],
    reference: &[C64],
    level: u32,
    opts: &StudyOptions,
) -> Result<Vec<ErrorRow>> {
    let ops = &fine.ops;
    let start = Instant::now();
    let coarse = CoarseSpace::with_nodes(fine, level, opts.interpolant, opts.nodes)?;
    let setup = seconds(start, opts.timing);
    let p = coarse.prolongation();
    let dim = coarse.num_nodes();
    let h = coarse.mesh.grid_spacing();
    let row = |method, m, e: [f64; 3], t| ErrorRow {
        method,
        coarse_level: level,
        h,
        m,
        err_energy: e[0],
        err_l2a: e[1],
        err_l2: e[2],
        dim,
        wall_time_s: t,
    };
    let mut rows = Vec::new();

    let start = Instant::now();
    let zero = GlobalCorrector::zero(fine.mesh.num_nodes(), dim);
    let fem = solve_lod(&assemble_lod(&zero.matrix, &fine.helmholtz, load, p)?)?;
    rows.push(row(Method::P1Fem, 0, errors_of(ops, &fem.fine, reference)?, seconds(start, opts.timing)));

    let start = Instant::now();
    let mut best = [0.0; 3];
    for (slot, kind) in [NormKind::Energy, NormKind::L2A, NormKind::L2].into_iter().enumerate() {
        let c = best_approximation(ops, p, reference, kind)?;
        best[slot] = relative_error(ops, &mul_real_complex(p, &c), reference, kind)?;
    }
    rows.push(row(Method::P1Best, 0, best, seconds(start, opts.timing)));

    for &m in &opts.layers {
        let start = Instant::now();
        let copts = CorrectorOptions {
            layers: m,
            strategy: opts.strategy,
            resolution_constant: opts.resolution_constant,
        };
        let q = match &opts.cache_dir {
            Some(dir) => cached_corrector(dir, fine, &coarse, m, || compute_corrector(fine, &coarse, &copts))?,
            None => compute_corrector(fine, &coarse, &copts)?,
        };
        let sol = solve_lod(&assemble_lod(&q.matrix, &fine.helmholtz, load, p)?)?;
        let t = setup + seconds(start, opts.timing);
        rows.push(row(Method::LodFull, m, errors_of(ops, &sol.fine, reference)?, t));
        let coarse_part = mul_real_complex(p, &sol.coarse);
        rows.push(row(Method::LodCoarse, m, errors_of(ops, &coarse_part, reference)?, t));
        log::info!(
            "H = 2^-{level}, m = {m}: LOD energy error {:.3e}, max corrector residual {:.1e}",
            rows[rows.len() - 2].err_energy,
            q.max_residual()
        );
    }
    Ok(rows)
}

/// Runs LOD, coarse P1 FEM and the P1 best approximations for every coarse
/// level and layer count against the fine `reference` solution.
pub fn convergence_study(
    fine: &FineProblem,
    load: &[C64],
    reference: &[C64],
    geometry: &str,
    opts: &StudyOptions,
) -> Result<ErrorReport> {
    opts.validate(fine.mesh.level())?;
    let per_level: Vec<Vec<ErrorRow>> = opts
        .coarse_levels
        .par_iter()
        .map(|&l| study_level(fine, load, reference, l, opts))
        .collect::<Result<_>>()?;
    let mut rows: Vec<ErrorRow> = per_level.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.method, r.m, r.coarse_level));
    Ok(ErrorReport {
        fine_level: fine.mesh.level(),
        wave_number: fine.wave_number(),
        epsilon: fine.coefficient.epsilon(),
        geometry: geometry.to_string(),
        interpolant: opts.interpolant,
        rows,
    })
}
