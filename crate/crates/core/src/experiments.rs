//! Batch commands: convergence studies, field export and corrector decay.
//! Every command writes plain-text files into the configured output
//! directory and returns their paths.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::{convergence_study, relative_error, ErrorReport, Method, NormKind, StudyOptions};
use crate::assembly::{assemble_load, solve_fine_reference, LoadVector};
use crate::cache::cached_corrector;
use crate::coefficient::{build_coefficient, GeometryKind, GeometrySpec};
use crate::config::ExperimentConfig;
use crate::correctors::{central_element, compute_corrector, corrector_decay_profile, CorrectorOptions, DecayProfile};
use crate::error::{LodError, Result};
use crate::lod::{assemble_lod, solve_lod};
use crate::problem::{CoarseSpace, FineProblem};
use crate::sparse::{mul_real_complex, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Converge,
    Solve,
    Decay,
}

/// Runs `cmd` inside a thread pool sized by the configuration (or the
/// environment override).
pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let workers = cfg.effective_workers()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| LodError::config(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| match cmd {
        Command::Converge => cmd_converge(cfg),
        Command::Solve => cmd_solve(cfg),
        Command::Decay => cmd_decay(cfg),
    })
}

/// Fine problem for the configured geometry (or an override of it).
pub fn fine_problem(cfg: &ExperimentConfig, geometry: &GeometryKind) -> Result<FineProblem> {
    let coefficient = build_coefficient(&GeometrySpec::new(geometry.clone(), cfg.epsilon_exponent))?;
    FineProblem::new(coefficient, cfg.fine_level, cfg.wave_number)
}

/// Fine load vector and reference solution `u_h`.
pub fn reference_solution(fine: &FineProblem, source: [f64; 2]) -> Result<(LoadVector, Vec<C64>)> {
    let load = assemble_load(&fine.mesh, source)?;
    let u = solve_fine_reference(&fine.helmholtz, &load.values)?;
    Ok((load, u))
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:e}")
    }
}

fn write_file(dir: &Path, name: &str, text: &str, out: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text)?;
    out.push(path);
    Ok(())
}

pub const CONVERGENCE_HEADER: &str = "H,m,err_energy_rel,err_l2A_rel,err_l2_rel,eoc_energy,eoc_l2A,dim_VH,wall_time_s";

/// CSV text of one method of a convergence report.
pub fn convergence_csv(report: &ErrorReport, method: Method) -> String {
    let mut s = String::new();
    s.push_str(CONVERGENCE_HEADER);
    s.push('\n');
    for (r, ee, ea) in report.table(method) {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{:.3}",
            r.h,
            r.m,
            num(r.err_energy),
            num(r.err_l2a),
            num(r.err_l2),
            num(ee),
            num(ea),
            r.dim,
            r.wall_time_s
        );
    }
    s
}

pub fn cmd_converge(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let spec = cfg.geometry_spec();
    let fine = fine_problem(cfg, &cfg.geometry)?;
    let (load, reference) = reference_solution(&fine, cfg.source)?;
    let mut opts = StudyOptions::new(cfg.coarse_levels.clone(), cfg.layers.clone(), cfg.interpolant);
    opts.nodes = cfg.interpolant_nodes;
    opts.strategy = cfg.strategy;
    opts.resolution_constant = cfg.resolution_constant;
    opts.timing = cfg.timing;
    opts.cache_dir = cfg.cache_dir.clone();
    let report = convergence_study(&fine, &load.values, &reference, spec.name(), &opts)?;

    fs::create_dir_all(&cfg.output_dir)?;
    let mut out = Vec::new();
    for method in Method::ALL {
        write_file(
            &cfg.output_dir,
            &format!("converge_{}.csv", method.name()),
            &convergence_csv(&report, method),
            &mut out,
        )?;
    }
    let meta = format!(
        "geometry = {}\nepsilon_exponent = {}\nk = {}\nfine_level = {}\ninterpolant = {}\nsource = {}, {}\n",
        report.geometry,
        cfg.epsilon_exponent,
        report.wave_number,
        report.fine_level,
        report.interpolant.name(),
        cfg.source[0],
        cfg.source[1]
    );
    write_file(&cfg.output_dir, "converge_meta.txt", &meta, &mut out)?;
    Ok(out)
}

/// Fields of one `(H, m)` solve on the fine mesh.
#[derive(Clone, Debug)]
pub struct SolveFields {
    pub fine: FineProblem,
    pub u_lod: Vec<C64>,
    pub u_coarse: Vec<C64>,
    pub u_ref: Vec<C64>,
}

impl SolveFields {
    pub fn relative_error(&self, kind: NormKind) -> Result<f64> {
        relative_error(&self.fine.ops, &self.u_lod, &self.u_ref, kind)
    }
}

fn single<T: Copy + std::fmt::Debug>(values: &[T], key: &str) -> Result<T> {
    match values {
        [v] => Ok(*v),
        _ => Err(LodError::config(format!("this command needs exactly one {key} value, got {values:?}"))),
    }
}

/// Reference and LOD solution for a geometry at the single configured `(H, m)`.
pub fn solve_fields(cfg: &ExperimentConfig, geometry: &GeometryKind) -> Result<SolveFields> {
    let level = single(&cfg.coarse_levels, "coarse_levels")?;
    let m = single(&cfg.layers, "m")?;
    let fine = fine_problem(cfg, geometry)?;
    let (load, u_ref) = reference_solution(&fine, cfg.source)?;
    let coarse = CoarseSpace::with_nodes(&fine, level, cfg.interpolant, cfg.interpolant_nodes)?;
    let copts = CorrectorOptions {
        layers: m,
        strategy: cfg.strategy,
        resolution_constant: cfg.resolution_constant,
    };
    let q = match &cfg.cache_dir {
        Some(dir) => cached_corrector(dir, &fine, &coarse, m, || compute_corrector(&fine, &coarse, &copts))?,
        None => compute_corrector(&fine, &coarse, &copts)?,
    };
    let sol = solve_lod(&assemble_lod(&q.matrix, &fine.helmholtz, &load.values, coarse.prolongation())?)?;
    let u_coarse = mul_real_complex(coarse.prolongation(), &sol.coarse);
    Ok(SolveFields {
        fine,
        u_lod: sol.fine,
        u_coarse,
        u_ref,
    })
}

fn node_csv(fine: &FineProblem, u: &[C64]) -> String {
    let mut s = String::from("x,y,re,im\n");
    for (p, v) in fine.mesh.nodes().iter().zip(u) {
        let _ = writeln!(s, "{},{},{},{}", p[0], p[1], num(v.re), num(v.im));
    }
    s
}

fn coefficient_csv(fine: &FineProblem) -> String {
    let mut s = String::from("element,x,y,a\n");
    for e in 0..fine.mesh.num_elements() {
        let c = fine.mesh.barycenter(e);
        let _ = writeln!(s, "{e},{},{},{}", num(c[0]), num(c[1]), num(fine.element_a[e]));
    }
    s
}

/// Legacy ASCII VTK unstructured grid with complex point fields split into
/// real and imaginary parts, plus the coefficient as cell data.
pub fn vtk_text(fine: &FineProblem, fields: &[(&str, &[C64])]) -> String {
    let mesh = &fine.mesh;
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nlodhelm fields\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.num_nodes());
    for p in mesh.nodes() {
        let _ = writeln!(s, "{} {} 0", p[0], p[1]);
    }
    let ne = mesh.num_elements();
    let _ = writeln!(s, "CELLS {ne} {}", 4 * ne);
    for t in mesh.elements() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    for _ in 0..ne {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "POINT_DATA {}", mesh.num_nodes());
    for (name, u) in fields {
        for (part, f) in [("re", (|v: &C64| v.re) as fn(&C64) -> f64), ("im", |v: &C64| v.im)] {
            let _ = writeln!(s, "SCALARS {name}_{part} double 1\nLOOKUP_TABLE default");
            for v in u.iter() {
                s.push_str(&num(f(v)));
                s.push('\n');
            }
        }
    }
    let _ = writeln!(s, "CELL_DATA {ne}\nSCALARS coefficient double 1\nLOOKUP_TABLE default");
    for a in &fine.element_a {
        s.push_str(&num(*a));
        s.push('\n');
    }
    s
}

pub fn cmd_solve(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let periodic_twin = match cfg.geometry {
        GeometryKind::SlabPointDefect { .. } | GeometryKind::SlabLineDefect { .. } => Some(GeometryKind::SlabPeriodic),
        _ => None,
    };
    if cfg.diff_periodic && periodic_twin.is_none() {
        return Err(LodError::config(
            "diff_periodic needs geometry = slab_point_defect or slab_line_defect",
        ));
    }
    let f = solve_fields(cfg, &cfg.geometry)?;
    log::info!(
        "relative LOD error: energy {:.3e}, l2_A {:.3e}",
        f.relative_error(NormKind::Energy)?,
        f.relative_error(NormKind::L2A)?
    );
    let diff = if cfg.diff_periodic {
        let p = solve_fields(cfg, periodic_twin.as_ref().unwrap())?;
        let d: Vec<C64> = f.u_lod.iter().zip(&p.u_lod).map(|(a, b)| a - b).collect();
        Some((p.u_lod, d))
    } else {
        None
    };
    for (name, u) in [("u_lod", &f.u_lod), ("u_coarse", &f.u_coarse), ("u_ref", &f.u_ref)] {
        if u.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(LodError::numerical(format!("{name} contains non-finite values")));
        }
    }

    fs::create_dir_all(&cfg.output_dir)?;
    let mut out = Vec::new();
    let dir = &cfg.output_dir;
    write_file(dir, "u_lod.csv", &node_csv(&f.fine, &f.u_lod), &mut out)?;
    write_file(dir, "u_coarse.csv", &node_csv(&f.fine, &f.u_coarse), &mut out)?;
    write_file(dir, "u_ref.csv", &node_csv(&f.fine, &f.u_ref), &mut out)?;
    write_file(dir, "coefficient.csv", &coefficient_csv(&f.fine), &mut out)?;
    let mut fields: Vec<(&str, &[C64])> = vec![("u_lod", &f.u_lod), ("u_coarse", &f.u_coarse), ("u_ref", &f.u_ref)];
    if let Some((periodic, d)) = &diff {
        write_file(dir, "u_lod_periodic.csv", &node_csv(&f.fine, periodic), &mut out)?;
        write_file(dir, "u_lod_diff.csv", &node_csv(&f.fine, d), &mut out)?;
        fields.push(("u_lod_periodic", periodic));
        fields.push(("u_lod_diff", d));
    }
    write_file(dir, "fields.vtk", &vtk_text(&f.fine, &fields), &mut out)?;
    Ok(out)
}

pub const DECAY_HEADER: &str = "element,m,tail_energy,localization_error,fitted_beta";

pub fn decay_csv(profile: &DecayProfile) -> String {
    let mut s = String::new();
    s.push_str(DECAY_HEADER);
    s.push('\n');
    for i in 0..profile.layers.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            profile.element,
            profile.layers[i],
            num(profile.tail_energies[i]),
            num(profile.localization_errors[i]),
            num(profile.fitted_beta)
        );
    }
    s
}

/// Decay profile for the configured (single) coarse level.
pub fn decay_profile(cfg: &ExperimentConfig) -> Result<DecayProfile> {
    let level = single(&cfg.coarse_levels, "coarse_levels")?;
    if cfg.m_max == 0 {
        return Err(LodError::config("m_max must be at least 1"));
    }
    let fine = fine_problem(cfg, &cfg.geometry)?;
    let coarse = CoarseSpace::with_nodes(&fine, level, cfg.interpolant, cfg.interpolant_nodes)?;
    let element = match cfg.element {
        Some(e) if e >= coarse.mesh.num_elements() => {
            return Err(LodError::config(format!(
                "element {e} does not exist on coarse level {level} ({} elements)",
                coarse.mesh.num_elements()
            )))
        }
        Some(e) => e,
        None => central_element(&coarse.mesh),
    };
    corrector_decay_profile(&fine, &coarse, element, cfg.m_max, cfg.strategy)
}

pub fn cmd_decay(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let profile = decay_profile(cfg)?;
    fs::create_dir_all(&cfg.output_dir)?;
    let mut out = Vec::new();
    write_file(&cfg.output_dir, "decay.csv", &decay_csv(&profile), &mut out)?;
    Ok(out)
}
