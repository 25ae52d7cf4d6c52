//! Python bindings. The module is importable as `lodhelm`.

use std::path::PathBuf;
use std::sync::Arc;

use lodhelm_core::analysis::{self, StudyOptions};
use lodhelm_core::config::ExperimentConfig;
use lodhelm_core::correctors::{self, central_element, corrector_decay_profile};
use lodhelm_core::experiments::{self, reference_solution};
use lodhelm_core::{
    build_coefficient, CoarseSpace, CorrectorOptions, GeometryKind, GeometrySpec, GlobalCorrector, InterpolantKind,
    LodError, Method, NormKind, SaddleStrategy, C64,
};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIOError, PyIndexError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(lodhelm, ConfigError, PyException);
create_exception!(lodhelm, NumericalError, PyException);

fn to_py(e: LodError) -> PyErr {
    match e {
        LodError::Config(m) => ConfigError::new_err(m),
        LodError::Numerical(m) => NumericalError::new_err(m),
        LodError::Index { .. } => PyIndexError::new_err(e.to_string()),
        LodError::Io(_) => PyIOError::new_err(e.to_string()),
    }
}

fn norm_kind(name: &str) -> PyResult<NormKind> {
    match name {
        "energy" => Ok(NormKind::Energy),
        "semi_A" => Ok(NormKind::SemiA),
        "l2_A" => Ok(NormKind::L2A),
        "l2" => Ok(NormKind::L2),
        _ => Err(ConfigError::new_err(format!(
            "unknown norm {name:?}; expected energy, semi_A, l2_A or l2"
        ))),
    }
}

fn interpolant(name: &str) -> PyResult<InterpolantKind> {
    match name {
        "weighted" => Ok(InterpolantKind::Weighted),
        "unweighted" => Ok(InterpolantKind::Unweighted),
        _ => Err(ConfigError::new_err(format!("unknown interpolant {name:?}"))),
    }
}

fn strategy(name: &str) -> PyResult<SaddleStrategy> {
    match name {
        "block" => Ok(SaddleStrategy::BlockElimination),
        "monolithic" => Ok(SaddleStrategy::Monolithic),
        _ => Err(ConfigError::new_err(format!("unknown solver {name:?}"))),
    }
}

fn geometry(name: &str, defect_index: Option<(usize, usize)>, channel_half_width: f64) -> PyResult<GeometryKind> {
    Ok(match name {
        "mie_square" => GeometryKind::MieSquare,
        "slab_periodic" => GeometryKind::SlabPeriodic,
        "slab_point_defect" => GeometryKind::SlabPointDefect { inclusion: defect_index },
        "slab_line_defect" => GeometryKind::SlabLineDefect {
            half_width: channel_half_width,
        },
        "constant_one" => GeometryKind::ConstantOne,
        _ => return Err(ConfigError::new_err(format!("unknown geometry {name:?}"))),
    })
}

/// Fine mesh, coefficient and Helmholtz operators.
#[pyclass(name = "FineProblem", module = "lodhelm", frozen)]
struct PyFineProblem {
    inner: Arc<lodhelm_core::FineProblem>,
    geometry: String,
}

#[pymethods]
impl PyFineProblem {
    #[new]
    #[pyo3(signature = (geometry = "mie_square", epsilon_exponent = 3, fine_level = 7, k = 9.0, defect_index = None, channel_half_width = 0.5))]
    fn new(
        py: Python<'_>,
        geometry: &str,
        epsilon_exponent: u32,
        fine_level: u32,
        k: f64,
        defect_index: Option<(usize, usize)>,
        channel_half_width: f64,
    ) -> PyResult<Self> {
        let kind = self::geometry(geometry, defect_index, channel_half_width)?;
        let inner = py
            .detach(|| {
                let c = build_coefficient(&GeometrySpec::new(kind, epsilon_exponent))?;
                lodhelm_core::FineProblem::new(c, fine_level, k)
            })
            .map_err(to_py)?;
        Ok(Self {
            inner: Arc::new(inner),
            geometry: geometry.to_string(),
        })
    }

    #[getter]
    fn level(&self) -> u32 {
        self.inner.mesh.level()
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.mesh.num_nodes()
    }

    #[getter]
    fn wave_number(&self) -> f64 {
        self.inner.wave_number()
    }

    /// Node coordinates as a list of `(x, y)`.
    fn nodes(&self) -> Vec<(f64, f64)> {
        self.inner.mesh.nodes().iter().map(|p| (p[0], p[1])).collect()
    }

    /// Per-element coefficient values.
    fn coefficient(&self) -> Vec<f64> {
        self.inner.element_a.clone()
    }

    /// `(load, u_h)` for the bump source centred at `source`.
    #[pyo3(signature = (source = (0.125, 0.5)))]
    fn reference_solution(&self, py: Python<'_>, source: (f64, f64)) -> PyResult<(Vec<C64>, Vec<C64>)> {
        let fine = Arc::clone(&self.inner);
        let (load, u) = py
            .detach(|| reference_solution(&fine, [source.0, source.1]))
            .map_err(to_py)?;
        Ok((load.values, u))
    }

    fn norm(&self, v: Vec<C64>, kind: &str) -> PyResult<f64> {
        self.check_len(&v)?;
        analysis::norm(&self.inner.ops, &v, norm_kind(kind)?).map_err(to_py)
    }

    fn relative_error(&self, approx: Vec<C64>, reference: Vec<C64>, kind: &str) -> PyResult<f64> {
        self.check_len(&approx)?;
        self.check_len(&reference)?;
        analysis::relative_error(&self.inner.ops, &approx, &reference, norm_kind(kind)?).map_err(to_py)
    }

    /// Rows of a convergence study as dictionaries.
    #[pyo3(signature = (load, reference, coarse_levels, layers, interpolant = "weighted"))]
    fn convergence_study<'py>(
        &self,
        py: Python<'py>,
        load: Vec<C64>,
        reference: Vec<C64>,
        coarse_levels: Vec<u32>,
        layers: Vec<usize>,
        interpolant: &str,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.check_len(&load)?;
        self.check_len(&reference)?;
        let opts = StudyOptions::new(coarse_levels, layers, self::interpolant(interpolant)?);
        let fine = Arc::clone(&self.inner);
        let geometry = self.geometry.clone();
        let report = py
            .detach(|| analysis::convergence_study(&fine, &load, &reference, &geometry, &opts))
            .map_err(to_py)?;
        let mut out = Vec::new();
        for method in Method::ALL {
            for (r, eoc_energy, eoc_l2a) in report.table(method) {
                let d = PyDict::new(py);
                d.set_item("method", method.name())?;
                d.set_item("H", r.h)?;
                d.set_item("m", r.m)?;
                d.set_item("err_energy_rel", r.err_energy)?;
                d.set_item("err_l2A_rel", r.err_l2a)?;
                d.set_item("err_l2_rel", r.err_l2)?;
                d.set_item("eoc_energy", eoc_energy)?;
                d.set_item("eoc_l2A", eoc_l2a)?;
                d.set_item("dim_VH", r.dim)?;
                out.push(d);
            }
        }
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!(
            "FineProblem(geometry={:?}, epsilon_exponent={}, fine_level={}, k={})",
            self.geometry,
            self.inner.coefficient.epsilon_exponent(),
            self.level(),
            self.wave_number()
        )
    }
}

impl PyFineProblem {
    fn check_len(&self, v: &[C64]) -> PyResult<()> {
        if v.len() != self.inner.mesh.num_nodes() {
            return Err(ConfigError::new_err(format!(
                "vector has {} entries, the fine mesh has {} nodes",
                v.len(),
                self.inner.mesh.num_nodes()
            )));
        }
        Ok(())
    }
}

/// Coarse mesh with its embedding and quasi-interpolation.
#[pyclass(name = "CoarseSpace", module = "lodhelm", frozen)]
struct PyCoarseSpace {
    fine: Arc<lodhelm_core::FineProblem>,
    inner: Arc<CoarseSpace>,
}

#[pymethods]
impl PyCoarseSpace {
    #[new]
    #[pyo3(signature = (fine, level, interpolant = "weighted"))]
    fn new(py: Python<'_>, fine: &PyFineProblem, level: u32, interpolant: &str) -> PyResult<Self> {
        let kind = self::interpolant(interpolant)?;
        let f = Arc::clone(&fine.inner);
        let inner = py.detach(|| CoarseSpace::new(&f, level, kind)).map_err(to_py)?;
        Ok(Self {
            fine: f,
            inner: Arc::new(inner),
        })
    }

    #[getter]
    fn level(&self) -> u32 {
        self.inner.mesh.level()
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn saturating_layers(&self) -> usize {
        self.inner.saturating_layers()
    }

    /// `I_H v` for a real fine nodal vector.
    fn interpolate(&self, v: Vec<f64>) -> PyResult<Vec<f64>> {
        if v.len() != self.fine.mesh.num_nodes() {
            return Err(ConfigError::new_err("vector does not match the fine mesh"));
        }
        Ok(self.inner.interp.matrix.mul_vec(&v))
    }

    /// `P x` for a real coarse nodal vector.
    fn prolongate(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        if x.len() != self.inner.num_nodes() {
            return Err(ConfigError::new_err("vector does not match the coarse mesh"));
        }
        Ok(self.inner.prolongation().mul_vec(&x))
    }

    /// Global corrector with `m` layers (`None` for the ideal corrector).
    #[pyo3(signature = (m = Some(2), solver = "block"))]
    fn corrector(&self, py: Python<'_>, m: Option<usize>, solver: &str) -> PyResult<PyCorrector> {
        let strategy = self::strategy(solver)?;
        let (fine, coarse) = (Arc::clone(&self.fine), Arc::clone(&self.inner));
        let q = py
            .detach(|| match m {
                Some(m) => lodhelm_core::compute_corrector(
                    &fine,
                    &coarse,
                    &CorrectorOptions::new(m).with_strategy(strategy),
                ),
                None => correctors::ideal_corrector(&fine, &coarse, strategy),
            })
            .map_err(to_py)?;
        Ok(PyCorrector {
            fine: Arc::clone(&self.fine),
            coarse: Arc::clone(&self.inner),
            inner: Arc::new(q),
        })
    }

    /// Corrector decay study for `element` (default: a central element).
    #[pyo3(signature = (m_max = 3, element = None, solver = "block"))]
    fn decay_profile<'py>(
        &self,
        py: Python<'py>,
        m_max: usize,
        element: Option<usize>,
        solver: &str,
    ) -> PyResult<Bound<'py, PyDict>> {
        let strategy = self::strategy(solver)?;
        let (fine, coarse) = (Arc::clone(&self.fine), Arc::clone(&self.inner));
        let element = element.unwrap_or_else(|| central_element(&coarse.mesh));
        let p = py
            .detach(|| corrector_decay_profile(&fine, &coarse, element, m_max, strategy))
            .map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("element", p.element)?;
        d.set_item("layers", p.layers)?;
        d.set_item("tail_energies", p.tail_energies)?;
        d.set_item("localization_errors", p.localization_errors)?;
        d.set_item("ideal_energy", p.ideal_energy)?;
        d.set_item("fitted_beta", p.fitted_beta)?;
        Ok(d)
    }
}

/// Global corrector `Q_m` (fine nodes x coarse nodes).
#[pyclass(name = "Corrector", module = "lodhelm", frozen)]
struct PyCorrector {
    fine: Arc<lodhelm_core::FineProblem>,
    coarse: Arc<CoarseSpace>,
    inner: Arc<GlobalCorrector>,
}

#[pymethods]
impl PyCorrector {
    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.matrix.nrows(), self.inner.matrix.ncols())
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.matrix.nnz()
    }

    /// Largest relative residual of the patch solves.
    fn max_residual(&self) -> f64 {
        self.inner.max_residual()
    }

    /// Coarse elements whose patch problem was found non-coercive.
    fn non_coercive_elements(&self) -> Vec<usize> {
        self.inner.non_coercive_elements()
    }

    /// `max |I_H Q|`, zero up to solver tolerance.
    fn kernel_defect(&self) -> f64 {
        self.coarse.interp.matrix.to_complex().matmul(&self.inner.matrix).max_abs()
    }

    /// Solves the LOD system for `load`; returns `(u_H, u_LOD)`.
    fn solve(&self, py: Python<'_>, load: Vec<C64>) -> PyResult<(Vec<C64>, Vec<C64>)> {
        if load.len() != self.fine.mesh.num_nodes() {
            return Err(ConfigError::new_err("load does not match the fine mesh"));
        }
        let (fine, coarse, q) = (Arc::clone(&self.fine), Arc::clone(&self.coarse), Arc::clone(&self.inner));
        let s = py
            .detach(|| {
                let sys = lodhelm_core::assemble_lod(&q.matrix, &fine.helmholtz, &load, coarse.prolongation())?;
                lodhelm_core::solve_lod(&sys)
            })
            .map_err(to_py)?;
        Ok((s.coarse, s.fine))
    }
}

/// Runs `converge`, `solve` or `decay` from a config file; returns the
/// written paths.
#[pyfunction]
fn run(py: Python<'_>, command: &str, config: PathBuf) -> PyResult<Vec<PathBuf>> {
    let cmd = match command {
        "converge" => experiments::Command::Converge,
        "solve" => experiments::Command::Solve,
        "decay" => experiments::Command::Decay,
        _ => return Err(ConfigError::new_err(format!("unknown command {command:?}"))),
    };
    py.detach(|| ExperimentConfig::from_file(&config).and_then(|c| experiments::run(cmd, &c)))
        .map_err(to_py)
}

#[pymodule(name = "lodhelm")]
fn lodhelm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFineProblem>()?;
    m.add_class::<PyCoarseSpace>()?;
    m.add_class::<PyCorrector>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    Ok(())
}
