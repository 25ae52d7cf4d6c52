//! Experiment configuration: flat `key = value` text with `#` comments.
//!
//! ```text
//! geometry = mie_square
//! epsilon_exponent = 3
//! k = 9
//! source = 0.125, 0.5
//! coarse_levels = 2, 3, 4, 5
//! fine_level = 7
//! m = 1, 2, 3
//! interpolant = weighted
//! output_dir = out/mie
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::coefficient::{build_coefficient, Coefficient, GeometryKind, GeometrySpec};
use crate::correctors::SaddleStrategy;
use crate::error::{LodError, Result};
use crate::interpolation::{InterpolantKind, InterpolationNodes};
use crate::mesh::{Point, MAX_LEVEL, MIN_LEVEL};

/// Environment variable overriding the configured worker count.
pub const WORKERS_ENV: &str = "LODHELM_WORKERS";

const KEYS: &[&str] = &[
    "geometry",
    "epsilon_exponent",
    "cells_file",
    "defect_index",
    "channel_half_width",
    "k",
    "source",
    "coarse_levels",
    "fine_level",
    "m",
    "interpolant",
    "interpolant_nodes",
    "solver",
    "output_dir",
    "workers",
    "element",
    "m_max",
    "timing",
    "cache_dir",
    "diff_periodic",
    "resolution_constant",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub geometry: GeometryKind,
    pub epsilon_exponent: u32,
    pub wave_number: f64,
    pub source: Point,
    pub coarse_levels: Vec<u32>,
    pub fine_level: u32,
    pub layers: Vec<usize>,
    pub interpolant: InterpolantKind,
    pub interpolant_nodes: InterpolationNodes,
    pub strategy: SaddleStrategy,
    pub output_dir: PathBuf,
    /// `0` uses every available core.
    pub workers: usize,
    /// Coarse element for the decay study; `None` picks a central one.
    pub element: Option<usize>,
    pub m_max: usize,
    pub timing: bool,
    pub cache_dir: Option<PathBuf>,
    pub diff_periodic: bool,
    pub resolution_constant: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryKind::MieSquare,
            epsilon_exponent: 3,
            wave_number: 9.0,
            source: [0.125, 0.5],
            coarse_levels: vec![2, 3, 4, 5],
            fine_level: 7,
            layers: vec![1, 2, 3],
            interpolant: InterpolantKind::Weighted,
            interpolant_nodes: InterpolationNodes::All,
            strategy: SaddleStrategy::BlockElimination,
            output_dir: PathBuf::from("out"),
            workers: 0,
            element: None,
            m_max: 3,
            timing: false,
            cache_dir: None,
            diff_periodic: false,
            resolution_constant: 1.0,
        }
    }
}

fn bad(key: &str, value: &str, what: &str) -> LodError {
    LodError::config(format!("{key} = {value:?}: {what}"))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| bad(key, value, "not a valid number"))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, value, "expected true or false")),
    }
}

fn parse_pair<T: std::str::FromStr + Copy>(key: &str, value: &str) -> Result<(T, T)> {
    let v: Vec<T> = parse_list(key, value)?;
    match v.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(bad(key, value, "expected two comma-separated values")),
    }
}

/// Splits the text into key/value pairs, rejecting unknown and repeated keys.
fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| LodError::config(format!("line {}: expected key = value", n + 1)))?;
        let k = k.trim().to_string();
        if !KEYS.contains(&k.as_str()) {
            return Err(LodError::config(format!("line {}: unknown key {k:?}", n + 1)));
        }
        if map.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(LodError::config(format!("line {}: key {k:?} given twice", n + 1)));
        }
    }
    Ok(map)
}

impl ExperimentConfig {
    /// Parses and validates a configuration; relative paths (`cells_file`,
    /// `output_dir`, `cache_dir`) are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let map = parse_pairs(text)?;
        let get = |k: &str| map.get(k).map(String::as_str);
        let mut cfg = ExperimentConfig::default();
        cfg.output_dir = base_dir.join(&cfg.output_dir);

        if let Some(v) = get("epsilon_exponent") {
            cfg.epsilon_exponent = parse_num("epsilon_exponent", v)?;
        }
        if let Some(v) = get("k") {
            cfg.wave_number = parse_num("k", v)?;
        }
        if let Some(v) = get("source") {
            let (x, y) = parse_pair::<f64>("source", v)?;
            cfg.source = [x, y];
        }
        if let Some(v) = get("coarse_levels") {
            cfg.coarse_levels = parse_list("coarse_levels", v)?;
        }
        if let Some(v) = get("fine_level") {
            cfg.fine_level = parse_num("fine_level", v)?;
        }
        if let Some(v) = get("m") {
            cfg.layers = parse_list("m", v)?;
        }
        if let Some(v) = get("interpolant") {
            cfg.interpolant = match v {
                "weighted" => InterpolantKind::Weighted,
                "unweighted" => InterpolantKind::Unweighted,
                _ => return Err(bad("interpolant", v, "expected weighted or unweighted")),
            };
        }
        if let Some(v) = get("interpolant_nodes") {
            cfg.interpolant_nodes = match v {
                "all" => InterpolationNodes::All,
                "interior" => InterpolationNodes::Interior,
                _ => return Err(bad("interpolant_nodes", v, "expected all or interior")),
            };
        }
        if let Some(v) = get("solver") {
            cfg.strategy = match v {
                "block" => SaddleStrategy::BlockElimination,
                "monolithic" => SaddleStrategy::Monolithic,
                _ => return Err(bad("solver", v, "expected block or monolithic")),
            };
        }
        if let Some(v) = get("output_dir") {
            cfg.output_dir = base_dir.join(v);
        }
        if let Some(v) = get("workers") {
            cfg.workers = parse_num("workers", v)?;
        }
        if let Some(v) = get("element") {
            cfg.element = match v {
                "center" | "centre" => None,
                _ => Some(parse_num("element", v)?),
            };
        }
        if let Some(v) = get("m_max") {
            cfg.m_max = parse_num("m_max", v)?;
        }
        if let Some(v) = get("timing") {
            cfg.timing = parse_bool("timing", v)?;
        }
        if let Some(v) = get("cache_dir") {
            cfg.cache_dir = Some(base_dir.join(v));
        }
        if let Some(v) = get("diff_periodic") {
            cfg.diff_periodic = parse_bool("diff_periodic", v)?;
        }
        if let Some(v) = get("resolution_constant") {
            cfg.resolution_constant = parse_num("resolution_constant", v)?;
        }

        let geometry = get("geometry").unwrap_or("mie_square");
        let only_for = |key: &str, name: &str| -> Result<()> {
            if get(key).is_some() && geometry != name {
                return Err(LodError::config(format!("{key} only applies to geometry = {name}")));
            }
            Ok(())
        };
        only_for("defect_index", "slab_point_defect")?;
        only_for("channel_half_width", "slab_line_defect")?;
        only_for("cells_file", "custom")?;
        cfg.geometry = match geometry {
            "mie_square" => GeometryKind::MieSquare,
            "slab_periodic" => GeometryKind::SlabPeriodic,
            "constant_one" => GeometryKind::ConstantOne,
            "slab_point_defect" => GeometryKind::SlabPointDefect {
                inclusion: get("defect_index")
                    .map(|v| parse_pair::<usize>("defect_index", v))
                    .transpose()?,
            },
            "slab_line_defect" => GeometryKind::SlabLineDefect {
                half_width: get("channel_half_width")
                    .map(|v| parse_num("channel_half_width", v))
                    .transpose()?
                    .unwrap_or(0.5),
            },
            "custom" => {
                let file = get("cells_file")
                    .ok_or_else(|| LodError::config("geometry = custom requires cells_file"))?;
                let path = base_dir.join(file);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| LodError::config(format!("cannot read cells_file {}: {e}", path.display())))?;
                let c = Coefficient::from_text(&text)?;
                if get("epsilon_exponent").is_some() && c.epsilon_exponent() != cfg.epsilon_exponent {
                    return Err(LodError::config("epsilon_exponent disagrees with the cells_file header"));
                }
                cfg.epsilon_exponent = c.epsilon_exponent();
                GeometryKind::CustomCells {
                    rows: c.rows(),
                    cols: c.cols(),
                    cells: (0..c.rows())
                        .flat_map(|r| (0..c.cols()).map(move |col| (r, col)))
                        .map(|(r, col)| c.is_inclusion(r, col))
                        .collect(),
                }
            }
            other => {
                return Err(bad(
                    "geometry",
                    other,
                    "expected mie_square, slab_periodic, slab_point_defect, slab_line_defect, constant_one or custom",
                ))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LodError::config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    pub fn geometry_spec(&self) -> GeometrySpec {
        GeometrySpec::new(self.geometry.clone(), self.epsilon_exponent)
    }

    /// Checks every field, including that the fine mesh resolves the coefficient.
    pub fn validate(&self) -> Result<()> {
        let coefficient = build_coefficient(&self.geometry_spec())?;
        if !(self.wave_number.is_finite() && self.wave_number > 0.0) {
            return Err(LodError::config(format!("k = {} must be positive", self.wave_number)));
        }
        if !self.source.iter().all(|c| (0.0..=1.0).contains(c)) {
            return Err(LodError::config(format!("source {:?} outside the unit square", self.source)));
        }
        if !(MIN_LEVEL..=MAX_LEVEL).contains(&self.fine_level) {
            return Err(LodError::config(format!(
                "fine_level {} outside [{MIN_LEVEL}, {MAX_LEVEL}]",
                self.fine_level
            )));
        }
        let need = coefficient.min_resolving_level();
        if self.fine_level < need {
            return Err(LodError::config(format!(
                "fine_level {} does not resolve the coefficient; level >= {need} required",
                self.fine_level
            )));
        }
        if self.coarse_levels.is_empty() {
            return Err(LodError::config("coarse_levels is empty"));
        }
        for &l in &self.coarse_levels {
            if l < MIN_LEVEL || l >= self.fine_level {
                return Err(LodError::config(format!(
                    "coarse level {l} must lie in [{MIN_LEVEL}, fine_level)"
                )));
            }
        }
        let mut sorted = self.coarse_levels.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.coarse_levels.len() {
            return Err(LodError::config("coarse_levels contains duplicates"));
        }
        if self.layers.is_empty() {
            return Err(LodError::config("m is empty; give at least one layer count"));
        }
        if self.resolution_constant.is_nan() || self.resolution_constant <= 0.0 {
            return Err(LodError::config("resolution_constant must be positive"));
        }
        Ok(())
    }

    /// Worker count after the environment override; `0` means all cores.
    pub fn effective_workers(&self) -> Result<usize> {
        match std::env::var(WORKERS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| LodError::config(format!("{WORKERS_ENV} = {v:?} is not a worker count"))),
            Err(_) => Ok(self.workers),
        }
    }
}
