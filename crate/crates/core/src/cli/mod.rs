//! Batch driver: `key = value` run configurations, uniform refinement
//! studies and adaptive runs, with CSV, VTK and JSON manifest output.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::adapt::{adaptive_loop, history_export, AdaptConfig};
use crate::avs::{l2_errors, solve_system, Discretization, Formulation};
use crate::bench::{by_name, Benchmark, ExactQoI, BENCHMARK_NAMES};
use crate::goal::{estimate_with_primal, Approach};
use crate::io::{fmt_opt, fmt_sci, Csv};
use crate::mesh::{ElementType, Mesh, Rect};
use crate::spaces::FluxFamily;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    UniformStudy,
    Adaptive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EstimatorChoice {
    Classical,
    Alternative,
    Both,
}

impl EstimatorChoice {
    pub fn approaches(self) -> Vec<Approach> {
        match self {
            EstimatorChoice::Classical => vec![Approach::Classical],
            EstimatorChoice::Alternative => vec![Approach::Alternative],
            EstimatorChoice::Both => vec![Approach::Classical, Approach::Alternative],
        }
    }
}

/// A validated run configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub benchmark: String,
    pub mode: Mode,
    pub element_type: ElementType,
    pub flux: FluxFamily,
    pub p_primal: usize,
    pub p_dual: usize,
    pub dp: usize,
    pub qoi: String,
    pub estimator: EstimatorChoice,
    /// Subdivisions per side of the first mesh.
    pub n0: usize,
    /// Uniform study: number of meshes.
    pub levels: usize,
    pub delta: f64,
    pub max_steps: usize,
    pub max_warmup: usize,
    pub output: PathBuf,
}

const KEYS: [&str; 15] = [
    "benchmark",
    "mode",
    "element_type",
    "flux",
    "p_primal",
    "p_dual",
    "dp",
    "qoi",
    "estimator",
    "n0",
    "levels",
    "delta",
    "max_steps",
    "max_warmup",
    "output",
];

fn cfg_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

/// Parses and validates a configuration. Lines are `key = value`; `#`
/// starts a comment. Line 0 in an error means a missing or inconsistent
/// setting rather than a specific line.
pub fn validate_config(text: &str) -> Result<RunConfig> {
    let mut raw: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| cfg_err(ln, format!("expected `key = value`, got `{line}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(cfg_err(ln, format!("unknown key `{k}` (valid: {})", KEYS.join(", "))));
        }
        if v.is_empty() {
            return Err(cfg_err(ln, format!("empty value for `{k}`")));
        }
        if raw.insert(k, (ln, v)).is_some() {
            return Err(cfg_err(ln, format!("duplicate key `{k}`")));
        }
    }
    let (bl, bname) = *raw.get("benchmark").ok_or_else(|| cfg_err(0, "missing required key `benchmark`"))?;
    let bench = by_name(bname).map_err(|e| cfg_err(bl, e.to_string()))?;
    let mode = match raw.get("mode") {
        None => return Err(cfg_err(0, "missing required key `mode`")),
        Some(&(l, v)) => match v.to_ascii_lowercase().as_str() {
            "uniform" | "uniform_study" => Mode::UniformStudy,
            "adaptive" => Mode::Adaptive,
            _ => return Err(cfg_err(l, format!("mode must be `uniform` or `adaptive`, got `{v}`"))),
        },
    };
    let d = bench.defaults;
    let adaptive_defaults = AdaptConfig::default();
    let num = |key: &str, default: usize, lo: usize, hi: usize| -> Result<usize> {
        match raw.get(key) {
            None => Ok(default),
            Some(&(l, v)) => {
                let x: usize = v.parse().map_err(|_| cfg_err(l, format!("`{key}` must be a non-negative integer")))?;
                if x < lo || x > hi {
                    return Err(cfg_err(l, format!("`{key}` = {x} is out of range {lo}..={hi}")));
                }
                Ok(x)
            }
        }
    };
    let element_type = match raw.get("element_type") {
        None if mode == Mode::Adaptive => ElementType::Triangle,
        None => d.element_type,
        Some(&(l, v)) => match v.to_ascii_lowercase().as_str() {
            "quad" | "quadrilateral" => ElementType::Quadrilateral,
            "tri" | "triangle" => ElementType::Triangle,
            _ => return Err(cfg_err(l, format!("element_type must be `quad` or `tri`, got `{v}`"))),
        },
    };
    let flux = match raw.get("flux") {
        None => d.family,
        Some(&(l, v)) => match v.to_ascii_lowercase().as_str() {
            "c0" | "lagrange" => FluxFamily::Lagrange,
            "rt" | "raviart-thomas" => FluxFamily::RaviartThomas,
            _ => return Err(cfg_err(l, format!("flux must be `c0` or `rt`, got `{v}`"))),
        },
    };
    let estimator = match raw.get("estimator") {
        None => EstimatorChoice::Alternative,
        Some(&(l, v)) => match v.to_ascii_lowercase().as_str() {
            "classical" => EstimatorChoice::Classical,
            "alternative" => EstimatorChoice::Alternative,
            "both" => EstimatorChoice::Both,
            _ => return Err(cfg_err(l, format!("estimator must be classical, alternative or both, got `{v}`"))),
        },
    };
    let qoi = match raw.get("qoi") {
        None => bench.qois[0].0.clone(),
        Some(&(l, v)) => {
            bench.qoi(v).map_err(|e| cfg_err(l, e.to_string()))?;
            v.to_string()
        }
    };
    let delta = match raw.get("delta") {
        None => adaptive_defaults.delta,
        Some(&(l, v)) => {
            let x: f64 = v.parse().map_err(|_| cfg_err(l, "`delta` must be a number"))?;
            if !(x > 0.0 && x < 1.0) {
                return Err(cfg_err(l, format!("`delta` = {x} must lie strictly between 0 and 1")));
            }
            x
        }
    };
    let p_primal = num("p_primal", d.p_primal, 1, 3)?;
    let p_dual = num("p_dual", d.p_dual.max(p_primal + 1), 1, 4)?;
    if p_dual <= p_primal {
        let l = raw.get("p_dual").map_or(0, |x| x.0);
        return Err(cfg_err(
            l,
            format!(
                "p_dual ({p_dual}) must exceed p_primal ({p_primal}): at equal degree Galerkin orthogonality makes the estimate vanish"
            ),
        ));
    }
    let default_n0 = if mode == Mode::Adaptive { 1 } else { d.n0 };
    let cfg = RunConfig {
        benchmark: bench.name.clone(),
        mode,
        element_type,
        flux,
        p_primal,
        p_dual,
        dp: num("dp", 0, 0, 2)?,
        qoi,
        estimator,
        n0: num("n0", default_n0, 1, 1024)?,
        levels: num("levels", d.levels, 1, 12)?,
        delta,
        max_steps: num("max_steps", adaptive_defaults.max_steps, 1, 200)?,
        max_warmup: num("max_warmup", adaptive_defaults.max_warmup, 0, 12)?,
        output: raw.get("output").map_or_else(|| PathBuf::from("out"), |x| PathBuf::from(x.1)),
    };
    if cfg.flux == FluxFamily::RaviartThomas && cfg.element_type != ElementType::Triangle {
        return Err(cfg_err(raw.get("flux").map_or(0, |x| x.0), "Raviart-Thomas fluxes need element_type = tri"));
    }
    if cfg.flux == FluxFamily::RaviartThomas && cfg.estimator != EstimatorChoice::Alternative {
        return Err(cfg_err(
            raw.get("estimator").map_or(0, |x| x.0),
            "the classical estimator supports C0 fluxes only",
        ));
    }
    if cfg.mode == Mode::Adaptive && cfg.element_type != ElementType::Triangle {
        return Err(cfg_err(raw.get("element_type").map_or(0, |x| x.0), "adaptive runs need element_type = tri"));
    }
    if bench.skew.is_some() && cfg.element_type != ElementType::Quadrilateral {
        return Err(cfg_err(raw.get("element_type").map_or(0, |x| x.0), "skewed benchmarks use quad meshes"));
    }
    Ok(cfg)
}

/// Files written by one run.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub run_id: String,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    run_id: &'a str,
    version: &'a str,
    config: &'a RunConfig,
    exact_qoi: ExactQoI,
    files: Vec<String>,
}

/// Stable identifier of a configuration.
pub fn run_id(cfg: &RunConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn approach_name(a: Approach) -> &'static str {
    match a {
        Approach::Classical => "classical",
        Approach::Alternative => "alternative",
    }
}

/// Header of the uniform-study tables.
pub const UNIFORM_HEADER: [&str; 6] = ["primal_dofs", "qoi_error", "dual_dofs", "eta_est", "eff", "l2_flux_error"];

fn initial_mesh(bench: &Benchmark, cfg: &RunConfig, n: usize) -> Result<Mesh> {
    if bench.skew.is_some() {
        bench.mesh(cfg.element_type, n)
    } else {
        Mesh::build_structured(cfg.element_type, n, Rect::UNIT)
    }
}

/// Uniform refinement study; one table per estimator.
pub fn uniform_study(cfg: &RunConfig) -> Result<Vec<(Approach, Csv)>> {
    let bench = by_name(&cfg.benchmark)?;
    let problem = bench.problem()?;
    let qoi = bench.qoi(&cfg.qoi)?.clone();
    let exact = bench.exact_qoi(&qoi)?.value;
    let approaches = cfg.estimator.approaches();
    let mut tables: Vec<(Approach, Csv)> = approaches.iter().map(|&a| (a, Csv::new(&UNIFORM_HEADER))).collect();
    let disc = Discretization { family: cfg.flux, degree: cfg.p_primal, enrichment: cfg.dp };
    let mut mesh = initial_mesh(&bench, cfg, cfg.n0)?;
    for level in 0..cfg.levels {
        if level > 0 {
            mesh = mesh.uniform_refine();
        }
        let form = Formulation::new(&mesh, &problem, disc)?;
        let primal = solve_system(&form)?;
        let flux_err = l2_errors(&mesh, &problem, &primal)?.1;
        for (a, table) in tables.iter_mut() {
            let est = estimate_with_primal(
                &problem,
                &mesh,
                &qoi,
                primal.clone(),
                disc.with_degree(cfg.p_dual),
                *a,
                Some(exact),
            )?;
            let r = &est.report;
            log::info!(
                "level {level} ({}): {} dofs, error {}, estimate {}, eff {}",
                approach_name(*a),
                r.primal_dofs,
                fmt_opt(r.qoi_error),
                fmt_sci(r.estimate),
                fmt_opt(r.eff)
            );
            table.push(vec![
                r.primal_dofs.to_string(),
                fmt_opt(r.qoi_error),
                r.dual_dofs.to_string(),
                fmt_sci(r.estimate),
                fmt_opt(r.eff),
                fmt_sci(flux_err),
            ]);
        }
    }
    Ok(tables)
}

/// Executes a configuration, writing all artifacts under `out`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<RunSummary> {
    let bench = by_name(&cfg.benchmark)?;
    let qoi = bench.qoi(&cfg.qoi)?.clone();
    let exact = bench.exact_qoi(&qoi)?;
    fs::create_dir_all(out)?;
    let id = run_id(cfg);
    let mut files = Vec::new();
    match cfg.mode {
        Mode::UniformStudy => {
            for (a, table) in uniform_study(cfg)? {
                let path = out.join(format!("uniform_{}.csv", approach_name(a)));
                fs::write(&path, table.to_string())?;
                files.push(path);
            }
        }
        Mode::Adaptive => {
            let mesh0 = initial_mesh(&bench, cfg, cfg.n0)?;
            for a in cfg.estimator.approaches() {
                let acfg = AdaptConfig {
                    delta: cfg.delta,
                    max_steps: cfg.max_steps,
                    max_warmup: cfg.max_warmup,
                    p_primal: cfg.p_primal,
                    p_dual: cfg.p_dual,
                    family: cfg.flux,
                    approach: a,
                };
                let history = adaptive_loop(&bench, &qoi, mesh0.clone(), &acfg)?;
                let dir = out.join(format!("adaptive_{}", approach_name(a)));
                if !history.steps.is_empty() {
                    history_export(&history, &dir)?;
                    files.push(dir.join("history.csv"));
                }
                if let Some(f) = history.failure {
                    return Err(Error::Solver(format!("adaptive run stopped early: {f}")));
                }
            }
        }
    }
    let rel: Vec<String> = files
        .iter()
        .map(|p| p.strip_prefix(out).unwrap_or(p).display().to_string())
        .collect();
    let manifest = Manifest { run_id: &id, version: env!("CARGO_PKG_VERSION"), config: cfg, exact_qoi: exact, files: rel };
    let path = out.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
    files.push(path);
    Ok(RunSummary { run_id: id, files })
}

/// One line per benchmark for `list-benchmarks`.
pub fn benchmark_listing() -> String {
    let mut s = String::new();
    for name in BENCHMARK_NAMES {
        let b = by_name(name).expect("listed benchmark exists");
        let qois: Vec<&str> = b.qois.iter().map(|(n, _)| n.as_str()).collect();
        s.push_str(&format!(
            "{name}: diffusion {}, convection ({}, {}), qois [{}]\n",
            b.diffusion,
            b.convection[0],
            b.convection[1],
            qois.join(", ")
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = validate_config("benchmark = convdiff-pe100\nmode = uniform\n").unwrap();
        assert_eq!(c.p_primal, 2);
        assert_eq!(c.p_dual, 3);
        assert_eq!(c.dp, 0);
        assert_eq!(c.delta, 0.5);
        assert_eq!(c.estimator, EstimatorChoice::Alternative);
        assert_eq!(c.qoi, "avg-u");
        assert_eq!(c.levels, 6);
    }

    #[test]
    fn config_errors_carry_line_numbers() {
        let e = validate_config("benchmark = laplace-bump\nmode = adaptive\n\ndelta = 1.5\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 4, .. }), "{e}");
        let e = validate_config("benchmark = laplace-bump\nmode = uniform\np_primal = 2\np_dual = 2\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 4, .. }));
        assert!(e.to_string().contains("orthogonality"));
        let e = validate_config("benchmark = laplace-bump\ncolour = red\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }));
        let e = validate_config("benchmark = nope\nmode = uniform\n").unwrap_err();
        assert!(e.to_string().contains("convdiff-pe100"));
        assert!(validate_config("mode = uniform\n").is_err());
        assert!(validate_config("benchmark = laplace-bump\nmode = uniform\nflux = rt\n").is_err());
    }

    #[test]
    fn run_id_is_stable() {
        let a = validate_config("benchmark = laplace-bump\nmode = uniform\n").unwrap();
        let b = validate_config("# comment\nmode = uniform\nbenchmark = laplace-bump\n").unwrap();
        assert_eq!(run_id(&a), run_id(&b));
        assert_eq!(run_id(&a).len(), 16);
    }
}
