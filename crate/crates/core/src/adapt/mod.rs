//! Goal-oriented h-adaptivity: marking, warmup refinement and the adaptive
//! loop with its convergence history.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::avs::{l2_errors, solve_system, Discretization, Formulation};
use crate::bench::Benchmark;
use crate::goal::{estimate_with_primal, Approach, EstimateReport, QoIDef};
use crate::io::{fmt_opt, fmt_sci, vertex_values, write_vtk, Csv, VtkFields};
use crate::mesh::Mesh;
use crate::spaces::FluxFamily;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptConfig {
    /// Marking tolerance `δ ∈ (0, 1)`.
    pub delta: f64,
    /// Total number of solve steps, warmup included.
    pub max_steps: usize,
    /// Upper bound on warmup uniform refinements.
    pub max_warmup: usize,
    pub p_primal: usize,
    pub p_dual: usize,
    pub family: FluxFamily,
    pub approach: Approach,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            max_steps: 18,
            max_warmup: 8,
            p_primal: 2,
            p_dual: 3,
            family: FluxFamily::Lagrange,
            approach: Approach::Alternative,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.p_dual <= self.p_primal {
            return Err(Error::InvalidArgument("p_dual must exceed p_primal".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Cells with `|ε_m| > δ max |ε|`; the argmax is always included and
/// all-zero indicators mark everything.
pub fn mark(indicators: &[f64], delta: f64) -> Result<Vec<usize>> {
    if indicators.is_empty() {
        return Err(Error::InvalidArgument("no indicators to mark".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    let (imax, max) = indicators
        .iter()
        .map(|e| e.abs())
        .enumerate()
        .fold((0, 0.0), |best, (i, a)| if a > best.1 { (i, a) } else { best });
    if max == 0.0 {
        log::warn!("all indicators vanish, marking every cell");
        return Ok((0..indicators.len()).collect());
    }
    let mut out: Vec<usize> = indicators
        .iter()
        .enumerate()
        .filter(|(_, e)| e.abs() / max > delta)
        .map(|(i, _)| i)
        .collect();
    if out.is_empty() {
        out.push(imax);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Phase {
    Warmup,
    Adaptive,
}

/// One solve step of the adaptive loop.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub step: usize,
    pub phase: Phase,
    pub report: EstimateReport,
    pub l2_error: Option<f64>,
    pub mesh: Mesh,
    pub primal_vertices: Vec<f64>,
    pub dual_vertices: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct History {
    pub steps: Vec<StepRecord>,
    /// Step after which marking started, if warmup finished.
    pub warmup_end: Option<usize>,
    /// Why the loop stopped early.
    pub failure: Option<String>,
}

impl History {
    pub const CSV_HEADER: [&'static str; 8] =
        ["step", "elements", "primal_dofs", "dual_dofs", "qoi_error", "eta_est", "eff", "l2_error"];

    pub fn final_mesh(&self) -> Option<&Mesh> {
        self.steps.last().map(|s| &s.mesh)
    }

    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(&Self::CSV_HEADER);
        for s in &self.steps {
            let r = &s.report;
            csv.push(vec![
                s.step.to_string(),
                r.elements.to_string(),
                r.primal_dofs.to_string(),
                r.dual_dofs.to_string(),
                fmt_opt(r.qoi_error),
                fmt_sci(r.estimate),
                fmt_opt(r.eff),
                fmt_opt(s.l2_error),
            ]);
        }
        csv
    }
}

/// Warmup by uniform refinement until `|η̂|` first decreases, then
/// solve, estimate, mark and bisect until `max_steps`.
pub fn adaptive_loop(bench: &Benchmark, qoi: &QoIDef, mesh0: Mesh, cfg: &AdaptConfig) -> Result<History> {
    cfg.validate()?;
    let problem = bench.problem()?;
    let exact = bench.exact_qoi(qoi)?.value;
    let mut history = History::default();
    let mut mesh = mesh0;
    let mut phase = Phase::Warmup;
    let mut warmups = 0;
    for step in 0..cfg.max_steps {
        let outcome = (|| -> Result<StepRecord> {
            let disc = Discretization::new(cfg.family, cfg.p_primal);
            let form = Formulation::new(&mesh, &problem, disc)?;
            let primal = solve_system(&form)?;
            let l2 = l2_errors(&mesh, &problem, &primal)?.0;
            let primal_vertices = vertex_values(&primal, &mesh);
            let est =
                estimate_with_primal(&problem, &mesh, qoi, primal, disc.with_degree(cfg.p_dual), cfg.approach, Some(exact))?;
            Ok(StepRecord {
                step,
                phase,
                l2_error: Some(l2),
                mesh: mesh.clone(),
                primal_vertices,
                dual_vertices: vertex_values(&est.dual.field, &mesh),
                report: est.report,
            })
        })();
        let rec = match outcome {
            Ok(r) => r,
            Err(e) => {
                log::error!("step {step} failed: {e}");
                history.failure = Some(e.to_string());
                return Ok(history);
            }
        };
        let eta = rec.report.estimate;
        log::info!(
            "step {step} ({:?}): {} cells, eta = {}, eff = {}",
            phase,
            rec.report.elements,
            fmt_sci(eta),
            fmt_opt(rec.report.eff)
        );
        let prev = history.steps.last().map(|s| s.report.estimate.abs());
        let indicators = rec.report.indicators.clone();
        history.steps.push(rec);
        if eta == 0.0 && indicators.iter().all(|&e| e == 0.0) {
            log::info!("estimate vanishes identically, stopping");
            break;
        }
        if step + 1 == cfg.max_steps {
            break;
        }
        if phase == Phase::Warmup {
            let decreased = prev.is_some_and(|p| eta.abs() < p);
            if decreased || warmups >= cfg.max_warmup {
                if !decreased {
                    log::warn!("warmup stopped after {warmups} refinements without a decrease");
                }
                log::info!("warmup finished after step {step}");
                phase = Phase::Adaptive;
                history.warmup_end = Some(step);
            } else {
                mesh = mesh.uniform_refine();
                warmups += 1;
                continue;
            }
        }
        let marked = mark(&indicators, cfg.delta)?;
        mesh = match mesh.bisect_marked(&marked) {
            Ok(m) => m,
            Err(e) => {
                history.failure = Some(e.to_string());
                return Ok(history);
            }
        };
    }
    Ok(history)
}

/// Writes `history.csv` and one VTK file per step into `dir`.
pub fn history_export(history: &History, dir: &Path) -> Result<()> {
    if history.steps.is_empty() {
        return Err(Error::InvalidArgument("empty history".into()));
    }
    fs::create_dir_all(dir)?;
    fs::write(dir.join("history.csv"), history.to_csv().to_string())?;
    for s in &history.steps {
        let fields = VtkFields {
            point: vec![("u", s.primal_vertices.clone()), ("dual_p", s.dual_vertices.clone())],
            cell: vec![("indicator", s.report.indicators.clone())],
        };
        let mut f = fs::File::create(dir.join(format!("step_{:03}.vtk", s.step)))?;
        write_vtk(&mut f, &s.mesh, &format!("adaptive step {}", s.step), &fields)?;
    }
    Ok(())
}
