//! Goal-oriented error estimation: quantities of interest, dual solves,
//! residual pairing and element indicators.

mod qoi;

pub use qoi::{clip_to_rect, qoi_apply, qoi_cell_rule, qoi_trial_vector, CellRule, QoIDef, QoIKind, Region};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::avs::{
    assemble, solve_spd, solve_system, CellFrame, Discretization, Formulation, Load, ProblemDef, SolutionField,
    TrialEval,
};
use crate::mesh::{BoundaryTag, Mesh};
use crate::spaces::{edge_quadrature, quadrature, FluxFamily, TrialSpace};
use crate::{Error, Result};

/// How the dual problem is posed and discretized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Approach {
    /// Dual solution sought in the span of the optimal test functions of a
    /// higher-degree primal discretization.
    Classical,
    /// Strong-form dual problem solved with its own AVS-FE discretization.
    Alternative,
}

/// An approximate dual solution.
///
/// For [`Approach::Classical`] the coefficients weight the optimal test
/// functions of `field.space`; for [`Approach::Alternative`] `field` is the
/// conforming pair `(p, r)` itself.
#[derive(Clone, Debug)]
pub struct DualField {
    pub approach: Approach,
    pub qoi: QoIDef,
    pub field: SolutionField,
    pub disc: Discretization,
}

impl DualField {
    pub fn num_dofs(&self) -> usize {
        self.field.space.num_dofs()
    }
}

/// Classical dual: solve `K d = Q(e_i)` with the degree-`disc.degree`
/// normal-equation stiffness of the primal problem.
pub fn classical_dual_solve(problem: &ProblemDef, qoi: &QoIDef, mesh: &Mesh, disc: Discretization) -> Result<DualField> {
    if disc.family != FluxFamily::Lagrange {
        return Err(Error::Unsupported("classical estimator with Raviart-Thomas fluxes".into()));
    }
    let form = Formulation::new(mesh, problem, disc)?;
    let rhs = qoi_trial_vector(qoi, mesh, &form.trial)?;
    let mut sys = assemble(&form)?;
    let field = if rhs.iter().all(|&v| v == 0.0) {
        SolutionField::zeros(form.trial.clone())
    } else {
        sys.rhs = rhs;
        let d = solve_spd(&sys)?;
        SolutionField { coeffs: form.trial.expand(&d), space: form.trial.clone() }
    };
    Ok(DualField { approach: Approach::Classical, qoi: qoi.clone(), field, disc })
}

/// Alternative dual: the dual-direction problem loaded by the QoI.
pub fn alternative_dual_solve(
    problem: &ProblemDef,
    qoi: &QoIDef,
    mesh: &Mesh,
    disc: Discretization,
) -> Result<DualField> {
    qoi.check_inside(mesh.domain())?;
    let dual = problem.dual();
    let form = Formulation::new(mesh, &dual, disc)?.with_load(Load::Functional(qoi.clone()));
    let field = solve_system(&form)?;
    Ok(DualField { approach: Approach::Alternative, qoi: qoi.clone(), field, disc })
}

pub fn dual_solve(
    approach: Approach,
    problem: &ProblemDef,
    qoi: &QoIDef,
    mesh: &Mesh,
    disc: Discretization,
) -> Result<DualField> {
    match approach {
        Approach::Classical => classical_dual_solve(problem, qoi, mesh, disc),
        Approach::Alternative => alternative_dual_solve(problem, qoi, mesh, disc),
    }
}

/// Nodal interpolation of a Lagrange field into `target` (same mesh, any
/// degree). Exact when `target` contains the field's space.
pub fn embed(field: &SolutionField, target: &TrialSpace) -> Result<SolutionField> {
    let src = &field.space;
    if src.family() != FluxFamily::Lagrange || target.family() != FluxFamily::Lagrange {
        return Err(Error::Unsupported("embedding of Raviart-Thomas fields".into()));
    }
    if src.num_cells() != target.num_cells() {
        return Err(Error::InvalidArgument("fields live on different meshes".into()));
    }
    let (ns, _) = src.local_counts();
    let (nt, _) = target.local_counts();
    let nodes = target.scalar_basis().nodes();
    let table: Vec<Vec<f64>> = nodes.iter().map(|&xi| src.scalar_basis().eval(xi).0).collect();
    let mut out = SolutionField::zeros(target.clone());
    for c in 0..src.num_cells() {
        let local = field.local(c);
        let dofs = target.cell_dofs(c);
        for (j, phi) in table.iter().enumerate() {
            for comp in 0..3 {
                let v: f64 = (0..ns).map(|i| local[comp * ns + i] * phi[i]).sum();
                out.coeffs[dofs[comp * nt + j]] = v;
            }
        }
    }
    Ok(out)
}

/// Element indicators `ε_m = F|_m(v, w) − B|_m((u^h, q^h); (v, w))` with
/// `(v, w)` the dual pair.
///
/// For `AvgDuDx` the alternative dual `r` is shifted by `D⁻¹ θ e_x`
/// (`θ` the QoI density), which adds `−∫_ω θ (∂u^h/∂x − (D⁻¹q^h)_x)`.
pub fn element_indicators(problem: &ProblemDef, mesh: &Mesh, primal: &SolutionField, dual: &DualField) -> Result<Vec<f64>> {
    if primal.space.num_cells() != mesh.num_cells() || dual.field.space.num_cells() != mesh.num_cells() {
        return Err(Error::InvalidArgument("primal and dual fields must live on the given mesh".into()));
    }
    match dual.approach {
        Approach::Classical => classical_indicators(problem, mesh, primal, dual),
        Approach::Alternative => alternative_indicators(problem, mesh, primal, dual),
    }
}

/// `Σ_m ε_m`
pub fn residual_pairing(problem: &ProblemDef, mesh: &Mesh, primal: &SolutionField, dual: &DualField) -> Result<f64> {
    Ok(element_indicators(problem, mesh, primal, dual)?.iter().sum())
}

fn classical_indicators(problem: &ProblemDef, mesh: &Mesh, primal: &SolutionField, dual: &DualField) -> Result<Vec<f64>> {
    let form = Formulation::new(mesh, problem, dual.disc)?;
    let lifted = embed(primal, &form.trial)?;
    (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let (k, f) = form.element_system(c)?.condensed();
            let u = lifted.local(c);
            let d = dual.field.local(c);
            let ku = k.matvec(&u);
            Ok(d.iter().zip(f.iter().zip(ku)).map(|(d, (f, ku))| d * (f - ku)).sum())
        })
        .collect()
}

fn alternative_indicators(
    problem: &ProblemDef,
    mesh: &Mesh,
    primal: &SolutionField,
    dual: &DualField,
) -> Result<Vec<f64>> {
    let et = mesh.element_type();
    let pmax = primal.space.degree().max(dual.field.space.degree());
    let order = (2 * pmax + 10).min(crate::spaces::quadrature::MAX_ORDER);
    let rule = quadrature(et, order)?;
    let eq = edge_quadrature(order)?;
    (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let fu = CellFrame::new(mesh, c, &primal.space)?;
            let fp = CellFrame::new(mesh, c, &dual.field.space)?;
            let ul = primal.local(c);
            let pl = dual.field.local(c);
            let mut eps = 0.0;
            let pu = fu.points(&rule.points);
            let pp = fp.points(&rule.points);
            let tu = TrialEval::new(&primal.space, &fu, &pu);
            let tp = TrialEval::new(&dual.field.space, &fp, &pp);
            for q in 0..pu.len() {
                let w = rule.weights[q] * pu.det[q];
                let x = pu.x[q];
                let (_, gu, qh, _) = tu.combine(&ul, q);
                let (p, gp, r, _) = tp.combine(&pl, q);
                let dgu = problem.apply_diffusion(gu);
                let b = (problem.convection)(x);
                let bil = (dgu[0] - qh[0]) * r[0]
                    + (dgu[1] - qh[1]) * r[1]
                    + qh[0] * gp[0]
                    + qh[1] * gp[1]
                    + (b[0] * gu[0] + b[1] * gu[1]) * p;
                eps += w * ((problem.source)(x) * p - bil);
            }
            for (k, &e) in mesh.cell_edges(c).iter().enumerate() {
                let interior = !mesh.is_boundary_edge(e);
                let neumann = mesh.boundary_tag(e) == Some(BoundaryTag::Neumann);
                if !interior && !neumann {
                    continue;
                }
                let pu = fu.edge_points(et, k, &eq.points);
                let pp = fp.edge_points(et, k, &eq.points);
                let tu = TrialEval::new(&primal.space, &fu, &pu);
                let tp = TrialEval::new(&dual.field.space, &fp, &pp);
                let n = fu.geometry.normals[k];
                let len = fu.geometry.edge_lengths[k];
                for q in 0..pu.len() {
                    let w = eq.weights[q] * len;
                    let (p, ..) = tp.combine(&pl, q);
                    let flux = if interior {
                        let (_, _, qh, _) = tu.combine(&ul, q);
                        qh[0] * n[0] + qh[1] * n[1]
                    } else {
                        (problem.neumann)(pu.x[q])
                    };
                    eps += w * flux * p;
                }
            }
            if dual.qoi.kind == QoIKind::AvgDuDx {
                if let Some(rule) = qoi_cell_rule(&dual.qoi, mesh, c, order)? {
                    let xi: Vec<_> = rule.points.iter().map(|&x| fu.map.inverse(x)).collect();
                    let pts = fu.points(&xi);
                    let tr = TrialEval::new(&primal.space, &fu, &pts);
                    let d = crate::mesh::geometry::inverse2(&problem.diffusion());
                    for q in 0..pts.len() {
                        let (_, gu, qh, _) = tr.combine(&ul, q);
                        let dq = d[0][0] * qh[0] + d[0][1] * qh[1];
                        eps -= rule.weights[q] * (gu[0] - dq);
                    }
                }
            }
            Ok(eps)
        })
        .collect()
}

/// `η / (Q(u) − Q(u^h))`, absent when the exact error is zero or unknown.
pub fn effectivity(estimate: f64, exact_error: Option<f64>) -> Option<f64> {
    match exact_error {
        Some(e) if e != 0.0 && e.is_finite() => Some(estimate / e),
        _ => None,
    }
}

/// Result of one estimation step.
#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub approach: Approach,
    pub elements: usize,
    pub primal_dofs: usize,
    pub dual_dofs: usize,
    pub qoi_value: f64,
    pub qoi_error: Option<f64>,
    pub estimate: f64,
    pub eff: Option<f64>,
    pub h_max: f64,
    pub p_primal: usize,
    pub p_dual: usize,
    #[serde(skip)]
    pub indicators: Vec<f64>,
}

impl EstimateReport {
    pub const CSV_HEADER: &'static str = "primal_dofs,qoi_error,dual_dofs,eta_est,eff";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.primal_dofs,
            crate::io::fmt_opt(self.qoi_error),
            self.dual_dofs,
            crate::io::fmt_sci(self.estimate),
            crate::io::fmt_opt(self.eff)
        )
    }
}

/// Everything produced by one primal solve plus error estimate.
pub struct Estimation {
    pub report: EstimateReport,
    pub primal: SolutionField,
    pub dual: DualField,
}

/// Solves the primal problem at `primal_disc`, the dual at degree
/// `p_dual`, and pairs them.
pub fn estimate(
    problem: &ProblemDef,
    mesh: &Mesh,
    qoi: &QoIDef,
    primal_disc: Discretization,
    p_dual: usize,
    approach: Approach,
    exact_qoi: Option<f64>,
) -> Result<Estimation> {
    let form = Formulation::new(mesh, problem, primal_disc)?;
    let primal = solve_system(&form)?;
    estimate_with_primal(problem, mesh, qoi, primal, primal_disc.with_degree(p_dual), approach, exact_qoi)
}

/// As [`estimate`] with an already computed primal solution.
pub fn estimate_with_primal(
    problem: &ProblemDef,
    mesh: &Mesh,
    qoi: &QoIDef,
    primal: SolutionField,
    disc: Discretization,
    approach: Approach,
    exact_qoi: Option<f64>,
) -> Result<Estimation> {
    let p_dual = disc.degree;
    let dual = dual_solve(approach, problem, qoi, mesh, disc)?;
    let indicators = element_indicators(problem, mesh, &primal, &dual)?;
    let estimate: f64 = indicators.iter().sum();
    let qoi_value = qoi_apply(qoi, mesh, &primal)?;
    let qoi_error = exact_qoi.map(|q| q - qoi_value);
    let h_max = (0..mesh.num_cells()).map(|c| mesh.element_geometry(c).diameter).fold(0.0, f64::max);
    let report = EstimateReport {
        approach,
        elements: mesh.num_cells(),
        primal_dofs: primal.space.num_dofs(),
        dual_dofs: dual.num_dofs(),
        qoi_value,
        qoi_error,
        estimate,
        eff: effectivity(estimate, qoi_error),
        h_max,
        p_primal: primal.space.degree(),
        p_dual,
        indicators,
    };
    Ok(Estimation { report, primal, dual })
}
