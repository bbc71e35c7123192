//! Verification problems with closed-form solutions and exact QoI values.

mod oracle;

pub use oracle::{adaptive_integrate, adaptive_integrate_2d, LayerFactor};

use std::sync::Arc;

use serde::Serialize;

use crate::avs::{ExactSolution, ProblemDef, ScalarField, VectorField};
use crate::goal::{QoIDef, QoIKind, Region};
use crate::mesh::{ElementType, Mesh, Rect, SkewParams};
use crate::spaces::FluxFamily;
use crate::{Error, Point, Result};

pub const BENCHMARK_NAMES: [&str; 5] =
    ["laplace-bump", "convdiff-pe100", "convdiff-pe200-skew", "convdiff-pe10-lineflux", "convdiff-pe100-rt"];

/// Tolerance of the adaptive quadrature oracle.
pub const ORACLE_TOL: f64 = 1e-12;

/// Closed-form solution with first and second derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Analytic {
    /// `u = exp(a (x² − x)(y² − y)) − 1`
    Bump { a: f64 },
    /// `u = g_x(x) g_y(y)` with layer factors of rate `Pe·b`.
    Layers { fx: LayerFactor, fy: LayerFactor },
}

impl Analytic {
    pub fn u(&self, p: Point) -> f64 {
        match *self {
            Analytic::Bump { a } => (a * s(p[0]) * s(p[1])).exp() - 1.0,
            Analytic::Layers { fx, fy } => fx.g(p[0]) * fy.g(p[1]),
        }
    }

    pub fn grad(&self, p: Point) -> Point {
        match *self {
            Analytic::Bump { a } => {
                let e = (a * s(p[0]) * s(p[1])).exp();
                [e * a * ds(p[0]) * s(p[1]), e * a * s(p[0]) * ds(p[1])]
            }
            Analytic::Layers { fx, fy } => [fx.dg(p[0]) * fy.g(p[1]), fx.g(p[0]) * fy.dg(p[1])],
        }
    }

    /// `(u_xx, u_xy, u_yy)`
    pub fn hessian(&self, p: Point) -> [f64; 3] {
        match *self {
            Analytic::Bump { a } => {
                let (sx, sy) = (s(p[0]), s(p[1]));
                let e = (a * sx * sy).exp();
                let (gx, gy) = (a * ds(p[0]) * sy, a * sx * ds(p[1]));
                [
                    e * (gx * gx + 2.0 * a * sy),
                    e * (gx * gy + a * ds(p[0]) * ds(p[1])),
                    e * (gy * gy + 2.0 * a * sx),
                ]
            }
            Analytic::Layers { fx, fy } => [
                fx.d2g(p[0]) * fy.g(p[1]),
                fx.dg(p[0]) * fy.dg(p[1]),
                fx.g(p[0]) * fy.d2g(p[1]),
            ],
        }
    }
}

fn s(t: f64) -> f64 {
    t * t - t
}

fn ds(t: f64) -> f64 {
    2.0 * t - 1.0
}

/// Where an exact QoI value came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Provenance {
    ClosedForm,
    AdaptiveQuadrature { tol: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExactQoI {
    pub value: f64,
    pub provenance: Provenance,
}

/// Uniform-refinement study parameters of a benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StudyDefaults {
    pub element_type: ElementType,
    pub family: FluxFamily,
    pub p_primal: usize,
    pub p_dual: usize,
    /// Subdivisions per side of the coarsest mesh.
    pub n0: usize,
    pub levels: usize,
}

/// A named verification problem.
#[derive(Clone)]
pub struct Benchmark {
    pub name: String,
    pub diffusion: f64,
    pub convection: Point,
    pub analytic: Analytic,
    pub skew: Option<SkewParams>,
    /// Named QoIs; the first one is the default.
    pub qois: Vec<(String, QoIDef)>,
    pub defaults: StudyDefaults,
}

impl std::fmt::Debug for Benchmark {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Benchmark").field("name", &self.name).field("analytic", &self.analytic).finish()
    }
}

fn quadrant() -> Rect {
    Rect::new(0.5, 0.5, 1.0, 1.0)
}

fn standard_qois() -> Vec<(String, QoIDef)> {
    let r = quadrant();
    vec![
        ("avg-u".into(), QoIDef::avg_u(r).expect("valid region")),
        ("avg-dudx".into(), QoIDef::avg_dudx(r).expect("valid region")),
        ("avg-qx".into(), QoIDef::avg_qx(r).expect("valid region")),
        ("line-qx".into(), QoIDef::line_avg_qx([0.0, 0.5], [0.0, 0.75]).expect("valid segment")),
    ]
}

/// `−Δu = f` with `u = exp(50(x² − x)(y² − y)) − 1`, homogeneous Dirichlet.
pub fn laplace_bump() -> Benchmark {
    Benchmark {
        name: "laplace-bump".into(),
        diffusion: 1.0,
        convection: [0.0, 0.0],
        analytic: Analytic::Bump { a: 50.0 },
        skew: None,
        qois: standard_qois(),
        defaults: StudyDefaults {
            element_type: ElementType::Quadrilateral,
            family: FluxFamily::Lagrange,
            p_primal: 2,
            p_dual: 3,
            n0: 1,
            levels: 5,
        },
    }
}

/// `−(1/Pe)Δu + b·∇u = f` with the product of two boundary-layer factors.
pub fn convdiff_layers(pe: f64, b: Point) -> Result<Benchmark> {
    if !(pe > 0.0 && pe.is_finite()) {
        return Err(Error::InvalidArgument(format!("Péclet number must be positive, got {pe}")));
    }
    if b[0] == 0.0 || b[1] == 0.0 || !b[0].is_finite() || !b[1].is_finite() {
        return Err(Error::InvalidArgument("convection components must be finite and nonzero".into()));
    }
    Ok(Benchmark {
        name: format!("convdiff-pe{pe}"),
        diffusion: 1.0 / pe,
        convection: b,
        analytic: Analytic::Layers { fx: LayerFactor::new(pe * b[0]), fy: LayerFactor::new(pe * b[1]) },
        skew: None,
        qois: standard_qois(),
        defaults: StudyDefaults {
            element_type: ElementType::Quadrilateral,
            family: FluxFamily::Lagrange,
            p_primal: 2,
            p_dual: 3,
            n0: 4,
            levels: 6,
        },
    })
}

/// Looks up one of [`BENCHMARK_NAMES`].
pub fn by_name(name: &str) -> Result<Benchmark> {
    let mut b = match name {
        "laplace-bump" => return Ok(laplace_bump()),
        "convdiff-pe100" => convdiff_layers(100.0, [1.0, 1.0])?,
        "convdiff-pe200-skew" => {
            let mut b = convdiff_layers(200.0, [1.0, 1.0])?;
            b.skew = Some(SkewParams::default());
            b.defaults.n0 = 8;
            b.defaults.levels = 5;
            b
        }
        "convdiff-pe10-lineflux" => {
            let mut b = convdiff_layers(10.0, [1.0, 1.0])?;
            b.qois.rotate_left(3);
            b.defaults.n0 = 8;
            b.defaults.levels = 4;
            b
        }
        "convdiff-pe100-rt" => {
            let mut b = convdiff_layers(100.0, [1.0, 1.0])?;
            b.defaults.element_type = ElementType::Triangle;
            b.defaults.family = FluxFamily::RaviartThomas;
            b.defaults.n0 = 4;
            b.defaults.levels = 5;
            b
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "unknown benchmark '{name}' (valid: {})",
                BENCHMARK_NAMES.join(", ")
            )))
        }
    };
    b.name = name.to_string();
    Ok(b)
}

impl Benchmark {
    pub fn exact(&self) -> ExactSolution {
        let a = self.analytic;
        ExactSolution { u: Arc::new(move |p| a.u(p)), grad: Arc::new(move |p| a.grad(p)) }
    }

    /// `f = −εΔu + b·∇u` from the analytic derivatives.
    pub fn source_at(&self, p: Point) -> f64 {
        let h = self.analytic.hessian(p);
        let g = self.analytic.grad(p);
        -self.diffusion * (h[0] + h[2]) + self.convection[0] * g[0] + self.convection[1] * g[1]
    }

    pub fn problem(&self) -> Result<ProblemDef> {
        let me = self.clone();
        let f: ScalarField = Arc::new(move |p| me.source_at(p));
        let b = self.convection;
        let conv: VectorField = Arc::new(move |_| b);
        let eps = self.diffusion;
        Ok(ProblemDef::new([[eps, 0.0], [0.0, eps]], conv, f)?.with_exact(self.exact()))
    }

    pub fn qoi(&self, name: &str) -> Result<&QoIDef> {
        self.qois.iter().find(|(n, _)| n == name).map(|(_, q)| q).ok_or_else(|| {
            let valid: Vec<&str> = self.qois.iter().map(|(n, _)| n.as_str()).collect();
            Error::InvalidArgument(format!("unknown QoI '{name}' (valid: {})", valid.join(", ")))
        })
    }

    pub fn default_qoi(&self) -> &QoIDef {
        &self.qois[0].1
    }

    /// Mesh with `n` subdivisions per side.
    pub fn mesh(&self, element_type: ElementType, n: usize) -> Result<Mesh> {
        match self.skew {
            Some(s) if element_type == ElementType::Quadrilateral => Mesh::build_skewed(n, s),
            Some(_) => Err(Error::Unsupported("skewed triangle meshes".into())),
            None => Mesh::build_structured(element_type, n, Rect::UNIT),
        }
    }

    /// Largest `|−εΔu + b·∇u − f|` at the given points, relative to the
    /// size of the terms.
    pub fn pde_residual(&self, points: &[Point]) -> f64 {
        let problem = self.problem().expect("valid benchmark");
        points
            .iter()
            .map(|&p| {
                let h = self.analytic.hessian(p);
                let g = self.analytic.grad(p);
                let diff = self.diffusion * (h[0] + h[2]);
                let conv = self.convection[0] * g[0] + self.convection[1] * g[1];
                let f = (problem.source)(p);
                let scale = 1.0 + diff.abs() + conv.abs() + f.abs();
                (-diff + conv - f).abs() / scale
            })
            .fold(0.0, f64::max)
    }

    /// Exact `Q(u, q)`.
    pub fn exact_qoi(&self, qoi: &QoIDef) -> Result<ExactQoI> {
        let scale = qoi.scale / qoi.measure();
        let eps = self.diffusion;
        match (self.analytic, qoi.region) {
            (Analytic::Layers { fx, fy }, Region::Rect(r)) => {
                let value = match qoi.kind {
                    QoIKind::AvgU => fx.integral(r.x0, r.x1) * fy.integral(r.y0, r.y1),
                    QoIKind::AvgDuDx => (fx.g(r.x1) - fx.g(r.x0)) * fy.integral(r.y0, r.y1),
                    QoIKind::AvgQx => eps * (fx.g(r.x1) - fx.g(r.x0)) * fy.integral(r.y0, r.y1),
                    QoIKind::LineAvgQx => return Err(Error::Unsupported("line QoI over a rectangle".into())),
                };
                Ok(ExactQoI { value: scale * value, provenance: Provenance::ClosedForm })
            }
            (Analytic::Layers { fx, fy }, Region::Segment([a, b])) => {
                if qoi.kind != QoIKind::LineAvgQx {
                    return Err(Error::Unsupported("volume QoI over a segment".into()));
                }
                let value = if a[0] == b[0] {
                    eps * fx.dg(a[0]) * fy.integral(a[1].min(b[1]), a[1].max(b[1]))
                } else if a[1] == b[1] {
                    eps * (fx.g(a[0].max(b[0])) - fx.g(a[0].min(b[0]))) * fy.g(a[1])
                } else {
                    return Err(Error::Unsupported("oblique line QoI".into()));
                };
                Ok(ExactQoI { value: scale * value, provenance: Provenance::ClosedForm })
            }
            (an @ Analytic::Bump { .. }, region) => {
                let integrand = move |p: Point| match qoi.kind {
                    QoIKind::AvgU => an.u(p),
                    QoIKind::AvgDuDx => an.grad(p)[0],
                    QoIKind::AvgQx | QoIKind::LineAvgQx => eps * an.grad(p)[0],
                };
                let value = match region {
                    Region::Rect(r) => adaptive_integrate_2d(&integrand, r, ORACLE_TOL),
                    Region::Segment([a, b]) => {
                        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
                        let f = |t: f64| integrand([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]) * len;
                        adaptive_integrate(&f, 0.0, 1.0, ORACLE_TOL)
                    }
                };
                Ok(ExactQoI { value: scale * value, provenance: Provenance::AdaptiveQuadrature { tol: ORACLE_TOL } })
            }
        }
    }
}
