//! AVS-FE assembly and solution: local Gram matrices, optimal test
//! functions, the normal-equation system and the energy residual norm.

mod element;
mod system;

pub use element::{CellEval, CellFrame, ElementSystem, Formulation, Load, TestEval, TrialEval};
pub use system::{
    assemble, energy_residual_norm, l2_errors, solve_spd, solve_spd_with_stats, solve_system, write_matrix_market, SolutionField, SolveStats, SparseSystem,
};

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::mesh::{BoundaryTag, Mesh};
use crate::spaces::FluxFamily;
use crate::{Error, Point, Result};

pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Point) -> Point + Send + Sync>;

/// Which bilinear form is assembled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// `(D∇u − q)·w + q·∇v + (b·∇u) v − ⟨q·n, v⟩` on interior edges.
    Primal,
    /// `(∇p − r)·w + D r·∇v − (b·∇p) v − ⟨(D r)·n, v⟩` on interior edges,
    /// with the whole boundary Dirichlet.
    Dual,
}

/// Closed-form solution used for verification.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: ScalarField,
    pub grad: VectorField,
}

/// Coefficients of `−∇·(D∇u) + b·∇u = f` with `q·n = g` on Neumann edges.
#[derive(Clone)]
pub struct ProblemDef {
    diffusion: [[f64; 2]; 2],
    pub convection: VectorField,
    pub source: ScalarField,
    pub neumann: ScalarField,
    pub direction: Direction,
    pub exact: Option<ExactSolution>,
}

impl fmt::Debug for ProblemDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemDef")
            .field("diffusion", &self.diffusion)
            .field("direction", &self.direction)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

impl ProblemDef {
    pub fn new(diffusion: [[f64; 2]; 2], convection: VectorField, source: ScalarField) -> Result<Self> {
        let [[a, b], [c, d]] = diffusion;
        let scale = a.abs().max(d.abs()).max(b.abs());
        if !(a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite()) {
            return Err(Error::InvalidArgument("diffusion tensor has non-finite entries".into()));
        }
        if (b - c).abs() > 1e-14 * scale {
            return Err(Error::InvalidArgument("diffusion tensor must be symmetric".into()));
        }
        if !(a > 0.0 && a * d - b * c > 0.0) {
            return Err(Error::InvalidArgument("diffusion tensor must be positive definite".into()));
        }
        Ok(Self {
            diffusion,
            convection,
            source,
            neumann: Arc::new(|_| 0.0),
            direction: Direction::Primal,
            exact: None,
        })
    }

    pub fn isotropic(eps: f64, b: Point, source: ScalarField) -> Result<Self> {
        Self::new([[eps, 0.0], [0.0, eps]], Arc::new(move |_| b), source)
    }

    pub fn with_neumann(mut self, g: ScalarField) -> Self {
        self.neumann = g;
        self
    }

    pub fn with_exact(mut self, exact: ExactSolution) -> Self {
        self.exact = Some(exact);
        self
    }

    pub fn diffusion(&self) -> [[f64; 2]; 2] {
        self.diffusion
    }

    /// The dual problem: same coefficients, dual form, zero data, no exact
    /// solution.
    pub fn dual(&self) -> Self {
        Self {
            diffusion: self.diffusion,
            convection: self.convection.clone(),
            source: Arc::new(|_| 0.0),
            neumann: Arc::new(|_| 0.0),
            direction: Direction::Dual,
            exact: None,
        }
    }

    /// Edges on which the scalar trial field and the test `v` vanish.
    pub fn constrained_edges(&self, mesh: &Mesh) -> Vec<bool> {
        (0..mesh.num_edges())
            .map(|e| match self.direction {
                Direction::Primal => mesh.boundary_tag(e) == Some(BoundaryTag::Dirichlet),
                Direction::Dual => mesh.is_boundary_edge(e),
            })
            .collect()
    }

    /// `D v`
    #[inline]
    pub fn apply_diffusion(&self, v: Point) -> Point {
        let d = &self.diffusion;
        [d[0][0] * v[0] + d[0][1] * v[1], d[1][0] * v[0] + d[1][1] * v[1]]
    }

    /// Exact `(u, ∇u, q = D∇u)` at `x`, if known.
    pub fn exact_at(&self, x: Point) -> Option<(f64, Point, Point)> {
        self.exact.as_ref().map(|e| {
            let g = (e.grad)(x);
            ((e.u)(x), g, self.apply_diffusion(g))
        })
    }
}

/// Trial family, degree and test enrichment of one discretization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discretization {
    pub family: FluxFamily,
    pub degree: usize,
    pub enrichment: usize,
}

impl Discretization {
    pub fn new(family: FluxFamily, degree: usize) -> Self {
        Self { family, degree, enrichment: 0 }
    }

    pub fn with_degree(self, degree: usize) -> Self {
        Self { degree, ..self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_indefinite_diffusion() {
        let b: VectorField = Arc::new(|_| [0.0, 0.0]);
        let f: ScalarField = Arc::new(|_| 0.0);
        assert!(ProblemDef::new([[1.0, 0.0], [0.0, -1.0]], b.clone(), f.clone()).is_err());
        assert!(ProblemDef::new([[1.0, 0.5], [0.2, 1.0]], b.clone(), f.clone()).is_err());
        assert!(ProblemDef::new([[2.0, 0.5], [0.5, 1.0]], b, f).is_ok());
    }

    #[test]
    fn dual_constrains_whole_boundary() {
        let m = Mesh::build_structured(crate::mesh::ElementType::Quadrilateral, 2, crate::mesh::Rect::UNIT)
            .unwrap()
            .with_neumann(|p| p[0] < 1e-12);
        let p = ProblemDef::isotropic(1.0, [0.0, 0.0], Arc::new(|_| 1.0)).unwrap();
        let primal = p.constrained_edges(&m).iter().filter(|&&c| c).count();
        let dual = p.dual().constrained_edges(&m).iter().filter(|&&c| c).count();
        assert_eq!(primal, 6);
        assert_eq!(dual, 8);
    }
}
