//! Reference bases, quadrature rules and global degree-of-freedom maps.

pub mod lagrange;
pub mod quadrature;
pub mod rt;

pub use lagrange::{lagrange_basis, BasisTable, LagrangeBasis, MAX_DEGREE};
pub use quadrature::{edge_quadrature, gauss_legendre, quadrature, EdgeQuadrature, QuadratureRule};
pub use rt::{rt_basis, rt_dim, RtElementBasis};

use serde::{Deserialize, Serialize};

use crate::mesh::{ElementType, Mesh};
use crate::{Error, Result};

/// Discretization of the flux (or dual flux) field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FluxFamily {
    /// Two C⁰ Lagrange components of the scalar degree.
    Lagrange,
    /// Raviart-Thomas of index equal to the scalar degree (triangles only).
    RaviartThomas,
}

/// Global numbering of a C⁰ Lagrange field.
#[derive(Clone, Debug)]
pub struct ScalarDofMap {
    degree: usize,
    per_cell: usize,
    cell_dofs: Vec<usize>,
    num_dofs: usize,
}

impl ScalarDofMap {
    pub fn new(mesh: &Mesh, basis: &LagrangeBasis) -> Result<Self> {
        let p = basis.degree();
        if p == 0 {
            return Err(Error::DofMap("continuous field needs degree >= 1".into()));
        }
        let nv = mesh.num_vertices();
        let ne = mesh.num_edges();
        let per_edge = basis.nodes_per_edge();
        let nint = basis.num_interior();
        let nverts = mesh.element_type().num_vertices();
        let per_cell = basis.dim();
        let mut cell_dofs = Vec::with_capacity(per_cell * mesh.num_cells());
        let interior0 = nv + ne * per_edge;
        for c in 0..mesh.num_cells() {
            let v = mesh.cell(c);
            cell_dofs.extend_from_slice(v);
            for (k, &e) in mesh.cell_edges(c).iter().enumerate() {
                let [a, b] = mesh.edge(e);
                let (s, t) = (v[k], v[(k + 1) % nverts]);
                let forward = if (s, t) == (a, b) {
                    true
                } else if (s, t) == (b, a) {
                    false
                } else {
                    return Err(Error::DofMap(format!("cell {c} local edge {k} does not match edge {e}")));
                };
                for j in 0..per_edge {
                    let g = if forward { j } else { per_edge - 1 - j };
                    cell_dofs.push(nv + e * per_edge + g);
                }
            }
            cell_dofs.extend((0..nint).map(|k| interior0 + c * nint + k));
        }
        Ok(Self { degree: p, per_cell, cell_dofs, num_dofs: interior0 + mesh.num_cells() * nint })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_dofs(&self) -> usize {
        self.num_dofs
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.per_cell
    }

    pub fn num_cells(&self) -> usize {
        self.cell_dofs.len() / self.per_cell
    }

    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        &self.cell_dofs[c * self.per_cell..(c + 1) * self.per_cell]
    }
}

/// Global numbering of a Raviart-Thomas field: edge moments, then interior
/// moments per cell.
#[derive(Clone, Debug)]
pub struct RtDofMap {
    index: usize,
    per_cell: usize,
    cell_dofs: Vec<usize>,
    num_dofs: usize,
}

impl RtDofMap {
    pub fn new(mesh: &Mesh, index: usize) -> Result<Self> {
        if mesh.element_type() != ElementType::Triangle {
            return Err(Error::Unsupported("Raviart-Thomas fluxes need a triangle mesh".into()));
        }
        let per_edge = index;
        let nint = index * (index - 1);
        let per_cell = rt_dim(index);
        let interior0 = mesh.num_edges() * per_edge;
        let mut cell_dofs = Vec::with_capacity(per_cell * mesh.num_cells());
        for c in 0..mesh.num_cells() {
            for &e in mesh.cell_edges(c) {
                cell_dofs.extend((0..per_edge).map(|j| e * per_edge + j));
            }
            cell_dofs.extend((0..nint).map(|k| interior0 + c * nint + k));
        }
        Ok(Self { index, per_cell, cell_dofs, num_dofs: interior0 + mesh.num_cells() * nint })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn num_dofs(&self) -> usize {
        self.num_dofs
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.per_cell
    }

    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        &self.cell_dofs[c * self.per_cell..(c + 1) * self.per_cell]
    }
}

/// Continuous trial space `(u, q)`: C⁰ scalar plus a C⁰ or Raviart-Thomas
/// flux. Global layout: scalar dofs first, then `q_x` and `q_y` (Lagrange) or
/// the RT dofs. Scalar dofs on constrained boundary edges are fixed to zero.
#[derive(Clone, Debug)]
pub struct TrialSpace {
    element_type: ElementType,
    family: FluxFamily,
    basis: LagrangeBasis,
    scalar: ScalarDofMap,
    rt: Option<RtDofMap>,
    constrained: Vec<bool>,
    free_index: Vec<usize>,
    num_free: usize,
}

pub const NOT_FREE: usize = usize::MAX;

impl TrialSpace {
    /// `constrained_edges[e]`: whether the scalar field vanishes on edge `e`.
    pub fn new(mesh: &Mesh, family: FluxFamily, degree: usize, constrained_edges: &[bool]) -> Result<Self> {
        if degree == 0 || degree > MAX_DEGREE {
            return Err(Error::Unsupported(format!("trial degree {degree} (supported: 1..={MAX_DEGREE})")));
        }
        if constrained_edges.len() != mesh.num_edges() {
            return Err(Error::InvalidArgument("constraint mask does not match the mesh edges".into()));
        }
        let basis = LagrangeBasis::new(mesh.element_type(), degree)?;
        let scalar = ScalarDofMap::new(mesh, &basis)?;
        let rt = match family {
            FluxFamily::Lagrange => None,
            FluxFamily::RaviartThomas => Some(RtDofMap::new(mesh, degree)?),
        };
        let n_flux = rt.as_ref().map_or(2 * scalar.num_dofs(), |r| r.num_dofs());
        let n = scalar.num_dofs() + n_flux;
        let mut constrained = vec![false; n];
        for c in 0..mesh.num_cells() {
            let dofs = scalar.cell_dofs(c);
            for (k, &e) in mesh.cell_edges(c).iter().enumerate() {
                if constrained_edges[e] {
                    for i in basis.edge_nodes(k) {
                        constrained[dofs[i]] = true;
                    }
                }
            }
        }
        let mut free_index = vec![NOT_FREE; n];
        let mut num_free = 0;
        for (i, &c) in constrained.iter().enumerate() {
            if !c {
                free_index[i] = num_free;
                num_free += 1;
            }
        }
        Ok(Self { element_type: mesh.element_type(), family, basis, scalar, rt, constrained, free_index, num_free })
    }

    pub fn element_type(&self) -> ElementType {
        self.element_type
    }

    pub fn num_cells(&self) -> usize {
        self.scalar.num_cells()
    }

    pub fn family(&self) -> FluxFamily {
        self.family
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn scalar_basis(&self) -> &LagrangeBasis {
        &self.basis
    }

    pub fn scalar_map(&self) -> &ScalarDofMap {
        &self.scalar
    }

    pub fn rt_map(&self) -> Option<&RtDofMap> {
        self.rt.as_ref()
    }

    /// Total number of dofs, constrained ones included.
    pub fn num_dofs(&self) -> usize {
        self.constrained.len()
    }

    pub fn num_scalar_dofs(&self) -> usize {
        self.scalar.num_dofs()
    }

    pub fn num_free(&self) -> usize {
        self.num_free
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained[dof]
    }

    /// Position of `dof` among the free dofs, or [`NOT_FREE`].
    pub fn free_index(&self, dof: usize) -> usize {
        self.free_index[dof]
    }

    /// Number of scalar and flux basis functions on one cell.
    pub fn local_counts(&self) -> (usize, usize) {
        let ns = self.scalar.dofs_per_cell();
        let nf = self.rt.as_ref().map_or(2 * ns, |r| r.dofs_per_cell());
        (ns, nf)
    }

    /// Global dofs of cell `c` in local order: scalar, then flux
    /// (`q_x` block then `q_y` block for Lagrange).
    pub fn cell_dofs(&self, c: usize) -> Vec<usize> {
        let s = self.scalar.cell_dofs(c);
        let ns = self.scalar.num_dofs();
        let mut out = Vec::with_capacity(3 * s.len());
        out.extend_from_slice(s);
        match &self.rt {
            None => {
                out.extend(s.iter().map(|&d| ns + d));
                out.extend(s.iter().map(|&d| 2 * ns + d));
            }
            Some(rt) => out.extend(rt.cell_dofs(c).iter().map(|&d| ns + d)),
        }
        out
    }

    /// Expands free-dof values into a full coefficient vector (zeros on
    /// constrained dofs).
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        self.free_index.iter().map(|&f| if f == NOT_FREE { 0.0 } else { free[f] }).collect()
    }
}

/// Broken test space: per-cell discontinuous Lagrange `v` of degree
/// `trial + Δp` and two components of `w` of the same degree. Nodes of `v`
/// on constrained edges are removed, so `v` vanishes there.
#[derive(Clone, Debug)]
pub struct TestSpaceDesc {
    degree: usize,
    basis: LagrangeBasis,
}

impl TestSpaceDesc {
    pub fn new(element_type: ElementType, trial_degree: usize, enrichment: usize) -> Result<Self> {
        let degree = trial_degree + enrichment;
        Ok(Self { degree, basis: LagrangeBasis::new(element_type, degree)? })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn basis(&self) -> &LagrangeBasis {
        &self.basis
    }

    /// Local `v` basis indices that remain active on cell `c`.
    pub fn active_v(&self, mesh: &Mesh, c: usize, constrained_edges: &[bool]) -> Vec<usize> {
        let mut keep = vec![true; self.basis.dim()];
        for (k, &e) in mesh.cell_edges(c).iter().enumerate() {
            if constrained_edges[e] {
                if self.degree == 0 {
                    keep[0] = false;
                }
                for i in self.basis.edge_nodes(k) {
                    keep[i] = false;
                }
            }
        }
        (0..keep.len()).filter(|&i| keep[i]).collect()
    }

    /// Number of `w` basis functions per component.
    pub fn w_dim(&self) -> usize {
        self.basis.dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;

    fn dirichlet(mesh: &Mesh) -> Vec<bool> {
        (0..mesh.num_edges()).map(|e| mesh.is_boundary_edge(e)).collect()
    }

    #[test]
    fn quad_dof_counts_match_field_accounting() {
        for (n, p, expect) in [(1, 2, 27), (2, 2, 75), (4, 2, 243), (1, 3, 48), (4, 3, 507), (8, 2, 867)] {
            let m = Mesh::build_structured(ElementType::Quadrilateral, n, Rect::UNIT).unwrap();
            let s = TrialSpace::new(&m, FluxFamily::Lagrange, p, &dirichlet(&m)).unwrap();
            assert_eq!(s.num_dofs(), expect);
            assert_eq!(s.num_dofs(), 3 * (n * p + 1).pow(2));
        }
    }

    #[test]
    fn rt_dof_counts() {
        let m = Mesh::build_structured(ElementType::Triangle, 4, Rect::UNIT).unwrap();
        let s = TrialSpace::new(&m, FluxFamily::RaviartThomas, 2, &dirichlet(&m)).unwrap();
        assert_eq!(s.num_dofs(), 257);
        let s = TrialSpace::new(&m, FluxFamily::RaviartThomas, 3, &dirichlet(&m)).unwrap();
        assert_eq!(s.num_dofs(), 529);
        let q = Mesh::build_structured(ElementType::Quadrilateral, 2, Rect::UNIT).unwrap();
        assert!(TrialSpace::new(&q, FluxFamily::RaviartThomas, 2, &dirichlet(&q)).is_err());
    }

    #[test]
    fn shared_dofs_have_matching_nodes() {
        for et in [ElementType::Triangle, ElementType::Quadrilateral] {
            let m = Mesh::build_structured(et, 3, Rect::UNIT).unwrap();
            let b = LagrangeBasis::new(et, 3).unwrap();
            let map = ScalarDofMap::new(&m, &b).unwrap();
            let mut pos: Vec<Option<[f64; 2]>> = vec![None; map.num_dofs()];
            for c in 0..m.num_cells() {
                let fm = m.map(c);
                for (i, &d) in map.cell_dofs(c).iter().enumerate() {
                    let x = fm.map(b.nodes()[i]);
                    if let Some(prev) = pos[d] {
                        assert!((prev[0] - x[0]).abs() < 1e-13 && (prev[1] - x[1]).abs() < 1e-13);
                    }
                    pos[d] = Some(x);
                }
            }
            assert!(pos.iter().all(|p| p.is_some()));
        }
    }

    #[test]
    fn constrained_scalar_dofs_are_boundary_nodes() {
        let m = Mesh::build_structured(ElementType::Quadrilateral, 2, Rect::UNIT).unwrap();
        let s = TrialSpace::new(&m, FluxFamily::Lagrange, 2, &dirichlet(&m)).unwrap();
        // 5×5 nodes, 16 on the boundary
        assert_eq!((0..25).filter(|&d| s.is_constrained(d)).count(), 16);
        assert_eq!(s.num_free(), 75 - 16);
    }

    #[test]
    fn test_space_dimension_audit() {
        for p in 1..=4 {
            let t = TestSpaceDesc::new(ElementType::Triangle, p, 0).unwrap();
            let test_dim = 3 * t.basis().dim();
            let trial_dim = 3 * LagrangeBasis::new(ElementType::Triangle, p).unwrap().dim();
            assert!(test_dim >= trial_dim);
        }
    }

    #[test]
    fn active_v_drops_boundary_nodes() {
        let m = Mesh::build_structured(ElementType::Quadrilateral, 1, Rect::UNIT).unwrap();
        let t = TestSpaceDesc::new(ElementType::Quadrilateral, 2, 0).unwrap();
        assert_eq!(t.active_v(&m, 0, &dirichlet(&m)), vec![8]);
        assert_eq!(t.active_v(&m, 0, &[false; 4]).len(), 9);
    }
}
