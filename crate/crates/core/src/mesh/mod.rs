//! Conforming 2D meshes of triangles or quadrilaterals.
//!
//! A [`Mesh`] is immutable once built; refinement returns a new mesh that
//! records, per cell, the index of its parent in the mesh it came from.
//!
//! Conventions:
//! - cells are stored counter-clockwise; local edge `e` joins local
//!   vertices `e` and `e + 1 (mod n)`;
//! - for triangles, local vertex 0 is the newest vertex and the opposite
//!   edge `(1, 2)` is the refinement edge used by newest-vertex bisection.

pub mod geometry;
mod refine;

use std::collections::HashMap;
use std::fmt::Write as _;

pub use geometry::{ElementGeometry, ElementMap};

use crate::{Error, Point, Result};

pub const NO_CELL: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ElementType {
    Triangle,
    Quadrilateral,
}

impl ElementType {
    pub fn num_vertices(self) -> usize {
        match self {
            ElementType::Triangle => 3,
            ElementType::Quadrilateral => 4,
        }
    }

    /// Vertices of the reference element: the unit triangle or `[-1, 1]²`.
    pub fn reference_vertices(self) -> &'static [Point] {
        match self {
            ElementType::Triangle => &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            ElementType::Quadrilateral => &[[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]],
        }
    }

    pub fn reference_measure(self) -> f64 {
        match self {
            ElementType::Triangle => 0.5,
            ElementType::Quadrilateral => 4.0,
        }
    }

    /// VTK legacy cell type id.
    pub fn vtk_cell_type(self) -> u8 {
        match self {
            ElementType::Triangle => 5,
            ElementType::Quadrilateral => 9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 };

    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        p[0] >= self.x0 - tol && p[0] <= self.x1 + tol && p[1] >= self.y0 - tol && p[1] <= self.y1 + tol
    }
}

/// Smooth sinusoidal displacement applied to a structured quad grid.
///
/// Interior vertices move by
/// `dx = A sin(πx) sin(2πy)`, `dy = A sin(πy) sin(2πx)` (unit-square
/// coordinates); boundary vertices are fixed.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct SkewParams {
    pub amplitude: f64,
}

impl Default for SkewParams {
    fn default() -> Self {
        Self { amplitude: 0.1 }
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    element_type: ElementType,
    vertices: Vec<Point>,
    cells: Vec<usize>,
    edges: Vec<[usize; 2]>,
    edge_cells: Vec<[usize; 2]>,
    cell_edges: Vec<usize>,
    boundary_tags: Vec<Option<BoundaryTag>>,
    parent: Vec<usize>,
    generation: Vec<u32>,
    domain: Rect,
    skew: Option<SkewParams>,
}

pub(crate) type TagMap = HashMap<[usize; 2], BoundaryTag>;

#[inline]
pub(crate) fn edge_key(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

impl Mesh {
    /// Builds a mesh from raw vertices and cells; boundary edges are tagged
    /// by `tag(a, b)` from their endpoint coordinates.
    pub fn from_cells(
        element_type: ElementType,
        vertices: Vec<Point>,
        cells: Vec<usize>,
        tag: impl Fn(Point, Point) -> BoundaryTag,
    ) -> Result<Self> {
        let n_cells = cells.len() / element_type.num_vertices();
        let mesh = Self::assemble(
            element_type,
            vertices,
            cells,
            |_, _| None,
            (0..n_cells).collect(),
            vec![0; n_cells],
        )?;
        let tags: Vec<Option<BoundaryTag>> = mesh
            .edges
            .iter()
            .zip(&mesh.edge_cells)
            .map(|(e, c)| (c[1] == NO_CELL).then(|| tag(mesh.vertices[e[0]], mesh.vertices[e[1]])))
            .collect();
        Ok(Self { boundary_tags: tags, ..mesh })
    }

    /// Shared constructor: derives edge connectivity and validates cells.
    pub(crate) fn assemble(
        element_type: ElementType,
        vertices: Vec<Point>,
        cells: Vec<usize>,
        tag_of: impl Fn(&[Point], [usize; 2]) -> Option<BoundaryTag>,
        parent: Vec<usize>,
        generation: Vec<u32>,
    ) -> Result<Self> {
        let nv = element_type.num_vertices();
        if cells.is_empty() || cells.len() % nv != 0 {
            return Err(Error::InvalidMesh(format!("cell list length {} is not a positive multiple of {nv}", cells.len())));
        }
        if let Some(&bad) = cells.iter().find(|&&v| v >= vertices.len()) {
            return Err(Error::InvalidMesh(format!("vertex index {bad} out of range")));
        }
        let n_cells = cells.len() / nv;
        let mut lookup: HashMap<[usize; 2], usize> = HashMap::with_capacity(n_cells * 2);
        let mut edges = Vec::new();
        let mut edge_cells: Vec<[usize; 2]> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for c in 0..n_cells {
            let cv = &cells[c * nv..(c + 1) * nv];
            for e in 0..nv {
                let key = edge_key(cv[e], cv[(e + 1) % nv]);
                if key[0] == key[1] {
                    return Err(Error::InvalidMesh(format!("cell {c} repeats vertex {}", key[0])));
                }
                let id = *lookup.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_cells.push([NO_CELL, NO_CELL]);
                    edges.len() - 1
                });
                let slot = &mut edge_cells[id];
                if slot[0] == NO_CELL {
                    slot[0] = c;
                } else if slot[1] == NO_CELL {
                    slot[1] = c;
                } else {
                    return Err(Error::InvalidMesh(format!("edge {key:?} shared by more than two cells")));
                }
                cell_edges.push(id);
            }
        }
        let boundary_tags = edges
            .iter()
            .zip(&edge_cells)
            .map(|(&e, c)| if c[1] == NO_CELL { tag_of(&vertices, e).or(Some(BoundaryTag::Dirichlet)) } else { None })
            .collect();
        let domain = bounding_rect(&vertices);
        let mesh = Self {
            element_type,
            vertices,
            cells,
            edges,
            edge_cells,
            cell_edges,
            boundary_tags,
            parent,
            generation,
            domain,
            skew: None,
        };
        for c in 0..n_cells {
            let area = mesh.signed_area(c);
            if !(area > 0.0) {
                return Err(Error::InvalidMesh(format!("cell {c} has non-positive signed area {area:.3e}")));
            }
            if element_type == ElementType::Quadrilateral && !mesh.is_convex(c) {
                return Err(Error::InvalidMesh(format!("quadrilateral {c} is not convex")));
            }
        }
        Ok(mesh)
    }

    /// `n × n` grid of quads, or `2n²` triangles split along the
    /// lower-left to upper-right diagonal. All boundary edges are Dirichlet.
    pub fn build_structured(element_type: ElementType, n: usize, domain: Rect) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("structured mesh needs n >= 1".into()));
        }
        if !(domain.width() > 0.0 && domain.height() > 0.0) {
            return Err(Error::InvalidArgument(format!("domain rectangle {domain:?} is empty or inverted")));
        }
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([
                    domain.x0 + domain.width() * i as f64 / n as f64,
                    domain.y0 + domain.height() * j as f64 / n as f64,
                ]);
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut cells = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                match element_type {
                    ElementType::Quadrilateral => cells.extend_from_slice(&[a, b, c, d]),
                    // Newest vertex first: the diagonal b-d is the refinement edge.
                    ElementType::Triangle => cells.extend_from_slice(&[a, b, d, c, d, b]),
                }
            }
        }
        let mut mesh = Self::from_cells(element_type, vertices, cells, |_, _| BoundaryTag::Dirichlet)?;
        mesh.domain = domain;
        Ok(mesh)
    }

    /// Structured quad mesh of the unit square with interior vertices displaced
    /// by a smooth sinusoidal shear (see [`SkewParams`]).
    pub fn build_skewed(n: usize, skew: SkewParams) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument("skewed mesh needs n >= 2".into()));
        }
        if !skew.amplitude.is_finite() {
            return Err(Error::InvalidArgument("skew amplitude must be finite".into()));
        }
        let base = Self::build_structured(ElementType::Quadrilateral, n, Rect::UNIT)?;
        let pi = std::f64::consts::PI;
        let vertices: Vec<Point> = base
            .vertices
            .iter()
            .map(|&[x, y]| {
                let a = skew.amplitude;
                [
                    x + a * (pi * x).sin() * (2.0 * pi * y).sin(),
                    y + a * (pi * y).sin() * (2.0 * pi * x).sin(),
                ]
            })
            .collect();
        let mut mesh = Self::assemble(
            ElementType::Quadrilateral,
            vertices,
            base.cells,
            |_, _| Some(BoundaryTag::Dirichlet),
            base.parent,
            base.generation,
        )
        .map_err(|e| Error::InvalidArgument(format!("skew amplitude {} rejected: {e}", skew.amplitude)))?;
        mesh.domain = Rect::UNIT;
        mesh.skew = Some(skew);
        Ok(mesh)
    }

    /// Returns a copy whose boundary edges satisfying `pred(midpoint)` are
    /// tagged Neumann (all others Dirichlet).
    pub fn with_neumann(&self, pred: impl Fn(Point) -> bool) -> Self {
        let mut out = self.clone();
        for (e, tag) in out.boundary_tags.iter_mut().enumerate() {
            if tag.is_some() {
                let [a, b] = self.edges[e];
                let mid = midpoint(self.vertices[a], self.vertices[b]);
                *tag = Some(if pred(mid) { BoundaryTag::Neumann } else { BoundaryTag::Dirichlet });
            }
        }
        out
    }

    pub fn element_type(&self) -> ElementType {
        self.element_type
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len() / self.element_type.num_vertices()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let nv = self.element_type.num_vertices();
        &self.cells[c * nv..(c + 1) * nv]
    }

    pub fn cell_points(&self, c: usize) -> Vec<Point> {
        self.cell(c).iter().map(|&v| self.vertices[v]).collect()
    }

    /// Global edge ids of the cell's local edges.
    pub fn cell_edges(&self, c: usize) -> &[usize] {
        let nv = self.element_type.num_vertices();
        &self.cell_edges[c * nv..(c + 1) * nv]
    }

    /// Sorted vertex pair of an edge.
    pub fn edge(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    /// Cells incident to an edge; the second is [`NO_CELL`] on the boundary.
    pub fn edge_cells(&self, e: usize) -> [usize; 2] {
        self.edge_cells[e]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_cells[e][1] == NO_CELL
    }

    pub fn boundary_tag(&self, e: usize) -> Option<BoundaryTag> {
        self.boundary_tags[e]
    }

    /// Index of each cell's parent in the mesh this one was refined from.
    pub fn parents(&self) -> &[usize] {
        &self.parent
    }

    /// Number of refinements separating each cell from the initial mesh.
    pub fn generations(&self) -> &[u32] {
        &self.generation
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn skew(&self) -> Option<SkewParams> {
        self.skew
    }

    pub fn signed_area(&self, c: usize) -> f64 {
        polygon_area(&self.cell_points(c))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.signed_area(c)).sum()
    }

    fn is_convex(&self, c: usize) -> bool {
        let p = self.cell_points(c);
        let n = p.len();
        (0..n).all(|i| {
            let a = p[i];
            let b = p[(i + 1) % n];
            let d = p[(i + 2) % n];
            cross(sub(b, a), sub(d, b)) > 0.0
        })
    }

    pub fn map(&self, c: usize) -> ElementMap {
        ElementMap::new(self.element_type, &self.cell_points(c))
    }

    pub fn element_geometry(&self, c: usize) -> ElementGeometry {
        ElementGeometry::new(&self.cell_points(c))
    }

    pub fn centroid(&self, c: usize) -> Point {
        let p = self.cell_points(c);
        let n = p.len() as f64;
        [p.iter().map(|q| q[0]).sum::<f64>() / n, p.iter().map(|q| q[1]).sum::<f64>() / n]
    }

    /// Smallest interior angle over all cells, in degrees.
    pub fn min_angle_degrees(&self) -> f64 {
        let mut min = f64::INFINITY;
        for c in 0..self.num_cells() {
            let p = self.cell_points(c);
            let n = p.len();
            for i in 0..n {
                let prev = p[(i + n - 1) % n];
                let next = p[(i + 1) % n];
                let u = sub(prev, p[i]);
                let v = sub(next, p[i]);
                let cosang = (u[0] * v[0] + u[1] * v[1]) / (norm(u) * norm(v));
                min = min.min(cosang.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        min
    }

    /// Edge-incidence audit: positive orientation, convexity, every edge with
    /// a single cell on the domain boundary (no hanging nodes), and the cells
    /// tiling the domain rectangle.
    pub fn audit(&self) -> Result<()> {
        for c in 0..self.num_cells() {
            if !(self.signed_area(c) > 0.0) {
                return Err(Error::InvalidMesh(format!("cell {c} is inverted or degenerate")));
            }
            if self.element_type == ElementType::Quadrilateral && !self.is_convex(c) {
                return Err(Error::InvalidMesh(format!("quadrilateral {c} is not convex")));
            }
        }
        let d = self.domain;
        let scale = d.width().max(d.height());
        let tol = 1e-12 * scale;
        let on_side = |p: Point, q: Point| {
            ((p[0] - d.x0).abs() < tol && (q[0] - d.x0).abs() < tol)
                || ((p[0] - d.x1).abs() < tol && (q[0] - d.x1).abs() < tol)
                || ((p[1] - d.y0).abs() < tol && (q[1] - d.y0).abs() < tol)
                || ((p[1] - d.y1).abs() < tol && (q[1] - d.y1).abs() < tol)
        };
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            let n_inc = self.edge_cells[e].iter().filter(|&&c| c != NO_CELL).count();
            if n_inc == 0 {
                return Err(Error::InvalidMesh(format!("edge {e} has no incident cell")));
            }
            if n_inc == 1 && !on_side(self.vertices[a], self.vertices[b]) {
                return Err(Error::InvalidMesh(format!(
                    "edge {e} ({a}-{b}) has one incident cell but is interior: hanging node"
                )));
            }
            if n_inc == 1 && self.boundary_tags[e].is_none() {
                return Err(Error::InvalidMesh(format!("boundary edge {e} has no tag")));
            }
        }
        let area = self.total_area();
        if (area - d.area()).abs() > 1e-12 * d.area() {
            return Err(Error::InvalidMesh(format!("cells cover area {area}, domain area is {}", d.area())));
        }
        Ok(())
    }

    /// Plain-text dump (vertex list then cell list) for golden comparisons.
    pub fn dump_text(&self) -> String {
        let mut s = String::new();
        let kind = match self.element_type {
            ElementType::Triangle => "tri",
            ElementType::Quadrilateral => "quad",
        };
        let _ = writeln!(s, "element_type {kind}");
        let _ = writeln!(s, "vertices {}", self.num_vertices());
        for p in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", p[0], p[1]);
        }
        let _ = writeln!(s, "cells {}", self.num_cells());
        for c in 0..self.num_cells() {
            let line: Vec<String> = self.cell(c).iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub(crate) fn tag_map(&self) -> TagMap {
        self.edges
            .iter()
            .zip(&self.boundary_tags)
            .filter_map(|(&e, t)| t.map(|t| (e, t)))
            .collect()
    }

    pub(crate) fn set_metadata_from(&mut self, other: &Mesh) {
        self.domain = other.domain;
        self.skew = other.skew;
    }
}

fn bounding_rect(vertices: &[Point]) -> Rect {
    let mut r = Rect::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in vertices {
        r.x0 = r.x0.min(p[0]);
        r.y0 = r.y0.min(p[1]);
        r.x1 = r.x1.max(p[0]);
        r.y1 = r.y1.max(p[1]);
    }
    r
}

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub(crate) fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub(crate) fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Shoelace formula; positive for counter-clockwise polygons.
pub fn polygon_area(p: &[Point]) -> f64 {
    let n = p.len();
    0.5 * (0..n).map(|i| cross(p[i], p[(i + 1) % n])).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_quad_counts() {
        let m = Mesh::build_structured(ElementType::Quadrilateral, 1, Rect::UNIT).unwrap();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_cells(), 1);
        assert_eq!((0..m.num_edges()).filter(|&e| m.is_boundary_edge(e)).count(), 4);
        m.audit().unwrap();
    }

    #[test]
    fn structured_quad_4x4() {
        let m = Mesh::build_structured(ElementType::Quadrilateral, 4, Rect::UNIT).unwrap();
        assert_eq!(m.num_vertices(), 25);
        assert_eq!(m.num_cells(), 16);
        m.audit().unwrap();
    }

    #[test]
    fn two_triangles() {
        let m = Mesh::build_structured(ElementType::Triangle, 1, Rect::UNIT).unwrap();
        assert_eq!(m.num_cells(), 2);
        assert_eq!(m.num_edges(), 5);
        m.audit().unwrap();
        // newest vertex is opposite the diagonal
        for c in 0..2 {
            let v = m.cell(c);
            assert_eq!(edge_key(v[1], v[2]), [1, 2]);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Mesh::build_structured(ElementType::Quadrilateral, 0, Rect::UNIT).is_err());
        assert!(Mesh::build_structured(ElementType::Triangle, 2, Rect::new(1.0, 0.0, 0.0, 1.0)).is_err());
        assert!(Mesh::build_skewed(1, SkewParams::default()).is_err());
        assert!(Mesh::build_skewed(4, SkewParams { amplitude: 0.5 }).is_err());
    }

    #[test]
    fn clockwise_cells_are_rejected() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(Mesh::from_cells(ElementType::Triangle, v, vec![0, 2, 1], |_, _| BoundaryTag::Dirichlet).is_err());
    }

    #[test]
    fn zero_skew_is_structured() {
        let a = Mesh::build_skewed(4, SkewParams { amplitude: 0.0 }).unwrap();
        let b = Mesh::build_structured(ElementType::Quadrilateral, 4, Rect::UNIT).unwrap();
        assert_eq!(a.dump_text(), b.dump_text());
    }

    #[test]
    fn default_skew_is_valid() {
        let m = Mesh::build_skewed(8, SkewParams::default()).unwrap();
        assert_eq!(m.num_cells(), 64);
        assert!((m.total_area() - 1.0).abs() < 1e-12);
        assert!(m.min_angle_degrees() > 15.0, "min angle {}", m.min_angle_degrees());
        m.audit().unwrap();
    }

    #[test]
    fn neumann_tagging() {
        let m = Mesh::build_structured(ElementType::Quadrilateral, 2, Rect::UNIT).unwrap();
        let m = m.with_neumann(|p| p[0] < 1e-12);
        let n = (0..m.num_edges()).filter(|&e| m.boundary_tag(e) == Some(BoundaryTag::Neumann)).count();
        assert_eq!(n, 2);
    }
}
