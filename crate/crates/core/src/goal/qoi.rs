use serde::Serialize;

use crate::avs::{CellFrame, SolutionField, TrialEval};
use crate::mesh::{polygon_area, Mesh, Rect};
use crate::spaces::{edge_quadrature, quadrature};
use crate::{Error, Point, Result};

/// Integrand of a quantity of interest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum QoIKind {
    /// Average of `u` over a rectangle.
    AvgU,
    /// Average of `∂u/∂x` over a rectangle.
    AvgDuDx,
    /// Average of `q_x` over a rectangle.
    AvgQx,
    /// Average of `q_x` along a boundary segment.
    LineAvgQx,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Region {
    Rect(Rect),
    Segment([Point; 2]),
}

/// Continuous linear functional `scale · (1/|ω|) ∫_ω (integrand)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QoIDef {
    pub kind: QoIKind,
    pub region: Region,
    pub scale: f64,
}

impl QoIDef {
    pub fn new(kind: QoIKind, region: Region) -> Result<Self> {
        let q = Self { kind, region, scale: 1.0 };
        match (kind, region) {
            (QoIKind::LineAvgQx, Region::Segment(_)) => {}
            (QoIKind::LineAvgQx, _) => return Err(Error::InvalidArgument("line QoI needs a segment".into())),
            (_, Region::Rect(_)) => {}
            _ => return Err(Error::InvalidArgument("volume QoI needs a rectangle".into())),
        }
        if !(q.measure() > 0.0) {
            return Err(Error::InvalidArgument("QoI region has zero measure".into()));
        }
        Ok(q)
    }

    pub fn avg_u(r: Rect) -> Result<Self> {
        Self::new(QoIKind::AvgU, Region::Rect(r))
    }

    pub fn avg_dudx(r: Rect) -> Result<Self> {
        Self::new(QoIKind::AvgDuDx, Region::Rect(r))
    }

    pub fn avg_qx(r: Rect) -> Result<Self> {
        Self::new(QoIKind::AvgQx, Region::Rect(r))
    }

    pub fn line_avg_qx(a: Point, b: Point) -> Result<Self> {
        Self::new(QoIKind::LineAvgQx, Region::Segment([a, b]))
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { scale: self.scale * alpha, ..self.clone() }
    }

    /// `|ω|`: area or length.
    pub fn measure(&self) -> f64 {
        match self.region {
            Region::Rect(r) => r.width() * r.height(),
            Region::Segment([a, b]) => (b[0] - a[0]).hypot(b[1] - a[1]),
        }
    }

    pub fn check_inside(&self, domain: Rect) -> Result<()> {
        let tol = 1e-12;
        let inside = match self.region {
            Region::Rect(r) => domain.contains([r.x0, r.y0], tol) && domain.contains([r.x1, r.y1], tol),
            Region::Segment([a, b]) => domain.contains(a, tol) && domain.contains(b, tol),
        };
        if inside && matches!(self.region, Region::Rect(r) if r.x1 > r.x0 && r.y1 > r.y0) | !matches!(self.region, Region::Rect(_)) {
            Ok(())
        } else {
            Err(Error::InvalidArgument("QoI region lies outside the domain".into()))
        }
    }
}

/// Physical quadrature points and weights of `ω ∩ K` (weights include the
/// `scale / |ω|` normalization).
#[derive(Clone, Debug)]
pub struct CellRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

/// Quadrature of the QoI region restricted to cell `c`, or `None` if the
/// cell does not meet the region.
pub fn qoi_cell_rule(qoi: &QoIDef, mesh: &Mesh, c: usize, order: usize) -> Result<Option<CellRule>> {
    let norm = qoi.scale / qoi.measure();
    let poly = mesh.cell_points(c);
    match qoi.region {
        Region::Rect(r) => {
            let clipped = clip_to_rect(&poly, r);
            if clipped.len() < 3 || polygon_area(&clipped) <= 1e-15 * polygon_area(&poly) {
                return Ok(None);
            }
            let tri = quadrature(crate::mesh::ElementType::Triangle, order)?;
            let mut points = Vec::new();
            let mut weights = Vec::new();
            for k in 1..clipped.len() - 1 {
                let (a, b, d) = (clipped[0], clipped[k], clipped[k + 1]);
                let e1 = [b[0] - a[0], b[1] - a[1]];
                let e2 = [d[0] - a[0], d[1] - a[1]];
                let jac = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
                if jac == 0.0 {
                    continue;
                }
                for (xi, w) in tri.points.iter().zip(&tri.weights) {
                    points.push([a[0] + e1[0] * xi[0] + e2[0] * xi[1], a[1] + e1[1] * xi[0] + e2[1] * xi[1]]);
                    weights.push(w * jac * norm);
                }
            }
            Ok(Some(CellRule { points, weights }))
        }
        Region::Segment([sa, sb]) => {
            let d = [sb[0] - sa[0], sb[1] - sa[1]];
            let len = d[0].hypot(d[1]);
            let t = [d[0] / len, d[1] / len];
            let eq = edge_quadrature(order)?;
            let mut points = Vec::new();
            let mut weights = Vec::new();
            for &e in mesh.cell_edges(c) {
                if !mesh.is_boundary_edge(e) {
                    continue;
                }
                let [ea, eb] = mesh.edge(e);
                let (pa, pb) = (mesh.vertex(ea), mesh.vertex(eb));
                // collinear with the segment?
                let off = |p: Point| ((p[0] - sa[0]) * t[1] - (p[1] - sa[1]) * t[0]).abs();
                if off(pa) > 1e-12 || off(pb) > 1e-12 {
                    continue;
                }
                let s = |p: Point| (p[0] - sa[0]) * t[0] + (p[1] - sa[1]) * t[1];
                let (s0, s1) = {
                    let (u, v) = (s(pa), s(pb));
                    (u.min(v).max(0.0), u.max(v).min(len))
                };
                if s1 - s0 <= 1e-14 * len {
                    continue;
                }
                for (&r, &w) in eq.points.iter().zip(&eq.weights) {
                    let sv = s0 + r * (s1 - s0);
                    points.push([sa[0] + sv * t[0], sa[1] + sv * t[1]]);
                    weights.push(w * (s1 - s0) * norm);
                }
            }
            Ok(if points.is_empty() { None } else { Some(CellRule { points, weights }) })
        }
    }
}

/// Sutherland-Hodgman clipping of a convex polygon against a rectangle.
pub fn clip_to_rect(poly: &[Point], r: Rect) -> Vec<Point> {
    let mut out = poly.to_vec();
    // (axis, bound, keep_greater)
    for (axis, bound, greater) in [(0, r.x0, true), (0, r.x1, false), (1, r.y0, true), (1, r.y1, false)] {
        if out.is_empty() {
            break;
        }
        let inside = |p: &Point| if greater { p[axis] >= bound } else { p[axis] <= bound };
        let input = std::mem::take(&mut out);
        for i in 0..input.len() {
            let cur = input[i];
            let prev = input[(i + input.len() - 1) % input.len()];
            let (ci, pi) = (inside(&cur), inside(&prev));
            if ci != pi {
                let t = (bound - prev[axis]) / (cur[axis] - prev[axis]);
                let mut x = [prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])];
                x[axis] = bound;
                out.push(x);
            }
            if ci {
                out.push(cur);
            }
        }
    }
    out
}

/// Order used to integrate QoIs of a field of degree `p`.
pub(crate) fn qoi_order(p: usize) -> usize {
    (2 * p + 10).min(crate::spaces::quadrature::MAX_ORDER)
}

/// `Q(u^h, q^h)` of a trial-space field.
pub fn qoi_apply(qoi: &QoIDef, mesh: &Mesh, field: &SolutionField) -> Result<f64> {
    qoi.check_inside(mesh.domain())?;
    let order = qoi_order(field.space.degree());
    let mut total = 0.0;
    for c in 0..mesh.num_cells() {
        let Some(rule) = qoi_cell_rule(qoi, mesh, c, order)? else { continue };
        let frame = CellFrame::new(mesh, c, &field.space)?;
        let xi: Vec<Point> = rule.points.iter().map(|&x| frame.map.inverse(x)).collect();
        let pts = frame.points(&xi);
        let tr = TrialEval::new(&field.space, &frame, &pts);
        let local = field.local(c);
        for q in 0..pts.len() {
            let (u, g, f, _) = tr.combine(&local, q);
            let val = match qoi.kind {
                QoIKind::AvgU => u,
                QoIKind::AvgDuDx => g[0],
                QoIKind::AvgQx | QoIKind::LineAvgQx => f[0],
            };
            total += rule.weights[q] * val;
        }
    }
    Ok(total)
}

/// `Q` applied to every trial basis function of a space, over its free dofs.
pub fn qoi_trial_vector(qoi: &QoIDef, mesh: &Mesh, space: &crate::spaces::TrialSpace) -> Result<Vec<f64>> {
    qoi.check_inside(mesh.domain())?;
    let order = qoi_order(space.degree());
    let mut out = vec![0.0; space.num_free()];
    for c in 0..mesh.num_cells() {
        let Some(rule) = qoi_cell_rule(qoi, mesh, c, order)? else { continue };
        let frame = CellFrame::new(mesh, c, space)?;
        let xi: Vec<Point> = rule.points.iter().map(|&x| frame.map.inverse(x)).collect();
        let pts = frame.points(&xi);
        let tr = TrialEval::new(space, &frame, &pts);
        let dofs = space.cell_dofs(c);
        for q in 0..pts.len() {
            let w = rule.weights[q];
            for (i, &d) in dofs.iter().enumerate() {
                let f = space.free_index(d);
                if f == crate::spaces::NOT_FREE {
                    continue;
                }
                let val = if i < tr.ns {
                    match qoi.kind {
                        QoIKind::AvgU => tr.u[q * tr.ns + i],
                        QoIKind::AvgDuDx => tr.grad_u[q * tr.ns + i][0],
                        _ => 0.0,
                    }
                } else {
                    match qoi.kind {
                        QoIKind::AvgQx | QoIKind::LineAvgQx => tr.flux[q * tr.nf + (i - tr.ns)][0],
                        _ => 0.0,
                    }
                };
                out[f] += w * val;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_square_against_quadrant() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let c = clip_to_rect(&sq, Rect::new(0.5, 0.5, 1.0, 1.0));
        assert!((polygon_area(&c) - 0.25).abs() < 1e-15);
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let c = clip_to_rect(&tri, Rect::new(0.25, 0.0, 1.0, 1.0));
        assert!((polygon_area(&c) - 0.5 * 0.75 * 0.75).abs() < 1e-15);
        assert!(clip_to_rect(&tri, Rect::new(0.6, 0.6, 1.0, 1.0)).len() < 3);
    }

    #[test]
    fn region_validation() {
        assert!(QoIDef::new(QoIKind::AvgU, Region::Segment([[0.0, 0.0], [0.0, 1.0]])).is_err());
        assert!(QoIDef::line_avg_qx([0.0, 0.5], [0.0, 0.5]).is_err());
        let q = QoIDef::avg_u(Rect::new(0.5, 0.5, 1.5, 1.0)).unwrap();
        assert!(q.check_inside(Rect::UNIT).is_err());
    }
}
