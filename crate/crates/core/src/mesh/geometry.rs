use super::{cross, norm, polygon_area, sub, ElementType};
use crate::Point;

/// Reference-to-physical map of a cell: affine for triangles, bilinear for
/// quadrilaterals (reference square `[-1, 1]²`).
#[derive(Clone, Debug)]
pub enum ElementMap {
    Affine { origin: Point, jac: [[f64; 2]; 2] },
    Bilinear { vertices: [Point; 4] },
}

impl ElementMap {
    pub fn new(element_type: ElementType, vertices: &[Point]) -> Self {
        match element_type {
            ElementType::Triangle => {
                let e1 = sub(vertices[1], vertices[0]);
                let e2 = sub(vertices[2], vertices[0]);
                ElementMap::Affine { origin: vertices[0], jac: [[e1[0], e2[0]], [e1[1], e2[1]]] }
            }
            ElementType::Quadrilateral => {
                ElementMap::Bilinear { vertices: [vertices[0], vertices[1], vertices[2], vertices[3]] }
            }
        }
    }

    pub fn map(&self, xi: Point) -> Point {
        match self {
            ElementMap::Affine { origin, jac } => [
                origin[0] + jac[0][0] * xi[0] + jac[0][1] * xi[1],
                origin[1] + jac[1][0] * xi[0] + jac[1][1] * xi[1],
            ],
            ElementMap::Bilinear { vertices } => {
                let n = bilinear_shape(xi);
                let mut x = [0.0; 2];
                for (ni, v) in n.iter().zip(vertices) {
                    x[0] += ni * v[0];
                    x[1] += ni * v[1];
                }
                x
            }
        }
    }

    /// `J[i][j] = ∂x_i / ∂ξ_j`
    pub fn jacobian(&self, xi: Point) -> [[f64; 2]; 2] {
        match self {
            ElementMap::Affine { jac, .. } => *jac,
            ElementMap::Bilinear { vertices } => {
                let (s, t) = (xi[0], xi[1]);
                let dn_ds = [-(1.0 - t) / 4.0, (1.0 - t) / 4.0, (1.0 + t) / 4.0, -(1.0 + t) / 4.0];
                let dn_dt = [-(1.0 - s) / 4.0, -(1.0 + s) / 4.0, (1.0 + s) / 4.0, (1.0 - s) / 4.0];
                let mut j = [[0.0; 2]; 2];
                for k in 0..4 {
                    j[0][0] += dn_ds[k] * vertices[k][0];
                    j[0][1] += dn_dt[k] * vertices[k][0];
                    j[1][0] += dn_ds[k] * vertices[k][1];
                    j[1][1] += dn_dt[k] * vertices[k][1];
                }
                j
            }
        }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, ElementMap::Affine { .. })
    }

    /// Reference coordinates of a physical point (Newton iteration for the
    /// bilinear map).
    pub fn inverse(&self, x: Point) -> Point {
        match self {
            ElementMap::Affine { origin, jac } => {
                let inv = inverse2(jac);
                let d = sub(x, *origin);
                [inv[0][0] * d[0] + inv[0][1] * d[1], inv[1][0] * d[0] + inv[1][1] * d[1]]
            }
            ElementMap::Bilinear { .. } => {
                let mut xi = [0.0, 0.0];
                for _ in 0..50 {
                    let r = sub(self.map(xi), x);
                    let inv = inverse2(&self.jacobian(xi));
                    let dxi = [inv[0][0] * r[0] + inv[0][1] * r[1], inv[1][0] * r[0] + inv[1][1] * r[1]];
                    xi[0] -= dxi[0];
                    xi[1] -= dxi[1];
                    if dxi[0].abs() + dxi[1].abs() < 1e-15 {
                        break;
                    }
                }
                xi
            }
        }
    }
}

#[inline]
pub(crate) fn det2(j: &[[f64; 2]; 2]) -> f64 {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

#[inline]
pub(crate) fn inverse2(j: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let d = det2(j);
    [[j[1][1] / d, -j[0][1] / d], [-j[1][0] / d, j[0][0] / d]]
}

#[inline]
fn bilinear_shape(xi: Point) -> [f64; 4] {
    let (s, t) = (xi[0], xi[1]);
    [
        (1.0 - s) * (1.0 - t) / 4.0,
        (1.0 + s) * (1.0 - t) / 4.0,
        (1.0 + s) * (1.0 + t) / 4.0,
        (1.0 - s) * (1.0 + t) / 4.0,
    ]
}

/// Size, area and edge data of one cell.
#[derive(Clone, Debug)]
pub struct ElementGeometry {
    /// `diam(K)`: largest vertex-to-vertex distance.
    pub diameter: f64,
    pub area: f64,
    /// Outward unit normal of each local edge.
    pub normals: Vec<Point>,
    pub edge_lengths: Vec<f64>,
}

impl ElementGeometry {
    pub fn new(p: &[Point]) -> Self {
        let n = p.len();
        let mut diameter: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                diameter = diameter.max(norm(sub(p[i], p[j])));
            }
        }
        let mut normals = Vec::with_capacity(n);
        let mut edge_lengths = Vec::with_capacity(n);
        for i in 0..n {
            let t = sub(p[(i + 1) % n], p[i]);
            let len = norm(t);
            normals.push([t[1] / len, -t[0] / len]);
            edge_lengths.push(len);
        }
        debug_assert!(cross(sub(p[1], p[0]), sub(p[2], p[1])) > 0.0);
        Self { diameter, area: polygon_area(p), normals, edge_lengths }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_geometry() {
        let g = ElementGeometry::new(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        assert!((g.diameter - 2f64.sqrt()).abs() < 1e-15);
        assert!((g.area - 1.0).abs() < 1e-15);
        assert_eq!(g.normals[0], [0.0, -1.0]);
        assert_eq!(g.normals[1], [1.0, 0.0]);
    }

    #[test]
    fn right_triangle_geometry() {
        let g = ElementGeometry::new(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!((g.diameter - 2f64.sqrt()).abs() < 1e-15);
        assert!((g.area - 0.5).abs() < 1e-15);
    }

    #[test]
    fn skewed_quad_normals_are_unit() {
        let g = ElementGeometry::new(&[[0.0, 0.0], [1.2, 0.1], [1.0, 0.9], [-0.1, 1.3]]);
        for n in &g.normals {
            assert!((norm(*n) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn bilinear_inverse_roundtrip() {
        let m = ElementMap::new(ElementType::Quadrilateral, &[[0.0, 0.0], [1.2, 0.1], [1.0, 0.9], [-0.1, 1.3]]);
        for xi in [[0.3, -0.7], [-0.9, 0.95], [0.0, 0.0]] {
            let back = m.inverse(m.map(xi));
            assert!((back[0] - xi[0]).abs() < 1e-13 && (back[1] - xi[1]).abs() < 1e-13);
        }
    }
}
