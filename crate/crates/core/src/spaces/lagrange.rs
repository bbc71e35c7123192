use crate::dense::{solve_general, DenseMatrix};
use crate::mesh::ElementType;
use crate::{Error, Point, Result};

/// Highest polynomial degree of any basis.
pub const MAX_DEGREE: usize = 4;

/// Nodal Lagrange basis on a reference cell: total degree on the triangle,
/// tensor degree on the square.
///
/// Node order: vertices, then the interior nodes of each local edge `k`
/// (running from vertex `k` to vertex `k + 1`), then cell-interior nodes.
#[derive(Clone, Debug)]
pub struct LagrangeBasis {
    element_type: ElementType,
    degree: usize,
    nodes: Vec<Point>,
    exponents: Vec<(i32, i32)>,
    /// `coeffs[(k, i)]`: coefficient of monomial `k` in basis function `i`.
    coeffs: DenseMatrix,
}

/// Basis values and reference gradients at a set of points, stored point-major.
#[derive(Clone, Debug)]
pub struct BasisTable {
    pub dim: usize,
    pub values: Vec<f64>,
    pub grads: Vec<Point>,
}

impl BasisTable {
    pub fn num_points(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.values.len() / self.dim
        }
    }

    pub fn values_at(&self, q: usize) -> &[f64] {
        &self.values[q * self.dim..(q + 1) * self.dim]
    }

    pub fn grads_at(&self, q: usize) -> &[Point] {
        &self.grads[q * self.dim..(q + 1) * self.dim]
    }
}

impl LagrangeBasis {
    pub fn new(element_type: ElementType, degree: usize) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(Error::Unsupported(format!("Lagrange degree {degree} (supported: 0..={MAX_DEGREE})")));
        }
        let nodes = lagrange_nodes(element_type, degree);
        let exponents: Vec<(i32, i32)> = match element_type {
            ElementType::Triangle => (0..=degree as i32)
                .flat_map(|d| (0..=d).map(move |b| (d - b, b)))
                .collect(),
            ElementType::Quadrilateral => (0..=degree as i32)
                .flat_map(|b| (0..=degree as i32).map(move |a| (a, b)))
                .collect(),
        };
        debug_assert_eq!(exponents.len(), nodes.len());
        let n = nodes.len();
        let vander = DenseMatrix::from_fn(n, n, |i, k| monomial(exponents[k], nodes[i]));
        // V C = I with V[i][k] = m_k(x_i)
        let coeffs = solve_general(&vander, &DenseMatrix::identity(n))
            .ok_or_else(|| Error::Unsupported(format!("singular Lagrange node set at degree {degree}")))?;
        Ok(Self { element_type, degree, nodes, exponents, coeffs })
    }

    pub fn element_type(&self) -> ElementType {
        self.element_type
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    /// Number of nodes strictly inside each edge.
    pub fn nodes_per_edge(&self) -> usize {
        self.degree.saturating_sub(1)
    }

    pub fn num_interior(&self) -> usize {
        let nv = self.element_type.num_vertices();
        if self.degree == 0 {
            return 1;
        }
        self.dim() - nv - nv * self.nodes_per_edge()
    }

    /// Local indices of the nodes lying on local edge `k` (closed edge,
    /// ordered from vertex `k` to vertex `k + 1`).
    pub fn edge_nodes(&self, k: usize) -> Vec<usize> {
        if self.degree == 0 {
            return Vec::new();
        }
        let nv = self.element_type.num_vertices();
        let ne = self.nodes_per_edge();
        let mut out = Vec::with_capacity(ne + 2);
        out.push(k);
        out.extend((0..ne).map(|j| nv + k * ne + j));
        out.push((k + 1) % nv);
        out
    }

    /// Values and reference gradients of every basis function at `xi`.
    pub fn eval_into(&self, xi: Point, values: &mut [f64], grads: &mut [Point]) {
        let n = self.dim();
        values[..n].iter_mut().for_each(|v| *v = 0.0);
        grads[..n].iter_mut().for_each(|g| *g = [0.0, 0.0]);
        for (k, &e) in self.exponents.iter().enumerate() {
            let m = monomial(e, xi);
            let (dx, dy) = monomial_grad(e, xi);
            let row = self.coeffs.row(k);
            for i in 0..n {
                let c = row[i];
                if c != 0.0 {
                    values[i] += c * m;
                    grads[i][0] += c * dx;
                    grads[i][1] += c * dy;
                }
            }
        }
    }

    pub fn eval(&self, xi: Point) -> (Vec<f64>, Vec<Point>) {
        let mut v = vec![0.0; self.dim()];
        let mut g = vec![[0.0; 2]; self.dim()];
        self.eval_into(xi, &mut v, &mut g);
        (v, g)
    }

    pub fn tabulate(&self, points: &[Point]) -> BasisTable {
        let n = self.dim();
        let mut values = vec![0.0; n * points.len()];
        let mut grads = vec![[0.0; 2]; n * points.len()];
        for (q, &p) in points.iter().enumerate() {
            self.eval_into(p, &mut values[q * n..(q + 1) * n], &mut grads[q * n..(q + 1) * n]);
        }
        BasisTable { dim: n, values, grads }
    }
}

/// Tabulates the degree-`p` Lagrange basis at reference points.
pub fn lagrange_basis(element_type: ElementType, p: usize, points: &[Point]) -> Result<BasisTable> {
    if p == 0 {
        return Err(Error::Unsupported("trial Lagrange degree must be at least 1".into()));
    }
    Ok(LagrangeBasis::new(element_type, p)?.tabulate(points))
}

fn lagrange_nodes(element_type: ElementType, p: usize) -> Vec<Point> {
    let rv = element_type.reference_vertices();
    let nv = rv.len();
    if p == 0 {
        let c = rv.iter().fold([0.0, 0.0], |a, v| [a[0] + v[0] / nv as f64, a[1] + v[1] / nv as f64]);
        return vec![c];
    }
    let mut nodes: Vec<Point> = rv.to_vec();
    for k in 0..nv {
        let (a, b) = (rv[k], rv[(k + 1) % nv]);
        for j in 1..p {
            let t = j as f64 / p as f64;
            nodes.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    let pf = p as f64;
    match element_type {
        ElementType::Triangle => {
            for j in 1..p {
                for i in 1..p {
                    if i + j < p {
                        nodes.push([i as f64 / pf, j as f64 / pf]);
                    }
                }
            }
        }
        ElementType::Quadrilateral => {
            for j in 1..p {
                for i in 1..p {
                    nodes.push([-1.0 + 2.0 * i as f64 / pf, -1.0 + 2.0 * j as f64 / pf]);
                }
            }
        }
    }
    nodes
}

#[inline]
fn monomial((a, b): (i32, i32), x: Point) -> f64 {
    x[0].powi(a) * x[1].powi(b)
}

#[inline]
fn monomial_grad((a, b): (i32, i32), x: Point) -> (f64, f64) {
    let dx = if a > 0 { a as f64 * x[0].powi(a - 1) * x[1].powi(b) } else { 0.0 };
    let dy = if b > 0 { b as f64 * x[0].powi(a) * x[1].powi(b - 1) } else { 0.0 };
    (dx, dy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn bilinear_at_center() {
        let t = lagrange_basis(ElementType::Quadrilateral, 1, &[[0.0, 0.0]]).unwrap();
        for v in t.values_at(0) {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn nodal_delta_property() {
        for et in [ElementType::Triangle, ElementType::Quadrilateral] {
            for p in 1..=MAX_DEGREE {
                let b = LagrangeBasis::new(et, p).unwrap();
                let t = b.tabulate(b.nodes());
                for (q, _) in b.nodes().iter().enumerate() {
                    for (i, v) in t.values_at(q).iter().enumerate() {
                        let expect = if i == q { 1.0 } else { 0.0 };
                        assert!((v - expect).abs() < 1e-11, "{et:?} p={p} node {q} fn {i}: {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for p in 1..=MAX_DEGREE {
            let b = LagrangeBasis::new(ElementType::Quadrilateral, p).unwrap();
            for _ in 0..10 {
                let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let (v, g) = b.eval(x);
                assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-13);
                let gs = g.iter().fold([0.0, 0.0], |a, g| [a[0] + g[0], a[1] + g[1]]);
                assert!(gs[0].abs() < 1e-12 && gs[1].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimensions_and_edge_nodes() {
        let t = LagrangeBasis::new(ElementType::Triangle, 3).unwrap();
        assert_eq!(t.dim(), 10);
        assert_eq!(t.num_interior(), 1);
        assert_eq!(t.edge_nodes(2), vec![2, 7, 8, 0]);
        let q = LagrangeBasis::new(ElementType::Quadrilateral, 2).unwrap();
        assert_eq!(q.dim(), 9);
        assert_eq!(q.num_interior(), 1);
        let nodes = q.nodes();
        for k in 0..4 {
            let e = q.edge_nodes(k);
            let (a, b) = (nodes[e[0]], nodes[e[2]]);
            let m = nodes[e[1]];
            assert!((m[0] - 0.5 * (a[0] + b[0])).abs() < 1e-15 && (m[1] - 0.5 * (a[1] + b[1])).abs() < 1e-15);
        }
    }

    #[test]
    fn degree_zero_is_constant() {
        let b = LagrangeBasis::new(ElementType::Quadrilateral, 0).unwrap();
        let (v, g) = b.eval([0.3, -0.2]);
        assert_eq!(v, vec![1.0]);
        assert_eq!(g, vec![[0.0, 0.0]]);
    }

    #[test]
    fn rejects_unsupported_degree() {
        assert!(LagrangeBasis::new(ElementType::Triangle, MAX_DEGREE + 1).is_err());
        assert!(lagrange_basis(ElementType::Triangle, 0, &[[0.1, 0.1]]).is_err());
    }
}
