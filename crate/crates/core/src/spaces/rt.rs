use crate::dense::{solve_general, DenseMatrix};
use crate::mesh::ElementType;
use crate::spaces::quadrature::{edge_quadrature, gauss_legendre, quadrature};
use crate::{Error, Point, Result};

/// Largest supported Raviart-Thomas index.
pub const MAX_RT_INDEX: usize = 4;

/// Raviart-Thomas basis of index `k` (normal moments of degree `k - 1` on each
/// edge) built directly on one physical triangle.
///
/// Edge degrees of freedom use the global edge orientation: the edge between
/// vertex ids `a < b` is traversed from `a` to `b` and its reference normal is
/// the tangent rotated clockwise. Two neighbors therefore produce the same
/// functionals on a shared edge and the assembled field has a single-valued
/// normal trace without any sign bookkeeping.
///
/// Local dof order: `k` moments on local edge 0, 1, 2, then `k (k - 1)`
/// interior moments.
#[derive(Clone, Debug)]
pub struct RtElementBasis {
    index: usize,
    center: Point,
    scale: f64,
    /// Spanning fields: `(component or radial, exponents)`.
    span: Vec<Span>,
    /// `coeffs[(s, i)]`: weight of spanning field `s` in basis function `i`.
    coeffs: DenseMatrix,
}

#[derive(Clone, Copy, Debug)]
enum Span {
    /// `m(x̃) e_c`
    Axis(usize, (i32, i32)),
    /// `m(x̃) x̃` with `m` homogeneous
    Radial((i32, i32)),
}

pub fn rt_dim(index: usize) -> usize {
    index * (index + 2)
}

impl RtElementBasis {
    /// `vertices`: the counter-clockwise triangle; `ids`: global vertex ids
    /// (only their ordering matters).
    pub fn new(index: usize, vertices: [Point; 3], ids: [usize; 3]) -> Result<Self> {
        if index == 0 || index > MAX_RT_INDEX {
            return Err(Error::Unsupported(format!("Raviart-Thomas index {index} (supported: 1..={MAX_RT_INDEX})")));
        }
        let center = [
            (vertices[0][0] + vertices[1][0] + vertices[2][0]) / 3.0,
            (vertices[0][1] + vertices[1][1] + vertices[2][1]) / 3.0,
        ];
        let scale = (0..3)
            .map(|i| {
                let d = [vertices[i][0] - center[0], vertices[i][1] - center[1]];
                d[0].hypot(d[1])
            })
            .fold(0.0, f64::max);
        let r = index as i32 - 1;
        let mut span = Vec::with_capacity(rt_dim(index));
        for c in 0..2 {
            for d in 0..=r {
                for b in 0..=d {
                    span.push(Span::Axis(c, (d - b, b)));
                }
            }
        }
        for b in 0..=r {
            span.push(Span::Radial((r - b, b)));
        }
        let n = span.len();
        debug_assert_eq!(n, rt_dim(index));

        let mut basis = Self { index, center, scale, span, coeffs: DenseMatrix::identity(n) };
        // Degrees of freedom applied to the spanning fields.
        let mut dofs = DenseMatrix::zeros(n, n);
        let mut row = 0;
        let (gl, _) = gauss_legendre(index);
        let moment_nodes: Vec<f64> = gl.iter().map(|t| 0.5 * (t + 1.0)).collect();
        let eq = edge_quadrature(2 * index + 2)?;
        for k in 0..3 {
            let (mut a, mut b) = (vertices[k], vertices[(k + 1) % 3]);
            if ids[k] > ids[(k + 1) % 3] {
                std::mem::swap(&mut a, &mut b);
            }
            let t = [b[0] - a[0], b[1] - a[1]];
            let len = t[0].hypot(t[1]);
            let nrm = [t[1] / len, -t[0] / len];
            for j in 0..index {
                for (&s, &w) in eq.points.iter().zip(&eq.weights) {
                    let x = [a[0] + s * t[0], a[1] + s * t[1]];
                    let l = lagrange_1d(&moment_nodes, j, s);
                    for (col, f) in basis.span_values(x).iter().enumerate() {
                        dofs.row_mut(row)[col] += w * l * (f[0] * nrm[0] + f[1] * nrm[1]);
                    }
                }
                row += 1;
            }
        }
        if index > 1 {
            let q = quadrature(ElementType::Triangle, 2 * index)?;
            let e1 = [vertices[1][0] - vertices[0][0], vertices[1][1] - vertices[0][1]];
            let e2 = [vertices[2][0] - vertices[0][0], vertices[2][1] - vertices[0][1]];
            for c in 0..2 {
                for d in 0..(index as i32 - 1) {
                    for bb in 0..=d {
                        let e = (d - bb, bb);
                        for (xi, &w) in q.points.iter().zip(&q.weights) {
                            let x = [
                                vertices[0][0] + e1[0] * xi[0] + e2[0] * xi[1],
                                vertices[0][1] + e1[1] * xi[0] + e2[1] * xi[1],
                            ];
                            let m = basis.monomial(e, x);
                            for (col, f) in basis.span_values(x).iter().enumerate() {
                                // weight 2w: reference area 1/2, averaged over the cell
                                dofs.row_mut(row)[col] += 2.0 * w * m * f[c];
                            }
                        }
                        row += 1;
                    }
                }
            }
        }
        debug_assert_eq!(row, n);
        basis.coeffs = solve_general(&dofs, &DenseMatrix::identity(n))
            .ok_or_else(|| Error::InvalidMesh("degenerate triangle in Raviart-Thomas construction".into()))?;
        Ok(basis)
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn dim(&self) -> usize {
        self.span.len()
    }

    pub fn dofs_per_edge(&self) -> usize {
        self.index
    }

    fn local(&self, x: Point) -> Point {
        [(x[0] - self.center[0]) / self.scale, (x[1] - self.center[1]) / self.scale]
    }

    fn monomial(&self, e: (i32, i32), x: Point) -> f64 {
        let l = self.local(x);
        l[0].powi(e.0) * l[1].powi(e.1)
    }

    fn span_values(&self, x: Point) -> Vec<Point> {
        let l = self.local(x);
        self.span
            .iter()
            .map(|s| match *s {
                Span::Axis(c, (a, b)) => {
                    let m = l[0].powi(a) * l[1].powi(b);
                    if c == 0 {
                        [m, 0.0]
                    } else {
                        [0.0, m]
                    }
                }
                Span::Radial((a, b)) => {
                    let m = l[0].powi(a) * l[1].powi(b);
                    [m * l[0], m * l[1]]
                }
            })
            .collect()
    }

    fn span_divergences(&self, x: Point) -> Vec<f64> {
        let l = self.local(x);
        self.span
            .iter()
            .map(|s| match *s {
                Span::Axis(c, (a, b)) => {
                    let d = if c == 0 {
                        if a > 0 {
                            a as f64 * l[0].powi(a - 1) * l[1].powi(b)
                        } else {
                            0.0
                        }
                    } else if b > 0 {
                        b as f64 * l[0].powi(a) * l[1].powi(b - 1)
                    } else {
                        0.0
                    };
                    d / self.scale
                }
                // div(m x̃) = (deg m + 2) m for homogeneous m
                Span::Radial((a, b)) => (a + b + 2) as f64 * l[0].powi(a) * l[1].powi(b) / self.scale,
            })
            .collect()
    }

    /// Vector values and divergences of every basis function at physical `x`.
    pub fn eval_into(&self, x: Point, values: &mut [Point], divs: &mut [f64]) {
        let sv = self.span_values(x);
        let sd = self.span_divergences(x);
        let n = self.dim();
        values[..n].iter_mut().for_each(|v| *v = [0.0, 0.0]);
        divs[..n].iter_mut().for_each(|d| *d = 0.0);
        for s in 0..n {
            let row = self.coeffs.row(s);
            for i in 0..n {
                let c = row[i];
                values[i][0] += c * sv[s][0];
                values[i][1] += c * sv[s][1];
                divs[i] += c * sd[s];
            }
        }
    }

    pub fn eval(&self, x: Point) -> (Vec<Point>, Vec<f64>) {
        let mut v = vec![[0.0; 2]; self.dim()];
        let mut d = vec![0.0; self.dim()];
        self.eval_into(x, &mut v, &mut d);
        (v, d)
    }
}

fn lagrange_1d(nodes: &[f64], j: usize, s: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != j)
        .map(|(_, &xi)| (s - xi) / (nodes[j] - xi))
        .product()
}

/// Raviart-Thomas basis of index `k` on the reference triangle, evaluated at
/// reference points: `(values, divergences)` point-major.
pub fn rt_basis(k: usize, points: &[Point]) -> Result<(Vec<Point>, Vec<f64>)> {
    if k > 3 {
        return Err(Error::Unsupported(format!("Raviart-Thomas index {k} (supported: 1..=3)")));
    }
    let b = RtElementBasis::new(k, [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [0, 1, 2])?;
    let n = b.dim();
    let mut values = vec![[0.0; 2]; n * points.len()];
    let mut divs = vec![0.0; n * points.len()];
    for (q, &p) in points.iter().enumerate() {
        b.eval_into(p, &mut values[q * n..(q + 1) * n], &mut divs[q * n..(q + 1) * n]);
    }
    Ok((values, divs))
}
