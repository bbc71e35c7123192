use crate::mesh::ElementType;
use crate::{Error, Point, Result};

/// Highest polynomial order a rule can be requested for.
pub const MAX_ORDER: usize = 40;

/// Points and positive weights on a reference cell.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

/// Points and weights on the unit interval `[0, 1]`.
#[derive(Clone, Debug)]
pub struct EdgeQuadrature {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

impl EdgeQuadrature {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev-like initial guess, refined by Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_and_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        return Err(Error::Unsupported(format!("quadrature order {order} exceeds the maximum {MAX_ORDER}")));
    }
    Ok(())
}

/// Rule on `[0, 1]` exact for polynomials of degree `order`.
pub fn edge_quadrature(order: usize) -> Result<EdgeQuadrature> {
    check_order(order)?;
    let n = order / 2 + 1;
    let (x, w) = gauss_legendre(n);
    Ok(EdgeQuadrature {
        points: x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        weights: w.iter().map(|w| 0.5 * w).collect(),
    })
}

/// Rule on the reference cell exact for polynomials of total degree `order`
/// (tensor Gauss-Legendre on the square, collapsed Gauss-Legendre on the
/// triangle).
pub fn quadrature(element_type: ElementType, order: usize) -> Result<QuadratureRule> {
    check_order(order)?;
    match element_type {
        ElementType::Quadrilateral => {
            let n = order / 2 + 1;
            let (x, w) = gauss_legendre(n);
            let mut points = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for j in 0..n {
                for i in 0..n {
                    points.push([x[i], x[j]]);
                    weights.push(w[i] * w[j]);
                }
            }
            Ok(QuadratureRule { points, weights })
        }
        ElementType::Triangle => {
            // (s, t) ∈ [0,1]², x = s(1 − t), y = t, dx dy = (1 − t) ds dt.
            let ns = order / 2 + 1;
            let nt = (order + 1) / 2 + 1;
            let (xs, ws) = gauss_legendre(ns);
            let (xt, wt) = gauss_legendre(nt);
            let mut points = Vec::with_capacity(ns * nt);
            let mut weights = Vec::with_capacity(ns * nt);
            for j in 0..nt {
                let t = 0.5 * (xt[j] + 1.0);
                for i in 0..ns {
                    let s = 0.5 * (xs[i] + 1.0);
                    points.push([s * (1.0 - t), t]);
                    weights.push(0.25 * ws[i] * wt[j] * (1.0 - t));
                }
            }
            Ok(QuadratureRule { points, weights })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quad_odd_monomial_vanishes() {
        let q = quadrature(ElementType::Quadrilateral, 5).unwrap();
        let s: f64 = q.points.iter().zip(&q.weights).map(|(p, w)| w * p[0].powi(2) * p[1].powi(3)).sum();
        assert!(s.abs() < 1e-14);
        let x2: f64 = q.points.iter().zip(&q.weights).map(|(p, w)| w * p[0].powi(2) * p[1].powi(2)).sum();
        assert!((x2 - 4.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn triangle_area() {
        let q = quadrature(ElementType::Triangle, 2).unwrap();
        assert!((q.weights.iter().sum::<f64>() - 0.5).abs() < 1e-15);
        assert!(q.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn triangle_monomials_exact() {
        // ∫_T x^a y^b = a! b! / (a + b + 2)!
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        for order in 1..=12u32 {
            let q = quadrature(ElementType::Triangle, order as usize).unwrap();
            for a in 0..=order {
                let b = order - a;
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                let s: f64 = q
                    .points
                    .iter()
                    .zip(&q.weights)
                    .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                    .sum();
                assert!((s - exact).abs() < 1e-14, "order {order} x^{a} y^{b}");
            }
        }
    }

    #[test]
    fn edge_rule_monomial() {
        let q = edge_quadrature(5).unwrap();
        let s: f64 = q.points.iter().zip(&q.weights).map(|(t, w)| w * t.powi(5)).sum();
        assert!((s - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_excessive_order() {
        assert!(quadrature(ElementType::Triangle, MAX_ORDER + 1).is_err());
        assert!(edge_quadrature(MAX_ORDER + 1).is_err());
    }
}
