use serde::Serialize;

use crate::mesh::Rect;
use crate::spaces::gauss_legendre;

/// `g(t) = t + (e^{kt} − 1)/(1 − e^k)`, evaluated without overflow for large
/// `|k|`. Vanishes at `t = 0` and `t = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LayerFactor {
    pub k: f64,
}

impl LayerFactor {
    pub fn new(k: f64) -> Self {
        Self { k }
    }

    /// `e^{kt}/(1 − e^k)`
    fn a(&self, t: f64) -> f64 {
        let k = self.k;
        if k > 0.0 {
            (k * (t - 1.0)).exp() / (-k).exp_m1()
        } else {
            (k * t).exp() / -k.exp_m1()
        }
    }

    /// `1/(1 − e^k)`
    fn c(&self) -> f64 {
        let k = self.k;
        if k > 0.0 {
            (-k).exp() / (-k).exp_m1()
        } else {
            1.0 / -k.exp_m1()
        }
    }

    pub fn g(&self, t: f64) -> f64 {
        t + self.a(t) - self.c()
    }

    pub fn dg(&self, t: f64) -> f64 {
        1.0 + self.k * self.a(t)
    }

    pub fn d2g(&self, t: f64) -> f64 {
        self.k * self.k * self.a(t)
    }

    /// `∫_a^b g`
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        0.5 * (b * b - a * a) + (self.a(b) - self.a(a)) / self.k - self.c() * (b - a)
    }
}

fn gl_on(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    rule.0.iter().zip(&rule.1).map(|(x, w)| w * f(m + r * x)).sum::<f64>() * r
}

fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, lo: &(Vec<f64>, Vec<f64>), hi: &(Vec<f64>, Vec<f64>), depth: u32) -> f64 {
    let coarse = gl_on(f, a, b, lo);
    let fine = gl_on(f, a, b, hi);
    if (fine - coarse).abs() <= tol || depth >= 40 {
        return fine;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, lo, hi, depth + 1) + adapt(f, m, b, 0.5 * tol, lo, hi, depth + 1)
}

/// Adaptive Gauss-Legendre quadrature (10 vs 20 points, bisection) to an
/// absolute tolerance.
pub fn adaptive_integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let lo = gauss_legendre(10);
    let hi = gauss_legendre(20);
    adapt(f, a, b, tol, &lo, &hi, 0)
}

/// Iterated [`adaptive_integrate`] over a rectangle.
pub fn adaptive_integrate_2d(f: &dyn Fn([f64; 2]) -> f64, r: Rect, tol: f64) -> f64 {
    let inner_tol = 0.1 * tol / r.width().max(1e-300);
    let outer = |x: f64| adaptive_integrate(&|y| f([x, y]), r.y0, r.y1, inner_tol);
    adaptive_integrate(&outer, r.x0, r.x1, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_factor_roots_and_moderate_k() {
        for k in [-50.0, -1.0, 0.5, 10.0, 100.0, 200.0, 2000.0] {
            let g = LayerFactor::new(k);
            assert!(g.g(0.0).abs() < 1e-14, "k = {k}");
            assert!(g.g(1.0).abs() < 1e-14, "k = {k}");
        }
        let g = LayerFactor::new(3.0);
        let direct = |t: f64| t + ((3.0 * t).exp() - 1.0) / (1.0 - 3.0f64.exp());
        for t in [0.1, 0.5, 0.9] {
            assert!((g.g(t) - direct(t)).abs() < 1e-14);
        }
    }

    #[test]
    fn adaptive_quadrature_polynomial_and_peak() {
        let v = adaptive_integrate(&|x| x.powi(5), 0.0, 2.0, 1e-13);
        assert!((v - 64.0 / 6.0).abs() < 1e-12);
        let v = adaptive_integrate(&|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-10);
        assert!((v - 2.0 * (1.0 / 1e-2) * (1.0f64 / 1e-2).atan()).abs() < 1e-8);
        let v = adaptive_integrate_2d(&|p| p[0] * p[1] * p[1], Rect::new(0.0, 0.0, 1.0, 3.0), 1e-12);
        assert!((v - 4.5).abs() < 1e-12);
    }
}
