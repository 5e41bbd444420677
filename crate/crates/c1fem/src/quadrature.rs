//! Gauss-Legendre quadrature on `[0,1]` and tensor-product rules on
//! axis-aligned rectangles.

use crate::error::{Error, Result};

/// Largest supported 1D point count.
pub const MAX_POINTS: usize = 30;

/// A Gauss-Legendre rule on the unit interval `(0,1)`.
#[derive(Clone, Debug)]
pub struct QuadRule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadRule1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Legendre polynomial `P_n` and its derivative at `t` in `[-1,1]`.
fn legendre_with_derivative(n: usize, t: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = t;
    for m in 1..n {
        let next = ((2 * m + 1) as f64 * t * p - m as f64 * p_prev) / (m + 1) as f64;
        p_prev = p;
        p = next;
    }
    let dp = n as f64 * (t * p - p_prev) / (t * t - 1.0);
    (p, dp)
}

/// `n`-point Gauss-Legendre rule on `(0,1)`.
///
/// Nodes are the roots of the degree-`n` Legendre polynomial refined by
/// Newton iteration from Chebyshev-point initial guesses; the iteration is
/// capped at 100 steps and asserts convergence to 1e-15.
pub fn gauss1d(n: usize) -> Result<QuadRule1D> {
    if n == 0 || n > MAX_POINTS {
        return Err(Error::QuadPointCount(n));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev estimate for the i-th root in descending order.
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut converged = false;
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, t);
            let step = p / dp;
            t -= step;
            if step.abs() < 1e-15 {
                converged = true;
                break;
            }
        }
        assert!(converged, "Gauss-Legendre Newton iteration failed for n={n}, node {i}");
        let (_, dp) = legendre_with_derivative(n, t);
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        // Map from (-1,1) to (0,1); store in ascending node order.
        nodes[n - 1 - i] = 0.5 * (t + 1.0);
        weights[n - 1 - i] = 0.5 * w;
    }
    Ok(QuadRule1D { nodes, weights })
}

/// An axis-aligned rectangle `[x0, x0+hx] x [y0, y0+hy]`.
#[derive(Clone, Copy, Debug)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub hx: f64,
    pub hy: f64,
}

impl Rect {
    pub fn unit() -> Self {
        Rect {
            x0: 0.0,
            y0: 0.0,
            hx: 1.0,
            hy: 1.0,
        }
    }

    pub fn area(&self) -> f64 {
        self.hx * self.hy
    }
}

/// Tensor-product rule on a rectangle.
#[derive(Clone, Debug)]
pub struct QuadRule2D {
    pub points: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
    /// Points per direction of the generating 1D rule.
    pub points_per_dim: usize,
}

impl QuadRule2D {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Tensor product of a 1D rule with itself, affinely mapped to `rect`.
pub fn tensor_rule(rule: &QuadRule1D, rect: Rect) -> Result<QuadRule2D> {
    if rect.hx <= 0.0 || rect.hy <= 0.0 {
        return Err(Error::DegenerateRect {
            hx: rect.hx,
            hy: rect.hy,
        });
    }
    let n = rule.len();
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    let scale = rect.hx * rect.hy;
    for (xi, wx) in rule.nodes.iter().zip(&rule.weights) {
        for (eta, wy) in rule.nodes.iter().zip(&rule.weights) {
            points.push((rect.x0 + rect.hx * xi, rect.y0 + rect.hy * eta));
            weights.push(scale * wx * wy);
        }
    }
    Ok(QuadRule2D {
        points,
        weights,
        points_per_dim: n,
    })
}

/// `sum_i w_i f(p_i)`; rejects non-finite integrand samples.
pub fn integrate(f: impl Fn(f64, f64) -> f64, rule: &QuadRule2D) -> Result<f64> {
    let mut acc = 0.0;
    for ((x, y), w) in rule.points.iter().zip(&rule.weights) {
        let v = f(*x, *y);
        if !v.is_finite() {
            return Err(Error::NonFiniteSample { x: *x, y: *y });
        }
        acc += w * v;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_point_rule_is_midpoint() {
        let r = gauss1d(1).unwrap();
        assert!((r.nodes[0] - 0.5).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_point_rule_closed_form() {
        // Roots of the degree-2 Legendre polynomial mapped to (0,1).
        let r = gauss1d(2).unwrap();
        let d = 1.0 / (2.0 * 3.0f64.sqrt());
        assert!((r.nodes[0] - (0.5 - d)).abs() < 1e-15);
        assert!((r.nodes[1] - (0.5 + d)).abs() < 1e-15);
    }

    #[test]
    fn point_count_range_enforced() {
        assert!(matches!(gauss1d(0), Err(Error::QuadPointCount(0))));
        assert!(matches!(gauss1d(31), Err(Error::QuadPointCount(31))));
        assert!(gauss1d(30).is_ok());
    }

    #[test]
    fn five_points_integrate_x9() {
        let rule = tensor_rule(&gauss1d(5).unwrap(), Rect::unit()).unwrap();
        let v = integrate(|x, _| x.powi(9), &rule).unwrap();
        assert!((v - 0.1).abs() < 1e-14);
    }

    #[test]
    fn weights_sum_to_interval_length() {
        for n in 1..=MAX_POINTS {
            let r = gauss1d(n).unwrap();
            let s: f64 = r.weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-14, "n={n}: sum={s}");
            assert!(r.weights.iter().all(|w| *w > 0.0), "n={n}: weight not positive");
        }
    }

    #[test]
    fn nodes_symmetric_about_half() {
        for n in 1..=MAX_POINTS {
            let r = gauss1d(n).unwrap();
            for i in 0..n {
                let mirror = r.nodes[n - 1 - i];
                assert!((r.nodes[i] + mirror - 1.0).abs() < 1e-14, "n={n} node {i}");
            }
        }
    }

    #[test]
    fn tensor_rule_examples() {
        let r1 = tensor_rule(&gauss1d(1).unwrap(), Rect::unit()).unwrap();
        assert_eq!(r1.len(), 1);
        assert!((r1.points[0].0 - 0.5).abs() < 1e-15);
        assert!((r1.points[0].1 - 0.5).abs() < 1e-15);
        assert!((r1.weights[0] - 1.0).abs() < 1e-15);

        let big = Rect {
            x0: 0.0,
            y0: 0.0,
            hx: 2.0,
            hy: 2.0,
        };
        let r2 = tensor_rule(&gauss1d(2).unwrap(), big).unwrap();
        let s: f64 = r2.weights.iter().sum();
        assert!((s - 4.0).abs() < 1e-13);

        let r6 = tensor_rule(&gauss1d(6).unwrap(), Rect::unit()).unwrap();
        let v = integrate(|x, y| x.powi(5) * y.powi(5), &r6).unwrap();
        assert!((v - 1.0 / 36.0).abs() < 1e-14);
    }

    #[test]
    fn integrate_examples() {
        let r = tensor_rule(&gauss1d(4).unwrap(), Rect::unit()).unwrap();
        assert!((integrate(|_, _| 1.0, &r).unwrap() - 1.0).abs() < 1e-15);

        // sin^4(pi x) sin^4(pi y): each factor integrates to 3/8.
        let r20 = tensor_rule(&gauss1d(20).unwrap(), Rect::unit()).unwrap();
        let pi = std::f64::consts::PI;
        let v = integrate(|x, y| (pi * x).sin().powi(4) * (pi * y).sin().powi(4), &r20).unwrap();
        assert!((v - 0.140625).abs() < 1e-10);

        // x^2(1-x)^2 y^2(1-y)^2 integrates to (1/30)^2.
        let r6 = tensor_rule(&gauss1d(6).unwrap(), Rect::unit()).unwrap();
        let v = integrate(
            |x, y| x * x * (1.0 - x) * (1.0 - x) * y * y * (1.0 - y) * (1.0 - y),
            &r6,
        )
        .unwrap();
        assert!((v - 1.0 / 900.0).abs() < 1e-14);
    }

    #[test]
    fn non_finite_integrand_reported_with_location() {
        let r = tensor_rule(&gauss1d(2).unwrap(), Rect::unit()).unwrap();
        let bad = integrate(|x, _| 1.0 / (x - r.points[0].0), &r);
        assert!(matches!(bad, Err(Error::NonFiniteSample { .. })));
    }

    #[test]
    fn tensor_exactness_to_degree_2n_minus_1() {
        // Exact integral of x^a y^b over the unit square is 1/((a+1)(b+1)).
        for n in 1..=15 {
            let rule = tensor_rule(&gauss1d(n).unwrap(), Rect::unit()).unwrap();
            for a in 0..=(2 * n - 1) {
                for b in 0..=(2 * n - 1) {
                    let got = integrate(|x, y| x.powi(a as i32) * y.powi(b as i32), &rule).unwrap();
                    let exact = 1.0 / ((a + 1) as f64 * (b + 1) as f64);
                    let rel = ((got - exact) / exact).abs();
                    assert!(rel < 1e-13, "n={n} a={a} b={b}: rel={rel:.3e}");
                }
            }
        }
    }

    #[test]
    fn degenerate_rect_rejected() {
        let r = gauss1d(2).unwrap();
        let bad = tensor_rule(
            &r,
            Rect {
                x0: 0.0,
                y0: 0.0,
                hx: 0.0,
                hy: 1.0,
            },
        );
        assert!(matches!(bad, Err(Error::DegenerateRect { .. })));
    }
}
