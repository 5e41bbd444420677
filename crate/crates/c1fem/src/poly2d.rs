//! Dense bivariate polynomials in the monomial basis.
//!
//! Every basis function, bubble and interpolant in the crate is carried as a
//! `Poly2D`: a `(nx+1) x (ny+1)` grid of monomial coefficients on the
//! reference square `[0,1]^2`. Evaluation uses a compensated Horner scheme so
//! that the large, strongly cancelling coefficients of high-degree nodal
//! basis functions still evaluate to near machine precision.

use crate::error::{Error, Result};

/// Largest per-axis exponent a `Poly2D` may store. Degrees beyond this give
/// badly conditioned nodal constructions and are out of scope.
pub const MAX_DEGREE: usize = 12;

/// Highest derivative order `eval` accepts per axis.
pub const MAX_DERIVATIVE: usize = 4;

/// A bivariate polynomial `p(x,y) = sum c[i][j] x^i y^j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly2D {
    coeffs: Vec<f64>,
    nx: usize,
    ny: usize,
}

impl Poly2D {
    /// Zero polynomial stored on an `(nx+1) x (ny+1)` coefficient grid.
    pub fn zero(nx: usize, ny: usize) -> Result<Self> {
        if nx > MAX_DEGREE || ny > MAX_DEGREE {
            return Err(Error::DegreeCap(nx.max(ny), MAX_DEGREE));
        }
        Ok(Self {
            coeffs: vec![0.0; (nx + 1) * (ny + 1)],
            nx,
            ny,
        })
    }

    /// The monomial `x^i y^j`.
    pub fn monomial(i: usize, j: usize) -> Result<Self> {
        let mut p = Self::zero(i, j)?;
        *p.coeff_mut(i, j) = 1.0;
        Ok(p)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Coefficient of `x^i y^j`; zero outside the stored grid.
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i > self.nx || j > self.ny {
            0.0
        } else {
            self.coeffs[i * (self.ny + 1) + j]
        }
    }

    pub fn coeff_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        assert!(i <= self.nx && j <= self.ny, "coefficient index out of range");
        &mut self.coeffs[i * (self.ny + 1) + j]
    }

    /// `self += a * other`, growing the grid as needed.
    pub fn scaled_add(&mut self, a: f64, other: &Poly2D) {
        if other.nx > self.nx || other.ny > self.ny {
            let nx = self.nx.max(other.nx);
            let ny = self.ny.max(other.ny);
            let mut grown = Self::zero(nx, ny).expect("degrees already capped");
            for i in 0..=self.nx {
                for j in 0..=self.ny {
                    *grown.coeff_mut(i, j) = self.coeff(i, j);
                }
            }
            *self = grown;
        }
        for i in 0..=other.nx {
            for j in 0..=other.ny {
                *self.coeff_mut(i, j) += a * other.coeff(i, j);
            }
        }
    }

    /// Exact partial derivative `d^dx/dx^dx d^dy/dy^dy p` as a new polynomial.
    pub fn derivative(&self, dx: usize, dy: usize) -> Poly2D {
        if dx > self.nx || dy > self.ny {
            return Poly2D::zero(0, 0).expect("trivial");
        }
        let nx = self.nx - dx;
        let ny = self.ny - dy;
        let mut out = Poly2D::zero(nx, ny).expect("shrinking grid");
        for i in 0..=nx {
            for j in 0..=ny {
                let c = self.coeff(i + dx, j + dy);
                *out.coeff_mut(i, j) = c * falling_factorial(i + dx, dx) * falling_factorial(j + dy, dy);
            }
        }
        out
    }

    /// Evaluate `d^dx_order/dx d^dy_order/dy p` at `(x, y)`.
    pub fn eval(&self, x: f64, y: f64, dx_order: usize, dy_order: usize) -> Result<f64> {
        if dx_order > MAX_DERIVATIVE || dy_order > MAX_DERIVATIVE {
            return Err(Error::DerivativeOrder {
                dx: dx_order,
                dy: dy_order,
                max: MAX_DERIVATIVE,
            });
        }
        if dx_order > self.nx || dy_order > self.ny {
            return Ok(0.0);
        }
        Ok(self.derivative(dx_order, dy_order).value(x, y))
    }

    /// Evaluate the polynomial itself (no derivatives).
    pub fn value(&self, x: f64, y: f64) -> f64 {
        // Compensated Horner per row in y, then compensated Horner in x over
        // the row values.
        let stride = self.ny + 1;
        let mut rows = [0.0f64; MAX_DEGREE + 1];
        for i in 0..=self.nx {
            rows[i] = comp_horner(&self.coeffs[i * stride..(i + 1) * stride], y);
        }
        comp_horner(&rows[..=self.nx], x)
    }

    /// True when every coefficient with `i > k` or `j > k` vanishes (to `tol`).
    pub fn is_in_qk(&self, k: usize, tol: f64) -> bool {
        for i in 0..=self.nx {
            for j in 0..=self.ny {
                if (i > k || j > k) && self.coeff(i, j).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// True when every coefficient with `i + j > k` vanishes (to `tol`).
    pub fn is_in_pk(&self, k: usize, tol: f64) -> bool {
        for i in 0..=self.nx {
            for j in 0..=self.ny {
                if i + j > k && self.coeff(i, j).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Largest absolute coefficient.
    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

fn falling_factorial(n: usize, k: usize) -> f64 {
    let mut f = 1.0;
    for m in 0..k {
        f *= (n - m) as f64;
    }
    f
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

/// Horner evaluation of `sum c[i] t^i` with a running error-compensation
/// term; accurate to ~1 ulp even for strongly cancelling coefficients.
fn comp_horner(coeffs: &[f64], t: f64) -> f64 {
    let n = coeffs.len();
    if n == 0 {
        return 0.0;
    }
    let mut s = coeffs[n - 1];
    let mut c = 0.0;
    for i in (0..n - 1).rev() {
        let (p, pe) = two_prod(s, t);
        let (sum, se) = two_sum(p, coeffs[i]);
        s = sum;
        c = c * t + (pe + se);
    }
    s + c
}

/// Which polynomial space a `BasisList` spans.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceLabel {
    /// Total degree at most `k`.
    Pk,
    /// Separated degree at most `k` per axis.
    Qk,
    /// Serendipity space: `Pk` plus selected BFS bubbles.
    VkSerendipity,
}

/// An ordered list of polynomials spanning one space.
#[derive(Clone, Debug)]
pub struct BasisList {
    pub functions: Vec<Poly2D>,
    pub label: SpaceLabel,
    pub degree: usize,
}

impl BasisList {
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

/// `dim Pk = (k+1)(k+2)/2`.
pub fn pk_dim(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// `dim Qk = (k+1)^2`.
pub fn qk_dim(k: usize) -> usize {
    (k + 1) * (k + 1)
}

/// Monomial basis of `Pk` (graded lexicographic) or `Qk` (row-major in the
/// exponent pair `(i, j)`).
pub fn monomial_basis(space: SpaceLabel, k: usize) -> Result<BasisList> {
    if k > MAX_DEGREE {
        return Err(Error::DegreeCap(k, MAX_DEGREE));
    }
    let mut functions = Vec::new();
    match space {
        SpaceLabel::Qk => {
            for i in 0..=k {
                for j in 0..=k {
                    functions.push(Poly2D::monomial(i, j)?);
                }
            }
        }
        SpaceLabel::Pk => {
            for d in 0..=k {
                for i in (0..=d).rev() {
                    functions.push(Poly2D::monomial(i, d - i)?);
                }
            }
        }
        SpaceLabel::VkSerendipity => {
            panic!("serendipity spaces have no monomial basis; use element construction")
        }
    }
    Ok(BasisList {
        functions,
        label: space,
        degree: k,
    })
}

/// Exact coefficient-wise combination `sum coeffs[m] * basis[m]`.
pub fn linear_combination(coeffs: &[f64], basis: &BasisList) -> Result<Poly2D> {
    if coeffs.len() != basis.len() {
        return Err(Error::LengthMismatch {
            got: coeffs.len(),
            expected: basis.len(),
        });
    }
    let nx = basis.functions.iter().map(Poly2D::nx).max().unwrap_or(0);
    let ny = basis.functions.iter().map(Poly2D::ny).max().unwrap_or(0);
    let mut out = Poly2D::zero(nx, ny)?;
    for (c, f) in coeffs.iter().zip(&basis.functions) {
        out.scaled_add(*c, f);
    }
    Ok(out)
}
