//! Reference-square element construction for the BFS `C1-Qk` family and the
//! reduced `C1-Pk` serendipity family.
//!
//! Degrees of freedom are point values and derivatives on `[0,1]^2`:
//! four per vertex (value, d/dx, d/dy, d2/dxdy), a (value, normal
//! derivative) pair at each of the `k-3` interior points per edge, and
//! Lagrange values at interior nodes. The nodal (dual) basis is obtained by
//! inverting the degree-of-freedom matrix; invertibility of that matrix is
//! the numeric unisolvence certificate for every supported degree.
//!
//! Numerically the module keeps two representations of each nodal basis:
//!
//! * monomial coefficient grids (`Poly2D`) for inspection, export and the
//!   span metadata. At high degree these coefficients are large and
//!   strongly cancelling, so evaluations through them carry an
//!   irreducible `|coeff| * eps` noise floor;
//! * a factored working representation used for all element arithmetic:
//!   BFS nodal functions are exact tensor products of closed-form 1D dual
//!   polynomials, and serendipity nodal functions are combinations of
//!   shifted-Legendre products and BFS bubbles. Evaluation through this
//!   representation stays near machine precision for every supported
//!   degree, which is what the duality certificates and the convergence
//!   studies require.
//!
//! The serendipity nodal solve itself runs on a row-equilibrated
//! shifted-Legendre basis rather than raw monomials; the monomial
//! Vandermonde is far too ill-conditioned above degree ~8 to certify
//! unisolvence.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::{condition_estimate, lu_factor, DenseMatrix};
use crate::poly2d::{monomial_basis, BasisList, Poly2D, SpaceLabel, MAX_DEGREE};

/// Condition threshold above which a degree-of-freedom matrix is treated as
/// numerically singular (unisolvence certificate fails).
pub const UNISOLVENCE_COND_LIMIT: f64 = 1e12;

/// Element family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Flavor {
    Bfs,
    Serendipity,
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flavor::Bfs => write!(f, "bfs"),
            Flavor::Serendipity => write!(f, "serendipity"),
        }
    }
}

/// Kind of point functional.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofKind {
    Value,
    Dx,
    Dy,
    Dxy,
}

impl DofKind {
    /// Derivative orders `(d/dx, d/dy)` of the functional.
    pub fn orders(self) -> (usize, usize) {
        match self {
            DofKind::Value => (0, 0),
            DofKind::Dx => (1, 0),
            DofKind::Dy => (0, 1),
            DofKind::Dxy => (1, 1),
        }
    }

    /// Total derivative order (controls the physical pullback scaling).
    pub fn total_order(self) -> usize {
        let (a, b) = self.orders();
        a + b
    }
}

/// Mesh entity a degree of freedom attaches to, for global matching.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Entity {
    /// Vertex index 0..4 (corners `(0,0), (1,0), (1,1), (0,1)`).
    Vertex(usize),
    /// `edge` 0..4 in order bottom/right/top/left; `point` counts interior
    /// edge nodes from the edge's first vertex.
    Edge { edge: usize, point: usize },
    /// Cell-interior node index.
    Interior(usize),
}

/// A single linear functional `p -> d^a d^b p(point)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DofFunctional {
    pub kind: DofKind,
    pub point: (f64, f64),
    pub entity: Entity,
}

/// Ordered degree-of-freedom set of one element.
#[derive(Clone, Debug)]
pub struct DofSet {
    pub dofs: Vec<DofFunctional>,
    pub degree: usize,
    pub flavor: Flavor,
}

impl DofSet {
    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }
}

const VERTICES: [(f64, f64); 4] = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];

/// Edge traversal data: (start vertex, direction, normal-derivative kind).
/// Order bottom, right, top, left; every traversal runs in the direction of
/// increasing global coordinate, so shared edges never need reordering.
const EDGES: [((f64, f64), (f64, f64), DofKind); 4] = [
    ((0.0, 0.0), (1.0, 0.0), DofKind::Dy),
    ((1.0, 0.0), (0.0, 1.0), DofKind::Dx),
    ((0.0, 1.0), (1.0, 0.0), DofKind::Dy),
    ((0.0, 0.0), (0.0, 1.0), DofKind::Dx),
];

fn vertex_and_edge_dofs(k: usize) -> Vec<DofFunctional> {
    let mut dofs = Vec::new();
    for (v, &point) in VERTICES.iter().enumerate() {
        for kind in [DofKind::Value, DofKind::Dx, DofKind::Dy, DofKind::Dxy] {
            dofs.push(DofFunctional {
                kind,
                point,
                entity: Entity::Vertex(v),
            });
        }
    }
    if k >= 4 {
        let denom = (k - 2) as f64;
        for (e, &(start, dir, normal)) in EDGES.iter().enumerate() {
            for j in 1..=(k - 3) {
                let t = j as f64 / denom;
                let point = (start.0 + t * dir.0, start.1 + t * dir.1);
                for kind in [DofKind::Value, normal] {
                    dofs.push(DofFunctional {
                        kind,
                        point,
                        entity: Entity::Edge { edge: e, point: j - 1 },
                    });
                }
            }
        }
    }
    dofs
}

/// Degrees of freedom of the `C1-Qk` BFS element, canonical ordering.
pub fn bfs_dofs(k: usize) -> Result<DofSet> {
    if !(3..=MAX_DEGREE).contains(&k) {
        return Err(Error::UnsupportedDegree {
            flavor: Flavor::Bfs,
            degree: k,
            min: 3,
            max: MAX_DEGREE,
        });
    }
    let mut dofs = vertex_and_edge_dofs(k);
    if k >= 4 {
        let denom = (k - 2) as f64;
        let mut idx = 0;
        for jy in 1..=(k - 3) {
            for ix in 1..=(k - 3) {
                dofs.push(DofFunctional {
                    kind: DofKind::Value,
                    point: (ix as f64 / denom, jy as f64 / denom),
                    entity: Entity::Interior(idx),
                });
                idx += 1;
            }
        }
    }
    debug_assert_eq!(dofs.len(), (k + 1) * (k + 1));
    Ok(DofSet {
        dofs,
        degree: k,
        flavor: Flavor::Bfs,
    })
}

/// Interior Lagrange node count of the serendipity element: `dim P_{k-8}`.
pub fn serendipity_interior_count(k: usize) -> usize {
    if k >= 8 {
        (k - 7) * (k - 6) / 2
    } else {
        0
    }
}

/// Total serendipity degree-of-freedom count.
pub fn serendipity_dof_count(k: usize) -> usize {
    16 + 8 * (k - 3) + serendipity_interior_count(k)
}

/// Degrees of freedom of the `C1-Pk` serendipity element.
pub fn serendipity_dofs(k: usize) -> Result<DofSet> {
    if !(4..=MAX_DEGREE).contains(&k) {
        return Err(Error::UnsupportedDegree {
            flavor: Flavor::Serendipity,
            degree: k,
            min: 4,
            max: MAX_DEGREE,
        });
    }
    let mut dofs = vertex_and_edge_dofs(k);
    if k >= 8 {
        // Triangular subset of the tensor interior grid, one node per member
        // of P_{k-8}.
        let denom = (k - 2) as f64;
        let mut idx = 0;
        for i in 1..=(k - 7) {
            for j in 1..=i {
                dofs.push(DofFunctional {
                    kind: DofKind::Value,
                    point: (i as f64 / denom, j as f64 / denom),
                    entity: Entity::Interior(idx),
                });
                idx += 1;
            }
        }
    }
    debug_assert_eq!(dofs.len(), serendipity_dof_count(k));
    Ok(DofSet {
        dofs,
        degree: k,
        flavor: Flavor::Serendipity,
    })
}

/// Indices (0-based, canonical BFS ordering) of the BFS dual-basis functions
/// that enrich `Pk` in the serendipity construction.
///
/// For `k = 5` this is the reading of the published index list; a geometric
/// alternative from the accompanying figure is kept as a fallback for the
/// nodal solve (see `build_serendipity_element`).
pub fn bubble_ids(k: usize) -> Result<Vec<usize>> {
    if !(4..=MAX_DEGREE).contains(&k) {
        return Err(Error::UnsupportedDegree {
            flavor: Flavor::Serendipity,
            degree: k,
            min: 4,
            max: MAX_DEGREE,
        });
    }
    // Vertex block: all four dofs at x2, the mixed derivative at x3, d/dx at
    // x4 (indices 4..8, 11, 13).
    let mut ids = vec![4, 5, 6, 7, 11, 13];
    match k {
        4 => {
            // (value, dy) at the bottom midpoint, dx at the right midpoint.
            ids.extend([16, 17, 19]);
        }
        5 => {
            // dy at bottom point 1; (value, dy) at bottom point 2; (value,
            // dx) at right point 1.
            ids.extend([17, 18, 19, 20, 21]);
        }
        _ => {
            // value at bottom points 1-2, dy at bottom points 1-3, dx at
            // right point 1.
            ids.extend([16, 17, 18, 19, 21, 17 + 2 * (k - 3)]);
        }
    }
    Ok(ids)
}

/// Figure-based alternative bubble set for `k = 5`: value at both bottom
/// points, dy at bottom point 2, (value, dx) at right point 1.
fn bubble_ids_k5_fallback() -> Vec<usize> {
    vec![4, 5, 6, 7, 11, 13, 16, 18, 19, 20, 21]
}

// ---------------------------------------------------------------------------
// 1D dual polynomials (tensor factors of the BFS nodal basis)
// ---------------------------------------------------------------------------

/// A 1D polynomial with ascending monomial coefficients and compensated
/// Horner evaluation.
#[derive(Clone, Debug)]
pub(crate) struct Poly1D {
    coeffs: Vec<f64>,
}

impl Poly1D {
    fn constant(c: f64) -> Self {
        Poly1D { coeffs: vec![c] }
    }

    /// Multiply in place by `(t - root)`.
    fn mul_linear_root(&mut self, root: f64) {
        let n = self.coeffs.len();
        let mut out = vec![0.0; n + 1];
        for (i, &c) in self.coeffs.iter().enumerate() {
            out[i + 1] += c;
            out[i] -= root * c;
        }
        self.coeffs = out;
    }

    /// Multiply in place by `(a + b t)`.
    fn mul_linear(&mut self, a: f64, b: f64) {
        let n = self.coeffs.len();
        let mut out = vec![0.0; n + 1];
        for (i, &c) in self.coeffs.iter().enumerate() {
            out[i] += a * c;
            out[i + 1] += b * c;
        }
        self.coeffs = out;
    }

    fn scale(&mut self, s: f64) {
        for c in self.coeffs.iter_mut() {
            *c *= s;
        }
    }

    /// Derivative value of the given order, compensated.
    pub(crate) fn eval(&self, t: f64, order: usize) -> f64 {
        if order >= self.coeffs.len() {
            return 0.0;
        }
        if order == 0 {
            return comp_horner_1d(&self.coeffs, t);
        }
        let n = self.coeffs.len() - order;
        let mut buf = [0.0f64; MAX_DEGREE + 1];
        for i in 0..n {
            let mut f = 1.0;
            for m in 0..order {
                f *= (i + order - m) as f64;
            }
            buf[i] = self.coeffs[i + order] * f;
        }
        comp_horner_1d(&buf[..n], t)
    }
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

fn comp_horner_1d(coeffs: &[f64], t: f64) -> f64 {
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

/// Interior edge-node parameters `j/(k-2)`, `j = 1..k-3`.
fn interior_nodes(k: usize) -> Vec<f64> {
    let denom = (k - 2) as f64;
    (1..=k.saturating_sub(3)).map(|j| j as f64 / denom).collect()
}

/// The 1D nodal problem dual to `[p(0), p'(0), p(1), p'(1), p(t_1), ...,
/// p(t_{k-3})]` over degree-`k` polynomials, built in closed product form.
///
/// No linear solve is involved: every dual is a product of linear factors
/// with known roots, which keeps the monomial coefficients accurate to a few
/// ulps even at the top supported degree.
fn duals_1d(k: usize) -> Vec<Poly1D> {
    let nodes = interior_nodes(k);
    let node_product = |exclude: Option<usize>| -> Poly1D {
        let mut p = Poly1D::constant(1.0);
        for (m, &t) in nodes.iter().enumerate() {
            if Some(m) != exclude {
                p.mul_linear_root(t);
            }
        }
        p
    };

    let mut duals = Vec::with_capacity(k + 1);

    // q(t) = prod (t - t_m) normalized to 1 at the evaluation endpoint.
    let q0: f64 = nodes.iter().map(|t| -t).product();
    let q1: f64 = nodes.iter().map(|t| 1.0 - t).product();

    // Dual to p(0): (1-t)^2 (1 + c t) q(t)/q(0), c = 2 + sum 1/t_m.
    {
        let c = 2.0 + nodes.iter().map(|t| 1.0 / t).sum::<f64>();
        let mut p = node_product(None);
        p.scale(1.0 / q0);
        p.mul_linear(1.0, -1.0);
        p.mul_linear(1.0, -1.0);
        p.mul_linear(1.0, c);
        duals.push(p);
    }
    // Dual to p'(0): t (1-t)^2 q(t)/q(0).
    {
        let mut p = node_product(None);
        p.scale(1.0 / q0);
        p.mul_linear(1.0, -1.0);
        p.mul_linear(1.0, -1.0);
        p.mul_linear(0.0, 1.0);
        duals.push(p);
    }
    // Dual to p(1): t^2 (1 + c (1-t)) q(t)/q(1), c = 2 + sum 1/(1 - t_m).
    {
        let c = 2.0 + nodes.iter().map(|t| 1.0 / (1.0 - t)).sum::<f64>();
        let mut p = node_product(None);
        p.scale(1.0 / q1);
        p.mul_linear(0.0, 1.0);
        p.mul_linear(0.0, 1.0);
        p.mul_linear(1.0 + c, -c);
        duals.push(p);
    }
    // Dual to p'(1): (t - 1) t^2 q(t)/q(1).
    {
        let mut p = node_product(None);
        p.scale(1.0 / q1);
        p.mul_linear(0.0, 1.0);
        p.mul_linear(0.0, 1.0);
        p.mul_linear_root(1.0);
        duals.push(p);
    }
    // Dual to p(t_j): t^2 (1-t)^2 prod_{m != j} (t - t_m) / (same at t_j).
    for (j, &tj) in nodes.iter().enumerate() {
        let mut p = node_product(Some(j));
        let mut norm = tj * tj * (1.0 - tj) * (1.0 - tj);
        for (m, &tm) in nodes.iter().enumerate() {
            if m != j {
                norm *= tj - tm;
            }
        }
        p.scale(1.0 / norm);
        p.mul_linear(0.0, 1.0);
        p.mul_linear(0.0, 1.0);
        p.mul_linear(1.0, -1.0);
        p.mul_linear(1.0, -1.0);
        duals.push(p);
    }
    duals
}

/// Index into the `duals_1d` ordering of the 1D functional acting on one
/// coordinate of a 2D DOF: value/derivative at an endpoint, or value at an
/// interior node.
fn functional_index_1d(k: usize, coord: f64, order: usize) -> usize {
    if coord == 0.0 {
        order.min(1)
    } else if coord == 1.0 {
        2 + order.min(1)
    } else {
        debug_assert_eq!(order, 0, "interior 1D functionals are values only");
        let j = (coord * (k - 2) as f64).round() as usize;
        debug_assert!(j >= 1 && j <= k - 3);
        4 + (j - 1)
    }
}

/// Tensor-product nodal functions: shape `j` is `duals[pair.0](x) *
/// duals[pair.1](y)`.
#[derive(Clone, Debug)]
pub(crate) struct TensorShapes {
    duals: Vec<Poly1D>,
    pairs: Vec<(usize, usize)>,
}

impl TensorShapes {
    fn for_bfs(dofs: &DofSet) -> Self {
        let k = dofs.degree;
        let duals = duals_1d(k);
        let pairs = dofs
            .dofs
            .iter()
            .map(|d| {
                let (ax, ay) = d.kind.orders();
                (
                    functional_index_1d(k, d.point.0, ax),
                    functional_index_1d(k, d.point.1, ay),
                )
            })
            .collect();
        TensorShapes { duals, pairs }
    }

    fn subset(&self, ids: &[usize]) -> Self {
        TensorShapes {
            duals: self.duals.clone(),
            pairs: ids.iter().map(|&i| self.pairs[i]).collect(),
        }
    }

    fn len(&self) -> usize {
        self.pairs.len()
    }

    fn eval(&self, j: usize, x: f64, y: f64, dx: usize, dy: usize) -> f64 {
        let (xi, yi) = self.pairs[j];
        self.duals[xi].eval(x, dx) * self.duals[yi].eval(y, dy)
    }

    /// Evaluate all shapes at once through per-axis tables.
    fn eval_all(&self, x: f64, y: f64, dx: usize, dy: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.pairs.len());
        let vx: Vec<f64> = self.duals.iter().map(|d| d.eval(x, dx)).collect();
        let vy: Vec<f64> = self.duals.iter().map(|d| d.eval(y, dy)).collect();
        for (o, (xi, yi)) in out.iter_mut().zip(&self.pairs) {
            *o = vx[*xi] * vy[*yi];
        }
    }

    fn monomial_grid(&self, j: usize, degree: usize) -> Poly2D {
        let (xi, yi) = self.pairs[j];
        let cx = &self.duals[xi].coeffs;
        let cy = &self.duals[yi].coeffs;
        let mut p = Poly2D::zero(degree, degree).expect("degree capped");
        for (i, &a) in cx.iter().enumerate() {
            for (jj, &b) in cy.iter().enumerate() {
                *p.coeff_mut(i, jj) = a * b;
            }
        }
        p
    }
}

/// Shifted Legendre polynomial `P_n(2t - 1)` and derivatives up to order 2,
/// for all degrees `0..=k` in one recurrence pass.
fn shifted_legendre_all(k: usize, t: f64, order: usize) -> Vec<f64> {
    debug_assert!(order <= 2);
    let s = 2.0 * t - 1.0;
    let mut p = vec![0.0; k + 1];
    let mut d = vec![0.0; k + 1];
    let mut dd = vec![0.0; k + 1];
    p[0] = 1.0;
    if k >= 1 {
        p[1] = s;
        d[1] = 1.0;
    }
    for m in 1..k {
        let a = (2 * m + 1) as f64;
        let b = m as f64;
        let c = (m + 1) as f64;
        p[m + 1] = (a * s * p[m] - b * p[m - 1]) / c;
        d[m + 1] = (a * (p[m] + s * d[m]) - b * d[m - 1]) / c;
        dd[m + 1] = (a * (2.0 * d[m] + s * dd[m]) - b * dd[m - 1]) / c;
    }
    match order {
        0 => p,
        1 => {
            for v in d.iter_mut() {
                *v *= 2.0;
            }
            d
        }
        _ => {
            for v in dd.iter_mut() {
                *v *= 4.0;
            }
            dd
        }
    }
}

fn shifted_legendre_eval(n: usize, t: f64, order: usize) -> f64 {
    shifted_legendre_all(n, t, order)[n]
}

/// Monomial coefficients (ascending) of the shifted Legendre `P_n(2t - 1)`.
fn shifted_legendre_coeffs(n: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if n == 0 {
        return prev;
    }
    let mut cur = vec![-1.0, 2.0];
    for m in 1..n {
        let a = (2 * m + 1) as f64;
        let b = m as f64;
        let c = (m + 1) as f64;
        let mut next = vec![0.0; m + 2];
        for (i, &v) in cur.iter().enumerate() {
            next[i + 1] += 2.0 * a * v;
            next[i] -= a * v;
        }
        for (i, &v) in prev.iter().enumerate() {
            next[i] -= b * v;
        }
        for v in next.iter_mut() {
            *v /= c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// Graded list of `(x-degree, y-degree)` pairs spanning `Pk` with Legendre
/// factors, parallel to the graded monomial ordering.
fn graded_pairs(k: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for d in 0..=k {
        for i in (0..=d).rev() {
            pairs.push((i, d - i));
        }
    }
    pairs
}

/// Factored evaluation backend of an element's nodal basis.
#[derive(Clone, Debug)]
enum Evaluator {
    /// BFS: exact tensor products.
    Tensor(TensorShapes),
    /// Serendipity: `shape_j = sum_m coeffs[m][j] * w_m` over Legendre
    /// products followed by BFS bubbles.
    Span {
        degree: usize,
        legendre: Vec<(usize, usize)>,
        bubbles: TensorShapes,
        coeffs: DenseMatrix,
    },
}

impl Evaluator {
    fn eval_working(&self, x: f64, y: f64, dx: usize, dy: usize, work: &mut Vec<f64>) {
        match self {
            Evaluator::Tensor(_) => unreachable!("tensor path has no working vector"),
            Evaluator::Span {
                degree,
                legendre,
                bubbles,
                ..
            } => {
                let lx = shifted_legendre_all(*degree, x, dx);
                let ly = shifted_legendre_all(*degree, y, dy);
                work.clear();
                for (a, b) in legendre {
                    work.push(lx[*a] * ly[*b]);
                }
                let base = work.len();
                work.resize(base + bubbles.len(), 0.0);
                bubbles.eval_all(x, y, dx, dy, &mut work[base..]);
            }
        }
    }

    fn eval_all(&self, x: f64, y: f64, dx: usize, dy: usize, out: &mut [f64]) {
        match self {
            Evaluator::Tensor(t) => t.eval_all(x, y, dx, dy, out),
            Evaluator::Span { coeffs, .. } => {
                let mut work = Vec::new();
                self.eval_working(x, y, dx, dy, &mut work);
                for (j, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (m, w) in work.iter().enumerate() {
                        acc += coeffs.get(m, j) * w;
                    }
                    *o = acc;
                }
            }
        }
    }

    fn eval_one(&self, j: usize, x: f64, y: f64, dx: usize, dy: usize) -> f64 {
        match self {
            Evaluator::Tensor(t) => t.eval(j, x, y, dx, dy),
            Evaluator::Span { coeffs, .. } => {
                let mut work = Vec::new();
                self.eval_working(x, y, dx, dy, &mut work);
                let mut acc = 0.0;
                for (m, w) in work.iter().enumerate() {
                    acc += coeffs.get(m, j) * w;
                }
                acc
            }
        }
    }
}

/// A finite element: DOF set, nodal basis, span metadata and the condition
/// estimate of the (equilibrated) DOF matrix.
#[derive(Clone, Debug)]
pub struct ElementBasis {
    pub dofs: DofSet,
    /// Monomial re-expansion of the nodal basis (inspection/export).
    pub shape_functions: BasisList,
    pub span_basis: BasisList,
    /// Indices into the canonical BFS DOF ordering of the bubbles enriching
    /// `Pk`; empty for BFS elements.
    pub bubble_ids: Vec<usize>,
    /// Condition estimate of the row-equilibrated DOF matrix.
    pub cond: f64,
    /// True when the `k = 5` figure-based bubble set had to replace the
    /// text-based default to obtain a unisolvent DOF matrix.
    pub bubble_fallback: bool,
    evaluator: Evaluator,
}

impl ElementBasis {
    pub fn ndof(&self) -> usize {
        self.dofs.len()
    }

    pub fn degree(&self) -> usize {
        self.dofs.degree
    }

    pub fn flavor(&self) -> Flavor {
        self.dofs.flavor
    }

    /// Total derivative order of each DOF, in canonical order.
    pub fn dof_orders(&self) -> Vec<usize> {
        self.dofs.dofs.iter().map(|d| d.kind.total_order()).collect()
    }

    /// Evaluate shape function `j` through the factored representation.
    /// Derivative orders up to 2 per axis.
    pub fn eval_shape(&self, j: usize, x: f64, y: f64, dx: usize, dy: usize) -> f64 {
        assert!(dx <= 2 && dy <= 2, "factored evaluation supports orders <= 2");
        self.evaluator.eval_one(j, x, y, dx, dy)
    }

    /// Evaluate every shape function at one point into `out`.
    pub fn eval_shapes(&self, x: f64, y: f64, dx: usize, dy: usize, out: &mut [f64]) {
        assert!(dx <= 2 && dy <= 2, "factored evaluation supports orders <= 2");
        assert_eq!(out.len(), self.ndof());
        self.evaluator.eval_all(x, y, dx, dy, out);
    }

    /// Evaluate `sum_j coeffs[j] shape_j` and derivatives at a point.
    pub fn eval_combination(&self, coeffs: &[f64], x: f64, y: f64, dx: usize, dy: usize) -> f64 {
        assert_eq!(coeffs.len(), self.ndof());
        let mut vals = vec![0.0; self.ndof()];
        self.eval_shapes(x, y, dx, dy, &mut vals);
        coeffs.iter().zip(&vals).map(|(c, v)| c * v).sum()
    }
}

/// Row-equilibrated DOF matrix over a working span, its condition estimate
/// and LU factors.
struct DofMatrix {
    raw: DenseMatrix,
    scale: Vec<f64>,
    cond: f64,
}

fn dof_matrix(
    dofs: &DofSet,
    apply: impl Fn(usize, &DofFunctional) -> f64,
    nspan: usize,
    bubbles_used: &[usize],
) -> Result<DofMatrix> {
    let n = dofs.len();
    assert_eq!(nspan, n, "span dimension must equal the DOF count");
    let fail = |cond: f64| Error::UnisolvenceFailure {
        flavor: dofs.flavor,
        degree: dofs.degree,
        cond,
        bubbles: bubbles_used.to_vec(),
    };
    let raw = DenseMatrix::from_fn(n, n, |i, j| apply(j, &dofs.dofs[i]));
    // Row equilibration: derivative functionals and point values act on very
    // different scales at high degree.
    let mut scale = vec![0.0; n];
    for i in 0..n {
        let r = raw.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if r == 0.0 || !r.is_finite() {
            return Err(fail(f64::INFINITY));
        }
        scale[i] = 1.0 / r;
    }
    let eq = DenseMatrix::from_fn(n, n, |i, j| raw.get(i, j) * scale[i]);
    let cond = condition_estimate(&eq);
    if !cond.is_finite() || cond > UNISOLVENCE_COND_LIMIT {
        return Err(fail(cond));
    }
    Ok(DofMatrix { raw, scale, cond })
}

/// Build the BFS `C1-Qk` element, `3 <= k <= 12`.
pub fn build_bfs_element(k: usize) -> Result<ElementBasis> {
    let dofs = bfs_dofs(k)?;
    // Unisolvence certificate over the shifted-Legendre Qk working basis.
    let pairs: Vec<(usize, usize)> = (0..=k).flat_map(|a| (0..=k).map(move |b| (a, b))).collect();
    let m = dof_matrix(
        &dofs,
        |j, dof| {
            let (ax, ay) = dof.kind.orders();
            shifted_legendre_eval(pairs[j].0, dof.point.0, ax)
                * shifted_legendre_eval(pairs[j].1, dof.point.1, ay)
        },
        (k + 1) * (k + 1),
        &[],
    )?;

    // The nodal basis itself is an exact tensor product of closed-form 1D
    // duals; no solve is needed.
    let tensor = TensorShapes::for_bfs(&dofs);
    let shapes: Vec<Poly2D> = (0..dofs.len()).map(|j| tensor.monomial_grid(j, k)).collect();
    Ok(ElementBasis {
        span_basis: monomial_basis(SpaceLabel::Qk, k)?,
        shape_functions: BasisList {
            functions: shapes,
            label: SpaceLabel::Qk,
            degree: k,
        },
        dofs,
        bubble_ids: Vec::new(),
        cond: m.cond,
        bubble_fallback: false,
        evaluator: Evaluator::Tensor(tensor),
    })
}

/// Build a serendipity element from an explicit bubble selection.
///
/// This is the machinery behind `build_serendipity_element`; it is public so
/// alternative bubble sets can be certified or used as negative controls.
pub fn build_serendipity_with_bubbles(k: usize, bubbles: &[usize]) -> Result<ElementBasis> {
    let dofs = serendipity_dofs(k)?;
    let bfs_set = bfs_dofs(k)?;
    let all_tensor = TensorShapes::for_bfs(&bfs_set);
    let bubble_shapes = all_tensor.subset(bubbles);

    let legendre = graded_pairs(k);
    let nleg = legendre.len();
    let n = dofs.len();

    let apply = |j: usize, dof: &DofFunctional| -> f64 {
        let (ax, ay) = dof.kind.orders();
        if j < nleg {
            let (a, b) = legendre[j];
            shifted_legendre_eval(a, dof.point.0, ax) * shifted_legendre_eval(b, dof.point.1, ay)
        } else {
            bubble_shapes.eval(j - nleg, dof.point.0, dof.point.1, ax, ay)
        }
    };
    let m = dof_matrix(&dofs, apply, nleg + bubbles.len(), bubbles)?;

    let factors = lu_factor(&DenseMatrix::from_fn(n, n, |i, j| {
        m.raw.get(i, j) * m.scale[i]
    }))
    .map_err(|_| Error::UnisolvenceFailure {
        flavor: Flavor::Serendipity,
        degree: k,
        cond: f64::INFINITY,
        bubbles: bubbles.to_vec(),
    })?;
    let rhs = DenseMatrix::from_fn(n, n, |i, j| if i == j { m.scale[i] } else { 0.0 });
    let mut coeffs = factors.solve_mat(&rhs);
    // One refinement pass against the unscaled matrix sharpens the duality
    // residual at high degree.
    let prod = m.raw.matmul(&coeffs);
    let resid = DenseMatrix::from_fn(n, n, |i, j| {
        (if i == j { 1.0 } else { 0.0 } - prod.get(i, j)) * m.scale[i]
    });
    let delta = factors.solve_mat(&resid);
    for i in 0..n {
        for j in 0..n {
            coeffs.add_to(i, j, delta.get(i, j));
        }
    }

    // Monomial re-expansion for inspection and export.
    let leg_grids: Vec<Poly2D> = legendre
        .iter()
        .map(|(a, b)| {
            let ca = shifted_legendre_coeffs(*a);
            let cb = shifted_legendre_coeffs(*b);
            let mut p = Poly2D::zero(k, k).expect("degree capped");
            for (i, &va) in ca.iter().enumerate() {
                for (j, &vb) in cb.iter().enumerate() {
                    *p.coeff_mut(i, j) = va * vb;
                }
            }
            p
        })
        .collect();
    let bubble_grids: Vec<Poly2D> = (0..bubbles.len())
        .map(|j| bubble_shapes.monomial_grid(j, k))
        .collect();
    let mut shapes = Vec::with_capacity(n);
    for j in 0..n {
        let mut shape = Poly2D::zero(k, k)?;
        for (mrow, grid) in leg_grids.iter().chain(bubble_grids.iter()).enumerate() {
            shape.scaled_add(coeffs.get(mrow, j), grid);
        }
        shapes.push(shape);
    }

    let mut span = monomial_basis(SpaceLabel::Pk, k)?;
    span.label = SpaceLabel::VkSerendipity;
    span.functions.extend(bubble_grids);

    Ok(ElementBasis {
        span_basis: span,
        shape_functions: BasisList {
            functions: shapes,
            label: SpaceLabel::VkSerendipity,
            degree: k,
        },
        dofs,
        bubble_ids: bubbles.to_vec(),
        cond: m.cond,
        bubble_fallback: false,
        evaluator: Evaluator::Span {
            degree: k,
            legendre,
            bubbles: bubble_shapes,
            coeffs,
        },
    })
}

/// Build the serendipity `C1-Pk` element, `4 <= k <= 12`.
///
/// For `k = 5` the published index list is tried first; if its DOF matrix
/// fails the unisolvence certificate the figure-based bubble set is used
/// instead and the element is tagged `bubble_fallback`.
pub fn build_serendipity_element(k: usize) -> Result<ElementBasis> {
    let primary = bubble_ids(k)?;
    match build_serendipity_with_bubbles(k, &primary) {
        Ok(el) => Ok(el),
        Err(Error::UnisolvenceFailure { .. }) if k == 5 => {
            let mut el = build_serendipity_with_bubbles(5, &bubble_ids_k5_fallback())?;
            el.bubble_fallback = true;
            Ok(el)
        }
        Err(e) => Err(e),
    }
}

/// Apply a DOF functional to a reference polynomial with the physical
/// pullback scaling `hx^-a hy^-b` for derivative orders `(a, b)`.
pub fn apply_dof(dof: &DofFunctional, p: &Poly2D, scale: (f64, f64)) -> f64 {
    let (ax, ay) = dof.kind.orders();
    let v = p
        .eval(dof.point.0, dof.point.1, ax, ay)
        .expect("DOF orders within cap");
    v / scale.0.powi(ax as i32) / scale.1.powi(ay as i32)
}

/// Nodal interpolation: coefficient `c_i = F_i(target)`.
///
/// `target(x, y, dx, dy)` must supply values and derivatives through the
/// mixed first order at arbitrary points.
pub fn local_interpolate(
    element: &ElementBasis,
    target: impl Fn(f64, f64, usize, usize) -> f64,
) -> Vec<f64> {
    element
        .dofs
        .dofs
        .iter()
        .map(|d| {
            let (ax, ay) = d.kind.orders();
            target(d.point.0, d.point.1, ax, ay)
        })
        .collect()
}

/// Numeric unisolvence certificate.
#[derive(Clone, Copy, Debug)]
pub struct UnisolvenceReport {
    pub degree: usize,
    pub flavor: Flavor,
    pub dim: usize,
    pub cond: f64,
    pub pass: bool,
}

/// Run the unisolvence certificate for one element; construction failure is
/// encoded in `pass`, not an error.
pub fn unisolvence_report(k: usize, flavor: Flavor) -> Result<UnisolvenceReport> {
    let built = match flavor {
        Flavor::Bfs => build_bfs_element(k),
        Flavor::Serendipity => build_serendipity_element(k),
    };
    match built {
        Ok(el) => Ok(UnisolvenceReport {
            degree: k,
            flavor,
            dim: el.ndof(),
            cond: el.cond,
            pass: el.cond < UNISOLVENCE_COND_LIMIT,
        }),
        Err(Error::UnisolvenceFailure { cond, .. }) => Ok(UnisolvenceReport {
            degree: k,
            flavor,
            dim: match flavor {
                Flavor::Bfs => (k + 1) * (k + 1),
                Flavor::Serendipity => serendipity_dof_count(k),
            },
            cond,
            pass: false,
        }),
        Err(e) => Err(e),
    }
}

/// Maximum duality defect `max_ij |F_i(shape_j) - delta_ij|`, measured
/// through the factored evaluation path.
pub fn duality_defect(element: &ElementBasis) -> f64 {
    let mut worst = 0.0f64;
    let mut vals = vec![0.0; element.ndof()];
    for (i, dof) in element.dofs.dofs.iter().enumerate() {
        let (ax, ay) = dof.kind.orders();
        element.eval_shapes(dof.point.0, dof.point.1, ax, ay, &mut vals);
        for (j, v) in vals.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - target).abs());
        }
    }
    worst
}

/// Vertices on the closed boundary of each reference edge.
const EDGE_VERTICES: [(usize, usize); 4] = [(0, 1), (1, 2), (3, 2), (0, 3)];

/// Largest trace or normal-derivative magnitude on any edge over the shape
/// functions dual to DOFs *away* from that closed edge.
///
/// A small defect is what makes global C1 gluing possible: the restriction
/// of any element function to an edge is fully determined by the DOFs on the
/// closed edge.
pub fn edge_trace_defect(element: &ElementBasis, samples: usize) -> f64 {
    let mut worst = 0.0f64;
    let mut vals = vec![0.0; element.ndof()];
    let mut nvals = vec![0.0; element.ndof()];
    for (e, &(start, dir, normal)) in EDGES.iter().enumerate() {
        let (va, vb) = EDGE_VERTICES[e];
        let (nx, ny) = normal.orders();
        for s in 0..samples {
            let t = s as f64 / (samples.max(2) - 1) as f64;
            let x = start.0 + t * dir.0;
            let y = start.1 + t * dir.1;
            element.eval_shapes(x, y, 0, 0, &mut vals);
            element.eval_shapes(x, y, nx, ny, &mut nvals);
            for (j, dof) in element.dofs.dofs.iter().enumerate() {
                let on_closed_edge = match dof.entity {
                    Entity::Vertex(v) => v == va || v == vb,
                    Entity::Edge { edge, .. } => edge == e,
                    Entity::Interior(_) => false,
                };
                if on_closed_edge {
                    continue;
                }
                worst = worst.max(vals[j].abs()).max(nvals[j].abs());
            }
        }
    }
    worst
}

/// Write every shape function's monomial coefficient grid as plain text
/// (row-major rows of `x`-exponent, 17 significant digits).
pub fn dump_element(element: &ElementBasis, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(
        w,
        "# {} k={} ndof={}",
        element.flavor(),
        element.degree(),
        element.ndof()
    )?;
    for (j, shape) in element.shape_functions.functions.iter().enumerate() {
        writeln!(w, "# shape {j}")?;
        for i in 0..=shape.nx() {
            let row: Vec<String> = (0..=shape.ny())
                .map(|jj| format!("{:.16e}", shape.coeff(i, jj)))
                .collect();
            writeln!(w, "{}", row.join(" "))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly2d::{linear_combination, SpaceLabel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bfs_dof_counts_and_layout() {
        let d3 = bfs_dofs(3).unwrap();
        assert_eq!(d3.len(), 16);
        assert!(d3
            .dofs
            .iter()
            .all(|d| matches!(d.entity, Entity::Vertex(_))));

        let d4 = bfs_dofs(4).unwrap();
        assert_eq!(d4.len(), 25);
        let interior: Vec<_> = d4
            .dofs
            .iter()
            .filter(|d| matches!(d.entity, Entity::Interior(_)))
            .collect();
        assert_eq!(interior.len(), 1);
        assert_eq!(interior[0].point, (0.5, 0.5));

        assert_eq!(bfs_dofs(6).unwrap().len(), 49);
        assert!(matches!(
            bfs_dofs(2),
            Err(Error::UnsupportedDegree { degree: 2, .. })
        ));
    }

    #[test]
    fn serendipity_dof_counts() {
        assert_eq!(serendipity_dofs(4).unwrap().len(), 24);
        assert_eq!(serendipity_dofs(7).unwrap().len(), 48);
        let d8 = serendipity_dofs(8).unwrap();
        assert_eq!(d8.len(), 57);
        let interior: Vec<_> = d8
            .dofs
            .iter()
            .filter(|d| matches!(d.entity, Entity::Interior(_)))
            .collect();
        assert_eq!(interior.len(), 1);
        let p = interior[0].point;
        assert!((p.0 - 1.0 / 6.0).abs() < 1e-15 && (p.1 - 1.0 / 6.0).abs() < 1e-15);
        assert!(serendipity_dofs(3).is_err());
    }

    #[test]
    fn dimension_counts_match_closed_forms() {
        for k in 6..=12 {
            let expected = 16 + 8 * (k - 3) + if k >= 8 { (k - 7) * (k - 6) / 2 } else { 0 };
            assert_eq!(serendipity_dof_count(k), expected);
            // dim Pk + 12 must equal the DOF count for the k >= 6 family.
            assert_eq!((k + 1) * (k + 2) / 2 + 12, expected, "k={k}");
        }
    }

    #[test]
    fn bubble_id_lists() {
        assert_eq!(bubble_ids(4).unwrap().len(), 9);
        assert_eq!(bubble_ids(5).unwrap().len(), 11);
        for k in 6..=12 {
            assert_eq!(bubble_ids(k).unwrap().len(), 12, "k={k}");
        }
        // Spot checks against the canonical ordering: index 11 is the mixed
        // derivative at x3, index 13 is d/dx at x4.
        let d = bfs_dofs(6).unwrap();
        assert_eq!(d.dofs[11].kind, DofKind::Dxy);
        assert_eq!(d.dofs[11].entity, Entity::Vertex(2));
        assert_eq!(d.dofs[13].kind, DofKind::Dx);
        assert_eq!(d.dofs[13].entity, Entity::Vertex(3));
        // k=4: ids 16, 17 are (value, dy) at the bottom midpoint; 19 is dx at
        // the right midpoint.
        let d4 = bfs_dofs(4).unwrap();
        assert_eq!(d4.dofs[16].point, (0.5, 0.0));
        assert_eq!(d4.dofs[16].kind, DofKind::Value);
        assert_eq!(d4.dofs[17].kind, DofKind::Dy);
        assert_eq!(d4.dofs[19].point, (1.0, 0.5));
        assert_eq!(d4.dofs[19].kind, DofKind::Dx);
    }

    #[test]
    fn one_dimensional_duals_are_dual() {
        for k in [3usize, 4, 6, 8, 10, 12] {
            let duals = duals_1d(k);
            assert_eq!(duals.len(), k + 1);
            let nodes = interior_nodes(k);
            // Functionals in duals_1d order.
            let apply = |p: &Poly1D, idx: usize| -> f64 {
                match idx {
                    0 => p.eval(0.0, 0),
                    1 => p.eval(0.0, 1),
                    2 => p.eval(1.0, 0),
                    3 => p.eval(1.0, 1),
                    m => p.eval(nodes[m - 4], 0),
                }
            };
            // Coefficient magnitudes grow like 4^k, so the endpoint
            // cancellation noise grows with the degree as well.
            let tol = if k <= 10 { 5e-9 } else { 1e-7 };
            for (j, d) in duals.iter().enumerate() {
                for i in 0..=k {
                    let v = apply(d, i);
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (v - want).abs() < tol,
                        "k={k}: F_{i}(s_{j}) = {v}"
                    );
                }
            }
        }
    }

    #[test]
    fn bfs_cubic_kronecker_at_vertices() {
        let el = build_bfs_element(3).unwrap();
        let s0 = &el.shape_functions.functions[0];
        assert!((s0.value(0.0, 0.0) - 1.0).abs() < 1e-12);
        assert!(s0.eval(0.0, 0.0, 1, 0).unwrap().abs() < 1e-12);
        assert!(s0.eval(0.0, 0.0, 0, 1).unwrap().abs() < 1e-12);
        assert!(s0.eval(0.0, 0.0, 1, 1).unwrap().abs() < 1e-12);
        for v in &VERTICES[1..] {
            assert!(s0.value(v.0, v.1).abs() < 1e-12);
        }
    }

    #[test]
    fn bfs_quartic_duality_all_pairs_via_monomial_grids() {
        // The monomial re-expansion itself must satisfy duality at low
        // degree.
        let el = build_bfs_element(4).unwrap();
        let mut worst = 0.0f64;
        for (i, dof) in el.dofs.dofs.iter().enumerate() {
            for (j, shape) in el.shape_functions.functions.iter().enumerate() {
                let v = apply_dof(dof, shape, (1.0, 1.0));
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - want).abs());
            }
        }
        assert!(worst < 1e-9, "duality defect {worst:.3e}");
    }

    #[test]
    fn duality_across_supported_degrees() {
        for k in 3..=10 {
            let el = build_bfs_element(k).unwrap();
            let d = duality_defect(&el);
            assert!(d < 1e-8, "bfs k={k}: duality defect {d:.3e}");
        }
        for k in 4..=10 {
            let el = build_serendipity_element(k).unwrap();
            let d = duality_defect(&el);
            assert!(d < 1e-8, "serendipity k={k}: duality defect {d:.3e}");
        }
    }

    #[test]
    fn bfs_interpolation_reproduces_q_members() {
        let el = build_bfs_element(4).unwrap();
        let target = Poly2D::monomial(2, 2).unwrap();
        let coeffs = local_interpolate(&el, |x, y, a, b| target.eval(x, y, a, b).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = rng.gen_range(0.0..1.0);
            let y = rng.gen_range(0.0..1.0);
            let got = el.eval_combination(&coeffs, x, y, 0, 0);
            assert!((got - target.value(x, y)).abs() < 1e-10);
        }
    }

    #[test]
    fn serendipity_dimensions() {
        assert_eq!(build_serendipity_element(4).unwrap().ndof(), 24);
        assert_eq!(build_serendipity_element(6).unwrap().ndof(), 40);
    }

    #[test]
    fn serendipity_reproduces_random_p5() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let el = build_serendipity_element(5).unwrap();
        let basis = monomial_basis(SpaceLabel::Pk, 5).unwrap();
        let c: Vec<f64> = (0..basis.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let target = linear_combination(&c, &basis).unwrap();
        let coeffs = local_interpolate(&el, |x, y, a, b| target.eval(x, y, a, b).unwrap());
        let mut scale = 0.0f64;
        let mut err = 0.0f64;
        for _ in 0..50 {
            let x = rng.gen_range(0.0..1.0);
            let y = rng.gen_range(0.0..1.0);
            let t = target.value(x, y);
            scale = scale.max(t.abs());
            err = err.max((el.eval_combination(&coeffs, x, y, 0, 0) - t).abs());
        }
        assert!(err < 1e-9 * scale.max(1.0), "err {err:.3e}");
    }

    #[test]
    fn monomial_reproduction_sweep() {
        // Every monomial of the span space must be reproduced by nodal
        // interpolation.
        for k in 4..=8usize {
            for (flavor, el) in [
                (Flavor::Bfs, build_bfs_element(k).unwrap()),
                (Flavor::Serendipity, build_serendipity_element(k).unwrap()),
            ] {
                let space = match flavor {
                    Flavor::Bfs => SpaceLabel::Qk,
                    Flavor::Serendipity => SpaceLabel::Pk,
                };
                let basis = monomial_basis(space, k).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
                for target in &basis.functions {
                    let coeffs =
                        local_interpolate(&el, |x, y, a, b| target.eval(x, y, a, b).unwrap());
                    let mut err = 0.0f64;
                    let mut scale = 0.0f64;
                    for _ in 0..50 {
                        let x = rng.gen_range(0.0..1.0);
                        let y = rng.gen_range(0.0..1.0);
                        let t = target.value(x, y);
                        scale = scale.max(t.abs());
                        err = err.max((el.eval_combination(&coeffs, x, y, 0, 0) - t).abs());
                    }
                    assert!(
                        err < 1e-8 * scale.max(1.0),
                        "{flavor} k={k}: reproduction error {err:.3e}"
                    );
                }
            }
        }
    }

    #[test]
    fn serendipity_shapes_stay_inside_qk() {
        for k in [4usize, 5, 6, 8] {
            let el = build_serendipity_element(k).unwrap();
            for s in &el.shape_functions.functions {
                assert!(s.is_in_qk(k, 1e-9), "k={k}: shape escapes Qk");
            }
        }
    }

    #[test]
    fn edge_traces_determined_by_closed_edge_dofs() {
        for k in 4..=8usize {
            let el = build_serendipity_element(k).unwrap();
            let defect = edge_trace_defect(&el, 33);
            assert!(defect < 1e-8, "k={k}: edge trace defect {defect:.3e}");
        }
    }

    #[test]
    fn factored_and_monomial_evaluations_agree_at_low_degree() {
        let el = build_serendipity_element(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let x = rng.gen_range(0.0..1.0);
            let y = rng.gen_range(0.0..1.0);
            for j in [0usize, 7, 16, 31] {
                let fast = el.eval_shape(j, x, y, 0, 0);
                let grid = el.shape_functions.functions[j].value(x, y);
                assert!((fast - grid).abs() < 1e-9, "shape {j}: {fast} vs {grid}");
            }
        }
    }

    #[test]
    fn apply_dof_examples() {
        let one = Poly2D::monomial(0, 0).unwrap();
        let value = DofFunctional {
            kind: DofKind::Value,
            point: (0.0, 0.0),
            entity: Entity::Vertex(0),
        };
        assert_eq!(apply_dof(&value, &one, (1.0, 1.0)), 1.0);

        let x2 = Poly2D::monomial(2, 0).unwrap();
        let dx = DofFunctional {
            kind: DofKind::Dx,
            point: (1.0, 0.0),
            entity: Entity::Vertex(1),
        };
        assert_eq!(apply_dof(&dx, &x2, (1.0, 1.0)), 2.0);

        let xy = Poly2D::monomial(1, 1).unwrap();
        let dxy = DofFunctional {
            kind: DofKind::Dxy,
            point: (1.0, 1.0),
            entity: Entity::Vertex(2),
        };
        assert_eq!(apply_dof(&dxy, &xy, (0.5, 0.5)), 4.0);
    }

    #[test]
    fn local_interpolate_examples() {
        let el = build_bfs_element(4).unwrap();
        let zeros = local_interpolate(&el, |_, _, _, _| 0.0);
        assert!(zeros.iter().all(|c| *c == 0.0));

        // x + y lies in Q4 and interpolates exactly.
        let target = |x: f64, y: f64, a: usize, b: usize| match (a, b) {
            (0, 0) => x + y,
            (1, 0) | (0, 1) => 1.0,
            _ => 0.0,
        };
        let coeffs = local_interpolate(&el, target);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let x = rng.gen_range(0.0..1.0);
            let y = rng.gen_range(0.0..1.0);
            assert!((el.eval_combination(&coeffs, x, y, 0, 0) - (x + y)).abs() < 1e-11);
        }

        // x^6 lies in P6 and must be reproduced by the serendipity element.
        let el6 = build_serendipity_element(6).unwrap();
        let x6 = Poly2D::monomial(6, 0).unwrap();
        let coeffs = local_interpolate(&el6, |x, y, a, b| x6.eval(x, y, a, b).unwrap());
        for _ in 0..20 {
            let x: f64 = rng.gen_range(0.0..1.0);
            let y = rng.gen_range(0.0..1.0);
            let t = x.powi(6);
            let got = el6.eval_combination(&coeffs, x, y, 0, 0);
            assert!((got - t).abs() < 1e-9 * t.abs().max(1.0));
        }
    }

    #[test]
    fn unisolvence_report_examples() {
        let r4 = unisolvence_report(4, Flavor::Serendipity).unwrap();
        assert_eq!(r4.dim, 24);
        assert!(r4.pass);
        let r5 = unisolvence_report(5, Flavor::Serendipity).unwrap();
        assert_eq!(r5.dim, 32);
        assert!(r5.pass);
        let r8 = unisolvence_report(8, Flavor::Serendipity).unwrap();
        assert_eq!(r8.dim, 57);
        assert!(r8.pass);
        let b3 = unisolvence_report(3, Flavor::Bfs).unwrap();
        assert_eq!(b3.dim, 16);
        assert!(b3.pass);
    }

    #[test]
    fn k5_default_bubble_set_resolution() {
        // Whichever set the constructor settles on must certify; the flag
        // records whether the fallback was needed.
        let el = build_serendipity_element(5).unwrap();
        assert!(el.cond < UNISOLVENCE_COND_LIMIT);
        assert_eq!(el.bubble_ids.len(), 11);
    }

    #[test]
    fn wrong_bubble_swap_is_detected_or_certified() {
        // Replace d/dx at x4 (index 13) by d/dy at x4 (index 14). Either the
        // DOF matrix goes singular (reported as unisolvence failure) or the
        // certificate still passes and reports a finite condition.
        let mut ids = bubble_ids(6).unwrap();
        let pos = ids.iter().position(|&i| i == 13).unwrap();
        ids[pos] = 14;
        match build_serendipity_with_bubbles(6, &ids) {
            Err(Error::UnisolvenceFailure { bubbles, .. }) => {
                assert!(bubbles.contains(&14));
            }
            Ok(el) => {
                assert!(el.cond.is_finite());
                assert!(duality_defect(&el) < 1e-6);
            }
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn dump_element_layout() {
        let el = build_bfs_element(3).unwrap();
        let mut buf = Vec::new();
        dump_element(&el, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# bfs k=3 ndof=16"));
        // 16 shapes, each 4 coefficient rows plus a header line.
        assert_eq!(text.lines().count(), 1 + 16 * 5);
    }
}
