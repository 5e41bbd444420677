//! Dense and sparse linear algebra for element construction and the
//! assembled biharmonic systems.
//!
//! Dense LU with partial pivoting backs the elementwise nodal-basis solves;
//! an up-looking sparse Cholesky (natural ordering) is the default solver
//! for the global SPD systems, with Jacobi-preconditioned conjugate
//! gradients as a fallback.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, Debug)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.add_to(i, j, a * other.get(k, j));
                }
            }
        }
        out
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (j, v) in self.row(i).iter().enumerate() {
                sums[j] += v.abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
pub struct LuFactors {
    lu: DenseMatrix,
    /// `piv[i]` is the original row stored at factored position `i`.
    piv: Vec<usize>,
    n: usize,
}

/// Factor a square matrix; an exactly zero pivot after pivoting is reported
/// as singular.
pub fn lu_factor(a: &DenseMatrix) -> Result<LuFactors> {
    assert_eq!(a.rows(), a.cols(), "LU requires a square matrix");
    let n = a.rows();
    let mut lu = a.clone();
    let mut piv: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        let mut best = lu.get(k, k).abs();
        for i in (k + 1)..n {
            let v = lu.get(i, k).abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return Err(Error::SingularMatrix { step: k });
        }
        if p != k {
            for j in 0..n {
                let tmp = lu.get(k, j);
                lu.set(k, j, lu.get(p, j));
                lu.set(p, j, tmp);
            }
            piv.swap(k, p);
        }
        let pivot = lu.get(k, k);
        for i in (k + 1)..n {
            let m = lu.get(i, k) / pivot;
            lu.set(i, k, m);
            if m != 0.0 {
                for j in (k + 1)..n {
                    lu.add_to(i, j, -m * lu.get(k, j));
                }
            }
        }
    }
    Ok(LuFactors { lu, piv, n })
}

impl LuFactors {
    /// Solve `A x = b`.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        // Forward: L y = P b (unit lower triangle).
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu.get(i, j) * x[j];
            }
            x[i] = acc;
        }
        // Backward: U x = y.
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu.get(i, j) * x[j];
            }
            x[i] = acc / self.lu.get(i, i);
        }
        x
    }

    /// Solve `A^T x = b` using the same factors (`A^T = U^T L^T P`).
    pub fn solve_transpose_vec(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        // Forward: U^T z = b (U^T is lower triangular).
        let mut z = b.to_vec();
        for i in 0..n {
            let mut acc = z[i];
            for j in 0..i {
                acc -= self.lu.get(j, i) * z[j];
            }
            z[i] = acc / self.lu.get(i, i);
        }
        // Backward: L^T w = z (unit upper triangular).
        for i in (0..n).rev() {
            let mut acc = z[i];
            for j in (i + 1)..n {
                acc -= self.lu.get(j, i) * z[j];
            }
            z[i] = acc;
        }
        // x = P^T w.
        let mut x = vec![0.0; n];
        for (i, &p) in self.piv.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }

    /// Solve `A X = B` column by column.
    pub fn solve_mat(&self, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!(b.rows(), self.n);
        let mut x = DenseMatrix::zeros(self.n, b.cols());
        let mut col = vec![0.0; self.n];
        for j in 0..b.cols() {
            for i in 0..self.n {
                col[i] = b.get(i, j);
            }
            let sol = self.solve_vec(&col);
            for i in 0..self.n {
                x.set(i, j, sol[i]);
            }
        }
        x
    }
}

/// Solve `A X = B` with partial-pivoted LU.
pub fn lu_solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(lu_factor(a)?.solve_mat(b))
}

/// Estimate the 1-norm condition number `||A||_1 ||A^-1||_1`.
///
/// Uses Hager's estimator on `A^-1` through the LU factors, plus an
/// alternating-sign probe; returns `f64::INFINITY` for singular input.
pub fn condition_estimate(a: &DenseMatrix) -> f64 {
    let n = a.rows();
    if n == 0 {
        return 1.0;
    }
    let factors = match lu_factor(a) {
        Ok(f) => f,
        Err(_) => return f64::INFINITY,
    };
    let norm_a = a.one_norm();

    let mut x = vec![1.0 / n as f64; n];
    let mut est = 0.0f64;
    for _ in 0..5 {
        let y = factors.solve_vec(&x);
        est = est.max(y.iter().map(|v| v.abs()).sum());
        let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
        let z = factors.solve_transpose_vec(&xi);
        let (jmax, zmax) = z
            .iter()
            .enumerate()
            .map(|(j, v)| (j, v.abs()))
            .fold((0, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
        if zmax <= ztx {
            break;
        }
        x = vec![0.0; n];
        x[jmax] = 1.0;
    }
    // Alternating-sign safeguard against estimator blind spots.
    let v: Vec<f64> = (0..n)
        .map(|i| {
            let ramp = if n > 1 { 1.0 + i as f64 / (n - 1) as f64 } else { 1.0 };
            if i % 2 == 0 {
                ramp
            } else {
                -ramp
            }
        })
        .collect();
    let y = factors.solve_vec(&v);
    let alt = 2.0 * y.iter().map(|t| t.abs()).sum::<f64>() / (3.0 * n as f64);
    est = est.max(alt);

    if !est.is_finite() {
        return f64::INFINITY;
    }
    est * norm_a
}

/// Compressed sparse row matrix with sorted, duplicate-free columns per row.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_counts = vec![0usize; n + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < n && c < n, "triplet index out of range");
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_counts[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_counts[r + 1] += row_counts[r];
        }
        CsrMatrix {
            n,
            row_ptr: row_counts,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[i] = acc;
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                m.add_to(i, *c, *v);
            }
        }
        m
    }
}

/// Sparse Cholesky factor `A = L L^T` with natural ordering.
///
/// Columns store strictly-subdiagonal entries; diagonals live in `diag`.
pub struct SparseCholesky {
    n: usize,
    col_rows: Vec<Vec<usize>>,
    col_vals: Vec<Vec<f64>>,
    diag: Vec<f64>,
}

const NO_PARENT: usize = usize::MAX;

fn elimination_tree(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n;
    let mut parent = vec![NO_PARENT; n];
    let mut ancestor = vec![NO_PARENT; n];
    for k in 0..n {
        let (cols, _) = a.row(k);
        for &i0 in cols.iter().filter(|&&c| c < k) {
            let mut i = i0;
            while i != NO_PARENT && i != k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NO_PARENT {
                    parent[i] = k;
                    break;
                }
                i = next;
            }
        }
    }
    parent
}

impl SparseCholesky {
    /// Up-looking factorization; fails with `NotSpd` on a non-positive pivot.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let parent = elimination_tree(a);
        let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut col_vals: Vec<Vec<f64>> = vec![Vec::new(); n];
        let mut diag = vec![0.0; n];

        let mut stamp = vec![usize::MAX; n];
        let mut x = vec![0.0f64; n];
        let mut pattern: Vec<usize> = Vec::new();

        for k in 0..n {
            pattern.clear();
            stamp[k] = k;
            let (cols, vals) = a.row(k);
            let mut akk = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                if c < k {
                    // Climb the elimination tree to collect the row pattern.
                    let mut t = c;
                    while stamp[t] != k {
                        pattern.push(t);
                        stamp[t] = k;
                        x[t] = 0.0;
                        t = parent[t];
                        debug_assert!(t != NO_PARENT, "broken elimination tree");
                    }
                    x[c] = v;
                } else if c == k {
                    akk = v;
                }
            }
            pattern.sort_unstable();

            // Sparse forward solve L(0..k,0..k) z = A(0..k, k).
            let mut d = akk;
            for &j in pattern.iter() {
                let zj = x[j] / diag[j];
                x[j] = zj;
                let rows_j = &col_rows[j];
                let vals_j = &col_vals[j];
                for (r, v) in rows_j.iter().zip(vals_j) {
                    debug_assert!(stamp[*r] == k, "fill outside predicted pattern");
                    x[*r] -= v * zj;
                }
                d -= zj * zj;
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::NotSpd { row: k, value: d });
            }
            diag[k] = d.sqrt();
            for &j in pattern.iter() {
                col_rows[j].push(k);
                col_vals[j].push(x[j]);
            }
        }
        Ok(Self {
            n,
            col_rows,
            col_vals,
            diag,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut y = b.to_vec();
        // L y = b.
        for j in 0..n {
            y[j] /= self.diag[j];
            let yj = y[j];
            for (r, v) in self.col_rows[j].iter().zip(&self.col_vals[j]) {
                y[*r] -= v * yj;
            }
        }
        // L^T x = y.
        for j in (0..n).rev() {
            let mut acc = y[j];
            for (r, v) in self.col_rows[j].iter().zip(&self.col_vals[j]) {
                acc -= v * y[*r];
            }
            y[j] = acc / self.diag[j];
        }
        y
    }

    /// Subdiagonal fill of the factor.
    pub fn factor_nnz(&self) -> usize {
        self.col_rows.iter().map(Vec::len).sum()
    }
}

/// Solution of an SPD system together with the achieved residual.
#[derive(Clone, Debug)]
pub struct SpdSolution {
    pub x: Vec<f64>,
    /// `||A x - b||_2`.
    pub residual: f64,
    /// `||A x - b||_2 / ||b||_2` (zero for an empty or zero right side).
    pub relative_residual: f64,
    pub iterations: Option<usize>,
}

fn residual_norms(a: &CsrMatrix, x: &[f64], b: &[f64]) -> (f64, f64) {
    let mut r = vec![0.0; a.n];
    a.matvec(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri -= bi;
    }
    let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rel = if bn > 0.0 { rn / bn } else { 0.0 };
    (rn, rel)
}

/// Direct sparse Cholesky solve; one step of iterative refinement keeps the
/// residual at `1e-10 ||b||` or better on well-posed systems.
pub fn spd_solve(a: &CsrMatrix, b: &[f64]) -> Result<SpdSolution> {
    assert_eq!(a.n, b.len(), "rhs length mismatch");
    if a.n == 0 {
        return Ok(SpdSolution {
            x: Vec::new(),
            residual: 0.0,
            relative_residual: 0.0,
            iterations: None,
        });
    }
    let chol = SparseCholesky::factor(a)?;
    let mut x = chol.solve(b);
    let (mut rn, mut rel) = residual_norms(a, &x, b);
    if rel > 1e-10 {
        let mut r = vec![0.0; a.n];
        a.matvec(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let dx = chol.solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        let (rn2, rel2) = residual_norms(a, &x, b);
        rn = rn2;
        rel = rel2;
    }
    Ok(SpdSolution {
        x,
        residual: rn,
        relative_residual: rel,
        iterations: None,
    })
}

/// Jacobi-preconditioned conjugate gradients with iteration cap `50 n`.
pub fn spd_solve_pcg(a: &CsrMatrix, b: &[f64]) -> Result<SpdSolution> {
    assert_eq!(a.n, b.len(), "rhs length mismatch");
    let n = a.n;
    if n == 0 {
        return Ok(SpdSolution {
            x: Vec::new(),
            residual: 0.0,
            relative_residual: 0.0,
            iterations: Some(0),
        });
    }
    let mut inv_diag = vec![0.0; n];
    for i in 0..n {
        let (cols, vals) = a.row(i);
        let d = cols
            .iter()
            .zip(vals)
            .find(|(c, _)| **c == i)
            .map(|(_, v)| *v)
            .unwrap_or(0.0);
        if d <= 0.0 {
            return Err(Error::NotSpd { row: i, value: d });
        }
        inv_diag[i] = 1.0 / d;
    }
    let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bn == 0.0 {
        return Ok(SpdSolution {
            x: vec![0.0; n],
            residual: 0.0,
            relative_residual: 0.0,
            iterations: Some(0),
        });
    }
    let target = 1e-12 * bn;
    let cap = 50 * n;

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    for it in 0..cap {
        iterations = it + 1;
        a.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::NotSpd {
                row: it,
                value: pap,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rn <= target {
            let (res, rel) = residual_norms(a, &x, b);
            return Ok(SpdSolution {
                x,
                residual: res,
                relative_residual: rel,
                iterations: Some(iterations),
            });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let (res, _) = residual_norms(a, &x, b);
    Err(Error::CgDidNotConverge {
        residual: res,
        target,
        iterations,
    })
}
