//! Dense f64 matrices and the handful of kernels the lab needs.
//!
//! Every kernel accumulates each output element in a fixed order (the
//! contraction index runs sequentially), so results are bitwise identical
//! whether or not the work is spread over the rayon pool.

use crate::parallel;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// `self * other^T`: (n×k)·(m×k)^T → n×m. Each entry is one ordered dot.
    pub fn mul_bt(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.cols, "mul_bt inner dimension");
        let (n, m, _k) = (self.rows, other.rows, self.cols);
        let mut c = Mat::zeros(n, m);
        let cols = m;
        parallel::for_each_chunk_mut(&mut c.data, cols.max(1), |i, out| {
            let a = self.row(i);
            for (j, o) in out.iter_mut().enumerate() {
                *o = dot(a, other.row(j));
            }
        });
        c
    }

    /// `self * other`: (n×k)·(k×m) → n×m, accumulated k-outer (axpy) per row.
    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "mul inner dimension");
        let (n, m, k) = (self.rows, other.cols, self.cols);
        let mut c = Mat::zeros(n, m);
        parallel::for_each_chunk_mut(&mut c.data, m.max(1), |i, out| {
            let a = self.row(i);
            let mut t = 0;
            while t + 4 <= k {
                axpy4(
                    out,
                    [a[t], a[t + 1], a[t + 2], a[t + 3]],
                    [other.row(t), other.row(t + 1), other.row(t + 2), other.row(t + 3)],
                );
                t += 4;
            }
            while t < k {
                axpy(out, a[t], other.row(t));
                t += 1;
            }
        });
        c
    }

    /// `self^T * other`: (k×n)^T·(k×m) → n×m. Row `r` of the result is the
    /// ordered sum over `t` of `self[t][r] * other.row(t)`.
    pub fn tr_mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "tr_mul inner dimension");
        let (k, n, m) = (self.rows, self.cols, other.cols);
        let mut c = Mat::zeros(n, m);
        parallel::for_each_chunk_mut(&mut c.data, m.max(1), |r, out| {
            let mut t = 0;
            while t + 4 <= k {
                axpy4(
                    out,
                    [
                        self.get(t, r),
                        self.get(t + 1, r),
                        self.get(t + 2, r),
                        self.get(t + 3, r),
                    ],
                    [other.row(t), other.row(t + 1), other.row(t + 2), other.row(t + 3)],
                );
                t += 4;
            }
            while t < k {
                axpy(out, self.get(t, r), other.row(t));
                t += 1;
            }
        });
        c
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "mul_vec dimension");
        parallel::map_range(self.rows, |i| dot(self.row(i), x))
    }

    /// `self^T * x`, accumulated row-by-row (sequential, deterministic).
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len(), "tr_mul_vec dimension");
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            axpy(&mut out, xi, self.row(i));
        }
        out
    }
}

/// Ordered dot product with four-lane unrolling.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (pa, pb) in ca.zip(cb) {
        acc[0] += pa[0] * pb[0];
        acc[1] += pa[1] * pb[1];
        acc[2] += pa[2] * pb[2];
        acc[3] += pa[3] * pb[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
fn axpy(out: &mut [f64], s: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += s * v;
    }
}

#[inline]
fn axpy4(out: &mut [f64], s: [f64; 4], x: [&[f64]; 4]) {
    let n = out.len();
    let (x0, x1, x2, x3) = (&x[0][..n], &x[1][..n], &x[2][..n], &x[3][..n]);
    for (j, o) in out.iter_mut().enumerate() {
        *o += s[0] * x0[j] + s[1] * x1[j] + s[2] * x2[j] + s[3] * x3[j];
    }
}

/// Minimum-norm least-squares solution of `a x ≈ y` via one-sided Jacobi SVD.
///
/// Singular values below `cutoff_rel * σ_max` are treated as zero, which is
/// what makes the solution well defined for rank-deficient systems.
pub fn min_norm_least_squares(a: &Mat, y: &[f64], cutoff_rel: f64) -> Vec<f64> {
    assert_eq!(a.rows, y.len(), "least squares rhs length");
    let (n, p) = (a.rows, a.cols);
    if p == 0 {
        return Vec::new();
    }
    // Column-major working copies: g = A columns, v = identity columns.
    let mut g: Vec<Vec<f64>> = (0..p).map(|j| (0..n).map(|i| a.get(i, j)).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let mut e = vec![0.0; p];
            e[j] = 1.0;
            e
        })
        .collect();

    let tol = 1e-14;
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..p {
            for j in (i + 1)..p {
                let (alpha, beta, gamma) = col_moments(&g[i], &g[j]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut g, i, j, c, s);
                rotate_pair(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let sq_norms: Vec<f64> = g.iter().map(|col| dot(col, col)).collect();
    let sigma_max = sq_norms.iter().cloned().fold(0.0f64, f64::max).sqrt();
    if sigma_max == 0.0 {
        return vec![0.0; p];
    }
    let cut = cutoff_rel * sigma_max;

    let mut x = vec![0.0; p];
    for j in 0..p {
        let sigma = sq_norms[j].sqrt();
        if sigma <= cut {
            continue;
        }
        // coefficient along v_j: <u_j, y>/σ = <g_j, y>/σ².
        let coef = dot(&g[j], y) / sq_norms[j];
        axpy(&mut x, coef, &v[j]);
    }
    x
}

fn col_moments(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    (dot(a, a), dot(b, b), dot(a, b))
}

fn rotate_pair(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(j);
    let (ci, cj) = (&mut lo[i], &mut hi[0]);
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let xi = *x;
        let yj = *y;
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}
