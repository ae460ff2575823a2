//! Dense symmetric factorizations and sparse row-major matrices.
//!
//! The interior-point method condenses its KKT systems into a dense
//! positive-definite matrix of the size of the variable space, so the only
//! heavy kernel needed here is a Cholesky factorization with forward/backward
//! substitution. Constraint matrices are kept in CSR form because the solver
//! iterates over rows (one cone row at a time) when assembling normal
//! equations.

/// Sparse matrix in compressed sparse row format.
#[derive(Debug, Clone, Default)]
pub struct CsrMat {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMat {
    pub fn from_rows(n_cols: usize, rows: &[Vec<(usize, f64)>]) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for &(j, v) in row {
                debug_assert!(j < n_cols);
                if v != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMat { n_rows: rows.len(), n_cols, row_ptr, cols, vals }
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.cols[lo..hi], &self.vals[lo..hi])
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[i] = acc;
        }
    }

    /// y += alpha * A^T x
    pub fn mul_transpose_acc(&self, x: &[f64], alpha: f64, y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_rows);
        debug_assert_eq!(y.len(), self.n_cols);
        for i in 0..self.n_rows {
            let xi = alpha * x[i];
            if xi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                y[*c] += v * xi;
            }
        }
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(c, v)| v * x[*c]).sum()
    }

    /// Infinity norm of each row.
    pub fn row_inf_norms(&self) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| {
                let (_, vals) = self.row(i);
                vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            })
            .collect()
    }

    /// Scale row i by e[i] and column j by d[j], in place.
    pub fn scale(&mut self, e: &[f64], d: &[f64]) {
        for i in 0..self.n_rows {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            for k in lo..hi {
                self.vals[k] *= e[i] * d[self.cols[k]];
            }
        }
    }
}

/// Dense symmetric matrix, row-major, lower triangle is authoritative.
#[derive(Debug, Clone)]
pub struct SymMat {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        SymMat { n, data: vec![0.0; n * n] }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        // store in lower triangle
        if i >= j {
            self.data[i * self.n + j] += v;
        } else {
            self.data[j * self.n + i] += v;
        }
    }

    /// self += w * (a a^T) for a sparse vector a (lower triangle only).
    pub fn rank1_sparse(&mut self, cols: &[usize], vals: &[f64], w: f64) {
        for (k, &ck) in cols.iter().enumerate() {
            let vk = w * vals[k];
            for (l, &cl) in cols.iter().enumerate().take(k + 1) {
                let (i, j) = if ck >= cl { (ck, cl) } else { (cl, ck) };
                self.data[i * self.n + j] += vk * vals[l];
            }
        }
    }

    /// self += w * (g g^T) for a dense vector with known support (lower triangle).
    pub fn rank1_dense_support(&mut self, support: &[usize], g: &[f64], w: f64) {
        for (k, &ck) in support.iter().enumerate() {
            let vk = w * g[ck];
            if vk == 0.0 {
                continue;
            }
            for &cl in support.iter().take(k + 1) {
                let (i, j) = if ck >= cl { (ck, cl) } else { (cl, ck) };
                self.data[i * self.n + j] += vk * g[cl];
            }
        }
    }
}

/// Cholesky factor L (lower, row-major) of a symmetric positive definite matrix.
pub struct Cholesky {
    pub n: usize,
    l: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotPositiveDefinite;

impl Cholesky {
    /// Factor the lower triangle of `m` (consumed), adding `reg` to the diagonal.
    pub fn factor(mut m: SymMat, reg: f64) -> Result<Self, NotPositiveDefinite> {
        let n = m.n;
        let l = &mut m.data;
        for j in 0..n {
            // diagonal
            let (head, tail) = l.split_at_mut(j * n + j);
            let row_j = &head[j * n..j * n + j];
            let mut d = tail[0] + reg;
            d -= row_j.iter().map(|v| v * v).sum::<f64>();
            if !(d > 0.0) || !d.is_finite() {
                return Err(NotPositiveDefinite);
            }
            let d = d.sqrt();
            tail[0] = d;
            let inv_d = 1.0 / d;
            for i in (j + 1)..n {
                let (above, cur) = l.split_at_mut(i * n);
                let row_j = &above[j * n..j * n + j];
                let row_i = &cur[..j];
                let dot: f64 = row_i.iter().zip(row_j).map(|(a, b)| a * b).sum();
                cur[j] = (cur[j] - dot) * inv_d;
            }
        }
        Ok(Cholesky { n, l: m.data })
    }

    /// Solve L L^T x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let l = &self.l;
        // forward: L y = b
        for i in 0..n {
            let row = &l[i * n..i * n + i];
            let dot: f64 = row.iter().zip(b.iter()).map(|(a, x)| a * x).sum();
            b[i] = (b[i] - dot) / l[i * n + i];
        }
        // backward: L^T x = y   (row-oriented saxpy keeps accesses contiguous)
        for i in (0..n).rev() {
            let xi = b[i] / l[i * n + i];
            b[i] = xi;
            let row = &l[i * n..i * n + i];
            for (k, lik) in row.iter().enumerate() {
                b[k] -= lik * xi;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cholesky_solves_spd_system() {
        // A = B B^T + I for a fixed B
        let b_rows = [[1.0, 2.0, 0.5], [0.0, 1.0, -1.0], [3.0, 0.0, 2.0]];
        let n = 3;
        let mut a = SymMat::zeros(n);
        for i in 0..n {
            a.add(i, i, 1.0);
            for j in 0..=i {
                let v: f64 = (0..n).map(|k| b_rows[i][k] * b_rows[j][k]).sum();
                a.add(i, j, v);
            }
        }
        let dense: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let (r, c) = if i >= j { (i, j) } else { (j, i) };
                        a.data[r * n + c]
                    })
                    .collect()
            })
            .collect();
        let chol = Cholesky::factor(a, 0.0).unwrap();
        let rhs = vec![1.0, -2.0, 0.25];
        let x = chol.solve(&rhs);
        for i in 0..n {
            let ax: f64 = (0..n).map(|j| dense[i][j] * x[j]).sum();
            assert_relative_eq!(ax, rhs[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = SymMat::zeros(2);
        a.add(0, 0, 1.0);
        a.add(1, 1, -1.0);
        assert!(Cholesky::factor(a, 0.0).is_err());
    }

    #[test]
    fn csr_matvec_roundtrip() {
        let rows = vec![vec![(0, 2.0), (2, -1.0)], vec![(1, 3.0)]];
        let m = CsrMat::from_rows(3, &rows);
        let x = [1.0, 2.0, 4.0];
        let mut y = [0.0; 2];
        m.mul_vec(&x, &mut y);
        assert_eq!(y, [-2.0, 6.0]);
        let mut z = [0.0; 3];
        m.mul_transpose_acc(&y, 1.0, &mut z);
        assert_eq!(z, [-4.0, 18.0, 2.0]);
    }
}
