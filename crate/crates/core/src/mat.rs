//! Minimal row-major matrix used for channel blocks and decision variables.

use num_complex::Complex64;
use std::ops::{Index, IndexMut};

#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type CMat = Mat<Complex64>;

impl<T: Clone + Default> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![T::default(); rows * cols] }
    }
}

impl<T> Mat<T> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = &T> + '_ {
        (0..self.rows).map(move |i| &self[(i, j)])
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl CMat {
    /// Column j as an owned vector (channel/beam vectors are columns).
    pub fn col_vec(&self, j: usize) -> Vec<Complex64> {
        self.column(j).copied().collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[Complex64]) {
        debug_assert_eq!(v.len(), self.rows);
        for (i, x) in v.iter().enumerate() {
            self[(i, j)] = *x;
        }
    }
}

/// h^H w for two complex vectors of equal length.
pub fn inner_h(h: &[Complex64], w: &[Complex64]) -> Complex64 {
    debug_assert_eq!(h.len(), w.len());
    h.iter().zip(w).map(|(a, b)| a.conj() * b).sum()
}

/// Squared Euclidean norm of a complex vector.
pub fn norm_sq(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inner_product_conjugates_left_argument() {
        let h = [Complex64::new(0.0, 1.0)];
        let w = [Complex64::new(0.0, 1.0)];
        // (i)^H (i) = (-i)(i) = 1
        assert_eq!(inner_h(&h, &w), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn matrix_indexing_is_row_major() {
        let m = Mat::from_fn(2, 3, |i, j| (i * 10 + j) as f64);
        assert_eq!(m[(1, 2)], 12.0);
        assert_eq!(m.row(1), &[10.0, 11.0, 12.0]);
    }
}
