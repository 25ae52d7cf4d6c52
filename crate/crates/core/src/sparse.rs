//! Compressed sparse row matrices over `f64` and `Complex64`.
//!
//! Only the handful of operations the discretization needs are provided:
//! triplet assembly with deterministic duplicate summation, products,
//! transposition and index-set restriction. Factorizations live in
//! [`crate::linalg`].

use std::fmt::Debug;
use std::ops::{AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use num_traits::{One, Zero};

pub type C64 = Complex64;

/// Scalar field of a [`CsrMatrix`].
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Zero
    + One
    + AddAssign
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn conj(self) -> Self;
    fn abs(self) -> f64;
    fn to_c64(self) -> C64;
}

impl Scalar for f64 {
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    #[inline]
    fn to_c64(self) -> C64 {
        C64::new(self, 0.0)
    }
}

impl Scalar for C64 {
    #[inline]
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    #[inline]
    fn abs(self) -> f64 {
        self.norm()
    }
    #[inline]
    fn to_c64(self) -> C64 {
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets.
    ///
    /// Duplicates are summed in insertion order, so the result is
    /// bit-reproducible for a fixed triplet sequence. Panics on out-of-range
    /// indices.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        // stable bucket by row
        let mut next = counts.clone();
        let mut order = vec![0usize; triplets.len()];
        for (t, &(r, _, _)) in triplets.iter().enumerate() {
            order[next[r]] = t;
            next[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<usize> = Vec::new();
        for r in 0..nrows {
            scratch.clear();
            scratch.extend_from_slice(&order[counts[r]..counts[r + 1]]);
            scratch.sort_by_key(|&t| triplets[t].1);
            let mut last_col = usize::MAX;
            for &t in &scratch {
                let (_, c, v) = triplets[t];
                if c == last_col {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last_col = c;
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Builds a matrix from per-row `(col, value)` lists whose columns are
    /// already strictly increasing.
    pub fn from_sorted_rows(ncols: usize, rows: Vec<Vec<(usize, T)>>) -> Self {
        let nrows = rows.len();
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                debug_assert!(c < ncols);
                debug_assert!(col_idx.len() == *row_ptr.last().unwrap() || *col_idx.last().unwrap() < c);
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Stored entry at `(i, j)`, zero if not in the pattern.
    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => T::zero(),
        }
    }

    pub fn has_entry(&self, i: usize, j: usize) -> bool {
        self.row(i).0.binary_search(&j).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols, "dimension mismatch in mul_vec");
        (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                let mut acc = T::zero();
                for (&j, &v) in cols.iter().zip(vals) {
                    acc += v * x[j];
                }
                acc
            })
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                col_idx[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn to_complex(&self) -> CsrMatrix<C64> {
        self.map(Scalar::to_c64)
    }

    pub fn conj(&self) -> Self {
        self.map(Scalar::conj)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| s * v)
    }

    /// Sparse product `self * rhs` (Gustavson's row-by-row algorithm).
    pub fn matmul(&self, rhs: &CsrMatrix<T>) -> CsrMatrix<T> {
        assert_eq!(self.ncols, rhs.nrows, "dimension mismatch in matmul");
        let mut acc = vec![T::zero(); rhs.ncols];
        let mut marker = vec![usize::MAX; rhs.ncols];
        let mut touched: Vec<usize> = Vec::new();
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..self.nrows {
            touched.clear();
            let (acols, avals) = self.row(i);
            for (&k, &a) in acols.iter().zip(avals) {
                let (bcols, bvals) = rhs.row(k);
                for (&j, &b) in bcols.iter().zip(bvals) {
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = T::zero();
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_idx.push(j);
                values.push(acc[j]);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: rhs.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Entrywise linear combination `alpha * self + beta * rhs`.
    pub fn add_scaled(&self, alpha: T, rhs: &CsrMatrix<T>, beta: T) -> CsrMatrix<T> {
        assert_eq!((self.nrows, self.ncols), (rhs.nrows, rhs.ncols), "dimension mismatch in add");
        let mut rows = Vec::with_capacity(self.nrows);
        for i in 0..self.nrows {
            let (ac, av) = self.row(i);
            let (bc, bv) = rhs.row(i);
            let mut row = Vec::with_capacity(ac.len() + bc.len());
            let (mut p, mut q) = (0, 0);
            while p < ac.len() || q < bc.len() {
                if q == bc.len() || (p < ac.len() && ac[p] < bc[q]) {
                    row.push((ac[p], alpha * av[p]));
                    p += 1;
                } else if p == ac.len() || bc[q] < ac[p] {
                    row.push((bc[q], beta * bv[q]));
                    q += 1;
                } else {
                    row.push((ac[p], alpha * av[p] + beta * bv[q]));
                    p += 1;
                    q += 1;
                }
            }
            rows.push(row);
        }
        CsrMatrix::from_sorted_rows(self.ncols, rows)
    }

    /// Submatrix on the given row and column index lists (in that order).
    ///
    /// Column indices must be strictly increasing so that the restricted rows
    /// stay sorted.
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix<T> {
        debug_assert!(cols.windows(2).all(|w| w[0] < w[1]));
        let mut local = vec![usize::MAX; self.ncols];
        for (l, &c) in cols.iter().enumerate() {
            local[c] = l;
        }
        let out_rows = rows
            .iter()
            .map(|&r| {
                let (rc, rv) = self.row(r);
                rc.iter()
                    .zip(rv)
                    .filter(|(c, _)| local[**c] != usize::MAX)
                    .map(|(&c, &v)| (local[c], v))
                    .collect()
            })
            .collect();
        CsrMatrix::from_sorted_rows(cols.len(), out_rows)
    }

    /// Dense row-major copy, for tests and small systems.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.ncols]; self.nrows];
        for (i, j, v) in self.iter() {
            d[i][j] += v;
        }
        d
    }

    /// Sum of all stored entries.
    pub fn total(&self) -> T {
        let mut s = T::zero();
        for &v in &self.values {
            s += v;
        }
        s
    }

    /// Largest entrywise deviation from symmetry `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        self.iter()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// Hermitian inner product `y^H x`.
pub fn dot_h(y: &[C64], x: &[C64]) -> C64 {
    y.iter().zip(x).map(|(a, b)| a.conj() * b).sum()
}

/// `v^H A v` for a real matrix and complex vector.
pub fn quadratic_form(a: &CsrMatrix<f64>, v: &[C64]) -> C64 {
    let mut s = C64::zero();
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        let mut row = C64::zero();
        for (&j, &w) in cols.iter().zip(vals) {
            row += v[j] * w;
        }
        s += v[i].conj() * row;
    }
    s
}

/// Real matrix times complex vector.
pub fn mul_real_complex(a: &CsrMatrix<f64>, x: &[C64]) -> Vec<C64> {
    assert_eq!(x.len(), a.ncols());
    (0..a.nrows())
        .map(|i| {
            let (cols, vals) = a.row(i);
            cols.iter().zip(vals).map(|(&j, &w)| x[j] * w).sum()
        })
        .collect()
}

pub fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm_inf(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm()).fold(0.0, f64::max)
}
