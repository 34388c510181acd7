//! Small dense row-major matrices and the elimination routines built on them.

use std::ops::{Index, IndexMut};

use num::{BigInt, Integer, One, Zero};

use crate::scalar::{PivotStrategy, Rational, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T> Matrix<T> {
    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[T]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T: Clone> Matrix<T> {
    /// Returns `None` when the rows are ragged.
    pub fn from_rows(rows: &[Vec<T>]) -> Option<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return None;
        }
        Some(Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().cloned().collect(),
        })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<T>]) -> Self {
        let cols = columns.len();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for c in columns {
                data.push(c[i].clone());
            }
        }
        Self { rows, cols, data }
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.row_iter().map(<[T]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self[(i, j)].clone());
            }
        }
        Self { rows: self.cols, cols: self.rows, data }
    }

    /// Submatrix picking `rows` and `cols` in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            for &j in cols {
                data.push(self[(i, j)].clone());
            }
        }
        Self { rows: rows.len(), cols: cols.len(), data }
    }

    /// Appends the columns of `other` on the right.
    pub fn hconcat(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows);
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Self { rows: self.rows, cols: self.cols + other.cols, data }
    }

    /// Appends the rows of `other` below.
    pub fn vconcat(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols);
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Self { rows: self.rows + other.rows, cols: self.cols, data }
    }
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matrix product shape");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let lhs = &self[(i, k)];
                if lhs.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let term = lhs.clone() * rhs[(k, j)].clone();
                    let acc = &mut out[(i, j)];
                    *acc = acc.clone() + term;
                }
            }
        }
        out
    }

    /// Largest absolute entrywise difference, as `f64`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.clone() - b.clone()).magnitude())
            .fold(0.0, f64::max)
    }

    pub fn to_f64(&self) -> Matrix<f64> {
        self.map(Scalar::to_f64)
    }

    pub fn rank(&self, tol: Option<f64>) -> usize {
        T::matrix_rank(self, tol)
    }

    /// Inverse by Gauss-Jordan elimination; `None` if singular.
    ///
    /// Floats use partial pivoting and treat pivots with magnitude `<= tol`
    /// as zero.
    pub fn inverse(&self, tol: f64) -> Option<Self> {
        assert_eq!(self.rows, self.cols, "inverse of non-square matrix");
        self.solve(&Self::identity(self.rows), tol)
    }

    /// Solves `self * X = rhs` for square `self`.
    pub fn solve(&self, rhs: &Self, tol: f64) -> Option<Self> {
        assert_eq!(self.rows, self.cols, "solve with non-square matrix");
        assert_eq!(self.rows, rhs.rows, "solve rhs shape");
        let n = self.rows;
        let mut aug = self.hconcat(rhs);
        let width = aug.cols;
        for col in 0..n {
            let pivot_row = match T::PIVOTING {
                PivotStrategy::FirstNonzero => (col..n).find(|&r| !aug[(r, col)].is_zero())?,
                PivotStrategy::Complete => {
                    let mut best = col;
                    for r in col + 1..n {
                        if aug[(r, col)].magnitude() > aug[(best, col)].magnitude() {
                            best = r;
                        }
                    }
                    best
                }
            };
            if aug[(pivot_row, col)].is_negligible(tol) {
                return None;
            }
            aug.swap_rows(pivot_row, col);
            let pivot = aug[(col, col)].clone();
            for j in 0..width {
                aug[(col, j)] = aug[(col, j)].clone() / pivot.clone();
            }
            for r in 0..n {
                if r == col || aug[(r, col)].is_zero() {
                    continue;
                }
                let factor = aug[(r, col)].clone();
                for j in 0..width {
                    let delta = factor.clone() * aug[(col, j)].clone();
                    aug[(r, j)] = aug[(r, j)].clone() - delta;
                }
            }
        }
        let cols: Vec<usize> = (n..width).collect();
        let rows: Vec<usize> = (0..n).collect();
        Some(aug.select(&rows, &cols))
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

/// Pivot positions `(row, col)` in the order they were chosen.
///
/// Stops after `limit` pivots or when no remaining entry exceeds `tol`.
/// Rows and columns are never physically swapped, so the returned indices
/// refer to the input matrix.
pub fn select_pivots<T: Scalar>(
    m: &Matrix<T>,
    strategy: PivotStrategy,
    limit: usize,
    tol: f64,
) -> Vec<(usize, usize)> {
    let mut work = m.clone();
    let mut row_used = vec![false; m.rows];
    let mut col_used = vec![false; m.cols];
    let mut pivots = Vec::new();
    while pivots.len() < limit {
        let found = match strategy {
            PivotStrategy::FirstNonzero => (0..m.cols)
                .filter(|&c| !col_used[c])
                .find_map(|c| {
                    (0..m.rows)
                        .find(|&r| !row_used[r] && !work[(r, c)].is_negligible(tol))
                        .map(|r| (r, c))
                }),
            PivotStrategy::Complete => {
                let mut best: Option<(usize, usize, f64)> = None;
                for r in (0..m.rows).filter(|&r| !row_used[r]) {
                    for c in (0..m.cols).filter(|&c| !col_used[c]) {
                        let mag = work[(r, c)].magnitude();
                        if best.is_none_or(|(_, _, b)| mag > b) {
                            best = Some((r, c, mag));
                        }
                    }
                }
                best.filter(|&(r, c, _)| !work[(r, c)].is_negligible(tol))
                    .map(|(r, c, _)| (r, c))
            }
        };
        let Some((pr, pc)) = found else { break };
        let pivot = work[(pr, pc)].clone();
        for r in 0..m.rows {
            if row_used[r] || r == pr || work[(r, pc)].is_zero() {
                continue;
            }
            let factor = work[(r, pc)].clone() / pivot.clone();
            for c in 0..m.cols {
                if col_used[c] {
                    continue;
                }
                let delta = factor.clone() * work[(pr, c)].clone();
                work[(r, c)] = work[(r, c)].clone() - delta;
            }
        }
        row_used[pr] = true;
        col_used[pc] = true;
        pivots.push((pr, pc));
    }
    pivots
}

/// Exact rank by fraction-free (Bareiss) elimination.
///
/// Each row is scaled by the lcm of its denominators so the elimination runs
/// entirely in integers.
pub fn bareiss_rank(m: &Matrix<Rational>) -> usize {
    let mut work: Vec<Vec<BigInt>> = m
        .row_iter()
        .map(|row| {
            let lcm = row.iter().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
            row.iter().map(|q| q.numer() * (&lcm / q.denom())).collect()
        })
        .collect();
    let (rows, cols) = (m.rows(), m.cols());
    let mut rank = 0;
    let mut prev = BigInt::one();
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let Some(p) = (rank..rows).find(|&r| !work[r][col].is_zero()) else {
            continue;
        };
        work.swap(rank, p);
        for r in rank + 1..rows {
            for c in col + 1..cols {
                let v = &work[rank][col] * &work[r][c] - &work[r][col] * &work[rank][c];
                work[r][c] = v / &prev;
            }
            work[r][col] = BigInt::zero();
        }
        prev = work[rank][col].clone();
        rank += 1;
    }
    rank
}

/// Default singular-value cutoff for a matrix with largest singular value
/// `sigma_max`.
pub fn default_rank_tol(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * sigma_max * f64::EPSILON
}

pub fn singular_values(m: &Matrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let dm = nalgebra::DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice());
    let mut sv: Vec<f64> = dm.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn svd_rank(m: &Matrix<f64>, tol: Option<f64>) -> usize {
    let sv = singular_values(m);
    let Some(&sigma_max) = sv.first() else { return 0 };
    let cutoff = tol.unwrap_or_else(|| default_rank_tol(m.rows(), m.cols(), sigma_max));
    sv.iter().filter(|&&s| s > cutoff).count()
}
