//! Rank factorization of a probability table into preparation vectors and
//! result vectors, `p_ij = r_i . s_j`.
//!
//! After permuting rows and columns so that a nonsingular `K x K` block `a`
//! sits in the top-left corner, the table reads
//!
//! ```text
//!     | a  b |   | v |
//! p = |      | = |   | ( x  y )
//!     | c  d |   | w |
//! ```
//!
//! and for any nonsingular basis matrix `x` the remaining factors are
//! `y = x a^-1 b`, `v = a x^-1`, `w = c x^-1`. The columns of `(x y)` are the
//! preparation vectors and the rows of `(v; w)` are the result vectors.

use thiserror::Error;

use crate::matrix::{dot, select_pivots, Matrix};
use crate::scalar::{Scalar, ValueMode};
use crate::table::{ProbabilityTable, TableError, TableLayout};
use crate::Tolerances;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecomposeError {
    #[error("basis matrix is singular")]
    SingularBasisMatrix,
    #[error("basis matrix is {found}x{found_cols}, rank is {rank}")]
    BasisShape { rank: usize, found: usize, found_cols: usize },
    #[error("no nonsingular {rank}x{rank} submatrix found (found {pivots} pivots)")]
    DegenerateTable { rank: usize, pivots: usize },
    #[error("reconstruction error {max_error:e} exceeds tolerance {tol:e}")]
    ReconstructionFailed { max_error: f64, tol: f64 },
    #[error("rank {rank} outside 1..={max}")]
    InvalidRank { rank: usize, max: usize },
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Choice of the free `K x K` matrix `x` holding the first `K` preparation
/// vectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisChoice<T> {
    Identity,
    Explicit(Matrix<T>),
}

/// Basis used for the worked 6x7 example table, which turns its preparation
/// vectors into points on the plane `x = 1`.
pub fn example_basis<T: Scalar>() -> Matrix<T> {
    let rows: Vec<Vec<T>> = [[1, 1, 1], [1, 0, -1], [0, 1, 0]]
        .iter()
        .map(|r| r.iter().map(|&v| T::from_ratio(v, 1)).collect())
        .collect();
    Matrix::from_rows(&rows).expect("3x3")
}

/// The table rearranged so its leading `K x K` block is nonsingular.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockForm<T> {
    /// `row_perm[t]` is the original row placed at position `t`.
    pub row_perm: Vec<usize>,
    pub col_perm: Vec<usize>,
    pub a: Matrix<T>,
    pub b: Matrix<T>,
    pub c: Matrix<T>,
    pub d: Matrix<T>,
}

impl<T: Scalar> BlockForm<T> {
    pub fn rank(&self) -> usize {
        self.a.rows()
    }

    /// Cuts `entries` into blocks after applying the permutations.
    pub fn from_permutations(entries: &Matrix<T>, row_perm: Vec<usize>, col_perm: Vec<usize>, rank: usize) -> Self {
        let (top, bottom) = row_perm.split_at(rank);
        let (left, right) = col_perm.split_at(rank);
        Self {
            a: entries.select(top, left),
            b: entries.select(top, right),
            c: entries.select(bottom, left),
            d: entries.select(bottom, right),
            row_perm,
            col_perm,
        }
    }

    /// Whether `d = c a^-1 b`, which must hold when `K` is the true rank.
    pub fn verify_redundant_block(&self, tol: &Tolerances) -> bool {
        if self.d.is_empty() {
            return true;
        }
        let Some(a_inv) = self.a.inverse(tol.pivot_cutoff()) else {
            return false;
        };
        let predicted = self.c.mul(&a_inv).mul(&self.b);
        predicted.max_abs_diff(&self.d) <= rec_cutoff::<T>(tol)
    }
}

/// Preparation and result vectors of a table.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<T> {
    layout: TableLayout,
    rank: usize,
    basis: Matrix<T>,
    /// One vector per preparation, in the table's column order.
    preparation_vectors: Vec<Vec<T>>,
    /// One vector per result, in the table's row order.
    result_vectors: Vec<Vec<T>>,
    block_form: BlockForm<T>,
    v: Matrix<T>,
    w: Matrix<T>,
    y: Matrix<T>,
}

impl<T: Scalar> Decomposition<T> {
    pub fn layout(&self) -> &TableLayout {
        &self.layout
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn basis(&self) -> &Matrix<T> {
        &self.basis
    }

    pub fn preparation_vectors(&self) -> &[Vec<T>] {
        &self.preparation_vectors
    }

    pub fn result_vectors(&self) -> &[Vec<T>] {
        &self.result_vectors
    }

    pub fn preparation_vector(&self, j: usize) -> &[T] {
        &self.preparation_vectors[j]
    }

    pub fn result_vector(&self, i: usize) -> &[T] {
        &self.result_vectors[i]
    }

    pub fn block_form(&self) -> &BlockForm<T> {
        &self.block_form
    }

    /// Factors `(v, w, y)` of the block solution.
    pub fn factors(&self) -> (&Matrix<T>, &Matrix<T>, &Matrix<T>) {
        (&self.v, &self.w, &self.y)
    }

    pub fn mode(&self) -> ValueMode {
        T::MODE
    }

    /// `r_i . s_j` for every result and preparation.
    pub fn product_matrix(&self) -> Matrix<T> {
        let l = self.result_vectors.len();
        let m = self.preparation_vectors.len();
        let mut out = Matrix::zeros(l, m);
        for (i, r) in self.result_vectors.iter().enumerate() {
            for (j, s) in self.preparation_vectors.iter().enumerate() {
                out[(i, j)] = dot(r, s);
            }
        }
        out
    }

    /// Rebuilds a decomposition from stored vectors, e.g. one read from disk.
    ///
    /// The block form and factors are recomputed from the products
    /// `r_i . s_j` and the given permutations.
    pub fn from_vectors(
        layout: TableLayout,
        basis: Matrix<T>,
        preparation_vectors: Vec<Vec<T>>,
        result_vectors: Vec<Vec<T>>,
        row_perm: Vec<usize>,
        col_perm: Vec<usize>,
        tol: &Tolerances,
    ) -> Result<Self, DecomposeError> {
        let rank = basis.rows();
        let shape_ok = basis.cols() == rank
            && preparation_vectors.len() == layout.num_cols()
            && result_vectors.len() == layout.num_rows()
            && preparation_vectors.iter().chain(&result_vectors).all(|v| v.len() == rank)
            && is_permutation(&row_perm, layout.num_rows())
            && is_permutation(&col_perm, layout.num_cols());
        if !shape_ok {
            return Err(TableError::DimensionMismatch(
                "vector or permutation sizes disagree with the layout".into(),
            )
            .into());
        }
        let mut out = Self {
            layout,
            rank,
            basis,
            preparation_vectors,
            result_vectors,
            block_form: BlockForm {
                row_perm: Vec::new(),
                col_perm: Vec::new(),
                a: Matrix::zeros(0, 0),
                b: Matrix::zeros(0, 0),
                c: Matrix::zeros(0, 0),
                d: Matrix::zeros(0, 0),
            },
            v: Matrix::zeros(0, 0),
            w: Matrix::zeros(0, 0),
            y: Matrix::zeros(0, 0),
        };
        let entries = out.product_matrix();
        out.block_form = BlockForm::from_permutations(&entries, row_perm, col_perm, rank);
        let (top, bottom) = out.block_form.row_perm.split_at(rank);
        let right = &out.block_form.col_perm[rank..];
        let all: Vec<usize> = (0..rank).collect();
        let t = Matrix::from_rows(&out.result_vectors).unwrap_or_else(|| Matrix::zeros(0, rank));
        let u = Matrix::from_columns(rank, &out.preparation_vectors);
        out.v = t.select(top, &all);
        out.w = t.select(bottom, &all);
        out.y = u.select(&all, right);
        if out.block_form.a.inverse(tol.pivot_cutoff()).is_none() {
            return Err(DecomposeError::DegenerateTable { rank, pivots: 0 });
        }
        Ok(out)
    }
}

fn is_permutation(p: &[usize], n: usize) -> bool {
    let mut seen = vec![false; n];
    p.len() == n && p.iter().all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
}

fn rec_cutoff<T: Scalar>(tol: &Tolerances) -> f64 {
    match T::MODE {
        ValueMode::Exact => 0.0,
        ValueMode::Float => tol.rec,
    }
}

/// Rank `K` of the table: exact elimination for rationals, singular values
/// above `tol.rank` (or the default cutoff) for floats.
pub fn numerical_rank<T: Scalar>(table: &ProbabilityTable<T>, tol: &Tolerances) -> usize {
    table.entries().rank(tol.rank)
}

/// Permutations bringing a nonsingular `K x K` block to the top-left corner.
///
/// Rationals take the first nonzero pivot scanning columns then rows in
/// index order, so a table whose leading `K x K` minor is nonsingular keeps
/// identity permutations. Floats use complete pivoting.
pub fn pivot_block_form<T: Scalar>(
    table: &ProbabilityTable<T>,
    tol: &Tolerances,
) -> Result<BlockForm<T>, DecomposeError> {
    let rank = numerical_rank(table, tol);
    block_form_at_rank(table.entries(), rank, tol)
}

fn block_form_at_rank<T: Scalar>(
    entries: &Matrix<T>,
    rank: usize,
    tol: &Tolerances,
) -> Result<BlockForm<T>, DecomposeError> {
    let pivots = select_pivots(entries, T::PIVOTING, rank, tol.pivot_cutoff());
    if pivots.len() < rank {
        return Err(DecomposeError::DegenerateTable { rank, pivots: pivots.len() });
    }
    let mut pivot_rows: Vec<usize> = pivots.iter().map(|p| p.0).collect();
    let mut pivot_cols: Vec<usize> = pivots.iter().map(|p| p.1).collect();
    pivot_rows.sort_unstable();
    pivot_cols.sort_unstable();
    let row_perm = complete_permutation(&pivot_rows, entries.rows());
    let col_perm = complete_permutation(&pivot_cols, entries.cols());
    let block = BlockForm::from_permutations(entries, row_perm, col_perm, rank);
    if block.a.inverse(tol.pivot_cutoff()).is_none() {
        return Err(DecomposeError::DegenerateTable { rank, pivots: pivots.len() });
    }
    Ok(block)
}

/// `head` followed by the remaining indices of `0..n` in increasing order.
fn complete_permutation(head: &[usize], n: usize) -> Vec<usize> {
    let mut used = vec![false; n];
    for &i in head {
        used[i] = true;
    }
    head.iter().copied().chain((0..n).filter(|&i| !used[i])).collect()
}

pub fn decompose<T: Scalar>(
    table: &ProbabilityTable<T>,
    basis: &BasisChoice<T>,
    tol: &Tolerances,
) -> Result<Decomposition<T>, DecomposeError> {
    let block = pivot_block_form(table, tol)?;
    let rank = block.rank();
    let x = match basis {
        BasisChoice::Identity => Matrix::identity(rank),
        BasisChoice::Explicit(m) => {
            if m.rows() != rank || m.cols() != rank {
                return Err(DecomposeError::BasisShape { rank, found: m.rows(), found_cols: m.cols() });
            }
            m.clone()
        }
    };
    let x_inv = x.inverse(tol.pivot_cutoff()).ok_or(DecomposeError::SingularBasisMatrix)?;
    let a_inv = block
        .a
        .inverse(tol.pivot_cutoff())
        .ok_or(DecomposeError::DegenerateTable { rank, pivots: rank })?;

    let y = x.mul(&a_inv).mul(&block.b);
    let v = block.a.mul(&x_inv);
    let w = block.c.mul(&x_inv);

    let (l, m) = (table.num_rows(), table.num_cols());
    let mut preparation_vectors = vec![Vec::new(); m];
    for t in 0..m {
        let column = if t < rank { x.column(t) } else { y.column(t - rank) };
        preparation_vectors[block.col_perm[t]] = column;
    }
    let mut result_vectors = vec![Vec::new(); l];
    for t in 0..l {
        let row = if t < rank { v.row(t).to_vec() } else { w.row(t - rank).to_vec() };
        result_vectors[block.row_perm[t]] = row;
    }

    let out = Decomposition {
        layout: table.layout().clone(),
        rank,
        basis: x,
        preparation_vectors,
        result_vectors,
        block_form: block,
        v,
        w,
        y,
    };
    let max_error = out.product_matrix().max_abs_diff(table.entries());
    let cutoff = rec_cutoff::<T>(tol);
    if max_error > cutoff {
        return Err(DecomposeError::ReconstructionFailed { max_error, tol: cutoff });
    }
    Ok(out)
}

/// The table `p_ij = r_i . s_j`.
pub fn reconstruct<T: Scalar>(
    decomposition: &Decomposition<T>,
    tol: &Tolerances,
) -> Result<ProbabilityTable<T>, TableError> {
    ProbabilityTable::from_layout(
        decomposition.layout.clone(),
        decomposition.product_matrix(),
        tol.norm.max(tol.rec),
    )
}

/// Storage needed for the full table versus the factorized form with a
/// canonical basis matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompressionStats {
    pub original: usize,
    pub compressed: usize,
    pub saving: usize,
}

pub fn compression_stats(rows: usize, cols: usize, rank: usize) -> Result<CompressionStats, DecomposeError> {
    let max = rows.min(cols);
    if rank == 0 || rank > max {
        return Err(DecomposeError::InvalidRank { rank, max });
    }
    let original = rows * cols;
    let compressed = rank * (rows + cols) - rank * rank;
    Ok(CompressionStats { original, compressed, saving: original - compressed })
}
