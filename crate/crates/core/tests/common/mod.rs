//! Reference computations that share no code with the crate's algorithms.
#![allow(dead_code, clippy::needless_range_loop)]

use num::{One, Signed, Zero};
use ptables::Rational;

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

pub fn qv(v: &[(i64, i64)]) -> Vec<Rational> {
    v.iter().map(|&(n, d)| q(n, d)).collect()
}

/// Textbook row reduction over the rationals.
pub fn rank_oracle(rows: &[Vec<Rational>]) -> usize {
    let mut m: Vec<Vec<Rational>> = rows.to_vec();
    let cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..m.len()).find(|&r| !m[r][c].is_zero()) else { continue };
        m.swap(rank, p);
        for r in 0..m.len() {
            if r != rank && !m[r][c].is_zero() {
                let f = m[r][c].clone() / m[rank][c].clone();
                for k in 0..cols {
                    let delta = f.clone() * m[rank][k].clone();
                    m[r][k] -= delta;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Laplace expansion along the first row.
pub fn det_oracle(m: &[Vec<Rational>]) -> Rational {
    match m.len() {
        0 => Rational::one(),
        1 => m[0][0].clone(),
        n => (0..n)
            .map(|j| {
                let minor: Vec<Vec<Rational>> =
                    m[1..].iter().map(|r| r.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, x)| x.clone()).collect()).collect();
                let term = m[0][j].clone() * det_oracle(&minor);
                if j % 2 == 0 { term } else { -term }
            })
            .fold(Rational::zero(), |a, b| a + b),
    }
}

/// Cramer's rule for `a x = b`.
pub fn solve_oracle(a: &[Vec<Rational>], b: &[Rational]) -> Vec<Rational> {
    let det = det_oracle(a);
    assert!(!det.is_zero(), "singular system");
    (0..a.len())
        .map(|j| {
            let replaced: Vec<Vec<Rational>> = a
                .iter()
                .zip(b)
                .map(|(row, bi)| row.iter().enumerate().map(|(c, x)| if c == j { bi.clone() } else { x.clone() }).collect())
                .collect();
            det_oracle(&replaced) / det.clone()
        })
        .collect()
}

pub fn dot_oracle(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).fold(Rational::zero(), |acc, (x, y)| acc + x * y)
}

/// Gaussian elimination with partial pivoting; pivots below
/// `rel * max|entry|` count as zero.
pub fn float_rank_oracle(rows: &[Vec<f64>], rel: f64) -> usize {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let cols = m.first().map_or(0, Vec::len);
    let scale = m.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut rank = 0;
    for c in 0..cols {
        if rank == m.len() {
            break;
        }
        let p = (rank..m.len()).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        if m[p][c].abs() <= rel * scale {
            continue;
        }
        m.swap(rank, p);
        for r in rank + 1..m.len() {
            let f = m[r][c] / m[rank][c];
            for k in c..cols {
                m[r][k] -= f * m[rank][k];
            }
        }
        rank += 1;
    }
    rank
}

/// `tr(A B)` via a full matrix product.
pub fn trace_oracle(a: &ptables::quantum::CMatrix, b: &ptables::quantum::CMatrix) -> f64 {
    (a * b).trace().re
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, x| a.max(x.abs()))
}

pub fn is_nonneg(x: &Rational) -> bool {
    !x.is_negative()
}
