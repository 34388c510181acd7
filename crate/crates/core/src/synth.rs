//! Random valid tables of bounded rank, for tests and benchmarks.
//!
//! A table of rank at most `K` is built by drawing `K` random columns (one
//! probability distribution per intervention) and filling the remaining
//! columns with random convex mixtures of them.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::matrix::Matrix;
use crate::scalar::{Rational, Scalar};
use crate::table::{InterventionSpec, ProbabilityTable};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableShape {
    pub results_per_intervention: Vec<usize>,
    pub preparations: usize,
}

impl TableShape {
    pub fn rows(&self) -> usize {
        self.results_per_intervention.iter().sum()
    }
}

/// Random shape with at most `max_rows` results and `max_cols` preparations.
pub fn random_shape<R: Rng + ?Sized>(rng: &mut R, max_rows: usize, max_cols: usize) -> TableShape {
    let target_rows = rng.random_range(1..=max_rows);
    let mut results = Vec::new();
    let mut used = 0;
    while used < target_rows {
        let n = rng.random_range(1..=(target_rows - used).min(4));
        results.push(n);
        used += n;
    }
    TableShape { results_per_intervention: results, preparations: rng.random_range(1..=max_cols) }
}

fn random_distribution<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Rational> {
    loop {
        let w: Vec<i64> = (0..n).map(|_| rng.random_range(0..=4)).collect();
        let total: i64 = w.iter().sum();
        if total > 0 {
            return w.into_iter().map(|x| Rational::from_ratio(x, total)).collect();
        }
    }
}

/// Exact table of the given shape whose rank is at most `max_rank`.
pub fn random_table<R: Rng + ?Sized>(rng: &mut R, shape: &TableShape, max_rank: usize) -> ProbabilityTable<Rational> {
    let rows = shape.rows();
    let m = shape.preparations;
    let k = max_rank.clamp(1, m);
    let extremes: Vec<Vec<Rational>> = (0..k)
        .map(|_| {
            shape
                .results_per_intervention
                .iter()
                .flat_map(|&n| random_distribution(rng, n))
                .collect()
        })
        .collect();
    let mut columns = extremes.clone();
    for _ in k..m {
        let mix = random_distribution(rng, k);
        let col = (0..rows)
            .map(|i| {
                mix.iter()
                    .zip(&extremes)
                    .fold(Rational::from_u64(0), |acc, (w, e)| acc + w.clone() * e[i].clone())
            })
            .collect();
        columns.push(col);
    }
    columns.shuffle(rng);
    let interventions = shape
        .results_per_intervention
        .iter()
        .enumerate()
        .map(|(k, &n)| InterventionSpec::new(format!("M_{}", k + 1), (0..n).map(|i| format!("R_{}", i + 1))))
        .collect();
    let preparations = (0..m).map(|j| format!("S_{}", j + 1)).collect();
    ProbabilityTable::build(preparations, interventions, Matrix::from_columns(rows, &columns), 0.0)
        .expect("mixtures of distributions are valid")
}

/// Random nonsingular `n x n` matrix with small integer entries.
pub fn random_basis<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix<T> {
    loop {
        let data: Vec<Rational> = (0..n * n).map(|_| Rational::from_ratio(rng.random_range(-3..=3), 1)).collect();
        let m = Matrix::from_vec(n, n, data);
        if m.inverse(0.0).is_some() {
            return m.map(|q| T::from_f64(Scalar::to_f64(q)).expect("small integers"));
        }
    }
}
