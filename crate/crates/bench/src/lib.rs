//! Seeded workloads shared by the benchmarks.

use ptables::synth::{random_table, TableShape};
use ptables::{ProbabilityTable, Rational};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Exact `rows x cols` table of rank at most `rank`, built from two-result
/// interventions (plus one single-result row when `rows` is odd).
pub fn workload(rows: usize, cols: usize, rank: usize, seed: u64) -> ProbabilityTable<Rational> {
    let mut results = vec![2; rows / 2];
    if rows % 2 == 1 {
        results.push(1);
    }
    let shape = TableShape { results_per_intervention: results, preparations: cols };
    random_table(&mut ChaCha8Rng::seed_from_u64(seed), &shape, rank)
}

/// Sizes used by the benchmarks: (rows, cols, rank).
pub const SIZES: [(usize, usize, usize); 3] = [(6, 7, 3), (12, 12, 6), (24, 32, 10)];
