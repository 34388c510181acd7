//! Probability logic and Bayesian inference over the preparations of a
//! table.
//!
//! Given repeated trials of an unknown preparation, the posterior over the
//! table's preparations follows from Bayes' rule with the table columns as
//! likelihoods. The posterior-weighted mixture of preparation vectors is the
//! effective vector of the unknown preparation, and its scalar products with
//! the result vectors give predictive probabilities.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedIndex, Distribution};
use thiserror::Error;

use crate::decompose::Decomposition;
use crate::geometry::intervention_sum_vectors;
use crate::matrix::{dot, Matrix};
use crate::scalar::{ln_rational, Rational, Scalar};
use crate::table::{ProbabilityTable, TableLayout};
use crate::Tolerances;

/// Name of the generator used by [`simulate_observations`].
pub const RNG_ALGORITHM: &str = "ChaCha8";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("results {0:?} do not all belong to one intervention")]
    ResultsNotSameIntervention(Vec<usize>),
    #[error("result {0} listed more than once")]
    DuplicateResult(usize),
    #[error("both results belong to intervention {0}")]
    SameIntervention(usize),
    #[error("intervention weights must be nonnegative and sum to 1 (got {0})")]
    WeightsNotNormalized(String),
    #[error("prior must be nonnegative, sum to 1 and cover {expected} preparations")]
    InvalidPrior { expected: usize },
    #[error("observed data has zero probability under every preparation with prior weight")]
    ZeroEvidence,
    #[error("unknown result `{intervention}/{result}`")]
    UnknownResult { intervention: String, result: String },
    #[error("unknown preparation `{0}`")]
    UnknownPreparation(String),
    #[error("index {0} out of range")]
    OutOfRange(usize),
    #[error("observed results span rank {observed}, need {needed}")]
    InsufficientCoverage { observed: usize, needed: usize },
}

/// Counts of observed results, keyed by table row.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObservationSet {
    counts: BTreeMap<usize, u64>,
    pub seed: Option<u64>,
    pub rng: Option<String>,
    pub true_preparation: Option<String>,
}

impl ObservationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_rows(layout: &TableLayout, rows: impl IntoIterator<Item = (usize, u64)>) -> Result<Self, InferenceError> {
        let mut out = Self::new();
        for (row, n) in rows {
            if row >= layout.num_rows() {
                return Err(InferenceError::OutOfRange(row));
            }
            out.add(row, n);
        }
        Ok(out)
    }

    pub fn from_labels<'a>(
        layout: &TableLayout,
        counts: impl IntoIterator<Item = (&'a str, &'a str, u64)>,
    ) -> Result<Self, InferenceError> {
        let mut out = Self::new();
        for (intervention, result, n) in counts {
            let row = layout.row_index(intervention, result).ok_or_else(|| {
                InferenceError::UnknownResult { intervention: intervention.into(), result: result.into() }
            })?;
            out.add(row, n);
        }
        Ok(out)
    }

    pub fn add(&mut self, row: usize, n: u64) {
        if n > 0 {
            *self.counts.entry(row).or_default() += n;
        }
    }

    /// Nonzero counts in row order.
    pub fn counts(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().map(|(&r, &n)| (r, n))
    }

    pub fn count(&self, row: usize) -> u64 {
        self.counts.get(&row).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Union of two data sets; counts add.
    pub fn merged(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (r, n) in other.counts() {
            out.add(r, n);
        }
        out
    }

    /// Trials per intervention.
    pub fn intervention_totals(&self, layout: &TableLayout) -> Vec<u64> {
        let mut totals = vec![0; layout.interventions().len()];
        for (row, n) in self.counts() {
            totals[layout.locate_row(row).0] += n;
        }
        totals
    }
}

/// Prior weights over the preparations of a table.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior<T> {
    weights: Vec<T>,
}

impl<T: Scalar> Prior<T> {
    pub fn new(weights: Vec<T>, norm_tol: f64) -> Result<Self, InferenceError> {
        let expected = weights.len();
        let sum = weights.iter().cloned().fold(T::zero(), |a, b| a + b);
        if weights.is_empty() || weights.iter().any(|w| *w < T::zero()) || !sum.approx_eq(&T::one(), norm_tol) {
            return Err(InferenceError::InvalidPrior { expected });
        }
        Ok(Self { weights })
    }

    pub fn uniform(m: usize) -> Self {
        let w = T::one() / T::from_u64(m as u64);
        Self { weights: vec![w; m] }
    }

    pub fn point_mass(m: usize, j: usize) -> Self {
        let mut weights = vec![T::zero(); m];
        weights[j] = T::one();
        Self { weights }
    }

    /// Equal weight on the listed preparations, zero elsewhere.
    pub fn uniform_over(m: usize, support: &[usize]) -> Self {
        let w = T::one() / T::from_u64(support.len() as u64);
        let mut weights = vec![T::zero(); m];
        for &j in support {
            weights[j] = w.clone();
        }
        Self { weights }
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Result of a Bayesian update.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorReport<T> {
    pub posterior: Prior<T>,
    /// Natural log of `sum_j P(D | S_j) P(S_j)`.
    pub log_evidence: f64,
    /// `sum_j s_j P(S_j | D)`, when computed against a decomposition.
    pub effective_vector: Option<Vec<T>>,
}

impl<T: Scalar> PosteriorReport<T> {
    /// Index of the most probable preparation (lowest index on ties).
    pub fn mode(&self) -> usize {
        let w = self.posterior.weights();
        (0..w.len()).fold(0, |best, j| if w[j] > w[best] { j } else { best })
    }
}

/// Arithmetic for combining likelihoods, exact for rationals and in log
/// space for floats.
pub trait Evidence: Scalar {
    /// Returns normalized posterior weights and the log evidence, or `None`
    /// when the evidence vanishes.
    fn bayes(prior: &[Self], factors: &[Vec<(Self, u64)>]) -> Option<(Vec<Self>, f64)>;
}

impl Evidence for Rational {
    fn bayes(prior: &[Self], factors: &[Vec<(Self, u64)>]) -> Option<(Vec<Self>, f64)> {
        let joint: Vec<Rational> = prior
            .iter()
            .zip(factors)
            .map(|(w, fs)| fs.iter().fold(w.clone(), |acc, (p, n)| acc * p.powu(*n)))
            .collect();
        let evidence = joint.iter().cloned().fold(Rational::from_u64(0), |a, b| a + b);
        if evidence == Rational::from_u64(0) {
            return None;
        }
        let log_evidence = ln_rational(&evidence);
        Some((joint.into_iter().map(|x| x / evidence.clone()).collect(), log_evidence))
    }
}

impl Evidence for f64 {
    fn bayes(prior: &[Self], factors: &[Vec<(Self, u64)>]) -> Option<(Vec<Self>, f64)> {
        let logs: Vec<f64> = prior
            .iter()
            .zip(factors)
            .map(|(w, fs)| fs.iter().fold(w.ln(), |acc, (p, n)| acc + log_power(*p, *n)))
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return None;
        }
        let shifted: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = shifted.iter().sum();
        Some((shifted.iter().map(|x| x / total).collect(), max + total.ln()))
    }
}

fn log_power(p: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        n as f64 * p.ln()
    }
}

/// `(r_i + r_i' + ...) . s_j` for distinct results of one intervention.
pub fn disjunction_within<T: Scalar>(
    d: &Decomposition<T>,
    results: &[usize],
    prep: usize,
) -> Result<T, InferenceError> {
    let layout = d.layout();
    check_prep(layout, prep)?;
    let mut seen = Vec::new();
    let mut intervention = None;
    for &row in results {
        if row >= layout.num_rows() {
            return Err(InferenceError::OutOfRange(row));
        }
        if seen.contains(&row) {
            return Err(InferenceError::DuplicateResult(row));
        }
        seen.push(row);
        let k = layout.locate_row(row).0;
        if *intervention.get_or_insert(k) != k {
            return Err(InferenceError::ResultsNotSameIntervention(results.to_vec()));
        }
    }
    let combined = sum_vectors(results.iter().map(|&r| d.result_vector(r)), d.rank());
    Ok(dot(&combined, d.preparation_vector(prep)))
}

/// `[w' r_i' + w'' r_i''] . s_j` for results of two different interventions,
/// where `w'`, `w''` are the probabilities that each intervention was the
/// one performed. They depend on the experimental situation and are
/// supplied per call.
pub fn disjunction_across<T: Scalar>(
    d: &Decomposition<T>,
    (first, w_first): (usize, T),
    (second, w_second): (usize, T),
    prep: usize,
    tol: &Tolerances,
) -> Result<T, InferenceError> {
    let layout = d.layout();
    check_prep(layout, prep)?;
    for row in [first, second] {
        if row >= layout.num_rows() {
            return Err(InferenceError::OutOfRange(row));
        }
    }
    let (k1, k2) = (layout.locate_row(first).0, layout.locate_row(second).0);
    if k1 == k2 {
        return Err(InferenceError::SameIntervention(k1));
    }
    let sum = w_first.clone() + w_second.clone();
    if w_first < T::zero() || w_second < T::zero() || !sum.approx_eq(&T::one(), tol.norm) {
        return Err(InferenceError::WeightsNotNormalized(sum.to_string()));
    }
    let combined: Vec<T> = d
        .result_vector(first)
        .iter()
        .zip(d.result_vector(second))
        .map(|(a, b)| w_first.clone() * a.clone() + w_second.clone() * b.clone())
        .collect();
    Ok(dot(&combined, d.preparation_vector(prep)))
}

fn check_prep(layout: &TableLayout, prep: usize) -> Result<(), InferenceError> {
    if prep >= layout.num_cols() {
        return Err(InferenceError::OutOfRange(prep));
    }
    Ok(())
}

fn sum_vectors<'a, T: Scalar>(vs: impl Iterator<Item = &'a [T]>, dim: usize) -> Vec<T> {
    vs.fold(vec![T::zero(); dim], |acc, v| {
        acc.into_iter().zip(v).map(|(a, b)| a + b.clone()).collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Likelihood<T> {
    /// Exact for rationals; `exp(log)` for floats, which may underflow.
    pub value: T,
    pub log: f64,
}

/// `P(D | S_j) = prod p_ij^{n_i}` over observed results.
pub fn likelihood<T: Scalar>(table: &ProbabilityTable<T>, prep: usize, obs: &ObservationSet) -> Likelihood<T> {
    let value = obs
        .counts()
        .fold(T::one(), |acc, (row, n)| acc * table.get(row, prep).powu(n));
    let log = obs.counts().map(|(row, n)| log_power(table.get(row, prep).to_f64(), n)).sum();
    Likelihood { value, log }
}

/// Bayes' rule over the table's preparations.
pub fn posterior<T: Evidence>(
    table: &ProbabilityTable<T>,
    prior: &Prior<T>,
    obs: &ObservationSet,
) -> Result<PosteriorReport<T>, InferenceError> {
    if prior.len() != table.num_cols() {
        return Err(InferenceError::InvalidPrior { expected: table.num_cols() });
    }
    let factors: Vec<Vec<(T, u64)>> = (0..table.num_cols())
        .map(|j| obs.counts().map(|(row, n)| (table.get(row, j).clone(), n)).collect())
        .collect();
    let (weights, log_evidence) = T::bayes(prior.weights(), &factors).ok_or(InferenceError::ZeroEvidence)?;
    Ok(PosteriorReport { posterior: Prior { weights }, log_evidence, effective_vector: None })
}

/// Posterior plus the effective preparation vector from `d`.
pub fn posterior_with_vector<T: Evidence>(
    table: &ProbabilityTable<T>,
    d: &Decomposition<T>,
    prior: &Prior<T>,
    obs: &ObservationSet,
) -> Result<PosteriorReport<T>, InferenceError> {
    let mut report = posterior(table, prior, obs)?;
    report.effective_vector = Some(effective_vector(d, &report.posterior));
    Ok(report)
}

/// `P(R_i) = sum_j p_ij P(S_j)` for each result of intervention `k`.
pub fn predict<T: Scalar>(table: &ProbabilityTable<T>, weights: &Prior<T>, k: usize) -> Vec<T> {
    table
        .layout()
        .intervention_rows(k)
        .map(|i| {
            weights
                .weights()
                .iter()
                .enumerate()
                .fold(T::zero(), |acc, (j, w)| acc + table.get(i, j).clone() * w.clone())
        })
        .collect()
}

/// `P(R_i) = r_i . s` for each result of intervention `k`.
pub fn predict_from_vector<T: Scalar>(d: &Decomposition<T>, s: &[T], k: usize) -> Vec<T> {
    d.layout().intervention_rows(k).map(|i| dot(d.result_vector(i), s)).collect()
}

/// `s_new = sum_j s_j P(S_j)`.
pub fn effective_vector<T: Scalar>(d: &Decomposition<T>, weights: &Prior<T>) -> Vec<T> {
    let mut out = vec![T::zero(); d.rank()];
    for (s, w) in d.preparation_vectors().iter().zip(weights.weights()) {
        for (o, x) in out.iter_mut().zip(s) {
            *o = o.clone() + w.clone() * x.clone();
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<T> {
    /// Estimated preparation vector of the new preparation.
    pub vector: Vec<T>,
    /// Observed frequency per table row; `None` for unobserved interventions.
    pub frequencies: Vec<Option<T>>,
    /// Largest `|r_i . s - f_i|` over observed rows.
    pub max_residual: f64,
    /// Rank of the table with the implied column appended.
    pub augmented_rank: usize,
    pub rank: usize,
    /// Posterior over the known preparations, when a prior was supplied and
    /// the data are possible under it.
    pub posterior: Option<PosteriorReport<T>>,
}

impl<T> Embedding<T> {
    /// Appending the new column would raise the rank: the new preparation
    /// does not fit the table's vector representation.
    pub fn rank_would_grow(&self) -> bool {
        self.augmented_rank > self.rank
    }
}

/// Places a new, unlabeled preparation in the vector space of `d`.
///
/// Frequencies `f_i` are estimated per observed intervention, and `s`
/// solves `min sum_i (r_i . s - f_i)^2` over observed rows subject to
/// `e . s = 1`. Consistent frequencies are reproduced exactly. The implied
/// column (frequencies on observed rows, `r_i . s` elsewhere) is appended to
/// the table to check whether the rank is preserved; `rank_tol` overrides
/// the float singular-value cutoff, which noisy frequencies usually need.
pub fn embed_new_preparation<T: Evidence>(
    table: &ProbabilityTable<T>,
    d: &Decomposition<T>,
    obs: &ObservationSet,
    prior: Option<&Prior<T>>,
    tol: &Tolerances,
    rank_tol: Option<f64>,
) -> Result<Embedding<T>, InferenceError> {
    let layout = table.layout();
    let k_dim = d.rank();
    let totals = obs.intervention_totals(layout);
    let mut frequencies: Vec<Option<T>> = vec![None; layout.num_rows()];
    let mut rows = Vec::new();
    for (k, &total) in totals.iter().enumerate() {
        if total == 0 {
            continue;
        }
        for i in layout.intervention_rows(k) {
            frequencies[i] = Some(T::from_u64(obs.count(i)) / T::from_u64(total));
            rows.push(i);
        }
    }
    let design_rows: Vec<Vec<T>> = rows.iter().map(|&i| d.result_vector(i).to_vec()).collect();
    let observed = if design_rows.is_empty() {
        0
    } else {
        Matrix::from_rows(&design_rows).expect("rank-length rows").rank(tol.rank)
    };
    if observed < k_dim {
        return Err(InferenceError::InsufficientCoverage { observed, needed: k_dim });
    }
    let design = Matrix::from_rows(&design_rows).expect("rank-length rows");
    let target = Matrix::from_vec(rows.len(), 1, rows.iter().map(|&i| frequencies[i].clone().unwrap()).collect());
    let gram = design.transpose().mul(&design);
    let moment = design.transpose().mul(&target);

    let e = intervention_sum_vectors(d, tol).common;
    let vector = match e {
        Some(e) => {
            // KKT system [[A^T A, e], [e^T, 0]] [s; lambda] = [A^T f; 1].
            let n = k_dim + 1;
            let mut kkt = Matrix::zeros(n, n);
            let mut rhs = Matrix::zeros(n, 1);
            for a in 0..k_dim {
                for b in 0..k_dim {
                    kkt[(a, b)] = gram[(a, b)].clone();
                }
                kkt[(a, k_dim)] = e[a].clone();
                kkt[(k_dim, a)] = e[a].clone();
                rhs[(a, 0)] = moment[(a, 0)].clone();
            }
            rhs[(k_dim, 0)] = T::one();
            kkt.solve(&rhs, tol.pivot)
                .map(|sol| (0..k_dim).map(|a| sol[(a, 0)].clone()).collect::<Vec<T>>())
        }
        None => gram.solve(&moment, tol.pivot).map(|sol| sol.column(0)),
    }
    .ok_or(InferenceError::InsufficientCoverage { observed, needed: k_dim })?;

    let max_residual = rows
        .iter()
        .map(|&i| (dot(d.result_vector(i), &vector) - frequencies[i].clone().unwrap()).magnitude())
        .fold(0.0, f64::max);

    let column: Vec<T> = (0..layout.num_rows())
        .map(|i| frequencies[i].clone().unwrap_or_else(|| dot(d.result_vector(i), &vector)))
        .collect();
    let augmented = table
        .entries()
        .hconcat(&Matrix::from_vec(layout.num_rows(), 1, column));
    let augmented_rank = augmented.rank(rank_tol.or(tol.rank));
    let rank = table.entries().rank(rank_tol.or(tol.rank));

    let posterior = prior.and_then(|p| posterior_with_vector(table, d, p, obs).ok());
    Ok(Embedding { vector, frequencies, max_residual, augmented_rank, rank, posterior })
}

/// Draws `n` trials of each scheduled intervention on preparation `prep`.
///
/// Uses a ChaCha8 generator seeded from `seed`, so results are reproducible
/// across platforms.
pub fn simulate_observations<T: Scalar>(
    table: &ProbabilityTable<T>,
    prep: usize,
    schedule: &[(usize, u64)],
    seed: u64,
) -> Result<ObservationSet, InferenceError> {
    let layout = table.layout();
    check_prep(layout, prep)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs = ObservationSet::new();
    for &(k, n) in schedule {
        if k >= layout.interventions().len() {
            return Err(InferenceError::OutOfRange(k));
        }
        let rows: Vec<usize> = layout.intervention_rows(k).collect();
        let weights: Vec<f64> = rows.iter().map(|&i| table.get(i, prep).to_f64().max(0.0)).collect();
        let dist = WeightedIndex::new(&weights).expect("normalized column has positive mass");
        let mut counts = vec![0u64; rows.len()];
        for _ in 0..n {
            counts[dist.sample(&mut rng)] += 1;
        }
        for (row, c) in rows.into_iter().zip(counts) {
            obs.add(row, c);
        }
    }
    obs.seed = Some(seed);
    obs.rng = Some(RNG_ALGORITHM.to_string());
    obs.true_preparation = Some(layout.preparations()[prep].clone());
    Ok(obs)
}
