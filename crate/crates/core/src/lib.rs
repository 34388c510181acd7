//! Probability tables and their vector representation.
//!
//! A probability table lists `P(result | intervention, preparation)` with one
//! column per preparation and one group of rows per intervention. Factoring
//! the table at its rank `K` assigns a vector in `R^K` to every preparation
//! and every result so that each probability is a scalar product. This crate
//! builds and validates such tables, computes the factorization exactly or
//! in floating point, checks the geometry it induces, runs Bayesian
//! inference over preparations, and generates tables from quantum models.

pub mod decompose;
pub mod fixtures;
pub mod geometry;
pub mod hull;
pub mod inference;
pub mod io;
pub mod matrix;
pub mod quantum;
pub mod scalar;
pub mod synth;
pub mod table;

pub use decompose::{
    compression_stats, decompose, numerical_rank, pivot_block_form, reconstruct, BasisChoice,
    BlockForm, CompressionStats, DecomposeError, Decomposition,
};
pub use geometry::{GeometryReport, HullExport};
pub use inference::{InferenceError, ObservationSet, PosteriorReport, Prior};
pub use matrix::Matrix;
pub use quantum::{HermitianBasis, QuantumError, QuantumModel};
pub use scalar::{Rational, Scalar, ValueMode};
pub use table::{
    table_from_counts, InterventionSpec, ProbabilityTable, RawTable, TableError, TableLayout,
    ValidationReport,
};

/// Numerical tolerances. Exact-mode computations ignore all of them except
/// where a quantity is inherently floating point (quantum models, hulls).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Column normalization and entry range slack for float tables.
    pub norm: f64,
    /// Singular-value cutoff; `None` means `max(L, M) * sigma_max * eps`.
    pub rank: Option<f64>,
    /// Allowed `|r_i . s_j - p_ij|` for float decompositions.
    pub rec: f64,
    /// Smallest usable pivot magnitude in float elimination.
    pub pivot: f64,
    /// Geometry checks: sum-vector agreement, hyperplane, hull membership.
    pub geo: f64,
    /// Hermiticity, trace and basis checks on quantum operators.
    pub herm: f64,
    /// Allowed negative eigenvalue for positive semidefinite operators.
    pub psd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            norm: 1e-9,
            rank: None,
            rec: 1e-9,
            pivot: 1e-12,
            geo: 1e-8,
            herm: 1e-10,
            psd: 1e-10,
        }
    }
}

impl Tolerances {
    pub(crate) fn pivot_cutoff(&self) -> f64 {
        self.pivot
    }
}
