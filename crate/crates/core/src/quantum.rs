//! Tables generated by quantum models: density matrices for preparations,
//! POVMs for interventions, and the trace rule `p = tr(Pi rho)` for entries.
//!
//! Expanding both operators in a basis of Hermitian matrices with
//! `tr(B_k B_l) = delta_kl` turns the trace rule into a real scalar product,
//! `tr(Pi rho) = r . s` with `r_k = tr(Pi B_k)` and `s_k = tr(rho B_k)`.
//! Complex matrices stay inside this module; everything it hands out is
//! real.

use nalgebra::{DMatrix, SymmetricEigen};
use num::complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::matrix::Matrix;
use crate::table::{InterventionSpec, ProbabilityTable, TableError};
use crate::Tolerances;

pub type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantumError {
    #[error("{what}: expected {expected}x{expected}, found {rows}x{cols}")]
    DimensionMismatch { what: String, expected: usize, rows: usize, cols: usize },
    #[error("{0} is not Hermitian")]
    NotHermitian(String),
    #[error("{what} has negative eigenvalue {min_eigenvalue:e}")]
    NotPositive { what: String, min_eigenvalue: f64 },
    #[error("{what} has trace {trace}, expected 1")]
    TraceNotOne { what: String, trace: f64 },
    #[error("elements of POVM `{povm}` do not sum to the identity (max deviation {deviation:e})")]
    PovmIncomplete { povm: String, deviation: f64 },
    #[error("purity {0} outside [0, 1]")]
    PurityOutOfRange(f64),
    #[error("trace value {0} is not a probability")]
    ProbabilityOutOfRange(f64),
    #[error("model needs at least one state and one POVM")]
    Empty,
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledOperator {
    pub label: String,
    pub matrix: CMatrix,
}

impl LabeledOperator {
    pub fn new(label: impl Into<String>, matrix: CMatrix) -> Self {
        Self { label: label.into(), matrix }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    pub name: String,
    pub elements: Vec<LabeledOperator>,
}

/// Validated density matrices and POVMs on a common Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumModel {
    dimension: usize,
    states: Vec<LabeledOperator>,
    povms: Vec<Povm>,
}

fn check_shape(what: &str, m: &CMatrix, n: usize) -> Result<(), QuantumError> {
    if m.nrows() != n || m.ncols() != n {
        return Err(QuantumError::DimensionMismatch {
            what: what.into(),
            expected: n,
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

/// Largest entrywise modulus of `m - m^dagger`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    let sym = (m + m.adjoint()).scale(0.5);
    SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn check_hermitian_psd(what: &str, m: &CMatrix, tol: &Tolerances) -> Result<(), QuantumError> {
    if hermiticity_defect(m) > tol.herm {
        return Err(QuantumError::NotHermitian(what.into()));
    }
    let min_eigenvalue = min_eigenvalue(m);
    if min_eigenvalue < -tol.psd {
        return Err(QuantumError::NotPositive { what: what.into(), min_eigenvalue });
    }
    Ok(())
}

impl QuantumModel {
    pub fn new(
        dimension: usize,
        states: Vec<LabeledOperator>,
        povms: Vec<Povm>,
        tol: &Tolerances,
    ) -> Result<Self, QuantumError> {
        if dimension == 0 || states.is_empty() || povms.is_empty() {
            return Err(QuantumError::Empty);
        }
        for s in &states {
            let what = format!("state `{}`", s.label);
            check_shape(&what, &s.matrix, dimension)?;
            check_hermitian_psd(&what, &s.matrix, tol)?;
            let trace = s.matrix.trace().re;
            if (trace - 1.0).abs() > tol.herm {
                return Err(QuantumError::TraceNotOne { what, trace });
            }
        }
        let identity = CMatrix::identity(dimension, dimension);
        for p in &povms {
            if p.elements.is_empty() {
                return Err(QuantumError::PovmIncomplete { povm: p.name.clone(), deviation: 1.0 });
            }
            let mut total = CMatrix::zeros(dimension, dimension);
            for e in &p.elements {
                let what = format!("element `{}` of POVM `{}`", e.label, p.name);
                check_shape(&what, &e.matrix, dimension)?;
                check_hermitian_psd(&what, &e.matrix, tol)?;
                total += &e.matrix;
            }
            let deviation = (total - &identity).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if deviation > tol.herm {
                return Err(QuantumError::PovmIncomplete { povm: p.name.clone(), deviation });
            }
        }
        Ok(Self { dimension, states, povms })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn states(&self) -> &[LabeledOperator] {
        &self.states
    }

    pub fn povms(&self) -> &[Povm] {
        &self.povms
    }
}

/// Orthonormal basis of the Hermitian `N x N` matrices under
/// `(A, B) = tr(A B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianBasis {
    dimension: usize,
    elements: Vec<CMatrix>,
}

impl HermitianBasis {
    /// Normalized generalized Gell-Mann matrices: `I / sqrt(N)`, then the
    /// symmetric off-diagonal, antisymmetric off-diagonal and traceless
    /// diagonal families.
    pub fn gell_mann(n: usize) -> Self {
        assert!(n >= 1, "dimension must be positive");
        let mut elements = Vec::with_capacity(n * n);
        let unit = |i: usize, j: usize, z: Complex64| {
            let mut m = CMatrix::zeros(n, n);
            m[(i, j)] = z;
            m
        };
        elements.push(CMatrix::identity(n, n).scale(1.0 / (n as f64).sqrt()));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for j in 0..n {
            for k in j + 1..n {
                elements.push(unit(j, k, Complex64::new(h, 0.0)) + unit(k, j, Complex64::new(h, 0.0)));
            }
        }
        for j in 0..n {
            for k in j + 1..n {
                elements.push(unit(j, k, Complex64::new(0.0, -h)) + unit(k, j, Complex64::new(0.0, h)));
            }
        }
        for l in 1..n {
            let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
            let mut m = CMatrix::zeros(n, n);
            for i in 0..l {
                m[(i, i)] = Complex64::new(norm, 0.0);
            }
            m[(l, l)] = Complex64::new(-(l as f64) * norm, 0.0);
            elements.push(m);
        }
        Self { dimension: n, elements }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Real matrix of `tr(B_k B_l)`; imaginary parts are discarded.
    pub fn gram(&self) -> Matrix<f64> {
        let k = self.elements.len();
        let mut g = Matrix::zeros(k, k);
        for (a, ba) in self.elements.iter().enumerate() {
            for (b, bb) in self.elements.iter().enumerate() {
                g[(a, b)] = trace_product(ba, bb).re;
            }
        }
        g
    }

    /// `sum_k c_k B_k`.
    pub fn combine(&self, coefficients: &[f64]) -> CMatrix {
        self.elements
            .iter()
            .zip(coefficients)
            .fold(CMatrix::zeros(self.dimension, self.dimension), |acc, (b, &c)| acc + b.scale(c))
    }
}

pub fn hermitian_basis(n: usize) -> HermitianBasis {
    HermitianBasis::gell_mann(n)
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Real coefficients `c_k = tr(A B_k)` of a Hermitian operator.
pub fn expand(op: &CMatrix, basis: &HermitianBasis, tol: &Tolerances) -> Result<Vec<f64>, QuantumError> {
    check_shape("operator", op, basis.dimension)?;
    if hermiticity_defect(op) > tol.herm {
        return Err(QuantumError::NotHermitian("operator".into()));
    }
    basis
        .elements
        .iter()
        .map(|b| {
            let c = trace_product(op, b);
            if c.im.abs() > tol.herm {
                Err(QuantumError::NotHermitian("operator".into()))
            } else {
                Ok(c.re)
            }
        })
        .collect()
}

fn check_pair(pi: &CMatrix, rho: &CMatrix) -> Result<(), QuantumError> {
    check_shape("effect", pi, rho.nrows())?;
    check_shape("state", rho, pi.nrows())
}

/// `tr(Pi rho)`, checked to lie within `[-psd, 1 + psd]` and clamped to
/// `[0, 1]`.
pub fn trace_probability(pi: &CMatrix, rho: &CMatrix, tol: &Tolerances) -> Result<f64, QuantumError> {
    check_pair(pi, rho)?;
    let p = trace_product(pi, rho).re;
    if !(-tol.psd..=1.0 + tol.psd).contains(&p) {
        return Err(QuantumError::ProbabilityOutOfRange(p));
    }
    Ok(p.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceCheck {
    pub trace_value: f64,
    pub dot_value: f64,
    pub agree: bool,
}

/// Compares `tr(Pi rho)` with `r . s` after expanding both operators in
/// the same basis.
pub fn scalar_product_check(
    pi: &CMatrix,
    rho: &CMatrix,
    basis: &HermitianBasis,
    tol: &Tolerances,
) -> Result<TraceCheck, QuantumError> {
    check_pair(pi, rho)?;
    let trace_value = trace_product(pi, rho).re;
    let r = expand(pi, basis, tol)?;
    let s = expand(rho, basis, tol)?;
    let dot_value: f64 = r.iter().zip(&s).map(|(a, b)| a * b).sum();
    Ok(TraceCheck { trace_value, dot_value, agree: (trace_value - dot_value).abs() <= tol.herm })
}

/// One column per state, one row per POVM element.
pub fn quantum_table(model: &QuantumModel, tol: &Tolerances) -> Result<ProbabilityTable<f64>, QuantumError> {
    let preparations: Vec<String> = model.states.iter().map(|s| s.label.clone()).collect();
    let interventions: Vec<InterventionSpec> = model
        .povms
        .iter()
        .map(|p| InterventionSpec::new(p.name.clone(), p.elements.iter().map(|e| e.label.clone())))
        .collect();
    let rows = model.povms.iter().map(|p| p.elements.len()).sum();
    let mut entries = Matrix::zeros(rows, model.states.len());
    let mut row = 0;
    for p in &model.povms {
        for e in &p.elements {
            for (j, s) in model.states.iter().enumerate() {
                entries[(row, j)] = trace_probability(&e.matrix, &s.matrix, tol)?;
            }
            row += 1;
        }
    }
    Ok(ProbabilityTable::build(preparations, interventions, entries, tol.norm)?)
}

/// A photon polarization preparation. Angles are in degrees: `angle` is the
/// orientation of the polarization ellipse, `ellipticity` runs from 0
/// (linear) to 45 (right circular). Purity mixes with the unpolarized state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationState {
    pub angle: f64,
    pub ellipticity: f64,
    pub purity: f64,
}

impl PolarizationState {
    pub fn linear(angle: f64) -> Self {
        Self { angle, ellipticity: 0.0, purity: 1.0 }
    }
}

/// A polarization filter that passes the given polarization and absorbs the
/// orthogonal one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationFilter {
    pub angle: f64,
    pub ellipticity: f64,
}

impl PolarizationFilter {
    pub fn linear(angle: f64) -> Self {
        Self { angle, ellipticity: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationGrid {
    pub preparations: Vec<PolarizationState>,
    pub filters: Vec<PolarizationFilter>,
}

impl PolarizationGrid {
    /// Linear polarizations only. `purities` pairs with `prep_angles`;
    /// missing entries default to 1.
    pub fn linear(prep_angles: &[f64], purities: &[f64], filter_angles: &[f64]) -> Self {
        Self {
            preparations: prep_angles
                .iter()
                .enumerate()
                .map(|(i, &angle)| PolarizationState {
                    angle,
                    ellipticity: 0.0,
                    purity: purities.get(i).copied().unwrap_or(1.0),
                })
                .collect(),
            filters: filter_angles.iter().map(|&a| PolarizationFilter::linear(a)).collect(),
        }
    }
}

/// Normalized Jones vector of the polarization ellipse.
pub fn jones_vector(angle_deg: f64, ellipticity_deg: f64) -> [Complex64; 2] {
    let (t, c) = (angle_deg.to_radians(), ellipticity_deg.to_radians());
    [
        Complex64::new(t.cos() * c.cos(), -t.sin() * c.sin()),
        Complex64::new(t.sin() * c.cos(), t.cos() * c.sin()),
    ]
}

fn projector(v: [Complex64; 2]) -> CMatrix {
    CMatrix::from_fn(2, 2, |i, j| v[i] * v[j].conj())
}

fn fmt_deg(x: f64) -> String {
    let s = format!("{x}");
    s.trim_end_matches(".0").to_string()
}

fn polarization_label(angle: f64, ellipticity: f64) -> String {
    if ellipticity == 0.0 {
        format!("{}deg", fmt_deg(angle))
    } else {
        format!("{}deg_e{}", fmt_deg(angle), fmt_deg(ellipticity))
    }
}

/// Builds a qubit model with `rho = purity |psi><psi| + (1 - purity) I/2`
/// for each preparation and a two-outcome POVM `{R_out, R_abs}` for each
/// filter. Linear polarizations alone span only three of the four real
/// dimensions; adding an elliptical state and filter makes the table
/// informationally complete.
pub fn qubit_polarization_preset(grid: &PolarizationGrid, tol: &Tolerances) -> Result<QuantumModel, QuantumError> {
    let half_identity = CMatrix::identity(2, 2).scale(0.5);
    let mut states = Vec::with_capacity(grid.preparations.len());
    for s in &grid.preparations {
        if !(0.0..=1.0).contains(&s.purity) {
            return Err(QuantumError::PurityOutOfRange(s.purity));
        }
        let rho = projector(jones_vector(s.angle, s.ellipticity)).scale(s.purity)
            + half_identity.scale(1.0 - s.purity);
        let label = if s.purity == 0.0 {
            "S_mixed".to_string()
        } else if s.purity == 1.0 {
            format!("S_{}", polarization_label(s.angle, s.ellipticity))
        } else {
            format!("S_{}_p{}", polarization_label(s.angle, s.ellipticity), fmt_deg(s.purity))
        };
        states.push(LabeledOperator::new(label, rho));
    }
    let povms = grid
        .filters
        .iter()
        .map(|f| {
            let pass = projector(jones_vector(f.angle, f.ellipticity));
            let absorb = CMatrix::identity(2, 2) - &pass;
            Povm {
                name: format!("M_{}", polarization_label(f.angle, f.ellipticity)),
                elements: vec![LabeledOperator::new("R_out", pass), LabeledOperator::new("R_abs", absorb)],
            }
        })
        .collect();
    QuantumModel::new(2, states, povms, tol)
}

/// The one-dimensional system: a single state and a single trivial POVM.
pub fn trivial_model() -> QuantumModel {
    let one = CMatrix::identity(1, 1);
    QuantumModel {
        dimension: 1,
        states: vec![LabeledOperator::new("S", one.clone())],
        povms: vec![Povm { name: "M".into(), elements: vec![LabeledOperator::new("R", one)] }],
    }
}

/// Bloch vector `(tr rho X, tr rho Y, tr rho Z)` of a qubit operator.
pub fn bloch_vector(rho: &CMatrix) -> [f64; 3] {
    let x = CMatrix::from_row_slice(2, 2, &[0.0.into(), 1.0.into(), 1.0.into(), 0.0.into()]);
    let y = CMatrix::from_row_slice(
        2,
        2,
        &[0.0.into(), Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0), 0.0.into()],
    );
    let z = CMatrix::from_row_slice(2, 2, &[1.0.into(), 0.0.into(), 0.0.into(), (-1.0).into()]);
    [trace_product(rho, &x).re, trace_product(rho, &y).re, trace_product(rho, &z).re]
}

fn random_gaussian_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Random full-rank density matrix `G G^dagger / tr(G G^dagger)`.
pub fn random_density_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = random_gaussian_matrix(n, rng);
    let a = &g * g.adjoint();
    let t = a.trace().re;
    a.unscale(t)
}

/// Random effect `0 <= Pi <= I`, so that `{Pi, I - Pi}` is a POVM.
pub fn random_effect<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    random_density_matrix(n, rng)
}

/// Seeded random model: `states` full-rank density matrices and `povms`
/// two-outcome measurements `{Pi, I - Pi}`. Dimension 1 gives
/// [`trivial_model`].
pub fn random_model(n: usize, states: usize, povms: usize, seed: u64, tol: &Tolerances) -> Result<QuantumModel, QuantumError> {
    if n == 1 && states == 1 && povms == 1 {
        return Ok(trivial_model());
    }
    if n == 1 {
        let one = || CMatrix::identity(1, 1);
        let states = (0..states).map(|j| LabeledOperator::new(format!("S_{}", j + 1), one())).collect();
        let povms = (0..povms)
            .map(|k| Povm { name: format!("M_{}", k + 1), elements: vec![LabeledOperator::new(format!("R_{}", k + 1), one())] })
            .collect();
        return QuantumModel::new(1, states, povms, tol);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let states = (0..states)
        .map(|j| LabeledOperator::new(format!("S_{}", j + 1), random_density_matrix(n, &mut rng)))
        .collect();
    let povms = (0..povms)
        .map(|k| {
            let pass = random_effect(n, &mut rng);
            let rest = CMatrix::identity(n, n) - &pass;
            Povm {
                name: format!("M_{}", k + 1),
                elements: vec![
                    LabeledOperator::new(format!("R_{}", 2 * k + 1), pass),
                    LabeledOperator::new(format!("R_{}", 2 * k + 2), rest),
                ],
            }
        })
        .collect();
    QuantumModel::new(n, states, povms, tol)
}
