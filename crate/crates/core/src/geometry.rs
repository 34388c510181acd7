//! Geometry of the vector sets produced by a decomposition.
//!
//! Because each intervention's results are exhaustive, the result vectors
//! of every intervention sum to one common vector `e`, and every
//! preparation vector satisfies `e . s_j = 1`: the preparations lie on a
//! hyperplane.

use crate::decompose::Decomposition;
use crate::hull::{convex_hull, AffineFrame, HullError};
use crate::matrix::{dot, Matrix};
use crate::scalar::Scalar;
use crate::Tolerances;

fn geo_tol<T: Scalar>(tol: &Tolerances) -> f64 {
    match T::MODE {
        crate::ValueMode::Exact => 0.0,
        crate::ValueMode::Float => tol.geo,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SumVectors<T> {
    /// `sum_{i in k} r_i` for each intervention `k`.
    pub per_intervention: Vec<Vec<T>>,
    /// Present when all per-intervention sums agree.
    pub common: Option<Vec<T>>,
}

pub fn intervention_sum_vectors<T: Scalar>(d: &Decomposition<T>, tol: &Tolerances) -> SumVectors<T> {
    let layout = d.layout();
    let per_intervention: Vec<Vec<T>> = (0..layout.interventions().len())
        .map(|k| {
            layout.intervention_rows(k).fold(vec![T::zero(); d.rank()], |acc, i| {
                acc.into_iter().zip(d.result_vector(i)).map(|(a, b)| a + b.clone()).collect()
            })
        })
        .collect();
    let cutoff = geo_tol::<T>(tol);
    let common = per_intervention.first().cloned().filter(|first| {
        per_intervention
            .iter()
            .all(|v| v.iter().zip(first).all(|(a, b)| a.approx_eq(b, cutoff)))
    });
    SumVectors { per_intervention, common }
}

/// Dimension of the affine hull of `points`: the rank of the differences
/// `p - p_0`. Floats use `tol` as singular-value cutoff.
pub fn affine_dimension<T: Scalar>(points: &[Vec<T>], tol: f64) -> usize {
    let Some(first) = points.first() else { return 0 };
    let diffs: Vec<Vec<T>> = points[1..]
        .iter()
        .map(|p| p.iter().zip(first).map(|(a, b)| a.clone() - b.clone()).collect())
        .collect();
    if diffs.is_empty() || first.is_empty() {
        return 0;
    }
    Matrix::from_rows(&diffs).expect("equal lengths").rank(Some(tol))
}

pub fn prep_affine_dimension<T: Scalar>(d: &Decomposition<T>, tol: &Tolerances) -> usize {
    affine_dimension(d.preparation_vectors(), tol.geo)
}

/// `e . s_j` for every preparation.
pub fn normalization_values<T: Scalar>(d: &Decomposition<T>, e: &[T]) -> Vec<T> {
    d.preparation_vectors().iter().map(|s| dot(e, s)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryReport<T> {
    pub sum_vectors: Vec<Vec<T>>,
    pub common_sum: Option<Vec<T>>,
    /// `e . s_j`, when a common sum exists.
    pub normalization: Option<Vec<T>>,
    /// Whether every `e . s_j` equals one.
    pub on_hyperplane: bool,
    pub prep_affine_dim: usize,
    pub result_affine_dim: usize,
}

pub fn geometry_report<T: Scalar>(d: &Decomposition<T>, tol: &Tolerances) -> GeometryReport<T> {
    let sums = intervention_sum_vectors(d, tol);
    let normalization = sums.common.as_ref().map(|e| normalization_values(d, e));
    let cutoff = geo_tol::<T>(tol);
    let on_hyperplane = normalization
        .as_ref()
        .is_some_and(|vals| vals.iter().all(|v| v.approx_eq(&T::one(), cutoff)));
    GeometryReport {
        sum_vectors: sums.per_intervention,
        common_sum: sums.common,
        normalization,
        on_hyperplane,
        prep_affine_dim: prep_affine_dimension(d, tol),
        result_affine_dim: affine_dimension(d.result_vectors(), tol.geo),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    Preparation,
    Result,
}

impl PointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PointKind::Preparation => "prep",
            PointKind::Result => "result",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportPoint {
    pub label: String,
    pub kind: PointKind,
    pub coords: Vec<f64>,
    /// Coordinates within the family's own affine hull; set when the
    /// ambient dimension is above 3.
    pub intrinsic: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyHull {
    pub kind: PointKind,
    pub affine_dim: usize,
    /// Indices into [`HullExport::points`].
    pub vertices: Vec<usize>,
    pub facets: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeometryWarning {
    /// The point family (or the joint set, when `kind` is `None`) spans more
    /// than three dimensions.
    DimensionTooHigh { kind: Option<PointKind>, dim: usize },
}

impl std::fmt::Display for GeometryWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GeometryWarning::DimensionTooHigh { kind: None, dim } => write!(
                f,
                "vectors live in {dim} dimensions; hulls use each family's intrinsic coordinates"
            ),
            GeometryWarning::DimensionTooHigh { kind: Some(k), dim } => write!(
                f,
                "{} vectors span an affine space of dimension {dim}; exported as points only",
                k.as_str()
            ),
        }
    }
}

/// Plottable points and hull faces for both vector families.
#[derive(Debug, Clone, PartialEq)]
pub struct HullExport {
    pub ambient_dim: usize,
    pub points: Vec<ExportPoint>,
    pub hulls: Vec<FamilyHull>,
    pub hyperplane: Option<Hyperplane>,
    pub warnings: Vec<GeometryWarning>,
}

impl HullExport {
    /// All facets of all families, as indices into `points`.
    pub fn facets(&self) -> Vec<Vec<usize>> {
        self.hulls.iter().flat_map(|h| h.facets.iter().cloned()).collect()
    }
}

pub fn export_hulls<T: Scalar>(d: &Decomposition<T>, tol: &Tolerances) -> HullExport {
    let layout = d.layout();
    let ambient_dim = d.rank();
    let mut points: Vec<ExportPoint> = Vec::new();
    for (label, s) in layout.preparations().iter().zip(d.preparation_vectors()) {
        points.push(ExportPoint {
            label: label.clone(),
            kind: PointKind::Preparation,
            coords: s.iter().map(Scalar::to_f64).collect(),
            intrinsic: None,
        });
    }
    for (i, r) in d.result_vectors().iter().enumerate() {
        let (k, res) = layout.row_label(i);
        points.push(ExportPoint {
            label: format!("{k}/{res}"),
            kind: PointKind::Result,
            coords: r.iter().map(Scalar::to_f64).collect(),
            intrinsic: None,
        });
    }

    let mut warnings = Vec::new();
    let project = ambient_dim > 3;
    if project {
        warnings.push(GeometryWarning::DimensionTooHigh { kind: None, dim: ambient_dim });
    }
    let mut hulls = Vec::new();
    for kind in [PointKind::Preparation, PointKind::Result] {
        let members: Vec<usize> = (0..points.len()).filter(|&p| points[p].kind == kind).collect();
        let coords: Vec<Vec<f64>> = members.iter().map(|&p| points[p].coords.clone()).collect();
        if project {
            if let Ok(frame) = AffineFrame::fit(&coords, tol.geo) {
                if frame.dim() <= 3 {
                    for &p in &members {
                        points[p].intrinsic = Some(frame.project(&points[p].coords));
                    }
                }
            }
        }
        match convex_hull(&coords, tol.geo) {
            Ok(h) => hulls.push(FamilyHull {
                kind,
                affine_dim: h.dim(),
                vertices: h.vertices.iter().map(|&v| members[v]).collect(),
                facets: h.facets.iter().map(|f| f.iter().map(|&v| members[v]).collect()).collect(),
            }),
            Err(HullError::DimensionTooHigh(dim)) => {
                warnings.push(GeometryWarning::DimensionTooHigh { kind: Some(kind), dim })
            }
            Err(HullError::Empty) => {}
        }
    }

    let hyperplane = intervention_sum_vectors(d, tol).common.map(|e| Hyperplane {
        normal: e.iter().map(Scalar::to_f64).collect(),
        offset: 1.0,
    });
    HullExport { ambient_dim, points, hulls, hyperplane, warnings }
}
