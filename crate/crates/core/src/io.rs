//! File formats: tables (JSON and CSV), count tables, basis matrices,
//! decompositions, observation sets, posterior reports, quantum models,
//! polarization grids and geometry exports (JSON and OFF).
//!
//! Output is deterministic: keys keep insertion order, rationals are written
//! as reduced `"n/d"` strings (integers without a denominator) and floats
//! with 17 significant digits. Non-finite numbers are rejected on input.

use num::complex::Complex64;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::decompose::{compression_stats, DecomposeError, Decomposition};
use crate::geometry::{GeometryReport, HullExport, PointKind};
use crate::inference::{InferenceError, ObservationSet, PosteriorReport};
use crate::matrix::Matrix;
use crate::quantum::{
    CMatrix, LabeledOperator, PolarizationFilter, PolarizationGrid, PolarizationState, Povm, QuantumError,
    QuantumModel,
};
use crate::scalar::{float_json, Rational, Scalar, ValueMode};
use crate::table::{InterventionSpec, ProbabilityTable, RawTable, TableError, TableLayout};
use crate::Tolerances;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("invalid JSON: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("invalid CSV{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Csv { line: Option<u64>, message: String },
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

impl IoError {
    /// Malformed input, as opposed to well-formed input that violates a
    /// domain invariant.
    pub fn is_parse_error(&self) -> bool {
        matches!(self, IoError::Json { .. } | IoError::Csv { .. } | IoError::Schema { .. })
    }
}

impl From<serde_json::Error> for IoError {
    fn from(e: serde_json::Error) -> Self {
        IoError::Json { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

impl From<csv::Error> for IoError {
    fn from(e: csv::Error) -> Self {
        IoError::Csv { line: e.position().map(|p| p.line()), message: e.to_string() }
    }
}

fn schema(path: &str, message: impl Into<String>) -> IoError {
    IoError::Schema { path: path.to_string(), message: message.into() }
}

pub fn parse_json(s: &str) -> Result<Value, IoError> {
    Ok(serde_json::from_str(s)?)
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json_string(v: &Value) -> String {
    let mut out = serde_json::to_string_pretty(v).expect("values built here always serialize");
    out.push('\n');
    out
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, IoError> {
    v.as_object().ok_or_else(|| schema(path, "expected an object"))
}

fn field<'a>(m: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value, IoError> {
    m.get(key).ok_or_else(|| schema(path, format!("missing field `{key}`")))
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a [Value], IoError> {
    v.as_array().map(Vec::as_slice).ok_or_else(|| schema(path, "expected an array"))
}

fn string(v: &Value, path: &str) -> Result<String, IoError> {
    v.as_str().map(str::to_string).ok_or_else(|| schema(path, "expected a string"))
}

fn strings(v: &Value, path: &str) -> Result<Vec<String>, IoError> {
    array(v, path)?.iter().enumerate().map(|(i, s)| string(s, &format!("{path}[{i}]"))).collect()
}

fn unsigned(v: &Value, path: &str) -> Result<u64, IoError> {
    v.as_u64().ok_or_else(|| schema(path, "expected a nonnegative integer"))
}

fn float(v: &Value, path: &str) -> Result<f64, IoError> {
    f64::from_json(v).ok_or_else(|| schema(path, "expected a finite number"))
}

fn scalar<T: Scalar>(v: &Value, path: &str) -> Result<T, IoError> {
    T::from_json(v).ok_or_else(|| schema(path, "expected a finite number or an \"n/d\" string"))
}

fn vector<T: Scalar>(v: &Value, path: &str) -> Result<Vec<T>, IoError> {
    array(v, path)?.iter().enumerate().map(|(i, x)| scalar(x, &format!("{path}[{i}]"))).collect()
}

fn matrix<T: Scalar>(v: &Value, path: &str) -> Result<Matrix<T>, IoError> {
    let rows: Vec<Vec<T>> = array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, r)| vector(r, &format!("{path}[{i}]")))
        .collect::<Result<_, _>>()?;
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, 0));
    }
    Matrix::from_rows(&rows).ok_or_else(|| schema(path, "rows have different lengths"))
}

fn vector_json<T: Scalar>(v: &[T]) -> Value {
    Value::Array(v.iter().map(Scalar::to_json).collect())
}

fn matrix_json<T: Scalar>(m: &Matrix<T>) -> Value {
    Value::Array(m.row_iter().map(vector_json).collect())
}

fn floats_json(v: &[f64]) -> Value {
    Value::Array(v.iter().copied().map(float_json).collect())
}

fn interventions_json(specs: &[InterventionSpec]) -> Value {
    Value::Array(specs.iter().map(|s| json!({"name": s.name, "results": s.results})).collect())
}

fn parse_interventions(v: &Value, path: &str) -> Result<Vec<InterventionSpec>, IoError> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let p = format!("{path}[{k}]");
            let m = object(spec, &p)?;
            let name = string(field(m, "name", &p)?, &format!("{p}.name"))?;
            let results = strings(field(m, "results", &p)?, &format!("{p}.results"))?;
            Ok(InterventionSpec { name, results })
        })
        .collect()
}

fn parse_mode(v: &Value, path: &str) -> Result<ValueMode, IoError> {
    string(v, path)?.parse().map_err(|e: String| schema(path, e))
}

// ---------------------------------------------------------------- tables

/// A raw table in whichever arithmetic its file asked for.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyRawTable {
    Exact(RawTable<Rational>),
    Float(RawTable<f64>),
}

fn raw_table_from_value<T: Scalar>(v: &Value, entries_key: &str) -> Result<RawTable<T>, IoError> {
    let m = object(v, "$")?;
    Ok(RawTable {
        preparations: strings(field(m, "preparations", "$")?, "$.preparations")?,
        interventions: parse_interventions(field(m, "interventions", "$")?, "$.interventions")?,
        entries: matrix(field(m, entries_key, "$")?, &format!("$.{entries_key}"))?,
    })
}

/// Table JSON read in arithmetic `T`, ignoring the file's `mode` field.
pub fn parse_table_json<T: Scalar>(s: &str) -> Result<RawTable<T>, IoError> {
    raw_table_from_value(&parse_json(s)?, "entries")
}

/// Table JSON in the arithmetic named by `mode`, or by the file's `mode`
/// field (default float) when `mode` is `None`.
pub fn parse_table_json_any(s: &str, mode: Option<ValueMode>) -> Result<AnyRawTable, IoError> {
    let v = parse_json(s)?;
    let mode = match (mode, v.get("mode")) {
        (Some(m), _) => m,
        (None, Some(m)) => parse_mode(m, "$.mode")?,
        (None, None) => ValueMode::Float,
    };
    Ok(match mode {
        ValueMode::Exact => AnyRawTable::Exact(raw_table_from_value(&v, "entries")?),
        ValueMode::Float => AnyRawTable::Float(raw_table_from_value(&v, "entries")?),
    })
}

pub fn table_to_value<T: Scalar>(t: &ProbabilityTable<T>) -> Value {
    json!({
        "mode": T::MODE.as_str(),
        "preparations": t.layout().preparations(),
        "interventions": interventions_json(t.layout().interventions()),
        "entries": matrix_json(t.entries()),
    })
}

type CsvGrid<V> = (Vec<String>, Vec<InterventionSpec>, Matrix<V>);

/// Reads a labeled grid: a header row whose first two cells are ignored and
/// whose remaining cells are preparation labels, then one row per result
/// with the intervention name, the result name and one cell per
/// preparation. Rows of an intervention must be contiguous.
fn parse_csv_grid<V: Clone>(
    s: &str,
    cell: impl Fn(&str) -> Option<V>,
    expected: &str,
) -> Result<CsvGrid<V>, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(s.as_bytes());
    let mut records = reader.records();
    let header = records.next().ok_or(IoError::Csv { line: None, message: "empty input".into() })??;
    if header.len() < 2 {
        return Err(IoError::Csv { line: Some(1), message: "header needs intervention and result columns".into() });
    }
    let preparations: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let mut interventions: Vec<InterventionSpec> = Vec::new();
    let mut rows = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map(|p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != preparations.len() + 2 {
            return Err(IoError::Csv {
                line,
                message: format!("expected {} cells, found {}", preparations.len() + 2, record.len()),
            });
        }
        let (name, result) = (&record[0], &record[1]);
        let continues = interventions.last().is_some_and(|last| last.name == name);
        if continues {
            interventions.last_mut().expect("checked").results.push(result.to_string());
        } else if interventions.iter().any(|s| s.name == name) {
            return Err(IoError::Csv { line, message: format!("rows of intervention `{name}` are not contiguous") });
        } else {
            interventions.push(InterventionSpec::new(name, [result]));
        }
        let values = record
            .iter()
            .skip(2)
            .map(|c| cell(c).ok_or_else(|| IoError::Csv { line, message: format!("`{c}` is not {expected}") }))
            .collect::<Result<Vec<V>, _>>()?;
        rows.push(values);
    }
    let entries = Matrix::from_vec(rows.len(), preparations.len(), rows.concat());
    Ok((preparations, interventions, entries))
}

pub fn parse_table_csv<T: Scalar>(s: &str) -> Result<RawTable<T>, IoError> {
    let (preparations, interventions, entries) =
        parse_csv_grid(s, T::parse_str, "a finite number or an n/d fraction")?;
    Ok(RawTable { preparations, interventions, entries })
}

pub fn parse_table_csv_any(s: &str, mode: ValueMode) -> Result<AnyRawTable, IoError> {
    Ok(match mode {
        ValueMode::Exact => AnyRawTable::Exact(parse_table_csv(s)?),
        ValueMode::Float => AnyRawTable::Float(parse_table_csv(s)?),
    })
}

/// Raw trial counts, shaped like a table.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    pub preparations: Vec<String>,
    pub interventions: Vec<InterventionSpec>,
    pub counts: Matrix<u64>,
}

/// Count JSON: like a table file, with nonnegative integers under `counts`.
pub fn parse_counts_json(s: &str) -> Result<CountTable, IoError> {
    let v = parse_json(s)?;
    let m = object(&v, "$")?;
    let rows: Vec<Vec<u64>> = array(field(m, "counts", "$")?, "$.counts")?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let p = format!("$.counts[{i}]");
            array(row, &p)?.iter().enumerate().map(|(j, n)| unsigned(n, &format!("{p}[{j}]"))).collect()
        })
        .collect::<Result<_, IoError>>()?;
    let counts = if rows.is_empty() {
        Matrix::from_vec(0, 0, Vec::new())
    } else {
        Matrix::from_rows(&rows).ok_or_else(|| schema("$.counts", "rows have different lengths"))?
    };
    Ok(CountTable {
        preparations: strings(field(m, "preparations", "$")?, "$.preparations")?,
        interventions: parse_interventions(field(m, "interventions", "$")?, "$.interventions")?,
        counts,
    })
}

pub fn parse_counts_csv(s: &str) -> Result<CountTable, IoError> {
    let (preparations, interventions, counts) =
        parse_csv_grid(s, |c| c.parse::<u64>().ok(), "a nonnegative integer")?;
    Ok(CountTable { preparations, interventions, counts })
}

// ---------------------------------------------------------------- basis

/// Basis matrix JSON: `{"basis": [[..]]}` or a bare array of rows.
pub fn parse_basis_json_as<T: Scalar>(s: &str) -> Result<Matrix<T>, IoError> {
    let v = parse_json(s)?;
    match &v {
        Value::Object(m) => matrix(field(m, "basis", "$")?, "$.basis"),
        _ => matrix(&v, "$"),
    }
}

pub fn parse_basis_json(s: &str) -> Result<Matrix<Rational>, IoError> {
    parse_basis_json_as(s)
}

// --------------------------------------------------------- decompositions

#[derive(Debug, Clone, PartialEq)]
pub enum AnyDecomposition {
    Exact(Decomposition<Rational>),
    Float(Decomposition<f64>),
}

impl AnyDecomposition {
    pub fn mode(&self) -> ValueMode {
        match self {
            AnyDecomposition::Exact(_) => ValueMode::Exact,
            AnyDecomposition::Float(_) => ValueMode::Float,
        }
    }
}

pub fn tolerances_value(tol: &Tolerances) -> Value {
    json!({
        "norm": float_json(tol.norm),
        "rank": tol.rank.map_or(Value::Null, float_json),
        "rec": float_json(tol.rec),
        "pivot": float_json(tol.pivot),
        "geo": float_json(tol.geo),
        "herm": float_json(tol.herm),
        "psd": float_json(tol.psd),
    })
}

pub fn decomposition_to_value<T: Scalar>(d: &Decomposition<T>, tol: &Tolerances) -> Value {
    let layout = d.layout();
    let preps: Map<String, Value> = layout
        .preparations()
        .iter()
        .zip(d.preparation_vectors())
        .map(|(label, s)| (label.clone(), vector_json(s)))
        .collect();
    let mut results = Map::new();
    for (k, spec) in layout.interventions().iter().enumerate() {
        let inner: Map<String, Value> = spec
            .results
            .iter()
            .zip(layout.intervention_rows(k))
            .map(|(label, i)| (label.clone(), vector_json(d.result_vector(i))))
            .collect();
        results.insert(spec.name.clone(), Value::Object(inner));
    }
    let mut out = json!({
        "mode": T::MODE.as_str(),
        "K": d.rank(),
        "x": matrix_json(d.basis()),
        "preparation_vectors": preps,
        "result_vectors": results,
        "row_perm": d.block_form().row_perm,
        "col_perm": d.block_form().col_perm,
    });
    if let Ok(c) = compression_stats(layout.num_rows(), layout.num_cols(), d.rank()) {
        out["compression"] = json!({"original": c.original, "compressed": c.compressed, "saving": c.saving});
    }
    out["tolerances"] = tolerances_value(tol);
    out
}

fn usizes(v: &Value, path: &str) -> Result<Vec<usize>, IoError> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| unsigned(x, &format!("{path}[{i}]")).map(|n| n as usize))
        .collect()
}

pub fn decomposition_from_value<T: Scalar>(v: &Value, tol: &Tolerances) -> Result<Decomposition<T>, IoError> {
    let m = object(v, "$")?;
    let rank = unsigned(field(m, "K", "$")?, "$.K")? as usize;
    let basis: Matrix<T> = match matrix(field(m, "x", "$")?, "$.x")? {
        b if b.rows() == 0 && rank == 0 => Matrix::zeros(0, 0),
        b => b,
    };
    if basis.rows() != rank || basis.cols() != rank {
        return Err(schema("$.x", format!("expected a {rank}x{rank} matrix")));
    }
    let mut preparations = Vec::new();
    let mut prep_vectors = Vec::new();
    for (label, s) in object(field(m, "preparation_vectors", "$")?, "$.preparation_vectors")? {
        preparations.push(label.clone());
        prep_vectors.push(vector(s, &format!("$.preparation_vectors.{label}"))?);
    }
    let mut interventions = Vec::new();
    let mut result_vectors = Vec::new();
    for (name, inner) in object(field(m, "result_vectors", "$")?, "$.result_vectors")? {
        let p = format!("$.result_vectors.{name}");
        let mut results = Vec::new();
        for (label, r) in object(inner, &p)? {
            results.push(label.clone());
            result_vectors.push(vector(r, &format!("{p}.{label}"))?);
        }
        interventions.push(InterventionSpec { name: name.clone(), results });
    }
    let layout = TableLayout::new(preparations, interventions)?;
    let row_perm = usizes(field(m, "row_perm", "$")?, "$.row_perm")?;
    let col_perm = usizes(field(m, "col_perm", "$")?, "$.col_perm")?;
    Ok(Decomposition::from_vectors(layout, basis, prep_vectors, result_vectors, row_perm, col_perm, tol)?)
}

/// Decomposition JSON in the arithmetic named by its `mode` field, unless
/// overridden.
pub fn parse_decomposition_json(
    s: &str,
    mode: Option<ValueMode>,
    tol: &Tolerances,
) -> Result<AnyDecomposition, IoError> {
    let v = parse_json(s)?;
    let mode = match (mode, v.get("mode")) {
        (Some(m), _) => m,
        (None, Some(m)) => parse_mode(m, "$.mode")?,
        (None, None) => ValueMode::Float,
    };
    Ok(match mode {
        ValueMode::Exact => AnyDecomposition::Exact(decomposition_from_value(&v, tol)?),
        ValueMode::Float => AnyDecomposition::Float(decomposition_from_value(&v, tol)?),
    })
}

// ---------------------------------------------------------- observations

/// `{counts: [{intervention, result, n}], seed?, rng?, true_prep?}`.
pub fn parse_observations_json(s: &str, layout: &TableLayout) -> Result<ObservationSet, IoError> {
    let v = parse_json(s)?;
    let m = object(&v, "$")?;
    let mut labeled = Vec::new();
    for (i, c) in array(field(m, "counts", "$")?, "$.counts")?.iter().enumerate() {
        let p = format!("$.counts[{i}]");
        let o = object(c, &p)?;
        labeled.push((
            string(field(o, "intervention", &p)?, &format!("{p}.intervention"))?,
            string(field(o, "result", &p)?, &format!("{p}.result"))?,
            unsigned(field(o, "n", &p)?, &format!("{p}.n"))?,
        ));
    }
    let mut obs = ObservationSet::from_labels(layout, labeled.iter().map(|(k, r, n)| (k.as_str(), r.as_str(), *n)))?;
    obs.seed = m.get("seed").map(|s| unsigned(s, "$.seed")).transpose()?;
    obs.rng = m.get("rng").map(|s| string(s, "$.rng")).transpose()?;
    obs.true_preparation = m.get("true_prep").map(|s| string(s, "$.true_prep")).transpose()?;
    Ok(obs)
}

pub fn observations_to_value(obs: &ObservationSet, layout: &TableLayout) -> Value {
    let counts: Vec<Value> = obs
        .counts()
        .map(|(row, n)| {
            let (k, r) = layout.row_label(row);
            json!({"intervention": k, "result": r, "n": n})
        })
        .collect();
    let mut out = json!({ "counts": counts });
    if let Some(seed) = obs.seed {
        out["seed"] = json!(seed);
    }
    if let Some(rng) = &obs.rng {
        out["rng"] = json!(rng);
    }
    if let Some(t) = &obs.true_preparation {
        out["true_prep"] = json!(t);
    }
    out
}

// ------------------------------------------------------------- posteriors

fn labeled_rows<T: Scalar>(layout: &TableLayout, per_intervention: &[Vec<T>]) -> Value {
    let out: Map<String, Value> = layout
        .interventions()
        .iter()
        .zip(per_intervention)
        .map(|(spec, probs)| {
            let inner: Map<String, Value> =
                spec.results.iter().zip(probs).map(|(r, p)| (r.clone(), p.to_json())).collect();
            (spec.name.clone(), Value::Object(inner))
        })
        .collect();
    Value::Object(out)
}

/// Posterior weights keyed by preparation, the log evidence, the effective
/// vector `s_new` and the predicted distribution of every intervention.
pub fn posterior_to_value<T: Scalar>(
    report: &PosteriorReport<T>,
    layout: &TableLayout,
    predictions: &[Vec<T>],
) -> Value {
    let weights: Map<String, Value> = layout
        .preparations()
        .iter()
        .zip(report.posterior.weights())
        .map(|(label, w)| (label.clone(), w.to_json()))
        .collect();
    json!({
        "mode": T::MODE.as_str(),
        "posterior": weights,
        "map_estimate": layout.preparations()[report.mode()],
        "log_evidence": float_json(report.log_evidence),
        "s_new": report.effective_vector.as_deref().map_or(Value::Null, vector_json),
        "predictions": labeled_rows(layout, predictions),
    })
}

// --------------------------------------------------------- quantum models

fn complex_matrix(v: &Value, dim: usize, path: &str) -> Result<CMatrix, IoError> {
    let m = object(v, path)?;
    let re: Matrix<f64> = matrix(field(m, "re", path)?, &format!("{path}.re"))?;
    let im: Matrix<f64> = match m.get("im") {
        Some(im) => matrix(im, &format!("{path}.im"))?,
        None => Matrix::zeros(re.rows(), re.cols()),
    };
    for (part, x) in [("re", &re), ("im", &im)] {
        if x.rows() != dim || x.cols() != dim {
            return Err(schema(&format!("{path}.{part}"), format!("expected a {dim}x{dim} matrix")));
        }
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| Complex64::new(re[(i, j)], im[(i, j)])))
}

fn complex_json(m: &CMatrix) -> Value {
    let part = |f: fn(&Complex64) -> f64| {
        Value::Array(
            (0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| float_json(f(&m[(i, j)]))).collect())).collect(),
        )
    };
    json!({"re": part(|z| z.re), "im": part(|z| z.im)})
}

/// Quantum model JSON: `dimension`, `states: [{label?, re, im?}]` and
/// `povms: [{name?, elements: [{label?, re, im?}]}]`. Missing labels
/// default to `S_j`, `M_k` and `E_i`.
pub fn parse_quantum_model_json(s: &str, tol: &Tolerances) -> Result<QuantumModel, IoError> {
    let v = parse_json(s)?;
    let m = object(&v, "$")?;
    let dim = unsigned(field(m, "dimension", "$")?, "$.dimension")? as usize;
    let label = |o: &Map<String, Value>, key: &str, path: &str, default: String| -> Result<String, IoError> {
        o.get(key).map_or(Ok(default), |l| string(l, &format!("{path}.{key}")))
    };
    let mut states = Vec::new();
    for (j, st) in array(field(m, "states", "$")?, "$.states")?.iter().enumerate() {
        let p = format!("$.states[{j}]");
        let name = label(object(st, &p)?, "label", &p, format!("S_{}", j + 1))?;
        states.push(LabeledOperator::new(name, complex_matrix(st, dim, &p)?));
    }
    let mut povms = Vec::new();
    for (k, pv) in array(field(m, "povms", "$")?, "$.povms")?.iter().enumerate() {
        let p = format!("$.povms[{k}]");
        let o = object(pv, &p)?;
        let name = label(o, "name", &p, format!("M_{}", k + 1))?;
        let mut elements = Vec::new();
        for (i, e) in array(field(o, "elements", &p)?, &format!("{p}.elements"))?.iter().enumerate() {
            let ep = format!("{p}.elements[{i}]");
            let l = label(object(e, &ep)?, "label", &ep, format!("E_{}", i + 1))?;
            elements.push(LabeledOperator::new(l, complex_matrix(e, dim, &ep)?));
        }
        povms.push(Povm { name, elements });
    }
    Ok(QuantumModel::new(dim, states, povms, tol)?)
}

pub fn quantum_model_to_value(model: &QuantumModel) -> Value {
    let op = |o: &LabeledOperator| {
        let mut v = complex_json(&o.matrix);
        v["label"] = json!(o.label);
        v
    };
    json!({
        "dimension": model.dimension(),
        "states": model.states().iter().map(op).collect::<Vec<_>>(),
        "povms": model.povms().iter().map(|p| json!({
            "name": p.name,
            "elements": p.elements.iter().map(op).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    })
}

/// `{preparations: [{angle, ellipticity?, purity?}], filters: [{angle,
/// ellipticity?}]}`, angles in degrees.
pub fn parse_polarization_grid(s: &str) -> Result<PolarizationGrid, IoError> {
    let v = parse_json(s)?;
    let m = object(&v, "$")?;
    let opt = |o: &Map<String, Value>, key: &str, path: &str, default: f64| -> Result<f64, IoError> {
        o.get(key).map_or(Ok(default), |x| float(x, &format!("{path}.{key}")))
    };
    let mut preparations = Vec::new();
    for (j, p) in array(field(m, "preparations", "$")?, "$.preparations")?.iter().enumerate() {
        let path = format!("$.preparations[{j}]");
        let o = object(p, &path)?;
        preparations.push(PolarizationState {
            angle: float(field(o, "angle", &path)?, &format!("{path}.angle"))?,
            ellipticity: opt(o, "ellipticity", &path, 0.0)?,
            purity: opt(o, "purity", &path, 1.0)?,
        });
    }
    let mut filters = Vec::new();
    for (k, f) in array(field(m, "filters", "$")?, "$.filters")?.iter().enumerate() {
        let path = format!("$.filters[{k}]");
        let o = object(f, &path)?;
        filters.push(PolarizationFilter {
            angle: float(field(o, "angle", &path)?, &format!("{path}.angle"))?,
            ellipticity: opt(o, "ellipticity", &path, 0.0)?,
        });
    }
    Ok(PolarizationGrid { preparations, filters })
}

// -------------------------------------------------------------- geometry

pub fn geometry_to_value<T: Scalar>(report: &GeometryReport<T>, export: &HullExport) -> Value {
    let points: Vec<Value> = export
        .points
        .iter()
        .map(|p| {
            let mut v = json!({"label": p.label, "kind": p.kind.as_str(), "coords": floats_json(&p.coords)});
            if let Some(i) = &p.intrinsic {
                v["intrinsic"] = floats_json(i);
            }
            v
        })
        .collect();
    let hulls: Vec<Value> = export
        .hulls
        .iter()
        .map(|h| json!({"kind": h.kind.as_str(), "affine_dim": h.affine_dim, "vertices": h.vertices, "facets": h.facets}))
        .collect();
    let mut out = json!({
        "mode": T::MODE.as_str(),
        "ambient_dim": export.ambient_dim,
        "points": points,
        "facets": export.facets(),
        "hulls": hulls,
    });
    if let Some(h) = &export.hyperplane {
        out["hyperplane"] = json!({"normal": floats_json(&h.normal), "offset": float_json(h.offset)});
    }
    out["sum_vectors"] = Value::Array(report.sum_vectors.iter().map(|v| vector_json(v)).collect());
    out["common_sum"] = report.common_sum.as_deref().map_or(Value::Null, vector_json);
    out["on_hyperplane"] = json!(report.on_hyperplane);
    out["prep_affine_dim"] = json!(report.prep_affine_dim);
    out["result_affine_dim"] = json!(report.result_affine_dim);
    out["warnings"] = Value::Array(export.warnings.iter().map(|w| json!(w.to_string())).collect());
    out
}

/// OFF mesh of the hulls. Up to three dimensions every point and facet is
/// written, padded with zeros to 3D. Above that only the preparations are
/// written, in their intrinsic coordinates when these have at most three
/// axes. Facets with fewer than three vertices are left out.
pub fn hull_to_off(export: &HullExport) -> String {
    let intrinsic = export.ambient_dim > 3;
    let chosen: Vec<usize> = (0..export.points.len())
        .filter(|&i| {
            let p = &export.points[i];
            !intrinsic || (p.kind == PointKind::Preparation && p.intrinsic.is_some())
        })
        .collect();
    let position = |i: usize| chosen.iter().position(|&c| c == i);
    let faces: Vec<Vec<usize>> = export
        .hulls
        .iter()
        .filter(|h| !intrinsic || h.kind == PointKind::Preparation)
        .flat_map(|h| h.facets.iter())
        .filter(|f| f.len() >= 3)
        .filter_map(|f| f.iter().map(|&i| position(i)).collect::<Option<Vec<usize>>>())
        .collect();
    let mut out = String::from("OFF\n");
    if intrinsic {
        out.push_str("# preparation vectors in intrinsic coordinates\n");
    }
    out.push_str(&format!("{} {} 0\n", chosen.len(), faces.len()));
    for &i in &chosen {
        let p = &export.points[i];
        let coords = if intrinsic { p.intrinsic.as_deref().unwrap_or_default() } else { &p.coords };
        let xyz: Vec<String> = (0..3).map(|a| coords.get(a).copied().unwrap_or(0.0).to_string()).collect();
        out.push_str(&xyz.join(" "));
        out.push('\n');
    }
    for f in &faces {
        let idx: Vec<String> = f.iter().map(usize::to_string).collect();
        out.push_str(&format!("{} {}\n", f.len(), idx.join(" ")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::{decompose, example_basis, BasisChoice};
    use crate::fixtures;

    #[test]
    fn malformed_json_reports_position() {
        let err = parse_table_json::<f64>("{\n  \"preparations\": [,]\n}").unwrap_err();
        match err {
            IoError::Json { line, column, .. } => assert_eq!((line, column), (2, 20)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_table_json::<f64>("{}").unwrap_err().is_parse_error());
    }

    #[test]
    fn non_finite_values_are_rejected() {
        for bad in ["\"NaN\"", "\"inf\"", "1e999", "\"1/0\""] {
            let s = format!(
                r#"{{"preparations":["S"],"interventions":[{{"name":"M","results":["R"]}}],"entries":[[{bad}]]}}"#
            );
            assert!(matches!(parse_table_json::<f64>(&s), Err(IoError::Schema { .. })), "{bad}");
        }
    }

    #[test]
    fn table_json_round_trip() {
        let t = fixtures::example_table();
        let text = to_json_string(&table_to_value(&t));
        let back = parse_table_json::<Rational>(&text).unwrap().into_table(0.0).unwrap();
        assert_eq!(back, t);
        assert!(text.contains("\"1/2\""));
    }

    #[test]
    fn mode_field_selects_arithmetic() {
        let any = parse_table_json_any(fixtures::EXAMPLE_TABLE_JSON, None).unwrap();
        assert!(matches!(any, AnyRawTable::Exact(_)));
        let any = parse_table_json_any(fixtures::EXAMPLE_TABLE_JSON, Some(ValueMode::Float)).unwrap();
        assert!(matches!(any, AnyRawTable::Float(_)));
    }

    #[test]
    fn csv_table() {
        let csv = "intervention,result,S_1,S_2\nM_1,R_1,1/2,1\nM_1,R_2,1/2,0\nM_2,R_3,1,1\n";
        let raw = parse_table_csv::<Rational>(csv).unwrap();
        assert_eq!(raw.preparations, vec!["S_1", "S_2"]);
        assert_eq!(raw.interventions[0].results, vec!["R_1", "R_2"]);
        assert!(raw.into_table(0.0).is_ok());
        let split = "i,r,S\nM_1,R_1,1\nM_2,R_2,1\nM_1,R_3,0\n";
        assert!(matches!(parse_table_csv::<f64>(split), Err(IoError::Csv { line: Some(4), .. })));
        let bad = "i,r,S\nM_1,R_1,nan\n";
        assert!(matches!(parse_table_csv::<f64>(bad), Err(IoError::Csv { line: Some(2), .. })));
    }

    #[test]
    fn decomposition_round_trip() {
        let t = fixtures::example_table();
        let tol = Tolerances::default();
        let d = decompose(&t, &BasisChoice::Explicit(example_basis()), &tol).unwrap();
        let text = to_json_string(&decomposition_to_value(&d, &tol));
        match parse_decomposition_json(&text, None, &tol).unwrap() {
            AnyDecomposition::Exact(back) => assert_eq!(back, d),
            AnyDecomposition::Float(_) => panic!("mode lost"),
        }
    }

    #[test]
    fn observations_round_trip() {
        let t = fixtures::example_table();
        let text = r#"{"counts":[{"intervention":"M_2","result":"R_4","n":3},{"intervention":"M_1","result":"R_1","n":2}],"seed":7}"#;
        let obs = parse_observations_json(text, t.layout()).unwrap();
        assert_eq!(obs.count(0), 2);
        assert_eq!(obs.count(3), 3);
        assert_eq!(obs.seed, Some(7));
        let again = parse_observations_json(&to_json_string(&observations_to_value(&obs, t.layout())), t.layout());
        assert_eq!(again.unwrap(), obs);
        let unknown = r#"{"counts":[{"intervention":"M_9","result":"R_1","n":1}]}"#;
        assert!(matches!(parse_observations_json(unknown, t.layout()), Err(IoError::Inference(_))));
    }

    #[test]
    fn quantum_model_round_trip() {
        let tol = Tolerances::default();
        let model = crate::quantum::trivial_model();
        let back = parse_quantum_model_json(&to_json_string(&quantum_model_to_value(&model)), &tol).unwrap();
        assert_eq!(back, model);
        let incomplete = r#"{"dimension":1,"states":[{"re":[[1]]}],"povms":[{"name":"P","elements":[{"re":[["1/2"]]}]}]}"#;
        match parse_quantum_model_json(incomplete, &tol) {
            Err(IoError::Quantum(QuantumError::PovmIncomplete { povm, .. })) => assert_eq!(povm, "P"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn off_export_of_example() {
        let t = fixtures::example_table();
        let tol = Tolerances::default();
        let d = decompose(&t, &BasisChoice::Explicit(example_basis()), &tol).unwrap();
        let off = hull_to_off(&crate::geometry::export_hulls(&d, &tol));
        let mut lines = off.lines();
        assert_eq!(lines.next(), Some("OFF"));
        let counts: Vec<usize> = lines.next().unwrap().split(' ').map(|x| x.parse().unwrap()).collect();
        assert_eq!(counts[0], 13);
        assert!(counts[1] >= 1);
    }
}
