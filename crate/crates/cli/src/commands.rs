use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use ptables::decompose::{compression_stats, decompose as factor, example_basis, reconstruct as rebuild};
use ptables::geometry::{export_hulls, geometry_report};
use ptables::inference::{
    embed_new_preparation, posterior_with_vector, predict, simulate_observations, Evidence, ObservationSet,
};
use ptables::io::{self, AnyDecomposition, AnyRawTable, IoError};
use ptables::quantum::{qubit_polarization_preset, quantum_table, random_model, PolarizationFilter, PolarizationState};
use ptables::{
    fixtures, table_from_counts, BasisChoice, DecomposeError, Decomposition, InferenceError, Prior, ProbabilityTable,
    QuantumError, Rational, Scalar, TableError, ValueMode,
};
use serde_json::{json, Value};

use crate::GlobalOpts;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn domain(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        Self { code: if e.is_parse_error() { 2 } else { 1 }, message: e.to_string() }
    }
}

macro_rules! domain_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self::domain(e.to_string())
            }
        }
    )*};
}

domain_errors!(DecomposeError, InferenceError, QuantumError, TableError);

type CliResult = Result<(), CliError>;

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> CliResult {
    fs::write(path, contents).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Writes `doc` to `out` and prints the summary, or prints `doc` to stdout
/// and the text summary to stderr when there is no output file.
fn emit(g: &GlobalOpts, doc: &Value, out: Option<&Path>, text: &str, summary: &Value) -> CliResult {
    match out {
        Some(path) => {
            write(path, &io::to_json_string(doc))?;
            print_summary(g, text, summary);
        }
        None => {
            print!("{}", io::to_json_string(doc));
            eprint!("{text}");
        }
    }
    Ok(())
}

fn print_summary(g: &GlobalOpts, text: &str, summary: &Value) {
    if g.json {
        print!("{}", io::to_json_string(summary));
    } else {
        print!("{text}");
    }
}

fn fmt_vec<T: Scalar>(v: &[T]) -> String {
    let parts: Vec<String> = v.iter().map(T::to_string).collect();
    format!("({})", parts.join(","))
}

fn approx<T: Scalar>(x: &T) -> String {
    format!("{:.6}", x.to_f64())
}

fn fmt_approx<T: Scalar>(v: &[T]) -> String {
    let parts: Vec<String> = v.iter().map(approx).collect();
    format!("({})", parts.join(","))
}

fn vec_json<T: Scalar>(v: &[T]) -> Value {
    Value::Array(v.iter().map(T::to_json).collect())
}

fn load_raw(g: &GlobalOpts, path: &Path) -> Result<AnyRawTable, CliError> {
    let text = read(path)?;
    Ok(if is_csv(path) {
        io::parse_table_csv_any(&text, g.mode.unwrap_or(ValueMode::Float))?
    } else {
        io::parse_table_json_any(&text, g.mode)?
    })
}

// ------------------------------------------------------------- validate

pub fn validate(g: &GlobalOpts, path: &Path) -> CliResult {
    let tol = g.tolerances();
    let (report, shape, mode) = match load_raw(g, path)? {
        AnyRawTable::Exact(r) => (r.validate(tol.norm), (r.entries.rows(), r.entries.cols()), ValueMode::Exact),
        AnyRawTable::Float(r) => (r.validate(tol.norm), (r.entries.rows(), r.entries.cols()), ValueMode::Float),
    };
    let mut text = String::new();
    if report.is_valid() {
        let _ = writeln!(text, "valid table: {} results x {} preparations ({mode})", shape.0, shape.1);
    } else {
        let _ = writeln!(text, "invalid table: {} problem(s)", report.findings.len());
        for f in &report.findings {
            let _ = writeln!(text, "  - {f}");
        }
    }
    for w in &report.warnings {
        let _ = writeln!(text, "warning: {w}");
    }
    let summary = json!({
        "valid": report.is_valid(),
        "mode": mode.as_str(),
        "rows": shape.0,
        "cols": shape.1,
        "findings": report.findings.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "warnings": report.warnings.iter().map(ToString::to_string).collect::<Vec<_>>(),
    });
    print_summary(g, &text, &summary);
    if report.is_valid() {
        Ok(())
    } else {
        Err(CliError::domain(format!("{} is not a valid table", path.display())))
    }
}

// ------------------------------------------------------------ decompose

fn basis_choice<T: Scalar>(arg: &str) -> Result<BasisChoice<T>, CliError> {
    Ok(match arg {
        "identity" => BasisChoice::Identity,
        "paper-example" => BasisChoice::Explicit(example_basis()),
        file => BasisChoice::Explicit(io::parse_basis_json_as(&read(Path::new(file))?)?),
    })
}

fn geometry_lines<T: Scalar>(d: &Decomposition<T>, g: &GlobalOpts) -> (String, Value) {
    let report = geometry_report(d, &g.tolerances());
    let text = match &report.common_sum {
        Some(e) => format!("common sum = {}; prep affine dim = {}\n", fmt_vec(e), report.prep_affine_dim),
        None => format!("sum vectors differ between interventions; prep affine dim = {}\n", report.prep_affine_dim),
    };
    let json = json!({
        "common_sum": report.common_sum.as_deref().map_or(Value::Null, vec_json),
        "on_hyperplane": report.on_hyperplane,
        "prep_affine_dim": report.prep_affine_dim,
    });
    (text, json)
}

fn decompose_table<T: Scalar>(g: &GlobalOpts, t: &ProbabilityTable<T>, basis: &str, out: Option<&Path>) -> CliResult {
    let tol = g.tolerances();
    let d = factor(t, &basis_choice(basis)?, &tol)?;
    let c = compression_stats(t.num_rows(), t.num_cols(), d.rank())?;
    let (geo_text, geo_json) = geometry_lines(&d, g);
    let text = format!(
        "rank K = {}\ncompression: {} of {} entries (saving {})\n{geo_text}",
        d.rank(),
        c.compressed,
        c.original,
        c.saving
    );
    let summary = json!({
        "K": d.rank(),
        "compression": {"original": c.original, "compressed": c.compressed, "saving": c.saving},
        "geometry": geo_json,
    });
    emit(g, &io::decomposition_to_value(&d, &tol), out, &text, &summary)
}

pub fn decompose(g: &GlobalOpts, path: &Path, basis: &str, out: Option<&Path>) -> CliResult {
    let norm = g.tolerances().norm;
    match load_raw(g, path)? {
        AnyRawTable::Exact(r) => decompose_table(g, &r.into_table(norm)?, basis, out),
        AnyRawTable::Float(r) => decompose_table(g, &r.into_table(norm)?, basis, out),
    }
}

// ---------------------------------------------------------- reconstruct

fn load_decomposition(g: &GlobalOpts, path: &Path) -> Result<AnyDecomposition, CliError> {
    Ok(io::parse_decomposition_json(&read(path)?, g.mode, &g.tolerances())?)
}

fn reconstruct_from<T: Scalar>(g: &GlobalOpts, d: &Decomposition<T>, out: Option<&Path>) -> CliResult {
    let t = rebuild(d, &g.tolerances())?;
    let text = format!("reconstructed {} x {} table ({})\n", t.num_rows(), t.num_cols(), T::MODE);
    let summary = json!({"rows": t.num_rows(), "cols": t.num_cols(), "mode": T::MODE.as_str()});
    emit(g, &io::table_to_value(&t), out, &text, &summary)
}

pub fn reconstruct(g: &GlobalOpts, path: &Path, out: Option<&Path>) -> CliResult {
    match load_decomposition(g, path)? {
        AnyDecomposition::Exact(d) => reconstruct_from(g, &d, out),
        AnyDecomposition::Float(d) => reconstruct_from(g, &d, out),
    }
}

// ------------------------------------------------------------- geometry

fn with_extension(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(format!(".{ext}"));
    PathBuf::from(s)
}

fn geometry_of<T: Scalar>(g: &GlobalOpts, d: &Decomposition<T>, prefix: &Path) -> CliResult {
    let tol = g.tolerances();
    let report = geometry_report(d, &tol);
    let export = export_hulls(d, &tol);
    let prefix = if prefix.extension().is_some_and(|e| e == "json") { prefix.with_extension("") } else { prefix.to_path_buf() };
    let (json_path, off_path) = (with_extension(&prefix, "json"), with_extension(&prefix, "off"));
    write(&json_path, &io::to_json_string(&io::geometry_to_value(&report, &export)))?;
    write(&off_path, &io::hull_to_off(&export))?;

    let layout = d.layout();
    let sums: Vec<String> = layout
        .interventions()
        .iter()
        .zip(&report.sum_vectors)
        .map(|(k, v)| format!("{} {}", k.name, fmt_vec(v)))
        .collect();
    let mut text = format!("sum vectors: {}\n", sums.join("; "));
    let (geo_text, geo_json) = geometry_lines(d, g);
    text.push_str(&geo_text);
    if report.on_hyperplane {
        let _ = writeln!(text, "hyperplane: e . s_j = 1 for all {} preparations", layout.num_cols());
    } else if report.common_sum.is_some() {
        let _ = writeln!(text, "hyperplane: e . s_j = 1 fails for some preparation");
    }
    let _ = writeln!(text, "result affine dim = {}", report.result_affine_dim);
    for w in &export.warnings {
        let _ = writeln!(text, "warning: {w}");
    }
    let _ = writeln!(text, "wrote {} and {}", json_path.display(), off_path.display());
    let summary = json!({
        "sum_vectors": report.sum_vectors.iter().map(|v| vec_json(v)).collect::<Vec<_>>(),
        "geometry": geo_json,
        "result_affine_dim": report.result_affine_dim,
        "warnings": export.warnings.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "files": [json_path.display().to_string(), off_path.display().to_string()],
    });
    print_summary(g, &text, &summary);
    Ok(())
}

pub fn geometry(g: &GlobalOpts, path: &Path, prefix: &Path) -> CliResult {
    match load_decomposition(g, path)? {
        AnyDecomposition::Exact(d) => geometry_of(g, &d, prefix),
        AnyDecomposition::Float(d) => geometry_of(g, &d, prefix),
    }
}

// ----------------------------------------------------------- tomography

#[derive(Debug, Args)]
pub struct TomographyArgs {
    pub table: PathBuf,
    /// Simulate data from this preparation
    #[arg(long, conflicts_with = "observations", required_unless_present = "observations")]
    pub truth: Option<String>,
    /// Observation file: {counts: [{intervention, result, n}]}
    #[arg(long)]
    pub observations: Option<PathBuf>,
    /// Trials to simulate: `N` for every intervention, or `M_1=N,M_2=N`
    #[arg(long, default_value = "1000")]
    pub schedule: String,
    /// `uniform`, `point:LABEL`, or a JSON file of weights keyed by label
    #[arg(long, default_value = "uniform")]
    pub prior: String,
    /// Basis for the effective vector: `identity`, `paper-example` or a file
    #[arg(long, default_value = "identity")]
    pub basis: String,
    /// Also place the data as a new preparation and check the rank
    #[arg(long)]
    pub embed: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_schedule<T: Scalar>(spec: &str, t: &ProbabilityTable<T>) -> Result<Vec<(usize, u64)>, CliError> {
    let layout = t.layout();
    if let Ok(n) = spec.trim().parse::<u64>() {
        return Ok((0..layout.interventions().len()).map(|k| (k, n)).collect());
    }
    spec.split(',')
        .map(|item| {
            let (name, n) = item
                .split_once('=')
                .ok_or_else(|| CliError::input(format!("schedule item `{item}` is not NAME=N")))?;
            let k = layout
                .intervention_index(name.trim())
                .ok_or_else(|| CliError::input(format!("unknown intervention `{}` in schedule", name.trim())))?;
            let n = n.trim().parse().map_err(|_| CliError::input(format!("`{n}` is not a trial count")))?;
            Ok((k, n))
        })
        .collect()
}

fn parse_prior<T: Scalar>(spec: &str, t: &ProbabilityTable<T>, norm: f64) -> Result<Prior<T>, CliError> {
    let layout = t.layout();
    let m = layout.num_cols();
    if spec == "uniform" {
        return Ok(Prior::uniform(m));
    }
    if let Some(label) = spec.strip_prefix("point:") {
        let j = layout.preparation_index(label).ok_or_else(|| InferenceError::UnknownPreparation(label.into()))?;
        return Ok(Prior::point_mass(m, j));
    }
    let v = io::parse_json(&read(Path::new(spec))?)?;
    let weights = v.get("weights").unwrap_or(&v);
    let bad = |what: &str| CliError::input(format!("{spec}: {what}"));
    let values: Vec<T> = match weights {
        Value::Array(items) => items
            .iter()
            .map(|x| T::from_json(x).ok_or_else(|| bad("weights must be finite numbers or \"n/d\" strings")))
            .collect::<Result<_, _>>()?,
        Value::Object(map) => {
            let mut out = vec![T::zero(); m];
            for (label, x) in map {
                let j = layout.preparation_index(label).ok_or_else(|| InferenceError::UnknownPreparation(label.clone()))?;
                out[j] = T::from_json(x).ok_or_else(|| bad("weights must be finite numbers or \"n/d\" strings"))?;
            }
            out
        }
        _ => return Err(bad("expected an array or an object of weights")),
    };
    if values.len() != m {
        return Err(InferenceError::InvalidPrior { expected: m }.into());
    }
    Ok(Prior::new(values, norm)?)
}

fn tomography_on<T: Evidence>(g: &GlobalOpts, args: &TomographyArgs, t: &ProbabilityTable<T>) -> CliResult {
    let tol = g.tolerances();
    let layout = t.layout();
    let obs = match (&args.truth, &args.observations) {
        (Some(label), _) => {
            let j = layout.preparation_index(label).ok_or_else(|| InferenceError::UnknownPreparation(label.clone()))?;
            simulate_observations(t, j, &parse_schedule(&args.schedule, t)?, g.seed)?
        }
        (None, Some(path)) => io::parse_observations_json(&read(path)?, layout)?,
        (None, None) => ObservationSet::new(),
    };
    let prior = parse_prior(&args.prior, t, tol.norm)?;
    let d = factor(t, &basis_choice(&args.basis)?, &tol)?;
    let report = posterior_with_vector(t, &d, &prior, &obs)?;
    let predictions: Vec<Vec<T>> = (0..layout.interventions().len()).map(|k| predict(t, &report.posterior, k)).collect();
    let mut doc = io::posterior_to_value(&report, layout, &predictions);
    doc["observations"] = io::observations_to_value(&obs, layout);

    let map = report.mode();
    let mut text = format!(
        "MAP estimate: {} (posterior {})\nlog evidence = {}\n",
        layout.preparations()[map],
        approx(&report.posterior.weights()[map]),
        report.log_evidence
    );
    if let Some(s) = &report.effective_vector {
        let _ = writeln!(text, "s_new = {}", fmt_approx(s));
    }
    let mut summary = json!({
        "map_estimate": layout.preparations()[map],
        "posterior": ptables::scalar::float_json(report.posterior.weights()[map].to_f64()),
        "log_evidence": ptables::scalar::float_json(report.log_evidence),
    });
    if args.embed {
        let emb = embed_new_preparation(t, &d, &obs, Some(&prior), &tol, tol.rank)?;
        let e = json!({
            "vector": vec_json(&emb.vector),
            "max_residual": ptables::scalar::float_json(emb.max_residual),
            "rank": emb.rank,
            "augmented_rank": emb.augmented_rank,
            "rank_would_grow": emb.rank_would_grow(),
        });
        let _ = writeln!(
            text,
            "embedded vector = {}; augmented rank {} (table rank {}){}",
            fmt_vec(&emb.vector),
            emb.augmented_rank,
            emb.rank,
            if emb.rank_would_grow() { ": rank would grow" } else { "" }
        );
        doc["embedding"] = e.clone();
        summary["embedding"] = e;
    }
    emit(g, &doc, args.out.as_deref(), &text, &summary)
}

pub fn tomography(g: &GlobalOpts, args: &TomographyArgs) -> CliResult {
    let norm = g.tolerances().norm;
    match load_raw(g, &args.table)? {
        AnyRawTable::Exact(r) => tomography_on(g, args, &r.into_table(norm)?),
        AnyRawTable::Float(r) => tomography_on(g, args, &r.into_table(norm)?),
    }
}

// -------------------------------------------------------------- quantum

#[derive(Debug, Args)]
pub struct QuantumArgs {
    /// Built-in model; the default when no other source is given
    #[arg(long, value_parser = ["qubit-polarization"])]
    pub preset: Option<String>,
    /// Preparation angles in degrees
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub prep_angles: Option<Vec<f64>>,
    /// Preparation ellipticities in degrees (0 linear, 45 circular)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub prep_ellipticities: Option<Vec<f64>>,
    /// Preparation purities in [0, 1]; 0 is the unpolarized state
    #[arg(long, value_delimiter = ',')]
    pub purities: Option<Vec<f64>>,
    /// Filter angles in degrees
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub filter_angles: Option<Vec<f64>>,
    /// Filter ellipticities in degrees
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub filter_ellipticities: Option<Vec<f64>>,
    /// Random model of this Hilbert-space dimension, seeded by --seed
    #[arg(long, conflicts_with_all = ["preset", "model"])]
    pub dim: Option<usize>,
    /// Number of random states for --dim [default: dim^2]
    #[arg(long, requires = "dim")]
    pub states: Option<usize>,
    /// Number of random two-outcome measurements for --dim [default: dim^2]
    #[arg(long, requires = "dim")]
    pub povms: Option<usize>,
    /// Quantum model file
    #[arg(long, conflicts_with = "preset")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn list_or(v: &Option<Vec<f64>>, len: usize, what: &str, default: f64) -> Result<Vec<f64>, CliError> {
    match v {
        None => Ok(vec![default; len]),
        Some(x) if x.len() == len => Ok(x.clone()),
        Some(x) => Err(CliError::input(format!("{what} has {} values, expected {len}", x.len()))),
    }
}

fn preset_grid(args: &QuantumArgs) -> Result<ptables::quantum::PolarizationGrid, CliError> {
    let mut grid = fixtures::qubit_grid();
    if let Some(angles) = &args.prep_angles {
        let e = list_or(&args.prep_ellipticities, angles.len(), "--prep-ellipticities", 0.0)?;
        let p = list_or(&args.purities, angles.len(), "--purities", 1.0)?;
        grid.preparations = angles
            .iter()
            .zip(e)
            .zip(p)
            .map(|((&angle, ellipticity), purity)| PolarizationState { angle, ellipticity, purity })
            .collect();
    } else if args.prep_ellipticities.is_some() || args.purities.is_some() {
        return Err(CliError::input("--prep-ellipticities and --purities need --prep-angles"));
    }
    if let Some(angles) = &args.filter_angles {
        let e = list_or(&args.filter_ellipticities, angles.len(), "--filter-ellipticities", 0.0)?;
        grid.filters =
            angles.iter().zip(e).map(|(&angle, ellipticity)| PolarizationFilter { angle, ellipticity }).collect();
    } else if args.filter_ellipticities.is_some() {
        return Err(CliError::input("--filter-ellipticities needs --filter-angles"));
    }
    Ok(grid)
}

pub fn quantum(g: &GlobalOpts, args: &QuantumArgs) -> CliResult {
    if g.mode == Some(ValueMode::Exact) {
        return Err(CliError::input("quantum tables are floating point; drop --mode exact"));
    }
    let tol = g.tolerances();
    let model = match (&args.model, args.dim) {
        (Some(path), _) => io::parse_quantum_model_json(&read(path)?, &tol)?,
        (None, Some(0)) => return Err(CliError::input("--dim must be positive")),
        (None, Some(n)) => random_model(n, args.states.unwrap_or(n * n), args.povms.unwrap_or(n * n), g.seed, &tol)?,
        (None, None) => qubit_polarization_preset(&preset_grid(args)?, &tol)?,
    };
    let t = quantum_table(&model, &tol)?;
    let rank = ptables::numerical_rank(&t, &tol);
    let mut text = format!(
        "{} x {} table from a dimension-{} model; rank K = {rank}\n",
        t.num_rows(),
        t.num_cols(),
        model.dimension()
    );
    let layout = t.layout();
    let mut spots = Vec::new();
    for (s, m) in [("S_0deg", "M_45deg"), ("S_0deg", "M_60deg"), ("S_45deg", "M_60deg")] {
        let (Some(j), Some(out), Some(abs)) =
            (layout.preparation_index(s), layout.row_index(m, "R_out"), layout.row_index(m, "R_abs"))
        else {
            continue;
        };
        let (p_out, p_abs) = (*t.get(out, j), *t.get(abs, j));
        let _ = writeln!(text, "{s} under {m}: R_out {p_out:.3}, R_abs {p_abs:.3}");
        spots.push(json!({
            "preparation": s,
            "intervention": m,
            "R_out": ptables::scalar::float_json(p_out),
            "R_abs": ptables::scalar::float_json(p_abs),
        }));
    }
    let summary = json!({"rows": t.num_rows(), "cols": t.num_cols(), "dimension": model.dimension(), "K": rank, "spot_values": spots});
    emit(g, &io::table_to_value(&t), args.out.as_deref(), &text, &summary)
}

// ---------------------------------------------------------- from-counts

fn counts_to_table<T: Scalar>(g: &GlobalOpts, c: io::CountTable, out: Option<&Path>) -> CliResult {
    let (t, report) = table_from_counts::<T>(&c.counts, c.preparations, c.interventions)?;
    let mut text = format!("{} x {} table of frequencies ({})\n", t.num_rows(), t.num_cols(), T::MODE);
    for w in &report.warnings {
        let _ = writeln!(text, "warning: {w}");
    }
    let summary = json!({
        "rows": t.num_rows(),
        "cols": t.num_cols(),
        "mode": T::MODE.as_str(),
        "warnings": report.warnings.iter().map(ToString::to_string).collect::<Vec<_>>(),
    });
    emit(g, &io::table_to_value(&t), out, &text, &summary)
}

pub fn from_counts(g: &GlobalOpts, path: &Path, out: Option<&Path>) -> CliResult {
    let text = read(path)?;
    let counts = if is_csv(path) { io::parse_counts_csv(&text)? } else { io::parse_counts_json(&text)? };
    match g.mode.unwrap_or(ValueMode::Exact) {
        ValueMode::Exact => counts_to_table::<Rational>(g, counts, out),
        ValueMode::Float => counts_to_table::<f64>(g, counts, out),
    }
}
