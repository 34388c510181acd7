//! The nine acceptance criteria, one pass/fail line each.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{dot_oracle, q, qv, rank_oracle, trace_oracle};
use num::{Signed, Zero};
use ptables::decompose::{compression_stats, decompose, example_basis, numerical_rank, BasisChoice};
use ptables::fixtures;
use ptables::geometry::{geometry_report, intervention_sum_vectors};
use ptables::inference::{
    embed_new_preparation, posterior, posterior_with_vector, predict, predict_from_vector, simulate_observations,
    InferenceError, ObservationSet, Prior,
};
use ptables::quantum::{
    hermitian_basis, quantum_table, qubit_polarization_preset, random_density_matrix, random_effect,
    scalar_product_check,
};
use ptables::synth::{random_basis, random_shape, random_table};
use ptables::{Matrix, ProbabilityTable, Rational, Tolerances};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, format!("took {took:?}, limit {limit:?}"))
}

fn qubit_table() -> ProbabilityTable<f64> {
    let tol = Tolerances::default();
    let model = qubit_polarization_preset(&fixtures::qubit_grid(), &tol).expect("preset is valid");
    quantum_table(&model, &tol).expect("preset table is valid")
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let t = fixtures::example_table();
    let tol = Tolerances::default();
    let d = decompose(&t, &BasisChoice::Explicit(fixtures::example_basis()), &tol).map_err(|e| e.to_string())?;
    let s = [
        qv(&[(1, 1), (1, 1), (0, 1)]),
        qv(&[(1, 1), (0, 1), (1, 1)]),
        qv(&[(1, 1), (-1, 1), (0, 1)]),
        qv(&[(1, 1), (0, 1), (-1, 1)]),
        qv(&[(1, 1), (1, 2), (1, 2)]),
        qv(&[(1, 1), (0, 1), (0, 1)]),
        qv(&[(1, 1), (1, 2), (0, 1)]),
    ];
    let r = [
        qv(&[(1, 2), (1, 2), (0, 1)]),
        qv(&[(1, 2), (-1, 2), (0, 1)]),
        qv(&[(1, 2), (0, 1), (1, 2)]),
        qv(&[(1, 2), (0, 1), (-1, 2)]),
        qv(&[(1, 1), (0, 1), (0, 1)]),
        qv(&[(0, 1), (0, 1), (0, 1)]),
    ];
    ensure(d.preparation_vectors() == s.as_slice(), "preparation vectors differ")?;
    ensure(d.result_vectors() == r.as_slice(), "result vectors differ")?;
    within(start, Duration::from_secs(1))?;
    Ok("7 preparation and 6 result vectors match exactly".into())
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let tol = Tolerances::default();
    let t = fixtures::example_table();
    let k = numerical_rank(&t, &tol);
    ensure(k == 3, format!("example rank {k}"))?;
    ensure(rank_oracle(&t.entries().to_rows()) == 3, "rank oracle disagrees")?;
    let qt = qubit_table();
    let kq = numerical_rank(&qt, &tol);
    ensure(kq == 4, format!("qubit rank {kq}"))?;
    within(start, Duration::from_secs(1))?;
    Ok(format!("example rank {k}, qubit rank {kq}"))
}

struct RandomCase {
    table: ProbabilityTable<Rational>,
    basis: Matrix<Rational>,
}

fn random_cases() -> Vec<RandomCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    (0..200)
        .map(|_| {
            let shape = random_shape(&mut rng, 12, 12);
            let max_rank = rng.random_range(1..=6);
            let table = random_table(&mut rng, &shape, max_rank);
            let k = rank_oracle(&table.entries().to_rows());
            let basis = random_basis(&mut rng, k);
            RandomCase { table, basis }
        })
        .collect()
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let tol = Tolerances::default();
    let mut exact_worst = Rational::zero();
    let mut float_worst = 0.0f64;
    let fixture = RandomCase { table: fixtures::example_table(), basis: fixtures::example_basis() };
    let cases = random_cases();
    for (n, case) in std::iter::once(&fixture).chain(&cases).enumerate() {
        let bases = [BasisChoice::Identity, BasisChoice::Explicit(case.basis.clone())];
        for basis in &bases {
            let d = decompose(&case.table, basis, &tol).map_err(|e| format!("table {n}: {e}"))?;
            for (i, r) in d.result_vectors().iter().enumerate() {
                for (j, s) in d.preparation_vectors().iter().enumerate() {
                    let err = (dot_oracle(r, s) - case.table.get(i, j).clone()).abs();
                    exact_worst = exact_worst.max(err);
                }
            }
            let ft = case.table.to_f64();
            let fb = match basis {
                BasisChoice::Identity => BasisChoice::Identity,
                BasisChoice::Explicit(x) => BasisChoice::Explicit(x.to_f64()),
            };
            let d = decompose(&ft, &fb, &tol).map_err(|e| format!("table {n} (float): {e}"))?;
            for (i, r) in d.result_vectors().iter().enumerate() {
                for (j, s) in d.preparation_vectors().iter().enumerate() {
                    let dot: f64 = r.iter().zip(s).map(|(a, b)| a * b).sum();
                    float_worst = float_worst.max((dot - ft.get(i, j)).abs());
                }
            }
        }
    }
    ensure(exact_worst.is_zero(), format!("exact error {exact_worst}"))?;
    ensure(float_worst <= 1e-9, format!("float error {float_worst:e}"))?;
    within(start, Duration::from_secs(10))?;
    Ok(format!("201 tables x 2 bases: exact error 0, float error {float_worst:.1e}"))
}

fn criterion_4() -> Outcome {
    let tol = Tolerances::default();
    let t = fixtures::example_table();
    let d = decompose(&t, &BasisChoice::Explicit(example_basis()), &tol).map_err(|e| e.to_string())?;
    let sums = intervention_sum_vectors(&d, &tol);
    let e = qv(&[(1, 1), (0, 1), (0, 1)]);
    ensure(sums.per_intervention.iter().all(|v| *v == e), "sum vectors are not all (1,0,0)")?;
    for basis in [BasisChoice::Explicit(example_basis()), BasisChoice::Identity] {
        let d = decompose(&t, &basis, &tol).map_err(|e| e.to_string())?;
        let report = geometry_report(&d, &tol);
        let common = report.common_sum.clone().ok_or("no common sum")?;
        ensure(
            d.preparation_vectors().iter().all(|s| dot_oracle(&common, s) == q(1, 1)),
            "e . s_j != 1",
        )?;
        ensure(report.prep_affine_dim == 2, format!("example prep affine dim {}", report.prep_affine_dim))?;
    }
    let qt = qubit_table();
    let dq = decompose(&qt, &BasisChoice::Identity, &tol).map_err(|e| e.to_string())?;
    let report = geometry_report(&dq, &tol);
    let common = report.common_sum.clone().ok_or("qubit table has no common sum")?;
    let worst = common::max_abs(
        dq.preparation_vectors().iter().map(|s| s.iter().zip(&common).map(|(a, b)| a * b).sum::<f64>() - 1.0),
    );
    ensure(worst <= 1e-8, format!("qubit e . s_j off by {worst:e}"))?;
    ensure(report.prep_affine_dim == 3, format!("qubit prep affine dim {}", report.prep_affine_dim))?;
    Ok("sums (1,0,0), e . s_j = 1 in both bases, affine dims 2 and 3".into())
}

fn criterion_5() -> Outcome {
    let c = compression_stats(6, 7, 3).map_err(|e| e.to_string())?;
    ensure((c.compressed, c.original) == (30, 42), format!("{} vs {}", c.compressed, c.original))?;
    let tol = Tolerances::default();
    for (n, case) in random_cases().iter().enumerate() {
        let (l, m) = (case.table.num_rows(), case.table.num_cols());
        let k = numerical_rank(&case.table, &tol);
        let c = compression_stats(l, m, k).map_err(|e| e.to_string())?;
        ensure(k * (l + m) - k * k <= l * m, format!("table {n} violates the bound"))?;
        ensure(c.compressed <= c.original, format!("table {n}: {} > {}", c.compressed, c.original))?;
    }
    Ok("30 <= 42 on the example and the bound holds on 200 random tables".into())
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for n in 2..=4 {
        let basis = hermitian_basis(n);
        for _ in 0..500 {
            let rho = random_density_matrix(n, &mut rng);
            let pi = random_effect(n, &mut rng);
            let check = scalar_product_check(&pi, &rho, &basis, &tol).map_err(|e| e.to_string())?;
            worst = worst.max((trace_oracle(&pi, &rho) - check.dot_value).abs());
            ensure(check.agree, "scalar product check disagrees")?;
        }
    }
    ensure(worst <= 1e-10, format!("trace rule error {worst:e}"))?;
    let mut gram_worst = 0.0f64;
    for n in 1..=4 {
        let g = hermitian_basis(n).gram();
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                gram_worst = gram_worst.max((g[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
    }
    ensure(gram_worst <= 1e-12, format!("Gram error {gram_worst:e}"))?;
    within(start, Duration::from_secs(5))?;
    Ok(format!("1500 pairs, max error {worst:.1e}; Gram error {gram_worst:.1e}"))
}

fn criterion_7() -> Outcome {
    let qt = qubit_table();
    let layout = qt.layout();
    let entry = |k: &str, r: &str, s: &str| -> Result<f64, String> {
        let i = layout.row_index(k, r).ok_or(format!("no row {k}/{r}"))?;
        let j = layout.preparation_index(s).ok_or(format!("no column {s}"))?;
        Ok(*qt.get(i, j))
    };
    let c15 = 15f64.to_radians().cos().powi(2);
    let checks = [
        ("M_45deg", "S_0deg", (0.5, 0.5), (0.5, 0.5)),
        ("M_60deg", "S_0deg", (0.25, 0.75), (0.25, 0.75)),
        ("M_60deg", "S_45deg", (0.933, 0.067), (c15, 1.0 - c15)),
    ];
    for (k, s, reference, analytic) in checks {
        let got = (entry(k, "R_out", s)?, entry(k, "R_abs", s)?);
        for (g, p, a) in [(got.0, reference.0, analytic.0), (got.1, reference.1, analytic.1)] {
            ensure((g - p).abs() <= 5e-4, format!("{s} under {k}: {g} vs reference {p}"))?;
            ensure((g - a).abs() <= 1e-12, format!("{s} under {k}: {g} vs analytic {a}"))?;
        }
    }
    Ok("(1/2,1/2), (1/4,3/4), (0.933,0.067) reproduced".into())
}

fn random_prior(rng: &mut ChaCha8Rng, m: usize) -> Prior<Rational> {
    let w: Vec<i64> = (0..m).map(|_| rng.random_range(0..=9)).collect();
    let total: i64 = w.iter().sum::<i64>().max(1);
    let mut weights: Vec<Rational> = w.iter().map(|&x| q(x, total)).collect();
    if w.iter().all(|&x| x == 0) {
        weights[0] = q(1, 1);
    }
    Prior::new(weights, 0.0).expect("normalized")
}

fn criterion_8() -> Outcome {
    let tol = Tolerances::default();
    let t = fixtures::example_table();
    let layout = t.layout();
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    // Sequential updating.
    for _ in 0..50 {
        let prior = random_prior(&mut rng, 7);
        let mut d1 = ObservationSet::new();
        let mut d2 = ObservationSet::new();
        for row in 0..6 {
            d1.add(row, rng.random_range(0..3));
            d2.add(row, rng.random_range(0..3));
        }
        let joint = match posterior(&t, &prior, &d1.merged(&d2)) {
            Ok(p) => p,
            Err(InferenceError::ZeroEvidence) => continue,
            Err(e) => return Err(e.to_string()),
        };
        let first = posterior(&t, &prior, &d1).map_err(|e| e.to_string())?;
        let second = posterior(&t, &first.posterior, &d2).map_err(|e| e.to_string())?;
        ensure(joint.posterior == second.posterior, "sequential update differs")?;
    }

    // Impossible data.
    let one_r1 = ObservationSet::from_rows(layout, [(0, 1)]).map_err(|e| e.to_string())?;
    let s3 = Prior::point_mass(7, 2);
    ensure(
        matches!(posterior(&t, &s3, &one_r1), Err(InferenceError::ZeroEvidence)),
        "impossible data accepted",
    )?;

    // Recovery of S_5: the frozen seed, then the recovery rate over seeds.
    let schedule = [(0, 1000), (1, 1000), (2, 1000)];
    let uniform = Prior::<f64>::uniform(7);
    let ft = t.to_f64();
    let recovers = |seed: u64| -> Result<bool, String> {
        let obs = simulate_observations(&ft, 4, &schedule, seed).map_err(|e| e.to_string())?;
        Ok(posterior(&ft, &uniform, &obs).map_err(|e| e.to_string())?.mode() == 4)
    };
    ensure(recovers(20240501)?, "frozen seed does not recover S_5")?;
    let trials = 1000;
    let hits = (0..trials).map(recovers).collect::<Result<Vec<bool>, _>>()?.into_iter().filter(|&h| h).count();
    ensure(hits as f64 / trials as f64 > 0.99, format!("recovered S_5 in {hits}/{trials} runs"))?;

    // Two ways to predict.
    let d = decompose(&ft, &BasisChoice::Explicit(example_basis()), &tol).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let w: Vec<f64> = (0..7).map(|_| rng.random::<f64>()).collect();
        let total: f64 = w.iter().sum();
        let prior = Prior::new(w.iter().map(|x| x / total).collect(), 1e-9).map_err(|e| e.to_string())?;
        let report = posterior_with_vector(&ft, &d, &prior, &ObservationSet::new()).map_err(|e| e.to_string())?;
        let s_new = report.effective_vector.clone().ok_or("no effective vector")?;
        for k in 0..3 {
            let a = predict(&ft, &report.posterior, k);
            let b = predict_from_vector(&d, &s_new, k);
            worst = worst.max(common::max_abs(a.iter().zip(&b).map(|(x, y)| x - y)));
        }
    }
    ensure(worst <= 1e-10, format!("prediction mismatch {worst:e}"))?;
    Ok(format!("sequential exact, ZeroEvidence raised, S_5 recovered {hits}/{trials}, predictions agree to {worst:.1e}"))
}

fn criterion_9() -> Outcome {
    let tol = Tolerances::default();
    let full = fixtures::example_table();
    let keep: Vec<usize> = (0..6).collect();
    let rows: Vec<usize> = (0..6).collect();
    let hidden = ProbabilityTable::build(
        full.layout().preparations()[..6].to_vec(),
        full.layout().interventions().to_vec(),
        full.entries().select(&rows, &keep),
        0.0,
    )
    .map_err(|e| e.to_string())?;
    let d = decompose(&hidden, &BasisChoice::Explicit(example_basis()), &tol).map_err(|e| e.to_string())?;
    // S_7 has frequencies (3/4, 1/4), (1/2, 1/2), (1, 0).
    let obs = ObservationSet::from_rows(hidden.layout(), [(0, 3), (1, 1), (2, 2), (3, 2), (4, 4)])
        .map_err(|e| e.to_string())?;
    let emb = embed_new_preparation(&hidden, &d, &obs, None, &tol, None).map_err(|e| e.to_string())?;
    ensure(emb.vector == qv(&[(1, 1), (1, 2), (0, 1)]), format!("embedded vector {:?}", emb.vector))?;
    ensure(!emb.rank_would_grow(), "consistent column flagged")?;

    let d_full = decompose(&full, &BasisChoice::Identity, &tol).map_err(|e| e.to_string())?;
    let odd = ObservationSet::from_rows(full.layout(), [(0, 1), (2, 1), (5, 1)]).map_err(|e| e.to_string())?;
    let emb = embed_new_preparation(&full, &d_full, &odd, None, &tol, None).map_err(|e| e.to_string())?;
    let mut augmented = full.entries().to_rows();
    for (row, f) in augmented.iter_mut().zip([1, 0, 1, 0, 0, 1]) {
        row.push(q(f, 1));
    }
    let oracle = rank_oracle(&augmented);
    ensure(oracle == 4, format!("rank oracle gives {oracle}"))?;
    ensure(emb.augmented_rank == oracle, format!("augmented rank {}", emb.augmented_rank))?;
    ensure(emb.rank_would_grow(), "rank growth not detected")?;
    Ok("hidden S_7 embedded at (1,1/2,0); rank growth 3 -> 4 detected".into())
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("exact example vectors", criterion_1),
        ("rank values", criterion_2),
        ("reconstruction", criterion_3),
        ("geometry invariants", criterion_4),
        ("compression inequality", criterion_5),
        ("trace rule", criterion_6),
        ("qubit spot values", criterion_7),
        ("tomography", criterion_8),
        ("new-preparation embedding", criterion_9),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail} [{ms} ms]", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why} [{ms} ms]", n + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
