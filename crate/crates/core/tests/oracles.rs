//! Worked examples whose expected values come from independent reference
//! computations in `common`.
#![allow(clippy::needless_range_loop)]

mod common;

use common::{det_oracle, dot_oracle, float_rank_oracle, q, qv, rank_oracle, solve_oracle, trace_oracle};
use num::complex::Complex64;
use ptables::decompose::{decompose, example_basis, numerical_rank, pivot_block_form, reconstruct, BasisChoice};
use ptables::fixtures;
use ptables::geometry::{export_hulls, geometry_report, intervention_sum_vectors, GeometryWarning, PointKind};
use ptables::inference::{
    disjunction_across, effective_vector, embed_new_preparation, likelihood, posterior, predict,
    simulate_observations, ObservationSet, Prior,
};
use ptables::quantum::{
    bloch_vector, expand, hermitian_basis, quantum_table, qubit_polarization_preset, random_density_matrix,
    random_effect, scalar_product_check, trace_probability, trivial_model, CMatrix, PolarizationGrid,
};
use ptables::table::Warning;
use ptables::{table_from_counts, InterventionSpec, Matrix, ProbabilityTable, Rational, Tolerances};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn two_result(names: &[&str]) -> Vec<InterventionSpec> {
    names
        .iter()
        .enumerate()
        .map(|(k, n)| InterventionSpec::new(*n, [format!("R_{}", 2 * k + 1), format!("R_{}", 2 * k + 2)]))
        .collect()
}

#[test]
fn identity_basis_vectors_solve_the_leading_block() {
    let t = fixtures::example_table();
    let d = decompose(&t, &BasisChoice::Identity, &tol()).unwrap();
    let p = t.entries().to_rows();
    let a: Vec<Vec<Rational>> = p[..3].iter().map(|r| r[..3].to_vec()).collect();
    for j in 3..7 {
        let b: Vec<Rational> = p[..3].iter().map(|r| r[j].clone()).collect();
        assert_eq!(d.preparation_vector(j), solve_oracle(&a, &b).as_slice(), "s_{}", j + 1);
    }
    let r = [
        qv(&[(1, 1), (1, 2), (0, 1)]),
        qv(&[(0, 1), (1, 2), (1, 1)]),
        qv(&[(1, 2), (1, 1), (1, 2)]),
        qv(&[(1, 2), (0, 1), (1, 2)]),
        qv(&[(1, 1), (1, 1), (1, 1)]),
        qv(&[(0, 1), (0, 1), (0, 1)]),
    ];
    assert_eq!(d.result_vectors(), r.as_slice());
    for (i, ri) in r.iter().enumerate() {
        for j in 0..7 {
            assert_eq!(dot_oracle(ri, d.preparation_vector(j)), p[i][j]);
        }
    }
}

#[test]
fn swapped_columns_give_a_nonsingular_leading_block() {
    let t = fixtures::example_table();
    let mut cols: Vec<usize> = (0..7).collect();
    cols.swap(0, 1);
    let rows: Vec<usize> = (0..6).collect();
    let mut preps = t.layout().preparations().to_vec();
    preps.swap(0, 1);
    let swapped =
        ProbabilityTable::build(preps, t.layout().interventions().to_vec(), t.entries().select(&rows, &cols), 0.0)
            .unwrap();
    let block = pivot_block_form(&swapped, &tol()).unwrap();
    assert_ne!(det_oracle(&block.a.to_rows()), q(0, 1));
    let d = decompose(&swapped, &BasisChoice::Identity, &tol()).unwrap();
    assert_eq!(d.product_matrix(), *swapped.entries());
}

#[test]
fn identical_columns_have_rank_one() {
    let column = qv(&[(1, 3), (2, 3), (1, 4), (3, 4)]);
    let entries = Matrix::from_columns(4, &vec![column; 5]);
    let preps = (1..=5).map(|j| format!("S_{j}")).collect();
    let t = ProbabilityTable::build(preps, two_result(&["M_1", "M_2"]), entries, 0.0).unwrap();
    assert_eq!(numerical_rank(&t, &tol()), 1);
    assert_eq!(rank_oracle(&t.entries().to_rows()), 1);
}

#[test]
fn rank_two_table_from_known_factors_round_trips() {
    // Columns are mixtures of two distributions over two interventions.
    let e1 = qv(&[(1, 1), (0, 1), (1, 3), (2, 3)]);
    let e2 = qv(&[(1, 4), (3, 4), (1, 1), (0, 1)]);
    let mix = [(1, 1), (0, 1), (1, 2), (1, 3), (3, 5)];
    let cols: Vec<Vec<Rational>> = mix
        .iter()
        .map(|&(n, d)| {
            let w = q(n, d);
            e1.iter().zip(&e2).map(|(a, b)| w.clone() * a + (q(1, 1) - w.clone()) * b).collect()
        })
        .collect();
    let entries = Matrix::from_columns(4, &cols);
    let preps = (1..=5).map(|j| format!("S_{j}")).collect();
    let t = ProbabilityTable::build(preps, two_result(&["M_1", "M_2"]), entries, 0.0).unwrap();
    assert_eq!(rank_oracle(&t.entries().to_rows()), 2);
    let d = decompose(&t, &BasisChoice::Identity, &tol()).unwrap();
    assert_eq!(d.rank(), 2);
    assert_eq!(reconstruct(&d, &tol()).unwrap(), t);
}

#[test]
fn identity_basis_sums_are_all_ones() {
    let t = fixtures::example_table();
    let d = decompose(&t, &BasisChoice::Identity, &tol()).unwrap();
    let r = d.result_vectors();
    let expected: Vec<Rational> = (0..3).map(|c| r[0][c].clone() + r[1][c].clone()).collect();
    assert_eq!(expected, qv(&[(1, 1), (1, 1), (1, 1)]));
    let sums = intervention_sum_vectors(&d, &tol());
    assert_eq!(sums.common, Some(expected));
}

#[test]
fn prep_affine_dimension_is_basis_independent() {
    let t = fixtures::example_table();
    for basis in [BasisChoice::Identity, BasisChoice::Explicit(example_basis())] {
        let d = decompose(&t, &basis, &tol()).unwrap();
        let s = d.preparation_vectors();
        let diffs: Vec<Vec<Rational>> =
            s[1..].iter().map(|v| v.iter().zip(&s[0]).map(|(a, b)| a - b).collect()).collect();
        assert_eq!(geometry_report(&d, &tol()).prep_affine_dim, rank_oracle(&diffs));
        assert_eq!(rank_oracle(&diffs), 2);
    }
}

#[test]
fn counts_of_one_and_zero_are_divided_directly() {
    let counts = Matrix::from_vec(2, 1, vec![1u64, 0]);
    let (t, report) =
        table_from_counts::<Rational>(&counts, vec!["S_1".into()], two_result(&["M_1"])).unwrap();
    assert_eq!(t.entries().column(0), vec![q(1, 1), q(0, 1)]);
    assert!(matches!(report.warnings.as_slice(), [Warning::LowCount { trials: 1, .. }]));
}

#[test]
fn counts_of_75_and_25_give_three_quarters() {
    let counts = Matrix::from_vec(2, 1, vec![75u64, 25]);
    let (t, report) =
        table_from_counts::<Rational>(&counts, vec!["S_5".into()], two_result(&["M_1"])).unwrap();
    assert_eq!(t.entries().column(0), vec![q(75, 100), q(25, 100)]);
    assert!(report.warnings.is_empty());
}

#[test]
fn disjunction_across_interventions_weights_table_entries() {
    let t = fixtures::example_table();
    let d = decompose(&t, &BasisChoice::Explicit(example_basis()), &tol()).unwrap();
    let p = t.entries();
    let expected = q(1, 2) * p[(0, 0)].clone() + q(1, 2) * p[(2, 0)].clone();
    let got = disjunction_across(&d, (0, q(1, 2)), (2, q(1, 2)), 0, &tol()).unwrap();
    assert_eq!(got, expected);
    assert_eq!(got, q(3, 4));
}

#[test]
fn likelihood_is_a_product_of_entries() {
    let t = fixtures::example_table();
    let obs = ObservationSet::from_rows(t.layout(), [(0, 2), (2, 1)]).unwrap();
    let p = t.entries();
    let expected = p[(0, 4)].clone() * p[(0, 4)].clone() * p[(2, 4)].clone();
    let l = likelihood(&t, 4, &obs);
    assert_eq!(l.value, expected);
    assert_eq!(l.value, q(27, 64));
    assert!((l.log - (27f64 / 64.0).ln()).abs() < 1e-12);
}

#[test]
fn posterior_after_one_r1_is_proportional_to_its_row() {
    let t = fixtures::example_table();
    let obs = ObservationSet::from_rows(t.layout(), [(0, 1)]).unwrap();
    let post = posterior(&t, &Prior::uniform(7), &obs).unwrap();
    let row = t.entries().row(0);
    let total = row.iter().fold(q(0, 1), |a, b| a + b);
    let expected: Vec<Rational> = row.iter().map(|x| x / total.clone()).collect();
    assert_eq!(post.posterior.weights(), expected.as_slice());
    assert_eq!(post.posterior.weights()[2], q(0, 1));
}

#[test]
fn prediction_and_effective_vector_for_an_even_mixture() {
    let t = fixtures::example_table();
    let d = decompose(&t, &BasisChoice::Explicit(example_basis()), &tol()).unwrap();
    let w = Prior::uniform_over(7, &[0, 2]);
    let p = t.entries();
    let avg = |i: usize| (p[(i, 0)].clone() + p[(i, 2)].clone()) / q(2, 1);
    assert_eq!(predict(&t, &w, 0), vec![avg(0), avg(1)]);
    let s = effective_vector(&d, &w);
    let expected: Vec<Rational> =
        d.preparation_vector(0).iter().zip(d.preparation_vector(2)).map(|(a, b)| (a + b) / q(2, 1)).collect();
    assert_eq!(s, expected);
    assert_eq!(s, d.preparation_vector(5));
}

#[test]
fn simulated_s7_data_embed_near_its_vector() {
    let full = fixtures::example_table();
    let cols: Vec<usize> = (0..6).collect();
    let rows: Vec<usize> = (0..6).collect();
    let hidden = ProbabilityTable::build(
        full.layout().preparations()[..6].to_vec(),
        full.layout().interventions().to_vec(),
        full.entries().select(&rows, &cols),
        0.0,
    )
    .unwrap()
    .to_f64();
    let d = decompose(&hidden, &BasisChoice::Explicit(example_basis::<f64>()), &tol()).unwrap();
    let obs = simulate_observations(&full.to_f64(), 6, &[(0, 10_000), (1, 10_000), (2, 10_000)], 11).unwrap();
    let emb = embed_new_preparation(&hidden, &d, &obs, None, &tol(), Some(0.05)).unwrap();
    let expected = [1.0, 0.5, 0.0];
    // Binomial standard error at n = 10^4 is at most 0.005 per frequency.
    for (got, want) in emb.vector.iter().zip(expected) {
        assert!((got - want).abs() < 0.03, "{:?}", emb.vector);
    }
    assert!(!emb.rank_would_grow());
}

#[test]
fn simulated_frequencies_converge() {
    let t = fixtures::example_table_f64();
    let obs = simulate_observations(&t, 4, &[(0, 100_000)], 5).unwrap();
    let f = obs.count(0) as f64 / 100_000.0;
    let sigma = (0.75f64 * 0.25 / 100_000.0).sqrt();
    assert!((f - 0.75).abs() < 3.0 * sigma, "{f}");
    let certain = simulate_observations(&t, 0, &[(0, 100)], 1).unwrap();
    assert_eq!((certain.count(0), certain.count(1)), (100, 0));
}

fn ket(a: Complex64, b: Complex64) -> CMatrix {
    let v = [a, b];
    CMatrix::from_fn(2, 2, |i, j| v[i] * v[j].conj())
}

#[test]
fn gram_matrices_by_direct_trace() {
    for n in 1..=4 {
        let b = hermitian_basis(n);
        assert_eq!(b.len(), n * n);
        for (i, x) in b.elements().iter().enumerate() {
            for (j, y) in b.elements().iter().enumerate() {
                let g = trace_oracle(x, y);
                assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn expansions_reconstruct_their_operators() {
    let b = hermitian_basis(2);
    let c = expand(&CMatrix::identity(2, 2), &b, &tol()).unwrap();
    assert!((c[0] - 2f64.sqrt()).abs() < 1e-12);
    assert!(c[1..].iter().all(|x| x.abs() < 1e-12));
    let zero = expand(&CMatrix::zeros(2, 2), &b, &tol()).unwrap();
    assert!(zero.iter().all(|x| *x == 0.0));
    let rho = ket(1.0.into(), 0.0.into());
    let back = b.combine(&expand(&rho, &b, &tol()).unwrap());
    assert!((back - &rho).iter().all(|z| z.norm() < 1e-12));
}

#[test]
fn trace_probabilities_of_polarizations() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let zero = ket(1.0.into(), 0.0.into());
    let plus = ket(h.into(), h.into());
    assert!((trace_probability(&zero, &zero, &tol()).unwrap() - 1.0).abs() < 1e-12);
    assert!((trace_probability(&plus, &zero, &tol()).unwrap() - 0.5).abs() < 1e-12);
    let (c, s) = (60f64.to_radians().cos(), 60f64.to_radians().sin());
    let sixty = ket(c.into(), s.into());
    let p = trace_probability(&sixty, &plus, &tol()).unwrap();
    assert!((p - 15f64.to_radians().cos().powi(2)).abs() < 1e-12);
    assert!((p - 0.933).abs() < 5e-4);
    for (pi, rho) in [(&zero, &zero), (&plus, &zero), (&sixty, &plus)] {
        assert!(scalar_product_check(pi, rho, &hermitian_basis(2), &tol()).unwrap().agree);
    }
}

#[test]
fn random_pairs_obey_the_trace_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for n in [2, 3] {
        let b = hermitian_basis(n);
        for _ in 0..100 {
            let rho = random_density_matrix(n, &mut rng);
            let pi = random_effect(n, &mut rng);
            let check = scalar_product_check(&pi, &rho, &b, &tol()).unwrap();
            assert!(check.agree);
            assert!((check.dot_value - trace_oracle(&pi, &rho)).abs() < 1e-10);
        }
    }
}

#[test]
fn trivial_system_gives_ones() {
    let t = quantum_table(&trivial_model(), &tol()).unwrap();
    assert_eq!(t.entries().as_slice(), &[1.0]);
}

fn spec_grid_table() -> ProbabilityTable<f64> {
    let grid = PolarizationGrid::linear(&[0.0, 45.0, 90.0, 135.0, 0.0], &[1.0, 1.0, 1.0, 1.0, 0.0], &[0.0, 30.0, 45.0, 60.0]);
    quantum_table(&qubit_polarization_preset(&grid, &tol()).unwrap(), &tol()).unwrap()
}

#[test]
fn linear_polarizations_alone_have_rank_three() {
    // Real density matrices span three of the four Hermitian dimensions.
    let t = spec_grid_table();
    assert_eq!(numerical_rank(&t, &tol()), 3);
    assert_eq!(float_rank_oracle(&t.entries().to_rows(), 1e-9), 3);
}

#[test]
fn informationally_complete_preset_has_rank_four() {
    let model = qubit_polarization_preset(&fixtures::qubit_grid(), &tol()).unwrap();
    let t = quantum_table(&model, &tol()).unwrap();
    assert_eq!(float_rank_oracle(&t.entries().to_rows(), 1e-9), 4);
    assert_eq!(numerical_rank(&t, &tol()), 4);
}

#[test]
fn qubit_export_warns_and_uses_intrinsic_coordinates() {
    let model = qubit_polarization_preset(&fixtures::qubit_grid(), &tol()).unwrap();
    let t = quantum_table(&model, &tol()).unwrap();
    let d = decompose(&t, &BasisChoice::Identity, &tol()).unwrap();
    let export = export_hulls(&d, &tol());
    assert!(export.warnings.contains(&GeometryWarning::DimensionTooHigh { kind: None, dim: 4 }));
    let preps: Vec<&Vec<f64>> =
        export.points.iter().filter(|p| p.kind == PointKind::Preparation).map(|p| &p.coords).collect();
    let diffs: Vec<Vec<f64>> =
        preps[1..].iter().map(|p| p.iter().zip(preps[0]).map(|(a, b)| a - b).collect()).collect();
    assert_eq!(float_rank_oracle(&diffs, 1e-9), 3);
    let prep_hull = export.hulls.iter().find(|h| h.kind == PointKind::Preparation).unwrap();
    assert_eq!(prep_hull.affine_dim, 3);
    assert!(export.points.iter().filter(|p| p.kind == PointKind::Preparation).all(|p| p.intrinsic.as_ref().is_some_and(|i| i.len() == 3)));
}

#[test]
fn pure_state_entries_follow_the_bloch_angle() {
    let model = qubit_polarization_preset(&fixtures::qubit_grid(), &tol()).unwrap();
    let t = quantum_table(&model, &tol()).unwrap();
    let mut row = 0;
    for povm in model.povms() {
        let pass = &povm.elements[0].matrix;
        let bf = bloch_vector(pass);
        for (j, s) in model.states().iter().enumerate() {
            if (s.matrix.clone() * &s.matrix).trace().re < 1.0 - 1e-12 {
                continue;
            }
            let bs = bloch_vector(&s.matrix);
            let cos_delta = bs.iter().zip(&bf).map(|(a, b)| a * b).sum::<f64>();
            assert!((t.get(row, j) - (1.0 + cos_delta) / 2.0).abs() < 1e-10);
        }
        row += povm.elements.len();
    }
}
