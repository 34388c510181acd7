//! Bundled reference data: the worked 6x7 example table and its basis
//! matrix, plus the default qubit polarization grid.

use crate::io;
use crate::matrix::Matrix;
use crate::quantum::PolarizationGrid;
use crate::scalar::Rational;
use crate::table::ProbabilityTable;

pub const EXAMPLE_TABLE_JSON: &str = include_str!("../fixtures/example_table.json");
pub const EXAMPLE_BASIS_JSON: &str = include_str!("../fixtures/example_basis.json");
pub const QUBIT_PRESET_JSON: &str = include_str!("../fixtures/qubit_preset.json");

/// The 6x7 table with three two-result interventions and seven
/// preparations; rank 3.
pub fn example_table() -> ProbabilityTable<Rational> {
    io::parse_table_json::<Rational>(EXAMPLE_TABLE_JSON)
        .and_then(|raw| raw.into_table(0.0).map_err(Into::into))
        .expect("bundled table is valid")
}

pub fn example_table_f64() -> ProbabilityTable<f64> {
    example_table().to_f64()
}

pub fn example_basis() -> Matrix<Rational> {
    io::parse_basis_json(EXAMPLE_BASIS_JSON).expect("bundled basis parses")
}

/// Linear polarizations at 0/45/90/135 degrees, right-circular and fully
/// mixed preparations; filters at 0/30/45/60 degrees plus a circular filter.
pub fn qubit_grid() -> PolarizationGrid {
    io::parse_polarization_grid(QUBIT_PRESET_JSON).expect("bundled grid parses")
}
