//! Seeded fixtures shared by the criterion benches.

use covlab::data::{generate_synthetic, ErrorStructure, SyntheticMarket, SyntheticMarketSpec};
use nalgebra::DMatrix;

/// Two-factor market with unit idiosyncratic noise.
pub fn factor_market(p: usize, t: usize, seed: u64) -> SyntheticMarket {
    let spec = SyntheticMarketSpec::new(p, t, 2, 1.0, ErrorStructure::Diagonal { sd: 1.0 }, seed);
    generate_synthetic(&spec).expect("valid synthetic spec")
}

/// Returns and factors of [`factor_market`] as raw matrices.
pub fn panel(p: usize, t: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = factor_market(p, t, seed);
    (m.returns.values, m.factors.values)
}
