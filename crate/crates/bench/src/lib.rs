//! Fixtures shared by the benchmarks.

use gsprep_core::peps::{init_peps, itebd_evolve, EvolutionSchedule, PepsState};
use gsprep_core::{Complex64, HeisenbergSpec};

pub fn spec(rows: usize, cols: usize) -> HeisenbergSpec {
    HeisenbergSpec::new(rows, cols, 1.0, 0.5).expect("valid lattice")
}

/// A briefly evolved PEPS, so amplitudes are not those of a product state.
pub fn warm_peps(rows: usize, cols: usize, bond_dim: usize) -> PepsState {
    let s = spec(rows, cols);
    let mut peps = init_peps(&s.geometry, bond_dim, 0).expect("valid PEPS");
    let schedule = EvolutionSchedule::uniform(&[0.1], 20).expect("valid schedule");
    itebd_evolve(&mut peps, &s, &schedule).expect("evolution runs");
    peps
}

pub fn ramp(dim: usize) -> Vec<Complex64> {
    (0..dim).map(|i| Complex64::new((i % 7) as f64 - 3.0, (i % 5) as f64 - 2.0)).collect()
}
