//! Fixtures shared by the criterion benches.

use bosonize_core::{FermiSystem, Momentum, Potential};

pub fn coulomb(kf2: i64, mean_field: bool) -> FermiSystem {
    FermiSystem::new(kf2, 1, Potential::Coulomb { g: 1.0 }, mean_field).expect("valid system")
}

pub fn axis(n: i64) -> Momentum {
    Momentum::new(n, 0, 0)
}
