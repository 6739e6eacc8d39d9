use bosonize_core::plasmon::compute_mode;
use bosonize_core::{FermiSystem, Momentum, Potential};
use proptest::prelude::*;

fn coulomb(kf2: i64) -> FermiSystem {
    FermiSystem::new(kf2, 1, Potential::Coulomb { g: 4.0 * std::f64::consts::PI }, false).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mode_invariants(kf2 in 4i64..=400, x in 0i64..=3, y in 0i64..=2, z in 0i64..=1) {
        prop_assume!(x + y + z > 0);
        let m = compute_mode(&coulomb(kf2), Momentum::new(x, y, z)).unwrap();
        prop_assert!((m.phi.norm() - 1.0).abs() <= 1e-12);
        prop_assert!(m.residual <= 1e-9 * m.varepsilon);
        prop_assert!(m.epsilon >= m.epsilon_lower.unwrap() - 1e-10 * m.epsilon);
        if m.threshold.satisfied {
            prop_assert!(m.epsilon <= m.epsilon_upper.unwrap() * (1.0 + 1e-12));
            prop_assert!(m.epsilon > 2.0 * m.lambda_max);
            prop_assert!(m.delocalization <= 10.0);
            prop_assert!(m.phi_inf <= m.phi_inf_bound.unwrap() * (1.0 + 1e-12));
            if let Some(d) = m.closed_form_deviation {
                prop_assert!(d <= 1e-8);
            }
        }
    }
}

#[test]
fn mean_field_rejected() {
    let sys = FermiSystem::new(9, 1, Potential::Coulomb { g: 1.0 }, true).unwrap();
    assert!(compute_mode(&sys, Momentum::new(1, 0, 0)).is_err());
}
