use bosonize_core::lattice::momenta_within;
use bosonize_core::riemann::{check_minus_one_asymptotics, continuum_integral, power_sum, slice_summation};
use bosonize_core::{Lune, Momentum};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn slice_summation_is_exact(a in 0.1f64..3.0, b in -2.0f64..2.0, c in 0.1f64..1.5) {
        let f = |x: f64| a * x.powf(-c) + b * (x / 7.0).sin() + x.ln_1p();
        for kf2 in [1, 4, 17, 50, 100] {
            for k in momenta_within(4) {
                let lune = Lune::new(kf2, k).unwrap();
                let direct: f64 = lune.lambdas().into_iter().map(f).sum();
                let sliced = slice_summation(&lune, f);
                prop_assert!((direct - sliced).abs() <= 1e-12 * direct.abs().max(1e-300), "{} vs {}", direct, sliced);
            }
        }
    }
}

#[test]
fn minus_one_errors_decrease() {
    let rows = check_minus_one_asymptotics(&[625, 2500, 10000], Momentum::new(1, 0, 0)).unwrap();
    assert!(rows.windows(2).all(|w| w[1].relative_error < w[0].relative_error), "{rows:?}");
    assert!(rows[2].relative_error < 0.1);
}

fn continuum_deviations(beta: f64) -> Vec<f64> {
    [100, 400, 2500]
        .iter()
        .map(|&kf2| {
            let lune = Lune::new(kf2, Momentum::new(1, 0, 0)).unwrap();
            let c = continuum_integral((kf2 as f64).sqrt(), 1.0, beta).unwrap();
            (power_sum(&lune, beta).value / c - 1.0).abs()
        })
        .collect()
}

#[test]
fn power_sums_approach_continuum() {
    for beta in [0.0, 1.0] {
        let d = continuum_deviations(beta);
        assert!(d.iter().all(|x| *x < 0.15), "beta={beta}: {d:?}");
        assert!(d[2] < d[0], "beta={beta}: {d:?}");
    }
    let d = continuum_deviations(1.0);
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
}

#[test]
fn lattice_count_deviation_not_monotone() {
    // |L_k| − continuum volume fluctuates: kF2 = 400 sits closer than 2500
    let d = continuum_deviations(0.0);
    assert!((d[1] - 4.972542605348e-4).abs() < 1e-12, "{d:?}");
    assert!((d[2] - 1.110280831289e-3).abs() < 1e-12, "{d:?}");
}

#[test]
fn power_sum_positive() {
    for k in momenta_within(3) {
        let lune = Lune::new(9, k).unwrap();
        for beta in [-1.0, -0.5, 0.0, 0.5, 1.0, 3.0] {
            assert!(power_sum(&lune, beta).value > 0.0);
        }
    }
}
