use std::collections::BTreeMap;
use std::f64::consts::PI;

use bosonize_core::correlation::{
    attractive_sweep, e_corr_bos, e_corr_ex, e_corr_ex_literal, error_scale, fermi_energy,
};
use bosonize_core::lattice::momenta_within;
use bosonize_core::{FermiSystem, Momentum, Potential};

fn orbit_table(v: f64) -> Potential {
    let t: BTreeMap<Momentum, f64> = momenta_within(1).into_iter().map(|k| (k, v)).collect();
    Potential::Table(t)
}

/// Same-spin pairs inside the ball interact through V̂_{p−q}.
fn fermi_energy_pairs(sys: &FermiSystem) -> f64 {
    let ball = sys.ball().unwrap();
    let s = sys.s as f64;
    let n = s * ball.len() as f64;
    let mut kinetic = 0.0;
    let mut exchange = 0.0;
    for p in ball.points() {
        kinetic += s * p.norm2() as f64;
        for q in ball.points() {
            if p != q {
                exchange += s * sys.v_hat(Momentum::new(p.x - q.x, p.y - q.y, p.z - q.z));
            }
        }
    }
    let c = 1.0 / (2.0 * (2.0 * PI).powi(3));
    kinetic + sys.coupling_scale() * c * (n * (n - 1.0) * sys.v0 - exchange)
}

#[test]
fn fermi_energy_matches_pair_sum() {
    for (kf2, s, pot, mf) in [
        (4, 1, Potential::Coulomb { g: 4.0 * PI }, true),
        (9, 2, Potential::Gaussian { a: 3.0, b: 0.2 }, false),
        (5, 1, orbit_table(-2.0), true),
    ] {
        let sys = FermiSystem::new(kf2, s, pot, mf).unwrap().with_v0(0.3);
        let (a, b) = (fermi_energy(&sys).unwrap(), fermi_energy_pairs(&sys));
        assert!((a - b).abs() <= 1e-12 * b.abs(), "kF2={kf2}: {a} vs {b}");
    }
}

#[test]
fn exchange_reduced_equals_literal() {
    // support |k|² ≤ 9, so the outer cutoff 3 misses nothing
    let gauss = Potential::Table(
        momenta_within(3).into_iter().map(|k| (k, 2.0 * (-0.4 * k.norm2() as f64).exp())).collect(),
    );
    for kf2 in 1..=4 {
        for (s, mf) in [(1, true), (2, false)] {
            let sys = FermiSystem::new(kf2, s, gauss.clone(), mf).unwrap();
            let reduced = e_corr_ex(&sys, 3).unwrap().total;
            let literal = e_corr_ex_literal(&sys, 3).unwrap();
            assert!((reduced - literal).abs() <= 1e-12 * literal.abs(), "kF2={kf2}: {reduced} vs {literal}");
        }
    }
}

#[test]
fn signs_and_cutoff_monotone() {
    let sys = FermiSystem::new(9, 1, Potential::Coulomb { g: 4.0 * PI }, true).unwrap();
    let mut last = 0.0;
    for cutoff in 1..=5 {
        let bos = e_corr_bos(&sys, cutoff).unwrap().total;
        assert!(bos <= 0.0);
        assert!(bos.abs() >= last, "cutoff {cutoff}");
        last = bos.abs();
        assert!(e_corr_ex(&sys, cutoff).unwrap().total >= 0.0);
    }
}

#[test]
fn error_scale_grows_slowly() {
    let scale = |kf2| {
        let sys = FermiSystem::new(kf2, 1, Potential::Coulomb { g: 1.0 }, true).unwrap();
        error_scale(&sys, 40)
    };
    let (a, b, c) = (scale(25), scale(100), scale(400));
    assert!(a < b && b < c);
    // Coulomb: Σ V̂² min{|k|, k_F} grows like log k_F
    assert!(c / a < 2.0);
}

#[test]
fn attractive_sweep_margins() {
    let eps = 0.2;
    let floor = -(1.0 - eps) * 4.0 * PI * PI;
    let sys = FermiSystem::new(2500, 1, orbit_table(floor), true).unwrap();
    let rows = attractive_sweep(&sys, eps, 1).unwrap();
    assert_eq!(rows.iter().map(|r| r.class.multiplicity).sum::<usize>(), 6);
    for r in &rows {
        assert!(r.within_relaxed_bound && r.admissible);
        assert!((r.margin - eps).abs() < 0.15, "{r:?}");
    }
    let deep = FermiSystem::new(2500, 1, orbit_table(-1.2 * 4.0 * PI * PI), true).unwrap();
    for r in attractive_sweep(&deep, eps, 1).unwrap() {
        assert!(!r.within_relaxed_bound && !r.admissible && r.margin < 0.0, "{r:?}");
    }
}
