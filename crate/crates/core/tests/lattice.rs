use std::collections::BTreeSet;

use bosonize_core::lattice::{ceil_sqrt, enumerate_fermi_ball, find_perp_generators, lune_slices, momenta_within};
use bosonize_core::{Lune, Momentum};
use proptest::prelude::*;

fn scan_lune(kf2: i64, k: Momentum) -> BTreeSet<Momentum> {
    let r = ceil_sqrt(kf2) + k.linf();
    let mut out = BTreeSet::new();
    for x in -r..=r {
        for y in -r..=r {
            for z in -r..=r {
                let p = Momentum::new(x, y, z);
                let q = Momentum::new(x - k.x, y - k.y, z - k.z);
                if q.norm2() <= kf2 && kf2 < p.norm2() {
                    out.insert(p);
                }
            }
        }
    }
    out
}

fn nonzero_k(max: i64) -> impl Strategy<Value = Momentum> {
    (-max..=max, -max..=max, -max..=max)
        .prop_map(|(x, y, z)| Momentum::new(x, y, z))
        .prop_filter("k ≠ 0 within the ball", move |k| !k.is_zero() && k.norm2() <= max * max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lune_matches_scan(kf2 in 1i64..=400, k in nonzero_k(6)) {
        let lune = Lune::new(kf2, k).unwrap();
        let got: BTreeSet<Momentum> = lune.points().iter().copied().collect();
        prop_assert_eq!(got.len(), lune.len());
        prop_assert_eq!(got, scan_lune(kf2, k));
        prop_assert!(lune.points().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn lambdas_at_least_half(kf2 in 1i64..=400, k in nonzero_k(6)) {
        let lune = Lune::new(kf2, k).unwrap();
        for (i, p) in lune.points().iter().enumerate() {
            let q = Momentum::new(p.x - k.x, p.y - k.y, p.z - k.z);
            prop_assert_eq!(lune.twice_lambdas()[i], p.norm2() - q.norm2());
            prop_assert!(lune.lambda(i) >= 0.5);
        }
    }

    #[test]
    fn slices_partition_lune(kf2 in 1i64..=400, k in nonzero_k(6)) {
        let lune = Lune::new(kf2, k).unwrap();
        let g = k.gcd();
        let mut seen = BTreeSet::new();
        for s in lune_slices(&lune) {
            for p in &s.points {
                prop_assert_eq!(k.dot(p), g * s.m);
                prop_assert!(seen.insert(*p), "{:?} in two slices", p);
            }
        }
        prop_assert_eq!(seen.len(), lune.len());
    }

    #[test]
    fn cardinality_within_twenty(kf2 in 1i64..=400, k in nonzero_k(6)) {
        let lune = Lune::new(kf2, k).unwrap();
        let kf = (kf2 as f64).sqrt();
        let bound = 20.0 * (kf * kf * k.norm()).min(kf * kf * kf);
        prop_assert!((lune.len() as f64) <= bound);
    }
}

#[test]
fn covolume_up_to_ten() {
    for k in momenta_within(10) {
        let (a, b) = find_perp_generators(k).unwrap();
        assert_eq!((a.dot(&k), b.dot(&k)), (0, 0), "{k:?}");
        let gram = (a.norm2() as i128) * (b.norm2() as i128) - (a.dot(&b) as i128).pow(2);
        let g = k.gcd() as i128;
        assert_eq!(gram * g * g, k.norm2() as i128, "{k:?}");
    }
}

#[test]
fn far_lune_is_translated_ball() {
    for kf2 in [1, 2, 5, 9, 30] {
        let ball = enumerate_fermi_ball(kf2).unwrap();
        for k in [Momentum::new(7, 0, 0), Momentum::new(5, 5, 1), Momentum::new(0, -12, 3)] {
            if k.norm2() < 4 * kf2 {
                continue;
            }
            let lune = Lune::new(kf2, k).unwrap();
            assert_eq!(lune.len(), ball.len());
            let shifted: BTreeSet<Momentum> =
                ball.points().iter().map(|p| Momentum::new(p.x + k.x, p.y + k.y, p.z + k.z)).collect();
            assert_eq!(lune.points().iter().copied().collect::<BTreeSet<_>>(), shifted);
        }
    }
}

#[test]
fn ball_sizes() {
    // lattice-point counts of |p|² ≤ n
    let counts = [(1, 7), (2, 19), (3, 27), (4, 33), (5, 57), (9, 123), (25, 515)];
    for (kf2, n) in counts {
        assert_eq!(enumerate_fermi_ball(kf2).unwrap().len(), n, "kF2={kf2}");
    }
}
