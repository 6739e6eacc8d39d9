//! Integer momenta, the Fermi ball, lunes and their plane slices.
//!
//! Every membership test here is an exact integer comparison against `kf2`;
//! floating point only enters the ellipse-area side of the slice report.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Momentum {
    pub x: i64,
    pub y: i64,
    pub z: i64,
}

impl Momentum {
    pub const ZERO: Momentum = Momentum { x: 0, y: 0, z: 0 };

    pub const fn new(x: i64, y: i64, z: i64) -> Self {
        Momentum { x, y, z }
    }

    pub fn norm2(&self) -> i64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(&self) -> f64 {
        (self.norm2() as f64).sqrt()
    }

    pub fn dot(&self, o: &Momentum) -> i64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &Momentum) -> Momentum {
        Momentum::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn linf(&self) -> i64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn is_zero(&self) -> bool {
        *self == Momentum::ZERO
    }

    /// gcd of the absolute components; 0 only for the zero vector.
    pub fn gcd(&self) -> i64 {
        gcd(gcd(self.x.abs(), self.y.abs()), self.z.abs())
    }

    /// The 48 images under signed coordinate permutations, sorted and deduplicated.
    pub fn cubic_orbit(&self) -> Vec<Momentum> {
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let c = [self.x, self.y, self.z];
        let mut out = Vec::with_capacity(48);
        for perm in PERMS {
            for signs in 0..8u8 {
                let s = |bit: u8| if signs & (1 << bit) != 0 { -1 } else { 1 };
                out.push(Momentum::new(s(0) * c[perm[0]], s(1) * c[perm[1]], s(2) * c[perm[2]]));
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Orbit representative: absolute values in ascending order.
    pub fn cubic_canonical(&self) -> Momentum {
        let mut c = [self.x.abs(), self.y.abs(), self.z.abs()];
        c.sort();
        Momentum::new(c[0], c[1], c[2])
    }
}

impl fmt::Display for Momentum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.x, self.y, self.z)
    }
}

impl Add for Momentum {
    type Output = Momentum;
    fn add(self, o: Momentum) -> Momentum {
        Momentum::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Momentum {
    type Output = Momentum;
    fn sub(self, o: Momentum) -> Momentum {
        Momentum::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Momentum {
    type Output = Momentum;
    fn neg(self) -> Momentum {
        Momentum::new(-self.x, -self.y, -self.z)
    }
}

pub(crate) fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.abs()
}

/// ⌈√n⌉ for n ≥ 0.
pub fn ceil_sqrt(n: i64) -> i64 {
    let mut r = (n as f64).sqrt() as i64;
    while r * r < n {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= n {
        r -= 1;
    }
    r
}

/// Sort key used for every k-sweep: |k|², then lexicographic.
pub fn shell_order(a: &Momentum, b: &Momentum) -> Ordering {
    a.norm2().cmp(&b.norm2()).then(a.cmp(b))
}

/// All nonzero k with |k|² ≤ cutoff², in shell order.
pub fn momenta_within(cutoff: i64) -> Vec<Momentum> {
    let r2 = cutoff * cutoff;
    let mut out = Vec::new();
    for x in -cutoff..=cutoff {
        for y in -cutoff..=cutoff {
            for z in -cutoff..=cutoff {
                let p = Momentum::new(x, y, z);
                let n = p.norm2();
                if n > 0 && n <= r2 {
                    out.push(p);
                }
            }
        }
    }
    out.sort_by(shell_order);
    out
}

#[derive(Clone, Debug)]
pub struct FermiBall {
    kf2: i64,
    points: Vec<Momentum>,
}

impl FermiBall {
    pub fn new(kf2: i64) -> Result<Self> {
        if kf2 < 1 {
            return Err(Error::InvalidFermiRadius(kf2));
        }
        let r = ceil_sqrt(kf2);
        let mut points = Vec::new();
        for x in -r..=r {
            for y in -r..=r {
                for z in -r..=r {
                    let p = Momentum::new(x, y, z);
                    if p.norm2() <= kf2 {
                        points.push(p);
                    }
                }
            }
        }
        Ok(FermiBall { kf2, points })
    }

    pub fn kf2(&self) -> i64 {
        self.kf2
    }

    pub fn kf(&self) -> f64 {
        (self.kf2 as f64).sqrt()
    }

    pub fn points(&self) -> &[Momentum] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, p: &Momentum) -> bool {
        p.norm2() <= self.kf2
    }
}

pub fn enumerate_fermi_ball(kf2: i64) -> Result<FermiBall> {
    FermiBall::new(kf2)
}

/// L_k = (B_F + k) \ B_F with 2λ_{k,p} = |p|² − |p−k|² stored as integers.
#[derive(Clone, Debug)]
pub struct Lune {
    k: Momentum,
    kf2: i64,
    points: Vec<Momentum>,
    twice_lambda: Vec<i64>,
}

impl Lune {
    /// Bounding-box scan over [−⌈k_F⌉−|k|∞, ⌈k_F⌉+|k|∞]³.
    pub fn new(kf2: i64, k: Momentum) -> Result<Self> {
        if kf2 < 1 {
            return Err(Error::InvalidFermiRadius(kf2));
        }
        if k.is_zero() {
            return Err(Error::ZeroMomentum);
        }
        let r = ceil_sqrt(kf2) + k.linf();
        let mut points = Vec::new();
        let mut twice_lambda = Vec::new();
        for x in -r..=r {
            for y in -r..=r {
                for z in -r..=r {
                    let p = Momentum::new(x, y, z);
                    let np = p.norm2();
                    let nq = (p - k).norm2();
                    if nq <= kf2 && kf2 < np {
                        points.push(p);
                        twice_lambda.push(np - nq);
                    }
                }
            }
        }
        Ok(Lune { k, kf2, points, twice_lambda })
    }

    /// Same set as [`Lune::new`], built by translating an existing ball.
    pub fn from_ball(ball: &FermiBall, k: Momentum) -> Result<Self> {
        if k.is_zero() {
            return Err(Error::ZeroMomentum);
        }
        let kf2 = ball.kf2();
        let k2 = k.norm2();
        let mut pairs: Vec<(Momentum, i64)> = ball
            .points()
            .iter()
            .filter_map(|q| {
                let p = *q + k;
                (p.norm2() > kf2).then(|| (p, 2 * k.dot(q) + k2))
            })
            .collect();
        // translation preserves lexicographic order, so this is already sorted
        debug_assert!(pairs.windows(2).all(|w| w[0].0 < w[1].0));
        let (points, twice_lambda) = pairs.drain(..).unzip();
        Ok(Lune { k, kf2, points, twice_lambda })
    }

    pub fn k(&self) -> Momentum {
        self.k
    }

    pub fn kf2(&self) -> i64 {
        self.kf2
    }

    pub fn kf(&self) -> f64 {
        (self.kf2 as f64).sqrt()
    }

    pub fn points(&self) -> &[Momentum] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn twice_lambdas(&self) -> &[i64] {
        &self.twice_lambda
    }

    pub fn lambda(&self, i: usize) -> f64 {
        self.twice_lambda[i] as f64 * 0.5
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.twice_lambda.iter().map(|&t| t as f64 * 0.5).collect()
    }

    pub fn index_of(&self, p: &Momentum) -> Option<usize> {
        self.points.binary_search(p).ok()
    }

    pub fn contains(&self, p: &Momentum) -> bool {
        let nq = (*p - self.k).norm2();
        nq <= self.kf2 && self.kf2 < p.norm2()
    }
}

pub fn enumerate_lune(kf2: i64, k: Momentum) -> Result<Lune> {
    Lune::new(kf2, k)
}

/// Values 2λ_{k,p} for p ∈ L_k without materializing the points.
pub fn lune_twice_lambdas(ball: &FermiBall, k: Momentum) -> Vec<i64> {
    let kf2 = ball.kf2();
    let k2 = k.norm2();
    ball.points()
        .iter()
        .filter(|q| (**q + k).norm2() > kf2)
        .map(|q| 2 * k.dot(q) + k2)
        .collect()
}

/// Points of a lune on the plane k·p = gcd(k)·m.
#[derive(Clone, Debug)]
pub struct LuneSlice {
    pub m: i64,
    pub gcd: i64,
    pub k_norm2: i64,
    pub points: Vec<Momentum>,
}

impl LuneSlice {
    /// Plane spacing gcd(k)/|k|.
    pub fn l(&self) -> f64 {
        self.gcd as f64 / (self.k_norm2 as f64).sqrt()
    }

    /// k̂·p on this slice.
    pub fn plane_value(&self) -> f64 {
        (self.gcd * self.m) as f64 / (self.k_norm2 as f64).sqrt()
    }

    /// λ shared by every point of the slice, |k|(lm − |k|/2).
    pub fn lambda(&self) -> f64 {
        (2 * self.gcd * self.m - self.k_norm2) as f64 * 0.5
    }
}

/// Smallest and largest admissible slice indices m*, M*.
pub fn slice_range(kf2: i64, k: Momentum) -> (i64, i64) {
    let g = k.gcd();
    let k2 = k.norm2();
    let m_lo = k2 / (2 * g) + 1;
    // largest M with g·M − |k|² ≤ |k|·k_F
    let fits = |m: i64| {
        let t = (g * m - k2) as i128;
        t <= 0 || t * t <= (k2 as i128) * (kf2 as i128)
    };
    let guess = ((k.norm() * (kf2 as f64).sqrt() + k2 as f64) / g as f64).floor() as i64;
    let mut m_hi = guess.max(m_lo - 1);
    while fits(m_hi + 1) {
        m_hi += 1;
    }
    while m_hi >= m_lo && !fits(m_hi) {
        m_hi -= 1;
    }
    (m_lo, m_hi)
}

/// Every slice index between m* and M*, in increasing m; empty slices included.
pub fn lune_slices(lune: &Lune) -> Vec<LuneSlice> {
    let k = lune.k();
    let g = k.gcd();
    let (m_lo, m_hi) = slice_range(lune.kf2(), k);
    let mut slices: Vec<LuneSlice> = (m_lo..=m_hi)
        .map(|m| LuneSlice { m, gcd: g, k_norm2: k.norm2(), points: Vec::new() })
        .collect();
    for p in lune.points() {
        let m = k.dot(p) / g;
        slices[(m - m_lo) as usize].points.push(*p);
    }
    slices
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceCountReport {
    pub m: i64,
    pub exact_count: usize,
    pub ellipse_area: f64,
    pub radii_ratio_bound: f64,
    pub curvature_bound: f64,
}

fn gram_det(v1: &Momentum, v2: &Momentum) -> i128 {
    let a = v1.norm2() as i128;
    let b = v2.norm2() as i128;
    let c = v1.dot(v2) as i128;
    a * b - c * c
}

fn generators_valid(k: &Momentum, v1: &Momentum, v2: &Momentum) -> bool {
    let g = k.gcd() as i128;
    v1.dot(k) == 0 && v2.dot(k) == 0 && gram_det(v1, v2) * g * g == k.norm2() as i128
}

/// Integer basis of {p : k·p = 0} with Gram determinant (|k|/gcd)².
///
/// Candidates are taken up to sign (first nonzero coordinate positive), ordered by norm and
/// then reverse-lexicographically; the first independent pair with the right covolume wins.
pub fn find_perp_generators(k: Momentum) -> Result<(Momentum, Momentum)> {
    if k.is_zero() {
        return Err(Error::ZeroMomentum);
    }
    let canonical = |v: &Momentum| {
        let c = [v.x, v.y, v.z];
        c.iter().find(|&&a| a != 0).is_some_and(|&a| a > 0)
    };
    let mut r = 1i64;
    loop {
        let mut cand = Vec::new();
        for x in -r..=r {
            for y in -r..=r {
                for z in -r..=r {
                    let v = Momentum::new(x, y, z);
                    if canonical(&v) && v.dot(&k) == 0 {
                        cand.push(v);
                    }
                }
            }
        }
        cand.sort_by(|a, b| a.norm2().cmp(&b.norm2()).then(b.cmp(a)));
        // only pairs within the fully covered ball |v| ≤ r are conclusive
        let covered = cand.iter().take_while(|v| v.norm2() <= r * r).count();
        for j in 1..covered {
            for i in 0..j {
                if generators_valid(&k, &cand[i], &cand[j]) {
                    return Ok((cand[i], cand[j]));
                }
            }
        }
        r += 1;
    }
}

/// Per-slice exact count against the annulus (or disc) area π(R₂² − R₁²)·l.
pub fn slice_ellipse_report(lune: &Lune, generators: (Momentum, Momentum)) -> Result<Vec<SliceCountReport>> {
    let k = lune.k();
    let (v1, v2) = generators;
    if v1.dot(&k) != 0 || v2.dot(&k) != 0 {
        return Err(Error::InvalidGenerators(format!("{v1} and {v2} must both be orthogonal to {k}")));
    }
    if !generators_valid(&k, &v1, &v2) {
        return Err(Error::InvalidGenerators(format!(
            "Gram determinant {} does not match (|k|/gcd)^2 = {}/{}",
            gram_det(&v1, &v2),
            k.norm2(),
            k.gcd() * k.gcd()
        )));
    }
    let kf2 = lune.kf2() as f64;
    let k2 = k.norm2() as f64;
    let n1 = v1.norm2() as f64;
    let n2 = v2.norm2() as f64;
    let c = v1.dot(&v2) as f64;
    let s = n1 + n2;
    let d = ((n1 - n2).powi(2) + 4.0 * c * c).sqrt();
    let ratio = ((s + d) / (s - d)).powf(1.5);
    Ok(lune_slices(lune)
        .into_iter()
        .map(|sl| {
            let l = sl.l();
            let t = (sl.gcd * sl.m) as f64;
            let r1_sq = kf2 - t * t / k2;
            let r2_sq = kf2 - (t - k2).powi(2) / k2;
            let area = if r2_sq <= 0.0 {
                0.0
            } else if r1_sq > 0.0 {
                std::f64::consts::PI * (r2_sq - r1_sq) * l
            } else {
                std::f64::consts::PI * r2_sq * l
            };
            let curvature = if r2_sq > 0.0 {
                let r2 = r2_sq.sqrt();
                let a = std::f64::consts::SQRT_2 * r2 / (s - d).sqrt();
                let b = std::f64::consts::SQRT_2 * r2 / (s + d).sqrt();
                a * a / b
            } else {
                0.0
            };
            SliceCountReport {
                m: sl.m,
                exact_count: sl.points.len(),
                ellipse_area: area,
                radii_ratio_bound: ratio,
                curvature_bound: curvature,
            }
        })
        .collect())
}
