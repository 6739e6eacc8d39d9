//! Exact sparse fermionic Fock space over a finite set of plane-wave modes.
//!
//! A state maps occupation bitmasks to real amplitudes. Every momentum of the
//! Fermi ball is always part of the universe, so a momentum missing from it is an
//! empty outside mode: annihilating it gives zero, creating it is a closure error.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::{FermiBall, Lune, Momentum};
use crate::linalg::SymOp;
use crate::onebody::{build_kernel_bundle, KernelBundle};
use crate::system::FermiSystem;

pub const PRUNE: f64 = 1e-14;
pub const MAX_MODES: usize = 64;

#[derive(Clone, Debug)]
pub struct ModeUniverse {
    kf2: i64,
    s: usize,
    modes: Vec<(Momentum, usize)>,
    inside: Vec<bool>,
    index: BTreeMap<(Momentum, usize), usize>,
}

impl ModeUniverse {
    /// B_F together with `extra`, ordered by momentum and then spin.
    pub fn new<I: IntoIterator<Item = Momentum>>(kf2: i64, s: usize, extra: I) -> Result<Self> {
        if s < 1 {
            return Err(Error::InvalidSystem("spin count s must be at least 1".into()));
        }
        let ball = FermiBall::new(kf2)?;
        let momenta: BTreeSet<Momentum> = ball.points().iter().copied().chain(extra).collect();
        let n = momenta.len() * s;
        if n > MAX_MODES {
            return Err(Error::UniverseTooLarge(n));
        }
        let mut modes = Vec::with_capacity(n);
        let mut inside = Vec::with_capacity(n);
        let mut index = BTreeMap::new();
        for p in momenta {
            for spin in 0..s {
                index.insert((p, spin), modes.len());
                modes.push((p, spin));
                inside.push(p.norm2() <= kf2);
            }
        }
        Ok(ModeUniverse { kf2, s, modes, inside, index })
    }

    /// B_F ∪ L_k.
    pub fn for_lune(kf2: i64, s: usize, k: Momentum) -> Result<Self> {
        let lune = Lune::new(kf2, k)?;
        Self::new(kf2, s, lune.points().iter().copied())
    }

    /// B_F ∪ L_k ∪ L_l for every l = p − q + k ≠ 0 with p, q ∈ L_k: the modes reached by
    /// H_eff acting on b_k*(φ)^M ψ_F.
    pub fn plasmon_closure(kf2: i64, s: usize, k: Momentum) -> Result<Self> {
        let lune = Lune::new(kf2, k)?;
        let mut extra: BTreeSet<Momentum> = lune.points().iter().copied().collect();
        for l in plasmon_momenta(&lune) {
            extra.extend(Lune::new(kf2, l)?.points().iter().copied());
        }
        Self::new(kf2, s, extra)
    }

    pub fn kf2(&self) -> i64 {
        self.kf2
    }

    pub fn spins(&self) -> usize {
        self.s
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[(Momentum, usize)] {
        &self.modes
    }

    pub fn is_inside(&self, i: usize) -> bool {
        self.inside[i]
    }

    pub fn contains(&self, p: &Momentum) -> bool {
        self.index.contains_key(&(*p, 0))
    }

    pub fn find(&self, p: Momentum, spin: usize) -> Option<usize> {
        self.index.get(&(p, spin)).copied()
    }

    pub fn index_of(&self, p: Momentum, spin: usize) -> Result<usize> {
        self.find(p, spin).ok_or(Error::UnknownMode { p, spin })
    }

    /// N = number of inside modes.
    pub fn particle_number(&self) -> usize {
        self.inside.iter().filter(|b| **b).count()
    }

    pub fn fermi_mask(&self) -> u64 {
        self.inside.iter().enumerate().filter(|(_, b)| **b).fold(0, |m, (i, _)| m | (1 << i))
    }

    fn check_system(&self, system: &FermiSystem) -> Result<()> {
        if system.kf2 != self.kf2 || system.s as usize != self.s {
            return Err(Error::InvalidSystem(format!(
                "universe built for kF2 = {}, s = {} but the system has kF2 = {}, s = {}",
                self.kf2, self.s, system.kf2, system.s
            )));
        }
        Ok(())
    }
}

fn plasmon_momenta(lune: &Lune) -> BTreeSet<Momentum> {
    let k = lune.k();
    let mut ls = BTreeSet::new();
    for p in lune.points() {
        for q in lune.points() {
            let l = *p - *q + k;
            if !l.is_zero() {
                ls.insert(l);
            }
        }
    }
    ls
}

/// Label of b_{k,p}; requires p ∈ L_k.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExcitationIndex {
    pub k: Momentum,
    pub p: Momentum,
}

impl ExcitationIndex {
    pub fn new(kf2: i64, k: Momentum, p: Momentum) -> Result<Self> {
        if k.is_zero() {
            return Err(Error::ZeroMomentum);
        }
        if (p - k).norm2() <= kf2 && kf2 < p.norm2() {
            Ok(ExcitationIndex { k, p })
        } else {
            Err(Error::NotInLune { k, p })
        }
    }

    /// Every (k, p) with 0 < |k|² ≤ `max_k2` and p ∈ L_k.
    pub fn all(kf2: i64, max_k2: i64) -> Result<Vec<Self>> {
        let r = crate::lattice::ceil_sqrt(max_k2);
        let mut out = Vec::new();
        for k in crate::lattice::momenta_within(r) {
            if k.is_zero() || k.norm2() > max_k2 {
                continue;
            }
            for p in Lune::new(kf2, k)?.points() {
                out.push(ExcitationIndex { k, p: *p });
            }
        }
        out.sort();
        Ok(out)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseState {
    amps: BTreeMap<u64, f64>,
}

impl SparseState {
    pub fn zero() -> Self {
        SparseState::default()
    }

    pub fn basis(mask: u64) -> Self {
        let mut amps = BTreeMap::new();
        amps.insert(mask, 1.0);
        SparseState { amps }
    }

    pub fn from_pairs<I: IntoIterator<Item = (u64, f64)>>(pairs: I) -> Self {
        let mut st = SparseState::zero();
        for (m, a) in pairs {
            st.add_to(m, a);
        }
        st.pruned()
    }

    pub fn amplitude(&self, mask: u64) -> f64 {
        self.amps.get(&mask).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.amps.iter().map(|(m, a)| (*m, *a))
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_zero(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    pub fn norm2(&self) -> f64 {
        self.amps.values().fold(0.0, |acc, a| acc + a * a)
    }

    pub fn norm(&self) -> f64 {
        self.norm2().sqrt()
    }

    pub fn dot(&self, o: &SparseState) -> f64 {
        let (small, large) = if self.len() <= o.len() { (self, o) } else { (o, self) };
        small.amps.iter().fold(0.0, |acc, (m, a)| acc + a * large.amplitude(*m))
    }

    pub fn max_abs(&self) -> f64 {
        self.amps.values().fold(0.0, |m, a| m.max(a.abs()))
    }

    pub fn scaled(&self, c: f64) -> SparseState {
        SparseState { amps: self.amps.iter().map(|(m, a)| (*m, c * a)).collect() }.pruned()
    }

    /// self += c·o.
    pub fn axpy(&mut self, c: f64, o: &SparseState) {
        for (m, a) in &o.amps {
            self.add_to(*m, c * a);
        }
        self.prune();
    }

    pub fn sub(&self, o: &SparseState) -> SparseState {
        let mut out = self.clone();
        out.axpy(-1.0, o);
        out
    }

    pub fn max_abs_diff(&self, o: &SparseState) -> f64 {
        let keys: BTreeSet<u64> = self.amps.keys().chain(o.amps.keys()).copied().collect();
        keys.into_iter().map(|m| (self.amplitude(m) - o.amplitude(m)).abs()).fold(0.0, f64::max)
    }

    pub fn normalized(&self) -> SparseState {
        let n = self.norm();
        if n == 0.0 {
            self.clone()
        } else {
            self.scaled(1.0 / n)
        }
    }

    fn add_to(&mut self, mask: u64, a: f64) {
        if a != 0.0 {
            *self.amps.entry(mask).or_insert(0.0) += a;
        }
    }

    fn prune(&mut self) {
        self.amps.retain(|_, a| a.abs() >= PRUNE);
    }

    fn pruned(mut self) -> Self {
        self.prune();
        self
    }
}

fn parity_below(mask: u64, i: usize) -> f64 {
    if (mask & ((1u64 << i) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn c_idx(st: &SparseState, i: usize) -> SparseState {
    let bit = 1u64 << i;
    let mut out = SparseState::zero();
    for (m, a) in st.iter() {
        if m & bit != 0 {
            out.add_to(m ^ bit, parity_below(m, i) * a);
        }
    }
    out.pruned()
}

fn cdag_idx(st: &SparseState, i: usize) -> SparseState {
    let bit = 1u64 << i;
    let mut out = SparseState::zero();
    for (m, a) in st.iter() {
        if m & bit == 0 {
            out.add_to(m | bit, parity_below(m, i) * a);
        }
    }
    out.pruned()
}

/// c†_a c_b.
fn hop(st: &SparseState, a: usize, b: usize) -> SparseState {
    let (ba, bb) = (1u64 << a, 1u64 << b);
    let mut out = SparseState::zero();
    for (m, amp) in st.iter() {
        if m & bb == 0 {
            continue;
        }
        let m1 = m ^ bb;
        if m1 & ba != 0 {
            continue;
        }
        out.add_to(m1 | ba, parity_below(m, b) * parity_below(m1, a) * amp);
    }
    out.pruned()
}

pub fn apply_c(u: &ModeUniverse, st: &SparseState, p: Momentum, spin: usize) -> Result<SparseState> {
    Ok(c_idx(st, u.index_of(p, spin)?))
}

pub fn apply_cdag(u: &ModeUniverse, st: &SparseState, p: Momentum, spin: usize) -> Result<SparseState> {
    Ok(cdag_idx(st, u.index_of(p, spin)?))
}

pub fn fermi_state(u: &ModeUniverse) -> SparseState {
    SparseState::basis(u.fermi_mask())
}

fn check_particle_number(u: &ModeUniverse, st: &SparseState) -> Result<()> {
    let n = u.particle_number();
    match st.iter().find(|(m, _)| m.count_ones() as usize != n) {
        Some((m, _)) => Err(Error::ParticleNumber { expected: n, found: m.count_ones() as usize }),
        None => Ok(()),
    }
}

fn inv_sqrt_s(u: &ModeUniverse) -> f64 {
    1.0 / (u.s as f64).sqrt()
}

/// b_{k,p} with p possibly absent from the universe (then the result is zero).
fn b_lenient(u: &ModeUniverse, st: &SparseState, k: Momentum, p: Momentum) -> Result<SparseState> {
    let mut out = SparseState::zero();
    if !u.contains(&p) {
        return Ok(out);
    }
    for spin in 0..u.s {
        let from = u.index_of(p, spin)?;
        let to = u.index_of(p - k, spin)?;
        out.axpy(1.0, &hop(st, to, from));
    }
    Ok(out.scaled(inv_sqrt_s(u)))
}

fn bdag_raw(u: &ModeUniverse, st: &SparseState, k: Momentum, p: Momentum) -> Result<SparseState> {
    let mut out = SparseState::zero();
    for spin in 0..u.s {
        let to = u.find(p, spin).ok_or_else(|| Error::Closure(format!("mode {p} needed by b*_{k} is missing")))?;
        let from = u.index_of(p - k, spin)?;
        out.axpy(1.0, &hop(st, to, from));
    }
    Ok(out.scaled(inv_sqrt_s(u)))
}

/// b_{k,p} = s^{-1/2} Σ_σ c*_{p−k,σ} c_{p,σ}.
pub fn apply_b(u: &ModeUniverse, st: &SparseState, idx: &ExcitationIndex) -> Result<SparseState> {
    let idx = ExcitationIndex::new(u.kf2, idx.k, idx.p)?;
    u.index_of(idx.p, 0)?;
    b_lenient(u, st, idx.k, idx.p)
}

/// b*_{k,p} = s^{-1/2} Σ_σ c*_{p,σ} c_{p−k,σ}.
pub fn apply_bdag(u: &ModeUniverse, st: &SparseState, idx: &ExcitationIndex) -> Result<SparseState> {
    let idx = ExcitationIndex::new(u.kf2, idx.k, idx.p)?;
    u.index_of(idx.p, 0)?;
    bdag_raw(u, st, idx.k, idx.p)
}

/// b_k(φ) = Σ_p φ_p b_{k,p} for real φ over `points` ⊂ L_k.
pub fn apply_b_vec(u: &ModeUniverse, st: &SparseState, k: Momentum, points: &[Momentum], phi: &[f64]) -> Result<SparseState> {
    let mut out = SparseState::zero();
    for (p, c) in points.iter().zip(phi) {
        if *c != 0.0 {
            out.axpy(*c, &b_lenient(u, st, k, *p)?);
        }
    }
    Ok(out)
}

/// b*_k(φ) = Σ_p φ_p b*_{k,p}.
pub fn apply_bdag_vec(u: &ModeUniverse, st: &SparseState, k: Momentum, points: &[Momentum], phi: &[f64]) -> Result<SparseState> {
    let mut out = SparseState::zero();
    for (p, c) in points.iter().zip(phi) {
        if *c != 0.0 {
            out.axpy(*c, &bdag_raw(u, st, k, *p)?);
        }
    }
    Ok(out)
}

/// ε_{k,l}(p;q) = −s⁻¹ Σ_σ (δ_{p,q} c_{q−l,σ}c*_{p−k,σ} + δ_{p−k,q−l} c*_{q,σ}c_{p,σ}).
pub fn apply_epsilon(
    u: &ModeUniverse,
    st: &SparseState,
    k: Momentum,
    l: Momentum,
    p: Momentum,
    q: Momentum,
) -> Result<SparseState> {
    let mut out = SparseState::zero();
    for spin in 0..u.s {
        if p == q {
            let a = u.index_of(p - k, spin)?;
            let b = u.index_of(q - l, spin)?;
            out.axpy(1.0, &c_idx(&cdag_idx(st, a), b));
        }
        if p - k == q - l {
            if let Some(from) = u.find(p, spin) {
                let to = u.index_of(q, spin)?;
                out.axpy(1.0, &hop(st, to, from));
            }
        }
    }
    Ok(out.scaled(-1.0 / u.s as f64))
}

/// H′_kin = Σ_{p∉B_F}|p|² n_p − Σ_{q∈B_F}|q|²(1 − n_q).
pub fn apply_hkin_prime(u: &ModeUniverse, st: &SparseState) -> Result<SparseState> {
    check_particle_number(u, st)?;
    let w: Vec<f64> = u.modes.iter().map(|(p, _)| p.norm2() as f64).collect();
    let mut out = SparseState::zero();
    for (m, a) in st.iter() {
        let mut e = 0.0;
        for (i, (wi, inside)) in w.iter().zip(&u.inside).enumerate() {
            let occ = m >> i & 1 == 1;
            if *inside && !occ {
                e -= wi;
            } else if !*inside && occ {
                e += wi;
            }
        }
        out.add_to(m, e * a);
    }
    Ok(out.pruned())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeForm {
    /// Σ_{p∉B_F} n_p.
    Particles,
    /// Σ_{q∈B_F} (1 − n_q).
    Holes,
}

pub fn apply_ne(u: &ModeUniverse, st: &SparseState, form: NeForm) -> Result<SparseState> {
    check_particle_number(u, st)?;
    let mut out = SparseState::zero();
    for (m, a) in st.iter() {
        let count = (0..u.len())
            .filter(|&i| {
                let occ = m >> i & 1 == 1;
                match form {
                    NeForm::Particles => !u.inside[i] && occ,
                    NeForm::Holes => u.inside[i] && !occ,
                }
            })
            .count();
        out.add_to(m, count as f64 * a);
    }
    Ok(out.pruned())
}

/// The l ≠ 0 for which some b_{l,q} acts nontrivially on the state.
pub fn contributing_momenta(u: &ModeUniverse, st: &SparseState) -> BTreeSet<Momentum> {
    let mut ls = BTreeSet::new();
    for (m, _) in st.iter() {
        for i in (0..u.len()).filter(|&i| !u.inside[i] && m >> i & 1 == 1) {
            for j in (0..u.len()).filter(|&j| u.inside[j] && m >> j & 1 == 0) {
                if u.modes[i].1 == u.modes[j].1 {
                    ls.insert(u.modes[i].0 - u.modes[j].0);
                }
            }
        }
    }
    ls
}

/// H′_kin + 2 Σ_l Σ_{p,q∈L_l} ⟨e_p,(Ẽ_l − h_l)e_q⟩ b*_{l,p} b_{l,q}.
pub fn apply_heff(u: &ModeUniverse, st: &SparseState, bundles: &[KernelBundle]) -> Result<SparseState> {
    let map: BTreeMap<Momentum, &KernelBundle> = bundles.iter().map(|b| (b.k, b)).collect();
    let mut out = apply_hkin_prime(u, st)?;
    for l in contributing_momenta(u, st) {
        let b = map.get(&l).ok_or(Error::MissingBundle(l))?;
        let d = b.etilde.sub(&b.h);
        for (j, q) in b.points.iter().enumerate() {
            let t = b_lenient(u, st, l, *q)?;
            if t.is_zero() {
                continue;
            }
            let col: Vec<f64> = (0..b.dim()).map(|i| 2.0 * d.get(i, j)).collect();
            out.axpy(1.0, &apply_bdag_vec(u, &t, l, &b.points, &col)?);
        }
    }
    Ok(out)
}

fn check_lune_in(u: &ModeUniverse, lune: &Lune) -> Result<()> {
    match lune.points().iter().find(|p| !u.contains(p)) {
        Some(p) => Err(Error::Closure(format!("{p} in L_{} is missing from the universe", lune.k()))),
        None => Ok(()),
    }
}

/// Ψ_0, …, Ψ_M with Ψ_j = b*_k(φ)^j ψ_F.
pub fn psi_sequence(u: &ModeUniverse, k: Momentum, phi: &DVector<f64>, m: usize) -> Result<Vec<SparseState>> {
    let lune = Lune::new(u.kf2, k)?;
    if phi.len() != lune.len() {
        return Err(Error::Dimension { expected: lune.len(), found: phi.len() });
    }
    check_lune_in(u, &lune)?;
    let mut out = vec![fermi_state(u)];
    for j in 0..m {
        let next = apply_bdag_vec(u, &out[j], k, lune.points(), phi.as_slice())?;
        out.push(next);
    }
    Ok(out)
}

pub fn psi_m(u: &ModeUniverse, k: Momentum, phi: &DVector<f64>, m: usize) -> Result<SparseState> {
    Ok(psi_sequence(u, k, phi, m)?.pop().expect("sequence holds Ψ_0"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormSandwichRow {
    pub m: usize,
    pub norm2: f64,
    /// M‖Ψ_{M−1}‖².
    pub upper: f64,
    /// M(1 − (M−1)‖φ‖²_∞/s)‖Ψ_{M−1}‖².
    pub lower: f64,
    pub holds: bool,
}

pub fn norm_sandwich(u: &ModeUniverse, k: Momentum, phi: &DVector<f64>, m_max: usize) -> Result<Vec<NormSandwichRow>> {
    let seq = psi_sequence(u, k, phi, m_max)?;
    let phi_inf2 = phi.amax().powi(2);
    let s = u.s as f64;
    Ok((1..=m_max)
        .map(|m| {
            let prev = seq[m - 1].norm2();
            let norm2 = seq[m].norm2();
            let mf = m as f64;
            let upper = mf * prev;
            let lower = mf * (1.0 - (mf - 1.0) / s * phi_inf2) * prev;
            let slack = 1e-12 * upper.max(1.0);
            NormSandwichRow { m, norm2, upper, lower, holds: norm2 <= upper + slack && norm2 >= lower - slack }
        })
        .collect())
}

/// Largest amplitude deviation in the identities for c_{p,σ}Ψ_M (p ∉ B_F) and c*_{q,σ}Ψ_M (q ∈ B_F).
pub fn psi_annihilation_check(u: &ModeUniverse, k: Momentum, phi: &DVector<f64>, m_max: usize) -> Result<f64> {
    let lune = Lune::new(u.kf2, k)?;
    let seq = psi_sequence(u, k, phi, m_max)?;
    let c = inv_sqrt_s(u);
    let mut worst: f64 = 0.0;
    for m in 1..=m_max {
        let mf = m as f64;
        for (i, &(p, spin)) in u.modes.iter().enumerate() {
            let (lhs, rhs) = if u.inside[i] {
                let lhs = cdag_idx(&seq[m], i);
                let rhs = match lune.index_of(&(p + k)) {
                    Some(j) => cdag_idx(&seq[m - 1], u.index_of(p + k, spin)?).scaled(-mf * c * phi[j]),
                    None => SparseState::zero(),
                };
                (lhs, rhs)
            } else {
                let lhs = c_idx(&seq[m], i);
                let rhs = match lune.index_of(&p) {
                    Some(j) => c_idx(&seq[m - 1], u.index_of(p - k, spin)?).scaled(mf * c * phi[j]),
                    None => SparseState::zero(),
                };
                (lhs, rhs)
            };
            worst = worst.max(lhs.max_abs_diff(&rhs));
        }
    }
    Ok(worst)
}

/// Normalized top eigenvector of Ẽ_k (sign fixed by a positive component sum) and ε_k = 2·max eig.
pub fn plasmon_vector(bundle: &KernelBundle) -> (f64, DVector<f64>) {
    let spec = bundle.etilde.eigen();
    let top = spec.values.imax();
    let mut phi = spec.vectors.column(top).into_owned();
    if phi.sum() < 0.0 {
        phi = -phi;
    }
    let phi = phi.normalize();
    (2.0 * spec.values[top], phi)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualRecord {
    pub k: Momentum,
    pub m: usize,
    pub epsilon: f64,
    /// ‖(H_eff − Mε_k)Ψ_M‖.
    pub lhs: f64,
    /// (2M(M−1)/s^{3/2})‖ℰΨ_{M−2}‖.
    pub rhs: f64,
    pub psi_norm: f64,
    pub phi_inf: f64,
    /// Normalized-residual bound, only when M < ‖φ‖_∞⁻²; the l-sum is truncated at the
    /// system's default cutoff, which can only lower it.
    pub bound: Option<f64>,
    pub bound_holds: bool,
}

impl ResidualRecord {
    pub fn relative_gap(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.lhs.max(1e-12)
    }
}

/// Σ_{0<|l|≤cutoff} ‖Ẽ_l − h_l‖²_HS.
pub fn hs_sum(system: &FermiSystem, cutoff: i64) -> Result<f64> {
    let mut total = 0.0;
    for l in crate::lattice::momenta_within(cutoff) {
        if l.is_zero() || l.norm2() > cutoff * cutoff {
            continue;
        }
        let b = build_kernel_bundle(system, l)?;
        total += b.etilde.sub(&b.h).frobenius().powi(2);
    }
    Ok(total)
}

pub fn residual_identity_check(u: &ModeUniverse, system: &FermiSystem, k: Momentum, m: usize) -> Result<ResidualRecord> {
    u.check_system(system)?;
    if m == 0 {
        return Err(Error::InvalidSystem("the residual identity needs M >= 1".into()));
    }
    let lune = Lune::new(system.kf2, k)?;
    let bk = build_kernel_bundle(system, k)?;
    let (epsilon, phi) = plasmon_vector(&bk);
    let mut bundles = vec![bk];
    for l in plasmon_momenta(&lune) {
        if l != k {
            bundles.push(build_kernel_bundle(system, l)?);
        }
    }
    let map: BTreeMap<Momentum, &KernelBundle> = bundles.iter().map(|b| (b.k, b)).collect();

    let seq = psi_sequence(u, k, &phi, m)?;
    let psi = &seq[m];
    let mut resid = apply_heff(u, psi, &bundles)?;
    resid.axpy(-(m as f64) * epsilon, psi);
    let lhs = resid.norm();

    let rhs = if m < 2 {
        0.0
    } else {
        let base = &seq[m - 2];
        let mut e = SparseState::zero();
        for (ip, p) in lune.points().iter().enumerate() {
            for (iq, q) in lune.points().iter().enumerate() {
                let l = *p - *q + k;
                if l.is_zero() {
                    continue;
                }
                let bl = map.get(&l).ok_or(Error::MissingBundle(l))?;
                let Some(jp) = bl.index_of(p) else { continue };
                let mut t = SparseState::zero();
                for spin in 0..u.s {
                    t.axpy(1.0, &hop(base, u.index_of(*q, spin)?, u.index_of(*p - k, spin)?));
                }
                if t.is_zero() {
                    continue;
                }
                let d = bl.etilde.sub(&bl.h);
                let col: Vec<f64> = (0..bl.dim()).map(|i| d.get(i, jp)).collect();
                e.axpy(phi[ip] * phi[iq], &apply_bdag_vec(u, &t, l, &bl.points, &col)?);
            }
        }
        let mf = m as f64;
        2.0 * mf * (mf - 1.0) / (u.s as f64).powf(1.5) * e.norm()
    };

    let psi_norm = psi.norm();
    let phi_inf = phi.amax();
    let inv = phi_inf.powi(-2);
    let bound = if (m as f64) < inv {
        let s = system.s as f64;
        let sum = hs_sum(system, system.default_cutoff())?;
        Some(2.0 / (inv - m as f64) * (sum / (s * s)).sqrt() * (m as f64).powf(2.5))
    } else {
        None
    };
    let bound_holds = bound.map_or(true, |b| lhs / psi_norm <= b * (1.0 + 1e-12));
    Ok(ResidualRecord { k, m, epsilon, lhs, rhs, psi_norm, phi_inf, bound, bound_holds })
}

/// The l whose exchange terms with L_k can be nonzero: L_l meets L_k ∪ (−L_k).
pub fn exchange_partners(kf2: i64, k: Momentum) -> Result<BTreeSet<Momentum>> {
    let lune = Lune::new(kf2, k)?;
    let ball = FermiBall::new(kf2)?;
    let mut ls = BTreeSet::new();
    for p in lune.points() {
        for h in ball.points() {
            for l in [*p - *h, -*p - *h] {
                if !l.is_zero() {
                    ls.insert(l);
                }
            }
        }
    }
    Ok(ls)
}

/// Kernel bundles for every l used by [`exchange_vacuum_check`].
pub fn exchange_kernels(system: &FermiSystem, k: Momentum) -> Result<Vec<KernelBundle>> {
    let lune = Lune::new(system.kf2, k)?;
    let mut ls = exchange_partners(system.kf2, k)?;
    for p in lune.points() {
        for q in lune.points() {
            ls.insert(*p + *q - k);
        }
    }
    ls.into_iter().map(|l| build_kernel_bundle(system, l)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExchangeVacuumRecord {
    pub direct: f64,
    pub closed_form: f64,
}

impl ExchangeVacuumRecord {
    pub fn relative_gap(&self) -> f64 {
        (self.direct - self.closed_form).abs() / self.direct.abs().max(self.closed_form.abs()).max(1e-300)
    }
}

/// ⟨ψ_F, ℰ²_k(B)ψ_F⟩ two ways: the nested anticommutators applied to ψ_F in a universe
/// per partner l, and −(1/s)Σ_{p,q∈L_k}⟨e_p,Be_q⟩⟨e_q,K_{p+q−k}e_p⟩.
pub fn exchange_vacuum_check(
    system: &FermiSystem,
    k: Momentum,
    b: &SymOp,
    kernels: &[KernelBundle],
) -> Result<ExchangeVacuumRecord> {
    let s = system.s as usize;
    let lune = Lune::new(system.kf2, k)?;
    if b.dim() != lune.len() {
        return Err(Error::Dimension { expected: lune.len(), found: b.dim() });
    }
    let map: BTreeMap<Momentum, &KernelBundle> = kernels.iter().map(|kb| (kb.k, kb)).collect();
    let lk = lune.points();

    let mut direct = 0.0;
    for l in exchange_partners(system.kf2, k)? {
        let kl = map.get(&l).ok_or(Error::MissingBundle(l))?;
        let ll = &kl.points;
        let extra = lk.iter().chain(ll.iter()).flat_map(|p| [*p, -*p]);
        let u = ModeUniverse::new(system.kf2, s, extra)?;
        let psi_f = fermi_state(&u);
        let fm = u.fermi_mask();
        for ip in 0..lk.len() {
            let bcol: Vec<f64> = (0..lk.len()).map(|i| b.get(i, ip)).collect();
            let bop = |st: &SparseState| apply_b_vec(&u, st, k, lk, &bcol);
            for (iq, q) in ll.iter().enumerate() {
                let kcol: Vec<f64> = (0..ll.len()).map(|i| kl.kernel.get(i, iq)).collect();
                let bdag = |st: &SparseState| apply_bdag_vec(&u, st, l, ll, &kcol);
                let eps = |st: &SparseState| apply_epsilon(&u, st, -k, -l, -lk[ip], -*q);
                // {b, {ε, b*}} = bεb* + bb*ε + εb*b + b*εb
                let mut acc = bop(&eps(&bdag(&psi_f)?)?)?;
                acc.axpy(1.0, &bop(&bdag(&eps(&psi_f)?)?)?);
                acc.axpy(1.0, &eps(&bdag(&bop(&psi_f)?)?)?);
                acc.axpy(1.0, &bdag(&eps(&bop(&psi_f)?)?)?);
                direct += 0.5 * acc.amplitude(fm);
            }
        }
    }

    let mut closed = 0.0;
    for (ip, p) in lk.iter().enumerate() {
        for (iq, q) in lk.iter().enumerate() {
            let l = *p + *q - k;
            let kl = map.get(&l).ok_or(Error::MissingBundle(l))?;
            let (a, c) = match (kl.index_of(q), kl.index_of(p)) {
                (Some(a), Some(c)) => (a, c),
                _ => return Err(Error::Closure(format!("{p} or {q} missing from L_{l}"))),
            };
            closed += b.get(ip, iq) * kl.kernel.get(a, c);
        }
    }
    let closed_form = -closed / system.s as f64;
    Ok(ExchangeVacuumRecord { direct, closed_form })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssemblyRecord {
    pub terms: usize,
    /// Σ_k 2⟨ψ_F, ℰ²_k(∫B_k)ψ_F⟩ from the Fock-space path.
    pub direct: f64,
    /// The same sum from the one-body double sum.
    pub closed_form: f64,
}

/// Exchange constant assembled over 0 < |k| ≤ cutoff with B = ∫₀¹B_k(t)dt.
pub fn exchange_assembly_check(system: &FermiSystem, cutoff: i64) -> Result<AssemblyRecord> {
    use rayon::prelude::*;
    let ks: Vec<Momentum> = crate::lattice::momenta_within(cutoff)
        .into_iter()
        .filter(|k| !k.is_zero() && k.norm2() <= cutoff * cutoff)
        .collect();
    let parts: Vec<Result<ExchangeVacuumRecord>> = ks
        .par_iter()
        .map(|k| {
            let bk = build_kernel_bundle(system, *k)?;
            let kernels = exchange_kernels(system, *k)?;
            exchange_vacuum_check(system, *k, &bk.integral_b(), &kernels)
        })
        .collect();
    let mut direct = 0.0;
    let mut closed_form = 0.0;
    for r in parts {
        let r = r?;
        direct += 2.0 * r.direct;
        closed_form += 2.0 * r.closed_form;
    }
    Ok(AssemblyRecord { terms: ks.len(), direct, closed_form })
}

/// Normalized state on `configs` random N-particle configurations.
pub fn random_state<R: Rng>(u: &ModeUniverse, rng: &mut R, configs: usize) -> SparseState {
    let n = u.particle_number();
    let mut st = SparseState::zero();
    for _ in 0..configs {
        let mask = sample(rng, u.len(), n).into_iter().fold(0u64, |m, i| m | (1 << i));
        st.add_to(mask, rng.gen_range(-1.0..1.0));
    }
    st.pruned().normalized()
}

/// Worst deviation in {c_i, c*_j} = δ_ij and {c_i, c_j} = 0 over every mode pair.
pub fn car_check(u: &ModeUniverse, states: &[SparseState]) -> f64 {
    let mut worst: f64 = 0.0;
    for st in states {
        for i in 0..u.len() {
            for j in 0..u.len() {
                let mut ac = c_idx(&cdag_idx(st, j), i);
                ac.axpy(1.0, &cdag_idx(&c_idx(st, i), j));
                if i == j {
                    ac.axpy(-1.0, st);
                }
                worst = worst.max(ac.max_abs());
                let mut cc = c_idx(&c_idx(st, j), i);
                cc.axpy(1.0, &c_idx(&c_idx(st, i), j));
                worst = worst.max(cc.max_abs());
            }
        }
    }
    worst
}

/// Worst deviation in [b_{k,p}, b*_{l,q}] = δδ + ε_{k,l}(p;q) and [b,b] = 0 = [b*,b*] over all
/// pairs of excitation indices with |k|², |l|² ≤ `max_k2`, each on a universe of just the modes
/// involved.
pub fn quasi_bosonic_check<R: Rng>(kf2: i64, s: usize, max_k2: i64, per_pair: usize, rng: &mut R) -> Result<f64> {
    let idx = ExcitationIndex::all(kf2, max_k2)?;
    let mut worst: f64 = 0.0;
    for a in &idx {
        for b in &idx {
            let u = ModeUniverse::new(kf2, s, [a.p, b.p])?;
            for _ in 0..per_pair {
                let st = random_state(&u, rng, 6);
                let lhs = {
                    let mut x = apply_b(&u, &apply_bdag(&u, &st, b)?, a)?;
                    x.axpy(-1.0, &apply_bdag(&u, &apply_b(&u, &st, a)?, b)?);
                    x
                };
                let mut rhs = apply_epsilon(&u, &st, a.k, b.k, a.p, b.p)?;
                if a == b {
                    rhs.axpy(1.0, &st);
                }
                worst = worst.max(lhs.max_abs_diff(&rhs));
                let mut bb = apply_b(&u, &apply_b(&u, &st, b)?, a)?;
                bb.axpy(-1.0, &apply_b(&u, &apply_b(&u, &st, a)?, b)?);
                worst = worst.max(bb.max_abs());
                let mut dd = apply_bdag(&u, &apply_bdag(&u, &st, b)?, a)?;
                dd.axpy(-1.0, &apply_bdag(&u, &apply_bdag(&u, &st, a)?, b)?);
                worst = worst.max(dd.max_abs());
            }
        }
    }
    Ok(worst)
}

/// Worst deviation in [H′_kin, b*_{k,p}] = (|p|² − |p−k|²) b*_{k,p}.
pub fn kinetic_commutator_check<R: Rng>(kf2: i64, s: usize, max_k2: i64, per_index: usize, rng: &mut R) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for a in ExcitationIndex::all(kf2, max_k2)? {
        let u = ModeUniverse::new(kf2, s, [a.p])?;
        let w = (a.p.norm2() - (a.p - a.k).norm2()) as f64;
        for _ in 0..per_index {
            let st = random_state(&u, rng, 6);
            let mut lhs = apply_hkin_prime(&u, &apply_bdag(&u, &st, &a)?)?;
            lhs.axpy(-1.0, &apply_bdag(&u, &apply_hkin_prime(&u, &st)?, &a)?);
            let rhs = apply_bdag(&u, &st, &a)?.scaled(w);
            worst = worst.max(lhs.max_abs_diff(&rhs));
        }
    }
    Ok(worst)
}

/// (worst gap between the two N_E forms, min of ⟨H′_kin⟩ − ⟨N_E⟩).
pub fn particle_hole_check(u: &ModeUniverse, states: &[SparseState]) -> Result<(f64, f64)> {
    let mut gap: f64 = 0.0;
    let mut margin = f64::INFINITY;
    for st in states {
        let a = apply_ne(u, st, NeForm::Particles)?;
        let b = apply_ne(u, st, NeForm::Holes)?;
        gap = gap.max(a.max_abs_diff(&b));
        margin = margin.min(st.dot(&apply_hkin_prime(u, st)?) - st.dot(&a));
    }
    Ok((gap, margin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::Potential;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const K: Momentum = Momentum::new(1, 0, 0);

    fn coulomb(kf2: i64, s: u32) -> FermiSystem {
        FermiSystem::new(kf2, s, Potential::Coulomb { g: 4.0 * PI }, false).unwrap()
    }

    #[test]
    fn fermi_state_shape() {
        let u = ModeUniverse::for_lune(1, 1, K).unwrap();
        assert_eq!(u.len(), 12);
        let f = fermi_state(&u);
        assert_eq!(f.len(), 1);
        assert_eq!(f.iter().next().unwrap().0.count_ones(), 7);
        for (i, &(p, spin)) in u.modes().iter().enumerate() {
            let z = if u.is_inside(i) { apply_cdag(&u, &f, p, spin) } else { apply_c(&u, &f, p, spin) };
            assert!(z.unwrap().is_zero());
        }
        assert!(apply_hkin_prime(&u, &f).unwrap().is_zero());
        assert!(apply_ne(&u, &f, NeForm::Holes).unwrap().is_zero());
    }

    #[test]
    fn unknown_mode_rejected() {
        let u = ModeUniverse::for_lune(1, 1, K).unwrap();
        let f = fermi_state(&u);
        assert!(matches!(apply_c(&u, &f, Momentum::new(5, 0, 0), 0), Err(Error::UnknownMode { .. })));
        let idx = ExcitationIndex::new(1, Momentum::new(0, 0, 2), Momentum::new(0, 0, 2)).unwrap();
        assert!(apply_bdag(&u, &f, &idx).is_err());
    }

    #[test]
    fn car_on_random_states() {
        let u = ModeUniverse::for_lune(1, 1, K).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let states: Vec<_> = (0..20).map(|_| random_state(&u, &mut rng, 8)).collect();
        assert!(car_check(&u, &states) <= 1e-12);
    }

    #[test]
    fn single_excitation_eigenvalues() {
        let u = ModeUniverse::for_lune(1, 1, K).unwrap();
        let f = fermi_state(&u);
        let idx = ExcitationIndex::new(1, K, Momentum::new(2, 0, 0)).unwrap();
        let x = apply_bdag(&u, &f, &idx).unwrap();
        assert!((x.norm() - 1.0).abs() < 1e-15);
        assert!(apply_ne(&u, &x, NeForm::Particles).unwrap().max_abs_diff(&x) < 1e-15);
        assert!(apply_hkin_prime(&u, &x).unwrap().max_abs_diff(&x.scaled(3.0)) < 1e-15);
    }

    #[test]
    fn heff_on_one_plasmon() {
        let sys = coulomb(1, 1);
        let u = ModeUniverse::plasmon_closure(1, 1, K).unwrap();
        let r = residual_identity_check(&u, &sys, K, 1).unwrap();
        assert!(r.lhs < 1e-12, "{r:?}");
        assert_eq!(r.rhs, 0.0);
        assert!((r.psi_norm - 1.0).abs() < 1e-14);
    }

    #[test]
    fn heff_needs_bundles() {
        let sys = coulomb(1, 1);
        let u = ModeUniverse::plasmon_closure(1, 1, K).unwrap();
        let bk = build_kernel_bundle(&sys, K).unwrap();
        let (_, phi) = plasmon_vector(&bk);
        let psi = psi_m(&u, K, &phi, 2).unwrap();
        assert!(matches!(apply_heff(&u, &psi, &[bk]), Err(Error::MissingBundle(_))));
        let zero = FermiSystem::new(1, 1, Potential::Zero, false).unwrap();
        let bundles: Vec<_> = contributing_momenta(&u, &psi)
            .into_iter()
            .map(|l| build_kernel_bundle(&zero, l).unwrap())
            .collect();
        let h = apply_heff(&u, &psi, &bundles).unwrap();
        assert!(h.max_abs_diff(&apply_hkin_prime(&u, &psi).unwrap()) < 1e-14);
    }

    #[test]
    fn residual_identity_m2_m3() {
        let sys = coulomb(1, 1);
        let u = ModeUniverse::plasmon_closure(1, 1, K).unwrap();
        for m in [2, 3] {
            let r = residual_identity_check(&u, &sys, K, m).unwrap();
            assert!(r.lhs > 0.0);
            assert!(r.relative_gap() <= 1e-9, "{r:?}");
            assert!(r.bound_holds);
        }
    }

    #[test]
    fn psi_annihilation_and_sandwich() {
        let sys = coulomb(1, 1);
        let u = ModeUniverse::for_lune(1, 1, K).unwrap();
        let (_, phi) = plasmon_vector(&build_kernel_bundle(&sys, K).unwrap());
        assert!(psi_annihilation_check(&u, K, &phi, 3).unwrap() < 1e-13);
        for row in norm_sandwich(&u, K, &phi, 4).unwrap() {
            assert!(row.holds, "{row:?}");
        }
        assert_eq!(psi_m(&u, K, &phi, 0).unwrap(), fermi_state(&u));
    }

    #[test]
    fn exchange_vacuum_agrees() {
        let sys = coulomb(1, 1);
        let kernels = exchange_kernels(&sys, K).unwrap();
        let n = Lune::new(1, K).unwrap().len();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let b = SymOp::symmetrized(&m + m.transpose());
        let r = exchange_vacuum_check(&sys, K, &b, &kernels).unwrap();
        assert!(r.direct.abs() > 1e-6);
        assert!(r.relative_gap() <= 1e-10, "{r:?}");
        let z = exchange_vacuum_check(&sys, K, &SymOp::zeros(n), &kernels).unwrap();
        assert_eq!((z.direct, z.closed_form), (0.0, 0.0));
    }

    #[test]
    fn commutator_suites_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert!(quasi_bosonic_check(1, 1, 1, 1, &mut rng).unwrap() <= 1e-12);
        assert!(kinetic_commutator_check(1, 1, 4, 2, &mut rng).unwrap() <= 1e-12);
        let u = ModeUniverse::for_lune(1, 2, K).unwrap();
        let states: Vec<_> = (0..10).map(|_| random_state(&u, &mut rng, 5)).collect();
        let (gap, margin) = particle_hole_check(&u, &states).unwrap();
        assert_eq!(gap, 0.0);
        assert!(margin >= -1e-12);
    }
}
