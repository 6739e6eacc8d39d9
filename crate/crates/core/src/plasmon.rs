//! Plasmon modes: the top eigenpair of Ẽ_k² = h² + 2P_{h^{1/2}v} in the unscaled regime.

use std::f64::consts::PI;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{FermiBall, Lune, Momentum};
use crate::linalg::SymOp;
use crate::onebody::coupling_vector;
use crate::system::{FermiSystem, Potential};

/// Lunes up to this size use a dense eigendecomposition.
pub const DENSE_LIMIT: usize = 400;

/// Relative gap below which the top eigenvalue counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

const POWER_MAX_ITER: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solver {
    Dense,
    /// Shifted power iteration on the diagonal-plus-rank-one operator.
    Power,
    /// Secular-equation root with the closed-form vector, used when power iteration stalls.
    Secular,
}

impl Solver {
    pub fn as_str(&self) -> &'static str {
        match self {
            Solver::Dense => "dense",
            Solver::Power => "power",
            Solver::Secular => "secular",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeThreshold {
    /// 2⟨v,hv⟩.
    pub lhs: f64,
    /// λ_max².
    pub rhs: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlasmonMode {
    pub k: Momentum,
    pub dim: usize,
    /// Greatest eigenvalue of 2Ẽ_k.
    pub epsilon: f64,
    /// Greatest eigenvalue of Ẽ_k², so that epsilon = 2√varepsilon.
    pub varepsilon: f64,
    pub phi: DVector<f64>,
    pub phi_inf: f64,
    pub lambda_max: f64,
    pub threshold: ModeThreshold,
    /// 2√(2⟨v,hv⟩ + ⟨v,h³v⟩/⟨v,hv⟩); `None` when v = 0.
    pub epsilon_lower: Option<f64>,
    /// Upper bound on epsilon, available when the threshold holds.
    pub epsilon_upper: Option<f64>,
    /// epsilon − epsilon_lower.
    pub gap_to_formula: Option<f64>,
    /// 2√(⟨v,hv⟩λ_max)/(2⟨v,hv⟩ − λ_max²)·‖v‖_∞ when the threshold holds.
    pub phi_inf_bound: Option<f64>,
    /// ‖φ‖_∞·√|L_k|.
    pub delocalization: f64,
    pub delocalization_ok: bool,
    /// varepsilon > λ_max² (relative margin 1e−9).
    pub formula_region: bool,
    pub degenerate: bool,
    /// Max-norm distance to the closed-form eigenvector; `None` when the check is skipped.
    pub closed_form_deviation: Option<f64>,
    /// ‖Ẽ²φ − varepsilon φ‖.
    pub residual: f64,
    pub solver: Solver,
}

struct Operator {
    l2: Vec<f64>,
    w: Vec<f64>,
}

impl Operator {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let c: f64 = 2.0 * self.w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        self.l2.iter().zip(x).zip(&self.w).map(|((l, xi), wi)| l * xi + c * wi).collect()
    }

    fn residual(&self, x: &[f64], mu: f64) -> f64 {
        self.apply(x).iter().zip(x).map(|(a, b)| (a - mu * b).powi(2)).sum::<f64>().sqrt()
    }

    /// Root of 1 = 2Σ w_i²/(μ − λ_i²) above λ_max².
    fn secular_root(&self, l2max: f64) -> f64 {
        let g = |mu: f64| 1.0 - 2.0 * self.l2.iter().zip(&self.w).map(|(l, w)| w * w / (mu - l)).sum::<f64>();
        let ww: f64 = self.w.iter().map(|w| w * w).sum();
        let mut lo = l2max;
        let mut hi = l2max + 2.0 * ww + 1.0;
        while g(hi) < 0.0 {
            hi = l2max + 2.0 * (hi - l2max);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

fn normalize(x: &mut [f64]) {
    let n = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|a| *a /= n);
    }
}

fn closed_form(op: &Operator, lambdas: &[f64], v: &[f64], mu: f64) -> Vec<f64> {
    let mut x: Vec<f64> =
        (0..lambdas.len()).map(|i| lambdas[i].sqrt() * v[i] / (mu - op.l2[i])).collect();
    normalize(&mut x);
    x
}

/// 2⟨v,hv⟩ against λ_max² for the system's coupling vector.
pub fn mode_threshold(system: &FermiSystem, k: Momentum) -> Result<ModeThreshold> {
    let ball = system.ball()?;
    let lune = Lune::from_ball(&ball, k)?;
    Ok(threshold_of(system, &lune))
}

fn threshold_of(system: &FermiSystem, lune: &Lune) -> ModeThreshold {
    let c = system.s as f64 * system.v_hat(lune.k()) * system.coupling_scale() / (2.0 * PI).powi(3);
    let sum: f64 = lune.twice_lambdas().iter().map(|t| *t as f64 * 0.5).sum();
    let lmax = lune.twice_lambdas().iter().max().map_or(0.0, |t| *t as f64 * 0.5);
    let lhs = c * sum;
    ModeThreshold { lhs, rhs: lmax * lmax, satisfied: lhs > lmax * lmax }
}

pub fn compute_mode(system: &FermiSystem, k: Momentum) -> Result<PlasmonMode> {
    let ball = system.ball()?;
    compute_mode_in(system, &ball, k)
}

fn compute_mode_in(system: &FermiSystem, ball: &FermiBall, k: Momentum) -> Result<PlasmonMode> {
    if system.mean_field {
        return Err(Error::ScaledRegime);
    }
    let vk = system.v_hat(k);
    if vk < 0.0 {
        return Err(Error::NegativePotential { k, value: vk });
    }
    let lune = Lune::from_ball(ball, k)?;
    let n = lune.len();
    let lambdas = lune.lambdas();
    let (v, _) = coupling_vector(system, k, n);
    let v = v.as_slice().to_vec();
    let op = Operator {
        l2: lambdas.iter().map(|l| l * l).collect(),
        w: lambdas.iter().zip(&v).map(|(l, vi)| l.sqrt() * vi).collect(),
    };
    let lambda_max = lambdas.iter().fold(0.0f64, |m, l| m.max(*l));
    let l2max = lambda_max * lambda_max;

    let (mut phi, mu, second, solver) = if n <= DENSE_LIMIT {
        let a = SymOp::diagonal(&op.l2).add(&SymOp::rank_one(&DVector::from_column_slice(&op.w), 2.0));
        let spec = a.eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|i, j| spec.values[*i].total_cmp(&spec.values[*j]));
        let top = order[n - 1];
        let second = if n > 1 { spec.values[order[n - 2]] } else { f64::NEG_INFINITY };
        let phi: Vec<f64> = spec.vectors.column(top).iter().copied().collect();
        (phi, spec.values[top], second, Solver::Dense)
    } else {
        let l2min = op.l2.iter().fold(f64::INFINITY, |m, l| m.min(*l));
        let shift = 0.5 * (l2min + l2max);
        let mut x: Vec<f64> = op.w.clone();
        if x.iter().all(|a| *a == 0.0) {
            x = vec![1.0; n];
        }
        normalize(&mut x);
        let mut mu = 0.0;
        let mut converged = false;
        for _ in 0..POWER_MAX_ITER {
            let y = op.apply(&x);
            mu = y.iter().zip(&x).map(|(a, b)| a * b).sum();
            let mut z: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - shift * b).collect();
            normalize(&mut z);
            x = z;
            if op.residual(&x, mu) <= 1e-12 * mu.abs().max(f64::MIN_POSITIVE) {
                mu = op.apply(&x).iter().zip(&x).map(|(a, b)| a * b).sum();
                converged = true;
                break;
            }
        }
        if converged {
            (x, mu, l2max, Solver::Power)
        } else {
            let mu = op.secular_root(l2max);
            (closed_form(&op, &lambdas, &v, mu), mu, l2max, Solver::Secular)
        }
    };

    // ⟨h^{1/2}v, φ⟩ ≥ 0
    if op.w.iter().zip(&phi).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
        phi.iter_mut().for_each(|a| *a = -*a);
    }
    let varepsilon = mu;
    let epsilon = 2.0 * varepsilon.max(0.0).sqrt();
    let degenerate = (varepsilon - second) <= DEGENERACY_TOL * varepsilon.abs();
    let formula_region = varepsilon > l2max * (1.0 + 1e-9);
    let closed_form_deviation = if formula_region && !degenerate && vk > 0.0 {
        let cf = closed_form(&op, &lambdas, &v, varepsilon);
        Some(cf.iter().zip(&phi).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    } else {
        None
    };
    let residual = op.residual(&phi, varepsilon);
    let threshold = threshold_of(system, &lune);
    let vhv: f64 = (0..n).map(|i| v[i] * v[i] * lambdas[i]).sum();
    let vh3v: f64 = (0..n).map(|i| v[i] * v[i] * lambdas[i].powi(3)).sum();
    let lower_inner = (vhv > 0.0).then(|| 2.0 * vhv + vh3v / vhv);
    let epsilon_lower = lower_inner.map(|x| 2.0 * x.sqrt());
    let margin = 2.0 * vhv - l2max;
    let epsilon_upper = match lower_inner {
        Some(x) if threshold.satisfied => Some(2.0 * (x + 4.0 * vh3v * l2max / (margin * margin)).sqrt()),
        _ => None,
    };
    let v_inf = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let phi_inf_bound = threshold.satisfied.then(|| 2.0 * (vhv * lambda_max).sqrt() / margin * v_inf);
    let phi_inf = phi.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let delocalization = phi_inf * (n as f64).sqrt();
    Ok(PlasmonMode {
        k,
        dim: n,
        epsilon,
        varepsilon,
        phi: DVector::from_vec(phi),
        phi_inf,
        lambda_max,
        threshold,
        epsilon_lower,
        epsilon_upper,
        gap_to_formula: epsilon_lower.map(|lo| epsilon - lo),
        phi_inf_bound,
        delocalization,
        delocalization_ok: delocalization <= 10.0,
        formula_region,
        degenerate,
        closed_form_deviation,
        residual,
        solver,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DispersionRow {
    pub kf2: i64,
    pub k: Momentum,
    pub kf: f64,
    pub k_norm: f64,
    pub epsilon: f64,
    /// √(2gn + (12/5)k_F²|k|²), n = s|B_F|/(2π)³.
    pub predicted: f64,
    pub relative_deviation: f64,
    pub formula_region: bool,
}

/// √(2gn + (12/5)k_F²|k|²) with the lattice density n = s|B_F|/(2π)³.
pub fn continuum_dispersion(g: f64, s: u32, ball: &FermiBall, k: Momentum) -> f64 {
    let n = s as f64 * ball.len() as f64 / (2.0 * PI).powi(3);
    (2.0 * g * n + 12.0 / 5.0 * ball.kf2() as f64 * k.norm2() as f64).sqrt()
}

/// Computed ε_k against the continuum dispersion for V̂_k = g/|k|², rows ordered as (kF2, k).
pub fn dispersion_table(g: f64, s: u32, kf2_list: &[i64], k_list: &[Momentum]) -> Result<Vec<DispersionRow>> {
    let jobs: Vec<(i64, Momentum)> =
        kf2_list.iter().flat_map(|kf2| k_list.iter().map(move |k| (*kf2, *k))).collect();
    let balls: Vec<FermiBall> = kf2_list.iter().map(|kf2| FermiBall::new(*kf2)).collect::<Result<_>>()?;
    jobs.par_iter()
        .map(|(kf2, k)| {
            let ball = &balls[kf2_list.iter().position(|x| x == kf2).expect("listed")];
            let system = FermiSystem::new(*kf2, s, Potential::Coulomb { g }, false)?;
            let mode = compute_mode_in(&system, ball, *k)?;
            let kf = (*kf2 as f64).sqrt();
            let predicted = continuum_dispersion(g, s, ball, *k);
            Ok(DispersionRow {
                kf2: *kf2,
                k: *k,
                kf,
                k_norm: k.norm(),
                epsilon: mode.epsilon,
                predicted,
                relative_deviation: (mode.epsilon - predicted).abs() / predicted,
                formula_region: mode.formula_region,
            })
        })
        .collect()
}
