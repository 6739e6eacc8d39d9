//! Correlation-energy assembly: Fermi-state energy, bosonic and exchange contributions.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{ceil_sqrt, lune_twice_lambdas, momenta_within, FermiBall, Lune, Momentum};
use crate::onebody::build_kernel_bundle;
use crate::quad::{log1p_minus_x, Quadrature};
use crate::system::{FermiSystem, Potential};

/// Work budget (unordered p,q pairs) for the default exchange cutoff.
pub const EX_PAIR_BUDGET: f64 = 2.0e8;

/// Largest lune for which [`bos_cross_check`] is run during a sweep.
pub const CROSS_CHECK_DIM: usize = 400;

fn cube(x: f64) -> f64 {
    x * x * x
}

/// One orbit of the k-sweep: the representative and how many k it stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KClass {
    pub k: Momentum,
    pub multiplicity: usize,
}

/// Nonzero k with |k| ≤ cutoff, grouped into cubic orbits when the potential allows it.
pub fn sweep_classes(system: &FermiSystem, cutoff: i64) -> Vec<KClass> {
    let all = momenta_within(cutoff);
    if !system.potential.is_cubic_symmetric() {
        return all.into_iter().map(|k| KClass { k, multiplicity: 1 }).collect();
    }
    all.into_iter()
        .filter(|k| *k == k.cubic_canonical())
        .map(|k| KClass { k, multiplicity: k.cubic_orbit().len() })
        .collect()
}

/// (λ, count) pairs of the lune, in ascending λ.
fn lambda_histogram(ball: &FermiBall, k: Momentum) -> Vec<(f64, f64)> {
    let mut t = lune_twice_lambdas(ball, k);
    t.sort_unstable();
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut prev = None;
    for x in t {
        if prev == Some(x) {
            out.last_mut().expect("nonempty").1 += 1.0;
        } else {
            out.push((x as f64 * 0.5, 1.0));
            prev = Some(x);
        }
    }
    out
}

fn weighted_median(hist: &[(f64, f64)]) -> f64 {
    let total: f64 = hist.iter().map(|h| h.1).sum();
    let mut acc = 0.0;
    for &(l, c) in hist {
        acc += c;
        if acc >= 0.5 * total {
            return l;
        }
    }
    1.0
}

/// s V̂_k κ / (2π)³, i.e. 2v² per component.
fn coupling(system: &FermiSystem, k: Momentum) -> f64 {
    system.s as f64 * system.v_hat(k) * system.coupling_scale() / cube(2.0 * PI)
}

/// 1 − (s|V̂_k|κ/(2π)³) Σλ⁻¹.
fn attractive_margin(a: f64, hist: &[(f64, f64)]) -> f64 {
    1.0 - a.abs() * hist.iter().map(|(l, c)| c / l).sum::<f64>()
}

fn bos_integral(a: f64, hist: &[(f64, f64)], quad: &Quadrature) -> Result<f64> {
    if a == 0.0 || hist.is_empty() {
        return Ok(0.0);
    }
    let f = |t: f64| {
        let t2 = t * t;
        let x: f64 = hist.iter().map(|(l, c)| c * l / (l * l + t2)).sum();
        log1p_minus_x(a * x)
    };
    Ok(quad.integrate_semi_infinite(f, weighted_median(hist))?.value / PI)
}

/// (1/π)∫₀^∞ F((sV̂_kκ/(2π)³) Σ_p λ/(λ²+t²)) dt for one k.
pub fn bos_term(system: &FermiSystem, k: Momentum, quad: &Quadrature) -> Result<f64> {
    let ball = system.ball()?;
    bos_term_in(system, &ball, k, quad)
}

fn bos_term_in(system: &FermiSystem, ball: &FermiBall, k: Momentum, quad: &Quadrature) -> Result<f64> {
    let a = coupling(system, k);
    if a == 0.0 {
        return Ok(0.0);
    }
    let hist = lambda_histogram(ball, k);
    if a < 0.0 {
        let margin = attractive_margin(a, &hist);
        if margin <= 0.0 {
            return Err(Error::Inadmissible { k, margin });
        }
    }
    bos_integral(a, &hist, quad)
}

/// Quadrature value of the bosonic term against tr(E − h − P) from the kernel bundle.
pub fn bos_cross_check(system: &FermiSystem, k: Momentum) -> Result<(f64, f64)> {
    let quad = bos_term(system, k, &Quadrature::default())?;
    let bundle = build_kernel_bundle(system, k)?;
    Ok((quad, bundle.trace_formula_check()?.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BosResult {
    pub total: f64,
    /// Per class: (representative, multiplicity, term for one k).
    pub per_k: Vec<(KClass, f64)>,
}

pub fn e_corr_bos(system: &FermiSystem, k_cutoff: i64) -> Result<BosResult> {
    e_corr_bos_with(system, k_cutoff, &Quadrature::default())
}

pub fn e_corr_bos_with(system: &FermiSystem, k_cutoff: i64, quad: &Quadrature) -> Result<BosResult> {
    let ball = system.ball()?;
    let classes = sweep_classes(system, k_cutoff);
    let terms: Vec<f64> =
        classes.par_iter().map(|c| bos_term_in(system, &ball, c.k, quad)).collect::<Result<_>>()?;
    let total = classes.iter().zip(&terms).map(|(c, t)| c.multiplicity as f64 * t).sum();
    Ok(BosResult { total, per_k: classes.into_iter().zip(terms).collect() })
}

/// Σ_{p,q∈L_k} V̂_{p+q−k}/(λ_{k,p}+λ_{k,q}) over l = p+q−k ≠ 0, times the prefactor and V̂_k.
pub fn ex_term(system: &FermiSystem, lune: &Lune) -> f64 {
    let k = lune.k();
    let vk = system.v_hat(k);
    if vk == 0.0 {
        return 0.0;
    }
    let pts = lune.points();
    let tl = lune.twice_lambdas();
    let mut sum = 0.0;
    for i in 0..pts.len() {
        let mut row = 0.0;
        for j in i..pts.len() {
            let l = pts[i] + pts[j] - k;
            if l.is_zero() {
                continue;
            }
            let vl = system.potential.value(l);
            if vl == 0.0 {
                continue;
            }
            // 1/(λp+λq) = 2/(2λp+2λq)
            let term = 2.0 * vl / (tl[i] + tl[j]) as f64;
            row += if i == j { term } else { 2.0 * term };
        }
        sum += row;
    }
    let kappa = system.coupling_scale();
    system.s as f64 * kappa * kappa / (4.0 * cube(2.0 * PI) * cube(2.0 * PI)) * vk * sum
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExResult {
    pub total: f64,
    pub per_k: Vec<(KClass, f64)>,
}

/// Reduced exchange sum; only the outer k is cutoff-restricted.
pub fn e_corr_ex(system: &FermiSystem, k_cutoff: i64) -> Result<ExResult> {
    let ball = system.ball()?;
    let classes = sweep_classes(system, k_cutoff);
    let terms: Vec<f64> = classes
        .par_iter()
        .map(|c| Ok(ex_term(system, &Lune::from_ball(&ball, c.k)?)))
        .collect::<Result<_>>()?;
    let total = classes.iter().zip(&terms).map(|(c, t)| c.multiplicity as f64 * t).sum();
    Ok(ExResult { total, per_k: classes.into_iter().zip(terms).collect() })
}

/// Unreduced exchange sum over pairs (k,l) with p,q ∈ L_k ∩ L_l and p+q = k+l.
///
/// Both k and l run over 0 < |·| ≤ cutoff, so the result matches [`e_corr_ex`] only once the
/// cutoff covers the potential's support. Cost grows like cutoff⁶·|L|; meant for small systems.
pub fn e_corr_ex_literal(system: &FermiSystem, cutoff: i64) -> Result<f64> {
    let ball = system.ball()?;
    let ks: Vec<Momentum> = momenta_within(cutoff).into_iter().filter(|k| system.v_hat(*k) != 0.0).collect();
    let lunes: Vec<Lune> = ks.iter().map(|k| Lune::from_ball(&ball, *k)).collect::<Result<_>>()?;
    let mut sum = 0.0;
    for (a, lk) in lunes.iter().enumerate() {
        for (b, ll) in lunes.iter().enumerate() {
            let total = ks[a] + ks[b];
            let mut inner = 0.0;
            for p in lk.points().iter().filter(|p| ll.contains(p)) {
                let q = total - *p;
                if let (Some(i), Some(j)) = (lk.index_of(p), lk.index_of(&q)) {
                    if ll.contains(&q) {
                        inner += 1.0 / (lk.lambda(i) + lk.lambda(j));
                    }
                }
            }
            sum += system.v_hat(ks[a]) * system.v_hat(ks[b]) * inner;
        }
    }
    let kappa = system.coupling_scale();
    Ok(system.s as f64 * kappa * kappa / (4.0 * cube(2.0 * PI) * cube(2.0 * PI)) * sum)
}

/// Largest r ≤ k_cutoff whose exchange sum fits [`EX_PAIR_BUDGET`]; at least 1.
pub fn default_ex_cutoff(system: &FermiSystem, k_cutoff: i64) -> Result<i64> {
    let ball = system.ball()?;
    let classes = sweep_classes(system, k_cutoff);
    let sizes: Vec<f64> =
        classes.par_iter().map(|c| lune_twice_lambdas(&ball, c.k).len() as f64).collect();
    let mut cost = 0.0;
    let mut best = 1.min(k_cutoff.max(0));
    let mut r = 1;
    let mut idx = 0;
    while r <= k_cutoff {
        while idx < classes.len() && classes[idx].k.norm2() <= r * r {
            cost += 0.5 * sizes[idx] * sizes[idx];
            idx += 1;
        }
        if cost > EX_PAIR_BUDGET {
            break;
        }
        best = r;
        r += 1;
    }
    Ok(best)
}

/// E_F = sΣ_{B_F}|p|² + κ[N(N−1)V̂₀/(2(2π)³) − (1/(2(2π)³))Σ_k V̂_k(N − s|L_k|)].
pub fn fermi_energy(system: &FermiSystem) -> Result<f64> {
    let ball = system.ball()?;
    let s = system.s as f64;
    let kinetic = s * ball.points().iter().map(|p| p.norm2() as f64).sum::<f64>();
    let n = s * ball.len() as f64;
    let c = 1.0 / (2.0 * cube(2.0 * PI));
    // N − s|L_k| vanishes once |k| > 2k_F
    let exchange: f64 = momenta_within(2 * ceil_sqrt(system.kf2))
        .into_iter()
        .filter(|k| k.norm2() <= 4 * system.kf2)
        .map(|k| {
            let vk = system.v_hat(k);
            if vk == 0.0 {
                0.0
            } else {
                vk * (n - s * lune_twice_lambdas(&ball, k).len() as f64)
            }
        })
        .sum();
    Ok(kinetic + system.coupling_scale() * c * (n * (n - 1.0) * system.v0 - exchange))
}

/// √(Σ_{0<|k|≤cutoff} V̂_k² min{|k|, k_F}).
pub fn error_scale(system: &FermiSystem, k_cutoff: i64) -> f64 {
    let kf = system.kf();
    momenta_within(k_cutoff)
        .into_iter()
        .map(|k| {
            let v = system.v_hat(k);
            v * v * k.norm().min(kf)
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub class: KClass,
    pub v_hat: f64,
    /// 1 − 2⟨v,h⁻¹v⟩ for V̂_k < 0, +∞ otherwise.
    pub margin: f64,
    /// V̂_k ≥ −(1−ε)4π²/s.
    pub within_relaxed_bound: bool,
    pub admissible: bool,
}

pub fn attractive_sweep(system: &FermiSystem, epsilon: f64, k_cutoff: i64) -> Result<Vec<SweepRow>> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidSystem(format!("epsilon must lie in (0,1), got {epsilon}")));
    }
    let ball = system.ball()?;
    let floor = -(1.0 - epsilon) * 4.0 * PI * PI / system.s as f64;
    Ok(sweep_classes(system, k_cutoff)
        .par_iter()
        .map(|c| {
            let v_hat = system.v_hat(c.k);
            let margin = if v_hat < 0.0 {
                attractive_margin(coupling(system, c.k), &lambda_histogram(&ball, c.k))
            } else {
                f64::INFINITY
            };
            SweepRow { class: *c, v_hat, margin, within_relaxed_bound: v_hat >= floor, admissible: margin > 0.0 }
        })
        .collect())
}

/// Per-k estimate of |bosonic term| from |F(x)| ≤ x²/2 and 1/(λp+λq) ≤ 1/(2√(λpλq)).
fn tail_term(system: &FermiSystem, ball: &FermiBall, k: Momentum) -> f64 {
    let a = coupling(system, k);
    let s: f64 = lune_twice_lambdas(ball, k).iter().map(|&t| (2.0 / t as f64).sqrt()).sum();
    a * a * s * s / 8.0
}

/// Estimate of the bosonic contribution beyond the cutoff, for repulsive potentials.
///
/// Explicit shells up to max(2·cutoff, 2⌈k_F⌉+2), then a continuum remainder that bounds
/// each λ below by |k|(|k|−2k_F)/2. `None` when the potential is attractive somewhere.
pub fn bos_tail_estimate(system: &FermiSystem, k_cutoff: i64) -> Result<Option<f64>> {
    if !system.potential.is_repulsive() {
        return Ok(None);
    }
    let ball = system.ball()?;
    let outer = match system.potential.support_radius() {
        Some(r) if r <= k_cutoff => return Ok(Some(0.0)),
        Some(r) => r,
        None => (2 * k_cutoff).max(2 * ceil_sqrt(system.kf2) + 2),
    };
    let r2 = k_cutoff * k_cutoff;
    let classes: Vec<KClass> =
        sweep_classes(system, outer).into_iter().filter(|c| c.k.norm2() > r2).collect();
    let terms: Vec<f64> = classes.par_iter().map(|c| tail_term(system, &ball, c.k)).collect();
    let explicit: f64 = classes.iter().zip(&terms).map(|(c, t)| c.multiplicity as f64 * t).sum();
    let radial: Box<dyn Fn(f64) -> f64> = match system.potential {
        Potential::Coulomb { g } => Box::new(move |r: f64| g / (r * r)),
        Potential::Gaussian { a, b } => Box::new(move |r: f64| a * (-b * r * r).exp()),
        _ => return Ok(Some(explicit)),
    };
    let kf = system.kf();
    let nb = ball.len() as f64;
    let pre = system.s as f64 * system.coupling_scale() / cube(2.0 * PI);
    let big_r = outer as f64;
    let f = |t: f64| {
        let r = big_r + t;
        let a = pre * radial(r);
        4.0 * PI * r * r * a * a * nb * nb / (4.0 * r * (r - 2.0 * kf))
    };
    let rest = Quadrature::with_rtol(1e-8).integrate_semi_infinite(f, big_r)?.value;
    Ok(Some(explicit + rest))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerKRow {
    pub class: KClass,
    pub e_bos: f64,
    /// `None` beyond the exchange cutoff.
    pub e_ex: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationReport {
    pub e_fermi: f64,
    pub e_bos: f64,
    pub e_ex: f64,
    pub error_scale: f64,
    pub k_cutoff: i64,
    pub ex_cutoff: i64,
    pub bos_tail: Option<f64>,
    pub per_k: Vec<PerKRow>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CorrelationOptions {
    pub k_cutoff: Option<i64>,
    pub ex_cutoff: Option<i64>,
    pub quad: Option<Quadrature>,
}

pub fn correlation_report(system: &FermiSystem, opts: &CorrelationOptions) -> Result<CorrelationReport> {
    system.validate()?;
    let k_cutoff = opts.k_cutoff.unwrap_or_else(|| system.default_cutoff());
    let ex_cutoff = match opts.ex_cutoff {
        Some(c) => c.min(k_cutoff),
        None => default_ex_cutoff(system, k_cutoff)?,
    };
    let quad = opts.quad.unwrap_or_default();
    let bos = e_corr_bos_with(system, k_cutoff, &quad)?;
    let ex = e_corr_ex(system, ex_cutoff)?;
    let mut ex_iter = ex.per_k.iter().peekable();
    let per_k = bos
        .per_k
        .iter()
        .map(|(c, b)| {
            let e_ex = match ex_iter.peek() {
                Some((ec, v)) if ec.k == c.k => {
                    let v = *v;
                    ex_iter.next();
                    Some(v)
                }
                _ => None,
            };
            PerKRow { class: *c, e_bos: *b, e_ex }
        })
        .collect();
    Ok(CorrelationReport {
        e_fermi: fermi_energy(system)?,
        e_bos: bos.total,
        e_ex: ex.total,
        error_scale: error_scale(system, k_cutoff),
        k_cutoff,
        ex_cutoff,
        bos_tail: bos_tail_estimate(system, k_cutoff)?,
        per_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coulomb(kf2: i64) -> FermiSystem {
        FermiSystem::new(kf2, 1, Potential::Coulomb { g: 1.0 }, true).unwrap()
    }

    #[test]
    fn zero_potential() {
        let sys = FermiSystem::new(1, 1, Potential::Zero, true).unwrap();
        assert_eq!(fermi_energy(&sys).unwrap(), 6.0);
        assert_eq!(e_corr_bos(&sys, 4).unwrap().total, 0.0);
        assert_eq!(e_corr_ex(&sys, 4).unwrap().total, 0.0);
        assert_eq!(error_scale(&sys, 4), 0.0);
        let sys2 = FermiSystem::new(1, 2, Potential::Zero, true).unwrap();
        assert_eq!(fermi_energy(&sys2).unwrap(), 12.0);
    }

    #[test]
    fn classes_cover_every_k() {
        let sys = coulomb(4);
        let n: usize = sweep_classes(&sys, 5).iter().map(|c| c.multiplicity).sum();
        assert_eq!(n, momenta_within(5).len());
    }

    #[test]
    fn reduced_bos_matches_full_sweep() {
        let sys = coulomb(9);
        let quad = Quadrature::default();
        let full: f64 = momenta_within(4).iter().map(|k| bos_term(&sys, *k, &quad).unwrap()).sum();
        let red = e_corr_bos(&sys, 4).unwrap().total;
        assert!((full / red - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_check_small_modes() {
        let sys = FermiSystem::new(16, 2, Potential::Coulomb { g: 4.0 * PI }, false).unwrap();
        for k in [Momentum::new(1, 0, 0), Momentum::new(1, 1, 0), Momentum::new(2, 1, 1)] {
            let (q, s) = bos_cross_check(&sys, k).unwrap();
            assert!((q - s).abs() <= 1e-7 * s.abs(), "{k}: {q} vs {s}");
        }
    }

    #[test]
    fn tail_is_small_and_positive() {
        let sys = coulomb(25);
        let tail = bos_tail_estimate(&sys, sys.default_cutoff()).unwrap().unwrap();
        let bos = e_corr_bos(&sys, sys.default_cutoff()).unwrap().total;
        assert!(tail > 0.0 && tail < 0.05 * bos.abs(), "{tail} vs {bos}");
    }

    #[test]
    fn default_ex_cutoff_respects_bounds() {
        let sys = coulomb(4);
        assert_eq!(default_ex_cutoff(&sys, 3).unwrap(), 3);
        assert_eq!(default_ex_cutoff(&sys, 0).unwrap(), 0);
    }
}
