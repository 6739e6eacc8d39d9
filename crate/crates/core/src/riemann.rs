//! Power sums Σ_{p∈L_k} λ^β, their asymptotics and continuum counterparts.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::{lune_slices, FermiBall, Lune, Momentum};
use crate::quad::Quadrature;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerSumResult {
    pub beta: f64,
    pub value: f64,
    pub lune_size: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Below2kF,
    Above2kF,
}

impl Regime {
    pub fn of(kf2: i64, k: Momentum) -> Regime {
        if k.norm2() < 4 * kf2 {
            Regime::Below2kF
        } else {
            Regime::Above2kF
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Below2kF => "below_2kF",
            Regime::Above2kF => "above_2kF",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymptoticCheck {
    pub kf2: i64,
    pub computed: f64,
    pub predicted: f64,
    pub relative_error: f64,
    pub regime: Regime,
}

/// Sum divided by its natural scale; see [`check_bounds`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundRatio {
    pub beta: f64,
    pub sum: f64,
    pub scale: f64,
    pub ratio: f64,
    pub regime: Regime,
    /// β ∈ [−1, 0]: the ratio is bounded above.
    pub upper_form: bool,
    /// β ∈ {0} ∪ [1, ∞): the ratio is bounded below.
    pub lower_form: bool,
}

fn lambda_pow(twice: i64, beta: f64) -> f64 {
    let lam = twice as f64 * 0.5;
    if beta == -1.0 {
        1.0 / lam
    } else if beta == 0.0 {
        1.0
    } else if beta == 1.0 {
        lam
    } else {
        lam.powf(beta)
    }
}

pub fn power_sum(lune: &Lune, beta: f64) -> PowerSumResult {
    let value = lune.twice_lambdas().iter().map(|&t| lambda_pow(t, beta)).sum();
    PowerSumResult { beta, value, lune_size: lune.len() }
}

/// Σλ⁻¹ against 2πk_F for each k_F² in the list.
pub fn check_minus_one_asymptotics(kf2_list: &[i64], k: Momentum) -> Result<Vec<AsymptoticCheck>> {
    kf2_list
        .iter()
        .map(|&kf2| {
            let ball = FermiBall::new(kf2)?;
            let lune = Lune::from_ball(&ball, k)?;
            let computed = power_sum(&lune, -1.0).value;
            let predicted = 2.0 * PI * (kf2 as f64).sqrt();
            Ok(AsymptoticCheck {
                kf2,
                computed,
                predicted,
                relative_error: (computed - predicted).abs() / predicted.abs().max(f64::EPSILON),
                regime: Regime::of(kf2, k),
            })
        })
        .collect()
}

/// Ratio Σλ^β / (k_F^{2+β}|k|^{1+β}), or Σλ^β / (k_F³|k|^{2β}) when |k| ≥ 2k_F.
pub fn check_bounds(lune: &Lune, beta: f64) -> Result<BoundRatio> {
    let upper_form = (-1.0..=0.0).contains(&beta);
    let lower_form = beta == 0.0 || beta >= 1.0;
    if !(upper_form || lower_form) || !beta.is_finite() {
        return Err(Error::InvalidBeta(beta));
    }
    let kf = lune.kf();
    let kn = lune.k().norm();
    let regime = Regime::of(lune.kf2(), lune.k());
    let scale = match regime {
        Regime::Below2kF => kf.powf(2.0 + beta) * kn.powf(1.0 + beta),
        Regime::Above2kF => kf.powi(3) * kn.powf(2.0 * beta),
    };
    let sum = power_sum(lune, beta).value;
    Ok(BoundRatio { beta, sum, scale, ratio: sum / scale, regime, upper_form, lower_form })
}

/// Σ_m f(|k|(lm − |k|/2))·|L_k^m|.
pub fn slice_summation<F: Fn(f64) -> f64>(lune: &Lune, f: F) -> f64 {
    lune_slices(lune)
        .iter()
        .filter(|s| !s.points.is_empty())
        .map(|s| f(s.lambda()) * s.points.len() as f64)
        .sum()
}

/// Continuum analogue of Σ_{p∈L_k} λ^β for 0 < |k| < 2k_F.
pub fn continuum_integral(kf: f64, k_norm: f64, beta: f64) -> Result<f64> {
    continuum_integral_with(kf, k_norm, beta, &Quadrature::default())
}

pub fn continuum_integral_with(kf: f64, k_norm: f64, beta: f64, quad: &Quadrature) -> Result<f64> {
    if k_norm.is_nan() || k_norm <= 0.0 || k_norm >= 2.0 * kf {
        return Err(Error::ContinuumRegime { k_norm, two_kf: 2.0 * kf });
    }
    if !beta.is_finite() || beta <= -2.0 {
        return Err(Error::InvalidBeta(beta));
    }
    let a = k_norm;
    // in u = t − a/2 the cap integrand is (a u)^β (c0 + c1 u − u²)
    let c0 = kf * kf - a * a / 4.0;
    let c1 = a;
    let (u0, u1) = (kf - a / 2.0, kf + a / 2.0);
    if beta == 0.0 || beta == 1.0 || beta == 3.0 {
        let first = 2.0 * PI * a.powf(1.0 + beta) * u0.powf(beta + 2.0) / (beta + 2.0);
        let prim = |u: f64| {
            c0 * u.powf(beta + 1.0) / (beta + 1.0) + c1 * u.powf(beta + 2.0) / (beta + 2.0)
                - u.powf(beta + 3.0) / (beta + 3.0)
        };
        let second = PI * a.powf(beta) * (prim(u1) - prim(u0));
        return Ok(first + second);
    }
    let first = if beta > 0.0 {
        quad.integrate(|u| (a * u).powf(beta) * u, 0.0, u0)?.value
    } else if beta > -1.0 {
        // w = u^{1+β}: ∫u^{1+β}du = ∫w^{1/(1+β)} dw/(1+β)
        let g = 1.0 + beta;
        let w1 = u0.powf(g);
        a.powf(beta) * quad.integrate(|w| w.powf(1.0 / g) / g, 0.0, w1)?.value
    } else {
        // w = u^{2+β} flattens the integrand entirely
        let g = 2.0 + beta;
        let w1 = u0.powf(g);
        a.powf(beta) * quad.integrate(|_| 1.0 / g, 0.0, w1)?.value
    };
    let second = quad.integrate(|u| (a * u).powf(beta) * (c0 + c1 * u - u * u), u0, u1)?.value;
    Ok(2.0 * PI * a * first + PI * second)
}
