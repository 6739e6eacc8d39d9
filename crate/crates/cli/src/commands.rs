//! Table commands: lune, riemann, corr, plasmon.

use bosonize_core::correlation::{correlation_report, CorrelationOptions};
use bosonize_core::lattice::{find_perp_generators, lune_slices, slice_ellipse_report};
use bosonize_core::plasmon::{compute_mode, continuum_dispersion};
use bosonize_core::quad::Quadrature;
use bosonize_core::riemann::{check_bounds, continuum_integral, power_sum, Regime};
use bosonize_core::{FermiBall, Lune, Momentum, Potential};
use rayon::prelude::*;

use crate::config::{Command, RunConfig};
use crate::table::{ResultTable, Value};
use crate::CliError;

fn pairs(cfg: &RunConfig) -> Vec<(i64, Momentum)> {
    let ks = cfg.momenta();
    cfg.kf2.as_deref().unwrap_or(&[]).iter().flat_map(|kf2| ks.iter().map(move |k| (*kf2, *k))).collect()
}

fn echo(cfg: &RunConfig) -> serde_json::Value {
    serde_json::to_value(cfg).expect("serializable config")
}

fn k_cells(k: Momentum) -> [Value; 3] {
    [k.x.into(), k.y.into(), k.z.into()]
}

struct LuneRow {
    size: usize,
    lambda_min: f64,
    lambda_max: f64,
    slices: usize,
    max_dev: f64,
}

fn lune_row(kf2: i64, k: Momentum) -> Result<LuneRow, CliError> {
    let lune = Lune::new(kf2, k)?;
    let tl = lune.twice_lambdas();
    let report = slice_ellipse_report(&lune, find_perp_generators(k)?)?;
    let max_dev = report.iter().map(|r| (r.exact_count as f64 - r.ellipse_area).abs()).fold(0.0, f64::max);
    Ok(LuneRow {
        size: lune.len(),
        lambda_min: tl.iter().copied().min().unwrap_or(0) as f64 * 0.5,
        lambda_max: tl.iter().copied().max().unwrap_or(0) as f64 * 0.5,
        slices: lune_slices(&lune).len(),
        max_dev,
    })
}

pub fn cmd_lune(cfg: &RunConfig) -> Result<ResultTable, CliError> {
    let cfg = cfg.resolved(Command::Lune)?;
    let jobs = pairs(&cfg);
    let rows: Vec<LuneRow> = jobs.par_iter().map(|(kf2, k)| lune_row(*kf2, *k)).collect::<Result<_, _>>()?;
    let mut t = ResultTable::new(
        "lune",
        echo(&cfg),
        &["kf2", "kx", "ky", "kz", "lune_size", "lambda_min", "lambda_max", "slices", "max_slice_deviation"],
    );
    for ((kf2, k), r) in jobs.iter().zip(rows) {
        let [x, y, z] = k_cells(*k);
        t.push(vec![
            (*kf2).into(),
            x,
            y,
            z,
            r.size.into(),
            r.lambda_min.into(),
            r.lambda_max.into(),
            r.slices.into(),
            r.max_dev.into(),
        ]);
    }
    Ok(t)
}

pub fn cmd_riemann(cfg: &RunConfig) -> Result<ResultTable, CliError> {
    let cfg = cfg.resolved(Command::Riemann)?;
    let betas = cfg.beta.clone().unwrap_or_default();
    let jobs = pairs(&cfg);
    let per_pair: Vec<Vec<Vec<Value>>> = jobs
        .par_iter()
        .map(|(kf2, k)| {
            let lune = Lune::new(*kf2, *k)?;
            let kf = (*kf2 as f64).sqrt();
            betas
                .iter()
                .map(|&beta| {
                    let sum = power_sum(&lune, beta).value;
                    let (scale, ratio) = match check_bounds(&lune, beta) {
                        Ok(b) => (Some(b.scale), Some(b.ratio)),
                        Err(_) => (None, None),
                    };
                    let continuum = if Regime::of(*kf2, *k) == Regime::Below2kF && beta > -2.0 {
                        Some(continuum_integral(kf, k.norm(), beta)?)
                    } else {
                        None
                    };
                    let [x, y, z] = k_cells(*k);
                    Ok(vec![
                        (*kf2).into(),
                        x,
                        y,
                        z,
                        beta.into(),
                        lune.len().into(),
                        sum.into(),
                        scale.into(),
                        ratio.into(),
                        Regime::of(*kf2, *k).as_str().into(),
                        continuum.into(),
                        continuum.map(|c| sum / c - 1.0).into(),
                    ])
                })
                .collect::<Result<Vec<_>, CliError>>()
        })
        .collect::<Result<_, CliError>>()?;
    let mut t = ResultTable::new(
        "riemann",
        echo(&cfg),
        &[
            "kf2",
            "kx",
            "ky",
            "kz",
            "beta",
            "lune_size",
            "power_sum",
            "scale",
            "ratio",
            "regime",
            "continuum",
            "continuum_rel_dev",
        ],
    );
    for row in per_pair.into_iter().flatten() {
        t.push(row);
    }
    Ok(t)
}

pub fn cmd_corr(cfg: &RunConfig) -> Result<ResultTable, CliError> {
    let resolved = cfg.resolved(Command::Corr)?;
    let opts = CorrelationOptions {
        k_cutoff: resolved.cutoff,
        ex_cutoff: resolved.ex_cutoff,
        quad: resolved.quad_rtol.map(Quadrature::with_rtol),
    };
    let mut t = ResultTable::new(
        "corr",
        echo(&resolved),
        &[
            "kf2",
            "particles",
            "e_fermi",
            "e_bos",
            "e_ex",
            "error_scale",
            "bos_over_scale",
            "k_cutoff",
            "ex_cutoff",
            "bos_tail",
        ],
    );
    for &kf2 in resolved.kf2.as_deref().unwrap_or(&[]) {
        let sys = resolved.system_for(&resolved, kf2)?;
        let r = correlation_report(&sys, &opts)?;
        let ratio = (r.error_scale > 0.0).then(|| r.e_bos.abs() / r.error_scale);
        let particles = sys.s as usize * FermiBall::new(kf2)?.len();
        t.push(vec![
            kf2.into(),
            particles.into(),
            r.e_fermi.into(),
            r.e_bos.into(),
            r.e_ex.into(),
            r.error_scale.into(),
            ratio.into(),
            r.k_cutoff.into(),
            r.ex_cutoff.into(),
            r.bos_tail.into(),
        ]);
    }
    Ok(t)
}

pub fn cmd_plasmon(cfg: &RunConfig) -> Result<ResultTable, CliError> {
    let resolved = cfg.resolved(Command::Plasmon)?;
    let jobs = pairs(&resolved);
    let systems = resolved
        .kf2
        .as_deref()
        .unwrap_or(&[])
        .iter()
        .map(|kf2| resolved.system_for(&resolved, *kf2))
        .collect::<Result<Vec<_>, _>>()?;
    let modes = jobs
        .par_iter()
        .map(|(kf2, k)| {
            let sys = systems.iter().find(|s| s.kf2 == *kf2).expect("system per kF2");
            let mode = compute_mode(sys, *k)?;
            let formula = match sys.potential {
                Potential::Coulomb { g } => Some(continuum_dispersion(g, sys.s, &FermiBall::new(*kf2)?, *k)),
                _ => None,
            };
            Ok((mode, formula))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut t = ResultTable::new(
        "plasmon",
        echo(&resolved),
        &[
            "kf2",
            "kx",
            "ky",
            "kz",
            "lune_size",
            "epsilon",
            "formula",
            "deviation",
            "deviation_nonincreasing",
            "threshold_satisfied",
            "epsilon_lower",
            "epsilon_upper",
            "phi_inf",
            "phi_inf_bound",
            "solver",
        ],
    );
    let mut last: Vec<(Momentum, f64)> = Vec::new();
    for ((kf2, k), (m, formula)) in jobs.iter().zip(&modes) {
        let deviation = formula.map(|f| (m.epsilon - f).abs() / f);
        let monotone = deviation.map(|d| {
            let prev = last.iter().find(|(q, _)| q == k).map(|(_, p)| *p);
            last.retain(|(q, _)| q != k);
            last.push((*k, d));
            prev.map_or(true, |p| d <= p)
        });
        let [x, y, z] = k_cells(*k);
        t.push(vec![
            (*kf2).into(),
            x,
            y,
            z,
            m.dim.into(),
            m.epsilon.into(),
            (*formula).into(),
            deviation.into(),
            monotone.into(),
            m.threshold.satisfied.into(),
            m.epsilon_lower.into(),
            m.epsilon_upper.into(),
            m.phi_inf.into(),
            m.phi_inf_bound.into(),
            m.solver.as_str().into(),
        ]);
    }
    Ok(t)
}
