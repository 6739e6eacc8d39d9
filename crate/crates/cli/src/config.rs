//! Run configuration: one JSON document, overridden field by field from the command line.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use bosonize_core::{Fault, FermiSystem, Momentum, Potential};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultName {
    None,
    FlipKernelSign,
}

impl FaultName {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "none" => Ok(FaultName::None),
            "flip_kernel_sign" => Ok(FaultName::FlipKernelSign),
            other => Err(CliError::Config(format!("unknown fault '{other}' (expected none or flip_kernel_sign)"))),
        }
    }

    pub fn to_fault(self) -> Fault {
        match self {
            FaultName::None => Fault::None,
            FaultName::FlipKernelSign => Fault::FlipKernelSign,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero,
    Coulomb { g: f64 },
    Gaussian { a: f64, b: f64 },
    /// Entries `[[x, y, z], value]`; both k and −k must be listed.
    Table { entries: Vec<([i64; 3], f64)> },
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig::Coulomb { g: 4.0 * PI }
    }
}

impl PotentialConfig {
    pub fn to_potential(&self) -> Result<Potential, CliError> {
        Ok(match self {
            PotentialConfig::Zero => Potential::Zero,
            PotentialConfig::Coulomb { g } => Potential::Coulomb { g: *g },
            PotentialConfig::Gaussian { a, b } => Potential::Gaussian { a: *a, b: *b },
            PotentialConfig::Table { entries } => {
                let mut map = BTreeMap::new();
                for ([x, y, z], v) in entries {
                    if map.insert(Momentum::new(*x, *y, *z), *v).is_some() {
                        return Err(CliError::Config(format!("duplicate table entry at ({x},{y},{z})")));
                    }
                }
                Potential::Table(map)
            }
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kf2: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_field: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
}

impl SystemConfig {
    fn is_empty(&self) -> bool {
        *self == SystemConfig::default()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "SystemConfig::is_empty")]
    pub system: SystemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kf2: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<[i64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ex_cutoff: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub only: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<FaultName>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Lune,
    Riemann,
    Corr,
    Plasmon,
    Verify,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Lune => "lune",
            Command::Riemann => "riemann",
            Command::Corr => "corr",
            Command::Plasmon => "plasmon",
            Command::Verify => "verify",
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Format from the explicit setting, else the output extension, else CSV.
    pub fn output_format(&self) -> Format {
        if let Some(f) = self.format {
            return f;
        }
        match self.out.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }

    /// Every field the command reads, with defaults filled in; output and parallelism settings dropped.
    pub fn resolved(&self, cmd: Command) -> Result<RunConfig, CliError> {
        if let Some(j) = self.jobs {
            if j == 0 {
                return Err(CliError::Config("jobs must be at least 1".into()));
            }
        }
        let mut r = RunConfig::default();
        let kf2_default: &[i64] = match cmd {
            Command::Lune => &[1],
            Command::Riemann => &[625, 2500, 10000],
            Command::Corr => &[25, 100, 400],
            Command::Plasmon => &[400, 1600, 6400],
            Command::Verify => &[],
        };
        let kf2 = match (&self.kf2, self.system.kf2) {
            (Some(list), _) => list.clone(),
            (None, Some(one)) => vec![one],
            (None, None) => kf2_default.to_vec(),
        };
        if let Some(bad) = kf2.iter().find(|x| **x < 1) {
            return Err(CliError::Config(format!("kF2 values must be positive integers, got {bad}")));
        }
        let mut kf2 = kf2;
        kf2.sort_unstable();
        kf2.dedup();
        let mut ks: Vec<Momentum> =
            self.k.clone().unwrap_or_else(|| vec![[1, 0, 0]]).iter().map(|a| Momentum::new(a[0], a[1], a[2])).collect();
        if ks.iter().any(|k| k.is_zero()) {
            return Err(CliError::Config("k = (0,0,0) has no lune".into()));
        }
        ks.sort_by(bosonize_core::lattice::shell_order);
        ks.dedup();
        let ks: Vec<[i64; 3]> = ks.iter().map(|k| [k.x, k.y, k.z]).collect();
        if let Some(c) = self.cutoff {
            if c < 1 {
                return Err(CliError::Config(format!("cutoff must be at least 1, got {c}")));
            }
        }
        if let Some(c) = self.ex_cutoff {
            if c < 1 {
                return Err(CliError::Config(format!("ex_cutoff must be at least 1, got {c}")));
            }
        }
        if let Some(t) = self.quad_rtol {
            if !(t > 0.0 && t < 1.0) {
                return Err(CliError::Config(format!("quad_rtol must lie in (0,1), got {t}")));
            }
        }
        match cmd {
            Command::Lune => {
                r.kf2 = Some(kf2);
                r.k = Some(ks);
            }
            Command::Riemann => {
                r.kf2 = Some(kf2);
                r.k = Some(ks);
                let mut beta = self.beta.clone().unwrap_or_else(|| vec![-1.0, 0.0, 1.0]);
                if let Some(b) = beta.iter().find(|b| !b.is_finite()) {
                    return Err(CliError::Config(format!("beta must be finite, got {b}")));
                }
                beta.sort_by(f64::total_cmp);
                beta.dedup();
                r.beta = Some(beta);
            }
            Command::Corr | Command::Plasmon => {
                r.kf2 = Some(kf2);
                if cmd == Command::Plasmon {
                    r.k = Some(ks);
                } else {
                    r.cutoff = self.cutoff;
                    r.ex_cutoff = self.ex_cutoff;
                    r.quad_rtol = self.quad_rtol;
                }
                r.system = SystemConfig {
                    kf2: None,
                    s: Some(self.system.s.unwrap_or(1)),
                    potential: Some(self.system.potential.clone().unwrap_or_default()),
                    mean_field: Some(self.system.mean_field.unwrap_or(cmd == Command::Corr)),
                    v0: Some(self.system.v0.unwrap_or(0.0)),
                };
                // surface invalid systems as configuration errors before any work
                self.system_for(&r, kf2_default.first().copied().unwrap_or(1))?;
            }
            Command::Verify => {
                r.only = self.only.clone();
                r.fault = self.fault.filter(|f| *f != FaultName::None);
                if let Some(o) = &r.only {
                    if !crate::verify::SUITES.contains(&o.as_str()) {
                        return Err(CliError::Config(format!(
                            "unknown suite '{o}' (expected one of {})",
                            crate::verify::SUITES.join(", ")
                        )));
                    }
                }
            }
        }
        Ok(r)
    }

    /// The system of a resolved config at one k_F².
    pub fn system_for(&self, resolved: &RunConfig, kf2: i64) -> Result<FermiSystem, CliError> {
        let sc = &resolved.system;
        let potential = sc.potential.clone().unwrap_or_default().to_potential()?;
        let sys = FermiSystem::new(kf2, sc.s.unwrap_or(1), potential, sc.mean_field.unwrap_or(true))
            .map_err(|e| CliError::Config(e.to_string()))?
            .with_v0(sc.v0.unwrap_or(0.0));
        sys.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(sys)
    }

    pub fn momenta(&self) -> Vec<Momentum> {
        self.k.as_deref().unwrap_or(&[]).iter().map(|a| Momentum::new(a[0], a[1], a[2])).collect()
    }
}

/// "1,0,0;2,0,0" into triples; the empty string is the empty list.
pub fn parse_k_list(s: &str) -> Result<Vec<[i64; 3]>, CliError> {
    s.split(';')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let parts: Vec<&str> = t.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(CliError::Config(format!("k entry '{t}' needs three components")));
            }
            let mut out = [0i64; 3];
            for (o, p) in out.iter_mut().zip(&parts) {
                *o = p.parse().map_err(|_| CliError::Config(format!("bad integer '{p}' in k entry '{t}'")))?;
            }
            Ok(out)
        })
        .collect()
}

/// "25,100,400" into integers; the empty string is the empty list.
pub fn parse_kf2_list(s: &str) -> Result<Vec<i64>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| CliError::Config(format!("bad kF2 value '{t}'"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_json(r#"{"kf2": [1], "bogus": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"system": {"kf2": 1, "spin": 2}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"system": {"potential": {"type": "coulomb", "g": 1, "h": 2}}}"#).is_err());
    }

    #[test]
    fn table_potential_parses() {
        let c = RunConfig::from_json(
            r#"{"system": {"potential": {"type": "table", "entries": [[[1,0,0], 0.5], [[-1,0,0], 0.5]]}}}"#,
        )
        .unwrap();
        let p = c.system.potential.unwrap().to_potential().unwrap();
        assert_eq!(p.value(Momentum::new(-1, 0, 0)), 0.5);
    }

    #[test]
    fn lists_parse() {
        assert_eq!(parse_k_list("1,0,0; 2,0,0").unwrap(), vec![[1, 0, 0], [2, 0, 0]]);
        assert!(parse_k_list("").unwrap().is_empty());
        assert!(parse_k_list("1,0").is_err());
        assert_eq!(parse_kf2_list("25, 100").unwrap(), vec![25, 100]);
        assert!(parse_kf2_list("x").is_err());
    }

    #[test]
    fn resolved_echo_reparses() {
        let c = RunConfig { kf2: Some(vec![100, 25]), jobs: Some(4), ..Default::default() };
        let r = c.resolved(Command::Corr).unwrap();
        assert_eq!(r.kf2, Some(vec![25, 100]));
        assert_eq!(r.jobs, None);
        let echo = serde_json::to_string(&r).unwrap();
        let again = RunConfig::from_json(&echo).unwrap();
        assert_eq!(again.resolved(Command::Corr).unwrap(), r);
    }

    #[test]
    fn format_from_extension() {
        let c = RunConfig { out: Some("x.JSON".into()), ..Default::default() };
        assert_eq!(c.output_format(), Format::Json);
        let c = RunConfig { out: Some("x.json".into()), format: Some(Format::Csv), ..Default::default() };
        assert_eq!(c.output_format(), Format::Csv);
    }
}
