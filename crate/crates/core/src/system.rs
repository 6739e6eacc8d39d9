use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lattice::{ceil_sqrt, FermiBall, Momentum};

/// Fourier coefficients V̂_k of the pair interaction.
#[derive(Clone, Debug, PartialEq)]
pub enum Potential {
    Zero,
    /// V̂_k = g/|k|².
    Coulomb { g: f64 },
    /// V̂_k = a·exp(−b|k|²).
    Gaussian { a: f64, b: f64 },
    /// Explicit values; absent k read as 0.
    Table(BTreeMap<Momentum, f64>),
}

impl Potential {
    pub fn value(&self, k: Momentum) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Coulomb { g } => g / k.norm2() as f64,
            Potential::Gaussian { a, b } => a * (-b * k.norm2() as f64).exp(),
            Potential::Table(t) => t.get(&k).copied().unwrap_or(0.0),
        }
    }

    /// Largest |k| (rounded up) carrying a nonzero value; `None` for infinite support.
    pub fn support_radius(&self) -> Option<i64> {
        match self {
            Potential::Zero => Some(0),
            Potential::Coulomb { g } if *g == 0.0 => Some(0),
            Potential::Gaussian { a, .. } if *a == 0.0 => Some(0),
            Potential::Coulomb { .. } | Potential::Gaussian { .. } => None,
            Potential::Table(t) => Some(
                t.iter()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(k, _)| ceil_sqrt(k.norm2()))
                    .max()
                    .unwrap_or(0),
            ),
        }
    }

    /// Invariance under the 48 signed coordinate permutations.
    pub fn is_cubic_symmetric(&self) -> bool {
        match self {
            Potential::Table(t) => t.keys().all(|k| {
                let v = self.value(*k);
                k.cubic_orbit().into_iter().all(|q| self.value(q) == v)
            }),
            _ => true,
        }
    }

    pub fn is_repulsive(&self) -> bool {
        match self {
            Potential::Zero => true,
            Potential::Coulomb { g } => *g >= 0.0,
            Potential::Gaussian { a, .. } => *a >= 0.0,
            Potential::Table(t) => t.values().all(|v| *v >= 0.0),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Potential::Zero => Ok(()),
            Potential::Coulomb { g } if g.is_finite() => Ok(()),
            Potential::Coulomb { g } => Err(Error::InvalidSystem(format!("coulomb g = {g} is not finite"))),
            Potential::Gaussian { a, b } if a.is_finite() && b.is_finite() && *b > 0.0 => Ok(()),
            Potential::Gaussian { a, b } => {
                Err(Error::InvalidSystem(format!("gaussian needs finite a and b > 0, got a = {a}, b = {b}")))
            }
            Potential::Table(t) => {
                for (k, v) in t {
                    if k.is_zero() {
                        return Err(Error::InvalidSystem("table entries must have k != 0; use v0".into()));
                    }
                    if !v.is_finite() {
                        return Err(Error::InvalidSystem(format!("table value at {k} is not finite")));
                    }
                    if t.get(&-*k) != Some(v) {
                        return Err(Error::InvalidSystem(format!("table is not symmetric under k -> -k at {k}")));
                    }
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FermiSystem {
    pub kf2: i64,
    pub s: u32,
    pub potential: Potential,
    /// Apply the k_F⁻¹ factor in v_k.
    pub mean_field: bool,
    pub v0: f64,
}

impl FermiSystem {
    pub fn new(kf2: i64, s: u32, potential: Potential, mean_field: bool) -> Result<Self> {
        let sys = FermiSystem { kf2, s, potential, mean_field, v0: 0.0 };
        sys.validate()?;
        Ok(sys)
    }

    pub fn with_v0(mut self, v0: f64) -> Self {
        self.v0 = v0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.kf2 < 1 {
            return Err(Error::InvalidFermiRadius(self.kf2));
        }
        if self.s < 1 {
            return Err(Error::InvalidSystem("spin count s must be at least 1".into()));
        }
        if !self.v0.is_finite() {
            return Err(Error::InvalidSystem("v0 must be finite".into()));
        }
        self.potential.validate()
    }

    pub fn kf(&self) -> f64 {
        (self.kf2 as f64).sqrt()
    }

    /// κ = k_F⁻¹ in the mean-field regime, 1 otherwise.
    pub fn coupling_scale(&self) -> f64 {
        if self.mean_field {
            1.0 / self.kf()
        } else {
            1.0
        }
    }

    pub fn v_hat(&self, k: Momentum) -> f64 {
        if k.is_zero() {
            self.v0
        } else {
            self.potential.value(k)
        }
    }

    pub fn ball(&self) -> Result<FermiBall> {
        FermiBall::new(self.kf2)
    }

    /// 2⌈k_F⌉ plus the support radius of the potential (0 for infinite support).
    pub fn default_cutoff(&self) -> i64 {
        2 * ceil_sqrt(self.kf2) + self.potential.support_radius().unwrap_or(0)
    }
}
