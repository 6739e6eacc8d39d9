use crate::lattice::Momentum;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("kF2 must be a positive integer, got {0}")]
    InvalidFermiRadius(i64),
    #[error("the lune is undefined for k = 0")]
    ZeroMomentum,
    #[error("generators rejected: {0}")]
    InvalidGenerators(String),
    #[error("exponent beta = {0} is outside the supported range")]
    InvalidBeta(f64),
    #[error("|k| = {k_norm} is not below 2 kF = {two_kf}; the two-piece continuum formula does not apply")]
    ContinuumRegime { k_norm: f64, two_kf: f64 },
    #[error("spectral function undefined at eigenvalue {eigenvalue:e}")]
    SpectralDomain { eigenvalue: f64 },
    #[error("singular rank-one update: 1 + g<w, A^-1 w> = {denominator:e}")]
    SingularUpdate { denominator: f64 },
    #[error("operator is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("quadrature did not converge: achieved {achieved:e}, target {target:e}")]
    Quadrature { achieved: f64, target: f64 },
    #[error("attractive mode k = {k} is inadmissible: 1 - 2<v,h^-1 v> = {margin:e}")]
    Inadmissible { k: Momentum, margin: f64 },
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("the plasmon module needs the unscaled regime (mean_field = false)")]
    ScaledRegime,
    #[error("potential value at k = {k} is negative ({value:e}); a repulsive mode is required here")]
    NegativePotential { k: Momentum, value: f64 },
    #[error("eigensolver did not converge after {iterations} iterations")]
    Eigensolver { iterations: usize },
    #[error("mode ({p}, spin {spin}) is not in the universe")]
    UnknownMode { p: Momentum, spin: usize },
    #[error("p = {p} is not in the lune of k = {k}")]
    NotInLune { k: Momentum, p: Momentum },
    #[error("mode universe has {0} modes; at most 64 are supported")]
    UniverseTooLarge(usize),
    #[error("support closure incomplete: {0}")]
    Closure(String),
    #[error("no kernel bundle supplied for k = {0}")]
    MissingBundle(Momentum),
    #[error("configuration with {found} particles, expected {expected}")]
    ParticleNumber { expected: usize, found: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
