//! Dense symmetric operators and their spectral calculus.

use faer::dyn_stack::{GlobalPodBuffer, PodStack};
use faer::linalg::evd::{self, ComputeVectors};
use faer::{Col, Mat, Parallelism};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quad::Quadrature;

#[derive(Clone, Debug, PartialEq)]
pub struct SymOp {
    m: DMatrix<f64>,
}

impl SymOp {
    /// Accepts `m` if it is symmetric to 1e−12 relative, then averages with its transpose.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension { expected: m.nrows(), found: m.ncols() });
        }
        let scale = m.amax();
        let asym = (&m - m.transpose()).amax();
        if asym > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidSystem(format!("matrix is not symmetric (asymmetry {asym:e})")));
        }
        Ok(Self::symmetrized(m))
    }

    pub fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        SymOp { m: (m + t) * 0.5 }
    }

    pub fn zeros(n: usize) -> Self {
        SymOp { m: DMatrix::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        SymOp { m: DMatrix::identity(n, n) }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        SymOp { m: DMatrix::from_diagonal(&DVector::from_column_slice(d)) }
    }

    /// g·w wᵀ.
    pub fn rank_one(w: &DVector<f64>, g: f64) -> Self {
        SymOp { m: w * w.transpose() * g }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn max_abs(&self) -> f64 {
        self.m.amax()
    }

    pub fn frobenius(&self) -> f64 {
        self.m.norm()
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn add(&self, o: &SymOp) -> SymOp {
        SymOp { m: &self.m + &o.m }
    }

    pub fn sub(&self, o: &SymOp) -> SymOp {
        SymOp { m: &self.m - &o.m }
    }

    pub fn scale(&self, a: f64) -> SymOp {
        SymOp { m: &self.m * a }
    }

    /// X A Xᵀ for a general square X.
    pub fn congruence(&self, x: &DMatrix<f64>) -> SymOp {
        SymOp::symmetrized(x * &self.m * x.transpose())
    }

    /// Eigendecomposition, always single-threaded so results do not depend on the thread pool.
    pub fn eigen(&self) -> Spectrum {
        let n = self.dim();
        let a = Mat::<f64>::from_fn(n, n, |i, j| self.m[(i, j)]);
        let mut s = Col::<f64>::zeros(n);
        let mut u = Mat::<f64>::zeros(n, n);
        let params = Default::default();
        let req = evd::compute_hermitian_evd_req::<f64>(n, ComputeVectors::Yes, Parallelism::None, params)
            .expect("workspace size fits in memory");
        evd::compute_hermitian_evd(
            a.as_ref(),
            s.as_mut(),
            Some(u.as_mut()),
            Parallelism::None,
            PodStack::new(&mut GlobalPodBuffer::new(req)),
            params,
        );
        Spectrum {
            values: DVector::from_fn(n, |i, _| s.read(i)),
            vectors: DMatrix::from_fn(n, n, |i, j| u.read(i, j)),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().values.min()
    }
}

/// A = V diag(values) Vᵀ.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl Spectrum {
    /// f(A); fails if f is not finite at some eigenvalue.
    pub fn apply<F: Fn(f64) -> f64>(&self, f: F) -> Result<SymOp> {
        let mut fv = self.values.clone();
        for x in fv.iter_mut() {
            let y = f(*x);
            if !y.is_finite() {
                return Err(Error::SpectralDomain { eigenvalue: *x });
            }
            *x = y;
        }
        let scaled = &self.vectors * DMatrix::from_diagonal(&fv);
        Ok(SymOp::symmetrized(scaled * self.vectors.transpose()))
    }
}

pub fn sym_func<F: Fn(f64) -> f64>(a: &SymOp, f: F) -> Result<SymOp> {
    a.eigen().apply(f)
}

/// (A + g P_w)⁻¹ from A⁻¹.
pub fn sherman_morrison(ainv: &SymOp, g: f64, w: &DVector<f64>) -> Result<SymOp> {
    if w.len() != ainv.dim() {
        return Err(Error::Dimension { expected: ainv.dim(), found: w.len() });
    }
    let y = ainv.matrix() * w;
    let denom = 1.0 + g * w.dot(&y);
    if denom.abs() <= 1e-12 {
        return Err(Error::SingularUpdate { denominator: denom });
    }
    Ok(ainv.sub(&SymOp::rank_one(&y, g / denom)))
}

/// (A + g P_w)^{1/2} through the resolvent integral representation.
pub fn rank_one_sqrt(a: &SymOp, g: f64, w: &DVector<f64>) -> Result<SymOp> {
    rank_one_sqrt_with(a, g, w, &Quadrature::default())
}

pub fn rank_one_sqrt_with(a: &SymOp, g: f64, w: &DVector<f64>, quad: &Quadrature) -> Result<SymOp> {
    let n = a.dim();
    if w.len() != n {
        return Err(Error::Dimension { expected: n, found: w.len() });
    }
    let perturbed_min = a.add(&SymOp::rank_one(w, g)).min_eigenvalue();
    if perturbed_min <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: perturbed_min });
    }
    let spec = a.eigen();
    let mu = spec.values.clone();
    if mu.min() <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: mu.min() });
    }
    let y = spec.vectors.transpose() * w;
    let scale = median(mu.as_slice()).sqrt();
    let denom = |t2: f64| 1.0 + g * (0..n).map(|k| y[k] * y[k] / (mu[k] + t2)).sum::<f64>();
    let mut corr = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            if y[i] == 0.0 || y[j] == 0.0 || g == 0.0 {
                continue;
            }
            let f = |t: f64| {
                let t2 = t * t;
                t2 * y[i] * y[j] / ((mu[i] + t2) * (mu[j] + t2) * denom(t2))
            };
            let v = quad.integrate_semi_infinite(f, scale)?.value * 2.0 * g / std::f64::consts::PI;
            corr[(i, j)] = v;
            corr[(j, i)] = v;
        }
    }
    let base = spec.apply(f64::sqrt)?;
    Ok(base.add(&SymOp { m: &spec.vectors * corr * spec.vectors.transpose() }))
}

/// (1/π)∫₀^∞ log(1 + g⟨w,(A+t²)⁻¹w⟩) dt, the trace shift of the perturbed square root.
pub fn rank_one_sqrt_trace_shift(a: &SymOp, g: f64, w: &DVector<f64>) -> Result<f64> {
    let spec = a.eigen();
    let mu = spec.values.clone();
    let y = spec.vectors.transpose() * w;
    let scale = median(mu.as_slice()).sqrt();
    let f = |t: f64| {
        let t2 = t * t;
        (g * (0..mu.len()).map(|k| y[k] * y[k] / (mu[k] + t2)).sum::<f64>()).ln_1p()
    };
    Ok(Quadrature::default().integrate_semi_infinite(f, scale)?.value / std::f64::consts::PI)
}

/// tr((diag(d) + g wwᵀ)^{1/2}) − Σ√d for d > 0, from the secular equation.
///
/// Equal poles are merged, then every root is bracketed between neighbouring poles and found
/// by bisection on its offset from the nearer one, so weak couplings keep full relative accuracy.
pub fn secular_sqrt_trace_shift(d: &[f64], w: &DVector<f64>, g: f64) -> Result<f64> {
    if w.len() != d.len() {
        return Err(Error::Dimension { expected: d.len(), found: w.len() });
    }
    if let Some(bad) = d.iter().find(|x| x.is_nan() || **x <= 0.0) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: *bad });
    }
    let mut pairs: Vec<(f64, f64)> = d.iter().zip(w.iter()).map(|(a, b)| (*a, b * b)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut poles: Vec<(f64, f64)> = Vec::new();
    for (di, zi) in pairs {
        match poles.last_mut() {
            Some(last) if last.0 == di => last.1 += zi,
            _ => poles.push((di, zi)),
        }
    }
    poles.retain(|p| p.1 > 0.0);
    if g == 0.0 || poles.is_empty() {
        return Ok(0.0);
    }
    let m = poles.len();
    let total: f64 = poles.iter().map(|p| p.1).sum();
    // f(o + δ) = 1 + g Σ z_i/((d_i − o) − δ), increasing in δ for g > 0, decreasing for g < 0
    let f = |o: f64, delta: f64| 1.0 + g * poles.iter().map(|(di, zi)| zi / ((di - o) - delta)).sum::<f64>();
    let mut shift = 0.0;
    for j in 0..m {
        let dj = poles[j].0;
        // root paired with pole j lies in (lo, hi)
        let (lo, hi) = if g > 0.0 {
            (dj, if j + 1 < m { poles[j + 1].0 } else { dj + g * total })
        } else {
            (if j > 0 { poles[j - 1].0 } else { (dj + g * total).max(0.0) }, dj)
        };
        let rising = g > 0.0;
        let both_poles = if g > 0.0 { j + 1 < m } else { j > 0 };
        let (origin, mut a, mut b) = if both_poles {
            // pick the half holding the root and measure from the pole bounding it
            let mid = 0.5 * (lo + hi);
            if (f(mid, 0.0) > 0.0) == rising {
                (lo, 0.0, mid - lo)
            } else {
                (hi, mid - hi, 0.0)
            }
        } else {
            (dj, lo - dj, hi - dj)
        };
        for _ in 0..200 {
            let c = 0.5 * (a + b);
            if c <= a || c >= b {
                break;
            }
            if (f(origin, c) > 0.0) == rising {
                b = c;
            } else {
                a = c;
            }
        }
        let delta = 0.5 * (a + b);
        let r = origin + delta;
        let r_minus_dj = (origin - dj) + delta;
        shift += r_minus_dj / (r.sqrt() + dj.sqrt());
    }
    Ok(shift)
}

pub(crate) fn median(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 1.0;
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_of_diagonal() {
        let a = SymOp::diagonal(&[4.0, 9.0]);
        let r = sym_func(&a, f64::sqrt).unwrap();
        assert!((r.get(0, 0) - 2.0).abs() < 1e-14);
        assert!((r.get(1, 1) - 3.0).abs() < 1e-14);
        assert!(r.get(0, 1).abs() < 1e-14);
    }

    #[test]
    fn log_of_nonpositive_fails() {
        let a = SymOp::diagonal(&[1.0, -2.0]);
        match sym_func(&a, f64::ln) {
            Err(Error::SpectralDomain { eigenvalue }) => assert_eq!(eigenvalue, -2.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sherman_morrison_zero_and_singular() {
        let ainv = SymOp::diagonal(&[1.0, 0.5]);
        let w = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(sherman_morrison(&ainv, 0.0, &w).unwrap(), ainv);
        // ⟨w, A⁻¹ w⟩ = 3, so g = −1/3 is singular
        assert!(matches!(sherman_morrison(&ainv, -1.0 / 3.0, &w), Err(Error::SingularUpdate { .. })));
    }

    #[test]
    fn asymmetric_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(SymOp::from_matrix(m).is_err());
    }

    fn dense_shift(d: &[f64], w: &DVector<f64>, g: f64) -> f64 {
        let n = d.len();
        let m = DMatrix::from_fn(n, n, |i, j| if i == j { d[i] } else { 0.0 }) + g * w * w.transpose();
        let ev = m.symmetric_eigen().eigenvalues;
        ev.iter().map(|x| x.sqrt()).sum::<f64>() - d.iter().map(|x| x.sqrt()).sum::<f64>()
    }

    #[test]
    fn secular_two_poles_oracle() {
        let lam = [6.5f64, 21.5];
        let v = [0.018820763925765704f64, 0.02008252450351093];
        let d: Vec<f64> = lam.iter().map(|l| l * l).collect();
        let w = DVector::from_fn(2, |i, _| lam[i].sqrt() * v[i]);
        let s = secular_sqrt_trace_shift(&d, &w, 2.0).unwrap();
        assert!((s - 7.575053080419034e-4).abs() < 1e-17, "{s:e}");
    }

    #[test]
    fn secular_matches_dense() {
        let d = [1.0, 4.0, 4.0, 9.0, 16.0, 25.0];
        let w = DVector::from_vec(vec![0.3, 0.2, 0.1, 0.0, 0.5, 0.4]);
        for g in [2.0, -2.0, 0.7] {
            let a = secular_sqrt_trace_shift(&d, &w, g).unwrap();
            let b = dense_shift(&d, &w, g);
            assert!((a - b).abs() < 1e-12, "g={g} {a} {b}");
        }
    }
}
