//! One-body Bogolubov kernels on ℓ²(L_k) and their element-wise bounds.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::{Lune, Momentum};
use crate::linalg::{median, secular_sqrt_trace_shift, Spectrum, SymOp};
use crate::quad::{log1p_minus_x, Quadrature};
use crate::system::FermiSystem;

/// Admissibility threshold on 1 − 2⟨v,h⁻¹v⟩.
pub const ADMISSIBILITY_EPS: f64 = 1e-12;

/// Sample times for the t-dependent bound families.
pub const BOUND_TIMES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Deliberate construction faults, used to exercise the verification suite.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Fault {
    #[default]
    None,
    /// Build K with the wrong overall sign.
    FlipKernelSign,
}

#[derive(Clone, Debug)]
pub struct KernelBundle {
    pub k: Momentum,
    pub points: Vec<Momentum>,
    pub lambdas: Vec<f64>,
    pub h: SymOp,
    pub v: DVector<f64>,
    /// sgn V̂_k, with V̂_k = 0 counted as +1.
    pub sign: f64,
    pub kernel: SymOp,
    pub etilde: SymOp,
    pub e: SymOp,
    pub u: DMatrix<f64>,
    pub admissible: bool,
    /// 1 − 2⟨v,h⁻¹v⟩.
    pub margin: f64,
    kernel_spec: Spectrum,
    inner_spec: Spectrum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub bound_name: String,
    /// Largest lhs − rhs over all entries (and sample times); negative means satisfied.
    pub max_violation: f64,
    pub worst_indices: (usize, usize),
    pub worst_t: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HsNorms {
    pub k_hs: f64,
    pub etilde_minus_h_hs: f64,
    /// min{2⟨v,hv⟩, ‖v‖⁴}.
    pub bound: f64,
    /// bound − ‖Ẽ − h‖²_HS.
    pub margin: f64,
}

/// Entry-wise v_k for a system: all components √(s|V̂_k|κ/(2(2π)³)).
pub fn coupling_vector(system: &FermiSystem, k: Momentum, dim: usize) -> (DVector<f64>, f64) {
    let vk = system.v_hat(k);
    let c = system.s as f64 * vk.abs() * system.coupling_scale() / (2.0 * (2.0 * PI).powi(3));
    let sign = if vk < 0.0 { -1.0 } else { 1.0 };
    (DVector::from_element(dim, c.sqrt()), sign)
}

pub fn build_kernel_bundle(system: &FermiSystem, k: Momentum) -> Result<KernelBundle> {
    build_kernel_bundle_with(system, k, Fault::None)
}

pub fn build_kernel_bundle_with(system: &FermiSystem, k: Momentum, fault: Fault) -> Result<KernelBundle> {
    let lune = Lune::new(system.kf2, k)?;
    let (v, sign) = coupling_vector(system, k, lune.len());
    KernelBundle::from_parts(k, lune.points().to_vec(), lune.lambdas(), v, sign, fault)
}

fn phi_exp(x: f64) -> f64 {
    if x.abs() < 1e-300 {
        1.0
    } else {
        x.exp_m1() / x
    }
}

impl KernelBundle {
    /// Kernel for h = diag(λ), P = sign·vvᵀ.
    pub fn from_parts(
        k: Momentum,
        points: Vec<Momentum>,
        lambdas: Vec<f64>,
        v: DVector<f64>,
        sign: f64,
        fault: Fault,
    ) -> Result<Self> {
        let n = lambdas.len();
        if v.len() != n {
            return Err(Error::Dimension { expected: n, found: v.len() });
        }
        if let Some(bad) = lambdas.iter().find(|l| l.is_nan() || **l <= 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: *bad });
        }
        let sign = if sign < 0.0 { -1.0 } else { 1.0 };
        let hinv_v: f64 = (0..n).map(|i| v[i] * v[i] / lambdas[i]).sum();
        let margin = 1.0 - 2.0 * hinv_v;
        let admissible = sign > 0.0 || margin > ADMISSIBILITY_EPS;
        if !admissible {
            return Err(Error::Inadmissible { k, margin });
        }
        let h = SymOp::diagonal(&lambdas);
        let sqrt_l: Vec<f64> = lambdas.iter().map(|l| l.sqrt()).collect();
        let w = DVector::from_fn(n, |i, _| sqrt_l[i] * v[i]);
        let inner = SymOp::diagonal(&lambdas.iter().map(|l| l * l).collect::<Vec<_>>())
            .add(&SymOp::rank_one(&w, 2.0 * sign));
        let inner_spec = inner.eigen();
        let etilde = inner_spec.apply(f64::sqrt)?;
        // h^{-1/2} Ẽ h^{-1/2}
        let m = DMatrix::from_fn(n, n, |i, j| etilde.get(i, j) / (sqrt_l[i] * sqrt_l[j]));
        let log_m = SymOp::symmetrized(m).eigen().apply(f64::ln)?;
        let kernel = match fault {
            Fault::None => log_m.scale(-0.5),
            Fault::FlipKernelSign => log_m.scale(0.5),
        };
        let kernel_spec = kernel.eigen();
        let e_minus = kernel_spec.apply(|x| (-x).exp())?;
        let e = h.congruence(e_minus.matrix());
        let quarter = inner_spec.apply(|x| x.sqrt().sqrt())?;
        let e_plus = kernel_spec.apply(f64::exp)?;
        let hinv_half = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / sqrt_l[i] } else { 0.0 });
        let u = quarter.matrix() * hinv_half * e_plus.matrix();
        Ok(KernelBundle {
            k,
            points,
            lambdas,
            h,
            v,
            sign,
            kernel,
            etilde,
            e,
            u,
            admissible,
            margin,
            kernel_spec,
            inner_spec,
        })
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn index_of(&self, p: &Momentum) -> Option<usize> {
        self.points.binary_search(p).ok()
    }

    /// ⟨v, h⁻¹ v⟩.
    pub fn hinv_v(&self) -> f64 {
        (0..self.dim()).map(|i| self.v[i] * self.v[i] / self.lambdas[i]).sum()
    }

    /// ⟨v, h^m v⟩.
    pub fn v_hpow_v(&self, m: i32) -> f64 {
        (0..self.dim()).map(|i| self.v[i] * self.v[i] * self.lambdas[i].powi(m)).sum()
    }

    /// P_v = vvᵀ.
    pub fn p_v(&self) -> SymOp {
        SymOp::rank_one(&self.v, 1.0)
    }

    /// P_k = sign·vvᵀ.
    pub fn p_signed(&self) -> SymOp {
        SymOp::rank_one(&self.v, self.sign)
    }

    pub fn kernel_function<F: Fn(f64) -> f64>(&self, f: F) -> SymOp {
        self.kernel_spec.apply(f).expect("entire functions of a finite symmetric matrix")
    }

    pub fn exp_tk(&self, t: f64) -> SymOp {
        self.kernel_function(|x| (t * x).exp())
    }

    /// (h² + 2P_{h^{1/2}v})^{1/4} = Ẽ^{1/2}.
    pub fn etilde_sqrt(&self) -> SymOp {
        self.inner_spec.apply(|x| x.sqrt().sqrt()).expect("spectrum checked at construction")
    }

    /// ‖e^K(h+2P)e^K − e^{−K}he^{−K}‖_max.
    pub fn diagonalization_residual(&self) -> f64 {
        let ep = self.exp_tk(1.0);
        let lhs = self.h.add(&self.p_signed().scale(2.0)).congruence(ep.matrix());
        (lhs.matrix() - self.e.matrix()).amax()
    }

    /// (A(t), B(t)) from their defining formula.
    pub fn interpolants(&self, t: f64) -> (SymOp, SymOp) {
        let ep = self.exp_tk(t);
        let em = self.exp_tk(-t);
        let first = self.h.add(&self.p_signed().scale(2.0)).congruence(ep.matrix());
        let second = self.h.congruence(em.matrix());
        let a = first.add(&second).scale(0.5).sub(&self.h);
        let b = first.sub(&second).scale(0.5);
        (a, b)
    }

    /// ∫₀¹ B(t) dt, exactly in the eigenbasis of K.
    pub fn integral_b(&self) -> SymOp {
        let vecs = &self.kernel_spec.vectors;
        let kap = &self.kernel_spec.values;
        let n = self.dim();
        let g = vecs.transpose() * self.h.add(&self.p_signed().scale(2.0)).matrix() * vecs;
        let hh = vecs.transpose() * self.h.matrix() * vecs;
        let mid = DMatrix::from_fn(n, n, |a, b| {
            let s = kap[a] + kap[b];
            0.5 * (g[(a, b)] * phi_exp(s) - hh[(a, b)] * phi_exp(-s))
        });
        SymOp::symmetrized(vecs * mid * vecs.transpose())
    }

    /// ∫₀¹ B(t) dt by the composite Simpson rule on `points` (odd) nodes.
    pub fn integral_b_composite(&self, points: usize) -> SymOp {
        let points = if points % 2 == 0 { points + 1 } else { points.max(3) };
        let hstep = 1.0 / (points - 1) as f64;
        let mut acc = SymOp::zeros(self.dim());
        for i in 0..points {
            let w = if i == 0 || i == points - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc = acc.add(&self.interpolants(i as f64 * hstep).1.scale(w));
        }
        acc.scale(hstep / 3.0)
    }

    /// tr(E − h − P) read off the diagonal of the assembled E.
    pub fn trace_via_e(&self) -> f64 {
        let n = self.dim();
        (0..n).map(|i| self.e.get(i, i) - self.lambdas[i]).sum::<f64>() - self.sign * self.v.norm_squared()
    }

    /// (tr(E − h − P), (1/π)∫F(2·sign·⟨v,h(h²+t²)⁻¹v⟩)dt).
    ///
    /// The left side uses tr E = tr Ẽ and the secular roots of Ẽ² = h² + 2·sign·wwᵀ.
    pub fn trace_formula_check(&self) -> Result<(f64, f64)> {
        let n = self.dim();
        let sq: Vec<f64> = self.lambdas.iter().map(|l| l * l).collect();
        let w = DVector::from_fn(n, |i, _| self.lambdas[i].sqrt() * self.v[i]);
        let lhs = secular_sqrt_trace_shift(&sq, &w, 2.0 * self.sign)? - self.sign * self.v.norm_squared();
        let lam = self.lambdas.clone();
        let v2: Vec<f64> = self.v.iter().map(|x| x * x).collect();
        let sign = self.sign;
        let f = |t: f64| {
            let t2 = t * t;
            let x: f64 = (0..lam.len()).map(|i| v2[i] * lam[i] / (lam[i] * lam[i] + t2)).sum();
            log1p_minus_x(2.0 * sign * x)
        };
        let rhs = Quadrature::default().integrate_semi_infinite(f, median(&self.lambdas))?.value / PI;
        Ok((lhs, rhs))
    }

    pub fn hs_norms(&self) -> HsNorms {
        let d = self.etilde.sub(&self.h).frobenius();
        let nv = self.v.norm_squared();
        let bound = (2.0 * self.v_hpow_v(1)).min(nv * nv);
        HsNorms { k_hs: self.kernel.frobenius(), etilde_minus_h_hs: d, bound, margin: bound - d * d }
    }

    /// max |eig(E) − eig(Ẽ)| / max |eig|.
    pub fn isospectral_deviation(&self) -> f64 {
        let mut a: Vec<f64> = self.e.eigen().values.iter().copied().collect();
        let mut b: Vec<f64> = self.inner_spec.values.iter().map(|x| x.sqrt()).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale.max(f64::MIN_POSITIVE)
    }

    /// ‖U E Uᵀ − Ẽ‖_max.
    pub fn conjugation_residual(&self) -> f64 {
        (&self.u * self.e.matrix() * self.u.transpose() - self.etilde.matrix()).amax()
    }

    /// ‖U Uᵀ − 1‖_max.
    pub fn orthogonality_residual(&self) -> f64 {
        let n = self.dim();
        (&self.u * self.u.transpose() - DMatrix::<f64>::identity(n, n)).amax()
    }

    /// Smallest eigenvalue of Ẽ − h.
    pub fn ordering_min_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        self.etilde.sub(&self.h).min_eigenvalue()
    }

    /// Smallest entry of −K (repulsive) or K (attractive).
    pub fn sign_structure_min(&self) -> f64 {
        let k = self.kernel.matrix();
        let s = -self.sign;
        k.iter().fold(f64::INFINITY, |m, x| m.min(s * x))
    }

    /// Every element-wise inequality family, as maximal signed violations.
    pub fn verify_element_bounds(&self) -> Vec<BoundReport> {
        let n = self.dim();
        let nn = self.hinv_v();
        let lam = &self.lambdas;
        let v = &self.v;
        let c = |i: usize, j: usize| v[i] * v[j];
        let r = |i: usize, j: usize| v[i] * v[j] / (lam[i] + lam[j]);
        let mut acc = Acc::default();
        let id = DMatrix::<f64>::identity(n, n);
        let kmat = self.kernel.matrix();
        let pv = self.p_v();

        if self.sign > 0.0 {
            let em2 = self.kernel_function(|x| (-2.0 * x).exp());
            let ep2 = self.kernel_function(|x| (2.0 * x).exp());
            let sh2 = self.kernel_function(|x| (-2.0 * x).sinh());
            let ch2 = self.kernel_function(|x| (-2.0 * x).cosh() - 1.0);
            let lo2 = 2.0 / (1.0 + 2.0 * nn);
            for i in 0..n {
                for j in 0..n {
                    let x = em2.get(i, j) - id[(i, j)];
                    let y = id[(i, j)] - ep2.get(i, j);
                    acc.lower("e^{-2K}-1 lower", lo2 * r(i, j), x, i, j, None);
                    acc.upper("e^{-2K}-1 upper", x, 2.0 * r(i, j), i, j, None);
                    acc.lower("1-e^{2K} lower", lo2 * r(i, j), y, i, j, None);
                    acc.upper("1-e^{2K} upper", y, 2.0 * r(i, j), i, j, None);
                    acc.upper("sinh(-2K) upper", sh2.get(i, j), 2.0 * r(i, j), i, j, None);
                    acc.upper("cosh(-2K)-1 upper", ch2.get(i, j), 2.0 * nn / (1.0 + 2.0 * nn) * r(i, j), i, j, None);
                    acc.lower("-K lower", r(i, j) / (1.0 + 2.0 * nn), -kmat[(i, j)], i, j, None);
                    acc.upper("-K upper", -kmat[(i, j)], r(i, j), i, j, None);
                }
            }
            for &t in &BOUND_TIMES {
                let s = self.kernel_function(|x| (-t * x).sinh());
                let ch = self.kernel_function(|x| (-t * x).cosh());
                let e = self.exp_tk(t);
                let epe = pv.congruence(e.matrix());
                let ah = self.h.congruence(ch.matrix()).add(&self.h.congruence(s.matrix())).sub(&self.h);
                let shc = s.matrix() * self.h.matrix() * ch.matrix();
                let bh = -(&shc + shc.transpose()) + pv.matrix() * t;
                let (a, b) = self.interpolants(t);
                let kb = kmat * b.matrix() + b.matrix() * kmat;
                let ts = Some(t);
                for i in 0..n {
                    for j in 0..n {
                        let cm1 = ch.get(i, j) - id[(i, j)];
                        acc.lower("sinh(-tK) lower", r(i, j) * t / (1.0 + 2.0 * nn), s.get(i, j), i, j, ts);
                        acc.upper("sinh(-tK) upper", s.get(i, j), r(i, j) * t, i, j, ts);
                        acc.lower("cosh(-tK)-1 lower", 0.0, cm1, i, j, ts);
                        acc.upper("cosh(-tK)-1 upper", cm1, nn / (1.0 + 2.0 * nn) * r(i, j), i, j, ts);
                        acc.upper("|e^{tK}-1|", (e.get(i, j) - id[(i, j)]).abs(), r(i, j), i, j, ts);
                        acc.upper("|e^{tK}Pe^{tK}-P|", (epe.get(i, j) - pv.get(i, j)).abs(), (2.0 + nn) * nn * c(i, j), i, j, ts);
                        acc.upper("|A_h(t)|", ah.get(i, j).abs(), 4.0 * nn * c(i, j), i, j, ts);
                        acc.upper("|B_h(t)|", bh[(i, j)].abs(), 4.0 * nn * c(i, j), i, j, ts);
                        let ab = 3.0 * (1.0 + nn).powi(2) * c(i, j);
                        acc.upper("|A(t)|", a.get(i, j).abs(), ab, i, j, ts);
                        acc.upper("|B(t)|", b.get(i, j).abs(), ab, i, j, ts);
                        acc.upper("|{K,B(t)}|", kb[(i, j)].abs(), 6.0 * (1.0 + nn).powi(2) * nn * c(i, j), i, j, ts);
                    }
                }
            }
            let ib = self.integral_b();
            let umat = &self.u;
            let q = self.etilde_sqrt();
            for i in 0..n {
                for j in 0..n {
                    acc.upper("|int B - P/2|", (ib.get(i, j) - 0.5 * c(i, j)).abs(), (6.0 + nn) * nn * c(i, j), i, j, None);
                    let ub = 3.0 * (1.0 + nn) * r(i, j);
                    acc.upper("|U-1|", (umat[(i, j)] - id[(i, j)]).abs(), ub, i, j, None);
                    acc.upper("|U^T-1|", (umat[(j, i)] - id[(i, j)]).abs(), ub, i, j, None);
                    let hq = if i == j { lam[i].sqrt() } else { 0.0 };
                    let (si, sj) = (lam[i].sqrt(), lam[j].sqrt());
                    acc.upper("|Etilde^{1/2}-h^{1/2}|", (q.get(i, j) - hq).abs(), 2.0 * si * sj / (si + sj) * r(i, j), i, j, None);
                }
            }
        } else {
            let w = 1.0 - 2.0 * nn;
            let em2 = self.kernel_function(|x| (-2.0 * x).exp());
            let ep2 = self.kernel_function(|x| (2.0 * x).exp());
            let sh2 = self.kernel_function(|x| (2.0 * x).sinh());
            let ch2 = self.kernel_function(|x| (2.0 * x).cosh() - 1.0);
            for i in 0..n {
                for j in 0..n {
                    let x = id[(i, j)] - em2.get(i, j);
                    let y = ep2.get(i, j) - id[(i, j)];
                    acc.lower("attractive 1-e^{-2K} lower", 2.0 * r(i, j), x, i, j, None);
                    acc.upper("attractive 1-e^{-2K} upper", x, 2.0 / w * r(i, j), i, j, None);
                    acc.lower("attractive e^{2K}-1 lower", 2.0 * r(i, j), y, i, j, None);
                    acc.upper("attractive e^{2K}-1 upper", y, 2.0 / w * r(i, j), i, j, None);
                    acc.upper("attractive sinh(2K) upper", sh2.get(i, j), 2.0 / w * r(i, j), i, j, None);
                    acc.upper("attractive cosh(2K)-1 upper", ch2.get(i, j), 1f64.min(2.0 * nn) / w * r(i, j), i, j, None);
                    acc.lower("attractive K lower", r(i, j), kmat[(i, j)], i, j, None);
                    acc.upper("attractive K upper", kmat[(i, j)], r(i, j) / w, i, j, None);
                }
            }
            for &t in &BOUND_TIMES {
                let s = self.kernel_function(|x| (t * x).sinh());
                let ch = self.kernel_function(|x| (t * x).cosh());
                let e = self.exp_tk(t);
                let epe = pv.congruence(e.matrix());
                let ah = self.h.congruence(ch.matrix()).add(&self.h.congruence(s.matrix())).sub(&self.h);
                let shc = s.matrix() * self.h.matrix() * ch.matrix();
                let bh = &shc + shc.transpose() - pv.matrix() * t;
                let (a, b) = self.interpolants(t);
                let kb = kmat * b.matrix() + b.matrix() * kmat;
                let ts = Some(t);
                for i in 0..n {
                    for j in 0..n {
                        let cm1 = ch.get(i, j) - id[(i, j)];
                        let em1 = e.get(i, j) - id[(i, j)];
                        acc.lower("attractive sinh(tK) lower", r(i, j) * t, s.get(i, j), i, j, ts);
                        acc.upper("attractive sinh(tK) upper", s.get(i, j), r(i, j) * t / w, i, j, ts);
                        acc.lower("attractive cosh(tK)-1 lower", 0.0, cm1, i, j, ts);
                        acc.upper("attractive cosh(tK)-1 upper", cm1, 1f64.min(nn) / w * r(i, j), i, j, ts);
                        acc.lower("attractive e^{tK}-1 lower", 0.0, em1, i, j, ts);
                        acc.upper("attractive e^{tK}-1 upper", em1, r(i, j) / w, i, j, ts);
                        acc.upper(
                            "attractive |e^{tK}Pe^{tK}-P|",
                            (epe.get(i, j) - pv.get(i, j)).abs(),
                            (2.0 + nn) * nn / (w * w) * c(i, j),
                            i,
                            j,
                            ts,
                        );
                        acc.upper("attractive |A_h(t)|", ah.get(i, j).abs(), 4.0 * nn / (w * w) * c(i, j), i, j, ts);
                        acc.upper("attractive |B_h(t)|", bh[(i, j)].abs(), 4.0 * nn / (w * w) * c(i, j), i, j, ts);
                        let ab = 3.0 * ((1.0 + nn) / w).powi(2) * c(i, j);
                        acc.upper("attractive |A(t)|", a.get(i, j).abs(), ab, i, j, ts);
                        acc.upper("attractive |B(t)|", b.get(i, j).abs(), ab, i, j, ts);
                        acc.upper("attractive |{K,B(t)}|", kb[(i, j)].abs(), (6.0 + nn) * nn / w.powi(3) * c(i, j), i, j, ts);
                    }
                }
            }
            let ib = self.integral_b();
            for i in 0..n {
                for j in 0..n {
                    acc.upper(
                        "attractive |int B + P/2|",
                        (ib.get(i, j) + 0.5 * c(i, j)).abs(),
                        (6.0 + nn) * nn / (w * w) * c(i, j),
                        i,
                        j,
                        None,
                    );
                }
            }
        }
        acc.reports
    }
}

/// ⟨e_p, K_k e_q⟩ = ⟨e_{−p}, K_{−k} e_{−q}⟩, as a max-norm residual.
pub fn reflection_residual(bk: &KernelBundle, bmk: &KernelBundle) -> Result<f64> {
    if bk.dim() != bmk.dim() {
        return Err(Error::Dimension { expected: bk.dim(), found: bmk.dim() });
    }
    let mut worst = 0.0f64;
    for (i, p) in bk.points.iter().enumerate() {
        let ii = bmk.index_of(&-*p).ok_or(Error::NotInLune { k: bmk.k, p: -*p })?;
        for (j, q) in bk.points.iter().enumerate() {
            let jj = bmk.index_of(&-*q).ok_or(Error::NotInLune { k: bmk.k, p: -*q })?;
            worst = worst.max((bk.kernel.get(i, j) - bmk.kernel.get(ii, jj)).abs());
        }
    }
    Ok(worst)
}

#[derive(Default)]
struct Acc {
    reports: Vec<BoundReport>,
}

impl Acc {
    fn record(&mut self, name: &str, viol: f64, i: usize, j: usize, t: Option<f64>) {
        let rep = match self.reports.iter_mut().find(|r| r.bound_name == name) {
            Some(r) => r,
            None => {
                self.reports.push(BoundReport {
                    bound_name: name.to_string(),
                    max_violation: f64::NEG_INFINITY,
                    worst_indices: (0, 0),
                    worst_t: None,
                });
                self.reports.last_mut().unwrap()
            }
        };
        if viol > rep.max_violation || viol.is_nan() {
            rep.max_violation = viol;
            rep.worst_indices = (i, j);
            rep.worst_t = t;
        }
    }

    /// lhs ≤ rhs.
    fn upper(&mut self, name: &str, lhs: f64, rhs: f64, i: usize, j: usize, t: Option<f64>) {
        self.record(name, lhs - rhs, i, j, t);
    }

    /// lo ≤ x.
    fn lower(&mut self, name: &str, lo: f64, x: f64, i: usize, j: usize, t: Option<f64>) {
        self.record(name, lo - x, i, j, t);
    }
}

/// Synthetic instance: 2λ drawn from the integers 1..=60, v > 0 at a random scale.
///
/// For `sign < 0` the coupling is rescaled so that 2⟨v,h⁻¹v⟩ lies in [0.05, 0.9].
pub fn random_instance<R: Rng>(rng: &mut R, dim: usize, sign: f64, fault: Fault) -> Result<KernelBundle> {
    let lambdas: Vec<f64> = (0..dim).map(|_| rng.gen_range(1..=60) as f64 * 0.5).collect();
    let scale = 10f64.powf(rng.gen_range(-2.0..0.5));
    let mut v = DVector::from_fn(dim, |_, _| scale * rng.gen_range(0.2..1.0));
    if sign < 0.0 {
        let n: f64 = (0..dim).map(|i| v[i] * v[i] / lambdas[i]).sum();
        v *= (rng.gen_range(0.05..0.9) / (2.0 * n)).sqrt();
    }
    KernelBundle::from_parts(Momentum::new(1, 0, 0), Vec::new(), lambdas, v, sign, fault)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::Potential;

    fn bundle(sign: f64, scale: f64) -> KernelBundle {
        let lam = vec![0.5, 0.5, 1.5, 2.0, 3.5];
        let v = DVector::from_vec(vec![0.3, 0.1, 0.25, 0.4, 0.2]) * scale;
        KernelBundle::from_parts(Momentum::new(1, 0, 0), Vec::new(), lam, v, sign, Fault::None).unwrap()
    }

    #[test]
    fn zero_potential_is_trivial() {
        let sys = FermiSystem::new(4, 1, Potential::Zero, true).unwrap();
        let b = build_kernel_bundle(&sys, Momentum::new(1, 0, 0)).unwrap();
        assert!(b.kernel.max_abs() < 1e-14);
        assert!(b.etilde.sub(&b.h).max_abs() < 1e-12);
        assert!(b.orthogonality_residual() < 1e-12);
        let (l, r) = b.trace_formula_check().unwrap();
        assert_eq!((l.abs() < 1e-12, r), (true, 0.0));
        for r in b.verify_element_bounds() {
            assert!(r.max_violation <= 1e-12, "{r:?}");
        }
    }

    #[test]
    fn interpolant_endpoints() {
        let b = bundle(1.0, 1.0);
        let (a0, b0) = b.interpolants(0.0);
        let p = b.p_signed();
        assert!(a0.sub(&p).max_abs() < 1e-13);
        assert!(b0.sub(&p).max_abs() < 1e-13);
        assert!(b.interpolants(1.0).1.max_abs() <= 1e-9 * b.h.max_abs());
    }

    #[test]
    fn exact_and_composite_integrals_agree() {
        for sign in [1.0, -1.0] {
            let b = bundle(sign, 0.8);
            let d = b.integral_b().sub(&b.integral_b_composite(201)).max_abs();
            assert!(d < 1e-9, "{d}");
        }
    }

    #[test]
    fn fault_breaks_diagonalization() {
        let lam = vec![0.5, 1.5, 2.5];
        let v = DVector::from_vec(vec![0.4, 0.3, 0.2]);
        let good = KernelBundle::from_parts(Momentum::new(1, 0, 0), Vec::new(), lam.clone(), v.clone(), 1.0, Fault::None).unwrap();
        let bad = KernelBundle::from_parts(Momentum::new(1, 0, 0), Vec::new(), lam, v, 1.0, Fault::FlipKernelSign).unwrap();
        assert!(good.diagonalization_residual() < 1e-12);
        assert!(bad.diagonalization_residual() > 1e-3);
    }

    #[test]
    fn inadmissible_attractive_rejected() {
        let lam = vec![0.5, 1.0];
        // 2⟨v,h⁻¹v⟩ = 2(0.25/0.5 + 0.25) = 1.5
        let v = DVector::from_vec(vec![0.5, 0.5]);
        match KernelBundle::from_parts(Momentum::new(1, 0, 0), Vec::new(), lam, v, -1.0, Fault::None) {
            Err(Error::Inadmissible { margin, .. }) => assert!((margin + 0.5).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }
}
