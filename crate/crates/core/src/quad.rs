//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err: f64,
    pub panels: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct Quadrature {
    pub rtol: f64,
    pub max_panels: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature { rtol: 1e-10, max_panels: 4000 }
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    abs: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err).then(o.a.total_cmp(&self.a))
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut abs = (fc * WGK[7]).abs();
    for j in 0..7 {
        let x = h * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        k += WGK[j] * (f1 + f2);
        abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    Panel { a, b, value: k * h, err: ((k - g) * h).abs(), abs: abs * h.abs() }
}

impl Quadrature {
    pub fn with_rtol(rtol: f64) -> Self {
        Quadrature { rtol, ..Default::default() }
    }

    /// ∫_a^b f on a finite interval.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<QuadResult> {
        let first = kronrod(&f, a, b);
        let mut value = first.value;
        let mut err = first.err;
        let mut abs = first.abs;
        let mut heap = BinaryHeap::new();
        heap.push(first);
        let mut panels = 1;
        loop {
            if !value.is_finite() || !err.is_finite() {
                return Err(Error::Quadrature { achieved: f64::INFINITY, target: self.rtol });
            }
            let tol = (self.rtol * value.abs()).max(64.0 * f64::EPSILON * abs);
            if err <= tol {
                return Ok(QuadResult { value, abs_err: err, panels });
            }
            if panels >= self.max_panels {
                return Err(Error::Quadrature { achieved: err / value.abs().max(f64::MIN_POSITIVE), target: self.rtol });
            }
            let worst = heap.pop().expect("heap holds every panel");
            let mid = 0.5 * (worst.a + worst.b);
            let left = kronrod(&f, worst.a, mid);
            let right = kronrod(&f, mid, worst.b);
            value += left.value + right.value - worst.value;
            err += left.err + right.err - worst.err;
            abs += left.abs + right.abs - worst.abs;
            heap.push(left);
            heap.push(right);
            panels += 1;
            if panels % 64 == 0 {
                // resum to shed drift from the running updates
                value = heap.iter().map(|p| p.value).sum();
                err = heap.iter().map(|p| p.err).sum();
                abs = heap.iter().map(|p| p.abs).sum();
            }
        }
    }

    /// ∫_0^∞ f via t = scale·u/(1−u).
    pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(&self, f: F, scale: f64) -> Result<QuadResult> {
        let g = |u: f64| {
            let w = 1.0 - u;
            let t = scale * u / w;
            f(t) * scale / (w * w)
        };
        self.integrate(g, 0.0, 1.0)
    }
}

/// F(x) = log(1+x) − x with a series branch near zero.
pub fn log1p_minus_x(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        x * x * (-0.5 + x * (1.0 / 3.0 - 0.25 * x))
    } else {
        x.ln_1p() - x
    }
}
