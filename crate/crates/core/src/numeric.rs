//! Log-magnitude arithmetic and compensated accumulation.
//!
//! Density prefactors and series terms routinely leave the range of `f64`
//! (Γ ratios, `exp(-R tr Ω)`, high zonal degrees), so values travel as a
//! natural-log magnitude plus a sign until the final answer is formed.

use serde::{Deserialize, Serialize};

/// A real number stored as `sign * exp(ln_abs)`.
///
/// Zero is represented with `sign == 0` and `ln_abs == -inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogSign {
    pub ln_abs: f64,
    pub sign: i8,
}

impl LogSign {
    pub const ZERO: LogSign = LogSign { ln_abs: f64::NEG_INFINITY, sign: 0 };
    pub const ONE: LogSign = LogSign { ln_abs: 0.0, sign: 1 };

    pub fn new(ln_abs: f64, sign: i8) -> Self {
        if sign == 0 || ln_abs == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self { ln_abs, sign: sign.signum() }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            Self { ln_abs: x.abs().ln(), sign: if x > 0.0 { 1 } else { -1 } }
        }
    }

    pub fn positive(ln_abs: f64) -> Self {
        Self::new(ln_abs, 1)
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn to_f64(self) -> f64 {
        if self.sign == 0 {
            0.0
        } else {
            f64::from(self.sign) * self.ln_abs.exp()
        }
    }

    pub fn scale_ln(self, ln_factor: f64) -> LogSign {
        LogSign::new(self.ln_abs + ln_factor, self.sign)
    }
}

impl std::ops::Mul for LogSign {
    type Output = LogSign;

    fn mul(self, other: LogSign) -> LogSign {
        LogSign::new(self.ln_abs + other.ln_abs, self.sign * other.sign)
    }
}

impl std::ops::Div for LogSign {
    type Output = LogSign;

    fn div(self, other: LogSign) -> LogSign {
        assert!(other.sign != 0, "division by zero in log-sign arithmetic");
        LogSign::new(self.ln_abs - other.ln_abs, self.sign * other.sign)
    }
}

impl std::ops::Neg for LogSign {
    type Output = LogSign;

    fn neg(self) -> LogSign {
        LogSign::new(self.ln_abs, -self.sign)
    }
}

/// Neumaier-compensated sum of `f64` values.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    fn scale(&mut self, factor: f64) {
        self.sum *= factor;
        self.comp *= factor;
    }
}

/// Compensated accumulator over [`LogSign`] terms.
///
/// Terms are summed in units of `exp(scale)`, where `scale` tracks the
/// largest magnitude seen so far, so the running sum never overflows.
#[derive(Debug, Clone, Copy)]
pub struct LogAccumulator {
    scale: f64,
    sum: CompensatedSum,
    abs_sum: CompensatedSum,
}

impl Default for LogAccumulator {
    fn default() -> Self {
        Self { scale: f64::NEG_INFINITY, sum: CompensatedSum::new(), abs_sum: CompensatedSum::new() }
    }
}

impl LogAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, term: LogSign) {
        if term.is_zero() {
            return;
        }
        if term.ln_abs > self.scale {
            if self.scale.is_finite() {
                let factor = (self.scale - term.ln_abs).exp();
                self.sum.scale(factor);
                self.abs_sum.scale(factor);
            }
            self.scale = term.ln_abs;
        }
        let rel = (term.ln_abs - self.scale).exp();
        self.sum.add(f64::from(term.sign) * rel);
        self.abs_sum.add(rel);
    }

    pub fn value(&self) -> LogSign {
        if !self.scale.is_finite() {
            return LogSign::ZERO;
        }
        LogSign::from_f64(self.sum.value()).scale_ln(self.scale)
    }

    /// Sum of absolute values of all added terms.
    pub fn abs_total(&self) -> LogSign {
        if !self.scale.is_finite() {
            return LogSign::ZERO;
        }
        LogSign::from_f64(self.abs_sum.value()).scale_ln(self.scale)
    }
}

/// `ln(exp(a) + exp(b))` without overflow.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GAUSS7_WEIGHTS: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// One 15-point Kronrod panel on `[a, b]`: `(estimate, |K15 - G7|)`.
pub fn gauss_kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = GK_WEIGHTS[7] * fc;
    let mut gauss = GAUSS7_WEIGHTS[3] * fc;
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let s = f(c - dx) + f(c + dx);
        kronrod += GK_WEIGHTS[i] * s;
        if i % 2 == 1 {
            gauss += GAUSS7_WEIGHTS[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod quadrature over `[a, b]`.
///
/// Bisects the panel with the largest error estimate until the summed
/// estimate falls below `max(abs_tol, rel_tol * |integral|)`. Returns
/// `(integral, error_estimate)`, or `None` when `max_panels` is exhausted.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Option<(f64, f64)> {
    let (v, e) = gauss_kronrod15(&mut f, a, b);
    let mut panels = vec![(a, b, v, e)];
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if !total.is_finite() || !err.is_finite() {
            return None;
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Some((total, err));
        }
        if panels.len() >= max_panels {
            return None;
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("at least one panel");
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gauss_kronrod15(&mut f, lo, mid);
        let (v2, e2) = gauss_kronrod15(&mut f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulator_handles_huge_magnitudes() {
        let mut acc = LogAccumulator::new();
        acc.add(LogSign::positive(800.0));
        acc.add(LogSign::new(800.0 + 2f64.ln(), -1));
        let v = acc.value();
        assert_eq!(v.sign, -1);
        assert!((v.ln_abs - 800.0).abs() < 1e-12);
        let a = acc.abs_total();
        assert!((a.ln_abs - (800.0 + 3f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn compensated_sum_recovers_small_addends() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        s.add(1.0);
        s.add(-1e16);
        assert_eq!(s.value(), 1.0);
    }

    #[test]
    fn kronrod_integrates_smooth_functions() {
        let (v, _) = integrate_adaptive(|x| x.exp(), 0.0, 1.0, 1e-14, 0.0, 50).unwrap();
        assert!((v - (std::f64::consts::E - 1.0)).abs() < 1e-14);
        let (v, _) = integrate_adaptive(|x| x.sqrt(), 0.0, 4.0, 1e-12, 0.0, 200).unwrap();
        assert!((v - 16.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn zero_round_trip() {
        assert!(LogSign::from_f64(0.0).is_zero());
        assert_eq!(LogSign::ZERO.to_f64(), 0.0);
        assert_eq!(LogSign::from_f64(-3.5).to_f64(), -3.5);
    }
}
