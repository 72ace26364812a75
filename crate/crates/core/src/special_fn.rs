//! Integer partitions and the scalar special functions used by every series
//! term: log-gamma with sign, generalized Pochhammer symbols, the multivariate
//! gamma function and the chi-square survival function.

use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::numeric::LogSign;

/// An integer partition with parts in non-increasing order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Partition {
    parts: Vec<u32>,
}

impl Partition {
    /// Builds a partition, dropping zero parts. Fails unless the parts are
    /// non-increasing.
    pub fn new(parts: Vec<u32>) -> Result<Self> {
        let parts: Vec<u32> = parts.into_iter().filter(|&p| p > 0).collect();
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(domain(format!("partition parts must be non-increasing: {parts:?}")));
        }
        Ok(Self { parts })
    }

    pub fn empty() -> Self {
        Self { parts: Vec::new() }
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    pub fn weight(&self) -> u32 {
        self.parts.iter().sum()
    }

    /// Number of non-zero parts.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Part `i` (0-based), zero past the end.
    pub fn part(&self, i: usize) -> u32 {
        self.parts.get(i).copied().unwrap_or(0)
    }

    /// Length of column `j` (0-based) of the Young diagram.
    pub fn conjugate_part(&self, j: u32) -> u32 {
        self.parts.iter().take_while(|&&p| p > j).count() as u32
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// All partitions of `weight` with at most `max_parts` parts, in reverse
/// lexicographic order. Weight zero yields the single empty partition.
pub fn enumerate_partitions(weight: u32, max_parts: usize) -> Vec<Partition> {
    assert!(max_parts >= 1, "max_parts must be at least 1");
    let mut out = Vec::new();
    let mut current = Vec::new();
    fill_partitions(weight, weight, max_parts, &mut current, &mut out);
    out
}

fn fill_partitions(remaining: u32, cap: u32, slots: usize, current: &mut Vec<u32>, out: &mut Vec<Partition>) {
    if remaining == 0 {
        out.push(Partition { parts: current.clone() });
        return;
    }
    if slots == 0 {
        return;
    }
    let mut first = remaining.min(cap);
    while first >= 1 {
        // The remaining slots must be able to absorb what is left.
        if u64::from(first) * slots as u64 >= u64::from(remaining) {
            current.push(first);
            fill_partitions(remaining - first, first, slots - 1, current, out);
            current.pop();
        } else {
            break;
        }
        first -= 1;
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln|Γ(x)|` together with the sign of `Γ(x)`.
///
/// Non-positive integers are poles and return a domain error.
pub fn ln_gamma_signed(x: f64) -> Result<(f64, i8)> {
    if !x.is_finite() {
        return Err(domain(format!("gamma argument {x} is not finite")));
    }
    if x <= 0.0 && x == x.floor() {
        return Err(domain(format!("gamma pole at {x}")));
    }
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx).
        let s = sin_pi(x);
        let (lg, _) = ln_gamma_signed(1.0 - x)?;
        let sign = if s > 0.0 { 1 } else { -1 };
        return Ok((PI.ln() - s.abs().ln() - lg, sign));
    }
    Ok((ln_gamma_lanczos(x), 1))
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    ln_gamma_lanczos(x)
}

fn ln_gamma_lanczos(x: f64) -> f64 {
    let x = x - 1.0;
    let mut a = LANCZOS_COEF[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn sin_pi(x: f64) -> f64 {
    // Reduce to [-1, 1) before multiplying by π to keep the zeros exact.
    let r = x - 2.0 * (x / 2.0).floor();
    let r = if r >= 1.0 { r - 2.0 } else { r };
    (PI * r).sin()
}

/// `ln(n!)`; exact products up to `170!`, so `ln 0! = ln 1! = 0` exactly.
pub fn ln_factorial(n: u32) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut prod = 1.0f64;
        (0..=170u32)
            .map(|k| {
                if k > 1 {
                    prod *= f64::from(k);
                }
                prod.ln()
            })
            .collect()
    });
    match table.get(n as usize) {
        Some(v) => *v,
        None => ln_gamma(f64::from(n) + 1.0),
    }
}

/// Rising factorial `(a)_f = a (a+1) ... (a+f-1)` in log-sign form.
pub fn rising_factorial_ls(a: f64, f: u32) -> LogSign {
    let mut ln = 0.0;
    let mut sign: i8 = 1;
    for l in 0..f {
        let v = a + f64::from(l);
        if v == 0.0 {
            return LogSign::ZERO;
        }
        if v < 0.0 {
            sign = -sign;
        }
        ln += v.abs().ln();
    }
    LogSign::new(ln, sign)
}

/// Generalized Pochhammer symbol `(a)_κ = Π_i (a - (i-1)/2)_{κ_i}`.
pub fn gen_pochhammer(a: f64, kappa: &Partition) -> f64 {
    gen_pochhammer_ls(a, kappa).to_f64()
}

/// Log-magnitude and sign form of [`gen_pochhammer`].
pub fn gen_pochhammer_ls(a: f64, kappa: &Partition) -> LogSign {
    let mut acc = LogSign::ONE;
    for (i, &k) in kappa.parts().iter().enumerate() {
        let factor = rising_factorial_ls(a - i as f64 / 2.0, k);
        if factor.is_zero() {
            return LogSign::ZERO;
        }
        acc = acc * factor;
    }
    acc
}

/// `ln Γ_n(a) = ln[π^{n(n-1)/4} Π_{i=1}^{n} Γ(a - (i-1)/2)]`.
///
/// Individual factors may be negative; the result is the log of the absolute
/// value and the sign is dropped, because every caller uses arguments where the
/// product is positive. Poles are reported with the offending factor.
pub fn multivariate_gamma(n: usize, a: f64) -> Result<f64> {
    multivariate_gamma_signed(n, a).map(|(ln, _)| ln)
}

/// [`multivariate_gamma`] keeping the sign of the product.
pub fn multivariate_gamma_signed(n: usize, a: f64) -> Result<(f64, i8)> {
    if n == 0 {
        return Err(domain("multivariate gamma needs n >= 1"));
    }
    let nf = n as f64;
    let mut ln = nf * (nf - 1.0) / 4.0 * PI.ln();
    let mut sign = 1;
    for i in 0..n {
        let arg = a - i as f64 / 2.0;
        let (lg, s) = ln_gamma_signed(arg)
            .map_err(|_| domain(format!("multivariate gamma Γ_{n}({a}) has a pole at factor Γ({arg})")))?;
        ln += lg;
        sign *= s;
    }
    Ok((ln, sign))
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_continued_fraction(a, x)
    }
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..10_000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    (sum.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    // Modified Lentz evaluation.
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Survival function `1 - P(χ²_df ≤ x)`.
pub fn chi_square_sf(x: f64, df: u32) -> Result<f64> {
    if df < 1 {
        return Err(domain("chi-square degrees of freedom must be >= 1"));
    }
    if x.is_nan() || x < 0.0 {
        return Err(domain(format!("chi-square argument must be >= 0, got {x}")));
    }
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(gamma_q(f64::from(df) / 2.0, x / 2.0))
}

/// Upper quantile: the `x` with `chi_square_sf(x, df) = alpha`.
pub fn chi_square_upper_quantile(alpha: f64, df: u32) -> Result<f64> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(domain(format!("tail probability must lie in (0,1), got {alpha}")));
    }
    let mut lo = 0.0;
    let mut hi = f64::from(df).max(1.0);
    while chi_square_sf(hi, df)? > alpha {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi_square_sf(mid, df)? > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
