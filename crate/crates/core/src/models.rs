//! Elliptical density generators, their derivatives, and the radial
//! integrals `∫₀^∞ r^{d+2t-1} h^{(2t)}(r²a + b) dr` behind the shape densities.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{dimension, domain, Error, Result};
use crate::geometry::theta_inv_sqrt;
use crate::numeric::{integrate_adaptive, LogAccumulator, LogSign};
use crate::special_fn::{ln_factorial, ln_gamma};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    Gaussian,
    KotzTypeI,
}

/// Density generator `h` of a matrix-variate elliptical law on `ℝ^M`.
///
/// Kotz type I: `h(y) = R^{T-1+M/2} Γ(M/2) / (π^{M/2} Γ(T-1+M/2)) y^{T-1} e^{-Ry}`.
/// The Gaussian kind is `(R/π)^{M/2} e^{-Ry}`, which is Kotz with `T = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    /// Kotz shape `T` (1 for the Gaussian kind).
    pub t: f64,
    /// Rate `R`.
    pub r: f64,
    /// Total dimension `M = (N-1)K`.
    pub m_total: usize,
}

impl GeneratorSpec {
    /// Gaussian generator with the usual rate `R = 1/2`.
    pub fn gaussian(m_total: usize) -> Self {
        Self { kind: GeneratorKind::Gaussian, t: 1.0, r: 0.5, m_total }
    }

    pub fn kotz(t: f64, r: f64, m_total: usize) -> Result<Self> {
        let g = Self { kind: GeneratorKind::KotzTypeI, t, r, m_total };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(domain(format!("generator rate R must be > 0, got {}", self.r)));
        }
        if self.m_total < 1 {
            return Err(domain("generator dimension M must be >= 1"));
        }
        match self.kind {
            GeneratorKind::Gaussian if self.t != 1.0 => Err(domain("the Gaussian generator has T = 1")),
            GeneratorKind::KotzTypeI if !(self.t >= 1.0) || !self.t.is_finite() => {
                Err(domain(format!("Kotz shape T must be >= 1, got {}", self.t)))
            }
            _ => Ok(()),
        }
    }

    /// Integer `T` with a terminating derivative expansion.
    pub fn integer_shape(&self) -> Option<u32> {
        (self.t == self.t.round() && self.t <= 64.0).then_some(self.t as u32)
    }

    /// Same law on a different total dimension.
    pub fn with_dimension(&self, m_total: usize) -> Self {
        Self { m_total, ..*self }
    }

    /// Log of the normalizing constant multiplying `y^{T-1} e^{-Ry}`.
    pub fn ln_norm_const(&self) -> f64 {
        let half_m = self.m_total as f64 / 2.0;
        let ln_pi = std::f64::consts::PI.ln();
        match self.kind {
            GeneratorKind::Gaussian => half_m * (self.r.ln() - ln_pi),
            GeneratorKind::KotzTypeI => {
                (self.t - 1.0 + half_m) * self.r.ln() + ln_gamma(half_m)
                    - half_m * ln_pi
                    - ln_gamma(self.t - 1.0 + half_m)
            }
        }
    }
}

/// `h(y)`.
pub fn h_value(gen: &GeneratorSpec, y: f64) -> Result<f64> {
    h_value_ls(gen, y).map(LogSign::to_f64)
}

/// `h(y)` in log-sign form.
pub fn h_value_ls(gen: &GeneratorSpec, y: f64) -> Result<LogSign> {
    gen.validate()?;
    if !(y >= 0.0) {
        return Err(domain(format!("generator argument must be >= 0, got {y}")));
    }
    let c = gen.ln_norm_const();
    if gen.t == 1.0 {
        return Ok(LogSign::positive(c - gen.r * y));
    }
    if y == 0.0 {
        return Ok(LogSign::ZERO);
    }
    Ok(LogSign::positive(c + (gen.t - 1.0) * y.ln() - gen.r * y))
}

/// `h^{(k)}(y)`.
pub fn h_derivative(gen: &GeneratorSpec, k: u32, y: f64) -> Result<f64> {
    h_derivative_ls(gen, k, y).map(LogSign::to_f64)
}

/// `h^{(k)}(y) = c e^{-Ry} Σ_j C(k,j) [T-1]_j y^{T-1-j} (-R)^{k-j}` with the
/// falling factorial `[T-1]_j`, which terminates for integer `T`.
pub fn h_derivative_ls(gen: &GeneratorSpec, k: u32, y: f64) -> Result<LogSign> {
    if k == 0 {
        return h_value_ls(gen, y);
    }
    gen.validate()?;
    let c = gen.ln_norm_const();
    let sign_r = |p: u32| if p.is_multiple_of(2) { 1 } else { -1 };
    if gen.t == 1.0 {
        if !(y >= 0.0) {
            return Err(domain(format!("generator argument must be >= 0, got {y}")));
        }
        return Ok(LogSign::new(c + f64::from(k) * gen.r.ln() - gen.r * y, sign_r(k)));
    }
    if !(y > 0.0) {
        return Err(domain(format!("derivatives of the Kotz generator need y > 0, got {y}")));
    }
    let mut acc = LogAccumulator::new();
    let mut falling = LogSign::ONE;
    for j in 0..=k {
        if j > 0 {
            falling = falling * LogSign::from_f64(gen.t - f64::from(j));
            if falling.is_zero() {
                break;
            }
        }
        let binom = ln_factorial(k) - ln_factorial(j) - ln_factorial(k - j);
        let term = LogSign::new(
            binom + (gen.t - 1.0 - f64::from(j)) * y.ln() + f64::from(k - j) * gen.r.ln(),
            sign_r(k - j),
        ) * falling;
        acc.add(term);
    }
    Ok(acc.value().scale_ln(c - gen.r * y))
}

fn check_radial_args(t: u32, a: f64, b: f64, radial_dim: usize) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(domain(format!("radial integral needs a > 0, got {a}")));
    }
    if !(b >= 0.0) || !b.is_finite() {
        return Err(domain(format!("radial integral needs b >= 0, got {b}")));
    }
    if radial_dim < 1 {
        return Err(domain("radial dimension must be >= 1"));
    }
    let _ = t;
    Ok(())
}

/// `∫₀^∞ r^{d+2t-1} h^{(2t)}(r²a + b) dr` with `d = radial_dim`.
///
/// Closed forms are used for the Gaussian kind and for integer Kotz `T`;
/// other shapes fall back to [`radial_integral_quadrature`].
pub fn radial_integral(gen: &GeneratorSpec, t: u32, a: f64, b: f64, radial_dim: usize) -> Result<LogSign> {
    gen.validate()?;
    check_radial_args(t, a, b, radial_dim)?;
    let d = radial_dim as f64;
    let tf = f64::from(t);
    let c = gen.ln_norm_const();
    let ln_r = gen.r.ln();
    if gen.t == 1.0 {
        let ln = c + 2.0 * tf * ln_r - gen.r * b + ln_gamma(d / 2.0 + tf)
            - 2f64.ln()
            - (d / 2.0 + tf) * (ln_r + a.ln());
        return Ok(LogSign::positive(ln));
    }
    let Some(t_int) = gen.integer_shape() else {
        return radial_integral_quadrature(gen, t, a, b, radial_dim);
    };
    let k = 2 * t;
    let mut acc = LogAccumulator::new();
    let mut falling = LogSign::ONE;
    for j in 0..=k.min(t_int - 1) {
        if j > 0 {
            falling = falling * LogSign::from_f64(gen.t - f64::from(j));
        }
        let e = t_int - 1 - j;
        let binom_kj = ln_factorial(k) - ln_factorial(j) - ln_factorial(k - j);
        let outer_sign = if (k - j).is_multiple_of(2) { 1 } else { -1 };
        let outer = LogSign::new(binom_kj + f64::from(k - j) * ln_r, outer_sign) * falling;
        for l in 0..=e {
            let b_pow = e - l;
            if b == 0.0 && b_pow > 0 {
                continue;
            }
            let half = (d + 2.0 * tf + 2.0 * f64::from(l)) / 2.0;
            let binom_el = ln_factorial(e) - ln_factorial(l) - ln_factorial(e - l);
            let b_term = if b_pow == 0 { 0.0 } else { f64::from(b_pow) * b.ln() };
            let ln = binom_el + b_term + f64::from(l) * a.ln() + ln_gamma(half)
                - 2f64.ln()
                - half * (ln_r + a.ln());
            acc.add(outer * LogSign::positive(ln));
        }
    }
    Ok(acc.value().scale_ln(c - gen.r * b))
}

/// Adaptive Gauss–Kronrod evaluation of the radial integral, used for
/// non-integer `T` and as an independent check on the closed forms.
///
/// The substitution `s = r²a` gives
/// `½ a^{-(d+2t)/2} ∫₀^∞ s^{(d+2t)/2-1} h^{(2t)}(s + b) ds`; the integrand is
/// rescaled by its largest sampled magnitude and the range is extended until
/// it has decayed by `e^{-40}`.
pub fn radial_integral_quadrature(
    gen: &GeneratorSpec,
    t: u32,
    a: f64,
    b: f64,
    radial_dim: usize,
) -> Result<LogSign> {
    gen.validate()?;
    check_radial_args(t, a, b, radial_dim)?;
    let p = (radial_dim as f64 + 2.0 * f64::from(t)) / 2.0 - 1.0;
    let k = 2 * t;
    let ln_abs = |s: f64| -> Result<LogSign> {
        if s == 0.0 && (p > 0.0 || b == 0.0) {
            return Ok(LogSign::ZERO);
        }
        let h = h_derivative_ls(gen, k, s + b)?;
        Ok(h.scale_ln(p * s.ln()))
    };
    // Locate the bulk of the integrand: polynomial degree ≈ p + T - 1.
    let scale_guess = (p + gen.t + 1.0).max(1.0) / gen.r;
    let mut upper = 4.0 * scale_guess + 40.0 / gen.r;
    let mut peak = f64::NEG_INFINITY;
    for i in 1..=400 {
        let s = upper * f64::from(i) / 400.0;
        let v = ln_abs(s)?;
        if !v.is_zero() {
            peak = peak.max(v.ln_abs);
        }
    }
    if !peak.is_finite() {
        return Ok(LogSign::ZERO);
    }
    for _ in 0..60 {
        let v = ln_abs(upper)?;
        if v.is_zero() || v.ln_abs < peak - 40.0 {
            break;
        }
        upper *= 2.0;
    }
    let not_converged = || {
        Error::Numeric(format!("radial quadrature did not converge (t={t}, a={a}, b={b}, d={radial_dim})"))
    };
    let mut failure = None;
    let mut scaled = |s: f64| match ln_abs(s) {
        Ok(v) => v.scale_ln(-peak).to_f64(),
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    // Signed terms of h^{(2t)} can cancel to an integral of exactly zero, so
    // the absolute tolerance is tied to the mass of |integrand|.
    let (l1, _) =
        integrate_adaptive(|s| scaled(s).abs(), 0.0, upper, 1e-6, 0.0, 4000).ok_or_else(not_converged)?;
    let integral = integrate_adaptive(&mut scaled, 0.0, upper, 1e-13, 1e-14 * l1, 4000);
    if let Some(e) = failure {
        return Err(e);
    }
    let (value, _) = integral.ok_or_else(not_converged)?;
    Ok(LogSign::from_f64(value).scale_ln(peak - 2f64.ln() - (p + 1.0) * a.ln()))
}

/// Elliptical model for the centred configuration `LX` ((N-1)×K).
///
/// `Ω = Σ^{-1} μ Θ^{-1} μ'` and the other derived quantities are computed at
/// construction; the fields are read-only so they cannot go stale.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    generator: GeneratorSpec,
    sigma: DMatrix<f64>,
    theta: DMatrix<f64>,
    mu: DMatrix<f64>,
    sigma_inv: DMatrix<f64>,
    ln_det_sigma: f64,
    whitened_mu: DMatrix<f64>,
    omega: DMatrix<f64>,
}

impl ModelSpec {
    pub fn new(
        generator: GeneratorSpec,
        sigma: DMatrix<f64>,
        theta: DMatrix<f64>,
        mu: DMatrix<f64>,
    ) -> Result<Self> {
        generator.validate()?;
        let rows = sigma.nrows();
        let k = theta.nrows();
        if !sigma.is_square() || !theta.is_square() {
            return Err(dimension("Σ and Θ must be square"));
        }
        if mu.shape() != (rows, k) {
            return Err(dimension(format!("μ is {}×{}, expected {rows}×{k}", mu.nrows(), mu.ncols())));
        }
        if generator.m_total != rows * k {
            return Err(dimension(format!(
                "generator dimension M={} but (N-1)K={}",
                generator.m_total,
                rows * k
            )));
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(domain("μ must be finite"));
        }
        let sigma_inv_half = theta_inv_sqrt(&sigma).map_err(|e| domain(format!("Σ: {e}")))?;
        let sigma_inv = &sigma_inv_half * &sigma_inv_half;
        let ln_det_sigma = -2.0 * sigma_inv_half.determinant().ln();
        let whitened_mu = &mu * theta_inv_sqrt(&theta)?;
        let omega = &sigma_inv * &whitened_mu * whitened_mu.transpose();
        Ok(Self { generator, sigma, theta, mu, sigma_inv, ln_det_sigma, whitened_mu, omega })
    }

    /// `Σ = σ² I`, `Θ = I`.
    pub fn isotropic(generator: GeneratorSpec, sigma2: f64, mu: DMatrix<f64>) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(domain(format!("σ² must be > 0, got {sigma2}")));
        }
        let (rows, k) = mu.shape();
        Self::new(generator, DMatrix::identity(rows, rows) * sigma2, DMatrix::identity(k, k), mu)
    }

    pub fn with_mu(&self, mu: DMatrix<f64>) -> Result<Self> {
        Self::new(self.generator, self.sigma.clone(), self.theta.clone(), mu)
    }

    pub fn with_generator(&self, generator: GeneratorSpec) -> Result<Self> {
        Self::new(generator, self.sigma.clone(), self.theta.clone(), self.mu.clone())
    }

    pub fn generator(&self) -> &GeneratorSpec {
        &self.generator
    }
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }
    pub fn theta(&self) -> &DMatrix<f64> {
        &self.theta
    }
    pub fn mu(&self) -> &DMatrix<f64> {
        &self.mu
    }
    pub fn sigma_inv(&self) -> &DMatrix<f64> {
        &self.sigma_inv
    }
    pub fn ln_det_sigma(&self) -> f64 {
        self.ln_det_sigma
    }
    /// `μ Θ^{-1/2}`, the mean of the whitened configuration `Y`.
    pub fn whitened_mu(&self) -> &DMatrix<f64> {
        &self.whitened_mu
    }
    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }
    pub fn trace_omega(&self) -> f64 {
        self.omega.trace().max(0.0)
    }
    /// `N - 1`.
    pub fn rows(&self) -> usize {
        self.sigma.nrows()
    }
    /// `K`.
    pub fn dim(&self) -> usize {
        self.theta.nrows()
    }
}
