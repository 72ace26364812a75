//! Size-and-shape and shape densities of SVD coordinates under elliptical
//! models.
//!
//! Shape densities are densities of the polar angles `u` of `vec(YP)/‖Y‖`,
//! `P` Haar on the rotation group, with respect to Lebesgue measure on the
//! angle box; the chart Jacobian `J(u)` is included. Every matrix argument
//! enters through the spectrum of a `K×K` symmetric matrix that shares its
//! non-zero eigenvalues with `ΩΣ^{-1}WW'`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{dimension, domain, Error, Result};
use crate::geometry::{angles_to_shape, ln_polar_jacobian, Mode};
use crate::models::{h_derivative_ls, h_value_ls, radial_integral, GeneratorKind, ModelSpec};
use crate::numeric::{LogAccumulator, LogSign};
use crate::special_fn::{ln_gamma, multivariate_gamma};
use crate::zonal::{zonal_series_by_degree, SeriesControl, SeriesValue};

/// A log-density together with its series diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityValue {
    pub log_density: f64,
    /// Highest series degree summed (0 for closed forms).
    pub series_degrees_used: usize,
    /// Size of the final tail window relative to the series value.
    pub tail_bound: f64,
    pub mode: Mode,
}

/// Isotropic likelihood kernels of the three worked models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IsotropicKind {
    Gaussian,
    KotzT2,
    KotzT3,
}

impl IsotropicKind {
    pub const ALL: [IsotropicKind; 3] = [Self::Gaussian, Self::KotzT2, Self::KotzT3];

    /// Kotz shape `T` of the kernel.
    pub fn shape(self) -> u32 {
        match self {
            Self::Gaussian => 1,
            Self::KotzT2 => 2,
            Self::KotzT3 => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::KotzT2 => "kotz-t2",
            Self::KotzT3 => "kotz-t3",
        }
    }
}

fn mode_offset(mode: Mode) -> f64 {
    match mode {
        Mode::Reflection => 0.0,
        Mode::NoReflection => -std::f64::consts::LN_2,
    }
}

fn finish(ln: f64, series: Option<SeriesValue>, mode: Mode) -> Result<DensityValue> {
    if !ln.is_finite() && ln != f64::NEG_INFINITY {
        return Err(Error::Numeric(format!("log-density evaluated to {ln}")));
    }
    Ok(DensityValue {
        log_density: ln + mode_offset(mode),
        series_degrees_used: series.map_or(0, |s| s.degrees_used),
        tail_bound: series.map_or(0.0, |s| s.relative_tail),
        mode,
    })
}

fn positive_series(s: &SeriesValue) -> Result<f64> {
    if s.value.sign <= 0 {
        return Err(Error::Numeric("density series summed to a non-positive value".into()));
    }
    Ok(s.value.ln_abs)
}

/// Eigenvalues of a symmetric matrix, with round-off negatives clipped to 0
/// when the matrix is known to be positive semi-definite.
fn psd_spectrum(m: DMatrix<f64>) -> Vec<f64> {
    let sym = (&m + m.transpose()) * 0.5;
    let scale = sym.amax();
    SymmetricEigen::new(sym).eigenvalues.iter().map(|&l| if l < 1e-14 * scale { 0.0 } else { l }).collect()
}

/// `(tr Σ^{-1}AA', spectrum of ν'Σ^{-1}AA'Σ^{-1}ν)` for `A` of shape (N-1)×K,
/// where `ν = μΘ^{-1/2}`; the spectrum equals that of `ΩΣ^{-1}AA'`.
fn quadratic_terms(model: &ModelSpec, a: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let sa = model.sigma_inv() * a;
    let trace = (a.transpose() * &sa).trace();
    let g = sa.transpose() * model.whitened_mu();
    (trace, psd_spectrum(g.transpose() * g))
}

fn shape_matrix(u: &[f64], model: &ModelSpec) -> Result<DMatrix<f64>> {
    let (rows, k) = (model.rows(), model.dim());
    if u.len() + 1 != rows * k {
        return Err(dimension(format!(
            "expected {} angles for N-1={rows}, K={k}, got {}",
            rows * k - 1,
            u.len()
        )));
    }
    angles_to_shape(u, rows, k)
}

/// Log size-and-shape density of `R` ((N-1)×K, the rotated-back
/// configuration `rW`) with respect to Lebesgue measure.
///
/// `|Σ|^{-K/2} Σ_t h^{(2t)}(tr Σ^{-1}RR' + tr Ω)/t! Σ_κ C_κ(ΩΣ^{-1}RR')/(K/2)_κ`.
pub fn size_and_shape_logdensity(
    rmat: &DMatrix<f64>,
    model: &ModelSpec,
    mode: Mode,
    ctrl: &SeriesControl,
) -> Result<DensityValue> {
    check_rmat(rmat, model)?;
    let k = model.dim();
    let (quad, spectrum) = quadratic_terms(model, rmat);
    let y = quad + model.trace_omega();
    let gen = *model.generator();
    let series =
        zonal_series_by_degree(|t| h_derivative_ls(&gen, 2 * t as u32, y), &spectrum, k as f64 / 2.0, ctrl)?;
    let ln = -(k as f64) / 2.0 * model.ln_det_sigma() + positive_series(&series)?;
    finish(ln, Some(series), mode)
}

fn check_rmat(rmat: &DMatrix<f64>, model: &ModelSpec) -> Result<()> {
    if rmat.shape() != (model.rows(), model.dim()) {
        return Err(dimension(format!(
            "R is {}×{}, expected {}×{}",
            rmat.nrows(),
            rmat.ncols(),
            model.rows(),
            model.dim()
        )));
    }
    let sv = rmat.singular_values();
    if !(sv.min() > 1e-12 * sv.max()) {
        return Err(domain("R must have full column rank"));
    }
    Ok(())
}

/// Central (`μ = 0`) size-and-shape density `|Σ|^{-K/2} h(tr Σ^{-1}RR')`.
pub fn central_size_and_shape_logdensity(
    rmat: &DMatrix<f64>,
    model: &ModelSpec,
    mode: Mode,
) -> Result<DensityValue> {
    check_rmat(rmat, model)?;
    let k = model.dim() as f64;
    let (quad, _) = quadratic_terms(model, rmat);
    let h = h_value_ls(model.generator(), quad)?;
    finish(-k / 2.0 * model.ln_det_sigma() + h.ln_abs, None, mode)
}

/// Log shape density of the polar angles `u`, generic elliptical path:
/// `|Σ|^{-K/2} J(u) Σ_t Σ_κ C_κ(ΩΣ^{-1}WW')/(t!(K/2)_κ) I_t`, where `I_t` is
/// the radial integral of `h^{(2t)}` over dimension `M = (N-1)K`.
pub fn shape_logdensity(
    u: &[f64],
    model: &ModelSpec,
    mode: Mode,
    ctrl: &SeriesControl,
) -> Result<DensityValue> {
    let w = shape_matrix(u, model)?;
    let (a, spectrum) = quadratic_terms(model, &w);
    let b = model.trace_omega();
    let gen = *model.generator();
    let m_total = model.rows() * model.dim();
    let series = zonal_series_by_degree(
        |t| radial_integral(&gen, t as u32, a, b, m_total),
        &spectrum,
        model.dim() as f64 / 2.0,
        ctrl,
    )?;
    let ln =
        -(model.dim() as f64) / 2.0 * model.ln_det_sigma() + ln_polar_jacobian(u) + positive_series(&series)?;
    finish(ln, Some(series), mode)
}

/// `ln[Γ(M/2) / (2π^{M/2})]`, the constant of the central shape density.
pub fn central_shape_log_constant(n_landmarks: usize, k: usize) -> f64 {
    let half_m = ((n_landmarks - 1) * k) as f64 / 2.0;
    ln_gamma(half_m) - std::f64::consts::LN_2 - half_m * std::f64::consts::PI.ln()
}

/// Central shape density constant as printed in the source corollary,
/// `2^{-n-1} Γ_n[(N+K-2n)/2] π^{nK/2} Γ[(m+n)/2] / (π^{n(N+K-(3n-1)/2)/2 + (m+n)/2} Γ_n[K/2])`,
/// with `n = K` and `m = (N-1)n - 1`. Kept for reporting how it compares
/// with [`central_shape_log_constant`]; it is not used by any density.
pub fn printed_central_shape_log_constant(n_landmarks: usize, k: usize) -> Result<f64> {
    let (nl, kf) = (n_landmarks as f64, k as f64);
    let n = kf;
    let m = (nl - 1.0) * n - 1.0;
    let ln_pi = std::f64::consts::PI.ln();
    let ln2 = std::f64::consts::LN_2;
    Ok(-(n + 1.0) * ln2
        + multivariate_gamma(k, (nl + kf - 2.0 * n) / 2.0)?
        + n * kf / 2.0 * ln_pi
        + ln_gamma((m + n) / 2.0)
        - (n / 2.0 * (nl + kf - (3.0 * n - 1.0) / 2.0) + (m + n) / 2.0) * ln_pi
        - multivariate_gamma(k, kf / 2.0)?)
}

/// Central (`μ = 0`) shape density, identical for every generator:
/// `|Σ|^{-K/2} J(u) Γ(M/2) / (2π^{M/2}) (tr Σ^{-1}WW')^{-M/2}`.
pub fn central_shape_logdensity(u: &[f64], model: &ModelSpec, mode: Mode) -> Result<DensityValue> {
    let w = shape_matrix(u, model)?;
    let (a, _) = quadratic_terms(model, &w);
    let m_total = (model.rows() * model.dim()) as f64;
    let ln = -(model.dim() as f64) / 2.0 * model.ln_det_sigma()
        + ln_polar_jacobian(u)
        + central_shape_log_constant(model.rows() + 1, model.dim())
        - m_total / 2.0 * a.ln();
    finish(ln, None, mode)
}

/// Gaussian shape density in closed form:
/// `|Σ|^{-K/2} J(u) e^{-R tr Ω} a^{-M/2} / (2π^{M/2}) Σ_t Σ_κ Γ(M/2+t) C_κ(RΩΣ^{-1}WW'/a)/(t!(K/2)_κ)`
/// with `a = tr Σ^{-1}WW'`.
pub fn gaussian_shape_logdensity(
    u: &[f64],
    model: &ModelSpec,
    mode: Mode,
    ctrl: &SeriesControl,
) -> Result<DensityValue> {
    let gen = model.generator();
    if gen.kind != GeneratorKind::Gaussian && gen.t != 1.0 {
        return Err(domain("the Gaussian closed form needs a Gaussian generator"));
    }
    let w = shape_matrix(u, model)?;
    let (a, spectrum) = quadratic_terms(model, &w);
    let rate = gen.r;
    let arg: Vec<f64> = spectrum.iter().map(|l| rate * l / a).collect();
    let half_m = (model.rows() * model.dim()) as f64 / 2.0;
    let series = zonal_series_by_degree(
        |t| Ok(LogSign::positive(ln_gamma(half_m + t as f64))),
        &arg,
        model.dim() as f64 / 2.0,
        ctrl,
    )?;
    let ln = -(model.dim() as f64) / 2.0 * model.ln_det_sigma() + ln_polar_jacobian(u)
        - rate * model.trace_omega()
        - half_m * a.ln()
        - std::f64::consts::LN_2
        - half_m * std::f64::consts::PI.ln()
        + positive_series(&series)?;
    finish(ln, Some(series), mode)
}

/// Radial bracket `B_t` of the isotropic kernels with `β = tr(μ'μ)/(2σ²)`
/// and `p = M/2 + t`:
///
/// * Gaussian: `Γ(p)`
/// * Kotz T=2: `(β - 2t)Γ(p) + Γ(p+1)`
/// * Kotz T=3: `(4t² - 2t - 4tβ + β²)Γ(p) + (2β - 4t)Γ(p+1) + Γ(p+2)`
pub fn isotropic_bracket(kind: IsotropicKind, t: usize, beta: f64, half_m: f64) -> LogSign {
    let tf = t as f64;
    let p = half_m + tf;
    let g = |shift: f64| LogSign::positive(ln_gamma(p + shift));
    let mut acc = LogAccumulator::new();
    match kind {
        IsotropicKind::Gaussian => acc.add(g(0.0)),
        IsotropicKind::KotzT2 => {
            acc.add(g(0.0) * LogSign::from_f64(beta - 2.0 * tf));
            acc.add(g(1.0));
        }
        IsotropicKind::KotzT3 => {
            let c0 = 4.0 * tf * tf - 2.0 * tf - 4.0 * tf * beta + beta * beta;
            acc.add(g(0.0) * LogSign::from_f64(c0));
            acc.add(g(1.0) * LogSign::from_f64(2.0 * beta - 4.0 * tf));
            acc.add(g(2.0));
        }
    }
    acc.value()
}

/// Isotropic (`Σ = σ²I`, `Θ = I`, `R = 1/2`) shape density of the worked
/// models:
/// `J(u) Γ(M/2) e^{-β} / (2π^{M/2} Γ(T-1+M/2)) Σ_t B_t/t! Σ_κ C_κ(μ'WW'μ/(2σ²))/(K/2)_κ`.
pub fn isotropic_shape_logdensity(
    u: &[f64],
    mu: &DMatrix<f64>,
    sigma2: f64,
    kind: IsotropicKind,
    mode: Mode,
    ctrl: &SeriesControl,
) -> Result<DensityValue> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(domain(format!("σ² must be > 0, got {sigma2}")));
    }
    let (rows, k) = mu.shape();
    if u.len() + 1 != rows * k {
        return Err(dimension(format!(
            "expected {} angles for μ of shape {rows}×{k}, got {}",
            rows * k - 1,
            u.len()
        )));
    }
    let w = angles_to_shape(u, rows, k)?;
    let g = w.transpose() * mu;
    let arg: Vec<f64> = psd_spectrum(g.transpose() * g).into_iter().map(|l| l / (2.0 * sigma2)).collect();
    let beta = mu.norm_squared() / (2.0 * sigma2);
    let half_m = (rows * k) as f64 / 2.0;
    let series =
        zonal_series_by_degree(|t| Ok(isotropic_bracket(kind, t, beta, half_m)), &arg, k as f64 / 2.0, ctrl)?;
    let t_shape = f64::from(kind.shape());
    let ln = ln_polar_jacobian(u) + ln_gamma(half_m)
        - std::f64::consts::LN_2
        - half_m * std::f64::consts::PI.ln()
        - ln_gamma(t_shape - 1.0 + half_m)
        - beta
        + positive_series(&series)?;
    finish(ln, Some(series), mode)
}
