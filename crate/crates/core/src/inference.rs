//! Likelihood over samples of shapes, location fitting, BIC* model selection
//! and the two-group likelihood-ratio test.

use std::fmt;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densities::{isotropic_shape_logdensity, IsotropicKind};
use crate::error::{dimension, domain, Error, Result};
use crate::geometry::{preprocess, svd_shape, LandmarkSet, Mode, ShapeCoords};
use crate::special_fn::chi_square_sf;
use crate::zonal::SeriesControl;

/// Shapes of one group of specimens sharing `N`, `K` and the mode.
#[derive(Debug, Clone)]
pub struct SampleOfShapes {
    pub group_id: String,
    pub items: Vec<(String, ShapeCoords)>,
    pub n_landmarks: usize,
    pub k: usize,
    pub mode: Mode,
}

impl SampleOfShapes {
    pub fn new(group_id: impl Into<String>, items: Vec<(String, ShapeCoords)>) -> Result<Self> {
        let Some((_, first)) = items.first() else {
            return Err(domain("a sample needs at least one specimen"));
        };
        let (rows, k) = first.w.shape();
        let mode = first.mode;
        for (id, s) in &items {
            if s.w.shape() != (rows, k) {
                return Err(dimension(format!("specimen '{id}' has a different N or K")));
            }
            if s.mode != mode {
                return Err(domain(format!("specimen '{id}' has a different mode")));
            }
        }
        Ok(Self { group_id: group_id.into(), items, n_landmarks: rows + 1, k, mode })
    }

    /// Centres, whitens and charts every landmark set.
    pub fn from_landmarks(
        group_id: impl Into<String>,
        sets: &[LandmarkSet],
        theta: &DMatrix<f64>,
        mode: Mode,
    ) -> Result<Self> {
        let items = sets
            .iter()
            .map(|s| {
                preprocess(s, theta)
                    .and_then(|y| svd_shape(&y, mode))
                    .map(|shape| (s.id.clone(), shape))
                    .map_err(|e| Error::Specimen { id: s.id.clone(), source: Box::new(e) })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(group_id, items)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Concatenation of two compatible samples.
    pub fn pooled(&self, other: &SampleOfShapes, group_id: impl Into<String>) -> Result<Self> {
        let mut items = self.items.clone();
        items.extend(other.items.iter().cloned());
        Self::new(group_id, items)
    }

    fn mean_configuration(&self) -> DMatrix<f64> {
        let rows = self.n_landmarks - 1;
        let mut acc = DMatrix::zeros(rows, self.k);
        for (_, s) in &self.items {
            acc += &s.w * s.r;
        }
        acc / self.items.len() as f64
    }
}

/// `Σ_i ln f(u_i; μ, σ²)` under one of the isotropic kernels.
pub fn log_likelihood(
    sample: &SampleOfShapes,
    mu: &DMatrix<f64>,
    sigma2: f64,
    kind: IsotropicKind,
    ctrl: &SeriesControl,
) -> Result<f64> {
    if mu.shape() != (sample.n_landmarks - 1, sample.k) {
        return Err(dimension(format!(
            "μ is {}×{}, sample needs {}×{}",
            mu.nrows(),
            mu.ncols(),
            sample.n_landmarks - 1,
            sample.k
        )));
    }
    let terms: Vec<Result<f64>> = sample
        .items
        .par_iter()
        .map(|(id, s)| {
            isotropic_shape_logdensity(&s.angles, mu, sigma2, kind, sample.mode, ctrl)
                .map(|d| d.log_density)
                .map_err(|e| Error::Specimen { id: id.clone(), source: Box::new(e) })
        })
        .collect();
    let mut total = 0.0;
    for t in terms {
        total += t?;
    }
    Ok(total)
}

/// `-2 ℓ + n_p (ln(n+2) - ln 24)`.
pub fn bic_star(loglik: f64, n_params: usize, sample_size: usize) -> f64 {
    -2.0 * loglik + n_params as f64 * (((sample_size + 2) as f64).ln() - 24f64.ln())
}

/// Grade of evidence attached to a BIC* difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Evidence {
    Weak,
    Positive,
    Strong,
    VeryStrong,
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Evidence::Weak => "weak",
            Evidence::Positive => "positive",
            Evidence::Strong => "strong",
            Evidence::VeryStrong => "very strong",
        })
    }
}

/// Bands `[0,2]`, `(2,6]`, `(6,10]`, `(10,∞)`; shared endpoints belong to
/// the lower band.
pub fn evidence_grade(delta_bic: f64) -> Result<Evidence> {
    if !(delta_bic >= 0.0) {
        return Err(domain(format!("BIC* difference must be >= 0, got {delta_bic}")));
    }
    Ok(if delta_bic <= 2.0 {
        Evidence::Weak
    } else if delta_bic <= 6.0 {
        Evidence::Positive
    } else if delta_bic <= 10.0 {
        Evidence::Strong
    } else {
        Evidence::VeryStrong
    })
}

/// Multi-start Nelder–Mead settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub starts: usize,
    /// Absolute spread of simplex function values at convergence.
    pub ftol: f64,
    /// Largest coordinate distance from the best vertex at convergence.
    pub xtol: f64,
    pub max_evaluations: usize,
    pub seed: u64,
    /// Also estimate `σ²` (experimental; the fixed-variance protocol is the
    /// supported one).
    pub free_sigma2: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { starts: 8, ftol: 1e-8, xtol: 1e-6, max_evaluations: 50_000, seed: 0, free_sigma2: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub kind: IsotropicKind,
    /// `(N-1)×K`, canonical representative of its rotation orbit.
    pub mu_hat: DMatrix<f64>,
    pub sigma2: f64,
    pub loglik: f64,
    pub n_params: usize,
    pub sample_size: usize,
    pub bic_star: f64,
    pub converged: bool,
    pub evaluations: usize,
    pub starts_converged: usize,
}

/// Result of a simplex search.
#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder–Mead minimization with standard coefficients (1, 2, ½, ½).
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: &[f64],
    ftol: f64,
    xtol: f64,
    max_evaluations: usize,
) -> SimplexResult {
    let d = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    let f0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), f0));
    for i in 0..d {
        let mut x = x0.to_vec();
        x[i] += step[i];
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }
    let mut converged = false;
    while evals < max_evaluations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[d].1;
        let spread = if best.is_finite() && worst.is_finite() { (worst - best).abs() } else { f64::INFINITY };
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if spread <= ftol && diameter <= xtol {
            converged = true;
            break;
        }
        let mut centroid = vec![0.0; d];
        for (x, _) in &simplex[..d] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / d as f64;
            }
        }
        let along = |coef: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[d].0).map(|(c, w)| c + coef * (c - w)).collect()
        };
        let xr = along(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[d].1 {
                let xc = along(0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < simplex[d].1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let xs: Vec<f64> = x_best.iter().zip(&vertex.0).map(|(b, v)| b + 0.5 * (v - b)).collect();
                    let fs = eval(&xs, &mut evals);
                    *vertex = (xs, fs);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    SimplexResult { x, f, evaluations: evals, converged }
}

/// Positions of the free entries of a lower-trapezoidal `rows×k` matrix
/// (entries above the diagonal are fixed at zero), column-major.
fn gauge_positions(rows: usize, k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for j in 0..k {
        for i in j..rows {
            out.push((i, j));
        }
    }
    out
}

/// Representative `L` of the orbit `{μQ : Q ∈ O(K)}` with `μ = LQ`, `L`
/// lower trapezoidal.
fn gauge_fix(mu: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = mu.transpose().qr();
    canonical_signs(qr.r().transpose().resize(mu.nrows(), mu.ncols(), 0.0))
}

/// Flips columns so that each column's first non-negligible entry is positive.
pub fn canonical_signs(mut mu: DMatrix<f64>) -> DMatrix<f64> {
    let scale = mu.amax();
    for j in 0..mu.ncols() {
        let lead = mu.column(j).iter().copied().find(|v| v.abs() > 1e-12 * scale).unwrap_or(0.0);
        if lead < 0.0 {
            mu.column_mut(j).neg_mut();
        }
    }
    mu
}

struct Gauge {
    rows: usize,
    k: usize,
    positions: Vec<(usize, usize)>,
    free_sigma2: bool,
}

impl Gauge {
    fn pack(&self, mu: &DMatrix<f64>, sigma2: f64) -> Vec<f64> {
        let l = gauge_fix(mu);
        let mut x: Vec<f64> = self.positions.iter().map(|&(i, j)| l[(i, j)]).collect();
        if self.free_sigma2 {
            x.push(sigma2.ln());
        }
        x
    }

    fn unpack(&self, x: &[f64], sigma2_fixed: f64) -> (DMatrix<f64>, f64) {
        let mut mu = DMatrix::zeros(self.rows, self.k);
        for (&(i, j), v) in self.positions.iter().zip(x) {
            mu[(i, j)] = *v;
        }
        let sigma2 = if self.free_sigma2 { x[self.positions.len()].exp() } else { sigma2_fixed };
        (mu, sigma2)
    }
}

/// Maximum-likelihood location under an isotropic kernel.
///
/// The likelihood is invariant under `μ → μQ`, so the search runs over
/// lower-trapezoidal `μ` and the reported estimate has column signs fixed by
/// [`canonical_signs`]. Start 0 is the mean of `r_i W_i` (each already in its
/// own principal-axis frame); the other starts add independent
/// `N(0, (√σ²/4)²)` perturbations drawn from per-start streams. Starts run in
/// parallel and the best is chosen by start index on ties. The result has
/// `converged = false` when no start meets the simplex tolerances.
pub fn fit_location(
    sample: &SampleOfShapes,
    kind: IsotropicKind,
    sigma2: f64,
    opt: &OptimizerConfig,
    ctrl: &SeriesControl,
) -> Result<FitResult> {
    fit_location_with_starts(sample, kind, sigma2, opt, ctrl, &[])
}

/// [`fit_location`] with additional caller-supplied starting means.
pub fn fit_location_with_starts(
    sample: &SampleOfShapes,
    kind: IsotropicKind,
    sigma2: f64,
    opt: &OptimizerConfig,
    ctrl: &SeriesControl,
    extra_starts: &[DMatrix<f64>],
) -> Result<FitResult> {
    if sample.is_empty() {
        return Err(domain("cannot fit an empty sample"));
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(domain(format!("σ² must be > 0, got {sigma2}")));
    }
    if opt.starts < 1 {
        return Err(domain("optimizer needs at least one start"));
    }
    ctrl.validate()?;
    let rows = sample.n_landmarks - 1;
    let gauge =
        Gauge { rows, k: sample.k, positions: gauge_positions(rows, sample.k), free_sigma2: opt.free_sigma2 };
    let scale = sigma2.sqrt();
    let base = sample.mean_configuration();
    let noise = Normal::new(0.0, 0.25 * scale).expect("positive scale");
    let mut starts: Vec<Vec<f64>> = (0..opt.starts)
        .map(|s| {
            let mut mu = base.clone();
            if s > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
                rng.set_stream(s as u64);
                for v in mu.iter_mut() {
                    *v += noise.sample(&mut rng);
                }
            }
            gauge.pack(&mu, sigma2)
        })
        .collect();
    for mu in extra_starts {
        if mu.shape() != (rows, sample.k) {
            return Err(dimension("extra start has the wrong shape"));
        }
        starts.push(gauge.pack(mu, sigma2));
    }

    let objective = |x: &[f64]| {
        let (mu, s2) = gauge.unpack(x, sigma2);
        match log_likelihood(sample, &mu, s2, kind, ctrl) {
            Ok(ll) if ll.is_finite() => -ll,
            _ => f64::INFINITY,
        }
    };
    let mut step: Vec<f64> = vec![0.25 * scale; gauge.positions.len()];
    if opt.free_sigma2 {
        step.push(0.25);
    }
    let runs: Vec<SimplexResult> = starts
        .par_iter()
        .map(|x0| nelder_mead(objective, x0, &step, opt.ftol, opt.xtol, opt.max_evaluations))
        .collect();
    let evaluations = runs.iter().map(|r| r.evaluations).sum();
    let starts_converged = runs.iter().filter(|r| r.converged).count();
    let best = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.f.total_cmp(&b.1.f).then(a.0.cmp(&b.0)))
        .map(|(_, r)| r)
        .expect("at least one start");
    let (mu, s2) = gauge.unpack(&best.x, sigma2);
    let loglik = log_likelihood(sample, &mu, s2, kind, ctrl)?;
    let n_params = rows * sample.k + usize::from(opt.free_sigma2);
    Ok(FitResult {
        kind,
        mu_hat: canonical_signs(mu),
        sigma2: s2,
        loglik,
        n_params,
        sample_size: sample.len(),
        bic_star: bic_star(loglik, n_params, sample.len()),
        converged: best.converged,
        evaluations,
        starts_converged,
    })
}

/// BIC* comparison of the three isotropic kernels on one sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub fits: Vec<FitResult>,
    /// Index into `fits` of the smallest BIC*.
    pub best: usize,
    pub pairwise: Vec<PairwiseEvidence>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairwiseEvidence {
    pub preferred: IsotropicKind,
    pub other: IsotropicKind,
    pub delta_bic: f64,
    pub grade: Evidence,
}

pub fn compare_models(
    sample: &SampleOfShapes,
    sigma2: f64,
    opt: &OptimizerConfig,
    ctrl: &SeriesControl,
) -> Result<Comparison> {
    let fits = IsotropicKind::ALL
        .iter()
        .map(|&kind| fit_location(sample, kind, sigma2, opt, ctrl))
        .collect::<Result<Vec<_>>>()?;
    let best =
        (0..fits.len()).min_by(|&a, &b| fits[a].bic_star.total_cmp(&fits[b].bic_star)).expect("three fits");
    let mut pairwise = Vec::new();
    for i in 0..fits.len() {
        for j in i + 1..fits.len() {
            let (p, o) = if fits[i].bic_star <= fits[j].bic_star { (i, j) } else { (j, i) };
            let delta = fits[o].bic_star - fits[p].bic_star;
            pairwise.push(PairwiseEvidence {
                preferred: fits[p].kind,
                other: fits[o].kind,
                delta_bic: delta,
                grade: evidence_grade(delta)?,
            });
        }
    }
    Ok(Comparison { fits, best, pairwise })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LrTest {
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
    pub h0: FitResult,
    pub h1: [FitResult; 2],
}

/// Statistics below this are reported as optimizer failures.
pub const LR_NEGATIVE_TOLERANCE: f64 = 1e-6;

/// Likelihood-ratio test of `H0: μ₁ = μ₂` against separate means, with
/// `-2 ln Λ` referred to `χ²` on `(N-1)K` degrees of freedom.
///
/// The separate fits are also started from the pooled optimum, so the
/// statistic is non-negative up to summation round-off.
pub fn lr_test_equal_means(
    sample1: &SampleOfShapes,
    sample2: &SampleOfShapes,
    kind: IsotropicKind,
    sigma2: f64,
    opt: &OptimizerConfig,
    ctrl: &SeriesControl,
) -> Result<LrTest> {
    if sample1.n_landmarks != sample2.n_landmarks || sample1.k != sample2.k {
        return Err(dimension("both groups must share N and K"));
    }
    if sample1.mode != sample2.mode {
        return Err(domain("both groups must use the same mode"));
    }
    let pooled = sample1.pooled(sample2, "pooled")?;
    let h0 = fit_location(&pooled, kind, sigma2, opt, ctrl)?;
    let seed_from_h0 = [h0.mu_hat.clone()];
    let h1a = fit_location_with_starts(sample1, kind, sigma2, opt, ctrl, &seed_from_h0)?;
    let h1b = fit_location_with_starts(sample2, kind, sigma2, opt, ctrl, &seed_from_h0)?;
    let statistic = 2.0 * (h1a.loglik + h1b.loglik - h0.loglik);
    if statistic < -LR_NEGATIVE_TOLERANCE {
        return Err(Error::NonConvergence(format!(
            "likelihood-ratio statistic {statistic:e} is negative; the pooled fit beat the separate fits"
        )));
    }
    let df = ((sample1.n_landmarks - 1) * sample1.k) as u32;
    let p_value = chi_square_sf(statistic.max(0.0), df)?;
    Ok(LrTest { statistic, df, p_value, h0, h1: [h1a, h1b] })
}
