//! Monte Carlo oracles: Haar frames, forward simulation of landmark
//! configurations, normalization mass of the shape density, and binned
//! agreement between simulated and analytic shape angles.
//!
//! Randomness comes from ChaCha8 streams keyed by `(seed, chunk)`, so
//! results do not depend on how chunks are scheduled across threads.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densities::shape_logdensity;
use crate::error::{domain, Result};
use crate::geometry::{helmert_submatrix, preprocess, rotated_angles, LandmarkSet, Mode};
use crate::models::ModelSpec;
use crate::special_fn::chi_square_upper_quantile;
use crate::zonal::SeriesControl;

const CHUNK: usize = 1024;

/// Generator for chunk `stream` of a run seeded with `seed`.
pub fn chunk_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Haar-uniform `n×K` frame with orthonormal rows (`n ≤ K`).
pub fn random_stiefel_frame<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> DMatrix<f64> {
    let g = gaussian_matrix(k, n, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q.transpose()
}

/// Haar-uniform element of `O(K)`, or of `SO(K)` for [`Mode::NoReflection`].
pub fn random_rotation<R: Rng + ?Sized>(k: usize, mode: Mode, rng: &mut R) -> DMatrix<f64> {
    let mut p = random_stiefel_frame(k, k, rng);
    if mode == Mode::NoReflection && p.determinant() < 0.0 {
        p.row_mut(0).neg_mut();
    }
    p
}

/// Draws `count` configurations `X` (N×K) whose centred, whitened form
/// `Y = LXΘ^{-1/2}` follows the model.
///
/// `Y = μΘ^{-1/2} + Σ^{1/2} E`, where `vec E = ρU` with `U` uniform on the
/// unit sphere of `ℝ^M` and `ρ²` drawn from the radial law
/// `Gamma(M/2 + T - 1, rate R)`. Configurations are lifted back with
/// `X = L'YΘ^{1/2}`, which has centroid zero.
pub fn sample_landmarks(model: &ModelSpec, count: usize, seed: u64) -> Result<Vec<LandmarkSet>> {
    let gen = model.generator();
    gen.validate()?;
    let (rows, k) = (model.rows(), model.dim());
    let m_total = rows * k;
    let radial = Gamma::new(m_total as f64 / 2.0 + gen.t - 1.0, 1.0 / gen.r)
        .map_err(|e| domain(format!("radial law: {e}")))?;
    let sigma_half = sym_sqrt(model.sigma());
    let theta_half = sym_sqrt(model.theta());
    let lift = helmert_submatrix(rows + 1)?.transpose();
    let nu = model.whitened_mu().clone();
    let chunks = count.div_ceil(CHUNK);
    let out: Vec<Vec<LandmarkSet>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c as u64);
            let n = CHUNK.min(count - c * CHUNK);
            (0..n)
                .map(|i| {
                    let mut e = gaussian_matrix(rows, k, &mut rng);
                    let rho = radial.sample(&mut rng).sqrt();
                    e *= rho / e.norm();
                    let y = &nu + &sigma_half * e;
                    let x = &lift * y * &theta_half;
                    LandmarkSet::new(format!("sim-{}", c * CHUNK + i + 1), x)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(out.into_iter().flatten().collect())
}

fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

fn angle_upper(i: usize, m: usize) -> f64 {
    if i + 1 == m {
        2.0 * PI
    } else {
        PI
    }
}

/// Monte Carlo mass `∫ f(u) du` of the shape density over the angle box,
/// sampling `u` uniformly. Returns `(mass, standard_error)`.
pub fn mc_normalization(
    model: &ModelSpec,
    mode: Mode,
    ctrl: &SeriesControl,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(domain("normalization needs at least 2 samples"));
    }
    let m = model.rows() * model.dim() - 1;
    let ln_volume: f64 = (0..m).map(|i| angle_upper(i, m).ln()).sum();
    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c as u64);
            let n = CHUNK.min(samples - c * CHUNK);
            let mut u = vec![0.0; m];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                for (i, v) in u.iter_mut().enumerate() {
                    *v = rng.random::<f64>() * angle_upper(i, m);
                }
                let d = shape_logdensity(&u, model, mode, ctrl)?;
                let w = (d.log_density + ln_volume).exp();
                s += w;
                s2 += w * w;
            }
            Ok((s, s2))
        })
        .collect::<Result<Vec<_>>>()?;
    let (s, s2) = partial.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = samples as f64;
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// One 1-D marginal of the simulation check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginalCheck {
    /// 0-based angle index.
    pub coordinate: usize,
    pub statistic: f64,
    pub df: u32,
    pub critical_value: f64,
    pub passed: bool,
    /// `(lower, upper, observed, expected)` after merging sparse bins.
    pub bins: Vec<(f64, f64, f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationReport {
    pub sim_count: usize,
    /// Family-wise level; each marginal is tested at `level / m`.
    pub level: f64,
    pub marginals: Vec<MarginalCheck>,
    pub passed: bool,
}

const GL2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

/// Compares simulated shape angles with the analytic density on every 1-D
/// marginal.
///
/// Simulated configurations are whitened, rotated by an independent
/// Haar-uniform element of `O(K)` and charted, which is the representative
/// whose law is the shape density. Each angle range is cut into
/// `⌈count^{1/3}⌉` equal bins; expected bin masses come from a tensor
/// two-point Gauss–Legendre rule per bin and are normalized by the total
/// analytic mass, so the check does not depend on `mode`. Bins with expected
/// count below 5 are merged with their neighbours and each marginal's χ²
/// statistic is compared with its `1 - 0.01/m` quantile.
pub fn simulation_vs_density(
    model: &ModelSpec,
    mode: Mode,
    ctrl: &SeriesControl,
    sim_count: usize,
    seed: u64,
) -> Result<SimulationReport> {
    let m = model.rows() * model.dim() - 1;
    let bins = (sim_count as f64).cbrt().ceil() as usize;
    let nodes_per_dim = 2 * bins;
    let grid_size = (nodes_per_dim as f64).powi(m as i32);
    if grid_size > 2e7 {
        return Err(domain(format!(
            "marginal grid of {grid_size:.0} points is too large; use fewer simulations or landmarks"
        )));
    }
    let sets = sample_landmarks(model, sim_count, seed)?;
    let theta = model.theta().clone();
    let k = model.dim();
    let angles: Vec<Vec<f64>> = sets
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut rng = chunk_rng(seed ^ 0x005e_ed0f_5a4d, c as u64);
            chunk
                .iter()
                .map(|s| {
                    let y = preprocess(s, &theta)?;
                    let p = random_rotation(k, Mode::Reflection, &mut rng);
                    rotated_angles(&y, &p)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    // Composite rule per dimension: node positions, weights and bin index.
    let rules: Vec<Vec<(f64, f64, usize)>> = (0..m)
        .map(|i| {
            let width = angle_upper(i, m) / bins as f64;
            (0..bins)
                .flat_map(|b| {
                    let mid = (b as f64 + 0.5) * width;
                    GL2.iter().map(move |x| (mid + 0.5 * width * x, 0.5 * width, b))
                })
                .collect()
        })
        .collect();
    let total_nodes = nodes_per_dim.pow(m as u32);
    let rows_per_task = nodes_per_dim;
    let masses: Vec<Vec<f64>> = (0..total_nodes / rows_per_task)
        .into_par_iter()
        .map(|outer| {
            let mut acc = vec![0.0; m * bins];
            let mut u = vec![0.0; m];
            let mut idx = vec![0usize; m];
            for inner in 0..rows_per_task {
                let mut flat = outer * rows_per_task + inner;
                for i in idx.iter_mut() {
                    *i = flat % nodes_per_dim;
                    flat /= nodes_per_dim;
                }
                let mut weight = 1.0;
                for d in 0..m {
                    let (x, w, _) = rules[d][idx[d]];
                    u[d] = x;
                    weight *= w;
                }
                let f = shape_logdensity(&u, model, Mode::Reflection, ctrl)?.log_density.exp();
                for d in 0..m {
                    acc[d * bins + rules[d][idx[d]].2] += weight * f;
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut expected_mass = vec![0.0; m * bins];
    for part in &masses {
        for (e, p) in expected_mass.iter_mut().zip(part) {
            *e += p;
        }
    }

    let level = 0.01;
    let n = angles.len() as f64;
    let mut marginals = Vec::with_capacity(m);
    for d in 0..m {
        let width = angle_upper(d, m) / bins as f64;
        let mass = &expected_mass[d * bins..(d + 1) * bins];
        let total: f64 = mass.iter().sum();
        let mut observed = vec![0.0; bins];
        for a in &angles {
            let b = ((a[d] / width) as usize).min(bins - 1);
            observed[b] += 1.0;
        }
        let merged = merge_sparse_bins(
            (0..bins)
                .map(|b| (b as f64 * width, (b + 1) as f64 * width, observed[b], n * mass[b] / total))
                .collect(),
            5.0,
        );
        let statistic: f64 = merged.iter().map(|&(_, _, o, e)| (o - e) * (o - e) / e).sum();
        let df = (merged.len().max(2) - 1) as u32;
        let critical_value = chi_square_upper_quantile(level / m as f64, df)?;
        marginals.push(MarginalCheck {
            coordinate: d,
            statistic,
            df,
            critical_value,
            passed: statistic < critical_value,
            bins: merged,
        });
    }
    let passed = marginals.iter().all(|c| c.passed);
    let _ = mode;
    Ok(SimulationReport { sim_count, level, marginals, passed })
}

fn merge_sparse_bins(bins: Vec<(f64, f64, f64, f64)>, min_expected: f64) -> Vec<(f64, f64, f64, f64)> {
    let mut out: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut pending: Option<(f64, f64, f64, f64)> = None;
    for b in bins {
        let cur = match pending.take() {
            Some(p) => (p.0, b.1, p.2 + b.2, p.3 + b.3),
            None => b,
        };
        if cur.3 >= min_expected {
            out.push(cur);
        } else {
            pending = Some(cur);
        }
    }
    if let Some(p) = pending {
        match out.last_mut() {
            Some(last) => {
                last.1 = p.1;
                last.2 += p.2;
                last.3 += p.3;
            }
            None => out.push(p),
        }
    }
    out
}
