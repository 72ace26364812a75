//! Zonal polynomials of symmetric-matrix spectra and the truncated zonal
//! series shared by every density.
//!
//! Zonal polynomials are evaluated through the Jack polynomial recursion over
//! the number of variables (parameter α = 2):
//!
//! ```text
//! J_κ(x_1..x_n) = Σ_{μ ⊆ κ, κ/μ horizontal strip} J_μ(x_1..x_{n-1}) x_n^{|κ|-|μ|} β_κμ
//! ```
//!
//! with `C_κ = α^k k! / j_κ · J_κ`. The recursion coefficients depend only on
//! the partitions, so they are built once per `(weight, max_parts)` and shared
//! through a process-wide cache. Values are produced directly in the `C_κ`
//! normalization on the spectrum divided by its largest magnitude, and the
//! scale is restored in log space.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numeric::{LogAccumulator, LogSign};
use crate::special_fn::{
    enumerate_partitions, gen_pochhammer_ls, ln_factorial, multivariate_gamma, Partition,
};
use crate::verify::{chunk_rng, random_stiefel_frame};

const ALPHA: f64 = 2.0;

/// Truncation policy for every zonal series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesControl {
    /// Highest degree `t` that may be summed.
    pub max_degree: usize,
    /// Relative size below which a degree block counts as negligible.
    pub rel_tol: f64,
    /// Number of consecutive negligible blocks required to stop.
    pub tail_window: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self { max_degree: 60, rel_tol: 1e-12, tail_window: 3 }
    }
}

impl SeriesControl {
    pub fn validate(&self) -> Result<()> {
        if self.max_degree < 1 {
            return Err(domain("series max_degree must be >= 1"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(domain("series rel_tol must be > 0"));
        }
        if self.tail_window < 1 {
            return Err(domain("series tail_window must be >= 1"));
        }
        Ok(())
    }
}

/// Sum of a truncated series plus its convergence diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: LogSign,
    /// Highest degree included in the sum.
    pub degrees_used: usize,
    /// Summed absolute size of the final tail window relative to `|value|`.
    pub relative_tail: f64,
}

// ---------------------------------------------------------------------------
// Recursion plan

#[derive(Debug)]
struct Strip {
    mu_index: usize,
    power: u32,
    coef: f64,
}

#[derive(Debug)]
struct KappaEntry {
    kappa: Partition,
    strips: Vec<Strip>,
}

#[derive(Debug)]
struct DegreeBlock {
    offset: usize,
    entries: Vec<KappaEntry>,
}

#[derive(Debug, Default)]
struct PlanForParts {
    blocks: Vec<Arc<DegreeBlock>>,
    index: HashMap<Partition, usize>,
}

type PlanCache = RwLock<HashMap<usize, PlanForParts>>;

fn plan_cache() -> &'static PlanCache {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Returns the recursion block for `weight` over at most `max_parts` parts,
/// building (and caching) every lower weight on first use.
fn degree_block(weight: usize, max_parts: usize) -> Arc<DegreeBlock> {
    {
        let cache = plan_cache().read().expect("zonal plan cache poisoned");
        if let Some(plan) = cache.get(&max_parts) {
            if let Some(block) = plan.blocks.get(weight) {
                return Arc::clone(block);
            }
        }
    }
    let mut cache = plan_cache().write().expect("zonal plan cache poisoned");
    let plan = cache.entry(max_parts).or_default();
    while plan.blocks.len() <= weight {
        let t = plan.blocks.len();
        let block = build_block(t, max_parts, plan);
        plan.blocks.push(Arc::new(block));
    }
    Arc::clone(&plan.blocks[weight])
}

fn build_block(weight: usize, max_parts: usize, plan: &mut PlanForParts) -> DegreeBlock {
    let offset = plan.index.len();
    let kappas = enumerate_partitions(weight as u32, max_parts);
    for (i, k) in kappas.iter().enumerate() {
        plan.index.insert(k.clone(), offset + i);
    }
    let ln_fact_t = ln_factorial(weight as u32);
    let entries = kappas
        .into_iter()
        .map(|kappa| {
            let ln_j_kappa = ln_hook_product(&kappa);
            let strips = horizontal_strips(&kappa)
                .into_iter()
                .map(|mu| {
                    let mu_weight = mu.weight();
                    let power = weight as u32 - mu_weight;
                    let ln_coef = f64::from(power) * ALPHA.ln() + ln_beta(&kappa, &mu) + ln_hook_product(&mu)
                        - ln_j_kappa
                        + ln_fact_t
                        - ln_factorial(mu_weight);
                    Strip { mu_index: plan.index[&mu], power, coef: ln_coef.exp() }
                })
                .collect();
            KappaEntry { kappa, strips }
        })
        .collect();
    DegreeBlock { offset, entries }
}

/// Upper and lower hook lengths of cell `(i, j)` (0-based) of `nu`.
fn hooks(nu: &Partition, i: usize, j: u32) -> (f64, f64) {
    let leg = f64::from(nu.conjugate_part(j)) - (i as f64 + 1.0);
    let arm = f64::from(nu.part(i)) - (f64::from(j) + 1.0);
    let upper = leg + ALPHA * (arm + 1.0);
    let lower = leg + 1.0 + ALPHA * arm;
    (upper, lower)
}

fn ln_hook_product(nu: &Partition) -> f64 {
    let mut ln = 0.0;
    for (i, &row) in nu.parts().iter().enumerate() {
        for j in 0..row {
            let (u, l) = hooks(nu, i, j);
            ln += u.ln() + l.ln();
        }
    }
    ln
}

fn ln_beta(kappa: &Partition, mu: &Partition) -> f64 {
    let cell_factor = |nu: &Partition, i: usize, j: u32| {
        let (upper, lower) = hooks(nu, i, j);
        if kappa.conjugate_part(j) == mu.conjugate_part(j) {
            upper
        } else {
            lower
        }
    };
    let mut ln = 0.0;
    for (i, &row) in kappa.parts().iter().enumerate() {
        for j in 0..row {
            ln += cell_factor(kappa, i, j).ln();
        }
    }
    for (i, &row) in mu.parts().iter().enumerate() {
        for j in 0..row {
            ln -= cell_factor(mu, i, j).ln();
        }
    }
    ln
}

/// All `μ` with `κ_{i+1} ≤ μ_i ≤ κ_i`, so that `κ/μ` is a horizontal strip.
fn horizontal_strips(kappa: &Partition) -> Vec<Partition> {
    let len = kappa.len();
    let mut out = Vec::new();
    let mut current = vec![0u32; len];
    fn rec(kappa: &Partition, i: usize, current: &mut Vec<u32>, out: &mut Vec<Partition>) {
        if i == current.len() {
            out.push(Partition::new(current.clone()).expect("interlacing parts are ordered"));
            return;
        }
        for v in kappa.part(i + 1)..=kappa.part(i) {
            current[i] = v;
            rec(kappa, i + 1, current, out);
        }
    }
    rec(kappa, 0, &mut current, &mut out);
    let _ = len;
    out
}

type PochhammerCache = RwLock<HashMap<(u64, usize), Vec<Arc<Vec<LogSign>>>>>;

/// `(a)_κ` for every `κ` of one plan block, cached per `(a, max_parts)`.
fn pochhammer_block(a: f64, weight: usize, max_parts: usize) -> Arc<Vec<LogSign>> {
    static CACHE: OnceLock<PochhammerCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    let key = (a.to_bits(), max_parts);
    {
        let read = cache.read().expect("Pochhammer cache poisoned");
        if let Some(block) = read.get(&key).and_then(|v| v.get(weight)) {
            return Arc::clone(block);
        }
    }
    let mut write = cache.write().expect("Pochhammer cache poisoned");
    let blocks = write.entry(key).or_default();
    while blocks.len() <= weight {
        let plan = degree_block(blocks.len(), max_parts);
        let values = plan.entries.iter().map(|e| gen_pochhammer_ls(a, &e.kappa)).collect();
        blocks.push(Arc::new(values));
    }
    Arc::clone(&blocks[weight])
}

// ---------------------------------------------------------------------------
// Evaluation

/// One degree block of zonal values: `C_κ(x)` for every `κ ⊢ t` with at most
/// as many parts as the spectrum has non-zero entries.
pub struct ZonalBlock<'a> {
    pub degree: usize,
    parts: usize,
    block: Arc<DegreeBlock>,
    values: &'a [f64],
    ln_scale: f64,
}

impl ZonalBlock<'_> {
    pub fn len(&self) -> usize {
        self.block.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.block.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Partition, LogSign)> + '_ {
        let t = self.degree as f64;
        self.block.entries.iter().enumerate().map(move |(i, e)| {
            let v = self.values[self.block.offset + i];
            (&e.kappa, LogSign::from_f64(v).scale_ln(t * self.ln_scale))
        })
    }
}

/// Degree-by-degree evaluator of `C_κ` on a fixed spectrum.
pub struct ZonalEvaluator {
    xs: Vec<f64>,
    ln_scale: f64,
    /// `tables[n][idx] = C_κ(x_1..x_n)` on the scaled spectrum.
    tables: Vec<Vec<f64>>,
    powers: Vec<Vec<f64>>,
    next_degree: usize,
}

impl ZonalEvaluator {
    /// Exact zeros are dropped and the rest sorted in descending order, so
    /// the result depends only on the multiset of non-zero eigenvalues.
    pub fn new(eigenvalues: &[f64]) -> Self {
        let mut xs: Vec<f64> = eigenvalues.iter().copied().filter(|&x| x != 0.0).collect();
        xs.sort_by(|a, b| b.total_cmp(a));
        let scale = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let ln_scale = if scale > 0.0 { scale.ln() } else { 0.0 };
        if scale > 0.0 {
            for x in xs.iter_mut() {
                *x /= scale;
            }
        }
        let d = xs.len();
        Self { tables: vec![Vec::new(); d + 1], powers: vec![vec![1.0]; d], xs, ln_scale, next_degree: 0 }
    }

    /// Number of non-zero eigenvalues.
    pub fn rank(&self) -> usize {
        self.xs.len()
    }

    pub fn next_block(&mut self) -> ZonalBlock<'_> {
        let t = self.next_degree;
        self.next_degree += 1;
        let d = self.xs.len();
        let block = degree_block(t, d.max(1));
        if d == 0 {
            // Only the empty partition has a non-zero value.
            let table = &mut self.tables[0];
            table.resize(block.offset + block.entries.len(), 0.0);
            if t == 0 {
                table[0] = 1.0;
            }
            return ZonalBlock {
                degree: t,
                parts: 1,
                block,
                values: &self.tables[0],
                ln_scale: self.ln_scale,
            };
        }
        for (n, x) in self.xs.iter().enumerate() {
            let pw = &mut self.powers[n];
            while pw.len() <= t {
                let last = *pw.last().expect("powers start at x^0");
                pw.push(last * x);
            }
        }
        let end = block.offset + block.entries.len();
        for table in self.tables.iter_mut() {
            table.resize(end, 0.0);
        }
        if t == 0 {
            for table in self.tables.iter_mut() {
                table[0] = 1.0;
            }
        } else {
            for n in 1..=d {
                let (lower, upper) = self.tables.split_at_mut(n);
                let prev = &lower[n - 1];
                let cur = &mut upper[0];
                let pw = &self.powers[n - 1];
                for (i, entry) in block.entries.iter().enumerate() {
                    if entry.kappa.len() > n {
                        continue;
                    }
                    let mut s = 0.0;
                    for strip in &entry.strips {
                        let v = prev[strip.mu_index];
                        if v != 0.0 {
                            s += v * pw[strip.power as usize] * strip.coef;
                        }
                    }
                    cur[block.offset + i] = s;
                }
            }
        }
        ZonalBlock { degree: t, parts: d, block, values: &self.tables[d], ln_scale: self.ln_scale }
    }
}

/// Zonal polynomial `C_κ` evaluated at a spectrum.
///
/// Returns exactly zero when `κ` has more parts than the spectrum has
/// non-zero entries.
pub fn zonal_poly(kappa: &Partition, eigenvalues: &[f64]) -> f64 {
    zonal_poly_ls(kappa, eigenvalues).to_f64()
}

/// [`zonal_poly`] in log-sign form.
pub fn zonal_poly_ls(kappa: &Partition, eigenvalues: &[f64]) -> LogSign {
    let mut ev = ZonalEvaluator::new(eigenvalues);
    if kappa.len() > ev.rank() {
        return LogSign::ZERO;
    }
    let target = kappa.weight() as usize;
    for _ in 0..target {
        ev.next_block();
    }
    let block = ev.next_block();
    let value = block.iter().find(|(k, _)| *k == kappa).map(|(_, v)| v);
    value.unwrap_or(LogSign::ZERO)
}

/// Evaluates `Σ_t Σ_{κ⊢t} coeff(t, κ) C_κ(x) / (t! (a)_κ)` block by block.
///
/// The sum stops once `ctrl.tail_window` consecutive degree blocks each have
/// absolute mass below `ctrl.rel_tol` times the running total; reaching
/// `ctrl.max_degree` first is a [`Error::Truncation`].
pub fn zonal_series<F>(
    mut coeff: F,
    argument_eigenvalues: &[f64],
    denominator_a: f64,
    ctrl: &SeriesControl,
) -> Result<SeriesValue>
where
    F: FnMut(usize, &Partition) -> Result<LogSign>,
{
    drive_series(argument_eigenvalues, ctrl, |t, block| {
        let poch = pochhammer_block(denominator_a, t, block.parts);
        let ln_t_fact = ln_factorial(t as u32);
        let mut acc = LogAccumulator::new();
        for ((kappa, c), p) in block.iter().zip(poch.iter()) {
            if c.is_zero() {
                continue;
            }
            let k = coeff(t, kappa)?;
            if k.is_zero() {
                continue;
            }
            if p.is_zero() {
                return Err(vanishing_pochhammer(denominator_a, kappa));
            }
            acc.add((k * c / *p).scale_ln(-ln_t_fact));
        }
        Ok((acc.value(), acc.abs_total()))
    })
}

/// [`zonal_series`] for coefficients that depend on the degree only:
/// `Σ_t coeff(t)/t! Σ_{κ⊢t} C_κ(x) / (a)_κ`.
///
/// Each block's inner sum is formed in scaled floating point, so `coeff` is
/// called once per degree.
pub fn zonal_series_by_degree<F>(
    mut coeff: F,
    argument_eigenvalues: &[f64],
    denominator_a: f64,
    ctrl: &SeriesControl,
) -> Result<SeriesValue>
where
    F: FnMut(usize) -> Result<LogSign>,
{
    drive_series(argument_eigenvalues, ctrl, |t, block| {
        let poch = pochhammer_block(denominator_a, t, block.parts);
        let values = &block.values[block.block.offset..block.block.offset + block.len()];
        // Reference magnitude: the smallest Pochhammer of the block.
        let ln_ref = poch
            .iter()
            .zip(values)
            .filter(|(p, &v)| v != 0.0 && !p.is_zero())
            .map(|(p, _)| p.ln_abs)
            .fold(f64::INFINITY, f64::min);
        let (mut sum, mut abs) = (0.0, 0.0);
        for ((entry, p), &v) in block.block.entries.iter().zip(poch.iter()).zip(values) {
            if v == 0.0 {
                continue;
            }
            if p.is_zero() {
                return Err(vanishing_pochhammer(denominator_a, &entry.kappa));
            }
            let term = v * f64::from(p.sign) * (ln_ref - p.ln_abs).exp();
            sum += term;
            abs += term.abs();
        }
        if abs == 0.0 {
            return Ok((LogSign::ZERO, LogSign::ZERO));
        }
        let k = coeff(t)?;
        if k.is_zero() {
            return Ok((LogSign::ZERO, LogSign::ZERO));
        }
        let shift = t as f64 * block.ln_scale - ln_ref - ln_factorial(t as u32);
        let value = (LogSign::from_f64(sum) * k).scale_ln(shift);
        let abs = LogSign::positive(abs.ln() + k.ln_abs + shift);
        Ok((value, abs))
    })
}

fn vanishing_pochhammer(a: f64, kappa: &Partition) -> Error {
    domain(format!("generalized Pochhammer ({a})_{kappa} vanishes"))
}

/// Shared truncation loop: `block_sum(t, block)` returns the block's signed
/// contribution and its absolute mass.
fn drive_series<B>(
    argument_eigenvalues: &[f64],
    ctrl: &SeriesControl,
    mut block_sum: B,
) -> Result<SeriesValue>
where
    B: FnMut(usize, &ZonalBlock<'_>) -> Result<(LogSign, LogSign)>,
{
    ctrl.validate()?;
    let mut ev = ZonalEvaluator::new(argument_eigenvalues);
    let mut total = LogAccumulator::new();
    let mut window: Vec<LogSign> = Vec::with_capacity(ctrl.tail_window + 1);
    let mut quiet = 0usize;
    for t in 0..=ctrl.max_degree {
        let block = ev.next_block();
        let (value, block_abs) = block_sum(t, &block)?;
        total.add(value);
        let sum = total.value();
        window.push(block_abs);
        if window.len() > ctrl.tail_window {
            window.remove(0);
        }
        let negligible =
            block_abs.is_zero() || (!sum.is_zero() && block_abs.ln_abs <= ctrl.rel_tol.ln() + sum.ln_abs);
        quiet = if negligible { quiet + 1 } else { 0 };
        if quiet >= ctrl.tail_window {
            return Ok(SeriesValue {
                value: sum,
                degrees_used: t,
                relative_tail: relative_tail(&window, sum),
            });
        }
    }
    let sum = total.value();
    Err(Error::Truncation {
        degrees_used: ctrl.max_degree,
        partial_log_abs: sum.ln_abs,
        relative_tail: relative_tail(&window, sum),
    })
}

fn relative_tail(window: &[LogSign], sum: LogSign) -> f64 {
    let mut acc = LogAccumulator::new();
    for w in window {
        acc.add(*w);
    }
    let tail = acc.value();
    if tail.is_zero() {
        0.0
    } else if sum.is_zero() {
        f64::INFINITY
    } else {
        (tail.ln_abs - sum.ln_abs).exp()
    }
}

/// Hypergeometric function `₀F₁(b; X)` of a matrix argument given by its
/// spectrum.
pub fn hypergeom_0f1(b: f64, matrix_eigenvalues: &[f64], ctrl: &SeriesControl) -> Result<f64> {
    hypergeom_0f1_ls(b, matrix_eigenvalues, ctrl).map(|s| s.value.to_f64())
}

pub fn hypergeom_0f1_ls(b: f64, matrix_eigenvalues: &[f64], ctrl: &SeriesControl) -> Result<SeriesValue> {
    zonal_series_by_degree(|_| Ok(LogSign::ONE), matrix_eigenvalues, b, ctrl)
}

/// `ln Vol(V_{n,K}) = ln[2^n π^{Kn/2} / Γ_n(K/2)]`, the total mass of the
/// Stiefel manifold under `(H dH')`.
pub fn ln_stiefel_volume(n: usize, k: usize) -> Result<f64> {
    if n > k {
        return Err(domain(format!("Stiefel manifold V_{{{n},{k}}} needs n <= K")));
    }
    let (nf, kf) = (n as f64, k as f64);
    Ok(nf * 2f64.ln() + kf * nf / 2.0 * std::f64::consts::PI.ln() - multivariate_gamma(n, kf / 2.0)?)
}

/// `∫_{V_{n,K}} [tr(Y + XH)]^p (H dH')` as a zonal series in `¼XX'`.
///
/// The expansion is the binomial series of `(tr Y + tr XH)^p`, so the
/// coefficients are the falling factorials `p(p-1)...(p-2f+1)`; only even
/// powers of `tr XH` survive the Haar average. Requires `tr Y ≠ 0` and, for
/// non-integer `p`, `tr Y > 0`. `x_gram_eigenvalues` is the spectrum of `XX'`.
pub fn lemma1_power_series(
    p: f64,
    y_trace: f64,
    x_gram_eigenvalues: &[f64],
    k: usize,
    n: usize,
    ctrl: &SeriesControl,
) -> Result<f64> {
    if y_trace == 0.0 {
        return Err(domain("power-series Stiefel integral needs tr Y != 0"));
    }
    let p_is_integer = p == p.round();
    if y_trace < 0.0 && !p_is_integer {
        return Err(domain("non-integer power of a negative trace is not real"));
    }
    let ln_vol = ln_stiefel_volume(n, k)?;
    let quarter: Vec<f64> = x_gram_eigenvalues.iter().map(|e| e / 4.0).collect();
    let ln_y = y_trace.abs().ln();
    let series = zonal_series_by_degree(
        |f| {
            let two_f = 2 * f as u32;
            let mut falling = LogSign::ONE;
            for l in 0..two_f {
                falling = falling * LogSign::from_f64(p - f64::from(l));
                if falling.is_zero() {
                    return Ok(LogSign::ZERO);
                }
            }
            let exponent = p - f64::from(two_f);
            let sign = if y_trace < 0.0 && (exponent.rem_euclid(2.0) - 1.0).abs() < 0.5 { -1 } else { 1 };
            Ok(falling * LogSign::new(exponent * ln_y, sign))
        },
        &quarter,
        k as f64 / 2.0,
        ctrl,
    )?;
    Ok(series.value.scale_ln(ln_vol).to_f64())
}

/// `∫_{V_{n,K}} tr(Y + XH) etr{r(Y + XH)} (H dH')`.
///
/// Evaluated as `Vol · e^{r tr Y} {tr Y ₀F₁(K/2; r²XX'/4) + ∂/∂r ₀F₁(K/2; r²XX'/4)}`,
/// where the derivative series is `Σ_f Σ_λ 2f r^{2f-1} C_λ(XX'/4) / ((K/2)_λ f!)`.
pub fn lemma1_exp_trace_series(
    r: f64,
    y_trace: f64,
    x_gram_eigenvalues: &[f64],
    k: usize,
    n: usize,
    ctrl: &SeriesControl,
) -> Result<f64> {
    let ln_vol = ln_stiefel_volume(n, k)?;
    let arg: Vec<f64> = x_gram_eigenvalues.iter().map(|e| r * r * e / 4.0).collect();
    let bessel = hypergeom_0f1_ls(k as f64 / 2.0, &arg, ctrl)?.value.to_f64();
    let derivative = if r == 0.0 {
        0.0
    } else {
        zonal_series_by_degree(|f| Ok(LogSign::from_f64(2.0 * f as f64 / r)), &arg, k as f64 / 2.0, ctrl)?
            .value
            .to_f64()
    };
    Ok((ln_vol + r * y_trace).exp() * (y_trace * bessel + derivative))
}

/// Monte Carlo estimate of `∫_{V_{n,K}} g(H) (H dH')` from Haar-uniform
/// `n×K` frames, returned as `(estimate, standard_error)`.
///
/// Frames come from orthonormalizing standard Gaussian matrices; sampling is
/// chunked with one counter-based stream per chunk, so results depend only on
/// `seed`.
pub fn stiefel_mc_integral<G>(
    integrand: G,
    n: usize,
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)>
where
    G: Fn(&DMatrix<f64>) -> f64 + Sync,
{
    if n > k {
        return Err(domain(format!("Stiefel frames need n <= K, got n={n}, K={k}")));
    }
    if samples < 100 {
        return Err(domain("Monte Carlo integration needs at least 100 samples"));
    }
    const CHUNK: usize = 4096;
    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<(f64, f64, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c as u64);
            let count = CHUNK.min(samples - c * CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let h = random_stiefel_frame(n, k, &mut rng);
                let v = integrand(&h);
                s += v;
                s2 += v * v;
            }
            (s, s2, count)
        })
        .collect();
    let (mut s, mut s2) = (0.0, 0.0);
    for (a, b, _) in &partial {
        s += a;
        s2 += b;
    }
    let nf = samples as f64;
    let mean = s / nf;
    let var = ((s2 / nf) - mean * mean).max(0.0) * nf / (nf - 1.0);
    let vol = ln_stiefel_volume(n, k)?.exp();
    Ok((vol * mean, vol * (var / nf).sqrt()))
}
