use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use ellshape::geometry::{helmert_submatrix, preprocess, svd_shape};
use ellshape::inference::{compare_models, fit_location, lr_test_equal_means, FitResult, SampleOfShapes};
use ellshape::landmark_io::parse_landmarks;
use ellshape::verify::{mc_normalization, simulation_vs_density};
use ellshape::{shape_logdensity, LandmarkSet, ModelSpec};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::config::{read_text, RunConfig};
use crate::CliError;

/// What a command hands back to `main`: the JSON `results`, the table for
/// stderr, and whether every optimizer run converged.
pub struct Report {
    pub results: Value,
    pub table: String,
    pub converged: bool,
}

impl Report {
    fn done(results: Value, table: String) -> Self {
        Self { results, table, converged: true }
    }
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Landmark file (`N K S` header, then S blocks of N rows)
    pub input: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DensityArgs {
    /// Landmark file (`N K S` header, then S blocks of N rows)
    pub input: PathBuf,

    /// Landmark file with one specimen giving the mean configuration; the
    /// central density is used when absent
    #[arg(long, value_name = "FILE")]
    pub mean: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    /// Landmarks of the first group
    pub group1: PathBuf,
    /// Landmarks of the second group
    pub group2: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Number of landmarks N of the checked model (K = 2)
    #[arg(long, default_value_t = 3)]
    pub landmarks: usize,

    /// Landmark file with one specimen giving the mean configuration
    #[arg(long, value_name = "FILE")]
    pub mean: Option<PathBuf>,

    /// Monte Carlo samples for the normalization check
    #[arg(long, default_value_t = 100_000)]
    pub mc_samples: usize,

    /// Simulated configurations for the marginal check
    #[arg(long, default_value_t = 100_000)]
    pub sim_count: usize,
}

pub fn load_landmarks(path: &Path) -> Result<Vec<LandmarkSet>, CliError> {
    let sets = parse_landmarks(&read_text(path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if sets.is_empty() {
        return Err(CliError::Input(format!("{}: no specimens", path.display())));
    }
    Ok(sets)
}

fn rows(m: &DMatrix<f64>) -> Value {
    Value::from(m.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>())
}

/// Helmertized mean from a one-specimen landmark file, or zero.
fn mean_matrix(path: Option<&Path>, n: usize, k: usize) -> Result<DMatrix<f64>, CliError> {
    let Some(path) = path else {
        return Ok(DMatrix::zeros(n - 1, k));
    };
    let sets = load_landmarks(path)?;
    let [mean] = sets.as_slice() else {
        return Err(CliError::Input(format!(
            "{}: the mean file must hold exactly one specimen",
            path.display()
        )));
    };
    if mean.coords.shape() != (n, k) {
        return Err(CliError::Input(format!(
            "{}: mean is {}×{}, the model needs {n}×{k}",
            path.display(),
            mean.coords.nrows(),
            mean.coords.ncols()
        )));
    }
    Ok(helmert_submatrix(n)? * &mean.coords)
}

fn isotropic_model(cfg: &RunConfig, mu: DMatrix<f64>, theta: DMatrix<f64>) -> Result<ModelSpec, CliError> {
    let rows = mu.nrows();
    let generator = cfg.generator(rows * mu.ncols())?;
    Ok(ModelSpec::new(generator, DMatrix::identity(rows, rows) * cfg.sigma2, theta, mu)?)
}

fn sample(cfg: &RunConfig, path: &Path) -> Result<SampleOfShapes, CliError> {
    let sets = load_landmarks(path)?;
    let theta = cfg.theta_matrix(sets[0].dim())?;
    Ok(SampleOfShapes::from_landmarks(path.display().to_string(), &sets, &theta, cfg.mode)?)
}

pub fn shape(cfg: &RunConfig, args: &InputArgs) -> Result<Report, CliError> {
    let sets = load_landmarks(&args.input)?;
    let theta = cfg.theta_matrix(sets[0].dim())?;
    let mut table = format!("{:<20} {:>14} {:>14}\n", "specimen", "size r", "J(u)");
    let mut items = Vec::with_capacity(sets.len());
    for s in &sets {
        let coords = preprocess(s, &theta)
            .and_then(|y| svd_shape(&y, cfg.mode))
            .map_err(|e| ellshape::Error::Specimen { id: s.id.clone(), source: Box::new(e) })?;
        let _ = writeln!(table, "{:<20} {:>14.6e} {:>14.6e}", s.id, coords.r, coords.jacobian);
        items.push(json!({
            "id": s.id,
            "r": coords.r,
            "w": rows(&coords.w),
            "u": coords.angles,
            "jacobian": coords.jacobian,
            "repeated_singular_values": coords.repeated_singular_values,
        }));
    }
    Ok(Report::done(json!({ "specimens": items }), table))
}

pub fn density(cfg: &RunConfig, args: &DensityArgs) -> Result<Report, CliError> {
    let sets = load_landmarks(&args.input)?;
    let (n, k) = sets[0].coords.shape();
    let theta = cfg.theta_matrix(k)?;
    let mu = mean_matrix(args.mean.as_deref(), n, k)?;
    let model = isotropic_model(cfg, mu, theta.clone())?;
    let ctrl = cfg.series();
    let mut table = format!("{:<20} {:>18} {:>8} {:>12}\n", "specimen", "log-density", "degrees", "tail");
    let mut items = Vec::with_capacity(sets.len());
    let mut total = 0.0;
    for s in &sets {
        let d = preprocess(s, &theta)
            .and_then(|y| svd_shape(&y, cfg.mode))
            .and_then(|c| shape_logdensity(&c.angles, &model, cfg.mode, &ctrl))
            .map_err(|e| ellshape::Error::Specimen { id: s.id.clone(), source: Box::new(e) })?;
        total += d.log_density;
        let _ = writeln!(
            table,
            "{:<20} {:>18.10} {:>8} {:>12.3e}",
            s.id, d.log_density, d.series_degrees_used, d.tail_bound
        );
        items.push(json!({
            "id": s.id,
            "log_density": d.log_density,
            "series_degrees_used": d.series_degrees_used,
            "tail_bound": d.tail_bound,
        }));
    }
    let _ = writeln!(table, "{:<20} {:>18.10}", "total", total);
    Ok(Report::done(json!({ "specimens": items, "total_log_density": total }), table))
}

fn fit_json(f: &FitResult) -> Value {
    json!({
        "kind": f.kind.label(),
        "mu_hat": rows(&f.mu_hat),
        "sigma2": f.sigma2,
        "loglik": f.loglik,
        "n_params": f.n_params,
        "sample_size": f.sample_size,
        "bic_star": f.bic_star,
        "converged": f.converged,
        "evaluations": f.evaluations,
        "starts_converged": f.starts_converged,
    })
}

fn fit_row(table: &mut String, f: &FitResult) {
    let _ = writeln!(
        table,
        "{:<10} {:>16.6} {:>14.6} {:>6} {:>10}",
        f.kind.label(),
        f.loglik,
        f.bic_star,
        f.n_params,
        if f.converged { "yes" } else { "NO" }
    );
}

const FIT_HEADER: &str = "model            log-lik          BIC*     np  converged\n";

pub fn fit(cfg: &RunConfig, args: &InputArgs) -> Result<Report, CliError> {
    let s = sample(cfg, &args.input)?;
    let f = fit_location(&s, cfg.isotropic_kind()?, cfg.sigma2, &cfg.optimizer(), &cfg.series())?;
    let mut table = FIT_HEADER.to_string();
    fit_row(&mut table, &f);
    Ok(Report { converged: f.converged, results: fit_json(&f), table })
}

pub fn compare(cfg: &RunConfig, args: &InputArgs) -> Result<Report, CliError> {
    let s = sample(cfg, &args.input)?;
    let cmp = compare_models(&s, cfg.sigma2, &cfg.optimizer(), &cfg.series())?;
    let mut table = FIT_HEADER.to_string();
    for f in &cmp.fits {
        fit_row(&mut table, f);
    }
    table.push('\n');
    for p in &cmp.pairwise {
        let _ = writeln!(
            table,
            "{} over {}: ΔBIC* = {:.4} ({:?})",
            p.preferred.label(),
            p.other.label(),
            p.delta_bic,
            p.grade
        );
    }
    let pairwise: Vec<Value> = cmp
        .pairwise
        .iter()
        .map(|p| {
            json!({
                "preferred": p.preferred.label(),
                "other": p.other.label(),
                "delta_bic": p.delta_bic,
                "grade": p.grade,
            })
        })
        .collect();
    Ok(Report {
        converged: cmp.fits.iter().all(|f| f.converged),
        results: json!({
            "fits": cmp.fits.iter().map(fit_json).collect::<Vec<_>>(),
            "best": cmp.fits[cmp.best].kind.label(),
            "pairwise": pairwise,
        }),
        table,
    })
}

pub fn test(cfg: &RunConfig, args: &TestArgs) -> Result<Report, CliError> {
    let a = sample(cfg, &args.group1)?;
    let b = sample(cfg, &args.group2)?;
    let lr = lr_test_equal_means(&a, &b, cfg.isotropic_kind()?, cfg.sigma2, &cfg.optimizer(), &cfg.series())?;
    let mut table = FIT_HEADER.to_string();
    for f in std::iter::once(&lr.h0).chain(&lr.h1) {
        fit_row(&mut table, f);
    }
    let _ = writeln!(table, "\n-2 ln Λ = {:.6} on {} df, p = {:.6}", lr.statistic, lr.df, lr.p_value);
    Ok(Report {
        converged: lr.h0.converged && lr.h1.iter().all(|f| f.converged),
        results: json!({
            "statistic": lr.statistic,
            "df": lr.df,
            "p_value": lr.p_value,
            "pooled": fit_json(&lr.h0),
            "group1": fit_json(&lr.h1[0]),
            "group2": fit_json(&lr.h1[1]),
        }),
        table,
    })
}

/// Returns the report and whether every oracle passed.
pub fn verify(cfg: &RunConfig, args: &VerifyArgs) -> Result<(Report, bool), CliError> {
    if args.landmarks < 3 {
        return Err(CliError::Input("verify needs at least 3 landmarks".into()));
    }
    let k = 2;
    let mu = mean_matrix(args.mean.as_deref(), args.landmarks, k)?;
    let model = isotropic_model(cfg, mu, cfg.theta_matrix(k)?)?;
    let ctrl = cfg.series();
    let (mass, se) = mc_normalization(&model, cfg.mode, &ctrl, args.mc_samples, cfg.seed)?;
    let target = match cfg.mode {
        ellshape::Mode::Reflection => 1.0,
        ellshape::Mode::NoReflection => 0.5,
    };
    let mass_ok = (mass - target).abs() <= 3.0 * se;
    let sim = simulation_vs_density(&model, cfg.mode, &ctrl, args.sim_count, cfg.seed)?;
    let mut table = format!(
        "normalization: mass {mass:.5} ± {se:.5} (target {target}) {}\n",
        if mass_ok { "PASS" } else { "FAIL" }
    );
    for m in &sim.marginals {
        let _ = writeln!(
            table,
            "marginal u{}: χ² = {:.2} on {} df, critical {:.2} {}",
            m.coordinate + 1,
            m.statistic,
            m.df,
            m.critical_value,
            if m.passed { "PASS" } else { "FAIL" }
        );
    }
    let passed = mass_ok && sim.passed;
    let results = json!({
        "passed": passed,
        "normalization": { "mass": mass, "standard_error": se, "target": target, "passed": mass_ok },
        "simulation": sim,
    });
    Ok((Report::done(results, table), passed))
}
