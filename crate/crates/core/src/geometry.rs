//! Landmark preprocessing and SVD shape coordinates.
//!
//! A configuration `X` (N×K) is centred with a sub-Helmert matrix, whitened
//! on the right by `Θ^{-1/2}`, and decomposed as `Y = V'DH`. The shape part
//! `W = V'D / r` lies on the unit sphere of dimension `m = (N-1)n - 1` and is
//! charted by generalized polar angles.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{dimension, domain, Error, Result};

/// One specimen's landmark configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    pub id: String,
    /// `N×K`, one landmark per row.
    pub coords: DMatrix<f64>,
}

impl LandmarkSet {
    pub fn new(id: impl Into<String>, coords: DMatrix<f64>) -> Result<Self> {
        let (n, k) = coords.shape();
        if n < 3 {
            return Err(dimension(format!("need at least 3 landmarks, got {n}")));
        }
        if k < 2 {
            return Err(dimension(format!("need dimension K >= 2, got {k}")));
        }
        if n <= k {
            return Err(dimension(format!("need more landmarks than dimensions, got N={n}, K={k}")));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(domain("landmark coordinates must be finite"));
        }
        Ok(Self { id: id.into(), coords })
    }

    pub fn landmarks(&self) -> usize {
        self.coords.nrows()
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }
}

/// Whether the rotation removed from a configuration ranges over `O(K)` or
/// only `SO(K)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Reflection,
    NoReflection,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Reflection => "reflection",
            Mode::NoReflection => "no-reflection",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reflection" => Ok(Mode::Reflection),
            "no-reflection" => Ok(Mode::NoReflection),
            other => Err(domain(format!("unknown mode '{other}'"))),
        }
    }
}

/// Full SVD shape decomposition of one whitened, centred configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeCoords {
    pub mode: Mode,
    /// `n×(N-1)` with orthonormal rows.
    pub v: DMatrix<f64>,
    /// Singular values, non-increasing in magnitude.
    pub d: DVector<f64>,
    /// `n×K` with orthonormal rows.
    pub h: DMatrix<f64>,
    /// Size `‖Y‖_F`.
    pub r: f64,
    /// `(N-1)×n` shape matrix with `‖vec W‖ = 1`.
    pub w: DMatrix<f64>,
    /// `m = (N-1)n - 1` polar angles of `vec W` (column-major).
    pub angles: Vec<f64>,
    pub jacobian: f64,
    /// Set when two singular values agree to 1e-12 relative.
    pub repeated_singular_values: bool,
}

/// Sub-Helmert matrix with row `j` equal to
/// `(-1/√(j(j+1)), …, -1/√(j(j+1)), j/√(j(j+1)), 0, …)`.
pub fn helmert_submatrix(n_landmarks: usize) -> Result<DMatrix<f64>> {
    if n_landmarks < 2 {
        return Err(dimension("Helmert matrix needs N >= 2"));
    }
    let mut l = DMatrix::zeros(n_landmarks - 1, n_landmarks);
    for j in 1..n_landmarks {
        let jf = j as f64;
        let norm = (jf * (jf + 1.0)).sqrt();
        for c in 0..j {
            l[(j - 1, c)] = -1.0 / norm;
        }
        l[(j - 1, j)] = jf / norm;
    }
    Ok(l)
}

/// Symmetric positive-definite inverse square root `Θ^{-1/2}`.
pub fn theta_inv_sqrt(theta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !theta.is_square() {
        return Err(dimension("Θ must be square"));
    }
    let scale = theta.amax();
    if !(scale > 0.0) || theta.iter().any(|v| !v.is_finite()) {
        return Err(domain("Θ must be finite and non-zero"));
    }
    if (theta - theta.transpose()).amax() > 1e-10 * scale {
        return Err(domain("Θ must be symmetric"));
    }
    let eig = SymmetricEigen::new(theta.clone());
    let norm = eig.eigenvalues.amax();
    let min = eig.eigenvalues.min();
    if min <= 1e-12 * norm {
        return Err(domain(format!("Θ is not positive definite (smallest eigenvalue {min:e})")));
    }
    let inv = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    let m = &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose();
    Ok((&m + m.transpose()) * 0.5)
}

/// `Y = L X Θ^{-1/2}`.
pub fn preprocess(x: &LandmarkSet, theta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if theta.nrows() != x.dim() {
        return Err(dimension(format!(
            "Θ is {}×{} but landmarks have K={}",
            theta.nrows(),
            theta.ncols(),
            x.dim()
        )));
    }
    let l = helmert_submatrix(x.landmarks())?;
    let centred = l * &x.coords;
    if centred.norm() <= 1e-12 * x.coords.norm() {
        return Err(Error::Degenerate(format!("all landmarks of '{}' coincide", x.id)));
    }
    Ok(centred * theta_inv_sqrt(theta)?)
}

/// Thin SVD `Y = V'DH` with the sign and ordering conventions of the chart.
///
/// Singular triples are sorted by decreasing value; each column of `V'` is
/// signed so its first non-negligible entry is positive. In
/// [`Mode::NoReflection`] the last row of `H` and the last singular value are
/// negated when needed so that `det H = +1`.
pub fn svd_shape(y: &DMatrix<f64>, mode: Mode) -> Result<ShapeCoords> {
    let (rows, k) = y.shape();
    if rows < k {
        return Err(dimension(format!("SVD chart needs N-1 >= K, got {rows}×{k}")));
    }
    let r = y.norm();
    if !(r > 0.0) {
        return Err(Error::Degenerate("all landmarks coincide after centring".into()));
    }
    let svd = y.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let vt = svd.v_t.expect("right singular vectors requested");
    let n = k;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut vprime = DMatrix::zeros(rows, n);
    let mut h = DMatrix::zeros(n, k);
    let mut d = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = u.column(src).into_owned();
        let mut row = vt.row(src).into_owned();
        let lead = col.iter().copied().find(|v| v.abs() > 1e-12).unwrap_or(0.0);
        if lead < 0.0 {
            col.neg_mut();
            row.neg_mut();
        }
        vprime.set_column(dst, &col);
        h.set_row(dst, &row);
        d[dst] = svd.singular_values[src];
    }
    if mode == Mode::NoReflection && h.determinant() < 0.0 {
        let last = n - 1;
        let flipped = -h.row(last).into_owned();
        h.set_row(last, &flipped);
        d[last] = -d[last];
    }
    let top = d[0].abs();
    let repeated_singular_values = (1..n).any(|i| (d[i - 1].abs() - d[i].abs()).abs() <= 1e-12 * top);

    let w = &vprime * DMatrix::from_diagonal(&d) / r;
    let angles = unitvec_to_angles(w.as_slice())?;
    let jacobian = polar_jacobian(&angles);
    Ok(ShapeCoords { mode, v: vprime.transpose(), d, h, r, w, angles, jacobian, repeated_singular_values })
}

/// Polar angles of `vec(Y P) / ‖Y‖` for an explicit rotation `P`.
///
/// When `P` is Haar distributed this is the representative whose law has the
/// shape density over the full angle box.
pub fn rotated_angles(y: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<Vec<f64>> {
    if p.nrows() != y.ncols() || !p.is_square() {
        return Err(dimension("rotation must be K×K"));
    }
    let z = y * p;
    unitvec_to_angles(z.as_slice())
}

/// Generalized polar chart: `v₁ = cos θ₁`, `v_i = cos θ_i Π_{j<i} sin θ_j`,
/// `v_{m+1} = Π_{j≤m} sin θ_j`.
pub fn angles_to_unitvec(angles: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(angles.len() + 1);
    let mut prod = 1.0;
    for &th in angles {
        v.push(prod * th.cos());
        prod *= th.sin();
    }
    v.push(prod);
    v
}

/// Inverse of [`angles_to_unitvec`]. At chart poles the remaining angles are 0.
pub fn unitvec_to_angles(v: &[f64]) -> Result<Vec<f64>> {
    if v.len() < 2 {
        return Err(dimension("polar chart needs a vector of length >= 2"));
    }
    let norm = v.iter().fold(0.0f64, |acc, x| acc.hypot(*x));
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(domain("cannot chart the zero vector"));
    }
    let m = v.len() - 1;
    // tail[i] = ‖v[i..]‖
    let mut tail = vec![0.0f64; v.len() + 1];
    for i in (0..v.len()).rev() {
        tail[i] = tail[i + 1].hypot(v[i] / norm);
    }
    let mut angles = Vec::with_capacity(m);
    for i in 0..m - 1 {
        angles.push(tail[i + 1].atan2(v[i] / norm));
    }
    let last = (v[m] / norm).atan2(v[m - 1] / norm);
    angles.push(if last < 0.0 { last + 2.0 * std::f64::consts::PI } else { last });
    Ok(angles)
}

/// `J(u) = Π_{i=1}^{m} sin^{m-i} θ_i`.
pub fn polar_jacobian(angles: &[f64]) -> f64 {
    let m = angles.len();
    angles.iter().enumerate().map(|(i, th)| th.sin().powi((m - 1 - i) as i32)).product()
}

/// `ln J(u)`; `-inf` on a chart pole.
pub fn ln_polar_jacobian(angles: &[f64]) -> f64 {
    let m = angles.len();
    angles
        .iter()
        .enumerate()
        .map(|(i, th)| {
            let p = (m - 1 - i) as f64;
            if p == 0.0 {
                0.0
            } else {
                p * th.sin().ln()
            }
        })
        .sum()
}

/// Shape matrix `W` ((rows)×cols, column-major) from polar angles.
pub fn angles_to_shape(angles: &[f64], rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if angles.len() + 1 != rows * cols {
        return Err(dimension(format!("{} angles do not chart a {rows}×{cols} shape matrix", angles.len())));
    }
    check_angles(angles)?;
    Ok(DMatrix::from_column_slice(rows, cols, &angles_to_unitvec(angles)))
}

/// Checks that `angles` lie in the chart: all finite, every angle but the
/// last in `[0, π]`.
pub fn check_angles(angles: &[f64]) -> Result<()> {
    let m = angles.len();
    for (i, &a) in angles.iter().enumerate() {
        if !a.is_finite() {
            return Err(domain(format!("angle {i} is not finite")));
        }
        if i + 1 < m && !(0.0..=std::f64::consts::PI).contains(&a) {
            return Err(domain(format!("angle {i} = {a} is outside [0, π]")));
        }
    }
    Ok(())
}
