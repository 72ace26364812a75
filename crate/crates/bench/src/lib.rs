//! Fixtures shared by the benchmarks.

use ellshape::geometry::helmert_submatrix;
use ellshape::inference::SampleOfShapes;
use ellshape::verify::sample_landmarks;
use ellshape::{GeneratorSpec, Mode, ModelSpec};
use nalgebra::DMatrix;

/// Helmertized regular hexagon with circumradius `radius`, `5×2`.
pub fn hexagon_mean(radius: f64) -> DMatrix<f64> {
    let x = DMatrix::from_fn(6, 2, |i, j| {
        let a = std::f64::consts::PI / 3.0 * i as f64;
        radius * if j == 0 { a.cos() } else { a.sin() }
    });
    helmert_submatrix(6).expect("six landmarks") * x
}

/// A simulated Gaussian sample around the hexagon, shaped like the classical
/// two-group vertebra data (N = 6, K = 2).
pub fn hexagon_sample(radius: f64, sigma2: f64, count: usize, seed: u64) -> SampleOfShapes {
    let model =
        ModelSpec::isotropic(GeneratorSpec::gaussian(10), sigma2, hexagon_mean(radius)).expect("valid model");
    let sets = sample_landmarks(&model, count, seed).expect("Gaussian sampling");
    SampleOfShapes::from_landmarks("bench", &sets, &DMatrix::identity(2, 2), Mode::Reflection)
        .expect("non-degenerate sample")
}
