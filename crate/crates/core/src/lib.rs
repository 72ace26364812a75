//! Exact shape densities for landmark data under elliptical models.
//!
//! Configurations are centred with a sub-Helmert matrix, whitened by
//! `Θ^{-1/2}` and decomposed with the SVD; the resulting size-and-shape and
//! shape densities are truncated zonal-polynomial series evaluated in log
//! space. On top of the densities sit maximum-likelihood location fitting,
//! BIC* model selection and a likelihood-ratio test for equal mean shapes.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod densities;
pub mod error;
pub mod geometry;
pub mod inference;
pub mod landmark_io;
pub mod models;
pub mod numeric;
pub mod special_fn;
pub mod verify;
pub mod zonal;

pub use densities::{
    central_shape_logdensity, central_size_and_shape_logdensity, gaussian_shape_logdensity,
    isotropic_shape_logdensity, shape_logdensity, size_and_shape_logdensity, DensityValue, IsotropicKind,
};
pub use error::{Error, Result};
pub use geometry::{LandmarkSet, Mode, ShapeCoords};
pub use inference::{
    bic_star, evidence_grade, fit_location, log_likelihood, lr_test_equal_means, Evidence, FitResult, LrTest,
    OptimizerConfig, SampleOfShapes,
};
pub use models::{GeneratorKind, GeneratorSpec, ModelSpec};
pub use numeric::LogSign;
pub use special_fn::Partition;
pub use zonal::{SeriesControl, SeriesValue};
