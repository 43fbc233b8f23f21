//! Homology inference from noisy point samples of low-dimensional manifolds.

pub mod cleaning;
pub mod complexes;
pub mod config;
pub mod deconvolution;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod homology;
pub mod manifold;
pub mod risk;
pub mod rng;

pub use error::{Error, Result};
pub use geometry::{Ball, PointCloud};
