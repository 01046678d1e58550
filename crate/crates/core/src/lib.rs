//! Unsupervised clustering of hyperspectral image cubes with spatially
//! regularized ultrametric spectral clustering (SRUSC).
//!
//! The pipeline runs in five stages:
//!
//! 1. [`knn::build_knn_graph`] builds the Euclidean k-nearest-neighbor graph
//!    over pixel spectra.
//! 2. [`ultrametric::build_mst`] and [`ultrametric::build_bottleneck_index`]
//!    reduce that graph to a Kruskal reconstruction tree, which answers
//!    ultrametric (minimax) path distance queries in constant time.
//! 3. [`spectral::build_affinity`] evaluates `exp(-rho^2 / sigma^2)` for every
//!    pair of pixels inside an `r x r` spatial window, and
//!    [`spectral::build_laplacian`] normalizes it.
//! 4. [`spectral::smallest_eigenpairs`] extracts the lowest-frequency
//!    eigenvectors and [`spectral::embed_rows`] row-normalizes them.
//! 5. [`kmeans::kmeans`] labels the embedded pixels.
//!
//! [`pipeline`] strings the stages together, selects `sigma` and the cluster
//! count with a multiscale eigengap, and provides the baseline methods.
//! [`metrics`] aligns predictions with ground truth and scores them, and
//! [`synth`] generates the synthetic benchmark cubes.
//!
//! The crate is `no_std` (with `alloc`) when built without the default
//! `std` feature. The `parallel` feature distributes the hot loops over a
//! rayon pool; every reduction keeps a fixed order, so results do not depend
//! on the number of threads.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod error;
pub mod kmeans;
pub mod knn;
pub mod linalg;
pub mod metrics;
mod par;
pub mod pipeline;
pub mod raster;
pub mod spectral;
pub mod synth;
pub mod ultrametric;

pub use error::{Error, Result};
pub use raster::{HsiCube, LabelRaster, PixelCoord, RasterDims};
