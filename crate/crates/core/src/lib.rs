//! Randomized approximation of integral-defined kernels and fast landmark
//! subspace clustering.
//!
//! A kernel `k(x1, x2) = E_y[f(x1, y) f(x2, y)]` is approximated by drawing
//! D samples `y_1..y_D` and using `psi(x) = [f(x, y_k)]_k / sqrt(D)`. With
//! local best-fit flats as samples this gives a subspace kernel; clustering
//! then needs only the D x n matrix `psi(X)`:
//!
//! ```no_run
//! use fls_core::{datagen, landmarks::LandmarkConfig, spectral};
//!
//! let model = datagen::SyntheticModel::new(vec![2, 2], 6, 0.05);
//! let data = datagen::gen_synthetic(&model, 7).unwrap().data;
//! let cfg = spectral::ClusterConfig::new(LandmarkConfig::new(60, 2), 2, 7);
//! let result = spectral::fls_cluster(&data.points, &cfg).unwrap();
//! assert_eq!(result.labels.len(), data.len());
//! ```

pub mod datagen;
pub mod error;
pub mod evaluation;
pub mod kernels;
pub mod landmarks;
pub mod linalg;
pub mod rng;
pub mod spectral;

pub use datagen::{DataSet, SyntheticModel};
pub use error::{FlsError, Result};
pub use kernels::{AffineFlat, EmbeddingMatrix, FeatureSpec};
pub use landmarks::LandmarkConfig;
pub use linalg::Matrix;
pub use spectral::{fls_cluster, ClusterConfig, ClusterResult};
