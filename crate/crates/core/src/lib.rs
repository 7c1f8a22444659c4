//! Numerical laboratory for generalization gaps of graph neural networks on
//! manifold-sampled graphs.
//!
//! The library builds weighted graphs from points sampled on compact
//! manifolds (circles, flat tori, triangle-mesh point clouds), runs spectral
//! polynomial-filter GNNs alongside their manifold-limit counterparts, and
//! measures how the gap between empirical (graph) risk and statistical
//! (manifold) risk behaves as the sample size and the filters' spectral
//! continuity constant vary.
//!
//! Module map:
//!
//! * [`manifold`] — manifold models, density-aware sampling, closed-form
//!   spectra of the weighted Laplace operator, bandlimited signals,
//!   quadrature grids.
//! * [`mesh`] — triangle meshes: OFF parsing and area-uniform surface
//!   sampling for point-cloud manifolds.
//! * [`graph`] — Gaussian-kernel and ε-graph construction, graph Laplacians,
//!   kernel bandwidth schedules.
//! * [`spectral`] — symmetric eigensolvers, polynomial filtering, frequency
//!   responses, low-pass and continuity diagnostics.
//! * [`neural`] — GNN/MNN forward passes, losses, hand-written reverse-mode
//!   gradients, Adam training.
//! * [`harness`] — risks, generalization gaps, N-sweeps, regularizer sweeps,
//!   eigenvalue-convergence experiments, log-log fits.
//! * [`seed`] — deterministic seed derivation for reproducible experiments.
//!
//! All operations are deterministic given their seeds: rerunning any
//! experiment with the same configuration reproduces results bit for bit on
//! one platform.

mod eigen;
pub mod error;
pub mod graph;
pub mod harness;
pub mod manifold;
pub mod mesh;
pub mod neural;
pub mod seed;
pub mod spectral;

pub use error::{Error, Result};
