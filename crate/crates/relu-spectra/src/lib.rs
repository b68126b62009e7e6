//! Nonlinear spectral measures of ReLU layers.
//!
//! This crate computes upper bounds on the singular values of ReLU layers
//! (`relu(Ax + b)` and its leaky variant), Gaussian and spherical mean
//! widths of point sets and operators, and uses both to analyze and
//! harmonically prune small multilayer perceptrons.
//!
//! Start with the runnable examples, one per capability:
//!
//! ```bash
//! cargo run --release --example rsv_bounds           # layer bound curves vs. singular values
//! cargo run --release --example mean_width           # set widths, LP cross-check, c_n ratio
//! cargo run --release --example operator_width       # operator widths, two estimators
//! cargo run --release --example train_mlp            # train a small MLP on synthetic blobs
//! cargo run --release --example correct_vs_incorrect # per-layer probes on split data
//! cargo run --release --example double_layers        # factorized layers and parameter counts
//! cargo run --release --example harmonic_pruning     # greedy rank-reduction loop
//! ```
//!
//! Batch experiments run through the `relu-spectra` binary
//! (`train | rsv | gmw | prune | report`); see the README for the config
//! file format.

mod fsio;

pub mod datasets;
pub mod driver;
pub mod linalg;
pub mod meanwidth;
pub mod nnet;
pub mod pruning;
pub mod rng;
pub mod spectra;

pub use linalg::{Matrix, SvdResult};
pub use rng::Rng;
