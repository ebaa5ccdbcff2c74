//! Likelihood-ratio detection of two-state signals with random phase durations.
//!
//! A hidden process alternates between state 1 and state 2. The length of each
//! phase is drawn independently from a per-state pmf on `1..=Δ`, and every
//! sample is observed through additive Gaussian noise. The crate provides:
//!
//! * [`model`] and [`sequence`]: the generative model, exact sequence
//!   probabilities, phase-duration histograms and types.
//! * [`combinatorics`]: counts of feasible sequences and types, entropy and
//!   relative entropy.
//! * [`lrt`]: the `O(Δ)`-per-sample likelihood-ratio recursion and a
//!   brute-force enumeration oracle.
//! * [`exponent`]: error-exponent estimation, the guaranteed bound, the
//!   detectability condition and the type-space lower-bound solver.
//! * [`montecarlo`]: batched simulation, ROC curves, miss probability at a
//!   false-alarm budget and slope fitting.
//!
//! Monte Carlo loops run on rayon when the `parallel` feature is enabled
//! (default). Every run draws from its own ChaCha stream keyed by
//! `(master_seed, domain, index)`, so results are bit-identical for any
//! thread count and in sequential builds.

pub mod combinatorics;
pub mod error;
pub mod exec;
pub mod exponent;
pub mod io;
pub mod lrt;
pub mod model;
pub mod montecarlo;
pub mod rng;
pub mod sequence;

pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{DurationPmf, Hypothesis, ModelParams, State};
