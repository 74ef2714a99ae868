//! Capacity estimation for finite-size 2-D constrained channels.
//!
//! The channel is modelled as an `M x K` grid of binary variables with
//! pairwise edge potentials; the capacity is `log2 Z / (M * K)` where `Z`
//! is the partition function of the grid. This crate provides:
//!
//! - [`model`]: the lattice model, the hard-squares (1,inf) RLL potentials,
//!   and the column/strip chain decomposition,
//! - [`ffbs`]: exact per-column forward filtering / backward sampling, the
//!   workhorse behind the sampler's optimal proposals and resampling weights,
//! - [`smc`]: the fully adapted sequential Monte Carlo estimator of `log2 Z`,
//! - [`oracle`]: exact ground truth by transfer matrix or brute-force
//!   enumeration, used to validate everything else.
//!
//! The crate is `no_std`-compatible (with `alloc`); disable the default
//! `std` feature for embedded use. The optional `parallel` feature runs the
//! per-particle work on a rayon pool; results are bit-identical regardless
//! of worker count.
//!
//! ```
//! use rllcap_core::{model::LatticeModel, oracle, smc, smc::RngSpec};
//!
//! let model = LatticeModel::rll(10, 10).unwrap();
//! let exact = oracle::exact_capacity(&model).unwrap();
//! let est = smc::run(&model.column_view(), 5000, &RngSpec::new(1)).unwrap();
//! assert!((est.capacity - exact).abs() < 5e-3);
//! ```
#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod error;
pub mod ffbs;
pub mod model;
mod num;
pub mod oracle;
pub mod smc;

pub use error::{Error, Result};
pub use model::{ColumnState, LatticeModel, PairwisePotential, StripView};
pub use smc::{CapacityEstimate, ParticleSystem, RngSpec};
