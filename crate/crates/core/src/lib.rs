//! Integrated-KL learning over conditional neighborhood distributions.
//!
//! A supervisory distribution `p(j|i)` is built from data, labels, pairs,
//! graphs or counts ([`distributions`]); a learned distribution `q(j|i)` is
//! a differentiable function of parameters ([`kernels`]); training minimizes
//! the mean row KL divergence between them ([`loss`], [`optim`]).
//! [`classic`] holds independent textbook implementations used as oracles,
//! [`equivalence`] checks each claimed identity numerically, and
//! [`pipeline`] runs end-to-end clustering experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod classic;
pub mod distributions;
pub mod equivalence;
pub mod error;
pub mod kernels;
pub mod loss;
pub mod math;
pub mod optim;
pub mod pipeline;

pub use error::{Error, Result};
