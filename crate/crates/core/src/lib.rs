//! Sparse recovery with the Lasso under Gaussian designs: random problem
//! generation, exact and iterative solvers, recovery certificates, theoretical
//! bounds, Wishart-type lemma validators and Monte-Carlo experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod certificate;
pub mod cli;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod lasso;
pub mod linalg;
pub mod stats;
pub mod wishart;

pub use error::{Error, Result};
