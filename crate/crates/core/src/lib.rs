//! Monotone reformulation of steady-state gas network flow.
//!
//! The crate builds the gas-flow operator for a network with pipes and
//! compressors, searches for a scaling matrix that makes the operator
//! monotone on a box-and-cone domain, and solves the resulting variational
//! inequality with an extragradient method.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` style checks are meant to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod certificate;
pub mod context;
pub mod domain;
pub mod error;
pub mod generate;
pub mod linalg;
pub mod lmi;
pub mod network;
pub mod operator;
pub mod oracle;
pub mod pipeline;
pub mod vi;

pub use certificate::{max_gamma, tree_condition, CertificateKind, DomainCertificate, SearchOptions};
pub use context::OperatorContext;
pub use domain::{DomainKind, DomainSpec};
pub use error::{Error, Result};
pub use network::{Edge, Network, NetworkBuilder, Node};
pub use operator::{eval_f, eval_fw, j0_matrix, jacobian, residual_inf, sym_psd_witness, GasState, ScalingMatrix};
pub use pipeline::{solve, solve_certified, SolveOptions, SolveOutcome};
pub use vi::{Certification, Status, ViOptions};
