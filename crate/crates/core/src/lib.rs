//! Coreference resolution toolkit built around differentiable clustering metrics.
//!
//! The crate covers the full loop:
//!
//! - [`corpus`]: documents, a synthetic feature-corpus generator, JSONL corpus I/O
//!   and a minimal CoNLL key/response reader and writer.
//! - [`clustering`]: antecedent vectors, hard clusterings and argmax decoding.
//! - [`metrics`]: exact MUC, B³, CEAF_m, CEAF_e, BLANC and LEA.
//! - [`soft_entity`]: mention-to-entity probabilities computed from antecedent
//!   link probabilities, plus temperature sharpening.
//! - [`relaxed`]: differentiable B³ and LEA over soft clusters.
//! - [`model`]: the two-layer mention-ranking scorer and its training losses,
//!   with hand-written backward passes.
//! - [`optim`]: AdaGrad, the one-document mini-batch training loop and a
//!   finite-difference gradient checker.
//! - [`analysis`]: error breakdowns and corpus-level metric reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod assignment;
pub mod clustering;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod relaxed;
pub mod soft_entity;

pub use error::{Error, Result};
