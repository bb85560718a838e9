//! Differentially private group-by query answering with question validation
//! and explanation tables.
//!
//! The workflow has three phases, each driven through [`session::Session`]:
//!
//! 1. answer a group-by aggregate query under zCDP ([`release`]);
//! 2. check a comparison between groups with a confidence interval built
//!    from the released values alone ([`validate`]);
//! 3. privately select the most influential explanation predicates and
//!    attach confidence intervals on their influence and rank ([`explain`]).

pub mod data;
pub mod dp;
pub mod error;
pub mod explain;
pub mod influence;
pub mod release;
mod serde_util;
pub mod session;
pub mod synth;
pub mod validate;

pub use error::{Error, Result};
