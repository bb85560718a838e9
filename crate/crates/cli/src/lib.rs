//! Local runner and experiment harness for the explanation engine.

pub mod experiment;
pub mod oracle;
pub mod syntax;
pub mod transcript;
