//! Error type for policy handling.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use thiserror::Error;

/// Everything that can go wrong while parsing, validating, or querying a
/// global policy.
#[derive(Debug, Error)]
pub enum PolicyError {
    /// The input was not syntactically valid (bad UTF-8 or malformed JSON).
    #[error("policy syntax error: {0}")]
    Syntax(String),
    /// The input was well-formed JSON but did not match the policy schema:
    /// missing, duplicated, unknown, or ill-typed fields.
    #[error("policy schema error: {0}")]
    Schema(String),
    /// The policy parsed but violates a semantic invariant.
    #[error("policy invariant violated: {0}")]
    Invariant(String),
    /// A capability query named a principal that is not in the policy.
    #[error("unknown principal: {0}")]
    UnknownPrincipal(String),
}
