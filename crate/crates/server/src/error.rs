//! Server error type.
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

#[derive(Debug, Error)]
pub enum ServerError {
    /// The policy cannot be served (bad native module, malformed material).
    #[error("policy invalid: {0}")]
    PolicyInvalid(String),
    /// Attestation failed during boot; the server never comes up.
    #[error("onboarding failed: {0}")]
    OnboardFailed(String),
    #[error("TLS configuration failed: {0}")]
    Tls(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// The guest trapped or exited nonzero; results are never released.
    #[error("execution failed: {0}")]
    ExecutionFailed(String),
}
