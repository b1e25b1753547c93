//! Client error type.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use cenote_attestation::CertVerifyError;
use cenote_wire::ErrorCode;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    /// The server's certificate failed the augmented handshake; the
    /// connection was aborted before any application frame.
    #[error("attestation rejected: {0}")]
    AttestationRejected(CertVerifyError),
    /// The server's policy digest differs from the local policy.
    #[error("policy digest mismatch: the server is configured with a different policy")]
    PolicyMismatch,
    /// The server answered with a protocol error frame.
    #[error("server error {code:?}: {message}")]
    ServerError { code: ErrorCode, message: String },
    /// Result polling exhausted its deadline.
    #[error("timed out waiting for the computation to finish")]
    Timeout,
    /// The identity material is unusable or does not match the policy.
    #[error("identity error: {0}")]
    Identity(String),
    #[error("transport error: {0}")]
    Transport(String),
}
