//! Error types for the attestation crate.
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

/// Evidence token rejection reasons.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvidenceError {
    #[error("malformed evidence: {0}")]
    Malformed(&'static str),
    #[error("evidence version {0} unsupported")]
    VersionUnsupported(u8),
    #[error("evidence signed by a key outside the device CA")]
    UnknownDeviceKey,
    #[error("evidence signature does not verify")]
    BadSignature,
    #[error("evidence nonce does not match the challenge")]
    NonceMismatch,
}

/// Onboarding rejection reasons.
#[derive(Debug, Error)]
pub enum OnboardError {
    /// The nonce is unknown, already consumed, or past its window.
    #[error("stale or unknown nonce")]
    StaleNonce,
    #[error("evidence invalid: {0}")]
    EvidenceInvalid(#[from] EvidenceError),
    #[error("malformed certificate signing request: {0}")]
    MalformedCsr(String),
    /// SHA-256 of the received CSR differs from the evidence user-data
    /// field: the CSR and the evidence do not come from the same isolate.
    #[error("CSR hash does not match evidence user data")]
    CsrBindingMismatch,
    #[error("certificate issuance failed: {0}")]
    IssueFailed(String),
}

impl OnboardError {
    /// Stable machine-readable code, used on the HTTP surface.
    pub fn code(&self) -> &'static str {
        match self {
            OnboardError::StaleNonce => "stale_nonce",
            OnboardError::EvidenceInvalid(_) => "evidence_invalid",
            OnboardError::MalformedCsr(_) => "malformed_csr",
            OnboardError::CsrBindingMismatch => "csr_binding_mismatch",
            OnboardError::IssueFailed(_) => "issue_failed",
        }
    }
}

/// Runtime-certificate rejection reasons, as seen by a connecting client.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum CertVerifyError {
    #[error("certificate chain invalid: {0}")]
    ChainInvalid(String),
    #[error("certificate outside its validity window")]
    Expired,
    #[error("certificate validity exceeds the policy lifetime bound")]
    LifetimeExceeded,
    #[error("measurement extension missing")]
    ExtensionMissing,
    #[error("measurement does not match the policy")]
    MeasurementMismatch,
}

/// Errors from generating, saving, or loading certificate material.
#[derive(Debug, Error)]
pub enum CaError {
    #[error("{0}")]
    Crypto(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<rcgen::Error> for CaError {
    fn from(e: rcgen::Error) -> Self {
        CaError::Crypto(e.to_string())
    }
}

/// Errors from the HTTP client helpers.
#[derive(Debug, Error)]
pub enum HttpClientError {
    #[error("transport error: {0}")]
    Transport(String),
    /// The service refused the request; `code` is its machine-readable
    /// error code.
    #[error("service rejected request ({code}): {message}")]
    Rejected { code: String, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
}
