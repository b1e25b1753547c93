//! HTTP client helpers for talking to the proxy attestation service.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use base64::Engine as _;
use serde::Deserialize;

use crate::error::HttpClientError;
use crate::evidence::AttestationEvidence;

#[derive(Deserialize)]
struct ChallengeBody {
    nonce: String,
}

#[derive(Deserialize)]
struct CertificateBody {
    certificate: String,
}

#[derive(Deserialize)]
struct ErrorBody {
    error: String,
    #[serde(default)]
    message: String,
}

/// Asks the service for a fresh challenge nonce.
pub fn request_challenge(base_url: &str) -> Result<[u8; 32], HttpClientError> {
    let body: ChallengeBody = post_json(&format!("{base_url}/challenge"), None)?;
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(&body.nonce)
        .map_err(|e| HttpClientError::Protocol(format!("nonce: {e}")))?;
    bytes
        .try_into()
        .map_err(|_| HttpClientError::Protocol("nonce is not 32 bytes".into()))
}

/// Submits a CSR plus evidence; returns the issued certificate PEM.
pub fn onboard(
    base_url: &str,
    csr_der: &[u8],
    evidence: &AttestationEvidence,
) -> Result<String, HttpClientError> {
    let engine = &base64::engine::general_purpose::STANDARD;
    let request = serde_json::json!({
        "csr": engine.encode(csr_der),
        "evidence": engine.encode(evidence.encode()),
    });
    let body: CertificateBody = post_json(&format!("{base_url}/onboard"), Some(request))?;
    Ok(body.certificate)
}

/// Fetches the service root CA certificate, PEM.
pub fn fetch_root_ca(base_url: &str) -> Result<String, HttpClientError> {
    ureq::get(&format!("{base_url}/rootca"))
        .call()
        .map_err(|e| HttpClientError::Transport(e.to_string()))?
        .into_string()
        .map_err(|e| HttpClientError::Transport(e.to_string()))
}

fn post_json<T: serde::de::DeserializeOwned>(
    url: &str,
    body: Option<serde_json::Value>,
) -> Result<T, HttpClientError> {
    let request = ureq::post(url);
    let result = match body {
        Some(body) => request.send_json(body),
        None => request.call(),
    };
    match result {
        Ok(response) => response
            .into_json::<T>()
            .map_err(|e| HttpClientError::Protocol(e.to_string())),
        Err(ureq::Error::Status(status, response)) => {
            let parsed: Result<ErrorBody, _> = response.into_json();
            match parsed {
                Ok(err) => Err(HttpClientError::Rejected {
                    code: err.error,
                    message: err.message,
                }),
                Err(e) => Err(HttpClientError::Protocol(format!(
                    "status {status}, unreadable error body: {e}"
                ))),
            }
        }
        Err(e) => Err(HttpClientError::Transport(e.to_string())),
    }
}
