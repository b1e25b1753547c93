//! Attestation for the runtime, without attestation hardware.
//!
//! A freshly booted runtime proves what it is to a *proxy attestation
//! service* once, and from then on every client checks an ordinary
//! certificate chain instead of parsing platform-specific attestation
//! tokens.  The flow:
//!
//! 1. the runtime generates a key pair and a certificate signing request;
//! 2. the platform's native attestation produces evidence binding the
//!    runtime measurement and a user-data field, which carries the SHA-256
//!    of the CSR — tying the TLS key to the attested runtime;
//! 3. the proxy verifies the evidence against the device CA, recomputes the
//!    CSR hash and compares it against the user-data field;
//! 4. on success it issues a short-lived X.509 certificate for the CSR's
//!    key, carrying the runtime measurement in a custom extension, signed by
//!    the proxy root CA that every policy pins.
//!
//! Clients then verify chain, validity window, and extension value against
//! the global policy during the TLS handshake.
//!
//! The "native" attestation here is a mock: a fixed binary token signed with
//! an enrolled device key.  It stands in for a hardware token while keeping
//! the proxy's verification obligations real.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

pub mod ca;
pub mod client;
mod error;
mod evidence;
mod proxy;
mod service;
mod verify;

pub use error::{CaError, CertVerifyError, EvidenceError, HttpClientError, OnboardError};
pub use evidence::{
    device_attest, verify_evidence, AttestationEvidence, Claims, DeviceDirectory, DeviceKey,
    EVIDENCE_MAGIC, EVIDENCE_VERSION,
};
pub use proxy::{Clock, IssuedCertificate, ProxyConfig, ProxyState};
pub use service::{serve, ServiceHandle};
pub use verify::{verify_runtime_certificate, MEASUREMENT_EXTENSION_OID};

/// PEM encoding with the given label, 64-character lines.
pub(crate) fn pem_encode(label: &str, der: &[u8]) -> String {
    use base64::Engine as _;
    let b64 = base64::engine::general_purpose::STANDARD.encode(der);
    let mut out = format!("-----BEGIN {label}-----\n");
    for chunk in b64.as_bytes().chunks(64) {
        out.push_str(std::str::from_utf8(chunk).unwrap());
        out.push('\n');
    }
    out.push_str(&format!("-----END {label}-----\n"));
    out
}

/// Extracts the DER contents of the first PEM block with the given label.
pub(crate) fn pem_decode(label: &str, pem: &str) -> Result<Vec<u8>, String> {
    for block in x509_parser::pem::Pem::iter_from_buffer(pem.as_bytes()) {
        let block = block.map_err(|e| format!("invalid PEM: {e}"))?;
        if block.label == label {
            return Ok(block.contents);
        }
    }
    Err(format!("no {label} block found"))
}
