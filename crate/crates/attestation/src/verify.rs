//! Client-side verification of a proxy-issued runtime certificate.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use x509_parser::oid_registry::Oid;

use crate::error::CertVerifyError;
use crate::pem_decode;

/// Private-use OID of the certificate extension carrying the 32-byte
/// runtime measurement.
pub const MEASUREMENT_EXTENSION_OID: &[u64] = &[1, 3, 6, 1, 4, 1, 57255, 1];

/// The augmented-handshake certificate check.
///
/// Accepts iff the certificate was issued by the root CA in `root_ca_pem`,
/// `now` falls inside its validity window, its validity span does not exceed
/// `max_lifetime_s` (when given, this is the policy's bound on accepted
/// certificate lifetime), and its measurement extension is present and equal
/// to `expected_measurement`.
pub fn verify_runtime_certificate(
    cert_der: &[u8],
    root_ca_pem: &str,
    expected_measurement: &[u8; 32],
    now_unix: u64,
    max_lifetime_s: Option<u64>,
) -> Result<(), CertVerifyError> {
    let (_, cert) = x509_parser::parse_x509_certificate(cert_der)
        .map_err(|e| CertVerifyError::ChainInvalid(format!("certificate: {e}")))?;

    let root_der = pem_decode("CERTIFICATE", root_ca_pem)
        .map_err(|e| CertVerifyError::ChainInvalid(format!("root CA: {e}")))?;
    let (_, root) = x509_parser::parse_x509_certificate(&root_der)
        .map_err(|e| CertVerifyError::ChainInvalid(format!("root CA: {e}")))?;

    if cert.issuer() != root.subject() {
        return Err(CertVerifyError::ChainInvalid(
            "issuer does not match the root CA subject".into(),
        ));
    }
    cert.verify_signature(Some(root.public_key()))
        .map_err(|e| CertVerifyError::ChainInvalid(format!("signature: {e}")))?;

    let not_before = cert.validity().not_before.timestamp();
    let not_after = cert.validity().not_after.timestamp();
    let now = now_unix as i64;
    if now < not_before || now > not_after {
        return Err(CertVerifyError::Expired);
    }
    if let Some(max) = max_lifetime_s {
        if not_after.saturating_sub(not_before) > max as i64 {
            return Err(CertVerifyError::LifetimeExceeded);
        }
    }

    let oid = Oid::from(MEASUREMENT_EXTENSION_OID).expect("static oid");
    let extension = cert
        .get_extension_unique(&oid)
        .map_err(|e| CertVerifyError::ChainInvalid(format!("duplicate extension: {e}")))?
        .ok_or(CertVerifyError::ExtensionMissing)?;
    if extension.value != expected_measurement {
        return Err(CertVerifyError::MeasurementMismatch);
    }
    Ok(())
}
