//! Server-side TLS: the runtime presents its proxy-issued certificate and
//! requires a client certificate byte-matching some principal in the
//! policy.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use std::collections::HashMap;
use std::sync::Arc;

use cenote_policy::GlobalPolicy;
use rustls::crypto::{verify_tls12_signature, verify_tls13_signature, CryptoProvider};
use rustls::pki_types::{CertificateDer, PrivateKeyDer, PrivatePkcs8KeyDer, UnixTime};
use rustls::server::danger::{ClientCertVerified, ClientCertVerifier};
use rustls::{DigitallySignedStruct, DistinguishedName, SignatureScheme};

use crate::error::ServerError;

/// Accepts exactly the client certificates listed in the policy; matching
/// is by certificate bytes.
#[derive(Debug)]
pub struct PolicyClientVerifier {
    provider: Arc<CryptoProvider>,
    principals_by_cert: HashMap<Vec<u8>, String>,
    root_hints: Vec<DistinguishedName>,
}

impl PolicyClientVerifier {
    pub fn new(policy: &GlobalPolicy) -> Result<PolicyClientVerifier, ServerError> {
        let mut principals_by_cert = HashMap::new();
        for principal in &policy.principals {
            let der = principal
                .client_cert_der()
                .map_err(|e| ServerError::PolicyInvalid(e.to_string()))?;
            principals_by_cert.insert(der, principal.id.clone());
        }
        Ok(PolicyClientVerifier {
            provider: Arc::new(rustls::crypto::ring::default_provider()),
            principals_by_cert,
            root_hints: Vec::new(),
        })
    }

    /// The principal a presented certificate belongs to.
    pub fn principal_for(&self, der: &[u8]) -> Option<&str> {
        self.principals_by_cert.get(der).map(|s| s.as_str())
    }
}

impl ClientCertVerifier for PolicyClientVerifier {
    fn root_hint_subjects(&self) -> &[DistinguishedName] {
        &self.root_hints
    }

    fn verify_client_cert(
        &self,
        end_entity: &CertificateDer<'_>,
        _intermediates: &[CertificateDer<'_>],
        _now: UnixTime,
    ) -> Result<ClientCertVerified, rustls::Error> {
        if self.principals_by_cert.contains_key(end_entity.as_ref()) {
            Ok(ClientCertVerified::assertion())
        } else {
            Err(rustls::Error::General(
                "unknown client certificate: not a principal of this computation".into(),
            ))
        }
    }

    fn verify_tls12_signature(
        &self,
        message: &[u8],
        cert: &CertificateDer<'_>,
        dss: &DigitallySignedStruct,
    ) -> Result<rustls::client::danger::HandshakeSignatureValid, rustls::Error> {
        verify_tls12_signature(
            message,
            cert,
            dss,
            &self.provider.signature_verification_algorithms,
        )
    }

    fn verify_tls13_signature(
        &self,
        message: &[u8],
        cert: &CertificateDer<'_>,
        dss: &DigitallySignedStruct,
    ) -> Result<rustls::client::danger::HandshakeSignatureValid, rustls::Error> {
        verify_tls13_signature(
            message,
            cert,
            dss,
            &self.provider.signature_verification_algorithms,
        )
    }

    fn supported_verify_schemes(&self) -> Vec<SignatureScheme> {
        self.provider
            .signature_verification_algorithms
            .supported_schemes()
    }
}

/// Builds the server TLS configuration: TLS 1.3, mandatory client
/// authentication against the policy list, and the proxy-issued runtime
/// certificate as the server identity.
pub fn server_config(
    verifier: Arc<PolicyClientVerifier>,
    certificate_der: Vec<u8>,
    key_pkcs8_der: Vec<u8>,
) -> Result<rustls::ServerConfig, ServerError> {
    let provider = Arc::new(rustls::crypto::ring::default_provider());
    let config = rustls::ServerConfig::builder_with_provider(provider)
        .with_protocol_versions(&[&rustls::version::TLS13])
        .map_err(|e| ServerError::Tls(e.to_string()))?
        .with_client_cert_verifier(verifier)
        .with_single_cert(
            vec![CertificateDer::from(certificate_der)],
            PrivateKeyDer::Pkcs8(PrivatePkcs8KeyDer::from(key_pkcs8_der)),
        )
        .map_err(|e| ServerError::Tls(e.to_string()))?;
    Ok(config)
}
