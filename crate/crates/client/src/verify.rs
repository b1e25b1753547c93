//! The augmented server-certificate verifier plugged into the TLS
//! handshake.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use cenote_attestation::{verify_runtime_certificate, CertVerifyError};
use rustls::client::danger::{HandshakeSignatureValid, ServerCertVerified, ServerCertVerifier};
use rustls::crypto::{verify_tls12_signature, verify_tls13_signature, CryptoProvider};
use rustls::pki_types::{CertificateDer, ServerName, UnixTime};
use rustls::{DigitallySignedStruct, SignatureScheme};

/// Shared observation point between the verifier and the session: records
/// when verification completed, when the first application frame left, and
/// the specific rejection if verification failed.  Tests use it to assert
/// that no frame ever precedes the certificate checks.
#[derive(Debug, Default)]
pub struct Probe {
    sequence: AtomicU64,
    verified_at: AtomicU64,
    first_frame_at: AtomicU64,
    pub verdict: Mutex<Option<CertVerifyError>>,
}

impl Probe {
    fn next(&self) -> u64 {
        self.sequence.fetch_add(1, Ordering::SeqCst) + 1
    }

    pub fn mark_verified(&self) {
        let seq = self.next();
        let _ = self
            .verified_at
            .compare_exchange(0, seq, Ordering::SeqCst, Ordering::SeqCst);
    }

    pub fn mark_frame(&self) {
        let seq = self.next();
        let _ = self
            .first_frame_at
            .compare_exchange(0, seq, Ordering::SeqCst, Ordering::SeqCst);
    }

    pub fn verified_at(&self) -> Option<u64> {
        match self.verified_at.load(Ordering::SeqCst) {
            0 => None,
            at => Some(at),
        }
    }

    pub fn first_frame_at(&self) -> Option<u64> {
        match self.first_frame_at.load(Ordering::SeqCst) {
            0 => None,
            at => Some(at),
        }
    }
}

/// Checks the runtime certificate against the policy during the handshake:
/// chain to the pinned proxy root CA, validity window, lifetime bound, and
/// measurement extension.  Host names play no role; attestation replaces
/// naming.
#[derive(Debug)]
pub struct AugmentedServerVerifier {
    provider: Arc<CryptoProvider>,
    root_ca_pem: String,
    expected_measurement: [u8; 32],
    max_lifetime_s: u64,
    probe: Arc<Probe>,
}

impl AugmentedServerVerifier {
    pub fn new(
        root_ca_pem: String,
        expected_measurement: [u8; 32],
        max_lifetime_s: u64,
        probe: Arc<Probe>,
    ) -> AugmentedServerVerifier {
        AugmentedServerVerifier {
            provider: Arc::new(rustls::crypto::ring::default_provider()),
            root_ca_pem,
            expected_measurement,
            max_lifetime_s,
            probe,
        }
    }
}

impl ServerCertVerifier for AugmentedServerVerifier {
    fn verify_server_cert(
        &self,
        end_entity: &CertificateDer<'_>,
        _intermediates: &[CertificateDer<'_>],
        _server_name: &ServerName<'_>,
        _ocsp_response: &[u8],
        now: UnixTime,
    ) -> Result<ServerCertVerified, rustls::Error> {
        match verify_runtime_certificate(
            end_entity.as_ref(),
            &self.root_ca_pem,
            &self.expected_measurement,
            now.as_secs(),
            Some(self.max_lifetime_s),
        ) {
            Ok(()) => {
                self.probe.mark_verified();
                Ok(ServerCertVerified::assertion())
            }
            Err(e) => {
                let message = e.to_string();
                *self.probe.verdict.lock().unwrap() = Some(e);
                Err(rustls::Error::General(message))
            }
        }
    }

    fn verify_tls12_signature(
        &self,
        message: &[u8],
        cert: &CertificateDer<'_>,
        dss: &DigitallySignedStruct,
    ) -> Result<HandshakeSignatureValid, rustls::Error> {
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
    ) -> Result<HandshakeSignatureValid, rustls::Error> {
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
