//! Proxy attestation service state: challenge nonces, evidence checks, the
//! CSR binding comparison, and certificate issuance.
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
use std::time::{SystemTime, UNIX_EPOCH};

use rcgen::{CertificateSigningRequestParams, CustomExtension, SerialNumber};
use ring::rand::{SecureRandom, SystemRandom};
use rustls_pki_types::CertificateSigningRequestDer;
use x509_parser::prelude::FromDer;

use crate::ca::CaMaterial;
use crate::error::OnboardError;
use crate::evidence::{sha256, verify_evidence, AttestationEvidence, DeviceDirectory};
use crate::verify::MEASUREMENT_EXTENSION_OID;

/// Clock abstraction (unix seconds) so tests can control expiry.
pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .expect("system clock before the epoch")
            .as_secs()
    })
}

#[derive(Clone, Debug)]
pub struct ProxyConfig {
    /// Validity of issued runtime certificates.  Short by design: expiry is
    /// the revocation mechanism, bounding how long a compromised runtime
    /// can keep being trusted.
    pub certificate_lifetime_s: u64,
    /// How long an issued challenge nonce stays valid.
    pub nonce_window_s: u64,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        ProxyConfig {
            certificate_lifetime_s: 86_400,
            nonce_window_s: 300,
        }
    }
}

/// A certificate issued by the proxy for one onboarded runtime.
#[derive(Clone, Debug)]
pub struct IssuedCertificate {
    pub der: Vec<u8>,
    pub pem: String,
}

/// The proxy attestation service: root CA keys, the device enrollment
/// directory, and outstanding single-use nonces.
pub struct ProxyState {
    root: CaMaterial,
    devices: DeviceDirectory,
    nonces: HashMap<[u8; 32], u64>,
    next_serial: u64,
    clock: Clock,
    config: ProxyConfig,
}

impl ProxyState {
    pub fn new(root: CaMaterial, devices: DeviceDirectory, config: ProxyConfig) -> ProxyState {
        Self::with_clock(root, devices, config, system_clock())
    }

    pub fn with_clock(
        root: CaMaterial,
        devices: DeviceDirectory,
        config: ProxyConfig,
        clock: Clock,
    ) -> ProxyState {
        ProxyState {
            root,
            devices,
            nonces: HashMap::new(),
            next_serial: 1,
            clock,
            config,
        }
    }

    pub fn root_ca_pem(&self) -> &str {
        self.root.cert_pem()
    }

    /// Issues a fresh single-use challenge nonce.
    pub fn new_challenge(&mut self) -> [u8; 32] {
        let now = (self.clock)();
        let window = self.config.nonce_window_s;
        self.nonces.retain(|_, issued| now.saturating_sub(*issued) <= window);

        let rng = SystemRandom::new();
        let mut nonce = [0u8; 32];
        rng.fill(&mut nonce).expect("system rng");
        self.nonces.insert(nonce, now);
        nonce
    }

    /// The onboarding decision.  Issues a runtime certificate iff:
    ///
    /// - the evidence nonce is outstanding and within its window,
    /// - the evidence verifies under an enrolled device key,
    /// - the CSR carries a valid self-signature (proof of possession), and
    /// - SHA-256 of the CSR equals the evidence user-data field, proving the
    ///   CSR and the evidence come from the same isolate.
    ///
    /// The nonce is consumed on success.
    pub fn onboard(
        &mut self,
        csr_der: &[u8],
        evidence: &AttestationEvidence,
    ) -> Result<IssuedCertificate, OnboardError> {
        let now = (self.clock)();
        let issued_at = self
            .nonces
            .get(&evidence.nonce)
            .copied()
            .ok_or(OnboardError::StaleNonce)?;
        if now.saturating_sub(issued_at) > self.config.nonce_window_s {
            self.nonces.remove(&evidence.nonce);
            return Err(OnboardError::StaleNonce);
        }

        verify_evidence(evidence, &evidence.nonce, &self.devices)?;

        let (_, parsed_csr) =
            x509_parser::certification_request::X509CertificationRequest::from_der(csr_der)
                .map_err(|e| OnboardError::MalformedCsr(e.to_string()))?;
        parsed_csr
            .verify_signature()
            .map_err(|e| OnboardError::MalformedCsr(format!("self-signature: {e}")))?;

        if sha256(csr_der) != evidence.user_data {
            return Err(OnboardError::CsrBindingMismatch);
        }

        let cert = self.issue(csr_der, &evidence.runtime_measurement, now)?;
        self.nonces.remove(&evidence.nonce);
        Ok(cert)
    }

    fn issue(
        &mut self,
        csr_der: &[u8],
        measurement: &[u8; 32],
        now: u64,
    ) -> Result<IssuedCertificate, OnboardError> {
        let csr = CertificateSigningRequestDer::from(csr_der.to_vec());
        let mut params = CertificateSigningRequestParams::from_der(&csr)
            .map_err(|e| OnboardError::MalformedCsr(e.to_string()))?;

        let serial = self.next_serial;
        self.next_serial += 1;
        params.params.serial_number = Some(SerialNumber::from(serial));
        params.params.not_before = time::OffsetDateTime::from_unix_timestamp(now as i64)
            .map_err(|e| OnboardError::IssueFailed(e.to_string()))?;
        params.params.not_after = time::OffsetDateTime::from_unix_timestamp(
            (now + self.config.certificate_lifetime_s) as i64,
        )
        .map_err(|e| OnboardError::IssueFailed(e.to_string()))?;
        params.params.custom_extensions = vec![CustomExtension::from_oid_content(
            MEASUREMENT_EXTENSION_OID,
            measurement.to_vec(),
        )];

        let (ca_cert, ca_key) = self.root.issuer();
        let cert = params
            .signed_by(ca_cert, ca_key)
            .map_err(|e| OnboardError::IssueFailed(e.to_string()))?;
        Ok(IssuedCertificate {
            der: cert.der().to_vec(),
            pem: cert.pem(),
        })
    }
}
