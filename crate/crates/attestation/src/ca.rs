//! Certificate-authority material: generation, persistence, and the
//! credentials handed to devices and principals.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use std::path::Path;

use rcgen::{
    BasicConstraints, Certificate, CertificateParams, DistinguishedName, DnType, IsCa, KeyPair,
    KeyUsagePurpose, PKCS_ECDSA_P256_SHA256,
};

use crate::error::CaError;
use crate::evidence::DeviceKey;

/// A CA: its certificate and signing key.  The PEM of the certificate is
/// kept verbatim so that reloading from disk serves byte-identical bytes.
pub struct CaMaterial {
    cert: Certificate,
    key: KeyPair,
    cert_pem: String,
}

impl CaMaterial {
    /// Generates a fresh self-signed CA.
    pub fn generate(common_name: &str) -> Result<CaMaterial, CaError> {
        let key = KeyPair::generate_for(&PKCS_ECDSA_P256_SHA256)?;
        let mut params = CertificateParams::default();
        params.distinguished_name = dn(common_name);
        params.is_ca = IsCa::Ca(BasicConstraints::Unconstrained);
        params.key_usages = vec![
            KeyUsagePurpose::KeyCertSign,
            KeyUsagePurpose::DigitalSignature,
        ];
        let cert = params.self_signed(&key)?;
        let cert_pem = cert.pem();
        Ok(CaMaterial { cert, key, cert_pem })
    }

    /// The CA certificate, PEM.
    pub fn cert_pem(&self) -> &str {
        &self.cert_pem
    }

    pub fn cert_der(&self) -> &[u8] {
        self.cert.der()
    }

    pub(crate) fn issuer(&self) -> (&Certificate, &KeyPair) {
        (&self.cert, &self.key)
    }

    /// Writes `cert.pem` and `key.pem` into `dir`.
    pub fn save_to_dir(&self, dir: &Path) -> Result<(), CaError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("cert.pem"), &self.cert_pem)?;
        std::fs::write(dir.join("key.pem"), self.key.serialize_pem())?;
        Ok(())
    }

    /// Loads a CA previously written by [`CaMaterial::save_to_dir`].
    ///
    /// The stored PEM is preserved verbatim; the in-memory issuing
    /// certificate is reconstructed from it, which keeps subject and key
    /// identifiers consistent for newly issued certificates.
    pub fn load_from_dir(dir: &Path) -> Result<CaMaterial, CaError> {
        let cert_pem = std::fs::read_to_string(dir.join("cert.pem"))?;
        let key_pem = std::fs::read_to_string(dir.join("key.pem"))?;
        let key = KeyPair::from_pem(&key_pem)?;
        let der = crate::pem_decode("CERTIFICATE", &cert_pem).map_err(CaError::Parse)?;
        let params = CertificateParams::from_ca_cert_der(&der.clone().into())?;
        let cert = params.self_signed(&key)?;
        Ok(CaMaterial { cert, key, cert_pem })
    }

    /// Whether `dir` holds saved CA material.
    pub fn exists_in_dir(dir: &Path) -> bool {
        dir.join("cert.pem").is_file() && dir.join("key.pem").is_file()
    }
}

/// A device key plus its CA-issued certificate: the enrollment produced for
/// one attesting platform.
pub struct DeviceCredential {
    pub key: DeviceKey,
    pub cert_pem: String,
}

/// Issues a device certificate for a fresh key under `device_ca`.
pub fn issue_device_credential(
    device_ca: &CaMaterial,
    common_name: &str,
) -> Result<DeviceCredential, CaError> {
    let key = DeviceKey::generate()?;
    let rcgen_key = KeyPair::try_from(key.pkcs8_der())?;
    let mut params = CertificateParams::default();
    params.distinguished_name = dn(common_name);
    let (ca_cert, ca_key) = device_ca.issuer();
    let cert = params.signed_by(&rcgen_key, ca_cert, ca_key)?;
    Ok(DeviceCredential {
        key,
        cert_pem: cert.pem(),
    })
}

/// An ordinary TLS server credential issued by `ca`, with no custom
/// extensions: DER certificate plus PKCS#8 key.
pub fn issue_tls_certificate(
    ca: &CaMaterial,
    common_name: &str,
) -> Result<(Vec<u8>, Vec<u8>), CaError> {
    let key = KeyPair::generate_for(&PKCS_ECDSA_P256_SHA256)?;
    let mut params = CertificateParams::default();
    params.distinguished_name = dn(common_name);
    let (ca_cert, ca_key) = ca.issuer();
    let cert = params.signed_by(&key, ca_cert, ca_key)?;
    Ok((cert.der().to_vec(), key.serialize_der()))
}

/// A principal's TLS identity: self-signed certificate plus private key.
pub struct ClientIdentityMaterial {
    pub cert_pem: String,
    pub key_pem: String,
}

/// Generates a self-signed client certificate, as listed in policies.
pub fn generate_client_identity(common_name: &str) -> Result<ClientIdentityMaterial, CaError> {
    let key = KeyPair::generate_for(&PKCS_ECDSA_P256_SHA256)?;
    let mut params = CertificateParams::default();
    params.distinguished_name = dn(common_name);
    let cert = params.self_signed(&key)?;
    Ok(ClientIdentityMaterial {
        cert_pem: cert.pem(),
        key_pem: key.serialize_pem(),
    })
}

/// The runtime server's boot identity: a fresh P-256 key pair and a
/// certificate signing request for it.
pub struct ServerIdentity {
    pub key_pkcs8_der: Vec<u8>,
    pub csr_der: Vec<u8>,
}

/// Generates the key pair and CSR a runtime presents for onboarding.
pub fn generate_server_identity(common_name: &str) -> Result<ServerIdentity, CaError> {
    let key = KeyPair::generate_for(&PKCS_ECDSA_P256_SHA256)?;
    let mut params = CertificateParams::default();
    params.distinguished_name = dn(common_name);
    let csr = params.serialize_request(&key)?;
    Ok(ServerIdentity {
        key_pkcs8_der: key.serialize_der(),
        csr_der: csr.der().to_vec(),
    })
}

fn dn(common_name: &str) -> DistinguishedName {
    let mut dn = DistinguishedName::new();
    dn.push(DnType::CommonName, common_name);
    dn
}
