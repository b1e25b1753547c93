//! The mock native attestation token and its verification.
//!
//! Wire layout, in order, all fields fixed-size except the signature:
//!
//! ```text
//! magic                4 bytes  "VATT"
//! version              u8       currently 1
//! runtime_measurement  32 bytes
//! user_data            32 bytes (SHA-256 of the CSR during onboarding)
//! nonce                32 bytes (the proxy's challenge)
//! device_key_id        32 bytes (SHA-256 of the device public key)
//! sig_len              u16 big-endian
//! signature            ECDSA-P256/SHA-256 over all preceding bytes, DER
//! ```
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

use ring::rand::SystemRandom;
use ring::signature::{
    EcdsaKeyPair, KeyPair as _, UnparsedPublicKey, ECDSA_P256_SHA256_ASN1,
    ECDSA_P256_SHA256_ASN1_SIGNING,
};
use sha2::{Digest as _, Sha256};

use crate::error::{CaError, EvidenceError};
use crate::{pem_decode, pem_encode};

pub const EVIDENCE_MAGIC: [u8; 4] = *b"VATT";
pub const EVIDENCE_VERSION: u8 = 1;

const PREFIX_LEN: usize = 4 + 1 + 32 + 32 + 32 + 32;

/// A platform attestation token: measurement and user data bound under a
/// device key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttestationEvidence {
    pub version: u8,
    pub runtime_measurement: [u8; 32],
    pub user_data: [u8; 32],
    pub nonce: [u8; 32],
    pub device_key_id: [u8; 32],
    /// DER-encoded ECDSA signature over the serialized prefix.
    pub signature: Vec<u8>,
}

impl AttestationEvidence {
    fn prefix_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(PREFIX_LEN);
        out.extend_from_slice(&EVIDENCE_MAGIC);
        out.push(self.version);
        out.extend_from_slice(&self.runtime_measurement);
        out.extend_from_slice(&self.user_data);
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&self.device_key_id);
        out
    }

    /// Bit-exact serialization.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.prefix_bytes();
        out.extend_from_slice(&(self.signature.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.signature);
        out
    }

    /// Structural parse; cryptographic checks happen in [`verify_evidence`].
    pub fn decode(bytes: &[u8]) -> Result<AttestationEvidence, EvidenceError> {
        if bytes.len() < PREFIX_LEN + 2 {
            return Err(EvidenceError::Malformed("token too short"));
        }
        if bytes[..4] != EVIDENCE_MAGIC {
            return Err(EvidenceError::Malformed("bad magic"));
        }
        let version = bytes[4];
        let mut at = 5;
        let mut take32 = |bytes: &[u8]| -> [u8; 32] {
            let out: [u8; 32] = bytes[at..at + 32].try_into().unwrap();
            at += 32;
            out
        };
        let runtime_measurement = take32(bytes);
        let user_data = take32(bytes);
        let nonce = take32(bytes);
        let device_key_id = take32(bytes);
        let sig_len = u16::from_be_bytes([bytes[at], bytes[at + 1]]) as usize;
        let sig = &bytes[at + 2..];
        if sig.len() != sig_len {
            return Err(EvidenceError::Malformed("signature length mismatch"));
        }
        Ok(AttestationEvidence {
            version,
            runtime_measurement,
            user_data,
            nonce,
            device_key_id,
            signature: sig.to_vec(),
        })
    }
}

/// Claims extracted from verified evidence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Claims {
    pub measurement: [u8; 32],
    pub user_data: [u8; 32],
}

////////////////////////////////////////////////////////////////////////////////
// Device keys and the enrollment directory.
////////////////////////////////////////////////////////////////////////////////

/// A device signing key, standing in for a platform's attestation key.
pub struct DeviceKey {
    keypair: EcdsaKeyPair,
    pkcs8_der: Vec<u8>,
    public_key: Vec<u8>,
}

impl DeviceKey {
    pub fn generate() -> Result<DeviceKey, CaError> {
        let rng = SystemRandom::new();
        let pkcs8 = EcdsaKeyPair::generate_pkcs8(&ECDSA_P256_SHA256_ASN1_SIGNING, &rng)
            .map_err(|e| CaError::Crypto(e.to_string()))?;
        Self::from_pkcs8_der(pkcs8.as_ref())
    }

    pub fn from_pkcs8_der(der: &[u8]) -> Result<DeviceKey, CaError> {
        let rng = SystemRandom::new();
        let keypair = EcdsaKeyPair::from_pkcs8(&ECDSA_P256_SHA256_ASN1_SIGNING, der, &rng)
            .map_err(|e| CaError::Crypto(e.to_string()))?;
        let public_key = keypair.public_key().as_ref().to_vec();
        Ok(DeviceKey {
            keypair,
            pkcs8_der: der.to_vec(),
            public_key,
        })
    }

    pub fn from_pkcs8_pem(pem: &str) -> Result<DeviceKey, CaError> {
        let der = pem_decode("PRIVATE KEY", pem).map_err(CaError::Parse)?;
        Self::from_pkcs8_der(&der)
    }

    pub fn to_pkcs8_pem(&self) -> String {
        pem_encode("PRIVATE KEY", &self.pkcs8_der)
    }

    pub fn pkcs8_der(&self) -> &[u8] {
        &self.pkcs8_der
    }

    /// Uncompressed SEC1 point.
    pub fn public_key(&self) -> &[u8] {
        &self.public_key
    }

    /// SHA-256 of the public key; identifies the key inside evidence.
    pub fn key_id(&self) -> [u8; 32] {
        sha256(&self.public_key)
    }
}

/// The verifier's view of enrolled devices: the device CA plus the public
/// keys of every certificate it has issued, indexed by key id.
pub struct DeviceDirectory {
    keys: HashMap<[u8; 32], Vec<u8>>,
}

impl DeviceDirectory {
    /// Parses a PEM bundle whose first certificate is the device CA and
    /// whose remaining certificates are enrolled devices.  Every device
    /// certificate must verify under the CA; others are rejected.
    pub fn from_pem_bundle(bundle: &str) -> Result<DeviceDirectory, CaError> {
        let mut certs = Vec::new();
        for block in x509_parser::pem::Pem::iter_from_buffer(bundle.as_bytes()) {
            let block = block.map_err(|e| CaError::Parse(format!("invalid PEM: {e}")))?;
            if block.label == "CERTIFICATE" {
                certs.push(block.contents);
            }
        }
        if certs.is_empty() {
            return Err(CaError::Parse("bundle holds no certificates".into()));
        }
        let (ca_der, device_ders) = certs.split_first().unwrap();
        let (_, ca) = x509_parser::parse_x509_certificate(ca_der)
            .map_err(|e| CaError::Parse(format!("device CA: {e}")))?;

        let mut keys = HashMap::new();
        for der in device_ders {
            let (_, cert) = x509_parser::parse_x509_certificate(der)
                .map_err(|e| CaError::Parse(format!("device certificate: {e}")))?;
            cert.verify_signature(Some(ca.public_key())).map_err(|e| {
                CaError::Parse(format!("device certificate does not chain to the CA: {e}"))
            })?;
            let spki = cert.public_key().subject_public_key.data.to_vec();
            keys.insert(sha256(&spki), spki);
        }
        Ok(DeviceDirectory { keys })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    fn public_key_for(&self, key_id: &[u8; 32]) -> Option<&[u8]> {
        self.keys.get(key_id).map(|v| v.as_slice())
    }
}

////////////////////////////////////////////////////////////////////////////////
// Attest and verify.
////////////////////////////////////////////////////////////////////////////////

/// Produces evidence binding `measurement` and `csr_hash` under the device
/// key, answering `nonce`.
pub fn device_attest(
    measurement: [u8; 32],
    csr_hash: [u8; 32],
    nonce: [u8; 32],
    device_key: &DeviceKey,
) -> Result<AttestationEvidence, CaError> {
    let mut evidence = AttestationEvidence {
        version: EVIDENCE_VERSION,
        runtime_measurement: measurement,
        user_data: csr_hash,
        nonce,
        device_key_id: device_key.key_id(),
        signature: Vec::new(),
    };
    let rng = SystemRandom::new();
    let sig = device_key
        .keypair
        .sign(&rng, &evidence.prefix_bytes())
        .map_err(|e| CaError::Crypto(e.to_string()))?;
    evidence.signature = sig.as_ref().to_vec();
    Ok(evidence)
}

/// Verifies evidence and returns its claims.
///
/// Succeeds iff the version is supported, the signing key is enrolled under
/// the device CA, the signature verifies, and the nonce equals
/// `expected_nonce`.
pub fn verify_evidence(
    evidence: &AttestationEvidence,
    expected_nonce: &[u8; 32],
    devices: &DeviceDirectory,
) -> Result<Claims, EvidenceError> {
    if evidence.version != EVIDENCE_VERSION {
        return Err(EvidenceError::VersionUnsupported(evidence.version));
    }
    let public_key = devices
        .public_key_for(&evidence.device_key_id)
        .ok_or(EvidenceError::UnknownDeviceKey)?;
    UnparsedPublicKey::new(&ECDSA_P256_SHA256_ASN1, public_key)
        .verify(&evidence.prefix_bytes(), &evidence.signature)
        .map_err(|_| EvidenceError::BadSignature)?;
    if &evidence.nonce != expected_nonce {
        return Err(EvidenceError::NonceMismatch);
    }
    Ok(Claims {
        measurement: evidence.runtime_measurement,
        user_data: evidence.user_data,
    })
}

pub(crate) fn sha256(bytes: &[u8]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().into()
}
