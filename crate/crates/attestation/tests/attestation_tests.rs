//! End-to-end tests for onboarding, evidence verification, and runtime
//! certificate checks.

use std::sync::{
    atomic::{AtomicU64, Ordering},
    Arc, Mutex,
};

use cenote_attestation::{
    ca::{generate_server_identity, issue_device_credential, CaMaterial},
    client, device_attest, serve, verify_evidence, verify_runtime_certificate,
    AttestationEvidence, CertVerifyError, DeviceDirectory, EvidenceError, OnboardError,
    ProxyConfig, ProxyState,
};
use sha2::{Digest as _, Sha256};

fn sha256(bytes: &[u8]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().into()
}

struct Fixture {
    proxy: ProxyState,
    device: cenote_attestation::ca::DeviceCredential,
    devices_for_checks: DeviceDirectory,
    root_pem: String,
    clock: Arc<AtomicU64>,
}

const T0: u64 = 1_700_000_000;

fn fixture() -> Fixture {
    let root = CaMaterial::generate("proxy root ca").unwrap();
    let root_pem = root.cert_pem().to_string();
    let device_ca = CaMaterial::generate("device ca").unwrap();
    let device = issue_device_credential(&device_ca, "device-0").unwrap();
    let bundle = format!("{}{}", device_ca.cert_pem(), device.cert_pem);
    let devices = DeviceDirectory::from_pem_bundle(&bundle).unwrap();
    let devices_for_checks = DeviceDirectory::from_pem_bundle(&bundle).unwrap();

    let clock = Arc::new(AtomicU64::new(T0));
    let clock_fn = {
        let clock = Arc::clone(&clock);
        Arc::new(move || clock.load(Ordering::SeqCst)) as cenote_attestation::Clock
    };
    let proxy = ProxyState::with_clock(root, devices, ProxyConfig::default(), clock_fn);
    Fixture {
        proxy,
        device,
        devices_for_checks,
        root_pem,
        clock,
    }
}

const MEASUREMENT: [u8; 32] = [0x42; 32];

#[test]
fn honest_onboarding_issues_a_verifiable_certificate() {
    let mut fx = fixture();
    let identity = generate_server_identity("runtime server").unwrap();
    let nonce = fx.proxy.new_challenge();
    let evidence =
        device_attest(MEASUREMENT, sha256(&identity.csr_der), nonce, &fx.device.key).unwrap();

    let issued = fx.proxy.onboard(&identity.csr_der, &evidence).unwrap();

    // Round-trip completeness: a certificate the proxy just issued always
    // verifies against the same root CA and measurement within validity.
    verify_runtime_certificate(&issued.der, &fx.root_pem, &MEASUREMENT, T0 + 10, Some(86_400))
        .unwrap();

    // And the extension really carries the measurement byte for byte.
    let (_, cert) = x509_parser::parse_x509_certificate(&issued.der).unwrap();
    let oid = x509_parser::oid_registry::Oid::from(
        cenote_attestation::MEASUREMENT_EXTENSION_OID,
    )
    .unwrap();
    let ext = cert.get_extension_unique(&oid).unwrap().unwrap();
    assert_eq!(ext.value, &MEASUREMENT);
}

#[test]
fn challenges_are_fresh_and_sized() {
    let mut fx = fixture();
    let a = fx.proxy.new_challenge();
    let b = fx.proxy.new_challenge();
    assert_ne!(a, b);
    assert_eq!(a.len(), 32);
}

#[test]
fn evidence_verifies_and_returns_claims() {
    let fx = fixture();
    let nonce = [9u8; 32];
    let ev = device_attest(MEASUREMENT, [7; 32], nonce, &fx.device.key).unwrap();
    let claims = verify_evidence(&ev, &nonce, &fx.devices_for_checks).unwrap();
    assert_eq!(claims.measurement, MEASUREMENT);
    assert_eq!(claims.user_data, [7; 32]);

    // Wrong nonce.
    assert_eq!(
        verify_evidence(&ev, &[0; 32], &fx.devices_for_checks).unwrap_err(),
        EvidenceError::NonceMismatch
    );

    // Unsupported version.
    let mut v2 = ev.clone();
    v2.version = 2;
    assert_eq!(
        verify_evidence(&v2, &nonce, &fx.devices_for_checks).unwrap_err(),
        EvidenceError::VersionUnsupported(2)
    );
}

#[test]
fn evidence_from_unenrolled_key_is_rejected() {
    let fx = fixture();
    // A key signed by a different CA entirely.
    let rogue_ca = CaMaterial::generate("rogue ca").unwrap();
    let rogue = issue_device_credential(&rogue_ca, "rogue-device").unwrap();
    let nonce = [1u8; 32];
    let ev = device_attest(MEASUREMENT, [7; 32], nonce, &rogue.key).unwrap();
    assert_eq!(
        verify_evidence(&ev, &nonce, &fx.devices_for_checks).unwrap_err(),
        EvidenceError::UnknownDeviceKey
    );
}

/// Brute-force every single-byte flip of one serialized token: none may
/// verify.
#[test]
fn any_single_byte_flip_breaks_the_token() {
    let fx = fixture();
    let nonce = [5u8; 32];
    let ev = device_attest(MEASUREMENT, [7; 32], nonce, &fx.device.key).unwrap();
    let bytes = ev.encode();
    assert!(verify_evidence(
        &AttestationEvidence::decode(&bytes).unwrap(),
        &nonce,
        &fx.devices_for_checks
    )
    .is_ok());

    for position in 0..bytes.len() {
        let mut flipped = bytes.clone();
        flipped[position] ^= 0x01;
        let outcome = AttestationEvidence::decode(&flipped)
            .map_err(|_| ())
            .and_then(|ev| verify_evidence(&ev, &nonce, &fx.devices_for_checks).map_err(|_| ()));
        assert!(
            outcome.is_err(),
            "flip at byte {position} still verified"
        );
    }
}

#[test]
fn binding_mismatch_is_rejected() {
    let mut fx = fixture();
    let honest = generate_server_identity("runtime server").unwrap();
    let other = generate_server_identity("other server").unwrap();
    let nonce = fx.proxy.new_challenge();
    // Evidence binds the OTHER CSR; the submitted one differs.
    let evidence =
        device_attest(MEASUREMENT, sha256(&other.csr_der), nonce, &fx.device.key).unwrap();
    let err = fx.proxy.onboard(&honest.csr_der, &evidence).unwrap_err();
    assert!(matches!(err, OnboardError::CsrBindingMismatch), "{err}");
}

#[test]
fn nonces_are_single_use_and_expire() {
    let mut fx = fixture();
    let identity = generate_server_identity("runtime server").unwrap();
    let nonce = fx.proxy.new_challenge();
    let evidence =
        device_attest(MEASUREMENT, sha256(&identity.csr_der), nonce, &fx.device.key).unwrap();

    fx.proxy.onboard(&identity.csr_der, &evidence).unwrap();
    // Second use of the consumed nonce.
    let err = fx.proxy.onboard(&identity.csr_der, &evidence).unwrap_err();
    assert!(matches!(err, OnboardError::StaleNonce), "{err}");

    // A nonce past its window is stale even if never used.
    let nonce = fx.proxy.new_challenge();
    let evidence =
        device_attest(MEASUREMENT, sha256(&identity.csr_der), nonce, &fx.device.key).unwrap();
    fx.clock.fetch_add(301, Ordering::SeqCst);
    let err = fx.proxy.onboard(&identity.csr_der, &evidence).unwrap_err();
    assert!(matches!(err, OnboardError::StaleNonce), "{err}");
}

#[test]
fn malformed_csr_is_rejected() {
    let mut fx = fixture();
    let nonce = fx.proxy.new_challenge();
    let garbage = b"not a csr at all";
    let evidence = device_attest(MEASUREMENT, sha256(garbage), nonce, &fx.device.key).unwrap();
    let err = fx.proxy.onboard(garbage, &evidence).unwrap_err();
    assert!(matches!(err, OnboardError::MalformedCsr(_)), "{err}");
}

#[test]
fn forged_evidence_signature_is_rejected_at_onboard() {
    let mut fx = fixture();
    let identity = generate_server_identity("runtime server").unwrap();
    let nonce = fx.proxy.new_challenge();
    let mut evidence =
        device_attest(MEASUREMENT, sha256(&identity.csr_der), nonce, &fx.device.key).unwrap();
    // Tamper with the measurement after signing.
    evidence.runtime_measurement[0] ^= 0xFF;
    let err = fx.proxy.onboard(&identity.csr_der, &evidence).unwrap_err();
    assert!(
        matches!(err, OnboardError::EvidenceInvalid(EvidenceError::BadSignature)),
        "{err}"
    );
}

#[test]
fn runtime_certificate_negative_matrix() {
    let mut fx = fixture();
    let identity = generate_server_identity("runtime server").unwrap();
    let nonce = fx.proxy.new_challenge();
    let evidence =
        device_attest(MEASUREMENT, sha256(&identity.csr_der), nonce, &fx.device.key).unwrap();
    let issued = fx.proxy.onboard(&identity.csr_der, &evidence).unwrap();

    // Wrong measurement in the policy.
    let mut other = MEASUREMENT;
    other[5] ^= 1;
    assert_eq!(
        verify_runtime_certificate(&issued.der, &fx.root_pem, &other, T0 + 10, None).unwrap_err(),
        CertVerifyError::MeasurementMismatch
    );

    // Clock advanced beyond notAfter.
    assert_eq!(
        verify_runtime_certificate(
            &issued.der,
            &fx.root_pem,
            &MEASUREMENT,
            T0 + 86_400 + 1,
            None
        )
        .unwrap_err(),
        CertVerifyError::Expired
    );

    // Clock before notBefore.
    assert_eq!(
        verify_runtime_certificate(&issued.der, &fx.root_pem, &MEASUREMENT, T0 - 1, None)
            .unwrap_err(),
        CertVerifyError::Expired
    );

    // Issued lifetime exceeds the acceptable bound.
    assert_eq!(
        verify_runtime_certificate(&issued.der, &fx.root_pem, &MEASUREMENT, T0 + 10, Some(3_600))
            .unwrap_err(),
        CertVerifyError::LifetimeExceeded
    );

    // Signed by a different CA.
    let other_ca = CaMaterial::generate("other root").unwrap();
    assert!(matches!(
        verify_runtime_certificate(
            &issued.der,
            other_ca.cert_pem(),
            &MEASUREMENT,
            T0 + 10,
            None
        )
        .unwrap_err(),
        CertVerifyError::ChainInvalid(_)
    ));

    // A certificate without the extension at all.
    let plain = cenote_attestation::ca::generate_client_identity("no extension").unwrap();
    let plain_der = {
        let (_, pem) = x509_parser::pem::parse_x509_pem(plain.cert_pem.as_bytes()).unwrap();
        pem.contents
    };
    let err = verify_runtime_certificate(&plain_der, &plain.cert_pem, &MEASUREMENT, T0, None)
        .unwrap_err();
    assert_eq!(err, CertVerifyError::ExtensionMissing);
}

#[test]
fn http_service_round_trip() {
    let fx = fixture();
    let proxy = Arc::new(Mutex::new(fx.proxy));
    let handle = serve(Arc::clone(&proxy), "127.0.0.1:0").unwrap();
    let base = handle.base_url();

    let served_root = client::fetch_root_ca(&base).unwrap();
    assert_eq!(served_root, fx.root_pem);

    let identity = generate_server_identity("runtime server").unwrap();
    let nonce = client::request_challenge(&base).unwrap();
    let evidence =
        device_attest(MEASUREMENT, sha256(&identity.csr_der), nonce, &fx.device.key).unwrap();
    let pem = client::onboard(&base, &identity.csr_der, &evidence).unwrap();
    assert!(pem.starts_with("-----BEGIN CERTIFICATE-----"));

    // Rejections surface their machine-readable code.
    let stale = client::onboard(&base, &identity.csr_der, &evidence).unwrap_err();
    match stale {
        cenote_attestation::HttpClientError::Rejected { code, .. } => {
            assert_eq!(code, "stale_nonce")
        }
        other => panic!("expected rejection, got {other:?}"),
    }

    handle.stop();
}
