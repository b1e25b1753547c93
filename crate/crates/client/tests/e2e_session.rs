//! End-to-end session tests: a live proxy attestation service, a booted
//! runtime server, and clients performing the augmented handshake.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use cenote_attestation::ca::{
    generate_client_identity, issue_device_credential, CaMaterial, ClientIdentityMaterial,
};
use cenote_attestation::{
    serve, CertVerifyError, DeviceDirectory, ProxyConfig, ProxyState, ServiceHandle,
};
use cenote_client::{connect, ClientError, ClientIdentity};
use cenote_policy::{
    fixture::PolicyBuilder, Digest32, ExecutionStrategy, GlobalPolicy, RightsSet, Role,
};
use cenote_server::{boot, ProcessIsolate};
use cenote_wire::ErrorCode;

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

struct World {
    _proxy: ServiceHandle,
    proxy_url: String,
    root_ca_pem: String,
    device: cenote_attestation::ca::DeviceCredential,
    measurement: Digest32,
    identities: Vec<(String, ClientIdentityMaterial)>,
}

const MEASUREMENT_SALT: &[u8] = b"fixture runtime image";

fn world() -> World {
    world_with_clock(None)
}

/// Builds the proxy and identity material; `clock` overrides the proxy's
/// time source (e.g. to issue already-expired certificates).
fn world_with_clock(clock: Option<u64>) -> World {
    let root = CaMaterial::generate("proxy root ca").unwrap();
    let root_ca_pem = root.cert_pem().to_string();
    let device_ca = CaMaterial::generate("device ca").unwrap();
    let device = issue_device_credential(&device_ca, "device-0").unwrap();
    let bundle = format!("{}{}", device_ca.cert_pem(), device.cert_pem);
    let directory = DeviceDirectory::from_pem_bundle(&bundle).unwrap();

    let proxy = match clock {
        None => ProxyState::new(root, directory, ProxyConfig::default()),
        Some(at) => ProxyState::with_clock(
            root,
            directory,
            // A generous nonce window so a frozen clock stays usable.
            ProxyConfig {
                certificate_lifetime_s: 86_400,
                nonce_window_s: 86_400,
            },
            Arc::new(move || at),
        ),
    };
    let handle = serve(Arc::new(Mutex::new(proxy)), "127.0.0.1:0").unwrap();
    let proxy_url = handle.base_url();

    let identities = ["paula", "dora1", "dora2", "rita", "mallory"]
        .iter()
        .map(|name| (name.to_string(), generate_client_identity(name).unwrap()))
        .collect();

    World {
        _proxy: handle,
        proxy_url,
        root_ca_pem,
        device,
        measurement: Digest32::of(MEASUREMENT_SALT),
        identities,
    }
}

impl World {
    fn identity_pem(&self, name: &str) -> &ClientIdentityMaterial {
        &self
            .identities
            .iter()
            .find(|(n, _)| n == name)
            .unwrap()
            .1
    }

    /// The standard four-principal policy on a fresh port.
    fn policy(&self) -> GlobalPolicy {
        self.policy_with(|b| b)
    }

    fn policy_with(
        &self,
        customize: impl FnOnce(PolicyBuilder) -> PolicyBuilder,
    ) -> GlobalPolicy {
        let port = free_port();
        let builder = PolicyBuilder::new("e2e-word-count", &self.root_ca_pem)
            .principal(
                "paula",
                &self.identity_pem("paula").cert_pem,
                &[Role::ProgramProvider],
                &[],
            )
            .principal(
                "dora1",
                &self.identity_pem("dora1").cert_pem,
                &[Role::DataProvider],
                &[("/input/a.txt", RightsSet::write())],
            )
            .principal(
                "dora2",
                &self.identity_pem("dora2").cert_pem,
                &[Role::DataProvider],
                &[("/input/b.txt", RightsSet::write())],
            )
            .principal(
                "rita",
                &self.identity_pem("rita").cert_pem,
                &[Role::ResultReceiver],
                &[("/output/", RightsSet::read())],
            )
            .program_rights(&[
                ("/input/", RightsSet::read()),
                ("/output/", RightsSet::all()),
            ])
            .runtime_measurement(self.measurement)
            .server_endpoint(&format!("127.0.0.1:{port}"))
            .execution_strategy(ExecutionStrategy::Interpret);
        customize(builder).try_build().unwrap()
    }

    /// Boots a runtime for `policy` and serves it on a background thread.
    fn start_server(&self, policy: GlobalPolicy) -> std::thread::JoinHandle<Result<(), String>> {
        let driver = ProcessIsolate::new(
            self.measurement,
            cenote_attestation::DeviceKey::from_pkcs8_pem(&self.device.key.to_pkcs8_pem())
                .unwrap(),
        );
        let proxy_url = self.proxy_url.clone();
        std::thread::spawn(move || {
            let server = boot(policy, &driver, &proxy_url).map_err(|e| e.to_string())?;
            server.serve().map_err(|e| e.to_string())
        })
    }

    fn session_for(&self, policy: &GlobalPolicy, name: &str) -> Result<cenote_client::Session, ClientError> {
        let material = self.identity_pem(name);
        let identity = ClientIdentity::from_pem(policy, &material.cert_pem, &material.key_pem)?;
        connect(policy, &identity)
    }
}

fn wait_for_listener(endpoint: &str) {
    for _ in 0..200 {
        if TcpStream::connect(endpoint).is_ok() {
            return;
        }
        std::thread::sleep(Duration::from_millis(25));
    }
    panic!("server never came up on {endpoint}");
}

#[test]
fn full_flow_delivers_oracle_equal_results() {
    let world = world();
    let policy = world.policy();
    let server = world.start_server(policy.clone());
    wait_for_listener(&policy.server_endpoint);

    let a = b"one two three\nfour\n";
    let b = b"five six";
    // Independent host-side recount.
    let expected: usize = [a.as_slice(), b.as_slice()]
        .iter()
        .map(|text| {
            text.split(|c: &u8| matches!(c, b' ' | b'\t' | b'\n' | b'\r'))
                .filter(|w| !w.is_empty())
                .count()
        })
        .sum();

    let mut paula = world.session_for(&policy, "paula").unwrap();
    paula
        .provision_file(&policy, cenote_guests::WORD_COUNT, "/program/main.wasm")
        .unwrap();

    let mut dora1 = world.session_for(&policy, "dora1").unwrap();
    dora1.provision_file(&policy, a, "/input/a.txt").unwrap();
    let mut dora2 = world.session_for(&policy, "dora2").unwrap();
    dora2.provision_file(&policy, b, "/input/b.txt").unwrap();

    let mut rita = world.session_for(&policy, "rita").unwrap();
    let result = rita
        .fetch_result("/output/count.txt", Duration::from_secs(30))
        .unwrap();
    assert_eq!(String::from_utf8(result).unwrap(), expected.to_string());

    // Verification strictly preceded the first frame on every session.
    for session in [&paula, &dora1, &dora2, &rita] {
        let probe = session.probe();
        let verified = probe.verified_at().expect("verifier ran");
        let first_frame = probe.first_frame_at().expect("frames were sent");
        assert!(verified < first_frame);
    }

    // The server exits cleanly once the receiver has been served.
    drop((paula, dora1, dora2, rita));
    assert_eq!(server.join().unwrap(), Ok(()));
}

#[test]
fn wrong_root_ca_is_rejected_before_any_frame() {
    let world = world();
    let other_ca = CaMaterial::generate("imposter root").unwrap();
    let policy = world.policy();
    let server = world.start_server(policy.clone());
    wait_for_listener(&policy.server_endpoint);

    // The client pins a different root CA.
    let mut doctored = policy.clone();
    doctored.proxy_root_ca_pem = other_ca.cert_pem().to_string();
    let err = world.session_for(&doctored, "rita").unwrap_err();
    match err {
        ClientError::AttestationRejected(CertVerifyError::ChainInvalid(_)) => {}
        other => panic!("expected chain rejection, got {other:?}"),
    }
    drop(server);
}

#[test]
fn wrong_measurement_is_rejected_before_any_frame() {
    let world = world();
    let policy = world.policy();
    let server = world.start_server(policy.clone());
    wait_for_listener(&policy.server_endpoint);

    let mut doctored = policy.clone();
    doctored.runtime_measurement = Digest32::of(b"some other runtime").to_hex();
    let material = world.identity_pem("rita");
    let identity = ClientIdentity::from_pem(&doctored, &material.cert_pem, &material.key_pem).unwrap();
    let err = connect(&doctored, &identity).unwrap_err();
    match &err {
        ClientError::AttestationRejected(CertVerifyError::MeasurementMismatch) => {}
        other => panic!("expected measurement mismatch, got {other:?}"),
    }
    drop(server);
}

#[test]
fn expired_certificate_is_rejected() {
    // A proxy whose clock is frozen three days in the past issues
    // certificates that are already expired by real-world time.
    let past = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap()
        .as_secs()
        - 3 * 86_400;
    let world = world_with_clock(Some(past));
    let policy = world.policy();
    let server = world.start_server(policy.clone());
    wait_for_listener(&policy.server_endpoint);

    let err = world.session_for(&policy, "rita").unwrap_err();
    match err {
        ClientError::AttestationRejected(CertVerifyError::Expired) => {}
        other => panic!("expected expiry rejection, got {other:?}"),
    }
    drop(server);
}

#[test]
fn missing_extension_is_rejected() {
    // A fake runtime presenting a certificate signed by the real root CA
    // but without the measurement extension.
    let world = world();
    let policy = world.policy();

    // Issue such a certificate directly from a fresh CA standing in for the
    // proxy root; the client pins that CA, so the chain itself is fine.
    let root = CaMaterial::generate("proxy root ca").unwrap();
    let (cert_der, key_der) =
        cenote_attestation::ca::issue_tls_certificate(&root, "extensionless server").unwrap();

    let port = free_port();
    let endpoint = format!("127.0.0.1:{port}");
    let listener = TcpListener::bind(&endpoint).unwrap();
    let provider = Arc::new(rustls::crypto::ring::default_provider());
    let config = rustls::ServerConfig::builder_with_provider(provider)
        .with_protocol_versions(&[&rustls::version::TLS13])
        .unwrap()
        .with_no_client_auth()
        .with_single_cert(
            vec![rustls::pki_types::CertificateDer::from(cert_der)],
            rustls::pki_types::PrivateKeyDer::Pkcs8(
                rustls::pki_types::PrivatePkcs8KeyDer::from(key_der),
            ),
        )
        .unwrap();
    let fake = std::thread::spawn(move || {
        if let Ok((tcp, _)) = listener.accept() {
            let conn = rustls::ServerConnection::new(Arc::new(config)).unwrap();
            let mut stream = rustls::StreamOwned::new(conn, tcp);
            while stream.conn.is_handshaking() {
                if stream.conn.complete_io(&mut stream.sock).is_err() {
                    return;
                }
            }
        }
    });

    let mut doctored = policy.clone();
    doctored.server_endpoint = endpoint;
    doctored.proxy_root_ca_pem = root.cert_pem().to_string();
    let err = world.session_for(&doctored, "rita").unwrap_err();
    match err {
        ClientError::AttestationRejected(CertVerifyError::ExtensionMissing) => {}
        other => panic!("expected missing-extension rejection, got {other:?}"),
    }
    fake.join().unwrap();
}

#[test]
fn policy_digest_mismatch_disconnects() {
    let world = world();
    let policy = world.policy();
    let server = world.start_server(policy.clone());
    wait_for_listener(&policy.server_endpoint);

    // Same trust anchors, same endpoint, different computation label: the
    // handshake passes, the digest check must not.
    let mut doctored = policy.clone();
    doctored.computation_id = "a different computation".to_string();
    let err = world.session_for(&doctored, "rita").unwrap_err();
    assert!(matches!(err, ClientError::PolicyMismatch), "{err:?}");
    drop(server);
}

#[test]
fn unknown_client_certificate_fails_the_handshake() {
    let world = world();
    let policy = world.policy();
    let server = world.start_server(policy.clone());
    wait_for_listener(&policy.server_endpoint);

    // Mallory appears in the client's local policy copy but not in the
    // server's; the server refuses the handshake, so this surfaces as a
    // transport failure rather than a protocol error.
    let with_mallory = world.policy_with(|b| {
        b.principal(
            "mallory",
            &world.identity_pem("mallory").cert_pem,
            &[Role::ResultReceiver],
            &[("/output/", RightsSet::read())],
        )
    });
    let mut client_policy = with_mallory;
    client_policy.server_endpoint = policy.server_endpoint.clone();
    let err = world.session_for(&client_policy, "mallory").unwrap_err();
    assert!(matches!(err, ClientError::Transport(_)), "{err:?}");

    // The server is still healthy afterwards.
    let mut rita = world.session_for(&policy, "rita").unwrap();
    let err = rita
        .fetch_result("/output/count.txt", Duration::from_millis(300))
        .unwrap_err();
    assert!(matches!(err, ClientError::Timeout), "{err:?}");
    drop(server);
}

#[test]
fn plaintext_connection_is_refused_and_server_survives() {
    let world = world();
    let policy = world.policy();
    let server = world.start_server(policy.clone());
    wait_for_listener(&policy.server_endpoint);

    let mut tcp = TcpStream::connect(&policy.server_endpoint).unwrap();
    tcp.write_all(b"GET / HTTP/1.1\r\n\r\n").unwrap();
    let mut buf = [0u8; 64];
    // Either an abrupt close or a TLS alert; never a frame.
    let _ = tcp.read(&mut buf);
    drop(tcp);

    let mut paula = world.session_for(&policy, "paula").unwrap();
    let err = paula
        .provision_file(&policy, b"not wasm", "/program/other.wasm")
        .unwrap_err();
    assert!(
        matches!(err, ClientError::ServerError { code: ErrorCode::NotPermitted, .. }),
        "{err:?}"
    );
    drop(server);
}

#[test]
fn provisioning_and_result_errors_surface_verbatim() {
    let world = world();
    let policy = world.policy();
    let server = world.start_server(policy.clone());
    wait_for_listener(&policy.server_endpoint);

    // Receiver-only identity tries to upload.
    let mut rita = world.session_for(&policy, "rita").unwrap();
    let err = rita
        .provision_file(&policy, b"data", "/input/a.txt")
        .unwrap_err();
    assert!(
        matches!(err, ClientError::ServerError { code: ErrorCode::NotPermitted, .. }),
        "{err:?}"
    );

    // Full flow, then ask for a path that was never produced.
    let mut paula = world.session_for(&policy, "paula").unwrap();
    paula
        .provision_file(&policy, cenote_guests::WORD_COUNT, "/program/main.wasm")
        .unwrap();
    let mut dora1 = world.session_for(&policy, "dora1").unwrap();
    dora1.provision_file(&policy, b"x", "/input/a.txt").unwrap();
    let mut dora2 = world.session_for(&policy, "dora2").unwrap();
    dora2.provision_file(&policy, b"y", "/input/b.txt").unwrap();

    // Wait until the produced result is available, then ask for a missing
    // one.
    rita.fetch_result("/output/count.txt", Duration::from_secs(30))
        .unwrap();
    let err = rita
        .fetch_result("/output/nonexistent.bin", Duration::from_secs(5))
        .unwrap_err();
    assert!(
        matches!(err, ClientError::ServerError { code: ErrorCode::NotFound, .. }),
        "{err:?}"
    );

    // Uploads after completion are refused by state.
    let err = dora1
        .provision_file(&policy, b"late", "/input/a.txt")
        .unwrap_err();
    assert!(
        matches!(err, ClientError::ServerError { code: ErrorCode::WrongState, .. }),
        "{err:?}"
    );
    drop(server);
}
