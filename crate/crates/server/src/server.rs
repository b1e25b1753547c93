//! Boot, onboarding, and the TLS session loop.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::Arc;
use std::time::Instant;

use cenote_attestation::ca::generate_server_identity;
use cenote_attestation::{client as pas_client};
use cenote_policy::{Digest32, GlobalPolicy};
use cenote_wire::{read_frame, write_frame, ErrorCode, Frame, WireError};
use sha2::{Digest as _, Sha256};

use crate::coordinator::Coordinator;
use crate::error::ServerError;
use crate::isolate::IsolateDriver;
use crate::tls::{server_config, PolicyClientVerifier};

/// A booted, onboarded runtime serving its computation.
pub struct RuntimeServer {
    coordinator: Arc<Coordinator>,
    verifier: Arc<PolicyClientVerifier>,
    tls_config: Arc<rustls::ServerConfig>,
    listener: TcpListener,
}

/// Boots the runtime: generates the key pair and CSR, runs the native
/// attestation flow against the proxy (binding SHA-256 of the CSR into the
/// evidence), obtains the runtime certificate, and starts listening on the
/// policy's server endpoint.
///
/// Any attestation failure aborts the boot; the server never serves without
/// a proxy-issued certificate.
pub fn boot(
    policy: GlobalPolicy,
    driver: &dyn IsolateDriver,
    proxy_base_url: &str,
) -> Result<RuntimeServer, ServerError> {
    let boot_started = Instant::now();
    let coordinator = Arc::new(Coordinator::new(policy)?);
    let policy = coordinator.policy();

    let identity = generate_server_identity(&policy.computation_id)
        .map_err(|e| ServerError::OnboardFailed(e.to_string()))?;
    let csr_hash: [u8; 32] = Sha256::digest(&identity.csr_der).into();

    let step = Instant::now();
    let nonce = pas_client::request_challenge(proxy_base_url)
        .map_err(|e| ServerError::OnboardFailed(format!("challenge: {e}")))?;
    log::info!("attestation challenge obtained in {:?}", step.elapsed());

    let evidence = driver.attest(csr_hash, nonce)?;

    let step = Instant::now();
    let certificate_pem = pas_client::onboard(proxy_base_url, &identity.csr_der, &evidence)
        .map_err(|e| ServerError::OnboardFailed(format!("onboard: {e}")))?;
    log::info!("runtime certificate issued in {:?}", step.elapsed());

    let certificate_der = pem_certificate_to_der(&certificate_pem)
        .map_err(|e| ServerError::OnboardFailed(format!("issued certificate: {e}")))?;

    let verifier = Arc::new(PolicyClientVerifier::new(policy)?);
    let tls_config = Arc::new(server_config(
        Arc::clone(&verifier),
        certificate_der,
        identity.key_pkcs8_der,
    )?);

    let listener = TcpListener::bind(&policy.server_endpoint)?;
    log::info!(
        "runtime serving {} on {} (measurement {}), booted in {:?}",
        policy.computation_id,
        listener.local_addr()?,
        driver.measurement(),
        boot_started.elapsed()
    );
    Ok(RuntimeServer {
        coordinator,
        verifier,
        tls_config,
        listener,
    })
}

fn pem_certificate_to_der(pem: &str) -> Result<Vec<u8>, String> {
    let (_, parsed) = x509_parser::pem::parse_x509_pem(pem.as_bytes())
        .map_err(|e| format!("invalid PEM: {e}"))?;
    Ok(parsed.contents)
}

impl RuntimeServer {
    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn coordinator(&self) -> Arc<Coordinator> {
        Arc::clone(&self.coordinator)
    }

    /// Accepts sessions until the computation completes: execution finished
    /// cleanly and every result receiver fetched at least one result.
    /// Returns an error if execution failed.
    pub fn serve(self) -> Result<(), ServerError> {
        let RuntimeServer {
            coordinator,
            verifier,
            tls_config,
            listener,
        } = self;

        let acceptor = {
            let coordinator = Arc::clone(&coordinator);
            let verifier = Arc::clone(&verifier);
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    match stream {
                        Ok(stream) => {
                            let coordinator = Arc::clone(&coordinator);
                            let verifier = Arc::clone(&verifier);
                            let tls_config = Arc::clone(&tls_config);
                            std::thread::spawn(move || {
                                if let Err(e) =
                                    run_session(&coordinator, &verifier, tls_config, stream)
                                {
                                    log::debug!("session ended: {e}");
                                }
                            });
                        }
                        Err(e) => {
                            log::debug!("accept failed: {e}");
                            return;
                        }
                    }
                }
            })
        };

        let outcome = coordinator.wait_complete();
        // The acceptor thread dies with the process; sessions still in
        // flight have already flushed any result they were owed.
        drop(acceptor);
        outcome
    }
}

/// One authenticated session: handshake, principal identification, then a
/// frame-reply loop until the peer closes.
fn run_session(
    coordinator: &Arc<Coordinator>,
    verifier: &PolicyClientVerifier,
    tls_config: Arc<rustls::ServerConfig>,
    tcp: TcpStream,
) -> Result<(), ServerError> {
    let peer = tcp.peer_addr().ok();
    let conn = rustls::ServerConnection::new(tls_config)
        .map_err(|e| ServerError::Tls(e.to_string()))?;
    let mut stream = rustls::StreamOwned::new(conn, tcp);

    // Drive the handshake to completion so the peer certificate is known.
    while stream.conn.is_handshaking() {
        stream
            .conn
            .complete_io(&mut stream.sock)
            .map_err(|e| ServerError::Tls(format!("handshake failed: {e}")))?;
    }
    let principal_id = {
        let certs = stream
            .conn
            .peer_certificates()
            .ok_or_else(|| ServerError::Tls("no client certificate".into()))?;
        let end_entity = certs
            .first()
            .ok_or_else(|| ServerError::Tls("empty client chain".into()))?;
        verifier
            .principal_for(end_entity.as_ref())
            .ok_or_else(|| ServerError::Tls("unknown client certificate".into()))?
            .to_string()
    };
    log::info!("session established: principal {principal_id:?} from {peer:?}");

    loop {
        let frame = match read_frame(&mut stream) {
            Ok(frame) => frame,
            Err(WireError::Malformed(reason)) => {
                // Answer once, then drop the connection.
                let _ = write_frame(
                    &mut stream,
                    &Frame::error(ErrorCode::MalformedFrame, reason),
                );
                return Ok(());
            }
            Err(WireError::Io(e)) if is_disconnect(&e) => return Ok(()),
            Err(WireError::Io(e)) => return Err(ServerError::Io(e)),
        };
        let reply = coordinator.handle_frame(&principal_id, frame);
        let served_result = matches!(reply, Frame::ResultOk { .. });
        write_frame(&mut stream, &reply).map_err(|e| match e {
            WireError::Io(e) => ServerError::Io(e),
            WireError::Malformed(m) => ServerError::Tls(m.to_string()),
        })?;
        if served_result {
            coordinator.note_served(&principal_id);
        }
    }
}

fn is_disconnect(e: &std::io::Error) -> bool {
    matches!(
        e.kind(),
        std::io::ErrorKind::UnexpectedEof
            | std::io::ErrorKind::ConnectionReset
            | std::io::ErrorKind::ConnectionAborted
            | std::io::ErrorKind::BrokenPipe
    )
}

/// Convenience for launchers: the SHA-256 measurement of a runtime binary
/// as pinned in policies.
pub fn measurement_hex(binary: &std::path::Path) -> std::io::Result<String> {
    Ok(crate::isolate::measure_binary(binary)?.to_hex())
}

/// Digest newtype re-exported for launcher convenience.
pub type Measurement = Digest32;
