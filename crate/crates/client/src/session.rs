//! Connecting, provisioning, and fetching results.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use std::net::TcpStream;
use std::sync::Arc;
use std::time::{Duration, Instant};

use cenote_policy::{policy_digest, GlobalPolicy, Role};
use cenote_wire::{read_frame, write_frame, ErrorCode, Frame, WireError};
use rustls::pki_types::{CertificateDer, PrivateKeyDer, PrivatePkcs8KeyDer, ServerName};

use crate::error::ClientError;
use crate::verify::{AugmentedServerVerifier, Probe};
use crate::RESULT_POLL_INTERVAL;

/// A principal's credentials: the certificate listed in the policy plus its
/// private key.
pub struct ClientIdentity {
    pub principal_id: String,
    cert_der: Vec<u8>,
    key_pkcs8_der: Vec<u8>,
}

impl ClientIdentity {
    /// Loads PEM material and resolves which principal it belongs to by
    /// matching the certificate bytes against the policy.
    pub fn from_pem(
        policy: &GlobalPolicy,
        cert_pem: &str,
        key_pem: &str,
    ) -> Result<ClientIdentity, ClientError> {
        let cert_der = pem_block(cert_pem, "CERTIFICATE")?;
        let key_pkcs8_der = pem_block(key_pem, "PRIVATE KEY")?;
        let principal = policy
            .principal_for_cert_der(&cert_der)
            .ok_or_else(|| {
                ClientError::Identity("certificate does not match any principal".into())
            })?;
        Ok(ClientIdentity {
            principal_id: principal.id.clone(),
            cert_der,
            key_pkcs8_der,
        })
    }
}

fn pem_block(pem: &str, label: &str) -> Result<Vec<u8>, ClientError> {
    for block in x509_parser::pem::Pem::iter_from_buffer(pem.as_bytes()) {
        let block = block.map_err(|e| ClientError::Identity(format!("invalid PEM: {e}")))?;
        if block.label == label {
            return Ok(block.contents);
        }
    }
    Err(ClientError::Identity(format!("no {label} block found")))
}

/// Observation handle for tests; see [`Probe`].
pub type SessionProbe = Arc<Probe>;

/// An authenticated session with the runtime server.
pub struct Session {
    stream: rustls::StreamOwned<rustls::ClientConnection, TcpStream>,
    probe: SessionProbe,
    principal_id: String,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("principal_id", &self.principal_id)
            .finish_non_exhaustive()
    }
}


/// Establishes a session: TCP, the augmented TLS handshake, then the
/// policy-digest cross-check.  No application frame is transmitted before
/// the certificate checks complete.
pub fn connect(policy: &GlobalPolicy, identity: &ClientIdentity) -> Result<Session, ClientError> {
    let started = Instant::now();
    let probe: SessionProbe = Arc::new(Probe::default());
    let verifier = AugmentedServerVerifier::new(
        policy.proxy_root_ca_pem.clone(),
        policy.runtime_measurement().0,
        policy.certificate_lifetime_s,
        Arc::clone(&probe),
    );
    let provider = Arc::new(rustls::crypto::ring::default_provider());
    let config = rustls::ClientConfig::builder_with_provider(provider)
        .with_protocol_versions(&[&rustls::version::TLS13])
        .map_err(|e| ClientError::Transport(e.to_string()))?
        .dangerous()
        .with_custom_certificate_verifier(Arc::new(verifier))
        .with_client_auth_cert(
            vec![CertificateDer::from(identity.cert_der.clone())],
            PrivateKeyDer::Pkcs8(PrivatePkcs8KeyDer::from(identity.key_pkcs8_der.clone())),
        )
        .map_err(|e| ClientError::Identity(e.to_string()))?;

    let host = policy
        .server_endpoint
        .rsplit_once(':')
        .map(|(host, _)| host)
        .unwrap_or(policy.server_endpoint.as_str());
    let server_name = ServerName::try_from(host.to_string())
        .map_err(|e| ClientError::Transport(format!("server name: {e}")))?;

    let tcp = TcpStream::connect(&policy.server_endpoint)
        .map_err(|e| ClientError::Transport(format!("connect: {e}")))?;
    let conn = rustls::ClientConnection::new(Arc::new(config), server_name)
        .map_err(|e| ClientError::Transport(e.to_string()))?;
    let mut stream = rustls::StreamOwned::new(conn, tcp);

    while stream.conn.is_handshaking() {
        if let Err(e) = stream.conn.complete_io(&mut stream.sock) {
            // A recorded verdict means our verifier rejected the server.
            if let Some(verdict) = probe.verdict.lock().unwrap().take() {
                return Err(ClientError::AttestationRejected(verdict));
            }
            return Err(ClientError::Transport(format!("handshake: {e}")));
        }
    }
    log::info!(
        "attested handshake with {} completed in {:?}",
        policy.server_endpoint,
        started.elapsed()
    );

    let mut session = Session {
        stream,
        probe,
        principal_id: identity.principal_id.clone(),
    };

    // Cross-check the server's policy against our own before any payload.
    match session.round_trip(&Frame::QueryPolicyDigest)? {
        Frame::PolicyDigest(digest) => {
            if digest != *policy_digest(policy).as_bytes() {
                return Err(ClientError::PolicyMismatch);
            }
        }
        Frame::Error { code, message } => return Err(ClientError::ServerError { code, message }),
        other => {
            return Err(ClientError::Transport(format!(
                "unexpected reply to digest query: {other:?}"
            )))
        }
    }
    Ok(session)
}

impl Session {
    pub fn principal_id(&self) -> &str {
        &self.principal_id
    }

    /// Test observation point.
    pub fn probe(&self) -> SessionProbe {
        Arc::clone(&self.probe)
    }

    fn round_trip(&mut self, frame: &Frame) -> Result<Frame, ClientError> {
        self.probe.mark_frame();
        write_frame(&mut self.stream, frame).map_err(wire_to_client)?;
        read_frame(&mut self.stream).map_err(wire_to_client)
    }

    /// Uploads `bytes` to `remote_path`.  The frame type follows the
    /// policy: the program provider uploading to the program entry path
    /// sends a program frame, everything else is data.
    pub fn provision_file(
        &mut self,
        policy: &GlobalPolicy,
        bytes: &[u8],
        remote_path: &str,
    ) -> Result<(), ClientError> {
        let is_program = remote_path == policy.program_entry_path
            && policy
                .principal(&self.principal_id)
                .map(|p| p.has_role(Role::ProgramProvider))
                .unwrap_or(false);
        let frame = if is_program {
            Frame::ProvisionProgram {
                path: remote_path.to_string(),
                data: bytes.to_vec(),
            }
        } else {
            Frame::ProvisionData {
                path: remote_path.to_string(),
                data: bytes.to_vec(),
            }
        };
        match self.round_trip(&frame)? {
            Frame::Ack => Ok(()),
            Frame::Error { code, message } => Err(ClientError::ServerError { code, message }),
            other => Err(ClientError::Transport(format!(
                "unexpected reply to provisioning: {other:?}"
            ))),
        }
    }

    /// Fetches a result file, polling while the computation is still
    /// running, until `timeout` elapses.
    pub fn fetch_result(
        &mut self,
        remote_path: &str,
        timeout: Duration,
    ) -> Result<Vec<u8>, ClientError> {
        let deadline = Instant::now() + timeout;
        loop {
            let reply = self.round_trip(&Frame::RequestResult {
                path: remote_path.to_string(),
            })?;
            match reply {
                Frame::ResultOk { data } => return Ok(data),
                Frame::Error {
                    code: ErrorCode::WrongState,
                    ..
                } => {
                    if Instant::now() >= deadline {
                        return Err(ClientError::Timeout);
                    }
                    std::thread::sleep(RESULT_POLL_INTERVAL);
                }
                Frame::Error { code, message } => {
                    return Err(ClientError::ServerError { code, message })
                }
                other => {
                    return Err(ClientError::Transport(format!(
                        "unexpected reply to result request: {other:?}"
                    )))
                }
            }
        }
    }
}

fn wire_to_client(e: WireError) -> ClientError {
    ClientError::Transport(e.to_string())
}
