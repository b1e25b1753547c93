//! HTTP/1.1 surface of the proxy attestation service.
//!
//! Three endpoints, bodies base64-in-JSON:
//!
//! - `POST /challenge` -> `{"nonce": "<base64>"}`
//! - `POST /onboard` with `{"csr": "<base64 DER>", "evidence": "<base64>"}`
//!   -> `{"certificate": "<PEM>"}` or an error object
//!   `{"error": "<code>", "message": "<text>"}`
//! - `GET /rootca` -> the root CA certificate, PEM, as plain text
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use std::io::Read;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use base64::Engine as _;
use serde::Deserialize;
use tiny_http::{Header, Method, Response, Server};

use crate::error::CaError;
use crate::evidence::AttestationEvidence;
use crate::proxy::ProxyState;

const MAX_BODY: usize = 4 * 1024 * 1024;

/// A running service; dropping it (or calling [`ServiceHandle::stop`])
/// shuts the listener down.
pub struct ServiceHandle {
    server: Arc<Server>,
    addr: SocketAddr,
    worker: Option<std::thread::JoinHandle<()>>,
}

impl ServiceHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.server.unblock();
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Binds `listen` and serves the proxy until the handle is stopped.
pub fn serve(proxy: Arc<Mutex<ProxyState>>, listen: &str) -> Result<ServiceHandle, CaError> {
    let server = Server::http(listen)
        .map_err(|e| CaError::Io(std::io::Error::other(format!("bind {listen}: {e}"))))?;
    let server = Arc::new(server);
    let addr = match server.server_addr() {
        tiny_http::ListenAddr::IP(addr) => addr,
        #[allow(unreachable_patterns)]
        _ => return Err(CaError::Crypto("non-IP listener".into())),
    };
    let worker = {
        let server = Arc::clone(&server);
        std::thread::spawn(move || {
            for request in server.incoming_requests() {
                handle(&proxy, request);
            }
        })
    };
    log::info!("attestation service listening on {addr}");
    Ok(ServiceHandle {
        server,
        addr,
        worker: Some(worker),
    })
}

#[derive(Deserialize)]
struct OnboardBody {
    csr: String,
    evidence: String,
}

fn handle(proxy: &Arc<Mutex<ProxyState>>, mut request: tiny_http::Request) {
    let method = request.method().clone();
    let url = request.url().to_string();
    let response = match (&method, url.as_str()) {
        (Method::Post, "/challenge") => {
            let nonce = proxy.lock().unwrap().new_challenge();
            let body = serde_json::json!({
                "nonce": base64::engine::general_purpose::STANDARD.encode(nonce),
            });
            json_response(200, &body)
        }
        (Method::Post, "/onboard") => {
            let mut body = String::new();
            match request
                .as_reader()
                .take(MAX_BODY as u64)
                .read_to_string(&mut body)
            {
                Ok(_) => onboard_response(proxy, &body),
                Err(e) => error_response(400, "bad_request", &e.to_string()),
            }
        }
        (Method::Get, "/rootca") => {
            let pem = proxy.lock().unwrap().root_ca_pem().to_string();
            Response::from_string(pem).with_status_code(200)
        }
        _ => error_response(404, "not_found", "unknown endpoint"),
    };
    let _ = request.respond(response);
}

fn onboard_response(
    proxy: &Arc<Mutex<ProxyState>>,
    body: &str,
) -> Response<std::io::Cursor<Vec<u8>>> {
    let parsed: OnboardBody = match serde_json::from_str(body) {
        Ok(parsed) => parsed,
        Err(e) => return error_response(400, "bad_request", &format!("body: {e}")),
    };
    let engine = &base64::engine::general_purpose::STANDARD;
    let csr = match engine.decode(&parsed.csr) {
        Ok(csr) => csr,
        Err(e) => return error_response(400, "bad_request", &format!("csr: {e}")),
    };
    let evidence_bytes = match engine.decode(&parsed.evidence) {
        Ok(b) => b,
        Err(e) => return error_response(400, "bad_request", &format!("evidence: {e}")),
    };
    let evidence = match AttestationEvidence::decode(&evidence_bytes) {
        Ok(ev) => ev,
        Err(e) => return error_response(400, "evidence_invalid", &e.to_string()),
    };
    match proxy.lock().unwrap().onboard(&csr, &evidence) {
        Ok(issued) => {
            log::info!("onboarded a runtime; issued certificate");
            json_response(200, &serde_json::json!({ "certificate": issued.pem }))
        }
        Err(e) => {
            log::warn!("onboarding rejected: {e}");
            error_response(400, e.code(), &e.to_string())
        }
    }
}

fn json_response(status: u16, body: &serde_json::Value) -> Response<std::io::Cursor<Vec<u8>>> {
    Response::from_string(body.to_string())
        .with_status_code(status)
        .with_header(Header::from_bytes("Content-Type", "application/json").unwrap())
}

fn error_response(status: u16, code: &str, message: &str) -> Response<std::io::Cursor<Vec<u8>>> {
    json_response(
        status,
        &serde_json::json!({ "error": code, "message": message }),
    )
}
