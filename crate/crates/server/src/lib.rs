//! The runtime server: the trusted process a computation runs in.
//!
//! Lifecycle: the server boots, generates its TLS key pair and certificate
//! signing request, performs the native attestation flow against the proxy
//! attestation service (binding the CSR hash into the evidence), and
//! receives its short-lived runtime certificate.  It then serves mutually
//! authenticated TLS: principals provision the program and data files over
//! the framed protocol, execution starts automatically once every expected
//! input is present, and results are released only after a clean finish.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

mod coordinator;
mod error;
mod isolate;
mod server;
mod tls;

pub use coordinator::{expected_inputs, Coordinator, LifecycleState};
pub use error::ServerError;
pub use isolate::{measure_binary, IsolateDriver, ProcessIsolate};
pub use server::{boot, RuntimeServer};
