//! The principal side of a computation.
//!
//! A client trusts nothing but the policy file.  Connecting performs the
//! augmented TLS handshake: the server's certificate must chain to the
//! proxy root CA pinned in the policy, sit inside its validity window,
//! respect the policy's lifetime bound, and carry the expected runtime
//! measurement in its custom extension.  Only then does the client send its
//! first frame, a policy-digest query that must match its own copy.  After
//! that, provisioning and result retrieval are ordinary framed requests.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

mod error;
mod session;
mod verify;

pub use error::ClientError;
pub use session::{connect, ClientIdentity, Session, SessionProbe};

/// Default deadline for result polling.
pub const DEFAULT_RESULT_TIMEOUT: std::time::Duration = std::time::Duration::from_secs(120);

/// Interval between result polls while the computation is still running.
pub const RESULT_POLL_INTERVAL: std::time::Duration = std::time::Duration::from_millis(250);
