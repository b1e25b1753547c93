//! The global policy: the single document of trust for a computation.
//!
//! Every principal, the runtime server, and the attestation tooling read the
//! same policy file.  It names the principals and their certificates, assigns
//! roles, grants file capabilities, pins the expected runtime measurement and
//! the attestation root CA, and selects the execution strategy.  Because the
//! policy identifies a computation, all parties must agree on its *digest*:
//! this crate defines a canonical byte form so that the hash is stable across
//! whitespace, key order, and platforms.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

mod digest;
mod error;
mod path;
mod policy;
mod rights;

pub use digest::Digest32;
pub use error::PolicyError;
pub use path::{longest_prefix_rights, validate_file_path, validate_rights_path};
pub use policy::{
    canonical_bytes, fixture, parse_policy, policy_digest, ExecutionStrategy, GlobalPolicy,
    Principal, Role,
};
pub use rights::RightsSet;
