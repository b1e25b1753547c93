//! The policy document itself: schema, validation, canonical form, digest,
//! and capability queries.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::digest::Digest32;
use crate::error::PolicyError;
use crate::path::{longest_prefix_rights, validate_file_path, validate_rights_path};
use crate::rights::RightsSet;

////////////////////////////////////////////////////////////////////////////////
// Roles and principals.
////////////////////////////////////////////////////////////////////////////////

/// The part a principal plays in one computation.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Supplies the program binary.
    ProgramProvider,
    /// Supplies input files.
    DataProvider,
    /// May read outputs once the computation has finished.
    ResultReceiver,
}

/// One party to the computation: an identity certificate, a set of roles, and
/// a table of file capabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Principal {
    /// Opaque identifier, unique within the policy.
    pub id: String,
    /// PEM-encoded X.509 certificate presented by this principal during the
    /// mutual TLS handshake.  Matching is by certificate bytes, not by name.
    pub client_cert_pem: String,
    /// Roles held; never empty.
    pub roles: BTreeSet<Role>,
    /// Capability table: absolute path or directory prefix (trailing `/`) to
    /// granted rights.  Queries use longest-prefix matching.
    pub file_rights: BTreeMap<String, RightsSet>,
}

impl Principal {
    pub fn has_role(&self, role: Role) -> bool {
        self.roles.contains(&role)
    }

    /// DER bytes of the client certificate.
    pub fn client_cert_der(&self) -> Result<Vec<u8>, PolicyError> {
        pem_to_der(&self.client_cert_pem).map_err(|e| {
            PolicyError::Invariant(format!("principal {:?}: bad certificate: {e}", self.id))
        })
    }
}

////////////////////////////////////////////////////////////////////////////////
// The policy proper.
////////////////////////////////////////////////////////////////////////////////

/// How the runtime executes the provisioned program.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionStrategy {
    /// A bytecode interpreter.
    Interpret,
    /// Just-in-time compilation to native code.
    Jit,
}

/// The global policy for one computation.
///
/// This document is public to all parties, identified by its digest (see
/// [`policy_digest`]), and is the only source of authorization decisions made
/// by the runtime and by clients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalPolicy {
    /// Unique label for the computation.
    pub computation_id: String,
    /// Every party, in a fixed, significant order.
    pub principals: Vec<Principal>,
    /// Where the program binary is provisioned, e.g. `/program/main.wasm`.
    pub program_entry_path: String,
    /// Capability table of the provisioned program itself.  Directory
    /// entries double as the preopened directories visible to the guest.
    pub program_rights: BTreeMap<String, RightsSet>,
    /// Hex SHA-256 of the expected runtime binary.  Clients compare this
    /// against the measurement carried in the runtime's certificate.
    pub runtime_measurement: String,
    /// PEM certificate of the attestation service root CA.
    pub proxy_root_ca_pem: String,
    pub execution_strategy: ExecutionStrategy,
    /// Maximum accepted validity (seconds) of the runtime's certificate.
    pub certificate_lifetime_s: u64,
    /// `host:port` the runtime server listens on.
    pub server_endpoint: String,
    /// `host:port` of the proxy attestation service.
    pub proxy_endpoint: String,
    /// Identifiers of built-in native modules enabled for this computation.
    #[serde(default)]
    pub native_modules: Vec<String>,
}

impl GlobalPolicy {
    /// The pinned runtime measurement as a digest.  Valid policies always
    /// carry a well-formed measurement; see [`GlobalPolicy::validate`].
    pub fn runtime_measurement(&self) -> Digest32 {
        Digest32::from_hex(&self.runtime_measurement)
            .expect("validated policy carries a well-formed measurement")
    }

    pub fn principal(&self, id: &str) -> Option<&Principal> {
        self.principals.iter().find(|p| p.id == id)
    }

    /// The unique program provider.
    pub fn program_provider(&self) -> &Principal {
        self.principals
            .iter()
            .find(|p| p.has_role(Role::ProgramProvider))
            .expect("validated policy has exactly one program provider")
    }

    pub fn principals_with_role(&self, role: Role) -> impl Iterator<Item = &Principal> {
        self.principals.iter().filter(move |p| p.has_role(role))
    }

    /// Finds the principal whose client certificate has the given DER bytes.
    pub fn principal_for_cert_der(&self, der: &[u8]) -> Option<&Principal> {
        self.principals
            .iter()
            .find(|p| p.client_cert_der().map(|d| d == der).unwrap_or(false))
    }

    /// Rights `principal_id` holds on `path`, by longest-prefix match over
    /// its capability table.  The empty set when no entry matches.
    pub fn rights_for(&self, principal_id: &str, path: &str) -> Result<RightsSet, PolicyError> {
        let principal = self
            .principal(principal_id)
            .ok_or_else(|| PolicyError::UnknownPrincipal(principal_id.to_string()))?;
        Ok(longest_prefix_rights(&principal.file_rights, path))
    }

    /// Checks every semantic invariant.  Called by [`parse_policy`]; callers
    /// constructing policies programmatically must call it themselves.
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.computation_id.is_empty() {
            return Err(PolicyError::Invariant("computation_id is empty".into()));
        }

        let providers = self
            .principals_with_role(Role::ProgramProvider)
            .count();
        if providers != 1 {
            return Err(PolicyError::Invariant(format!(
                "policy must name exactly one program provider, found {providers}"
            )));
        }
        if self.principals_with_role(Role::ResultReceiver).next().is_none() {
            return Err(PolicyError::Invariant(
                "policy names no result receiver".into(),
            ));
        }

        match hex::decode(&self.runtime_measurement) {
            Ok(bytes) if bytes.len() == 32 => {}
            Ok(bytes) => {
                return Err(PolicyError::Invariant(format!(
                    "runtime_measurement must be 32 bytes, got {}",
                    bytes.len()
                )))
            }
            Err(e) => {
                return Err(PolicyError::Invariant(format!(
                    "runtime_measurement is not hex: {e}"
                )))
            }
        }
        if self.runtime_measurement.chars().any(|c| c.is_ascii_uppercase()) {
            return Err(PolicyError::Invariant(
                "runtime_measurement must be lowercase hex".into(),
            ));
        }

        validate_self_signed_ca(&self.proxy_root_ca_pem)?;

        validate_file_path(&self.program_entry_path)
            .map_err(|e| PolicyError::Invariant(format!("program_entry_path: {e}")))?;
        for path in self.program_rights.keys() {
            validate_rights_path(path)
                .map_err(|e| PolicyError::Invariant(format!("program_rights: {e}")))?;
        }

        let mut seen_ids = HashSet::new();
        let mut seen_certs = HashSet::new();
        for principal in &self.principals {
            if principal.id.is_empty() {
                return Err(PolicyError::Invariant("principal id is empty".into()));
            }
            if !seen_ids.insert(principal.id.clone()) {
                return Err(PolicyError::Invariant(format!(
                    "duplicate principal id {:?}",
                    principal.id
                )));
            }
            if principal.roles.is_empty() {
                return Err(PolicyError::Invariant(format!(
                    "principal {:?} has no role",
                    principal.id
                )));
            }
            let der = principal.client_cert_der()?;
            if !seen_certs.insert(der) {
                return Err(PolicyError::Invariant(format!(
                    "principal {:?} shares a client certificate with another principal",
                    principal.id
                )));
            }
            for path in principal.file_rights.keys() {
                validate_rights_path(path).map_err(|e| {
                    PolicyError::Invariant(format!("principal {:?}: {e}", principal.id))
                })?;
            }
        }

        if self.server_endpoint.is_empty() || self.proxy_endpoint.is_empty() {
            return Err(PolicyError::Invariant("endpoints must be non-empty".into()));
        }
        if self.certificate_lifetime_s == 0 {
            return Err(PolicyError::Invariant(
                "certificate_lifetime_s must be positive".into(),
            ));
        }

        Ok(())
    }
}

/// Requires `pem` to contain a self-signed CA certificate.
fn validate_self_signed_ca(pem: &str) -> Result<(), PolicyError> {
    let der = pem_to_der(pem)
        .map_err(|e| PolicyError::Invariant(format!("proxy_root_ca_pem: {e}")))?;
    let (_, cert) = x509_parser::parse_x509_certificate(&der)
        .map_err(|e| PolicyError::Invariant(format!("proxy_root_ca_pem: {e}")))?;
    if cert.subject() != cert.issuer() {
        return Err(PolicyError::Invariant(
            "proxy_root_ca_pem is not self-signed (subject != issuer)".into(),
        ));
    }
    if !cert.is_ca() {
        return Err(PolicyError::Invariant(
            "proxy_root_ca_pem is not a CA certificate".into(),
        ));
    }
    cert.verify_signature(None).map_err(|e| {
        PolicyError::Invariant(format!("proxy_root_ca_pem self-signature invalid: {e}"))
    })?;
    Ok(())
}

fn pem_to_der(pem: &str) -> Result<Vec<u8>, String> {
    let (_, parsed) = x509_parser::pem::parse_x509_pem(pem.as_bytes())
        .map_err(|e| format!("invalid PEM: {e}"))?;
    if parsed.label != "CERTIFICATE" {
        return Err(format!("expected CERTIFICATE block, found {}", parsed.label));
    }
    Ok(parsed.contents)
}

////////////////////////////////////////////////////////////////////////////////
// Parsing, canonical form, digest.
////////////////////////////////////////////////////////////////////////////////

/// Parses and validates a policy from raw bytes.
///
/// Unknown keys are rejected rather than ignored: the policy is a security
/// document and silently dropping fields invites mismatched interpretations.
pub fn parse_policy(text: &[u8]) -> Result<GlobalPolicy, PolicyError> {
    let text = std::str::from_utf8(text)
        .map_err(|e| PolicyError::Syntax(format!("policy is not UTF-8: {e}")))?;
    let policy: GlobalPolicy = serde_json::from_str(text).map_err(|e| {
        use serde_json::error::Category;
        match e.classify() {
            Category::Data => PolicyError::Schema(e.to_string()),
            _ => PolicyError::Syntax(e.to_string()),
        }
    })?;
    policy.validate()?;
    Ok(policy)
}

/// The canonical byte form of a policy: JSON with lexicographically sorted
/// keys and no insignificant whitespace.  Two equal policies yield identical
/// bytes regardless of how their source files were formatted.
pub fn canonical_bytes(policy: &GlobalPolicy) -> Vec<u8> {
    // serde_json's Value keeps object members in a BTreeMap, so converting
    // through Value sorts every object's keys.
    let value = serde_json::to_value(policy).expect("policy serialization cannot fail");
    serde_json::to_vec(&value).expect("value serialization cannot fail")
}

/// SHA-256 over [`canonical_bytes`]; the identity of the computation.
pub fn policy_digest(policy: &GlobalPolicy) -> Digest32 {
    Digest32::of(&canonical_bytes(policy))
}

////////////////////////////////////////////////////////////////////////////////
// Fixture construction.
////////////////////////////////////////////////////////////////////////////////

/// Programmatic policy construction, used by tests and tooling.
pub mod fixture {
    use super::*;

    /// Builds a [`GlobalPolicy`] step by step.  `try_build` runs the full
    /// validation, so a successfully built policy satisfies every invariant.
    pub struct PolicyBuilder {
        policy: GlobalPolicy,
    }

    impl PolicyBuilder {
        pub fn new(computation_id: &str, proxy_root_ca_pem: &str) -> Self {
            PolicyBuilder {
                policy: GlobalPolicy {
                    computation_id: computation_id.to_string(),
                    principals: Vec::new(),
                    program_entry_path: "/program/main.wasm".to_string(),
                    program_rights: BTreeMap::new(),
                    runtime_measurement: "00".repeat(32),
                    proxy_root_ca_pem: proxy_root_ca_pem.to_string(),
                    execution_strategy: ExecutionStrategy::Interpret,
                    certificate_lifetime_s: 86_400,
                    server_endpoint: "127.0.0.1:0".to_string(),
                    proxy_endpoint: "127.0.0.1:0".to_string(),
                    native_modules: Vec::new(),
                },
            }
        }

        pub fn principal(
            mut self,
            id: &str,
            client_cert_pem: &str,
            roles: &[Role],
            file_rights: &[(&str, RightsSet)],
        ) -> Self {
            self.policy.principals.push(Principal {
                id: id.to_string(),
                client_cert_pem: client_cert_pem.to_string(),
                roles: roles.iter().copied().collect(),
                file_rights: file_rights
                    .iter()
                    .map(|(p, r)| (p.to_string(), RightsSet::normalized(*r)))
                    .collect(),
            });
            self
        }

        pub fn program_entry_path(mut self, path: &str) -> Self {
            self.policy.program_entry_path = path.to_string();
            self
        }

        pub fn program_rights(mut self, rights: &[(&str, RightsSet)]) -> Self {
            self.policy.program_rights = rights
                .iter()
                .map(|(p, r)| (p.to_string(), RightsSet::normalized(*r)))
                .collect();
            self
        }

        pub fn runtime_measurement(mut self, measurement: Digest32) -> Self {
            self.policy.runtime_measurement = measurement.to_hex();
            self
        }

        pub fn execution_strategy(mut self, strategy: ExecutionStrategy) -> Self {
            self.policy.execution_strategy = strategy;
            self
        }

        pub fn certificate_lifetime_s(mut self, seconds: u64) -> Self {
            self.policy.certificate_lifetime_s = seconds;
            self
        }

        pub fn server_endpoint(mut self, endpoint: &str) -> Self {
            self.policy.server_endpoint = endpoint.to_string();
            self
        }

        pub fn proxy_endpoint(mut self, endpoint: &str) -> Self {
            self.policy.proxy_endpoint = endpoint.to_string();
            self
        }

        pub fn native_module(mut self, id: &str) -> Self {
            self.policy.native_modules.push(id.to_string());
            self
        }

        pub fn try_build(self) -> Result<GlobalPolicy, PolicyError> {
            self.policy.validate()?;
            Ok(self.policy)
        }

        /// Skips validation; for tests that need an intentionally broken
        /// policy.
        pub fn build_unchecked(self) -> GlobalPolicy {
            self.policy
        }
    }
}
