//! The guest environment and execution outcome types.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use std::collections::BTreeMap;

use cenote_policy::{ExecutionStrategy, GlobalPolicy, RightsSet};

use crate::error::EngineError;

const WASM_MAGIC: [u8; 4] = [0x00, 0x61, 0x73, 0x6D];

/// Everything needed to run one guest: the binary, its capability table,
/// the directories it can see, the execution strategy, and the randomness
/// mode.
#[derive(Clone, Debug)]
pub struct GuestEnvironment {
    pub program_bytes: Vec<u8>,
    /// The guest's capability table, from the policy's program rights.
    pub program_rights: BTreeMap<String, RightsSet>,
    /// Absolute directories exposed to the guest as preopens, in order of
    /// descriptor assignment (3, 4, ...).
    pub preopened_dirs: Vec<String>,
    pub strategy: ExecutionStrategy,
    /// A fixed seed makes the random source a deterministic stream; `None`
    /// draws from operating-system entropy.  Seeded mode exists for tests;
    /// production policies use entropy.
    pub rng_seed: Option<[u8; 32]>,
}

impl GuestEnvironment {
    /// Builds the environment from a policy and the provisioned program.
    /// Preopens are the directory-granularity entries of the program's
    /// rights table, in sorted order.
    pub fn from_policy(policy: &GlobalPolicy, program_bytes: Vec<u8>) -> GuestEnvironment {
        let preopened_dirs = policy
            .program_rights
            .keys()
            .filter(|path| path.ends_with('/'))
            .map(|path| {
                if path == "/" {
                    path.clone()
                } else {
                    path.trim_end_matches('/').to_string()
                }
            })
            .collect();
        GuestEnvironment {
            program_bytes,
            program_rights: policy.program_rights.clone(),
            preopened_dirs,
            strategy: policy.execution_strategy,
            rng_seed: None,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.program_bytes.len() < 4 || self.program_bytes[..4] != WASM_MAGIC {
            return Err(EngineError::Environment(
                "program does not start with the WebAssembly magic".into(),
            ));
        }
        for dir in &self.preopened_dirs {
            let as_entry = if dir == "/" { dir.clone() } else { format!("{dir}/") };
            let covered = self.program_rights.contains_key(dir)
                || self.program_rights.contains_key(&as_entry);
            if !covered {
                return Err(EngineError::Environment(format!(
                    "preopened directory {dir} has no rights entry"
                )));
            }
        }
        Ok(())
    }
}

/// How one execution ended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecutionOutcome {
    /// Exit code; meaningful only when `trap` is `None`.
    pub exit_code: u32,
    /// Set iff the guest trapped instead of exiting.
    pub trap: Option<String>,
    /// Number of system-interface calls the guest made.
    pub host_call_count: u64,
}

impl ExecutionOutcome {
    pub fn is_clean_exit(&self) -> bool {
        self.trap.is_none() && self.exit_code == 0
    }
}

/// Captured guest stdio; bounded, host-side only.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GuestLogs {
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
}
