//! Guest execution: an embeddable WebAssembly executor bound to the
//! in-memory filesystem through a deliberately small system interface.
//!
//! The interface is frozen to fifteen calls: argument/environment queries
//! (both empty), preopen discovery, `path_open`, descriptor read/write/
//! seek/close/stat, random bytes, and `proc_exit`.  Every other call in the
//! `wasi_snapshot_preview1` namespace is linked but answers "not
//! supported", keeping the guest-visible behavior surface auditable.
//!
//! Two executors sit behind one interface: an interpreter and a JIT,
//! selected by the policy's execution strategy.  A guest must be
//! observationally identical under both.
//!
//! The guest's stdio descriptors are mapped to a bounded host log ring,
//! never to principal-visible files.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

mod env;
mod error;
mod exec_wasmi;
mod exec_wasmtime;
mod host;
mod rng;

use std::sync::atomic::AtomicBool;
use std::sync::{Arc, Mutex};

use cenote_policy::ExecutionStrategy;
use cenote_vfs::FileSystem;

pub use env::{ExecutionOutcome, GuestEnvironment, GuestLogs};
pub use error::EngineError;
pub use rng::{random_fill, RngState, MAX_RANDOM_FILL};

use host::WasiHost;

/// Runs the guest to completion.  File effects land in `fs`; a guest trap is
/// reported in the outcome, not as an error.
pub fn execute(
    env: &GuestEnvironment,
    fs: Arc<Mutex<FileSystem>>,
) -> Result<ExecutionOutcome, EngineError> {
    execute_full(env, fs, Arc::new(AtomicBool::new(false))).map(|(outcome, _)| outcome)
}

/// [`execute`] with a cooperative cancellation flag (checked at host-call
/// boundaries) and the guest's captured stdio.
pub fn execute_full(
    env: &GuestEnvironment,
    fs: Arc<Mutex<FileSystem>>,
    cancel: Arc<AtomicBool>,
) -> Result<(ExecutionOutcome, GuestLogs), EngineError> {
    env.validate()?;
    let host = WasiHost::new(env, fs, cancel)?;
    let (host, termination) = match env.strategy {
        ExecutionStrategy::Interpret => exec_wasmi::run(&env.program_bytes, host)?,
        ExecutionStrategy::Jit => exec_wasmtime::run(&env.program_bytes, host)?,
    };
    Ok(host.finish(termination))
}
