//! Engine error type.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    /// The program failed WebAssembly validation or linking.
    #[error("program invalid: {0}")]
    Validation(String),
    /// The program exports no `_start` entry point.
    #[error("program exports no _start entry")]
    MissingEntry,
    /// The environment is inconsistent (bad magic, preopen without rights).
    #[error("guest environment invalid: {0}")]
    Environment(String),
    /// Filesystem setup for the guest failed.
    #[error("filesystem setup failed: {0}")]
    Setup(#[from] cenote_vfs::VfsError),
    /// A single random-bytes request exceeded the per-call limit.
    #[error("random request exceeds the per-call limit")]
    TooLarge,
}
