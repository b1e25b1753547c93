//! Filesystem error type.
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

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VfsError {
    /// The actor asked for a right it does not hold, or used a descriptor
    /// beyond the rights it was opened with.
    #[error("access denied on {0}")]
    AccessDenied(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("{0} is a directory")]
    IsDirectory(String),
    #[error("too many open descriptors")]
    TooManyDescriptors,
    #[error("bad descriptor {0}")]
    BadDescriptor(u32),
    /// A scatter-gather buffer lies outside the caller's memory view.
    #[error("buffer out of bounds")]
    OutOfBoundsIoVec,
    #[error("seek to a negative offset")]
    NegativeOffset,
    /// Registration collided with an existing path.
    #[error("path exists: {0}")]
    PathExists(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
}
