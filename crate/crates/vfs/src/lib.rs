//! The in-memory filesystem shared by principals and the guest program.
//!
//! Principals reach it through the provisioning protocol, the guest through
//! the system-interface shim.  Every file lives in memory as a contiguous
//! byte vector inside a global inode table; directories are hash tables.
//! Access is mediated by per-actor capability tables derived from the global
//! policy, checked when a descriptor is opened; the descriptor then carries
//! the granted rights for the rest of its life.
//!
//! Reads and writes use scatter-gather buffer lists and copy bytes exactly
//! once between the caller's memory and the file: there is no intermediate
//! staging buffer, and an instrumentation counter lets tests assert it.
//!
//! A path may be registered as a *special file* backed by a host handler:
//! writes accumulate a request, closing the written descriptor runs the
//! handler, and subsequent reads return the handler's response.
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
mod fs;
mod iovec;
mod table;

pub use error::VfsError;
pub use fs::{
    AuditEvent, CapabilityTable, Counters, FileKind, FileSystem, Handler, Whence, ROOT_INODE,
};
pub use iovec::{IoVec, IoVecSeq};
pub use table::{ActorId, DescriptorTable, FileDescriptor, FIRST_FD};
