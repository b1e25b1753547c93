//! Per-session descriptor tables.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use std::collections::HashMap;

use cenote_policy::RightsSet;

use crate::error::VfsError;

/// Who is performing a filesystem operation.  Capability tables key on this.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ActorId {
    /// A principal, identified as in the policy.
    Principal(String),
    /// The provisioned guest program.
    Program,
}

/// An open handle: the inode it points at, a byte cursor, and the rights the
/// actor was granted when opening it.  Operations outside those rights are
/// refused regardless of the inode's state.
#[derive(Clone, Debug)]
pub struct FileDescriptor {
    pub fd: u32,
    pub inode: u64,
    pub offset: u64,
    pub rights: RightsSet,
    /// Path the descriptor was opened with; kept for auditing.
    pub path: String,
    /// Set once a write lands on a special file, so that closing the
    /// descriptor completes the module request.
    pub(crate) wrote_special: bool,
}

/// Descriptor numbers are per-session and start at [`FIRST_FD`]; numbers 0-2
/// are reserved for the guest's stdio streams, which the engine maps to log
/// sinks rather than to files.
pub const FIRST_FD: u32 = 3;

const DEFAULT_DESCRIPTOR_LIMIT: usize = 1024;

/// The set of descriptors one session (a principal connection, or the guest)
/// holds open.
#[derive(Debug)]
pub struct DescriptorTable {
    actor: ActorId,
    next_fd: u32,
    open: HashMap<u32, FileDescriptor>,
    limit: usize,
}

impl DescriptorTable {
    pub fn new(actor: ActorId) -> Self {
        DescriptorTable {
            actor,
            next_fd: FIRST_FD,
            open: HashMap::new(),
            limit: DEFAULT_DESCRIPTOR_LIMIT,
        }
    }

    pub fn with_limit(actor: ActorId, limit: usize) -> Self {
        DescriptorTable {
            limit,
            ..DescriptorTable::new(actor)
        }
    }

    pub fn actor(&self) -> &ActorId {
        &self.actor
    }

    pub fn open_count(&self) -> usize {
        self.open.len()
    }

    pub fn get(&self, fd: u32) -> Result<&FileDescriptor, VfsError> {
        self.open.get(&fd).ok_or(VfsError::BadDescriptor(fd))
    }

    pub(crate) fn get_mut(&mut self, fd: u32) -> Result<&mut FileDescriptor, VfsError> {
        self.open.get_mut(&fd).ok_or(VfsError::BadDescriptor(fd))
    }

    pub(crate) fn insert(
        &mut self,
        inode: u64,
        rights: RightsSet,
        path: String,
    ) -> Result<u32, VfsError> {
        if self.open.len() >= self.limit {
            return Err(VfsError::TooManyDescriptors);
        }
        let fd = self.next_fd;
        self.next_fd = self.next_fd.wrapping_add(1);
        self.open.insert(
            fd,
            FileDescriptor {
                fd,
                inode,
                offset: 0,
                rights,
                path,
                wrote_special: false,
            },
        );
        Ok(fd)
    }

    pub(crate) fn remove(&mut self, fd: u32) -> Result<FileDescriptor, VfsError> {
        self.open.remove(&fd).ok_or(VfsError::BadDescriptor(fd))
    }
}
