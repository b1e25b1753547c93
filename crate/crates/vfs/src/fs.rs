//! The filesystem proper: inode table, capability checks, scatter-gather
//! read/write, and the special-file hook.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use std::collections::{BTreeMap, HashMap};

use cenote_policy::{longest_prefix_rights, validate_file_path, RightsSet};

use crate::error::VfsError;
use crate::iovec::IoVecSeq;
use crate::table::{ActorId, DescriptorTable};

/// Inode number of the root directory; always present.
pub const ROOT_INODE: u64 = 0;

/// A host-side handler backing a special file: a pure function from request
/// bytes to response bytes.
pub type Handler = Box<dyn Fn(&[u8]) -> Result<Vec<u8>, String> + Send>;

/// Per-actor capability tables, keyed by actor and then by path prefix.
pub type CapabilityTable = HashMap<ActorId, BTreeMap<String, RightsSet>>;

/// What kind of object an inode holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileKind {
    RegularFile,
    Directory,
    SpecialFile,
}

enum InodeKind {
    Regular(Vec<u8>),
    Directory(HashMap<String, u64>),
    Special { module: String },
}

struct Inode {
    kind: InodeKind,
}

struct ModuleState {
    handler: Handler,
    request: Vec<u8>,
    response: Vec<u8>,
    /// Where handler failures are reported: `<response_path>.err`.
    error_path: String,
}

/// Instrumentation counters, cheap enough to keep on unconditionally.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    /// Bytes moved between caller memory and file storage by `read`/`write`.
    /// Because the data path performs a single copy, this equals the sum of
    /// the byte counts those calls returned.
    pub guest_copy_bytes: u64,
    /// File-data buffer growths (capacity changes) on the write path.
    pub data_reallocs: u64,
}

/// One entry in the audit log; records every open attempt.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditEvent {
    pub actor: ActorId,
    pub path: String,
    pub requested: RightsSet,
    pub allowed: bool,
}

/// The shared filesystem state.  Concurrent users wrap it in a mutex and
/// interleave at operation granularity; no operation blocks while holding
/// the lock.
pub struct FileSystem {
    inodes: HashMap<u64, Inode>,
    next_inode: u64,
    caps: CapabilityTable,
    modules: HashMap<String, ModuleState>,
    counters: Counters,
    audit: Vec<AuditEvent>,
}

impl FileSystem {
    /// An empty filesystem holding only the root directory.
    pub fn new(caps: CapabilityTable) -> Self {
        let mut inodes = HashMap::new();
        inodes.insert(
            ROOT_INODE,
            Inode {
                kind: InodeKind::Directory(HashMap::new()),
            },
        );
        FileSystem {
            inodes,
            next_inode: 1,
            caps,
            modules: HashMap::new(),
            counters: Counters::default(),
            audit: Vec::new(),
        }
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn audit(&self) -> &[AuditEvent] {
        &self.audit
    }

    /// Installs or replaces one actor's capability table.
    pub fn set_rights(&mut self, actor: ActorId, table: BTreeMap<String, RightsSet>) {
        self.caps.insert(actor, table);
    }

    /// Rights `actor` holds on `path` under this filesystem's capability
    /// table; empty when the actor is unknown.
    pub fn rights_of(&self, actor: &ActorId, path: &str) -> RightsSet {
        self.caps
            .get(actor)
            .map(|table| longest_prefix_rights(table, path))
            .unwrap_or_else(RightsSet::empty)
    }

    ////////////////////////////////////////////////////////////////////////
    // Capability-checked operations.
    ////////////////////////////////////////////////////////////////////////

    /// Opens `path` for `dt`'s actor.  The descriptor's rights are exactly
    /// the requested set, which must be covered by the actor's grant.  With
    /// `create`, a missing file is created if `WRITE` was granted, but
    /// intermediate directories never are.  With `truncate`, existing
    /// contents are discarded if `WRITE` was granted.
    pub fn open(
        &mut self,
        dt: &mut DescriptorTable,
        path: &str,
        create: bool,
        truncate: bool,
        requested: RightsSet,
    ) -> Result<u32, VfsError> {
        validate_file_path(path).map_err(VfsError::InvalidPath)?;
        // Descriptors always carry well-formed rights sets.
        let requested = RightsSet::normalized(requested);
        let granted = self.rights_of(dt.actor(), path);
        let allowed = granted.contains(requested);
        self.audit.push(AuditEvent {
            actor: dt.actor().clone(),
            path: path.to_string(),
            requested,
            allowed,
        });
        if !allowed {
            return Err(VfsError::AccessDenied(path.to_string()));
        }

        let inode_no = match self.resolve(path) {
            Some(no) => {
                match &mut self.inodes.get_mut(&no).expect("resolved inode exists").kind {
                    InodeKind::Directory(_) => return Err(VfsError::IsDirectory(path.into())),
                    InodeKind::Regular(data) => {
                        if truncate && requested.contains(RightsSet::WRITE) {
                            data.clear();
                        }
                    }
                    InodeKind::Special { .. } => {}
                }
                no
            }
            None => {
                if !(create && requested.contains(RightsSet::WRITE)) {
                    return Err(VfsError::NotFound(path.to_string()));
                }
                let (parent_path, name) = split_parent(path);
                let parent_no = self
                    .resolve(&parent_path)
                    .ok_or_else(|| VfsError::NotFound(path.to_string()))?;
                let no = self.alloc_inode(InodeKind::Regular(Vec::new()));
                match &mut self.inodes.get_mut(&parent_no).unwrap().kind {
                    InodeKind::Directory(entries) => {
                        entries.insert(name, no);
                    }
                    _ => return Err(VfsError::NotFound(path.to_string())),
                }
                no
            }
        };

        dt.insert(inode_no, requested, path.to_string())
    }

    /// Scatter-reads from the descriptor's cursor into `dest` buffers,
    /// copying each byte exactly once.  Returns the byte count, zero at end
    /// of file.  Reading a special file returns its pending response.
    pub fn read(
        &mut self,
        dt: &mut DescriptorTable,
        fd: u32,
        iov: &IoVecSeq,
        dest: &mut [u8],
    ) -> Result<u32, VfsError> {
        iov.check_bounds(dest.len())?;
        let desc = dt.get_mut(fd)?;
        if !desc.rights.contains(RightsSet::READ) {
            return Err(VfsError::AccessDenied(desc.path.clone()));
        }
        let inode = self
            .inodes
            .get(&desc.inode)
            .ok_or(VfsError::BadDescriptor(fd))?;
        let data: &[u8] = match &inode.kind {
            InodeKind::Regular(data) => data,
            InodeKind::Directory(_) => return Err(VfsError::IsDirectory(desc.path.clone())),
            InodeKind::Special { module } => {
                &self
                    .modules
                    .get(module)
                    .ok_or_else(|| VfsError::NotFound(desc.path.clone()))?
                    .response
            }
        };

        let start = (desc.offset as usize).min(data.len());
        let mut cursor = start;
        for buf in iov.iter() {
            if cursor == data.len() {
                break;
            }
            let n = (buf.len as usize).min(data.len() - cursor);
            let dst = &mut dest[buf.offset as usize..buf.offset as usize + n];
            dst.copy_from_slice(&data[cursor..cursor + n]);
            cursor += n;
        }
        let read = (cursor - start) as u32;
        desc.offset += read as u64;
        self.counters.guest_copy_bytes += read as u64;
        Ok(read)
    }

    /// Gather-writes `src` buffers at the descriptor's cursor, copying each
    /// byte exactly once directly into file storage.  Writing past the end
    /// extends the file; a cursor beyond the end zero-fills the gap.
    /// Writing to a special file accumulates the module's request instead.
    pub fn write(
        &mut self,
        dt: &mut DescriptorTable,
        fd: u32,
        iov: &IoVecSeq,
        src: &[u8],
    ) -> Result<u32, VfsError> {
        iov.check_bounds(src.len())?;
        let desc = dt.get_mut(fd)?;
        if !desc.rights.contains(RightsSet::WRITE) {
            return Err(VfsError::AccessDenied(desc.path.clone()));
        }
        let total = iov.total_len();
        let inode = self
            .inodes
            .get_mut(&desc.inode)
            .ok_or(VfsError::BadDescriptor(fd))?;

        let written = match &mut inode.kind {
            InodeKind::Directory(_) => return Err(VfsError::IsDirectory(desc.path.clone())),
            InodeKind::Regular(data) => {
                let end = desc
                    .offset
                    .checked_add(total)
                    .ok_or(VfsError::OutOfBoundsIoVec)? as usize;
                let capacity_before = data.capacity();
                // A zero-byte write never extends the file, even with the
                // cursor past the end.
                if total > 0 && data.len() < end {
                    data.resize(end, 0);
                }
                if data.capacity() != capacity_before {
                    self.counters.data_reallocs += 1;
                }
                let mut cursor = desc.offset as usize;
                for buf in iov.iter() {
                    let chunk = &src[buf.offset as usize..(buf.offset + buf.len) as usize];
                    data[cursor..cursor + chunk.len()].copy_from_slice(chunk);
                    cursor += chunk.len();
                }
                total as u32
            }
            InodeKind::Special { module } => {
                let state = self
                    .modules
                    .get_mut(module)
                    .ok_or_else(|| VfsError::NotFound(desc.path.clone()))?;
                for buf in iov.iter() {
                    let chunk = &src[buf.offset as usize..(buf.offset + buf.len) as usize];
                    state.request.extend_from_slice(chunk);
                }
                desc.wrote_special = true;
                total as u32
            }
        };

        desc.offset += written as u64;
        self.counters.guest_copy_bytes += written as u64;
        Ok(written)
    }

    /// Moves the descriptor's cursor.  Seeking past the end is allowed; the
    /// gap is zero-filled by a later write.
    pub fn seek(
        &mut self,
        dt: &mut DescriptorTable,
        fd: u32,
        delta: i64,
        whence: Whence,
    ) -> Result<u64, VfsError> {
        let size = {
            let desc = dt.get(fd)?;
            if !desc.rights.contains(RightsSet::SEEK) {
                return Err(VfsError::AccessDenied(desc.path.clone()));
            }
            self.inode_size(desc.inode, &desc.path)?
        };
        let desc = dt.get_mut(fd)?;
        let base = match whence {
            Whence::Set => 0,
            Whence::Cur => desc.offset as i128,
            Whence::End => size as i128,
        };
        let target = base + delta as i128;
        if target < 0 {
            return Err(VfsError::NegativeOffset);
        }
        desc.offset = target as u64;
        Ok(desc.offset)
    }

    /// Closes a descriptor.  The inode and its data persist.  If the
    /// descriptor wrote to a special file, the accumulated request is
    /// complete: the module handler runs and its response replaces any
    /// pending one.  Handler failure leaves a zero-byte response and writes
    /// the failure to the module's `.err` side-channel file.
    pub fn close(&mut self, dt: &mut DescriptorTable, fd: u32) -> Result<(), VfsError> {
        let desc = dt.remove(fd)?;
        if !desc.wrote_special {
            return Ok(());
        }
        let module = match &self.inodes.get(&desc.inode).map(|i| &i.kind) {
            Some(InodeKind::Special { module }) => module.clone(),
            _ => return Ok(()),
        };
        let (result, error_path) = {
            let state = match self.modules.get_mut(&module) {
                Some(state) => state,
                None => return Ok(()),
            };
            let request = std::mem::take(&mut state.request);
            ((state.handler)(&request), state.error_path.clone())
        };
        match result {
            Ok(response) => {
                self.modules.get_mut(&module).unwrap().response = response;
                self.install(&error_path, &[])?;
            }
            Err(message) => {
                self.modules.get_mut(&module).unwrap().response = Vec::new();
                self.install(&error_path, message.as_bytes())?;
            }
        }
        Ok(())
    }

    /// Kind and size of the object behind a descriptor.
    pub fn filestat(&self, dt: &DescriptorTable, fd: u32) -> Result<(FileKind, u64), VfsError> {
        let desc = dt.get(fd)?;
        let inode = self
            .inodes
            .get(&desc.inode)
            .ok_or(VfsError::BadDescriptor(fd))?;
        Ok(self.stat_inode(inode))
    }

    /// Path-based variant of [`FileSystem::filestat`].
    pub fn path_filestat(&self, path: &str) -> Result<(FileKind, u64), VfsError> {
        let no = self
            .resolve(path)
            .ok_or_else(|| VfsError::NotFound(path.to_string()))?;
        Ok(self.stat_inode(&self.inodes[&no]))
    }

    /// Opens a directory handle, used by the engine to seed guest preopens.
    /// Regular opens refuse directories, so this is a separate entry point.
    pub fn open_directory(
        &mut self,
        dt: &mut DescriptorTable,
        path: &str,
    ) -> Result<u32, VfsError> {
        let no = self
            .resolve(path)
            .ok_or_else(|| VfsError::NotFound(path.to_string()))?;
        match self.inodes[&no].kind {
            InodeKind::Directory(_) => dt.insert(no, RightsSet::OPEN, path.to_string()),
            _ => Err(VfsError::InvalidPath(format!("{path} is not a directory"))),
        }
    }

    ////////////////////////////////////////////////////////////////////////
    // Host-side operations (provisioning, result release, registration).
    //
    // These bypass the capability table: callers are the runtime itself,
    // which performs its own policy checks first.
    ////////////////////////////////////////////////////////////////////////

    /// Creates or replaces a regular file, creating intermediate directories
    /// as needed.  Provisioning is append/replace-only, so this is the only
    /// mutation principals can cause.
    pub fn install(&mut self, path: &str, bytes: &[u8]) -> Result<(), VfsError> {
        validate_file_path(path).map_err(VfsError::InvalidPath)?;
        let (parent_path, name) = split_parent(path);
        let parent_no = self.mkdir_all(&parent_path)?;
        let existing = match &self.inodes[&parent_no].kind {
            InodeKind::Directory(entries) => entries.get(&name).copied(),
            _ => unreachable!("mkdir_all returns a directory"),
        };
        match existing {
            Some(no) => match &mut self.inodes.get_mut(&no).unwrap().kind {
                InodeKind::Regular(data) => {
                    data.clear();
                    data.extend_from_slice(bytes);
                }
                InodeKind::Directory(_) => return Err(VfsError::IsDirectory(path.into())),
                InodeKind::Special { .. } => {
                    return Err(VfsError::InvalidPath(format!(
                        "{path} is a special file and cannot be provisioned"
                    )))
                }
            },
            None => {
                let no = self.alloc_inode(InodeKind::Regular(bytes.to_vec()));
                match &mut self.inodes.get_mut(&parent_no).unwrap().kind {
                    InodeKind::Directory(entries) => {
                        entries.insert(name, no);
                    }
                    _ => unreachable!(),
                }
            }
        }
        Ok(())
    }

    /// Reads a whole regular file.
    pub fn read_file(&self, path: &str) -> Result<Vec<u8>, VfsError> {
        let no = self
            .resolve(path)
            .ok_or_else(|| VfsError::NotFound(path.to_string()))?;
        match &self.inodes[&no].kind {
            InodeKind::Regular(data) => Ok(data.clone()),
            InodeKind::Directory(_) => Err(VfsError::IsDirectory(path.into())),
            InodeKind::Special { .. } => Err(VfsError::InvalidPath(format!(
                "{path} is a special file"
            ))),
        }
    }

    /// Ensures `path` exists as a directory chain; returns its inode.
    pub fn mkdir_all(&mut self, path: &str) -> Result<u64, VfsError> {
        if path == "/" {
            return Ok(ROOT_INODE);
        }
        if !path.starts_with('/') {
            return Err(VfsError::InvalidPath(path.to_string()));
        }
        let mut current = ROOT_INODE;
        for component in path.trim_matches('/').split('/') {
            if component.is_empty() || component == "." || component == ".." {
                return Err(VfsError::InvalidPath(path.to_string()));
            }
            let next = match &self.inodes[&current].kind {
                InodeKind::Directory(entries) => entries.get(component).copied(),
                _ => return Err(VfsError::InvalidPath(format!("{path}: not a directory"))),
            };
            current = match next {
                Some(no) => match self.inodes[&no].kind {
                    InodeKind::Directory(_) => no,
                    _ => {
                        return Err(VfsError::InvalidPath(format!(
                            "{path}: component {component} is not a directory"
                        )))
                    }
                },
                None => {
                    let no = self.alloc_inode(InodeKind::Directory(HashMap::new()));
                    match &mut self.inodes.get_mut(&current).unwrap().kind {
                        InodeKind::Directory(entries) => {
                            entries.insert(component.to_string(), no);
                        }
                        _ => unreachable!(),
                    }
                    no
                }
            };
        }
        Ok(current)
    }

    /// Creates a special-file inode bound to `module` at `path`.
    pub fn register_special(&mut self, path: &str, module: &str) -> Result<(), VfsError> {
        validate_file_path(path).map_err(VfsError::InvalidPath)?;
        if self.resolve(path).is_some() {
            return Err(VfsError::PathExists(path.to_string()));
        }
        let (parent_path, name) = split_parent(path);
        let parent_no = self.mkdir_all(&parent_path)?;
        let no = self.alloc_inode(InodeKind::Special {
            module: module.to_string(),
        });
        match &mut self.inodes.get_mut(&parent_no).unwrap().kind {
            InodeKind::Directory(entries) => {
                entries.insert(name, no);
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    /// Attaches the handler for a registered module.  `response_path` only
    /// determines where the `.err` side-channel file lives.
    pub fn bind_module(
        &mut self,
        module: &str,
        response_path: &str,
        handler: Handler,
    ) -> Result<(), VfsError> {
        self.modules.insert(
            module.to_string(),
            ModuleState {
                handler,
                request: Vec::new(),
                response: Vec::new(),
                error_path: format!("{response_path}.err"),
            },
        );
        Ok(())
    }

    /// Whether `path` exists at all.
    pub fn exists(&self, path: &str) -> bool {
        self.resolve(path).is_some()
    }

    /// Walks every directory entry and checks the inode-table invariants:
    /// the root exists, entries point at live inodes, and parent chains
    /// terminate (no cycles).  Test support.
    pub fn check_integrity(&self) -> Result<(), String> {
        if !self.inodes.contains_key(&ROOT_INODE) {
            return Err("root inode missing".into());
        }
        let mut visited = std::collections::HashSet::new();
        let mut stack = vec![ROOT_INODE];
        while let Some(no) = stack.pop() {
            if !visited.insert(no) {
                return Err(format!("inode {no} reachable twice: cycle or hard link"));
            }
            if let InodeKind::Directory(entries) = &self.inodes[&no].kind {
                for (name, target) in entries {
                    if name.is_empty() || name.contains('/') {
                        return Err(format!("bad entry name {name:?}"));
                    }
                    if !self.inodes.contains_key(target) {
                        return Err(format!("entry {name:?} points at missing inode {target}"));
                    }
                    stack.push(*target);
                }
            }
        }
        Ok(())
    }

    ////////////////////////////////////////////////////////////////////////
    // Internals.
    ////////////////////////////////////////////////////////////////////////

    fn stat_inode(&self, inode: &Inode) -> (FileKind, u64) {
        match &inode.kind {
            InodeKind::Regular(data) => (FileKind::RegularFile, data.len() as u64),
            InodeKind::Directory(_) => (FileKind::Directory, 0),
            InodeKind::Special { module } => {
                let size = self
                    .modules
                    .get(module)
                    .map(|m| m.response.len() as u64)
                    .unwrap_or(0);
                (FileKind::SpecialFile, size)
            }
        }
    }

    fn inode_size(&self, no: u64, path: &str) -> Result<u64, VfsError> {
        match &self.inodes.get(&no).ok_or(VfsError::NotFound(path.into()))?.kind {
            InodeKind::Regular(data) => Ok(data.len() as u64),
            InodeKind::Special { module } => Ok(self
                .modules
                .get(module)
                .map(|m| m.response.len() as u64)
                .unwrap_or(0)),
            InodeKind::Directory(_) => Err(VfsError::IsDirectory(path.into())),
        }
    }

    fn alloc_inode(&mut self, kind: InodeKind) -> u64 {
        let no = self.next_inode;
        self.next_inode += 1;
        self.inodes.insert(no, Inode { kind });
        no
    }

    fn resolve(&self, path: &str) -> Option<u64> {
        if path == "/" {
            return Some(ROOT_INODE);
        }
        let mut current = ROOT_INODE;
        for component in path.strip_prefix('/')?.split('/') {
            if component.is_empty() {
                return None;
            }
            match &self.inodes.get(&current)?.kind {
                InodeKind::Directory(entries) => current = *entries.get(component)?,
                _ => return None,
            }
        }
        Some(current)
    }
}

/// How a seek interprets its offset.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Whence {
    Set,
    Cur,
    End,
}

fn split_parent(path: &str) -> (String, String) {
    match path.rfind('/') {
        Some(0) => ("/".to_string(), path[1..].to_string()),
        Some(i) => (path[..i].to_string(), path[i + 1..].to_string()),
        None => ("/".to_string(), path.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iovec::IoVec;

    fn fs_with(actor: ActorId, rights: &[(&str, RightsSet)]) -> FileSystem {
        let mut caps = CapabilityTable::new();
        caps.insert(
            actor,
            rights.iter().map(|(p, r)| (p.to_string(), *r)).collect(),
        );
        FileSystem::new(caps)
    }

    fn reader_writer() -> (FileSystem, DescriptorTable) {
        let actor = ActorId::Principal("p".into());
        let fs = fs_with(
            actor.clone(),
            &[("/input/", RightsSet::all()), ("/output/", RightsSet::all())],
        );
        (fs, DescriptorTable::new(actor))
    }

    #[test]
    fn open_read_existing_file() {
        let (mut fs, mut dt) = reader_writer();
        fs.install("/input/a", b"abc").unwrap();
        let fd = fs.open(&mut dt, "/input/a", false, false, RightsSet::read()).unwrap();
        assert!(fd >= crate::table::FIRST_FD);
        let mut mem = [0u8; 8];
        let n = fs.read(&mut dt, fd, &IoVecSeq::single(0, 8), &mut mem).unwrap();
        assert_eq!(n, 3);
        assert_eq!(&mem[..3], b"abc");
    }

    #[test]
    fn open_without_right_is_denied() {
        let actor = ActorId::Principal("p".into());
        let mut fs = fs_with(actor.clone(), &[("/input/", RightsSet::read())]);
        fs.install("/input/a", b"abc").unwrap();
        let mut dt = DescriptorTable::new(actor);
        let err = fs
            .open(&mut dt, "/input/a", false, false, RightsSet::write())
            .unwrap_err();
        assert!(matches!(err, VfsError::AccessDenied(_)));
        // The denied attempt is in the audit log.
        assert!(fs.audit().iter().any(|e| !e.allowed));
    }

    #[test]
    fn create_missing_file() {
        let (mut fs, mut dt) = reader_writer();
        fs.mkdir_all("/output").unwrap();
        let fd = fs.open(&mut dt, "/output/r", true, false, RightsSet::write()).unwrap();
        assert_eq!(fs.filestat(&dt, fd).unwrap(), (FileKind::RegularFile, 0));
    }

    #[test]
    fn create_does_not_make_intermediate_directories() {
        let (mut fs, mut dt) = reader_writer();
        let err = fs
            .open(&mut dt, "/output/deep/r", true, false, RightsSet::write())
            .unwrap_err();
        assert!(matches!(err, VfsError::NotFound(_)));
    }

    #[test]
    fn gather_write_preserves_order() {
        let (mut fs, mut dt) = reader_writer();
        fs.mkdir_all("/output").unwrap();
        let fd = fs.open(&mut dt, "/output/f", true, false, RightsSet::all()).unwrap();
        let mem = b"abcdef";
        let iov = IoVecSeq::from_slice(&[IoVec::new(0, 2), IoVec::new(2, 4)]);
        let n = fs.write(&mut dt, fd, &iov, mem).unwrap();
        assert_eq!(n, 6);
        assert_eq!(fs.read_file("/output/f").unwrap(), b"abcdef");
    }

    #[test]
    fn scatter_read_fills_buffers_in_order() {
        let (mut fs, mut dt) = reader_writer();
        fs.install("/input/f", b"abcde").unwrap();
        let fd = fs.open(&mut dt, "/input/f", false, false, RightsSet::read()).unwrap();
        let mut mem = [0u8; 6];
        let iov = IoVecSeq::from_slice(&[IoVec::new(0, 2), IoVec::new(2, 4)]);
        let n = fs.read(&mut dt, fd, &iov, &mut mem).unwrap();
        assert_eq!(n, 5);
        assert_eq!(&mem[..2], b"ab");
        assert_eq!(&mem[2..5], b"cde");
        // At end of file a further read returns zero.
        assert_eq!(fs.read(&mut dt, fd, &iov, &mut mem).unwrap(), 0);
    }

    #[test]
    fn seek_rules() {
        let (mut fs, mut dt) = reader_writer();
        fs.install("/input/f", &[7u8; 64]).unwrap();
        let fd = fs
            .open(&mut dt, "/input/f", false, false, RightsSet::normalized(
                RightsSet::READ.union(RightsSet::SEEK),
            ))
            .unwrap();
        assert_eq!(fs.seek(&mut dt, fd, 0, Whence::Set).unwrap(), 0);
        assert_eq!(fs.seek(&mut dt, fd, -5, Whence::End).unwrap(), 59);
        assert_eq!(
            fs.seek(&mut dt, fd, -60, Whence::Cur).unwrap_err(),
            VfsError::NegativeOffset
        );
        // Past the end is fine.
        assert_eq!(fs.seek(&mut dt, fd, 100, Whence::End).unwrap(), 164);
    }

    #[test]
    fn seek_requires_the_seek_right() {
        let (mut fs, mut dt) = reader_writer();
        fs.install("/input/f", b"xyz").unwrap();
        let fd = fs.open(&mut dt, "/input/f", false, false, RightsSet::read()).unwrap();
        assert!(matches!(
            fs.seek(&mut dt, fd, 0, Whence::Set),
            Err(VfsError::AccessDenied(_))
        ));
    }

    #[test]
    fn sparse_write_zero_fills() {
        let (mut fs, mut dt) = reader_writer();
        fs.mkdir_all("/output").unwrap();
        let fd = fs.open(&mut dt, "/output/s", true, false, RightsSet::all()).unwrap();
        fs.seek(&mut dt, fd, 4, Whence::Set).unwrap();
        fs.write(&mut dt, fd, &IoVecSeq::single(0, 2), b"hi").unwrap();
        assert_eq!(fs.read_file("/output/s").unwrap(), vec![0, 0, 0, 0, b'h', b'i']);
    }

    #[test]
    fn close_invalidates_the_descriptor_only() {
        let (mut fs, mut dt) = reader_writer();
        fs.install("/input/f", b"persist").unwrap();
        let fd = fs.open(&mut dt, "/input/f", false, false, RightsSet::read()).unwrap();
        fs.close(&mut dt, fd).unwrap();
        let mut mem = [0u8; 4];
        assert_eq!(
            fs.read(&mut dt, fd, &IoVecSeq::single(0, 4), &mut mem),
            Err(VfsError::BadDescriptor(fd))
        );
        assert_eq!(fs.close(&mut dt, fd), Err(VfsError::BadDescriptor(fd)));
        assert_eq!(fs.read_file("/input/f").unwrap(), b"persist");
    }

    #[test]
    fn filestat_tracks_growth() {
        let (mut fs, mut dt) = reader_writer();
        fs.mkdir_all("/output").unwrap();
        let fd = fs.open(&mut dt, "/output/g", true, false, RightsSet::all()).unwrap();
        assert_eq!(fs.filestat(&dt, fd).unwrap(), (FileKind::RegularFile, 0));
        fs.write(&mut dt, fd, &IoVecSeq::single(0, 6), b"sixsix").unwrap();
        assert_eq!(fs.filestat(&dt, fd).unwrap(), (FileKind::RegularFile, 6));
        assert_eq!(fs.path_filestat("/").unwrap().0, FileKind::Directory);
    }

    #[test]
    fn descriptor_limit() {
        let actor = ActorId::Principal("p".into());
        let mut fs = fs_with(actor.clone(), &[("/input/", RightsSet::all())]);
        fs.install("/input/f", b"x").unwrap();
        let mut dt = DescriptorTable::with_limit(actor, 2);
        fs.open(&mut dt, "/input/f", false, false, RightsSet::read()).unwrap();
        fs.open(&mut dt, "/input/f", false, false, RightsSet::read()).unwrap();
        assert_eq!(
            fs.open(&mut dt, "/input/f", false, false, RightsSet::read()),
            Err(VfsError::TooManyDescriptors)
        );
    }

    #[test]
    fn copy_counter_equals_bytes_moved() {
        let (mut fs, mut dt) = reader_writer();
        fs.mkdir_all("/output").unwrap();
        let fd = fs.open(&mut dt, "/output/c", true, false, RightsSet::all()).unwrap();
        let payload = vec![9u8; 1000];
        fs.write(&mut dt, fd, &IoVecSeq::single(0, 1000), &payload).unwrap();
        fs.seek(&mut dt, fd, 0, Whence::Set).unwrap();
        let mut out = vec![0u8; 1000];
        let n = fs.read(&mut dt, fd, &IoVecSeq::single(0, 1000), &mut out).unwrap();
        assert_eq!(n, 1000);
        assert_eq!(fs.counters().guest_copy_bytes, 2000);
    }

    #[test]
    fn large_offset_write_extends_file() {
        // A 16 KiB write at the tail of a 64 MiB region, mirrored against a
        // plain byte-vector model.
        let (mut fs, mut dt) = reader_writer();
        fs.mkdir_all("/output").unwrap();
        let fd = fs.open(&mut dt, "/output/big", true, false, RightsSet::all()).unwrap();
        let offset: u64 = 67_108_860;
        fs.seek(&mut dt, fd, offset as i64, Whence::Set).unwrap();
        let block = vec![0xA5u8; 16_384];
        let n = fs.write(&mut dt, fd, &IoVecSeq::single(0, 16_384), &block).unwrap();
        assert_eq!(n, 16_384);

        let mut shadow = vec![0u8; offset as usize];
        shadow.extend_from_slice(&block);
        assert_eq!(shadow.len(), 67_125_244);
        let data = fs.read_file("/output/big").unwrap();
        assert_eq!(data.len(), shadow.len());
        assert_eq!(data, shadow);
    }

    #[test]
    fn install_rejects_directories_and_replaces_files() {
        let (mut fs, _) = reader_writer();
        fs.mkdir_all("/input/sub").unwrap();
        assert!(matches!(
            fs.install("/input/sub", b"no"),
            Err(VfsError::IsDirectory(_))
        ));
        fs.install("/input/f", b"one").unwrap();
        fs.install("/input/f", b"two").unwrap();
        assert_eq!(fs.read_file("/input/f").unwrap(), b"two");
        fs.check_integrity().unwrap();
    }

    #[test]
    fn special_file_round_trip() {
        let actor = ActorId::Program;
        let mut fs = fs_with(actor.clone(), &[("/modules/echo/", RightsSet::all())]);
        fs.register_special("/modules/echo/in", "echo").unwrap();
        fs.register_special("/modules/echo/out", "echo").unwrap();
        fs.bind_module(
            "echo",
            "/modules/echo/out",
            Box::new(|req| Ok(req.iter().rev().copied().collect())),
        )
        .unwrap();

        let mut dt = DescriptorTable::new(actor);
        let fd = fs.open(&mut dt, "/modules/echo/in", false, false, RightsSet::write()).unwrap();
        fs.write(&mut dt, fd, &IoVecSeq::single(0, 3), b"abc").unwrap();
        fs.close(&mut dt, fd).unwrap();

        let fd = fs.open(&mut dt, "/modules/echo/out", false, false, RightsSet::read()).unwrap();
        let mut mem = [0u8; 8];
        let n = fs.read(&mut dt, fd, &IoVecSeq::single(0, 8), &mut mem).unwrap();
        assert_eq!(&mem[..n as usize], b"cba");

        // Stat reports the special kind.
        assert_eq!(fs.path_filestat("/modules/echo/in").unwrap().0, FileKind::SpecialFile);
        // Error file exists and is empty after a successful request.
        assert_eq!(fs.read_file("/modules/echo/out.err").unwrap(), b"");
    }

    #[test]
    fn special_registration_conflicts() {
        let (mut fs, _) = reader_writer();
        fs.register_special("/modules/m/in", "m").unwrap();
        assert_eq!(
            fs.register_special("/modules/m/in", "m"),
            Err(VfsError::PathExists("/modules/m/in".into()))
        );
    }
}
