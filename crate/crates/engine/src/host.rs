//! The system-interface host: per-execution state and the call
//! implementations, written against a raw view of guest memory so both
//! executors share one dispatch path.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use cenote_policy::RightsSet;
use cenote_vfs::{
    ActorId, DescriptorTable, FileKind, FileSystem, IoVec, IoVecSeq, VfsError, Whence,
};

use crate::env::{ExecutionOutcome, GuestEnvironment, GuestLogs};
use crate::error::EngineError;
use crate::rng::RngState;

pub const ERRNO_SUCCESS: u16 = 0;
pub const ERRNO_BADF: u16 = 8;
pub const ERRNO_EXIST: u16 = 20;
pub const ERRNO_FAULT: u16 = 21;
pub const ERRNO_INVAL: u16 = 28;
pub const ERRNO_ISDIR: u16 = 31;
pub const ERRNO_MFILE: u16 = 33;
pub const ERRNO_NAMETOOLONG: u16 = 37;
pub const ERRNO_NOENT: u16 = 44;
pub const ERRNO_NOSYS: u16 = 52;
pub const ERRNO_NOTSUP: u16 = 58;
pub const ERRNO_NOTCAPABLE: u16 = 76;

const FILETYPE_CHARACTER_DEVICE: u8 = 2;
const FILETYPE_DIRECTORY: u8 = 3;
const FILETYPE_REGULAR_FILE: u8 = 4;

const RIGHT_FD_READ: u64 = 1 << 1;
const RIGHT_FD_SEEK: u64 = 1 << 2;
const RIGHT_FD_TELL: u64 = 1 << 5;
const RIGHT_FD_WRITE: u64 = 1 << 6;
const RIGHT_PATH_OPEN: u64 = 1 << 13;

const OFLAG_CREAT: u32 = 1 << 0;
const OFLAG_DIRECTORY: u32 = 1 << 1;
const OFLAG_EXCL: u32 = 1 << 2;
const OFLAG_TRUNC: u32 = 1 << 3;

const LOG_RING_CAP: usize = 64 * 1024;
const MAX_IOVS: u32 = 1024;

/// Why execution stopped early: a clean exit request or cancellation.
/// Carried through the executor as a host error and unpacked afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HostSignal {
    Exit(u32),
    Cancelled,
}

impl std::fmt::Display for HostSignal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HostSignal::Exit(code) => write!(f, "guest exit with code {code}"),
            HostSignal::Cancelled => write!(f, "execution cancelled"),
        }
    }
}

impl std::error::Error for HostSignal {}

impl wasmi::core::HostError for HostSignal {}

/// How the executor reports the end of a run to [`WasiHost::finish`].
pub enum Termination {
    Exit(u32),
    Trap(String),
}

pub struct WasiHost {
    fs: Arc<Mutex<FileSystem>>,
    table: DescriptorTable,
    preopens: Vec<(u32, String)>,
    rng: RngState,
    cancel: Arc<AtomicBool>,
    pub host_calls: u64,
    stdout: Vec<u8>,
    stderr: Vec<u8>,
}

impl WasiHost {
    /// Prepares the guest's view: installs its capability table, ensures
    /// the preopened directories exist, and opens their handles at
    /// descriptors 3, 4, ...
    pub fn new(
        env: &GuestEnvironment,
        fs: Arc<Mutex<FileSystem>>,
        cancel: Arc<AtomicBool>,
    ) -> Result<WasiHost, EngineError> {
        let mut table = DescriptorTable::new(ActorId::Program);
        let mut preopens = Vec::new();
        {
            let mut fs = fs.lock().unwrap();
            fs.set_rights(ActorId::Program, env.program_rights.clone());
            for dir in &env.preopened_dirs {
                fs.mkdir_all(dir)?;
                let fd = fs.open_directory(&mut table, dir)?;
                preopens.push((fd, dir.clone()));
            }
        }
        Ok(WasiHost {
            fs,
            table,
            preopens,
            rng: RngState::new(env.rng_seed),
            cancel,
            host_calls: 0,
            stdout: Vec::new(),
            stderr: Vec::new(),
        })
    }

    pub fn cancelled(&self) -> bool {
        self.cancel.load(Ordering::Relaxed)
    }

    pub fn finish(self, termination: Termination) -> (ExecutionOutcome, GuestLogs) {
        let (exit_code, trap) = match termination {
            Termination::Exit(code) => (code, None),
            Termination::Trap(message) => (0, Some(message)),
        };
        (
            ExecutionOutcome {
                exit_code,
                trap,
                host_call_count: self.host_calls,
            },
            GuestLogs {
                stdout: self.stdout,
                stderr: self.stderr,
            },
        )
    }

    fn preopen_path(&self, fd: u32) -> Option<&str> {
        self.preopens
            .iter()
            .find(|(pfd, _)| *pfd == fd)
            .map(|(_, path)| path.as_str())
    }

    ////////////////////////////////////////////////////////////////////////
    // The supported calls.  Each returns a system-interface errno.
    ////////////////////////////////////////////////////////////////////////

    pub fn args_sizes_get(&mut self, mem: &mut [u8], argc: u32, argv_buf_size: u32) -> u16 {
        self.host_calls += 1;
        if write_u32(mem, argc, 0).is_err() || write_u32(mem, argv_buf_size, 0).is_err() {
            return ERRNO_FAULT;
        }
        ERRNO_SUCCESS
    }

    pub fn args_get(&mut self, _mem: &mut [u8], _argv: u32, _argv_buf: u32) -> u16 {
        self.host_calls += 1;
        // No arguments are ever passed.
        ERRNO_SUCCESS
    }

    pub fn environ_sizes_get(&mut self, mem: &mut [u8], count: u32, size: u32) -> u16 {
        self.host_calls += 1;
        if write_u32(mem, count, 0).is_err() || write_u32(mem, size, 0).is_err() {
            return ERRNO_FAULT;
        }
        ERRNO_SUCCESS
    }

    pub fn environ_get(&mut self, _mem: &mut [u8], _environ: u32, _buf: u32) -> u16 {
        self.host_calls += 1;
        ERRNO_SUCCESS
    }

    pub fn fd_prestat_get(&mut self, mem: &mut [u8], fd: u32, buf: u32) -> u16 {
        self.host_calls += 1;
        match self.preopen_path(fd) {
            Some(path) => {
                let len = path.len() as u32;
                if write_u8(mem, buf, 0).is_err() || write_u32(mem, buf + 4, len).is_err() {
                    return ERRNO_FAULT;
                }
                ERRNO_SUCCESS
            }
            None => ERRNO_BADF,
        }
    }

    pub fn fd_prestat_dir_name(&mut self, mem: &mut [u8], fd: u32, path: u32, len: u32) -> u16 {
        self.host_calls += 1;
        let name = match self.preopen_path(fd) {
            Some(name) => name.as_bytes().to_vec(),
            None => return ERRNO_BADF,
        };
        if (len as usize) < name.len() {
            return ERRNO_NAMETOOLONG;
        }
        match mem.get_mut(path as usize..path as usize + name.len()) {
            Some(dst) => {
                dst.copy_from_slice(&name);
                ERRNO_SUCCESS
            }
            None => ERRNO_FAULT,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn path_open(
        &mut self,
        mem: &mut [u8],
        dirfd: u32,
        _dirflags: u32,
        path_ptr: u32,
        path_len: u32,
        oflags: u32,
        rights_base: u64,
        _rights_inheriting: u64,
        _fdflags: u32,
        opened_fd: u32,
    ) -> u16 {
        self.host_calls += 1;
        let base = match self.preopen_path(dirfd) {
            Some(base) => base.to_string(),
            None => return ERRNO_BADF,
        };
        let rel = match read_str(mem, path_ptr, path_len) {
            Ok(rel) => rel,
            Err(errno) => return errno,
        };
        if oflags & OFLAG_DIRECTORY != 0 {
            return ERRNO_NOTSUP;
        }
        // Absolute paths and dot-dot components escape the preopen and are
        // capability violations, not lookup failures.
        if rel.starts_with('/') {
            return ERRNO_NOTCAPABLE;
        }
        for component in rel.split('/') {
            if component == ".." {
                return ERRNO_NOTCAPABLE;
            }
            if component.is_empty() || component == "." {
                return ERRNO_INVAL;
            }
        }
        let full = if base == "/" {
            format!("/{rel}")
        } else {
            format!("{base}/{rel}")
        };

        let mut requested = RightsSet::empty();
        if rights_base & RIGHT_FD_READ != 0 {
            requested = requested.union(RightsSet::READ);
        }
        if rights_base & RIGHT_FD_WRITE != 0 {
            requested = requested.union(RightsSet::WRITE);
        }
        if rights_base & RIGHT_FD_SEEK != 0 {
            requested = requested.union(RightsSet::SEEK);
        }
        requested = RightsSet::normalized(requested.union(RightsSet::OPEN));

        let create = oflags & OFLAG_CREAT != 0;
        let truncate = oflags & OFLAG_TRUNC != 0;
        let mut fs = self.fs.lock().unwrap();
        if oflags & OFLAG_EXCL != 0 && fs.exists(&full) {
            return ERRNO_EXIST;
        }
        match fs.open(&mut self.table, &full, create, truncate, requested) {
            Ok(fd) => {
                if write_u32(mem, opened_fd, fd).is_err() {
                    return ERRNO_FAULT;
                }
                ERRNO_SUCCESS
            }
            Err(e) => errno_for(&e),
        }
    }

    pub fn fd_read(
        &mut self,
        mem: &mut [u8],
        fd: u32,
        iovs_ptr: u32,
        iovs_len: u32,
        nread: u32,
    ) -> u16 {
        self.host_calls += 1;
        if fd == 0 {
            // Standard input is always at end-of-file.
            return match write_u32(mem, nread, 0) {
                Ok(()) => ERRNO_SUCCESS,
                Err(errno) => errno,
            };
        }
        if fd <= 2 {
            return ERRNO_BADF;
        }
        let iovs = match parse_iovs(mem, iovs_ptr, iovs_len) {
            Ok(iovs) => iovs,
            Err(errno) => return errno,
        };
        let seq = IoVecSeq::from_slice(&iovs);
        let mut fs = self.fs.lock().unwrap();
        match fs.read(&mut self.table, fd, &seq, mem) {
            Ok(n) => match write_u32(mem, nread, n) {
                Ok(()) => ERRNO_SUCCESS,
                Err(errno) => errno,
            },
            Err(e) => errno_for(&e),
        }
    }

    pub fn fd_write(
        &mut self,
        mem: &mut [u8],
        fd: u32,
        iovs_ptr: u32,
        iovs_len: u32,
        nwritten: u32,
    ) -> u16 {
        self.host_calls += 1;
        let iovs = match parse_iovs(mem, iovs_ptr, iovs_len) {
            Ok(iovs) => iovs,
            Err(errno) => return errno,
        };
        if fd == 1 || fd == 2 {
            let seq = IoVecSeq::from_slice(&iovs);
            if seq.check_bounds(mem.len()).is_err() {
                return ERRNO_FAULT;
            }
            let mut total: u32 = 0;
            for iov in &iovs {
                let chunk = &mem[iov.offset as usize..(iov.offset + iov.len) as usize];
                let ring = if fd == 1 { &mut self.stdout } else { &mut self.stderr };
                let room = LOG_RING_CAP.saturating_sub(ring.len());
                ring.extend_from_slice(&chunk[..chunk.len().min(room)]);
                total += iov.len;
            }
            return match write_u32(mem, nwritten, total) {
                Ok(()) => ERRNO_SUCCESS,
                Err(errno) => errno,
            };
        }
        if fd == 0 {
            return ERRNO_BADF;
        }
        let seq = IoVecSeq::from_slice(&iovs);
        let mut fs = self.fs.lock().unwrap();
        match fs.write(&mut self.table, fd, &seq, mem) {
            Ok(n) => match write_u32(mem, nwritten, n) {
                Ok(()) => ERRNO_SUCCESS,
                Err(errno) => errno,
            },
            Err(e) => errno_for(&e),
        }
    }

    pub fn fd_seek(
        &mut self,
        mem: &mut [u8],
        fd: u32,
        offset: i64,
        whence: u32,
        newoffset: u32,
    ) -> u16 {
        self.host_calls += 1;
        if fd <= 2 {
            return ERRNO_BADF;
        }
        let whence = match whence {
            0 => Whence::Set,
            1 => Whence::Cur,
            2 => Whence::End,
            _ => return ERRNO_INVAL,
        };
        let mut fs = self.fs.lock().unwrap();
        match fs.seek(&mut self.table, fd, offset, whence) {
            Ok(position) => match write_u64(mem, newoffset, position) {
                Ok(()) => ERRNO_SUCCESS,
                Err(errno) => errno,
            },
            Err(e) => errno_for(&e),
        }
    }

    pub fn fd_close(&mut self, fd: u32) -> u16 {
        self.host_calls += 1;
        if fd <= 2 {
            // Closing a stdio stream is accepted and ignored.
            return ERRNO_SUCCESS;
        }
        let mut fs = self.fs.lock().unwrap();
        match fs.close(&mut self.table, fd) {
            Ok(()) => ERRNO_SUCCESS,
            Err(e) => errno_for(&e),
        }
    }

    pub fn fd_fdstat_get(&mut self, mem: &mut [u8], fd: u32, buf: u32) -> u16 {
        self.host_calls += 1;
        let (filetype, rights) = if fd == 0 {
            (FILETYPE_CHARACTER_DEVICE, RIGHT_FD_READ)
        } else if fd <= 2 {
            (FILETYPE_CHARACTER_DEVICE, RIGHT_FD_WRITE)
        } else {
            let fs = self.fs.lock().unwrap();
            let (kind, _) = match fs.filestat(&self.table, fd) {
                Ok(stat) => stat,
                Err(e) => return errno_for(&e),
            };
            let desc = match self.table.get(fd) {
                Ok(desc) => desc,
                Err(e) => return errno_for(&e),
            };
            let mut rights = 0u64;
            if desc.rights.contains(RightsSet::READ) {
                rights |= RIGHT_FD_READ | RIGHT_FD_TELL;
            }
            if desc.rights.contains(RightsSet::WRITE) {
                rights |= RIGHT_FD_WRITE;
            }
            if desc.rights.contains(RightsSet::SEEK) {
                rights |= RIGHT_FD_SEEK | RIGHT_FD_TELL;
            }
            let filetype = match kind {
                FileKind::RegularFile => FILETYPE_REGULAR_FILE,
                FileKind::Directory => {
                    rights |= RIGHT_PATH_OPEN;
                    FILETYPE_DIRECTORY
                }
                FileKind::SpecialFile => FILETYPE_CHARACTER_DEVICE,
            };
            (filetype, rights)
        };
        // fdstat: filetype u8 @0, flags u16 @2, rights_base u64 @8,
        // rights_inheriting u64 @16.
        if write_u8(mem, buf, filetype).is_err()
            || write_u16(mem, buf + 2, 0).is_err()
            || write_u64(mem, buf + 8, rights).is_err()
            || write_u64(mem, buf + 16, 0).is_err()
        {
            return ERRNO_FAULT;
        }
        ERRNO_SUCCESS
    }

    pub fn fd_filestat_get(&mut self, mem: &mut [u8], fd: u32, buf: u32) -> u16 {
        self.host_calls += 1;
        let (filetype, inode, size) = if fd <= 2 {
            (FILETYPE_CHARACTER_DEVICE, fd as u64, 0)
        } else {
            let fs = self.fs.lock().unwrap();
            let (kind, size) = match fs.filestat(&self.table, fd) {
                Ok(stat) => stat,
                Err(e) => return errno_for(&e),
            };
            let inode = self.table.get(fd).map(|d| d.inode).unwrap_or(0);
            let filetype = match kind {
                FileKind::RegularFile => FILETYPE_REGULAR_FILE,
                FileKind::Directory => FILETYPE_DIRECTORY,
                FileKind::SpecialFile => FILETYPE_CHARACTER_DEVICE,
            };
            (filetype, inode, size)
        };
        // filestat: dev u64 @0, ino u64 @8, filetype u8 @16, nlink u64 @24,
        // size u64 @32, atim/mtim/ctim u64 @40/48/56.
        if write_u64(mem, buf, 0).is_err()
            || write_u64(mem, buf + 8, inode).is_err()
            || write_u8(mem, buf + 16, filetype).is_err()
            || write_u64(mem, buf + 24, 1).is_err()
            || write_u64(mem, buf + 32, size).is_err()
            || write_u64(mem, buf + 40, 0).is_err()
            || write_u64(mem, buf + 48, 0).is_err()
            || write_u64(mem, buf + 56, 0).is_err()
        {
            return ERRNO_FAULT;
        }
        ERRNO_SUCCESS
    }

    pub fn random_get(&mut self, mem: &mut [u8], buf: u32, buf_len: u32) -> u16 {
        self.host_calls += 1;
        let dst = match mem.get_mut(buf as usize..(buf as usize).saturating_add(buf_len as usize))
        {
            Some(dst) => dst,
            None => return ERRNO_FAULT,
        };
        match self.rng.fill(dst) {
            Ok(()) => ERRNO_SUCCESS,
            Err(_) => ERRNO_INVAL,
        }
    }
}

fn errno_for(e: &VfsError) -> u16 {
    match e {
        VfsError::AccessDenied(_) => ERRNO_NOTCAPABLE,
        VfsError::NotFound(_) => ERRNO_NOENT,
        VfsError::IsDirectory(_) => ERRNO_ISDIR,
        VfsError::TooManyDescriptors => ERRNO_MFILE,
        VfsError::BadDescriptor(_) => ERRNO_BADF,
        VfsError::OutOfBoundsIoVec => ERRNO_FAULT,
        VfsError::NegativeOffset => ERRNO_INVAL,
        VfsError::PathExists(_) => ERRNO_EXIST,
        VfsError::InvalidPath(_) => ERRNO_INVAL,
    }
}

fn parse_iovs(mem: &[u8], iovs_ptr: u32, iovs_len: u32) -> Result<Vec<IoVec>, u16> {
    if iovs_len > MAX_IOVS {
        return Err(ERRNO_INVAL);
    }
    let mut iovs = Vec::with_capacity(iovs_len as usize);
    for i in 0..iovs_len {
        let at = iovs_ptr as usize + (i as usize) * 8;
        let entry = mem.get(at..at + 8).ok_or(ERRNO_FAULT)?;
        let buf = u32::from_le_bytes(entry[0..4].try_into().unwrap());
        let len = u32::from_le_bytes(entry[4..8].try_into().unwrap());
        iovs.push(IoVec::new(buf, len));
    }
    Ok(iovs)
}

fn read_str(mem: &[u8], ptr: u32, len: u32) -> Result<String, u16> {
    let bytes = mem
        .get(ptr as usize..(ptr as usize).saturating_add(len as usize))
        .ok_or(ERRNO_FAULT)?;
    std::str::from_utf8(bytes)
        .map(|s| s.to_string())
        .map_err(|_| ERRNO_INVAL)
}

fn write_u8(mem: &mut [u8], at: u32, value: u8) -> Result<(), u16> {
    *mem.get_mut(at as usize).ok_or(ERRNO_FAULT)? = value;
    Ok(())
}

fn write_u16(mem: &mut [u8], at: u32, value: u16) -> Result<(), u16> {
    let dst = mem
        .get_mut(at as usize..at as usize + 2)
        .ok_or(ERRNO_FAULT)?;
    dst.copy_from_slice(&value.to_le_bytes());
    Ok(())
}

fn write_u32(mem: &mut [u8], at: u32, value: u32) -> Result<(), u16> {
    let dst = mem
        .get_mut(at as usize..at as usize + 4)
        .ok_or(ERRNO_FAULT)?;
    dst.copy_from_slice(&value.to_le_bytes());
    Ok(())
}

fn write_u64(mem: &mut [u8], at: u32, value: u64) -> Result<(), u16> {
    let dst = mem
        .get_mut(at as usize..at as usize + 8)
        .ok_or(ERRNO_FAULT)?;
    dst.copy_from_slice(&value.to_le_bytes());
    Ok(())
}

/// One supported call: fetches guest memory, splits the borrow, checks the
/// cancellation flag, and forwards to the matching [`WasiHost`] method.
/// `$w` is the executor crate (`wasmi` or `wasmtime`, which expose the same
/// linker shape); `$host_err` converts a [`HostSignal`] into that
/// executor's host-error type.
macro_rules! wasi_call {
    ($linker:expr, $w:ident, $host_err:expr, $name:literal,
     |$host:ident, $mem:ident $(, $arg:ident : $ty:ty)*| $body:expr) => {
        $linker.func_wrap(
            "wasi_snapshot_preview1",
            $name,
            |mut caller: $w::Caller<'_, WasiHost>, $($arg: $ty),*| -> Result<i32, $w::Error> {
                let memory = match caller.get_export("memory").and_then(|e| e.into_memory()) {
                    Some(memory) => memory,
                    None => return Ok($crate::host::ERRNO_FAULT as i32),
                };
                let ($mem, $host) = memory.data_and_store_mut(&mut caller);
                if $host.cancelled() {
                    return Err(($host_err)(HostSignal::Cancelled));
                }
                Ok($body as i32)
            },
        )?;
    };
}

/// One unsupported call: linked so the guest can name it, always answering
/// "function not supported".
macro_rules! nosys_stub {
    ($linker:expr, $w:ident, $host_err:expr, $name:literal, ($($ty:ty),*)) => {
        $linker.func_wrap(
            "wasi_snapshot_preview1",
            $name,
            |mut caller: $w::Caller<'_, WasiHost>, $(_: $ty),*| -> Result<i32, $w::Error> {
                let host = caller.data_mut();
                if host.cancelled() {
                    return Err(($host_err)(HostSignal::Cancelled));
                }
                host.host_calls += 1;
                Ok($crate::host::ERRNO_NOSYS as i32)
            },
        )?;
    };
}

/// Registers the full `wasi_snapshot_preview1` import surface in a linker:
/// the fifteen supported calls plus "not supported" stubs for the rest.
macro_rules! link_wasi {
    ($linker:expr, $w:ident, $host_err:expr) => {{
        use $crate::host::{wasi_call, nosys_stub, HostSignal, WasiHost};

        wasi_call!($linker, $w, $host_err, "args_sizes_get", |host, mem, argc: i32, size: i32| {
            host.args_sizes_get(mem, argc as u32, size as u32)
        });
        wasi_call!($linker, $w, $host_err, "args_get", |host, mem, argv: i32, buf: i32| {
            host.args_get(mem, argv as u32, buf as u32)
        });
        wasi_call!($linker, $w, $host_err, "environ_sizes_get", |host, mem, count: i32, size: i32| {
            host.environ_sizes_get(mem, count as u32, size as u32)
        });
        wasi_call!($linker, $w, $host_err, "environ_get", |host, mem, environ: i32, buf: i32| {
            host.environ_get(mem, environ as u32, buf as u32)
        });
        wasi_call!($linker, $w, $host_err, "fd_prestat_get", |host, mem, fd: i32, buf: i32| {
            host.fd_prestat_get(mem, fd as u32, buf as u32)
        });
        wasi_call!($linker, $w, $host_err, "fd_prestat_dir_name", |host, mem, fd: i32, path: i32, len: i32| {
            host.fd_prestat_dir_name(mem, fd as u32, path as u32, len as u32)
        });
        wasi_call!($linker, $w, $host_err, "path_open",
            |host, mem, dirfd: i32, dirflags: i32, path: i32, path_len: i32, oflags: i32,
             rights_base: i64, rights_inheriting: i64, fdflags: i32, opened: i32| {
            host.path_open(
                mem,
                dirfd as u32,
                dirflags as u32,
                path as u32,
                path_len as u32,
                oflags as u32,
                rights_base as u64,
                rights_inheriting as u64,
                fdflags as u32,
                opened as u32,
            )
        });
        wasi_call!($linker, $w, $host_err, "fd_read", |host, mem, fd: i32, iovs: i32, iovs_len: i32, nread: i32| {
            host.fd_read(mem, fd as u32, iovs as u32, iovs_len as u32, nread as u32)
        });
        wasi_call!($linker, $w, $host_err, "fd_write", |host, mem, fd: i32, iovs: i32, iovs_len: i32, nwritten: i32| {
            host.fd_write(mem, fd as u32, iovs as u32, iovs_len as u32, nwritten as u32)
        });
        wasi_call!($linker, $w, $host_err, "fd_seek", |host, mem, fd: i32, offset: i64, whence: i32, newoffset: i32| {
            host.fd_seek(mem, fd as u32, offset, whence as u32, newoffset as u32)
        });
        wasi_call!($linker, $w, $host_err, "fd_fdstat_get", |host, mem, fd: i32, buf: i32| {
            host.fd_fdstat_get(mem, fd as u32, buf as u32)
        });
        wasi_call!($linker, $w, $host_err, "fd_filestat_get", |host, mem, fd: i32, buf: i32| {
            host.fd_filestat_get(mem, fd as u32, buf as u32)
        });
        wasi_call!($linker, $w, $host_err, "random_get", |host, mem, buf: i32, len: i32| {
            host.random_get(mem, buf as u32, len as u32)
        });

        // fd_close touches no guest memory.
        $linker.func_wrap(
            "wasi_snapshot_preview1",
            "fd_close",
            |mut caller: $w::Caller<'_, WasiHost>, fd: i32| -> Result<i32, $w::Error> {
                let host = caller.data_mut();
                if host.cancelled() {
                    return Err(($host_err)(HostSignal::Cancelled));
                }
                Ok(host.fd_close(fd as u32) as i32)
            },
        )?;

        $linker.func_wrap(
            "wasi_snapshot_preview1",
            "proc_exit",
            |mut caller: $w::Caller<'_, WasiHost>, code: i32| -> Result<(), $w::Error> {
                caller.data_mut().host_calls += 1;
                Err(($host_err)(HostSignal::Exit(code as u32)))
            },
        )?;

        // Everything else in the namespace exists but is unsupported.
        nosys_stub!($linker, $w, $host_err, "clock_res_get", (i32, i32));
        nosys_stub!($linker, $w, $host_err, "clock_time_get", (i32, i64, i32));
        nosys_stub!($linker, $w, $host_err, "fd_advise", (i32, i64, i64, i32));
        nosys_stub!($linker, $w, $host_err, "fd_allocate", (i32, i64, i64));
        nosys_stub!($linker, $w, $host_err, "fd_datasync", (i32));
        nosys_stub!($linker, $w, $host_err, "fd_fdstat_set_flags", (i32, i32));
        nosys_stub!($linker, $w, $host_err, "fd_fdstat_set_rights", (i32, i64, i64));
        nosys_stub!($linker, $w, $host_err, "fd_filestat_set_size", (i32, i64));
        nosys_stub!($linker, $w, $host_err, "fd_filestat_set_times", (i32, i64, i64, i32));
        nosys_stub!($linker, $w, $host_err, "fd_pread", (i32, i32, i32, i64, i32));
        nosys_stub!($linker, $w, $host_err, "fd_pwrite", (i32, i32, i32, i64, i32));
        nosys_stub!($linker, $w, $host_err, "fd_readdir", (i32, i32, i32, i64, i32));
        nosys_stub!($linker, $w, $host_err, "fd_renumber", (i32, i32));
        nosys_stub!($linker, $w, $host_err, "fd_sync", (i32));
        nosys_stub!($linker, $w, $host_err, "fd_tell", (i32, i32));
        nosys_stub!($linker, $w, $host_err, "path_create_directory", (i32, i32, i32));
        nosys_stub!($linker, $w, $host_err, "path_filestat_get", (i32, i32, i32, i32, i32));
        nosys_stub!($linker, $w, $host_err, "path_filestat_set_times", (i32, i32, i32, i32, i64, i64, i32));
        nosys_stub!($linker, $w, $host_err, "path_link", (i32, i32, i32, i32, i32, i32, i32));
        nosys_stub!($linker, $w, $host_err, "path_readlink", (i32, i32, i32, i32, i32, i32));
        nosys_stub!($linker, $w, $host_err, "path_remove_directory", (i32, i32, i32));
        nosys_stub!($linker, $w, $host_err, "path_rename", (i32, i32, i32, i32, i32, i32));
        nosys_stub!($linker, $w, $host_err, "path_symlink", (i32, i32, i32, i32, i32));
        nosys_stub!($linker, $w, $host_err, "poll_oneoff", (i32, i32, i32, i32));
        nosys_stub!($linker, $w, $host_err, "proc_raise", (i32));
        nosys_stub!($linker, $w, $host_err, "sched_yield", ());
        nosys_stub!($linker, $w, $host_err, "sock_accept", (i32, i32, i32));
        nosys_stub!($linker, $w, $host_err, "sock_recv", (i32, i32, i32, i32, i32, i32));
        nosys_stub!($linker, $w, $host_err, "sock_send", (i32, i32, i32, i32, i32));
        nosys_stub!($linker, $w, $host_err, "sock_shutdown", (i32, i32));
    }};
}

pub(crate) use {link_wasi, nosys_stub, wasi_call};
