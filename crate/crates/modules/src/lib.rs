//! Native modules: host-implemented accelerators the guest invokes through
//! ordinary file operations on designated special paths.
//!
//! A module owns two paths.  The guest writes a request to the request path;
//! closing the written descriptor delimits the request and runs the handler;
//! reading the response path yields the handler's output from offset zero.
//! Handler failures leave a zero-byte response and an error record at
//! `<response_path>.err`.
//!
//! Handlers are compiled in; the policy's `native_modules` key lists which
//! built-ins a computation enables.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use cenote_vfs::{FileSystem, Handler, VfsError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModuleError {
    #[error("unknown native module {0:?}")]
    UnknownModule(String),
    #[error("module paths must differ")]
    PathConflict,
    #[error(transparent)]
    Vfs(#[from] VfsError),
}

/// A host accelerator: an identifier, its two special paths, and the pure
/// handler function.
pub struct NativeModule {
    pub id: String,
    pub request_path: String,
    pub response_path: String,
    pub handler: Handler,
}

/// Registers `module` in the filesystem: both paths become special-file
/// inodes bound to the handler.  Fails if either path already exists.
pub fn register_module(fs: &mut FileSystem, module: NativeModule) -> Result<(), ModuleError> {
    if module.request_path == module.response_path {
        return Err(ModuleError::PathConflict);
    }
    fs.register_special(&module.request_path, &module.id)?;
    fs.register_special(&module.response_path, &module.id)?;
    fs.bind_module(&module.id, &module.response_path, module.handler)?;
    Ok(())
}

/// Looks up a built-in module by its policy identifier.
pub fn builtin(id: &str) -> Result<NativeModule, ModuleError> {
    match id {
        "intcodec" => Ok(intcodec()),
        other => Err(ModuleError::UnknownModule(other.to_string())),
    }
}

/// The reference codec module: decimal integers, one per line, encoded to a
/// count-prefixed little-endian 64-bit binary vector.
pub fn intcodec() -> NativeModule {
    NativeModule {
        id: "intcodec".to_string(),
        request_path: "/modules/intcodec/in".to_string(),
        response_path: "/modules/intcodec/out".to_string(),
        handler: Box::new(|request| {
            let values = parse_int_lines(request)?;
            Ok(encode_i64_vector(&values))
        }),
    }
}

/// Parses the intcodec request format: one decimal (optionally signed)
/// 64-bit integer per `\n`-terminated line; an empty request is an empty
/// list.
pub fn parse_int_lines(request: &[u8]) -> Result<Vec<i64>, String> {
    let text = std::str::from_utf8(request).map_err(|e| format!("request not UTF-8: {e}"))?;
    let mut values = Vec::new();
    for (index, line) in text.split('\n').enumerate() {
        if line.is_empty() {
            continue;
        }
        let value: i64 = line
            .parse()
            .map_err(|e| format!("line {}: {e}", index + 1))?;
        values.push(value);
    }
    Ok(values)
}

/// The intcodec response format: `u64le(count)` then each value `i64le`.
pub fn encode_i64_vector(values: &[i64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + values.len() * 8);
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for value in values {
        out.extend_from_slice(&value.to_le_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use cenote_policy::RightsSet;
    use cenote_vfs::{ActorId, CapabilityTable, DescriptorTable, IoVecSeq};

    fn run_intcodec(request: &[u8]) -> (Vec<u8>, Vec<u8>) {
        let actor = ActorId::Program;
        let mut caps = CapabilityTable::new();
        caps.insert(
            actor.clone(),
            [("/modules/intcodec/".to_string(), RightsSet::all())].into(),
        );
        let mut fs = FileSystem::new(caps);
        register_module(&mut fs, intcodec()).unwrap();

        let mut dt = DescriptorTable::new(actor);
        let fd = fs
            .open(&mut dt, "/modules/intcodec/in", false, false, RightsSet::write())
            .unwrap();
        fs.write(&mut dt, fd, &IoVecSeq::single(0, request.len() as u32), request)
            .unwrap();
        fs.close(&mut dt, fd).unwrap();

        let fd = fs
            .open(&mut dt, "/modules/intcodec/out", false, false, RightsSet::read())
            .unwrap();
        let mut mem = vec![0u8; 4096];
        let n = fs
            .read(&mut dt, fd, &IoVecSeq::single(0, 4096), &mut mem)
            .unwrap();
        fs.close(&mut dt, fd).unwrap();
        let response = mem[..n as usize].to_vec();
        let err = fs.read_file("/modules/intcodec/out.err").unwrap_or_default();
        (response, err)
    }

    #[test]
    fn encodes_three_integers() {
        let (response, err) = run_intcodec(b"1\n2\n3\n");
        // Independently constructed expected bytes: count then values,
        // little endian.
        let mut expected = Vec::new();
        expected.extend_from_slice(&[3, 0, 0, 0, 0, 0, 0, 0]);
        expected.extend_from_slice(&[1, 0, 0, 0, 0, 0, 0, 0]);
        expected.extend_from_slice(&[2, 0, 0, 0, 0, 0, 0, 0]);
        expected.extend_from_slice(&[3, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(response.len(), 32);
        assert_eq!(response, expected);
        assert!(err.is_empty());
    }

    #[test]
    fn empty_request_is_an_empty_list() {
        let (response, err) = run_intcodec(b"");
        assert_eq!(response, vec![0u8; 8]);
        assert!(err.is_empty());
    }

    #[test]
    fn negative_values_encode_two_complement() {
        let (response, _) = run_intcodec(b"-1\n");
        let mut expected = vec![1, 0, 0, 0, 0, 0, 0, 0];
        expected.extend_from_slice(&[0xFF; 8]);
        assert_eq!(response, expected);
    }

    #[test]
    fn parse_failure_yields_empty_response_and_error_record() {
        let (response, err) = run_intcodec(b"xyz\n");
        assert!(response.is_empty());
        assert!(!err.is_empty());
    }

    #[test]
    fn handler_is_deterministic() {
        let (a, _) = run_intcodec(b"5\n-7\n900\n");
        let (b, _) = run_intcodec(b"5\n-7\n900\n");
        assert_eq!(a, b);
    }

    #[test]
    fn error_record_resets_after_a_good_request() {
        let actor = ActorId::Program;
        let mut caps = CapabilityTable::new();
        caps.insert(
            actor.clone(),
            [("/modules/intcodec/".to_string(), RightsSet::all())].into(),
        );
        let mut fs = FileSystem::new(caps);
        register_module(&mut fs, intcodec()).unwrap();
        let mut dt = DescriptorTable::new(actor);

        for (request, expect_err) in [(&b"bogus\n"[..], true), (&b"1\n"[..], false)] {
            let fd = fs
                .open(&mut dt, "/modules/intcodec/in", false, false, RightsSet::write())
                .unwrap();
            fs.write(&mut dt, fd, &IoVecSeq::single(0, request.len() as u32), request)
                .unwrap();
            fs.close(&mut dt, fd).unwrap();
            let err = fs.read_file("/modules/intcodec/out.err").unwrap();
            assert_eq!(!err.is_empty(), expect_err);
        }
    }

    #[test]
    fn duplicate_registration_is_rejected() {
        let mut fs = FileSystem::new(CapabilityTable::new());
        register_module(&mut fs, intcodec()).unwrap();
        let err = register_module(&mut fs, intcodec()).unwrap_err();
        assert!(matches!(err, ModuleError::Vfs(VfsError::PathExists(_))));
    }

    #[test]
    fn unknown_builtin() {
        assert!(matches!(
            builtin("no-such-module"),
            Err(ModuleError::UnknownModule(_))
        ));
        assert!(builtin("intcodec").is_ok());
    }
}
