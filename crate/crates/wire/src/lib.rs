//! The framed wire protocol spoken inside the attested TLS session.
//!
//! Every message is one frame:
//!
//! ```text
//! length: u32 big-endian  -- byte count of everything after this field
//! type:   u8
//! payload (type-specific)
//! ```
//!
//! Frame types:
//!
//! | type | name              | payload                                      |
//! |------|-------------------|----------------------------------------------|
//! | 0x01 | ProvisionProgram  | path_len u16be, path, data                   |
//! | 0x02 | ProvisionData     | path_len u16be, path, data                   |
//! | 0x03 | RequestResult     | path_len u16be, path                         |
//! | 0x04 | ResultOk          | data                                         |
//! | 0x05 | Error             | code u16be, msg_len u16be, msg (UTF-8)       |
//! | 0x06 | Ack               | empty                                        |
//! | 0x07 | QueryPolicyDigest | empty                                        |
//! | 0x08 | PolicyDigest      | 32 bytes                                     |
//!
//! Frames never exceed 256 MiB.  Decoding is total: any malformed input is
//! reported as [`WireError::Malformed`], never a panic.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use std::io::{Read, Write};

use cenote_policy::validate_file_path;
use thiserror::Error;

/// Upper bound on the length field, and so on any frame payload.
pub const MAX_FRAME_LEN: u32 = 256 * 1024 * 1024;

/// Error codes carried by [`Frame::Error`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCode {
    /// The principal's roles or rights do not permit the request.
    NotPermitted = 1,
    /// The request is not valid in the server's current lifecycle state.
    WrongState = 2,
    NotFound = 3,
    MalformedFrame = 4,
}

impl ErrorCode {
    pub fn from_u16(v: u16) -> Option<ErrorCode> {
        match v {
            1 => Some(ErrorCode::NotPermitted),
            2 => Some(ErrorCode::WrongState),
            3 => Some(ErrorCode::NotFound),
            4 => Some(ErrorCode::MalformedFrame),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("malformed frame: {0}")]
    Malformed(&'static str),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One protocol message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Frame {
    ProvisionProgram { path: String, data: Vec<u8> },
    ProvisionData { path: String, data: Vec<u8> },
    RequestResult { path: String },
    ResultOk { data: Vec<u8> },
    Error { code: ErrorCode, message: String },
    Ack,
    QueryPolicyDigest,
    PolicyDigest([u8; 32]),
}

impl Frame {
    pub fn error(code: ErrorCode, message: impl Into<String>) -> Frame {
        Frame::Error {
            code,
            message: message.into(),
        }
    }

    fn type_byte(&self) -> u8 {
        match self {
            Frame::ProvisionProgram { .. } => 0x01,
            Frame::ProvisionData { .. } => 0x02,
            Frame::RequestResult { .. } => 0x03,
            Frame::ResultOk { .. } => 0x04,
            Frame::Error { .. } => 0x05,
            Frame::Ack => 0x06,
            Frame::QueryPolicyDigest => 0x07,
            Frame::PolicyDigest(_) => 0x08,
        }
    }

    /// Serializes the frame, length prefix included.
    pub fn encode(&self) -> Vec<u8> {
        let mut body = vec![self.type_byte()];
        match self {
            Frame::ProvisionProgram { path, data } | Frame::ProvisionData { path, data } => {
                body.extend_from_slice(&(path.len() as u16).to_be_bytes());
                body.extend_from_slice(path.as_bytes());
                body.extend_from_slice(data);
            }
            Frame::RequestResult { path } => {
                body.extend_from_slice(&(path.len() as u16).to_be_bytes());
                body.extend_from_slice(path.as_bytes());
            }
            Frame::ResultOk { data } => body.extend_from_slice(data),
            Frame::Error { code, message } => {
                body.extend_from_slice(&(*code as u16).to_be_bytes());
                body.extend_from_slice(&(message.len() as u16).to_be_bytes());
                body.extend_from_slice(message.as_bytes());
            }
            Frame::Ack | Frame::QueryPolicyDigest => {}
            Frame::PolicyDigest(digest) => body.extend_from_slice(digest),
        }
        let mut out = Vec::with_capacity(4 + body.len());
        out.extend_from_slice(&(body.len() as u32).to_be_bytes());
        out.extend_from_slice(&body);
        out
    }

    /// Decodes exactly one frame from `bytes`; the input must contain the
    /// frame and nothing else.
    pub fn decode(bytes: &[u8]) -> Result<Frame, WireError> {
        if bytes.len() < 5 {
            return Err(WireError::Malformed("shorter than header"));
        }
        let declared = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
        if declared > MAX_FRAME_LEN {
            return Err(WireError::Malformed("length exceeds maximum"));
        }
        if declared as usize != bytes.len() - 4 {
            return Err(WireError::Malformed("length does not match input"));
        }
        Self::decode_body(&bytes[4..])
    }

    fn decode_body(body: &[u8]) -> Result<Frame, WireError> {
        let (&ty, payload) = body
            .split_first()
            .ok_or(WireError::Malformed("empty body"))?;
        match ty {
            0x01 | 0x02 => {
                let (path, rest) = take_path(payload)?;
                if ty == 0x01 {
                    Ok(Frame::ProvisionProgram {
                        path,
                        data: rest.to_vec(),
                    })
                } else {
                    Ok(Frame::ProvisionData {
                        path,
                        data: rest.to_vec(),
                    })
                }
            }
            0x03 => {
                let (path, rest) = take_path(payload)?;
                if !rest.is_empty() {
                    return Err(WireError::Malformed("trailing bytes after path"));
                }
                Ok(Frame::RequestResult { path })
            }
            0x04 => Ok(Frame::ResultOk {
                data: payload.to_vec(),
            }),
            0x05 => {
                if payload.len() < 4 {
                    return Err(WireError::Malformed("error frame too short"));
                }
                let code = u16::from_be_bytes([payload[0], payload[1]]);
                let code =
                    ErrorCode::from_u16(code).ok_or(WireError::Malformed("unknown error code"))?;
                let msg_len = u16::from_be_bytes([payload[2], payload[3]]) as usize;
                let rest = &payload[4..];
                if rest.len() != msg_len {
                    return Err(WireError::Malformed("message length mismatch"));
                }
                let message = std::str::from_utf8(rest)
                    .map_err(|_| WireError::Malformed("message is not UTF-8"))?
                    .to_string();
                Ok(Frame::Error { code, message })
            }
            0x06 => {
                if !payload.is_empty() {
                    return Err(WireError::Malformed("ack carries payload"));
                }
                Ok(Frame::Ack)
            }
            0x07 => {
                if !payload.is_empty() {
                    return Err(WireError::Malformed("digest query carries payload"));
                }
                Ok(Frame::QueryPolicyDigest)
            }
            0x08 => {
                let digest: [u8; 32] = payload
                    .try_into()
                    .map_err(|_| WireError::Malformed("digest must be 32 bytes"))?;
                Ok(Frame::PolicyDigest(digest))
            }
            _ => Err(WireError::Malformed("unknown frame type")),
        }
    }
}

fn take_path(payload: &[u8]) -> Result<(String, &[u8]), WireError> {
    if payload.len() < 2 {
        return Err(WireError::Malformed("missing path length"));
    }
    let path_len = u16::from_be_bytes([payload[0], payload[1]]) as usize;
    let rest = &payload[2..];
    if rest.len() < path_len {
        return Err(WireError::Malformed("path truncated"));
    }
    let path = std::str::from_utf8(&rest[..path_len])
        .map_err(|_| WireError::Malformed("path is not UTF-8"))?;
    validate_file_path(path).map_err(|_| WireError::Malformed("path is not a normalized file path"))?;
    Ok((path.to_string(), &rest[path_len..]))
}

/// Reads one frame from a stream.  The length prefix is validated against
/// [`MAX_FRAME_LEN`] before any payload allocation.
pub fn read_frame<R: Read>(reader: &mut R) -> Result<Frame, WireError> {
    let mut header = [0u8; 4];
    reader.read_exact(&mut header)?;
    let declared = u32::from_be_bytes(header);
    if declared > MAX_FRAME_LEN {
        return Err(WireError::Malformed("length exceeds maximum"));
    }
    if declared == 0 {
        return Err(WireError::Malformed("empty body"));
    }
    let mut body = vec![0u8; declared as usize];
    reader.read_exact(&mut body)?;
    Frame::decode_body(&body)
}

/// Writes one frame to a stream.
pub fn write_frame<W: Write>(writer: &mut W, frame: &Frame) -> Result<(), WireError> {
    writer.write_all(&frame.encode())?;
    writer.flush()?;
    Ok(())
}
