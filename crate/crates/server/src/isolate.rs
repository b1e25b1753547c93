//! Isolate drivers: where the runtime's measurement and native attestation
//! come from.
//!
//! A real deployment would back this with attestation hardware.  The
//! desk-scale driver measures the runtime as the SHA-256 of its own
//! executable file and signs evidence with an enrolled device key, so the
//! proxy's verification obligations stay the same.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use std::path::Path;

use cenote_attestation::{device_attest, AttestationEvidence, DeviceKey};
use cenote_policy::Digest32;

use crate::error::ServerError;

/// The platform half of attestation, as the runtime sees it.
pub trait IsolateDriver: Send + Sync {
    /// The measurement this isolate reports for the running runtime.
    fn measurement(&self) -> Digest32;

    /// Produces platform attestation evidence binding `csr_hash` under the
    /// challenge `nonce`.
    fn attest(&self, csr_hash: [u8; 32], nonce: [u8; 32])
        -> Result<AttestationEvidence, ServerError>;
}

/// SHA-256 of a runtime binary on disk: the measurement a process isolate
/// reports.
pub fn measure_binary(path: &Path) -> std::io::Result<Digest32> {
    let bytes = std::fs::read(path)?;
    Ok(Digest32::of(&bytes))
}

/// The desk-scale isolate: an ordinary measured process holding a device
/// key.
pub struct ProcessIsolate {
    measurement: Digest32,
    device_key: DeviceKey,
}

impl ProcessIsolate {
    pub fn new(measurement: Digest32, device_key: DeviceKey) -> ProcessIsolate {
        ProcessIsolate {
            measurement,
            device_key,
        }
    }

    /// Measures the currently running executable.
    pub fn from_current_exe(device_key: DeviceKey) -> std::io::Result<ProcessIsolate> {
        let exe = std::env::current_exe()?;
        Ok(ProcessIsolate {
            measurement: measure_binary(&exe)?,
            device_key,
        })
    }
}

impl IsolateDriver for ProcessIsolate {
    fn measurement(&self) -> Digest32 {
        self.measurement
    }

    fn attest(
        &self,
        csr_hash: [u8; 32],
        nonce: [u8; 32],
    ) -> Result<AttestationEvidence, ServerError> {
        device_attest(self.measurement.0, csr_hash, nonce, &self.device_key)
            .map_err(|e| ServerError::OnboardFailed(e.to_string()))
    }
}
