//! The lifecycle state machine and the provisioning/result rules, kept
//! independent of the transport so they can be tested exhaustively.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use std::collections::BTreeSet;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use cenote_engine::{execute_full, GuestEnvironment};
use cenote_policy::{policy_digest, Digest32, GlobalPolicy, RightsSet, Role};
use cenote_vfs::{ActorId, CapabilityTable, FileSystem};
use cenote_wire::{ErrorCode, Frame};

use crate::error::ServerError;

/// Where the runtime is in its one-shot life.  Transitions only move
/// forward; any state can fall to `Failed`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LifecycleState {
    Booting,
    Onboarding,
    AwaitingProvisioning,
    ReadyToExecute,
    Executing,
    Finished,
    Failed(String),
}

/// The inputs that must be present before execution starts: the program
/// entry path plus every file-granularity path a data provider may write.
/// Directory-granularity write grants do not name concrete files and so
/// contribute nothing.
pub fn expected_inputs(policy: &GlobalPolicy) -> BTreeSet<String> {
    let mut expected = BTreeSet::new();
    expected.insert(policy.program_entry_path.clone());
    for provider in policy.principals_with_role(Role::DataProvider) {
        for (path, rights) in &provider.file_rights {
            if rights.contains(RightsSet::WRITE) && !path.ends_with('/') {
                expected.insert(path.clone());
            }
        }
    }
    expected
}

struct Shared {
    state: LifecycleState,
    provisioned: BTreeSet<String>,
    served_receivers: BTreeSet<String>,
}

/// Policy enforcement and execution control for one computation.
pub struct Coordinator {
    policy: GlobalPolicy,
    digest: Digest32,
    fs: Arc<Mutex<FileSystem>>,
    expected: BTreeSet<String>,
    receivers: BTreeSet<String>,
    shared: Mutex<Shared>,
    changed: Condvar,
}

impl Coordinator {
    /// Builds the filesystem, capability tables, and native-module registry
    /// for a validated policy.
    pub fn new(policy: GlobalPolicy) -> Result<Coordinator, ServerError> {
        let mut caps = CapabilityTable::new();
        for principal in &policy.principals {
            caps.insert(
                ActorId::Principal(principal.id.clone()),
                principal.file_rights.clone(),
            );
        }
        caps.insert(ActorId::Program, policy.program_rights.clone());

        let mut fs = FileSystem::new(caps);
        for module_id in &policy.native_modules {
            let module = cenote_modules::builtin(module_id)
                .map_err(|e| ServerError::PolicyInvalid(e.to_string()))?;
            cenote_modules::register_module(&mut fs, module)
                .map_err(|e| ServerError::PolicyInvalid(e.to_string()))?;
        }

        let digest = policy_digest(&policy);
        let expected = expected_inputs(&policy);
        let receivers = policy
            .principals_with_role(Role::ResultReceiver)
            .map(|p| p.id.clone())
            .collect();
        Ok(Coordinator {
            policy,
            digest,
            fs: Arc::new(Mutex::new(fs)),
            expected,
            receivers,
            shared: Mutex::new(Shared {
                state: LifecycleState::AwaitingProvisioning,
                provisioned: BTreeSet::new(),
                served_receivers: BTreeSet::new(),
            }),
            changed: Condvar::new(),
        })
    }

    pub fn policy(&self) -> &GlobalPolicy {
        &self.policy
    }

    pub fn state(&self) -> LifecycleState {
        self.shared.lock().unwrap().state.clone()
    }

    pub fn filesystem(&self) -> Arc<Mutex<FileSystem>> {
        Arc::clone(&self.fs)
    }

    /// Answers one frame from an authenticated principal.
    pub fn handle_frame(self: &Arc<Self>, principal_id: &str, frame: Frame) -> Frame {
        let started = Instant::now();
        let reply = self.dispatch(principal_id, frame);
        log::debug!(
            "frame from {principal_id} answered in {:?}",
            started.elapsed()
        );
        reply
    }

    fn dispatch(self: &Arc<Self>, principal_id: &str, frame: Frame) -> Frame {
        let principal = match self.policy.principal(principal_id) {
            Some(principal) => principal,
            None => return Frame::error(ErrorCode::NotPermitted, "unknown principal"),
        };
        match frame {
            Frame::QueryPolicyDigest => Frame::PolicyDigest(*self.digest.as_bytes()),
            Frame::ProvisionProgram { path, data } => {
                if !principal.has_role(Role::ProgramProvider)
                    || path != self.policy.program_entry_path
                {
                    return Frame::error(
                        ErrorCode::NotPermitted,
                        "not the program provider, or wrong program path",
                    );
                }
                self.provision(principal_id, &path, &data)
            }
            Frame::ProvisionData { path, data } => {
                let rights = self
                    .policy
                    .rights_for(principal_id, &path)
                    .unwrap_or_else(|_| RightsSet::empty());
                if !principal.has_role(Role::DataProvider)
                    || !rights.contains(RightsSet::WRITE)
                {
                    return Frame::error(
                        ErrorCode::NotPermitted,
                        "no data-provider write right on this path",
                    );
                }
                self.provision(principal_id, &path, &data)
            }
            Frame::RequestResult { path } => {
                let rights = self
                    .policy
                    .rights_for(principal_id, &path)
                    .unwrap_or_else(|_| RightsSet::empty());
                if !principal.has_role(Role::ResultReceiver)
                    || !rights.contains(RightsSet::READ)
                {
                    return Frame::error(
                        ErrorCode::NotPermitted,
                        "no result-receiver read right on this path",
                    );
                }
                {
                    let shared = self.shared.lock().unwrap();
                    if shared.state != LifecycleState::Finished {
                        return Frame::error(
                            ErrorCode::WrongState,
                            "results are released only after the computation finishes",
                        );
                    }
                }
                match self.fs.lock().unwrap().read_file(&path) {
                    Ok(data) => Frame::ResultOk { data },
                    Err(_) => Frame::error(ErrorCode::NotFound, "no such result file"),
                }
            }
            // Server-to-client frames arriving at the server are protocol
            // violations.
            Frame::Ack | Frame::ResultOk { .. } | Frame::Error { .. } | Frame::PolicyDigest(_) => {
                Frame::error(ErrorCode::MalformedFrame, "unexpected frame direction")
            }
        }
    }

    fn provision(self: &Arc<Self>, principal_id: &str, path: &str, data: &[u8]) -> Frame {
        let started = Instant::now();
        {
            let shared = self.shared.lock().unwrap();
            if shared.state != LifecycleState::AwaitingProvisioning {
                return Frame::error(
                    ErrorCode::WrongState,
                    "provisioning is closed in the current state",
                );
            }
        }
        if let Err(e) = self.fs.lock().unwrap().install(path, data) {
            return Frame::error(ErrorCode::MalformedFrame, e.to_string());
        }
        log::info!(
            "provisioned {path} ({} bytes) from {principal_id} in {:?}",
            data.len(),
            started.elapsed()
        );
        let ready = {
            let mut shared = self.shared.lock().unwrap();
            shared.provisioned.insert(path.to_string());
            let ready = shared.state == LifecycleState::AwaitingProvisioning
                && shared.provisioned.is_superset(&self.expected);
            if ready {
                shared.state = LifecycleState::ReadyToExecute;
            }
            ready
        };
        if ready {
            self.start_execution();
        }
        Frame::Ack
    }

    /// Spawns the execution thread; exactly one per server lifetime.
    fn start_execution(self: &Arc<Self>) {
        let coordinator = Arc::clone(self);
        std::thread::spawn(move || {
            coordinator.set_state(LifecycleState::Executing);
            let started = Instant::now();
            let result = coordinator.run_guest();
            match result {
                Ok(()) => {
                    log::info!("execution finished cleanly in {:?}", started.elapsed());
                    coordinator.set_state(LifecycleState::Finished);
                }
                Err(e) => {
                    log::warn!("execution failed after {:?}: {e}", started.elapsed());
                    coordinator.set_state(LifecycleState::Failed(e.to_string()));
                }
            }
        });
    }

    fn run_guest(&self) -> Result<(), ServerError> {
        let program_bytes = self
            .fs
            .lock()
            .unwrap()
            .read_file(&self.policy.program_entry_path)
            .map_err(|e| ServerError::ExecutionFailed(format!("program missing: {e}")))?;
        let env = GuestEnvironment::from_policy(&self.policy, program_bytes);
        let (outcome, logs) = execute_full(&env, Arc::clone(&self.fs), Default::default())
            .map_err(|e| ServerError::ExecutionFailed(e.to_string()))?;
        if !logs.stdout.is_empty() {
            log::debug!("guest stdout: {}", String::from_utf8_lossy(&logs.stdout));
        }
        if !logs.stderr.is_empty() {
            log::debug!("guest stderr: {}", String::from_utf8_lossy(&logs.stderr));
        }
        log::info!("guest made {} host calls", outcome.host_call_count);
        match (&outcome.trap, outcome.exit_code) {
            (None, 0) => Ok(()),
            (Some(trap), _) => Err(ServerError::ExecutionFailed(format!("guest trap: {trap}"))),
            (None, code) => Err(ServerError::ExecutionFailed(format!(
                "guest exited with code {code}"
            ))),
        }
    }

    fn set_state(&self, state: LifecycleState) {
        let mut shared = self.shared.lock().unwrap();
        shared.state = state;
        self.changed.notify_all();
    }

    /// Records that a result receiver has been served at least one result.
    pub fn note_served(&self, principal_id: &str) {
        let mut shared = self.shared.lock().unwrap();
        shared.served_receivers.insert(principal_id.to_string());
        self.changed.notify_all();
    }

    /// Blocks until execution reached a terminal state; test and shutdown
    /// support.
    pub fn wait_terminal(&self, timeout: Duration) -> LifecycleState {
        let deadline = Instant::now() + timeout;
        let mut shared = self.shared.lock().unwrap();
        loop {
            match &shared.state {
                LifecycleState::Finished | LifecycleState::Failed(_) => {
                    return shared.state.clone()
                }
                _ => {}
            }
            let now = Instant::now();
            if now >= deadline {
                return shared.state.clone();
            }
            let (guard, _) = self
                .changed
                .wait_timeout(shared, deadline - now)
                .unwrap();
            shared = guard;
        }
    }

    /// Blocks until the computation finished and every result receiver has
    /// fetched at least one result (the server's graceful-exit condition),
    /// or until the computation failed.
    pub fn wait_complete(&self) -> Result<(), ServerError> {
        let mut shared = self.shared.lock().unwrap();
        loop {
            match &shared.state {
                LifecycleState::Failed(reason) => {
                    return Err(ServerError::ExecutionFailed(reason.clone()))
                }
                LifecycleState::Finished
                    if shared.served_receivers.is_superset(&self.receivers) =>
                {
                    return Ok(())
                }
                _ => {}
            }
            shared = self.changed.wait(shared).unwrap();
        }
    }
}
