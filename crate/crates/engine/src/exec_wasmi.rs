//! Interpreter-backed execution.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

use crate::error::EngineError;
use crate::host::{link_wasi, HostSignal, Termination, WasiHost};

fn host_err(signal: HostSignal) -> wasmi::Error {
    wasmi::Error::host(signal)
}

pub fn run(program: &[u8], host: WasiHost) -> Result<(WasiHost, Termination), EngineError> {
    let engine = wasmi::Engine::default();
    let module = wasmi::Module::new(&engine, program)
        .map_err(|e| EngineError::Validation(e.to_string()))?;
    let mut store = wasmi::Store::new(&engine, host);
    let mut linker = <wasmi::Linker<WasiHost>>::new(&engine);
    (|| -> Result<(), wasmi::Error> {
        link_wasi!(linker, wasmi, host_err);
        Ok(())
    })()
    .map_err(|e| EngineError::Validation(format!("linking: {e}")))?;

    let instance = linker
        .instantiate(&mut store, &module)
        .and_then(|pre| pre.start(&mut store))
        .map_err(|e| EngineError::Validation(format!("instantiation: {e}")))?;
    let start = instance
        .get_typed_func::<(), ()>(&store, "_start")
        .map_err(|_| EngineError::MissingEntry)?;

    let termination = match start.call(&mut store, ()) {
        Ok(()) => Termination::Exit(0),
        Err(e) => match e.downcast_ref::<HostSignal>() {
            Some(HostSignal::Exit(code)) => Termination::Exit(*code),
            Some(HostSignal::Cancelled) => Termination::Trap("execution cancelled".into()),
            None => Termination::Trap(e.to_string()),
        },
    };
    Ok((store.into_data(), termination))
}
