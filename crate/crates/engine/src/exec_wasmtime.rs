//! JIT-backed execution.
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

fn host_err(signal: HostSignal) -> wasmtime::Error {
    wasmtime::Error::new(signal)
}

pub fn run(program: &[u8], host: WasiHost) -> Result<(WasiHost, Termination), EngineError> {
    let mut config = wasmtime::Config::new();
    config.strategy(wasmtime::Strategy::Cranelift);
    let engine = wasmtime::Engine::new(&config)
        .map_err(|e| EngineError::Validation(format!("engine: {e}")))?;
    let module = wasmtime::Module::new(&engine, program)
        .map_err(|e| EngineError::Validation(e.to_string()))?;
    let mut store = wasmtime::Store::new(&engine, host);
    let mut linker = <wasmtime::Linker<WasiHost>>::new(&engine);
    (|| -> Result<(), wasmtime::Error> {
        link_wasi!(linker, wasmtime, host_err);
        Ok(())
    })()
    .map_err(|e| EngineError::Validation(format!("linking: {e}")))?;

    let instance = linker
        .instantiate(&mut store, &module)
        .map_err(|e| EngineError::Validation(format!("instantiation: {e}")))?;
    let start = instance
        .get_typed_func::<(), ()>(&mut store, "_start")
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
