//! Prebuilt guest programs used as fixtures by the execution and protocol
//! tests.  Sources live in `fixtures/*.wat`; the build script assembles them
//! and the binaries are embedded here.
//!
//! ## Authors
//!
//! The Cenote Development Team.
//!
//! ## Licensing and copyright notice
//!
//! See the `LICENSE.md` file in the Cenote root directory for information on
//! licensing and copyright.

macro_rules! guest {
    ($name:ident, $file:literal) => {
        pub const $name: &[u8] = include_bytes!(concat!(env!("OUT_DIR"), "/", $file, ".wasm"));
    };
}

guest!(WORD_COUNT, "word_count");
guest!(COPY_PAIR, "copy_pair");
guest!(INTCODEC_PURE, "intcodec_pure");
guest!(INTCODEC_NATIVE, "intcodec_native");
guest!(SECRET_PROBE, "secret_probe");
guest!(RANDOM_DUMP, "random_dump");
guest!(NOSYS_PROBE, "nosys_probe");
guest!(LOG_WRITER, "log_writer");
guest!(TRAP_CRASH, "trap_crash");
guest!(EXIT_7, "exit_7");

/// Every fixture, by name.
pub fn all() -> Vec<(&'static str, &'static [u8])> {
    vec![
        ("word_count", WORD_COUNT),
        ("copy_pair", COPY_PAIR),
        ("intcodec_pure", INTCODEC_PURE),
        ("intcodec_native", INTCODEC_NATIVE),
        ("secret_probe", SECRET_PROBE),
        ("random_dump", RANDOM_DUMP),
        ("nosys_probe", NOSYS_PROBE),
        ("log_writer", LOG_WRITER),
        ("trap_crash", TRAP_CRASH),
        ("exit_7", EXIT_7),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixtures_look_like_wasm() {
        for (name, bytes) in super::all() {
            assert!(bytes.len() > 8, "{name} is empty");
            assert_eq!(&bytes[..4], b"\0asm", "{name} lacks the magic");
        }
    }
}
