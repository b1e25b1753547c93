//! Assembles the guest sources in `fixtures/` to binaries.
//!
//! The `.wasm` binaries are regenerated into `OUT_DIR` (embedded by
//! `lib.rs`) and mirrored into `fixtures/prebuilt/` so the repository
//! carries inspectable prebuilt copies next to the sources.

use std::path::Path;

fn main() {
    let out_dir = std::env::var("OUT_DIR").unwrap();
    let fixtures = Path::new("fixtures");
    let prebuilt = fixtures.join("prebuilt");
    std::fs::create_dir_all(&prebuilt).unwrap();

    println!("cargo:rerun-if-changed=fixtures");
    for entry in std::fs::read_dir(fixtures).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("wat") {
            continue;
        }
        let name = path.file_stem().unwrap().to_str().unwrap().to_string();
        let wasm = wat::parse_file(&path)
            .unwrap_or_else(|e| panic!("assembling {}: {e}", path.display()));
        std::fs::write(Path::new(&out_dir).join(format!("{name}.wasm")), &wasm).unwrap();
        let committed = prebuilt.join(format!("{name}.wasm"));
        // Avoid dirtying mtimes when the output is unchanged.
        if std::fs::read(&committed).map(|old| old != wasm).unwrap_or(true) {
            std::fs::write(&committed, &wasm).unwrap();
        }
    }
}
