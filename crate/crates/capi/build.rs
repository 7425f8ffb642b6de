//! Regenerates include/crn_multiscale.h with cbindgen. The header is
//! committed, so consumers that only need it (or builds where header
//! generation fails) keep working; the file is rewritten only when its
//! content changes to keep builds byte-stable.

use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(std::env::var("CARGO_MANIFEST_DIR").expect("set by cargo"));
    let header_path = crate_dir.join("include").join("crn_multiscale.h");
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");

    let config = match cbindgen::Config::from_file(crate_dir.join("cbindgen.toml")) {
        Ok(c) => c,
        Err(e) => {
            println!("cargo:warning=cbindgen config failed ({e}); keeping committed header");
            return;
        }
    };
    match cbindgen::Builder::new().with_crate(&crate_dir).with_config(config).generate() {
        Ok(bindings) => {
            let mut fresh = Vec::new();
            bindings.write(&mut fresh);
            let current = std::fs::read(&header_path).unwrap_or_default();
            if fresh != current {
                std::fs::create_dir_all(header_path.parent().expect("has parent"))
                    .expect("create include dir");
                std::fs::write(&header_path, fresh).expect("write header");
            }
        }
        Err(e) => {
            println!("cargo:warning=cbindgen generation failed ({e}); keeping committed header");
        }
    }
}
