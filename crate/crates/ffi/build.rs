use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").expect("set by cargo"));
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    let config = cbindgen::Config::from_file(crate_dir.join("cbindgen.toml")).unwrap_or_default();
    match cbindgen::Builder::new().with_config(config).with_src(crate_dir.join("src/lib.rs")).generate() {
        Ok(bindings) => {
            bindings.write_to_file(crate_dir.join("include/diffevo.h"));
        }
        Err(e) => println!("cargo:warning=header generation failed: {e}"),
    }
}
