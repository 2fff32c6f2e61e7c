fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("manifest dir");
    let config = cbindgen::Config {
        language: cbindgen::Language::C,
        include_guard: Some("SIMHMIMO_H".to_string()),
        cpp_compat: true,
        documentation: true,
        header: Some(
            "/* C interface of the stacked-metasurface holographic MIMO simulator. */".to_string(),
        ),
        ..Default::default()
    };
    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("header generation")
        .write_to_file(std::path::Path::new(&crate_dir).join("include/simhmimo.h"));
    println!("cargo:rerun-if-changed=src/lib.rs");
}
