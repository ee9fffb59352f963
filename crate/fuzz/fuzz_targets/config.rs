#![no_main]

use libfuzzer_sys::fuzz_target;

// Relative model paths resolve against a directory that never exists.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = tapersim::experiments::ExperimentConfig::from_toml_str(text, "/nonexistent");
    }
});
