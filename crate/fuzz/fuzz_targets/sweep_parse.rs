#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfgs) = spreadlab_cli::parse_sweep(text) {
            for c in &cfgs {
                let _ = spreadlab_cli::validate(c);
            }
        }
    }
});
