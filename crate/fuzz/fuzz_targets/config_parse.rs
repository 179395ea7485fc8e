#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = spreadlab_cli::parse_config(text) else {
        return;
    };
    let _ = spreadlab_cli::validate(&cfg);
    // whatever parses must serialize to something that parses again
    let again = serde_json::to_string(&cfg).expect("config serializes");
    spreadlab_cli::parse_config(&again).expect("serialized config parses");
});
