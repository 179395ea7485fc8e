//! Replays the checked-in fuzz seeds through the same calls the fuzz targets make.

use std::path::Path;

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let text = String::from_utf8_lossy(&std::fs::read(&p).unwrap()).into_owned();
            (p.file_name().unwrap().to_string_lossy().into_owned(), text)
        })
        .collect();
    out.sort();
    out
}

#[test]
fn config_seeds() {
    let all = seeds("config_parse");
    assert!(all.len() >= 10);
    let mut parsed = 0;
    for (name, text) in &all {
        if let Ok(cfg) = spreadlab_cli::parse_config(text) {
            parsed += 1;
            let _ = spreadlab_cli::validate(&cfg);
            let again = serde_json::to_string(&cfg).unwrap();
            assert!(spreadlab_cli::parse_config(&again).is_ok(), "{name}");
        }
    }
    assert!(parsed >= 8);
}

#[test]
fn sweep_seeds() {
    let all = seeds("sweep_parse");
    assert!(all.iter().any(|(_, t)| spreadlab_cli::parse_sweep(t).is_ok()));
    for (_, text) in &all {
        if let Ok(cfgs) = spreadlab_cli::parse_sweep(text) {
            for c in &cfgs {
                let _ = spreadlab_cli::validate(c);
            }
        }
    }
}
