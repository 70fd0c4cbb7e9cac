#![no_main]

use std::path::Path;

use drls::harness::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::parse(text, Path::new("/fuzz")) {
        let back = ExperimentConfig::parse(&cfg.to_text(), Path::new("/")).expect("re-parse of emitted config");
        assert_eq!(back, cfg);
    }
});
