#![no_main]

use libfuzzer_sys::fuzz_target;
use opfix_core::config::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::parse(text) {
        // building validates every range; it must reject, never panic
        if let Ok(exp) = cfg.build() {
            let _ = exp.curves();
        }
    }
});
