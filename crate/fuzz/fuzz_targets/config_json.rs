#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(cfg) = decoq::parse_config(s) {
            // Accepted configs must hash and expand their sweep without panicking.
            let _ = cfg.model_hash();
            let _ = cfg.sweep_models();
        }
    }
});
