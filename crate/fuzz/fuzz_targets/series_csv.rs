#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok((t, s)) = decoq::parse_series_csv(s) {
            assert_eq!(t.len(), s.len());
        }
    }
});
