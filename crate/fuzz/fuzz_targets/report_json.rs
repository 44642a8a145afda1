#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(report) = decoq::parse_report(s) {
            // Whatever parses must serialize again and re-parse.
            let text = decoq::report::to_json(&report);
            decoq::parse_report(&text).expect("serialized report re-parses");
        }
    }
});
