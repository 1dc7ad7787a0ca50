#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(f) = lllsampler::parse_json(text) {
        // anything accepted must survive a round-trip
        let again = lllsampler::parse_json(&lllsampler::to_json(&f)).expect("re-parse");
        assert!(lllsampler::instance::same_instance(&f, &again));
    }
});
