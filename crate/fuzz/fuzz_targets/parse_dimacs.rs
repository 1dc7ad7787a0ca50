#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(f) = lllsampler::parse_dimacs(text) {
        if let Some(out) = lllsampler::to_dimacs(&f) {
            let again = lllsampler::parse_dimacs(&out).expect("re-parse");
            assert!(lllsampler::instance::same_instance(&f, &again));
        }
    }
});
