#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(config) = mcf_cli::parse_config(text) {
            let again = mcf_cli::parse_config(&config.render()).expect("rendered config parses");
            assert_eq!(again, config);
        }
    }
});
