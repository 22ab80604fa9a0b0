#![no_main]

use libfuzzer_sys::fuzz_target;
use mdimpute::io::parse_scenario_json;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(params) = parse_scenario_json(text) {
        // validated params never panic the oracle; degenerate ones are errors
        let _ = mdimpute::theory_quantities(&params);
    }
});
