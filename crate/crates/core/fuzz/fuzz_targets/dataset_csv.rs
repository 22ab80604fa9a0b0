//! Dataset CSV reader: arbitrary bytes must give Ok or Err, never a panic.
//! Anything accepted must survive a write/parse cycle unchanged.
#![no_main]

use libfuzzer_sys::fuzz_target;
use mdimpute::io::{parse_dataset_csv, write_dataset_csv, CsvOptions};

fuzz_target!(|data: &[u8]| {
    let opts = CsvOptions::with_na_token("NA");
    if let Ok(d) = parse_dataset_csv(data, &opts) {
        let oracle = d.x_full().is_some();
        let mut buf = Vec::new();
        write_dataset_csv(&d, &mut buf, oracle).unwrap();
        let back = parse_dataset_csv(&buf, &CsvOptions::default()).unwrap();
        assert_eq!(back, d);
    }
});
