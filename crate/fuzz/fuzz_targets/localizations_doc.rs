#![no_main]
use fieldcal::formats::{parse_doc, LocalizationsFile};
use libfuzzer_sys::fuzz_target;
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_doc::<LocalizationsFile>(Path::new("fuzz"), text);
    }
});
