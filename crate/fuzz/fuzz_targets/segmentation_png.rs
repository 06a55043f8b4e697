#![no_main]
use fieldcal::formats::decode_segmentation_png;
use libfuzzer_sys::fuzz_target;
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    let _ = decode_segmentation_png(Path::new("fuzz"), data);
});
