#![no_main]

use libfuzzer_sys::fuzz_target;
use tintsplat::image::decode_pfm;

fuzz_target!(|data: &[u8]| {
    if let Ok(pfm) = decode_pfm(data) {
        let _ = pfm.into_depth();
    }
});
