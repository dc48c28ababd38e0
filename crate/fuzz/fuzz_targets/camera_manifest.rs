#![no_main]

use libfuzzer_sys::fuzz_target;
use tintsplat::scene::cameras::format_manifest;
use tintsplat::scene::parse_manifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(entries) = parse_manifest(text) else { return };
    let again = parse_manifest(&format_manifest(&entries)).unwrap();
    assert_eq!(again.len(), entries.len());
});
