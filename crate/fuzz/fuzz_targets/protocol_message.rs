#![no_main]

use libfuzzer_sys::fuzz_target;
use tintsplat::service::parse_client_message;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(msg) = parse_client_message(text) {
        let json = serde_json::to_string(&msg).unwrap();
        assert_eq!(parse_client_message(&json).unwrap(), msg);
    }
});
