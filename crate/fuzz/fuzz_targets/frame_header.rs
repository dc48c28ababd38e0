#![no_main]

use libfuzzer_sys::fuzz_target;
use tintsplat::service::{decode_frame, decode_frame_rgba, FrameHeader};

fuzz_target!(|data: &[u8]| {
    if let Ok(header) = FrameHeader::parse(data) {
        assert_eq!(FrameHeader::parse(&header.to_bytes()).unwrap(), header);
    }
    if let Ok((header, payload)) = decode_frame(data) {
        assert_eq!(header.payload_len as usize, payload.len());
        let _ = decode_frame_rgba(data);
    }
});
