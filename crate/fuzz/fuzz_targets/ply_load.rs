#![no_main]

use libfuzzer_sys::fuzz_target;
use tintsplat::scene::{read_scene_ply, write_scene_ply};

fuzz_target!(|data: &[u8]| {
    let Ok(scene) = read_scene_ply(data) else { return };
    // anything accepted must survive a write/read cycle
    let mut out = Vec::new();
    write_scene_ply(&scene, &mut out).unwrap();
    let again = read_scene_ply(&out).unwrap();
    assert_eq!(again.len(), scene.len());
});
