mod common;

use common::*;
use tintsplat::image::decode_pfm;
use tintsplat::render::{depth_from_gaussians, RenderConfig, DEFAULT_DEPTH_TAU};
use tintsplat::scene::{load_cameras, load_scene_ply};
use tintsplat::selection::{apply_stroke, SelectionMask2D, Tool};
use tintsplat::Image;

fn args<'a>(f: &'a [String], rest: &[&'a str]) -> Vec<&'a str> {
    f.iter().map(String::as_str).chain(rest.iter().copied()).collect()
}

fn stroke_mask(f: &Fixture, view: usize) -> Image {
    let views = load_cameras(&f.cameras).unwrap();
    let mut m = SelectionMask2D::new(views[view].camera());
    apply_stroke(&mut m, Tool::Brush, &[[6.0, 12.0], [26.0, 18.0]], 6.0).unwrap();
    m.to_image()
}

#[test]
fn missing_scene_exits_1_and_names_path() {
    let out = run(&["depth", "--scene", "/no/such/scene.ply", "--cameras", "/no/cams.txt", "--view-id", "0", "--out", "/tmp/x.pfm"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/scene.ply"));
}

#[test]
fn bad_arguments_are_usage_errors() {
    let f = two_blobs(32, 4);
    let i = inputs(&f);
    let out = run(&args(&i, &["edit", "--view-id", "0", "--tint", "red", "--mask", "m.png", "--out", "o.ply"])[..]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn depth_gaussians_matches_library() {
    let f = two_blobs(32, 4);
    let out_path = f.path("d.pfm");
    let i = inputs(&f);
    let mut a = vec!["depth"];
    a.extend(args(&i, &["--view-id", "1", "--depth-method", "gaussians", "--out", out_path.to_str().unwrap()]));
    let out = run(&a);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let pfm = decode_pfm(&file_bytes(&out_path)).unwrap().into_depth().unwrap();
    let scene = load_scene_ply(&f.scene).unwrap();
    let cam = load_cameras(&f.cameras).unwrap()[1].camera();
    let direct = depth_from_gaussians(&scene, &cam, DEFAULT_DEPTH_TAU, &RenderConfig::default());
    for (a, b) in pfm.data().iter().zip(direct.data()) {
        assert!((a.is_nan() && b.is_nan()) || *a == (*b as f32) as f64 || (a.is_infinite() && b.is_infinite()));
    }
}

#[test]
fn depth_errors() {
    let f = two_blobs(32, 4);
    let i = inputs(&f);
    let mut a = vec!["depth"];
    a.extend(args(&i, &["--view-id", "7", "--out", "/tmp/never.pfm"]));
    assert_eq!(run(&a).status.code(), Some(1));
    let mut a = vec!["depth"];
    a.extend(args(&i, &["--view-id", "0", "--depth-method", "gaussians", "--out", "/no/such/dir/d.pfm"]));
    assert_eq!(run(&a).status.code(), Some(1));
}

#[test]
fn edit_empty_mask_exits_2() {
    let f = two_blobs(32, 4);
    let mask = f.path("mask.png");
    Image::new(32, 32).save_png(&mask).unwrap();
    let i = inputs(&f);
    let mut a = vec!["edit"];
    let out_ply = f.path("out.ply");
    a.extend(args(&i, &["--view-id", "0", "--tint", "1,0.2,0.2", "--mask", mask.to_str().unwrap(), "--out", out_ply.to_str().unwrap()]));
    let out = run(&a);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty selection"));
}

#[test]
fn edit_mask_size_mismatch_exits_1() {
    let f = two_blobs(32, 4);
    let mask = f.path("mask.png");
    Image::filled(16, 16, [1.0; 3]).save_png(&mask).unwrap();
    let i = inputs(&f);
    let mut a = vec!["edit"];
    a.extend(args(&i, &["--view-id", "0", "--tint", "1,0.2,0.2", "--mask", mask.to_str().unwrap(), "--out", "/tmp/never.ply"]));
    assert_eq!(run(&a).status.code(), Some(1));
}

#[test]
fn edit_prints_metrics_and_writes_scene() {
    let f = two_blobs(32, 4);
    let mask = f.path("mask.png");
    stroke_mask(&f, 0).save_png(&mask).unwrap();
    let out_ply = f.path("out.ply");
    let csv = f.path("metrics.csv");
    let i = inputs(&f);
    let mut a = vec!["edit"];
    a.extend(args(
        &i,
        &[
            "--view-id", "0", "--tint", "1,0.2,0.2", "--iters", "20", "--depth-method", "gaussians",
            "--mask", mask.to_str().unwrap(), "--out", out_ply.to_str().unwrap(), "--metrics", csv.to_str().unwrap(),
        ],
    ));
    let out = run(&a);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "iter,viewId,generation,l1,ssim,total");
    assert!(lines[1].starts_with("20,"), "{stdout}");
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 21);
    let edited = load_scene_ply(&out_ply).unwrap();
    let original = load_scene_ply(&f.scene).unwrap();
    assert!(edited.same_geometry(&original));
    assert_ne!(edited, original);
}

#[test]
fn identity_tint_on_renders_is_a_no_op() {
    let f = two_blobs(32, 4);
    let mask = f.path("mask.png");
    stroke_mask(&f, 0).save_png(&mask).unwrap();
    let out_ply = f.path("out.ply");
    let i = inputs(&f);
    let mut a = vec!["edit"];
    a.extend(args(
        &i,
        &[
            "--targets", "renders", "--view-id", "0", "--tint", "1,1,1", "--iters", "30", "--depth-method", "gaussians",
            "--mask", mask.to_str().unwrap(), "--out", out_ply.to_str().unwrap(),
        ],
    ));
    assert!(run(&a).status.success());
    let edited = load_scene_ply(&out_ply).unwrap();
    let original = load_scene_ply(&f.scene).unwrap();
    for (e, o) in edited.gaussians.iter().zip(&original.gaussians) {
        for (ce, co) in e.sh.iter().zip(&o.sh) {
            for c in 0..3 {
                assert!((ce[c] - co[c]).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn bench_emits_table_and_summary() {
    let f = two_blobs(32, 4);
    let csv = f.path("bench.csv");
    let i = inputs(&f);
    let mut a = vec!["bench"];
    a.extend(args(&i, &["--repetitions", "10", "--out", csv.to_str().unwrap()]));
    let out = run(&a);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("variant,median_ms,min_ms,max_ms\nhwc,"));
    assert!(stdout.contains("images identical: true"));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 3);
    let mut a = vec!["bench"];
    a.extend(args(&i, &["--repetitions", "3"]));
    assert_eq!(run(&a).status.code(), Some(1));
}

#[test]
fn synth_writes_loadable_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fx");
    let r = run(&["synth", "--recipe", "plane", "--seed", "3", "--width", "24", "--height", "20", "--views", "3", "--out", out.to_str().unwrap()]);
    assert!(r.status.success());
    let scene = load_scene_ply(&out.join("scene.ply")).unwrap();
    let views = load_cameras(&out.join("cameras.txt")).unwrap();
    assert_eq!(scene.len(), 100);
    assert_eq!(views.len(), 3);
    assert_eq!((views[0].image.width(), views[0].image.height()), (24, 20));
    assert_eq!(run(&["synth", "--recipe", "cube", "--out", "/tmp/x"]).status.code(), Some(1));
}
