//! Wall-clock comparison of rasterizing straight into HWC versus CHW.

use std::time::Instant;

use serde::Serialize;

use super::raster::{render_layout, PixelLayout};
use super::RenderConfig;
use crate::error::{Error, Result};
use crate::image::from_chw;
use crate::scene::{Camera, Scene};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub variant: String,
    pub median_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Both layouts produced the same pixels after normalizing to HWC.
    pub identical: bool,
}

impl BenchReport {
    /// `variant,median_ms,min_ms,max_ms` CSV with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,median_ms,min_ms,max_ms\n");
        for r in &self.rows {
            out.push_str(&format!("{},{:.6},{:.6},{:.6}\n", r.variant, r.median_ms, r.min_ms, r.max_ms));
        }
        out
    }
}

fn summarize(variant: &str, mut times: Vec<f64>) -> BenchRow {
    times.sort_by(f64::total_cmp);
    let n = times.len();
    let median = if n % 2 == 1 { times[n / 2] } else { 0.5 * (times[n / 2 - 1] + times[n / 2]) };
    BenchRow { variant: variant.to_string(), median_ms: median, min_ms: times[0], max_ms: times[n - 1] }
}

/// Times `repetitions` renders per layout. Runs single-threaded so the
/// numbers reflect the memory access pattern rather than scheduling.
pub fn bench_layouts(scene: &Scene, camera: &Camera, repetitions: usize) -> Result<BenchReport> {
    if repetitions < 10 {
        return Err(Error::Config(format!("bench needs at least 10 repetitions, got {repetitions}")));
    }
    let config = RenderConfig { parallel: false, ..Default::default() };
    let timed = |layout| {
        let mut times = Vec::with_capacity(repetitions);
        let mut last = Vec::new();
        for _ in 0..repetitions {
            let start = Instant::now();
            last = render_layout(scene, camera, &config, layout);
            times.push(start.elapsed().as_secs_f64() * 1e3);
        }
        (times, last)
    };
    let (hwc_times, hwc) = timed(PixelLayout::Hwc);
    let (chw_times, chw) = timed(PixelLayout::Chw);
    let identical = from_chw(camera.width(), camera.height(), &chw)?.data() == hwc.as_slice();
    Ok(BenchReport { rows: vec![summarize("hwc", hwc_times), summarize("chw", chw_times)], identical })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::synthetic::{generate_synthetic_scene, Recipe};

    #[test]
    fn report_shape() {
        let (scene, views) = generate_synthetic_scene(1, &Recipe::named("plane").unwrap()).unwrap();
        let report = bench_layouts(&scene, &views[0].camera(), 10).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.identical);
        for r in &report.rows {
            assert!(r.median_ms > 0.0 && r.min_ms <= r.median_ms && r.median_ms <= r.max_ms);
        }
        let csv = report.to_csv();
        assert!(csv.starts_with("variant,median_ms,min_ms,max_ms\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn too_few_repetitions() {
        let (scene, views) = generate_synthetic_scene(1, &Recipe::named("plane").unwrap()).unwrap();
        assert!(bench_layouts(&scene, &views[0].camera(), 3).is_err());
    }
}
