use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Instant;

use parking_lot::{Condvar, Mutex, RwLock};

use super::dataset::EditedDataset;
use super::step::{IterationMetrics, Optimizer};
use crate::error::{Error, Result};
use crate::scene::Scene;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoopStatus {
    pub iteration: u64,
    pub generation: u64,
    pub last: Option<IterationMetrics>,
    pub iterations_per_second: f64,
    /// Number of snapshots published so far.
    pub snapshots: u64,
    pub paused: bool,
    pub error: Option<String>,
}

#[derive(Default)]
struct Control {
    paused: bool,
    stop: bool,
}

struct Shared {
    snapshot: RwLock<Arc<Scene>>,
    dataset: RwLock<Arc<EditedDataset>>,
    control: Mutex<Control>,
    wake: Condvar,
    status: Mutex<LoopStatus>,
}

impl Shared {
    fn publish(&self, scene: &Scene) {
        *self.snapshot.write() = Arc::new(scene.clone());
        self.status.lock().snapshots += 1;
    }
}

/// Runs [`Optimizer::step`] on a dedicated thread. Readers only ever see
/// whole published snapshots; the dataset can be swapped at any time and is
/// picked up at the next iteration boundary.
pub struct BackgroundOptimizer {
    shared: Arc<Shared>,
    thread: Option<JoinHandle<Optimizer>>,
}

impl BackgroundOptimizer {
    pub fn spawn(optimizer: Optimizer, dataset: Arc<EditedDataset>) -> Result<Self> {
        let shared = Arc::new(Shared {
            snapshot: RwLock::new(Arc::new(optimizer.scene.clone())),
            status: Mutex::new(LoopStatus {
                iteration: optimizer.iteration,
                generation: dataset.generation,
                ..Default::default()
            }),
            dataset: RwLock::new(dataset),
            control: Mutex::new(Control::default()),
            wake: Condvar::new(),
        });
        let worker = shared.clone();
        let thread = std::thread::Builder::new()
            .name("optimizer".into())
            .spawn(move || run_loop(optimizer, &worker))
            .map_err(|e| Error::Optimizer(format!("cannot start optimizer thread: {e}")))?;
        Ok(Self { shared, thread: Some(thread) })
    }

    pub fn snapshot(&self) -> Arc<Scene> {
        self.shared.snapshot.read().clone()
    }

    pub fn dataset(&self) -> Arc<EditedDataset> {
        self.shared.dataset.read().clone()
    }

    pub fn set_dataset(&self, dataset: Arc<EditedDataset>) {
        *self.shared.dataset.write() = dataset;
    }

    pub fn status(&self) -> LoopStatus {
        self.shared.status.lock().clone()
    }

    pub fn pause(&self) {
        self.shared.control.lock().paused = true;
    }

    /// Also clears a pending error so the loop retries.
    pub fn resume(&self) {
        self.shared.control.lock().paused = false;
        self.shared.status.lock().error = None;
        self.shared.wake.notify_all();
    }

    /// Stops after the current iteration and returns the final optimizer.
    pub fn stop(mut self) -> Result<Optimizer> {
        self.halt().ok_or_else(|| Error::Optimizer("optimizer thread panicked".into()))
    }

    fn halt(&mut self) -> Option<Optimizer> {
        self.shared.control.lock().stop = true;
        self.shared.wake.notify_all();
        self.thread.take().and_then(|t| t.join().ok())
    }
}

impl Drop for BackgroundOptimizer {
    fn drop(&mut self) {
        self.halt();
    }
}

fn run_loop(mut opt: Optimizer, shared: &Shared) -> Optimizer {
    let every = opt.config.snapshot_every.max(1);
    let mut window_start = Instant::now();
    let mut window_iters = 0u64;
    loop {
        {
            let mut control = shared.control.lock();
            if control.paused && !control.stop {
                shared.publish(&opt.scene);
                shared.status.lock().paused = true;
                while control.paused && !control.stop {
                    shared.wake.wait(&mut control);
                }
                shared.status.lock().paused = false;
                window_start = Instant::now();
                window_iters = 0;
            }
            if control.stop {
                break;
            }
        }
        let dataset = shared.dataset.read().clone();
        match opt.step(&dataset) {
            Ok(metrics) => {
                window_iters += 1;
                log::trace!("{metrics}");
                let publish = opt.iteration.is_multiple_of(every);
                {
                    let mut status = shared.status.lock();
                    status.iteration = metrics.iteration;
                    status.generation = metrics.generation;
                    status.last = Some(metrics);
                    if publish {
                        let secs = window_start.elapsed().as_secs_f64();
                        if secs > 0.0 {
                            status.iterations_per_second = window_iters as f64 / secs;
                        }
                    }
                }
                if publish {
                    shared.publish(&opt.scene);
                    window_start = Instant::now();
                    window_iters = 0;
                }
            }
            Err(e) => {
                log::warn!("optimizer paused: {e}");
                shared.status.lock().error = Some(e.to_string());
                shared.control.lock().paused = true;
            }
        }
    }
    shared.publish(&opt.scene);
    opt
}
