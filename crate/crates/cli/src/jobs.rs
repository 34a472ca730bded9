//! Minimal deterministic fan-out: run one closure per item on up to
//! `jobs` threads, return results in input order. Output files and report
//! rows are assembled by the caller afterwards, so thread scheduling never
//! leaks into any artifact.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::Result;

pub fn run_jobs<T, R, F>(items: Vec<T>, jobs: usize, worker: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R> + Sync,
{
    let jobs = jobs.max(1);
    let count = items.len();
    if jobs == 1 || count <= 1 {
        return items.into_iter().map(worker).collect();
    }
    let inputs: Vec<Mutex<Option<T>>> = items.into_iter().map(|t| Mutex::new(Some(t))).collect();
    let outputs: Vec<Mutex<Option<Result<R>>>> = (0..count).map(|_| Mutex::new(None)).collect();
    let cursor = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(count) {
            scope.spawn(|| loop {
                let ix = cursor.fetch_add(1, Ordering::SeqCst);
                if ix >= count {
                    break;
                }
                let item = inputs[ix].lock().unwrap().take().unwrap();
                let result = worker(item);
                *outputs[ix].lock().unwrap() = Some(result);
            });
        }
    });
    outputs
        .into_iter()
        .map(|cell| cell.into_inner().unwrap().expect("worker ran"))
        .collect()
}
