//! Runs independent table cells on a worker pool and gathers them in order.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use anyhow::Result;
use rayon::prelude::*;

/// Result of one cell. `value` is `None` when no energy could be produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub value: Option<f64>,
    pub converged: bool,
    pub note: Option<String>,
}

impl Outcome {
    pub fn exact(value: f64) -> Self {
        Outcome {
            value: Some(value),
            converged: true,
            note: None,
        }
    }

    pub fn iterative(value: f64, converged: bool, note: impl Into<String>) -> Self {
        Outcome {
            value: Some(value),
            converged,
            note: (!converged).then(|| note.into()),
        }
    }

    pub fn failed(note: impl Into<String>) -> Self {
        Outcome {
            value: None,
            converged: false,
            note: Some(note.into()),
        }
    }
}

pub struct Cell {
    pub label: String,
    pub job: Box<dyn FnOnce() -> Outcome + Send>,
}

impl Cell {
    pub fn new(label: impl Into<String>, job: impl FnOnce() -> Outcome + Send + 'static) -> Self {
        Cell {
            label: label.into(),
            job: Box::new(job),
        }
    }
}

/// Evaluates `cells` in parallel. Cells still running when `timeout` expires
/// are reported as failed; their threads are abandoned.
pub fn run(cells: Vec<Cell>, threads: Option<usize>, timeout: Option<Duration>) -> Result<Vec<(String, Outcome)>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build()?;
    let labels: Vec<String> = cells.iter().map(|c| c.label.clone()).collect();
    let jobs: Vec<_> = cells.into_iter().map(|c| c.job).collect();
    let n = jobs.len();
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        pool.install(|| {
            jobs.into_par_iter().enumerate().for_each_with(tx, |tx, (i, job)| {
                let out = catch_unwind(AssertUnwindSafe(job)).unwrap_or_else(|_| Outcome::failed("solver panicked"));
                let _ = tx.send((i, out));
            })
        })
    });

    let deadline = timeout.map(|t| Instant::now() + t);
    let mut slots: Vec<Option<Outcome>> = vec![None; n];
    for _ in 0..n {
        let received = match deadline {
            Some(d) => rx.recv_timeout(d.saturating_duration_since(Instant::now())).ok(),
            None => rx.recv().ok(),
        };
        match received {
            Some((i, out)) => slots[i] = Some(out),
            None => break,
        }
    }
    Ok(labels
        .into_iter()
        .zip(slots)
        .map(|(label, slot)| {
            let out = slot.unwrap_or_else(|| match timeout {
                Some(t) => Outcome::failed(format!("timed out after {t:?}")),
                None => Outcome::failed("no result"),
            });
            (label, out)
        })
        .collect())
}
