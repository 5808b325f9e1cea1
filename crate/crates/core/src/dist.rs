//! Coordinator-model sketching over a row partition, simulated with one
//! thread per worker exchanging owned messages.
//!
//! Protocol: every worker sketches its block with global row indices and
//! ships the state; the coordinator waits for all of them, merges in
//! ascending worker order, takes the truncated SVD of the merged `SA` and
//! broadcasts `V' Sigma'^{-1}`; workers score their own rows and ship the
//! scores back.

use std::ops::Range;
use std::sync::mpsc;
use std::thread;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leverage::{scores_with_basis, sketch_basis, Basis, LeverageResult, Method};
use crate::matrix::Matrix;
use crate::sketch::{SketchSpec, SketchState};

/// `parts` contiguous ranges covering `0..n`, sizes differing by at most
/// one with the larger ranges first.
pub(crate) fn even_ranges(n: usize, parts: usize) -> Vec<Range<usize>> {
    let parts = parts.max(1);
    let (base, extra) = (n / parts, n % parts);
    let mut lo = 0;
    (0..parts)
        .map(|p| {
            let len = base + usize::from(p < extra);
            let r = lo..lo + len;
            lo += len;
            r
        })
        .collect()
}

pub fn partition_rows(n: usize, workers: usize) -> Result<Vec<Range<usize>>> {
    if workers == 0 || workers > n {
        return Err(Error::Config(format!(
            "cannot split {n} rows across {workers} workers"
        )));
    }
    Ok(even_ranges(n, workers))
}

/// One worker's share of `A`.
#[derive(Clone, Debug)]
pub struct Partition {
    pub worker_id: usize,
    pub row_range: Range<usize>,
    pub rows: Matrix,
}

pub fn split(a: &Matrix, workers: usize) -> Result<Vec<Partition>> {
    Ok(partition_rows(a.rows(), workers)?
        .into_iter()
        .enumerate()
        .map(|(worker_id, r)| Partition {
            worker_id,
            rows: a.row_block(r.start, r.end),
            row_range: r,
        })
        .collect())
}

/// Worker-to-coordinator messages.
#[derive(Debug, Serialize, Deserialize)]
pub enum WorkerMessage {
    Sketch {
        worker_id: usize,
        state: SketchState,
        seconds: f64,
    },
    Scores {
        worker_id: usize,
        scores: Vec<f64>,
        seconds: f64,
    },
    Failed {
        worker_id: usize,
        reason: String,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoordinatorReport {
    pub workers: usize,
    pub merged: SketchState,
    pub basis: Basis,
    pub per_worker_sketch_seconds: Vec<f64>,
    pub per_worker_score_seconds: Vec<f64>,
    pub merge_seconds: f64,
    pub svd_seconds: f64,
    /// `w * k * d * 8`: the dense sketches the workers ship, independent of `n`.
    pub bytes_communicated: u64,
    /// What the exact accumulators actually occupy on the wire.
    pub payload_bytes: u64,
}

impl CoordinatorReport {
    /// The report without the merged state and basis.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "workers": self.workers,
            "spec": self.merged.spec(),
            "k": self.merged.k(),
            "d": self.merged.d(),
            "rows_consumed": self.merged.rows_consumed(),
            "effective_rank": self.basis.rank(),
            "bytes_communicated": self.bytes_communicated,
            "payload_bytes": self.payload_bytes,
            "per_worker_sketch_seconds": self.per_worker_sketch_seconds,
            "per_worker_score_seconds": self.per_worker_score_seconds,
            "merge_seconds": self.merge_seconds,
            "svd_seconds": self.svd_seconds,
        })
    }
}

fn worker(
    part: Partition,
    spec: &SketchSpec,
    to_coord: mpsc::Sender<WorkerMessage>,
    from_coord: mpsc::Receiver<Basis>,
) {
    let id = part.worker_id;
    let fail = |e: Error| WorkerMessage::Failed {
        worker_id: id,
        reason: e.to_string(),
    };
    let start = Instant::now();
    let state = SketchState::new(spec).and_then(|mut s| {
        s.consume(&part.rows, part.row_range.start as u64)?;
        Ok(s)
    });
    let msg = match state {
        Ok(state) => WorkerMessage::Sketch {
            worker_id: id,
            state,
            seconds: start.elapsed().as_secs_f64(),
        },
        Err(e) => fail(e),
    };
    if to_coord.send(msg).is_err() {
        return;
    }
    // A closed channel means the coordinator gave up.
    let Ok(basis) = from_coord.recv() else { return };
    let start = Instant::now();
    let msg = match scores_with_basis(&part.rows, &basis) {
        Ok(scores) => WorkerMessage::Scores {
            worker_id: id,
            scores,
            seconds: start.elapsed().as_secs_f64(),
        },
        Err(e) => fail(e),
    };
    let _ = to_coord.send(msg);
}

/// Distributed truncated sketched leverage scores.
///
/// Bit-identical to `leverage_sketched_trunc(a, spec, sv_tol)` for every
/// worker count.
pub fn run_distributed(
    a: &Matrix,
    spec: &SketchSpec,
    workers: usize,
    sv_tol: f64,
) -> Result<(LeverageResult, CoordinatorReport)> {
    if !spec.family.is_hashed() {
        return Err(Error::UnsupportedFamily(format!(
            "{} sketches are not mergeable across row partitions",
            spec.family
        )));
    }
    spec.validate()?;
    if a.cols() != spec.d {
        return Err(Error::DimensionMismatch {
            expected: spec.d,
            found: a.cols(),
        });
    }
    if a.is_zero() {
        return Err(Error::Degenerate("leverage scores of a zero matrix".into()));
    }
    let parts = split(a, workers)?;
    let w = parts.len();

    thread::scope(|scope| {
        let (to_coord, inbox) = mpsc::channel();
        let mut outboxes = Vec::with_capacity(w);
        for part in parts {
            let (tx, rx) = mpsc::channel();
            outboxes.push(tx);
            let to_coord = to_coord.clone();
            scope.spawn(move || worker(part, spec, to_coord, rx));
        }
        drop(to_coord);

        let mut states: Vec<Option<SketchState>> = vec![None; w];
        let mut sketch_seconds = vec![0.0; w];
        for _ in 0..w {
            match inbox.recv() {
                Ok(WorkerMessage::Sketch { worker_id, state, seconds }) => {
                    states[worker_id] = Some(state);
                    sketch_seconds[worker_id] = seconds;
                }
                Ok(WorkerMessage::Failed { worker_id, reason }) => {
                    return Err(Error::Config(format!("worker {worker_id} failed: {reason}")));
                }
                Ok(WorkerMessage::Scores { .. }) | Err(_) => {
                    return Err(Error::Config("worker protocol violated".into()));
                }
            }
        }

        let start = Instant::now();
        let mut states = states.into_iter().map(|s| s.expect("every worker reported"));
        let mut merged = states.next().expect("at least one worker");
        let mut payload = merged.payload_bytes() as u64;
        for s in states {
            payload += s.payload_bytes() as u64;
            merged.merge_from(&s)?;
        }
        let sa = merged.sketch()?;
        let merge_seconds = start.elapsed().as_secs_f64();

        let start = Instant::now();
        let basis = sketch_basis(&sa, Some(sv_tol))?;
        let svd_seconds = start.elapsed().as_secs_f64();

        for tx in &outboxes {
            tx.send(basis.clone())
                .map_err(|_| Error::Config("worker exited before scoring".into()))?;
        }
        let mut blocks: Vec<Option<Vec<f64>>> = vec![None; w];
        let mut score_seconds = vec![0.0; w];
        for _ in 0..w {
            match inbox.recv() {
                Ok(WorkerMessage::Scores { worker_id, scores, seconds }) => {
                    blocks[worker_id] = Some(scores);
                    score_seconds[worker_id] = seconds;
                }
                Ok(WorkerMessage::Failed { worker_id, reason }) => {
                    return Err(Error::Config(format!("worker {worker_id} failed: {reason}")));
                }
                Ok(WorkerMessage::Sketch { .. }) | Err(_) => {
                    return Err(Error::Config("worker protocol violated".into()));
                }
            }
        }
        let scores: Vec<f64> = blocks.into_iter().flatten().flatten().collect();

        let (k, d) = (merged.k() as u64, merged.d() as u64);
        let result = LeverageResult {
            scores,
            method: Method::SketchTrunc,
            effective_rank: basis.rank(),
            eps: spec.eps,
            sv_tol: Some(sv_tol),
            spec: Some(spec.clone()),
        };
        let report = CoordinatorReport {
            workers: w,
            merged,
            basis,
            per_worker_sketch_seconds: sketch_seconds,
            per_worker_score_seconds: score_seconds,
            merge_seconds,
            svd_seconds,
            bytes_communicated: w as u64 * k * d * 8,
            payload_bytes: payload,
        };
        Ok((result, report))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leverage::leverage_sketched_trunc;
    use crate::matrix::gaussian;
    use crate::sketch::SketchFamily;

    #[test]
    fn partition_examples() {
        assert_eq!(partition_rows(10, 2).unwrap(), vec![0..5, 5..10]);
        assert_eq!(partition_rows(10, 3).unwrap(), vec![0..4, 4..7, 7..10]);
        let singles = partition_rows(4, 4).unwrap();
        assert_eq!(singles, vec![0..1, 1..2, 2..3, 3..4]);
        assert!(partition_rows(3, 4).is_err());
        assert!(partition_rows(3, 0).is_err());
        let sizes: Vec<usize> = partition_rows(1000, 3).unwrap().iter().map(|r| r.len()).collect();
        assert_eq!(sizes, vec![334, 333, 333]);
    }

    #[test]
    fn rejects_srht_and_too_many_workers() {
        let a = gaussian(20, 3, 1);
        let srht = SketchSpec::new(SketchFamily::Srht, 0.5, 3, 1);
        assert!(matches!(
            run_distributed(&a, &srht, 2, 1e-6),
            Err(Error::UnsupportedFamily(_))
        ));
        let cs = SketchSpec::new(SketchFamily::CountSketch, 0.5, 3, 1);
        assert!(matches!(run_distributed(&a, &cs, 21, 1e-6), Err(Error::Config(_))));
    }

    #[test]
    fn matches_serial_bitwise() {
        let a = gaussian(300, 6, 8);
        for fam in [SketchFamily::CountSketch, SketchFamily::Osnap] {
            let spec = SketchSpec::new(fam, 0.5, 6, 77);
            let serial = leverage_sketched_trunc(&a, &spec, 1e-6).unwrap();
            for w in [1, 3, 7] {
                let (dist, report) = run_distributed(&a, &spec, w, 1e-6).unwrap();
                assert_eq!(dist.scores, serial.scores, "{fam} w={w}");
                assert_eq!(report.merged.rows_consumed(), 300);
                assert_eq!(
                    report.bytes_communicated,
                    (w * spec.rows() * 6 * 8) as u64
                );
            }
        }
    }
}
