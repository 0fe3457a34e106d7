//! Per-update execution traces and the analyses run on them.
//!
//! One [`TraceRecord`] is written per cell update. Records are appended to a
//! per-worker lane while a sweep runs and merged afterwards; all checks are
//! single-threaded post-processing.

mod check;
mod map;

use std::io::{self, BufRead, Write};
use std::sync::Mutex;
use std::time::Instant;

use crossbeam_utils::CachePadded;
use thiserror::Error;

use crate::mesh::CellCoord;
use crate::taskrt::TaskId;

pub use check::{check_adjacency_exclusion, check_edge_order, ExclusionViolation};
pub use map::{band_contiguity, render_assignment_map, AssignmentMap, PALETTE};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace is missing sweep {sweep} for {} cell(s), first {}", .missing.len(), .missing[0])]
    Incomplete { sweep: usize, missing: Vec<CellCoord> },
    #[error("worker id {worker} is not below the thread count {threads}")]
    WorkerOutOfRange { worker: usize, threads: usize },
    #[error("z-slice {slice} is not an interior plane")]
    BadSlice { slice: usize },
    #[error("malformed trace line {line}: {text:?}")]
    Parse { line: usize, text: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One cell update. `task` is 0 when the update did not run inside a task.
/// Times are nanoseconds since the trace was created, from one monotonic
/// clock; `start <= end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TraceRecord {
    pub task: TaskId,
    pub worker: usize,
    pub cell: usize,
    pub start: u64,
    pub end: u64,
}

impl TraceRecord {
    /// Half-open interval overlap. Empty intervals overlap nothing.
    pub fn overlaps(&self, other: &TraceRecord) -> bool {
        self.start < other.end && other.start < self.end && self.start < self.end && other.start < other.end
    }
}

/// Buffered per-worker trace sink.
#[derive(Debug)]
pub struct ExecutionTrace {
    epoch: Instant,
    lanes: Vec<CachePadded<Mutex<Vec<TraceRecord>>>>,
}

impl ExecutionTrace {
    /// `capacity` records are preallocated in each of the `workers` lanes.
    pub fn new(workers: usize, capacity: usize) -> Self {
        Self {
            epoch: Instant::now(),
            lanes: (0..workers.max(1))
                .map(|_| CachePadded::new(Mutex::new(Vec::with_capacity(capacity))))
                .collect(),
        }
    }

    pub fn workers(&self) -> usize {
        self.lanes.len()
    }

    #[inline]
    pub fn now(&self) -> u64 {
        self.epoch.elapsed().as_nanos() as u64
    }

    #[inline]
    pub fn record(&self, worker: usize, task: TaskId, cell: usize, start: u64, end: u64) {
        let lane = &self.lanes[worker % self.lanes.len()];
        lane.lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(TraceRecord {
                task,
                worker,
                cell,
                start,
                end,
            });
    }

    pub fn len(&self) -> usize {
        self.lanes
            .iter()
            .map(|l| l.lock().unwrap_or_else(|e| e.into_inner()).len())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All records merged, ordered by start time.
    pub fn records(&self) -> Vec<TraceRecord> {
        let mut all: Vec<TraceRecord> = self
            .lanes
            .iter()
            .flat_map(|l| l.lock().unwrap_or_else(|e| e.into_inner()).clone())
            .collect();
        all.sort_by_key(|r| (r.start, r.end, r.worker));
        all
    }

    pub fn clear(&self) {
        for l in &self.lanes {
            l.lock().unwrap_or_else(|e| e.into_inner()).clear();
        }
    }
}

/// Writes `task worker cell start end`, one record per line.
pub fn write_dump<W: Write>(records: &[TraceRecord], mut out: W) -> io::Result<()> {
    for r in records {
        writeln!(out, "{} {} {} {} {}", r.task, r.worker, r.cell, r.start, r.end)?;
    }
    out.flush()
}

pub fn read_dump<R: BufRead>(input: R) -> Result<Vec<TraceRecord>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || TraceError::Parse {
            line: i + 1,
            text: line.clone(),
        };
        let f: Vec<u64> = line
            .split_whitespace()
            .map(|t| t.parse::<u64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        if f.len() != 5 {
            return Err(bad());
        }
        out.push(TraceRecord {
            task: f[0],
            worker: f[1] as usize,
            cell: f[2] as usize,
            start: f[3],
            end: f[4],
        });
    }
    Ok(out)
}

/// Number of updates each flat index received.
pub fn write_counts(records: &[TraceRecord], len: usize) -> Vec<usize> {
    let mut counts = vec![0; len];
    for r in records {
        counts[r.cell] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip() {
        let t = ExecutionTrace::new(2, 4);
        t.record(0, 1, 8, 10, 20);
        t.record(1, 2, 9, 5, 15);
        let recs = t.records();
        assert_eq!(recs[0].cell, 9);
        let mut buf = Vec::new();
        write_dump(&recs, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "2 1 9 5 15\n1 0 8 10 20\n");
        assert_eq!(read_dump(&buf[..]).unwrap(), recs);
        assert!(matches!(read_dump(&b"1 2 3\n"[..]), Err(TraceError::Parse { line: 1, .. })));
    }

    #[test]
    fn overlap_is_half_open() {
        let r = |start, end| TraceRecord {
            task: 0,
            worker: 0,
            cell: 0,
            start,
            end,
        };
        assert!(r(0, 10).overlaps(&r(5, 6)));
        assert!(!r(0, 10).overlaps(&r(10, 12)));
        assert!(!r(3, 3).overlaps(&r(0, 10)));
    }
}
