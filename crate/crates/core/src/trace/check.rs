use std::collections::HashMap;

use crate::kernels::StencilKind;
use crate::mesh::MeshDims;
use crate::taskrt::{DependenceEdge, TaskId};

use super::TraceRecord;

/// Two updates that ran at the same time on equal or stencil-adjacent cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExclusionViolation {
    pub first: TraceRecord,
    pub second: TraceRecord,
}

/// Sweep line over records sorted by start time. The active set holds the
/// records whose interval is still open, so the cost is
/// `O(R log R + overlapping pairs)`.
pub fn check_adjacency_exclusion(
    records: &[TraceRecord],
    kind: StencilKind,
    dims: MeshDims,
) -> Vec<ExclusionViolation> {
    let mut sorted = records.to_vec();
    sorted.sort_by_key(|r| (r.start, r.end));

    let mut active: Vec<TraceRecord> = Vec::new();
    let mut violations = Vec::new();
    for r in sorted {
        active.retain(|a| a.end > r.start);
        if r.end > r.start {
            let rc = dims.coord_of(r.cell);
            for a in &active {
                if a.overlaps(&r) && (a.cell == r.cell || kind.adjacent(dims.coord_of(a.cell), rc)) {
                    violations.push(ExclusionViolation { first: *a, second: r });
                }
            }
            active.push(r);
        }
    }
    violations
}

/// Edges `a -> b` for which some update of `a` had not finished when some
/// update of `b` began.
pub fn check_edge_order(records: &[TraceRecord], edges: &[DependenceEdge]) -> Vec<DependenceEdge> {
    let mut span: HashMap<TaskId, (u64, u64)> = HashMap::new();
    for r in records {
        let e = span.entry(r.task).or_insert((r.start, r.end));
        e.0 = e.0.min(r.start);
        e.1 = e.1.max(r.end);
    }
    edges
        .iter()
        .filter(|e| match (span.get(&e.from), span.get(&e.to)) {
            (Some(&(_, end)), Some(&(start, _))) => end > start,
            _ => false,
        })
        .copied()
        .collect()
}
