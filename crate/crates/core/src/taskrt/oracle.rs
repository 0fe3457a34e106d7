//! Brute-force reference for the dependence edges of a submission.
//!
//! Deliberately shares no code with [`super::DependencyTracker`]: every pair
//! of tasks is examined directly against the access rules.

use std::collections::BTreeSet;

use super::tracker::{DependenceEdge, TaskRecord};

/// `i` precedes `j` iff they share a location that one of them writes and no
/// task submitted strictly between them writes it. Quadratic in the number of
/// tasks; meant for small meshes.
pub fn oracle_edges(submission: &[TaskRecord]) -> BTreeSet<DependenceEdge> {
    let writes = |t: &TaskRecord, loc: usize| t.out_locs.contains(&loc);
    let touches = |t: &TaskRecord, loc: usize| t.in_locs.contains(&loc) || t.out_locs.contains(&loc);

    let mut edges = BTreeSet::new();
    for (j, later) in submission.iter().enumerate() {
        for (i, earlier) in submission[..j].iter().enumerate() {
            let conflict = |loc: usize| {
                let ordered = (writes(earlier, loc) && touches(later, loc))
                    || (touches(earlier, loc) && writes(later, loc));
                ordered && !submission[i + 1..j].iter().any(|mid| writes(mid, loc))
            };
            let candidate_locs = earlier.in_locs.iter().chain(&earlier.out_locs);
            if candidate_locs.copied().any(conflict) {
                edges.insert(DependenceEdge::new(earlier.id, later.id));
            }
        }
    }
    edges
}
