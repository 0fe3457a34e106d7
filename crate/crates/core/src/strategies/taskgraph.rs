use crate::kernels::{Stencil, StencilKind};
use crate::mesh::MeshDims;
use crate::taskrt::{TaskId, TaskRecord};

use super::colouring::colour_passes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubmissionOrder {
    /// Plain lexicographic, outer axis slowest.
    Lexicographic,
    /// All colour-0 cells, then colour 1, and so on.
    ColourMajor,
}

/// One task: a run of consecutive cells in submission order with the union
/// of their reads and writes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct TaskGroup {
    pub cells: Vec<usize>,
    pub ins: Vec<usize>,
    pub outs: Vec<usize>,
}

/// Submission sequences of cell indices; groups never cross a sequence.
fn sequences(dims: MeshDims, kind: StencilKind, order: SubmissionOrder) -> Vec<Vec<usize>> {
    match order {
        SubmissionOrder::Lexicographic => vec![dims.interior_cells().map(|c| dims.index_unchecked(c)).collect()],
        SubmissionOrder::ColourMajor => colour_passes(dims, kind)
            .iter()
            .map(|p| p.cells().collect())
            .collect(),
    }
}

pub(crate) fn task_groups(
    stencil: &Stencil,
    order: SubmissionOrder,
    chunk: usize,
) -> Vec<TaskGroup> {
    let chunk = chunk.max(1);
    let mut groups = Vec::new();
    for seq in sequences(stencil.dims(), stencil.kind(), order) {
        for cells in seq.chunks(chunk) {
            let mut ins: Vec<usize> = cells.iter().flat_map(|&c| stencil.neighbours(c)).collect();
            ins.sort_unstable();
            ins.dedup();
            groups.push(TaskGroup {
                cells: cells.to_vec(),
                ins,
                outs: cells.to_vec(),
            });
        }
    }
    groups
}

/// The dependence descriptions a task sweep submits, ids numbered from 1.
pub fn task_records(
    dims: MeshDims,
    kind: StencilKind,
    order: SubmissionOrder,
    chunk: usize,
) -> Result<Vec<TaskRecord>, crate::kernels::KernelError> {
    let stencil = Stencil::new(kind, dims)?;
    Ok(task_groups(&stencil, order, chunk)
        .into_iter()
        .enumerate()
        .map(|(i, g)| TaskRecord::new(i as TaskId + 1, g.ins, g.outs))
        .collect())
}
