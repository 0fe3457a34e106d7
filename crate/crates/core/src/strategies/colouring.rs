use crate::kernels::StencilKind;
use crate::mesh::{CellCoord, MeshDims};

use super::Line;

/// Red-black for the face-only stencils, `2^d` colours otherwise.
pub fn colour_count(kind: StencilKind) -> usize {
    if kind.is_face_only() {
        2
    } else {
        1 << kind.dim()
    }
}

/// Parity of the coordinate sum for face-only stencils; otherwise the
/// per-axis parity code `sum_a ((c_a - 1) mod 2) * 2^a`, so the first
/// interior cell always has colour 0.
pub fn colour_of(kind: StencilKind, c: CellCoord) -> usize {
    let dim = kind.dim();
    if kind.is_face_only() {
        c.0[..dim].iter().sum::<usize>() % 2
    } else {
        (0..dim).map(|a| ((c.0[a] + 1) % 2) << a).sum()
    }
}

/// Cells of one colour grouped by the outermost loop (rows in 2D, planes in
/// 3D). Each unit is one iteration of the parallel loop.
#[derive(Debug, Clone)]
pub(crate) struct ColourPass {
    pub units: Vec<Vec<Line>>,
}

impl ColourPass {
    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.units.iter().flatten().flat_map(Line::iter)
    }

    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.units.iter().flatten().map(|l| l.len).sum()
    }
}

fn x_line(dims: MeshDims, y: usize, z: usize, x0: usize, step: usize) -> Option<Line> {
    let n = dims.n();
    if x0 > n {
        return None;
    }
    let len = (n - x0) / step + 1;
    let start = dims.index_unchecked(CellCoord([x0, y, z]));
    Some(Line { start, len, step })
}

/// The loop nest of one colour: outer axis (optionally parity-filtered),
/// inner `x` with stride 2 from the colour's first admissible column.
pub(crate) fn colour_pass(dims: MeshDims, kind: StencilKind, colour: usize) -> ColourPass {
    let n = dims.n();
    let full = !kind.is_face_only();
    let keep = |v: usize, axis: usize| !full || (v + 1) % 2 == (colour >> axis) & 1;
    let x_start = |y: usize, z: usize| {
        if full {
            1 + (colour & 1)
        } else if (1 + y + z) % 2 == colour {
            1
        } else {
            2
        }
    };
    let mut units = Vec::new();
    if dims.dim() == 2 {
        for y in (1..=n).filter(|&y| keep(y, 1)) {
            units.extend(x_line(dims, y, 0, x_start(y, 0), 2).map(|l| vec![l]));
        }
    } else {
        for z in (1..=n).filter(|&z| keep(z, 2)) {
            let lines: Vec<Line> = (1..=n)
                .filter(|&y| keep(y, 1))
                .filter_map(|y| x_line(dims, y, z, x_start(y, z), 2))
                .collect();
            if !lines.is_empty() {
                units.push(lines);
            }
        }
    }
    ColourPass { units }
}

pub(crate) fn colour_passes(dims: MeshDims, kind: StencilKind) -> Vec<ColourPass> {
    (0..colour_count(kind)).map(|p| colour_pass(dims, kind, p)).collect()
}

/// All interior cells as a single "colour": rows (2D) or planes (3D) in
/// lexicographic order.
pub(crate) fn single_pass(dims: MeshDims) -> ColourPass {
    let n = dims.n();
    let units = if dims.dim() == 2 {
        (1..=n)
            .filter_map(|y| x_line(dims, y, 0, 1, 1))
            .map(|l| vec![l])
            .collect()
    } else {
        (1..=n)
            .map(|z| (1..=n).filter_map(|y| x_line(dims, y, z, 1, 1)).collect())
            .collect()
    };
    ColourPass { units }
}
