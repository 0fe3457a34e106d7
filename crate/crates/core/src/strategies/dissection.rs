use crate::mesh::{CellCoord, MeshDims};

use super::Line;

/// Axis-aligned box of interior cells, bounds inclusive. Unused axes of a 2D
/// region are pinned to `0..=0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Region {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl Region {
    pub fn interior(dims: MeshDims) -> Self {
        let n = dims.n();
        if dims.dim() == 2 {
            Self {
                lo: [1, 1, 0],
                hi: [n, n, 0],
            }
        } else {
            Self {
                lo: [1, 1, 1],
                hi: [n, n, n],
            }
        }
    }

    pub fn extent(&self, axis: usize) -> usize {
        self.hi[axis] + 1 - self.lo[axis]
    }

    pub fn len(&self) -> usize {
        (0..3).map(|a| self.extent(a)).product()
    }

    pub fn contains(&self, c: CellCoord) -> bool {
        (0..3).all(|a| (self.lo[a]..=self.hi[a]).contains(&c.0[a]))
    }

    pub fn cells(&self) -> impl Iterator<Item = CellCoord> + '_ {
        let r = *self;
        (r.lo[2]..=r.hi[2]).flat_map(move |z| {
            (r.lo[1]..=r.hi[1]).flat_map(move |y| (r.lo[0]..=r.hi[0]).map(move |x| CellCoord([x, y, z])))
        })
    }

    pub(crate) fn lines(&self, dims: MeshDims) -> impl Iterator<Item = Line> + '_ {
        let r = *self;
        (r.lo[2]..=r.hi[2]).flat_map(move |z| {
            (r.lo[1]..=r.hi[1]).map(move |y| Line {
                start: dims.index_unchecked(CellCoord([r.lo[0], y, z])),
                len: r.extent(0),
                step: 1,
            })
        })
    }
}

/// One node of the dissection tree. Leaves have no children and an empty
/// separator; their whole region is updated directly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DissectionNode {
    pub region: Region,
    pub children: Vec<DissectionNode>,
    pub separator: Vec<CellCoord>,
    pub depth: usize,
}

impl DissectionNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn leaves(&self) -> Vec<&DissectionNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            if n.is_leaf() {
                out.push(n);
            } else {
                stack.extend(n.children.iter().rev());
            }
        }
        out
    }

    pub fn height(&self) -> usize {
        1 + self.children.iter().map(Self::height).max().unwrap_or(0)
    }

    /// Every cell of the region, children first (octant order) then the
    /// separator; the order a single worker follows.
    pub fn cells_in_order(&self) -> Vec<CellCoord> {
        if self.is_leaf() {
            return self.region.cells().collect();
        }
        let mut out: Vec<CellCoord> = self.children.iter().flat_map(Self::cells_in_order).collect();
        out.extend_from_slice(&self.separator);
        out
    }
}

/// Number of splitting levels for `threads` workers in `dim` dimensions:
/// the first level whose block count `2^(dim*L)` reaches `threads`, plus one.
pub fn dissection_levels(threads: usize, dim: usize) -> usize {
    let mut level = 0;
    while (1usize << (dim * level)) < threads {
        level += 1;
    }
    level + 1
}

/// Recursive `2^dim` split at the per-axis midpoints `lo + extent / 2`.
/// Regions with an extent of 2 or less on any axis stay leaves.
pub fn dissect(region: Region, threads: usize, dim: usize) -> DissectionNode {
    split(region, dim, 0, dissection_levels(threads.max(1), dim))
}

fn split(region: Region, dim: usize, depth: usize, levels: usize) -> DissectionNode {
    let leaf = DissectionNode {
        region,
        children: Vec::new(),
        separator: Vec::new(),
        depth,
    };
    if depth >= levels || (0..dim).any(|a| region.extent(a) <= 2) {
        return leaf;
    }
    let mut mid = [0usize; 3];
    for a in 0..dim {
        mid[a] = region.lo[a] + region.extent(a) / 2;
    }
    let mut children = Vec::with_capacity(1 << dim);
    for octant in 0..(1usize << dim) {
        let mut child = region;
        for a in 0..dim {
            if octant >> a & 1 == 0 {
                child.hi[a] = mid[a] - 1;
            } else {
                child.lo[a] = mid[a] + 1;
            }
        }
        if (0..dim).all(|a| child.lo[a] <= child.hi[a]) {
            children.push(split(child, dim, depth + 1, levels));
        }
    }
    let separator = region
        .cells()
        .filter(|c| (0..dim).any(|a| c.0[a] == mid[a]))
        .collect();
    DissectionNode {
        region,
        children,
        separator,
        depth,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::StencilKind;
    use std::collections::HashSet;

    fn square(n: usize) -> Region {
        Region::interior(MeshDims::new(2, n).unwrap())
    }

    #[test]
    fn five_by_five_one_level() {
        // T=1 gives exactly one level
        let root = dissect(square(5), 1, 2);
        assert_eq!(root.children.len(), 4);
        assert!(root.children.iter().all(|c| c.is_leaf() && c.region.len() == 4));
        assert_eq!(root.separator.len(), 9);
        assert!(root.separator.iter().all(|c| c.x() == 3 || c.y() == 3));
        assert_eq!(root.children[0].region, Region { lo: [1, 1, 0], hi: [2, 2, 0] });
        assert_eq!(root.children[1].region, Region { lo: [4, 1, 0], hi: [5, 2, 0] });
    }

    #[test]
    fn level_rule() {
        assert_eq!(dissection_levels(1, 2), 1);
        assert_eq!(dissection_levels(4, 2), 2);
        assert_eq!(dissection_levels(5, 2), 3);
        assert_eq!(dissection_levels(8, 3), 2);
        assert_eq!(dissection_levels(9, 3), 3);
        let root = dissect(square(64), 5, 2);
        assert_eq!(root.height(), 4);
        assert_eq!(root.leaves().len(), 64);
    }

    #[test]
    fn tiny_regions_are_leaves() {
        let root = dissect(square(2), 8, 2);
        assert!(root.is_leaf());
    }

    fn check_partition(node: &DissectionNode, kinds: &[StencilKind]) {
        let mut seen = HashSet::new();
        let mut total = node.separator.len();
        for c in &node.separator {
            assert!(node.region.contains(*c));
            assert!(seen.insert(*c));
        }
        for child in &node.children {
            total += child.region.len();
            for c in child.region.cells() {
                assert!(node.region.contains(c));
                assert!(seen.insert(c));
            }
            check_partition(child, kinds);
        }
        if !node.is_leaf() {
            assert_eq!(total, node.region.len());
            for (i, a) in node.children.iter().enumerate() {
                for b in &node.children[i + 1..] {
                    for ca in a.region.cells() {
                        for cb in b.region.cells() {
                            assert!(kinds.iter().all(|k| !k.adjacent(ca, cb)));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn partitions_exhaustively() {
        for w in 1..=9 {
            for h in 1..=9 {
                let r = Region { lo: [1, 1, 0], hi: [w, h, 0] };
                for t in [1, 2, 4, 5] {
                    check_partition(&dissect(r, t, 2), &[StencilKind::Fe9]);
                }
            }
        }
        for e in 1..=7 {
            let r = Region { lo: [1, 1, 1], hi: [e, e + 1, e + 2] };
            check_partition(&dissect(r, 2, 3), &[StencilKind::Fe27]);
        }
    }

    #[test]
    fn order_is_children_then_separator() {
        let root = dissect(square(5), 1, 2);
        let order = root.cells_in_order();
        assert_eq!(order.len(), 25);
        assert_eq!(&order[..4], &[
            CellCoord::new2(1, 1),
            CellCoord::new2(2, 1),
            CellCoord::new2(1, 2),
            CellCoord::new2(2, 2)
        ]);
        assert_eq!(&order[16..], &root.separator[..]);
    }
}
