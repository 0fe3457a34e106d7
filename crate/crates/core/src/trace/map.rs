use std::collections::HashMap;

use crate::mesh::{CellCoord, MeshDims};

use super::{TraceError, TraceRecord};

/// Worker colours, indexed by `worker % 16`.
pub const PALETTE: [[u8; 3]; 16] = [
    [0x1f, 0x77, 0xb4],
    [0xff, 0x7f, 0x0e],
    [0x2c, 0xa0, 0x2c],
    [0xd6, 0x27, 0x28],
    [0x94, 0x67, 0xbd],
    [0x8c, 0x56, 0x4b],
    [0xe3, 0x77, 0xc2],
    [0x7f, 0x7f, 0x7f],
    [0xbc, 0xbd, 0x22],
    [0x17, 0xbe, 0xcf],
    [0xae, 0xc7, 0xe8],
    [0xff, 0xbb, 0x78],
    [0x98, 0xdf, 0x8a],
    [0xff, 0x98, 0x96],
    [0xc5, 0xb0, 0xd5],
    [0xc4, 0x9c, 0x94],
];

const HALO: [u8; 3] = [0xff, 0xff, 0xff];

/// Which worker updated each interior cell during one sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentMap {
    dims: MeshDims,
    workers: Vec<usize>,
}

impl AssignmentMap {
    /// Picks, for every interior cell, its `sweep`-th update in time order.
    pub fn from_trace(records: &[TraceRecord], dims: MeshDims, sweep: usize) -> Result<Self, TraceError> {
        let mut per_cell: HashMap<usize, Vec<&TraceRecord>> = HashMap::new();
        for r in records {
            per_cell.entry(r.cell).or_default().push(r);
        }
        let mut workers = Vec::with_capacity(dims.interior_len());
        let mut missing = Vec::new();
        for c in dims.interior_cells() {
            let idx = dims.index_unchecked(c);
            match per_cell.get_mut(&idx) {
                Some(list) if list.len() > sweep => {
                    list.sort_by_key(|r| r.start);
                    workers.push(list[sweep].worker);
                }
                _ => {
                    missing.push(c);
                    workers.push(usize::MAX);
                }
            }
        }
        if !missing.is_empty() {
            return Err(TraceError::Incomplete { sweep, missing });
        }
        Ok(Self { dims, workers })
    }

    pub fn from_workers(dims: MeshDims, workers: Vec<usize>) -> Self {
        assert_eq!(workers.len(), dims.interior_len());
        Self { dims, workers }
    }

    pub fn dims(&self) -> MeshDims {
        self.dims
    }

    pub fn worker(&self, c: CellCoord) -> usize {
        self.workers[self.dims.interior_rank(c)]
    }

    pub fn check_workers(&self, threads: usize) -> Result<(), TraceError> {
        match self.workers.iter().find(|&&w| w >= threads) {
            Some(&worker) => Err(TraceError::WorkerOutOfRange { worker, threads }),
            None => Ok(()),
        }
    }

    /// Binary PPM (P6), one pixel per cell including the white halo, row
    /// `y = 0` at the top. For 3D meshes `slice` picks the interior `z` plane.
    pub fn to_ppm(&self, slice: usize) -> Result<Vec<u8>, TraceError> {
        let d = self.dims;
        let z = if d.dim() == 3 {
            if !(1..=d.n()).contains(&slice) {
                return Err(TraceError::BadSlice { slice });
            }
            slice
        } else {
            0
        };
        let side = d.stride();
        let palette: Vec<String> = PALETTE
            .iter()
            .map(|c| format!("{:02x}{:02x}{:02x}", c[0], c[1], c[2]))
            .collect();
        let mut out = format!(
            "P6\n# worker%16 palette: {}; halo ffffff\n{side} {side}\n255\n",
            palette.join(" ")
        )
        .into_bytes();
        out.reserve(side * side * 3);
        for y in 0..side {
            for x in 0..side {
                let c = CellCoord([x, y, z]);
                let rgb = if d.is_interior(c) {
                    PALETTE[self.worker(c) % PALETTE.len()]
                } else {
                    HALO
                };
                out.extend_from_slice(&rgb);
            }
        }
        Ok(out)
    }
}

pub fn render_assignment_map(
    records: &[TraceRecord],
    dims: MeshDims,
    sweep: usize,
    slice: usize,
) -> Result<Vec<u8>, TraceError> {
    AssignmentMap::from_trace(records, dims, sweep)?.to_ppm(slice)
}

/// True iff, for every colour, each worker's cells form one unbroken run of
/// that colour's lexicographic order.
pub fn band_contiguity(map: &AssignmentMap, colour_of: impl Fn(CellCoord) -> usize) -> bool {
    let mut per_colour: HashMap<usize, Vec<usize>> = HashMap::new();
    for c in map.dims.interior_cells() {
        per_colour.entry(colour_of(c)).or_default().push(map.worker(c));
    }
    per_colour.values().all(|seq| {
        let mut closed = std::collections::HashSet::new();
        let mut current = None;
        for &w in seq {
            if current != Some(w) {
                if !closed.insert(w) {
                    return false;
                }
                current = Some(w);
            }
        }
        true
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(worker: usize, cell: usize, start: u64) -> TraceRecord {
        TraceRecord {
            task: 0,
            worker,
            cell,
            start,
            end: start + 1,
        }
    }

    #[test]
    fn incomplete_trace_names_missing_cells() {
        let d = MeshDims::new(2, 2).unwrap();
        let recs: Vec<_> = d
            .interior_cells()
            .skip(1)
            .map(|c| rec(0, d.index_unchecked(c), 0))
            .collect();
        match AssignmentMap::from_trace(&recs, d, 0) {
            Err(TraceError::Incomplete { missing, .. }) => assert_eq!(missing, vec![CellCoord::new2(1, 1)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn picks_requested_sweep() {
        let d = MeshDims::new(2, 1).unwrap();
        let cell = d.index_unchecked(CellCoord::new2(1, 1));
        let recs = vec![rec(2, cell, 50), rec(1, cell, 10)];
        assert_eq!(AssignmentMap::from_trace(&recs, d, 0).unwrap().worker(CellCoord::new2(1, 1)), 1);
        assert_eq!(AssignmentMap::from_trace(&recs, d, 1).unwrap().worker(CellCoord::new2(1, 1)), 2);
        assert!(AssignmentMap::from_trace(&recs, d, 2).is_err());
    }

    #[test]
    fn ppm_layout() {
        let d = MeshDims::new(2, 1).unwrap();
        let map = AssignmentMap::from_workers(d, vec![17]);
        let ppm = map.to_ppm(0).unwrap();
        let header_end = ppm.len() - 27;
        let header = std::str::from_utf8(&ppm[..header_end]).unwrap();
        assert!(header.starts_with("P6\n# worker%16 palette: 1f77b4 ff7f0e"));
        assert!(header.ends_with("\n3 3\n255\n"));
        let px = &ppm[header_end..];
        assert_eq!(&px[0..3], &HALO);
        assert_eq!(&px[12..15], &PALETTE[1]);
        assert_eq!(&px[24..27], &HALO);
    }

    #[test]
    fn contiguity() {
        let d = MeshDims::new(2, 2).unwrap();
        let one_colour = |_: CellCoord| 0;
        let banded = AssignmentMap::from_workers(d, vec![0, 0, 1, 1]);
        assert!(band_contiguity(&banded, one_colour));
        let interleaved = AssignmentMap::from_workers(d, vec![0, 1, 0, 1]);
        assert!(!band_contiguity(&interleaved, one_colour));
        // interleaving across colours is allowed
        assert!(band_contiguity(&interleaved, |c: CellCoord| c.x() % 2));
    }
}
