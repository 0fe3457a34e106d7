//! The four compact stencils, the in-place relaxation update and the
//! synthetic per-cell cost model.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::mesh::{CellCoord, Mesh, MeshDims, MeshError, SharedMesh};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("non-finite value {value} produced at flat index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("cell {0} is not an interior cell")]
    NotInterior(CellCoord),
    #[error("rank {rank} out of range for {total} cells")]
    RankOutOfRange { rank: usize, total: usize },
    #[error("stencil {kind} needs a {need}D mesh, got {got}D")]
    DimensionMismatch {
        kind: StencilKind,
        need: usize,
        got: usize,
    },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("cannot parse {what} from {input:?}")]
    Parse { what: &'static str, input: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StencilKind {
    /// 5-point finite differences, 2D.
    Fd5,
    /// 9-point finite elements, 2D.
    Fe9,
    /// 7-point finite differences, 3D.
    Fd7,
    /// 27-point, 3D.
    Fe27,
}

impl StencilKind {
    pub const ALL: [StencilKind; 4] = [Self::Fd5, Self::Fe9, Self::Fd7, Self::Fe27];

    pub fn dim(self) -> usize {
        match self {
            Self::Fd5 | Self::Fe9 => 2,
            Self::Fd7 | Self::Fe27 => 3,
        }
    }

    /// Whether only face neighbours are coupled (the `2d+1`-point kinds).
    pub fn is_face_only(self) -> bool {
        matches!(self, Self::Fd5 | Self::Fd7)
    }

    pub fn centre_weight(self) -> f64 {
        match self {
            Self::Fd5 => 4.0,
            Self::Fe9 => 8.0 / 3.0,
            Self::Fd7 => 6.0,
            Self::Fe27 => 26.0,
        }
    }

    pub fn neighbour_weight(self) -> f64 {
        match self {
            Self::Fe9 => -1.0 / 3.0,
            _ => -1.0,
        }
    }

    /// Neighbour displacement vectors, centre excluded, in lexicographic
    /// order with `x` fastest.
    pub fn offsets(self) -> Vec<[isize; 3]> {
        let dim = self.dim();
        let zr: &[isize] = if dim == 3 { &[-1, 0, 1] } else { &[0] };
        let mut out = Vec::new();
        for &dz in zr {
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let d = [dx, dy, dz];
                    let nonzero = d.iter().filter(|&&v| v != 0).count();
                    let keep = if self.is_face_only() {
                        nonzero == 1
                    } else {
                        nonzero >= 1
                    };
                    if keep {
                        out.push(d);
                    }
                }
            }
        }
        out
    }

    /// Whether two distinct cells are coupled by this stencil.
    pub fn adjacent(self, a: CellCoord, b: CellCoord) -> bool {
        let mut nonzero = 0;
        for axis in 0..3 {
            let d = a.0[axis].abs_diff(b.0[axis]);
            if d > 1 {
                return false;
            }
            nonzero += d;
        }
        match nonzero {
            0 => false,
            1 => true,
            _ => !self.is_face_only(),
        }
    }

    /// Flat-index displacements of the neighbours on a mesh of shape `dims`.
    pub fn flat_offsets(self, dims: MeshDims) -> Vec<isize> {
        let s = dims.stride() as isize;
        self.offsets()
            .into_iter()
            .map(|[dx, dy, dz]| (dz * s + dy) * s + dx)
            .collect()
    }
}

impl fmt::Display for StencilKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fd5 => "fd5",
            Self::Fe9 => "fe9",
            Self::Fd7 => "fd7",
            Self::Fe27 => "fe27",
        })
    }
}

impl FromStr for StencilKind {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fd5" => Ok(Self::Fd5),
            "fe9" => Ok(Self::Fe9),
            "fd7" => Ok(Self::Fd7),
            "fe27" => Ok(Self::Fe27),
            _ => Err(KernelError::Parse {
                what: "stencil",
                input: s.to_owned(),
            }),
        }
    }
}

/// Extra work per stencil entry computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CostModel {
    /// Every cell uses the same `k`.
    Constant(u32),
    /// `k` runs from 0 to 99 in 100 equal slices of the lexicographic rank.
    Ramp,
}

impl CostModel {
    pub fn cost_k(&self, rank: usize, total: usize) -> Result<u32, KernelError> {
        if rank >= total {
            return Err(KernelError::RankOutOfRange { rank, total });
        }
        Ok(self.k_at(rank, total))
    }

    #[inline]
    pub fn k_at(&self, rank: usize, total: usize) -> u32 {
        match *self {
            Self::Constant(k) => k,
            Self::Ramp => ((100 * rank as u128) / total as u128).min(99) as u32,
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        matches!(self, Self::Constant(_))
    }
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(k) => write!(f, "const:{k}"),
            Self::Ramp => f.write_str("ramp"),
        }
    }
}

impl FromStr for CostModel {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || KernelError::Parse {
            what: "cost model",
            input: s.to_owned(),
        };
        if s == "ramp" {
            return Ok(Self::Ramp);
        }
        let k = s.strip_prefix("const:").ok_or_else(bad)?;
        k.parse().map(Self::Constant).map_err(|_| bad())
    }
}

/// Stencil entry after `k` rounds of inert extra work.
///
/// The sine chain depends on the previous result so it cannot be hoisted or
/// merged, and `acc * 0.0` is NaN-propagating so it cannot be folded away.
/// For finite `acc` the result is bitwise `w` whenever `w != 0`.
#[inline(always)]
fn costly_entry(w: f64, k: u32) -> f64 {
    if k == 0 {
        return w;
    }
    let mut acc = 0.0f64;
    for _ in 0..k {
        acc = (acc + w).sin();
    }
    w + acc * 0.0
}

/// A stencil compiled for one mesh shape.
#[derive(Debug, Clone)]
pub struct Stencil {
    kind: StencilKind,
    dims: MeshDims,
    offsets: Vec<isize>,
    weight: f64,
    centre: f64,
}

impl Stencil {
    pub fn new(kind: StencilKind, dims: MeshDims) -> Result<Self, KernelError> {
        if kind.dim() != dims.dim() {
            return Err(KernelError::DimensionMismatch {
                kind,
                need: kind.dim(),
                got: dims.dim(),
            });
        }
        Ok(Self {
            kind,
            dims,
            offsets: kind.flat_offsets(dims),
            weight: kind.neighbour_weight(),
            centre: kind.centre_weight(),
        })
    }

    pub fn kind(&self) -> StencilKind {
        self.kind
    }

    pub fn dims(&self) -> MeshDims {
        self.dims
    }

    pub fn flat_offsets(&self) -> &[isize] {
        &self.offsets
    }

    /// Flat indices of the neighbours of an interior cell.
    pub fn neighbours(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        self.offsets
            .iter()
            .map(move |&o| index.wrapping_add_signed(o))
    }

    /// Relaxes one interior cell in place:
    /// `u_c <- -(sum_j w_j u_j) / w_c`.
    ///
    /// `index` must be an interior flat index of the mesh this stencil was
    /// compiled for.
    #[inline]
    pub fn update(&self, mesh: &SharedMesh<'_>, index: usize, k: u32) -> Result<f64, KernelError> {
        debug_assert!(!self.dims.is_halo_index(index));
        let mut sum = 0.0;
        for &o in &self.offsets {
            let w = costly_entry(self.weight, k);
            sum += w * mesh.load(index.wrapping_add_signed(o));
        }
        let centre = costly_entry(self.centre, k);
        let value = -sum / centre;
        if !value.is_finite() {
            return Err(KernelError::NonFinite { index, value });
        }
        mesh.store(index, value);
        Ok(value)
    }

    /// Local residual `w_c u_c + sum_j w_j u_j` at an interior cell.
    pub fn residual_at(&self, values: &[f64], index: usize) -> f64 {
        let mut r = self.centre * values[index];
        for &o in &self.offsets {
            r += self.weight * values[index.wrapping_add_signed(o)];
        }
        r
    }
}

/// Single-cell update through an exclusive mesh borrow.
pub fn update_cell(mesh: &mut Mesh, kind: StencilKind, c: CellCoord, k: u32) -> Result<f64, KernelError> {
    let dims = mesh.dims();
    if !dims.is_interior(c) {
        return Err(KernelError::NotInterior(c));
    }
    let stencil = Stencil::new(kind, dims)?;
    let index = dims.index_unchecked(c);
    stencil.update(&mesh.shared(), index, k)
}

/// Maximum absolute residual over interior cells.
pub fn residual_max(mesh: &Mesh, kind: StencilKind) -> Result<f64, KernelError> {
    let dims = mesh.dims();
    let stencil = Stencil::new(kind, dims)?;
    let values = mesh.values();
    Ok(dims
        .interior_cells()
        .map(|c| stencil.residual_at(values, dims.index_unchecked(c)).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(kind: StencilKind, n: usize) -> MeshDims {
        MeshDims::new(kind.dim(), n).unwrap()
    }

    fn centre(kind: StencilKind, n: usize) -> CellCoord {
        let m = n / 2 + 1;
        if kind.dim() == 2 {
            CellCoord::new2(m, m)
        } else {
            CellCoord::new3(m, m, m)
        }
    }

    #[test]
    fn stencil_shapes() {
        assert_eq!(StencilKind::Fd5.offsets().len(), 4);
        assert_eq!(StencilKind::Fe9.offsets().len(), 8);
        assert_eq!(StencilKind::Fd7.offsets().len(), 6);
        assert_eq!(StencilKind::Fe27.offsets().len(), 26);
        for kind in StencilKind::ALL {
            let row = kind.centre_weight() + kind.offsets().len() as f64 * kind.neighbour_weight();
            assert!(row.abs() < 1e-14, "{kind}: row sum {row}");
        }
        assert_eq!(StencilKind::Fe9.neighbour_weight(), -1.0 / 3.0);
        assert_eq!(StencilKind::Fe9.centre_weight(), 8.0 / 3.0);
    }

    #[test]
    fn adjacency_matches_offsets() {
        for kind in StencilKind::ALL {
            let c = centre(kind, 3);
            for d in kind.offsets() {
                let mut o = c;
                for a in 0..3 {
                    o.0[a] = (o.0[a] as isize + d[a]) as usize;
                }
                assert!(kind.adjacent(c, o));
            }
            assert!(!kind.adjacent(c, c));
        }
        assert!(!StencilKind::Fd5.adjacent(CellCoord::new2(1, 1), CellCoord::new2(2, 2)));
        assert!(StencilKind::Fe9.adjacent(CellCoord::new2(1, 1), CellCoord::new2(2, 2)));
    }

    #[test]
    fn fd5_neighbour_average() {
        let d = dims(StencilKind::Fd5, 3);
        let mut m = Mesh::filled(d, 1.0);
        let c = CellCoord::new2(2, 2);
        assert_eq!(update_cell(&mut m, StencilKind::Fd5, c, 0).unwrap(), 1.0);

        let mut m = Mesh::zeros(d);
        m.set(CellCoord::new2(2, 1), 1.0).unwrap();
        assert_eq!(update_cell(&mut m, StencilKind::Fd5, c, 0).unwrap(), 0.25);
        assert_eq!(m.get(c).unwrap(), 0.25);
    }

    #[test]
    fn fe9_constant_fixed_point() {
        let mut m = Mesh::filled(dims(StencilKind::Fe9, 3), 2.0);
        let v = update_cell(&mut m, StencilKind::Fe9, CellCoord::new2(2, 2), 0).unwrap();
        assert!((v - 2.0).abs() <= 4.0 * f64::EPSILON, "{v}");
    }

    #[test]
    fn dyadic_constants_are_exact_fixed_points() {
        for kind in [StencilKind::Fd5, StencilKind::Fd7, StencilKind::Fe27] {
            for value in [0.0, 1.0, 0.5, -3.0] {
                let mut m = Mesh::filled(dims(kind, 3), value);
                let c = centre(kind, 3);
                assert_eq!(update_cell(&mut m, kind, c, 0).unwrap(), value);
            }
        }
    }

    #[test]
    fn cost_work_is_inert() {
        for kind in StencilKind::ALL {
            let d = dims(kind, 4);
            let base = Mesh::init(d, 11, 0.25);
            for c in d.interior_cells() {
                let mut a = base.clone();
                let mut b = base.clone();
                let va = update_cell(&mut a, kind, c, 0).unwrap();
                let vb = update_cell(&mut b, kind, c, 100).unwrap();
                assert_eq!(va.to_bits(), vb.to_bits());
                assert_eq!(a.values(), b.values());
            }
        }
    }

    #[test]
    fn non_interior_and_mismatch_errors() {
        let mut m = Mesh::zeros(dims(StencilKind::Fd5, 3));
        assert!(matches!(
            update_cell(&mut m, StencilKind::Fd5, CellCoord::new2(0, 1), 0),
            Err(KernelError::NotInterior(_))
        ));
        assert!(matches!(
            update_cell(&mut m, StencilKind::Fd7, CellCoord::new2(1, 1), 0),
            Err(KernelError::NotInterior(_)) | Err(KernelError::DimensionMismatch { .. })
        ));
        assert!(Stencil::new(StencilKind::Fe27, m.dims()).is_err());
    }

    #[test]
    fn non_finite_is_reported() {
        let mut m = Mesh::zeros(dims(StencilKind::Fd5, 3));
        m.set(CellCoord::new2(1, 2), f64::INFINITY).unwrap();
        m.set(CellCoord::new2(3, 2), f64::NEG_INFINITY).unwrap();
        let r = update_cell(&mut m, StencilKind::Fd5, CellCoord::new2(2, 2), 0);
        assert!(matches!(r, Err(KernelError::NonFinite { .. })));
    }

    #[test]
    fn residual_examples() {
        let d = dims(StencilKind::Fd5, 5);
        let mut m = Mesh::filled(d, 0.75);
        assert_eq!(residual_max(&m, StencilKind::Fd5).unwrap(), 0.0);
        m.set(CellCoord::new2(3, 3), 1.75).unwrap();
        assert_eq!(residual_max(&m, StencilKind::Fd5).unwrap(), 4.0);
    }

    #[test]
    fn cost_k_examples() {
        assert_eq!(CostModel::Constant(100).cost_k(0, 10).unwrap(), 100);
        assert_eq!(CostModel::Constant(100).cost_k(9, 10).unwrap(), 100);
        assert_eq!(CostModel::Ramp.cost_k(0, 100).unwrap(), 0);
        assert_eq!(CostModel::Ramp.cost_k(99, 100).unwrap(), 99);
        assert_eq!(CostModel::Ramp.cost_k(5, 7).unwrap(), 71);
        assert!(matches!(
            CostModel::Ramp.cost_k(7, 7),
            Err(KernelError::RankOutOfRange { .. })
        ));
    }

    #[test]
    fn parse_round_trip() {
        for kind in StencilKind::ALL {
            assert_eq!(kind.to_string().parse::<StencilKind>().unwrap(), kind);
        }
        for cost in [CostModel::Ramp, CostModel::Constant(0), CostModel::Constant(100)] {
            assert_eq!(cost.to_string().parse::<CostModel>().unwrap(), cost);
        }
        assert!("const:x".parse::<CostModel>().is_err());
        assert!("fd9".parse::<StencilKind>().is_err());
    }

    #[test]
    fn work_grows_with_k() {
        use std::time::Instant;
        let kind = StencilKind::Fd5;
        let d = dims(kind, 3);
        let stencil = Stencil::new(kind, d).unwrap();
        let mut m = Mesh::init(d, 3, 0.0);
        let idx = d.index_unchecked(CellCoord::new2(2, 2));
        let mut median_for = |k: u32| {
            let s = m.shared();
            let mut samples: Vec<u128> = (0..1001)
                .map(|_| {
                    let t = Instant::now();
                    stencil.update(&s, idx, k).unwrap();
                    t.elapsed().as_nanos()
                })
                .collect();
            samples.sort_unstable();
            samples[samples.len() / 2]
        };
        let t0 = median_for(0);
        let t10 = median_for(10);
        let t100 = median_for(100);
        assert!(t0 <= t10 && t10 <= t100, "{t0} {t10} {t100}");
    }
}
