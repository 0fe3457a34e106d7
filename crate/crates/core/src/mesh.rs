//! Cartesian cell-value grid with a one-cell Dirichlet halo.
//!
//! Storage is a single flat `f64` buffer of `(n + 2)^dim` values in row-major
//! order with `x` varying fastest. Interior cells have every coordinate in
//! `1..=n`; anything touching `0` or `n + 1` belongs to the halo.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MeshError {
    #[error("unsupported dimension {0}; only 2 and 3 are supported")]
    Dimension(usize),
    #[error("interior extent must be at least 1")]
    EmptyInterior,
    #[error("coordinate {coord} is outside the mesh (dim {dim}, extent {n} plus halo)")]
    OutOfBounds {
        coord: CellCoord,
        dim: usize,
        n: usize,
    },
}

/// A cell position. Unused trailing axes are zero for 2D meshes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellCoord(pub [usize; 3]);

impl CellCoord {
    pub const fn new2(x: usize, y: usize) -> Self {
        Self([x, y, 0])
    }

    pub const fn new3(x: usize, y: usize, z: usize) -> Self {
        Self([x, y, z])
    }

    pub fn x(&self) -> usize {
        self.0[0]
    }

    pub fn y(&self) -> usize {
        self.0[1]
    }

    pub fn z(&self) -> usize {
        self.0[2]
    }
}

impl fmt::Display for CellCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.0[0], self.0[1], self.0[2])
    }
}

/// Shape of a mesh, detached from its values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MeshDims {
    dim: usize,
    n: usize,
}

impl MeshDims {
    pub fn new(dim: usize, n: usize) -> Result<Self, MeshError> {
        if dim != 2 && dim != 3 {
            return Err(MeshError::Dimension(dim));
        }
        if n == 0 {
            return Err(MeshError::EmptyInterior);
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Interior extent per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Extent per axis including both halo layers.
    pub fn stride(&self) -> usize {
        self.n + 2
    }

    pub fn len(&self) -> usize {
        self.stride().pow(self.dim as u32)
    }

    pub fn interior_len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn contains(&self, c: CellCoord) -> bool {
        let s = self.stride();
        (0..self.dim).all(|a| c.0[a] < s) && (self.dim..3).all(|a| c.0[a] == 0)
    }

    pub fn is_interior(&self, c: CellCoord) -> bool {
        (0..self.dim).all(|a| (1..=self.n).contains(&c.0[a])) && (self.dim..3).all(|a| c.0[a] == 0)
    }

    pub fn index(&self, c: CellCoord) -> Result<usize, MeshError> {
        if !self.contains(c) {
            return Err(MeshError::OutOfBounds {
                coord: c,
                dim: self.dim,
                n: self.n,
            });
        }
        Ok(self.index_unchecked(c))
    }

    /// Flat index without the bounds check. Callers must pass in-bounds coordinates.
    #[inline]
    pub fn index_unchecked(&self, c: CellCoord) -> usize {
        let s = self.stride();
        (c.0[2] * s + c.0[1]) * s + c.0[0]
    }

    pub fn coord_of(&self, index: usize) -> CellCoord {
        let s = self.stride();
        CellCoord([index % s, (index / s) % s, index / (s * s)])
    }

    /// Lexicographic rank of an interior cell among all interior cells.
    #[inline]
    pub fn interior_rank(&self, c: CellCoord) -> usize {
        let n = self.n;
        let z = if self.dim == 3 { c.0[2] - 1 } else { 0 };
        (z * n + (c.0[1] - 1)) * n + (c.0[0] - 1)
    }

    /// Interior cells, outer axis slowest.
    pub fn interior_cells(&self) -> impl Iterator<Item = CellCoord> + '_ {
        let n = self.n;
        let zs = if self.dim == 3 { 1..=n } else { 0..=0 };
        zs.flat_map(move |z| {
            (1..=n).flat_map(move |y| (1..=n).map(move |x| CellCoord([x, y, z])))
        })
    }

    pub fn is_halo_index(&self, index: usize) -> bool {
        !self.is_interior(self.coord_of(index))
    }
}

#[derive(Clone, PartialEq)]
pub struct Mesh {
    dims: MeshDims,
    values: Vec<f64>,
}

impl fmt::Debug for Mesh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mesh")
            .field("dim", &self.dims.dim)
            .field("n", &self.dims.n)
            .finish_non_exhaustive()
    }
}

impl Mesh {
    /// All-zero mesh.
    pub fn zeros(dims: MeshDims) -> Self {
        Self {
            dims,
            values: vec![0.0; dims.len()],
        }
    }

    pub fn filled(dims: MeshDims, value: f64) -> Self {
        Self {
            dims,
            values: vec![value; dims.len()],
        }
    }

    /// Halo set to `boundary_value`, interior drawn uniformly from `[0, 1)`
    /// with ChaCha8 seeded by `seed`, in lexicographic interior order.
    pub fn init(dims: MeshDims, seed: u64, boundary_value: f64) -> Self {
        let mut mesh = Self::filled(dims, boundary_value);
        mesh.reinit(seed, boundary_value);
        mesh
    }

    pub fn reinit(&mut self, seed: u64, boundary_value: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.values.fill(boundary_value);
        let dims = self.dims;
        for c in dims.interior_cells() {
            let v: f64 = rng.random();
            self.values[dims.index_unchecked(c)] = v;
        }
    }

    pub fn dims(&self) -> MeshDims {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.dim
    }

    pub fn n(&self) -> usize {
        self.dims.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn index(&self, c: CellCoord) -> Result<usize, MeshError> {
        self.dims.index(c)
    }

    pub fn get(&self, c: CellCoord) -> Result<f64, MeshError> {
        Ok(self.values[self.dims.index(c)?])
    }

    pub fn set(&mut self, c: CellCoord, v: f64) -> Result<(), MeshError> {
        let i = self.dims.index(c)?;
        self.values[i] = v;
        Ok(())
    }

    pub fn interior_cells(&self) -> impl Iterator<Item = CellCoord> + '_ {
        self.dims.interior_cells()
    }

    /// Halo values in flat-index order.
    pub fn halo_values(&self) -> Vec<f64> {
        (0..self.values.len())
            .filter(|&i| self.dims.is_halo_index(i))
            .map(|i| self.values[i])
            .collect()
    }

    /// SHA-256 over the little-endian bit patterns of the whole buffer,
    /// truncated to 64 bits and rendered as hex.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for v in &self.values {
            h.update(v.to_bits().to_le_bytes());
        }
        let out = h.finalize();
        out[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Shared view permitting concurrent writes to disjoint cells.
    pub fn shared(&mut self) -> SharedMesh<'_> {
        SharedMesh::new(self)
    }
}

const _: () = assert!(std::mem::align_of::<f64>() == std::mem::align_of::<AtomicU64>());
const _: () = assert!(std::mem::size_of::<f64>() == std::mem::size_of::<AtomicU64>());

/// Concurrently writable view of a mesh buffer.
///
/// Every access is a relaxed atomic load or store of the value's bits, so
/// the view is `Sync` without per-cell locks. Ordering between updates of
/// neighbouring cells comes from the scheduler that drives the sweep.
#[derive(Clone, Copy)]
pub struct SharedMesh<'a> {
    dims: MeshDims,
    cells: &'a [AtomicU64],
}

impl<'a> SharedMesh<'a> {
    fn new(mesh: &'a mut Mesh) -> Self {
        let slice: &'a mut [f64] = &mut mesh.values;
        // SAFETY: size and alignment match (checked above) and the exclusive
        // borrow guarantees no non-atomic access for the lifetime of the view.
        let cells = unsafe { &*(slice as *mut [f64] as *const [AtomicU64]) };
        Self {
            dims: mesh.dims,
            cells,
        }
    }

    pub fn dims(&self) -> MeshDims {
        self.dims
    }

    #[inline]
    pub fn load(&self, index: usize) -> f64 {
        f64::from_bits(self.cells[index].load(Ordering::Relaxed))
    }

    #[inline]
    pub fn store(&self, index: usize, v: f64) {
        self.cells[index].store(v.to_bits(), Ordering::Relaxed)
    }
}
