//! Workspace voxelization and the largest inscribed cuboid search.
//!
//! A grid with steps `(a/N0, b/N0, c/N0)` turns "largest box of proportions
//! a×b×c" into "largest index-space cube of feasible nodes", which a
//! three-dimensional extension of the maximal-square dynamic program solves in
//! one pass over the nodes.

use std::io::{BufRead, Read, Write};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("mask dims {mask:?} do not match grid dims {spec:?}")]
    DimensionMismatch { mask: [usize; 3], spec: [usize; 3] },
    #[error("mask dims {dims:?} exceed the brute-force limit of {limit} per axis")]
    TooLarge { dims: [usize; 3], limit: usize },
    #[error("malformed mask data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGridSpec {
    origin: [f64; 3],
    proportions: [f64; 3],
    resolution: u32,
    dims: [usize; 3],
}

/// Uniform grid whose per-axis steps are the cuboid proportions over `N0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGridSpec")]
pub struct GridSpec {
    origin: [f64; 3],
    proportions: [f64; 3],
    resolution: u32,
    dims: [usize; 3],
}

impl TryFrom<RawGridSpec> for GridSpec {
    type Error = GridError;

    fn try_from(r: RawGridSpec) -> Result<Self, GridError> {
        GridSpec::new(r.origin, r.proportions, r.resolution, r.dims)
    }
}

impl GridSpec {
    pub fn new(origin: [f64; 3], proportions: [f64; 3], resolution: u32, dims: [usize; 3]) -> Result<Self, GridError> {
        if resolution == 0 {
            return Err(GridError::InvalidSpec("resolution N0 must be positive".into()));
        }
        if !proportions.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(GridError::InvalidSpec(format!("proportions must be positive: {proportions:?}")));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(GridError::InvalidSpec(format!("origin must be finite: {origin:?}")));
        }
        if dims.iter().any(|d| *d < 2) {
            return Err(GridError::InvalidSpec(format!("need at least 2 nodes per axis: {dims:?}")));
        }
        Ok(Self { origin, proportions, resolution, dims })
    }

    /// Grid containing `[lo, hi]` with a margin on each side.
    ///
    /// Both ends are snapped one unit outward on the lattice
    /// `proportion / 16`, independent of `N0`. When `N0` is a multiple of 16,
    /// grids at `N0` and `m·N0` over the same box share both ends and every
    /// coarse node appears in the fine grid at bit-identical coordinates.
    pub fn covering(proportions: [f64; 3], resolution: u32, lo: [f64; 3], hi: [f64; 3]) -> Result<Self, GridError> {
        if resolution == 0 {
            return Err(GridError::InvalidSpec("resolution N0 must be positive".into()));
        }
        let mut origin = [0.0; 3];
        let mut dims = [0usize; 3];
        for i in 0..3 {
            if !(lo[i].is_finite() && hi[i].is_finite() && lo[i] <= hi[i]) {
                return Err(GridError::InvalidSpec(format!("bad covering box {lo:?}..{hi:?}")));
            }
            let step = proportions[i] / resolution as f64;
            let unit = proportions[i] / 16.0;
            origin[i] = ((lo[i] / unit).floor() - 1.0) * unit;
            let end = ((hi[i] / unit).ceil() + 1.0) * unit;
            dims[i] = ((end - origin[i]) / step - 1e-9).ceil() as usize + 1;
        }
        Self::new(origin, proportions, resolution, dims)
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn proportions(&self) -> [f64; 3] {
        self.proportions
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn step(&self) -> [f64; 3] {
        let n = self.resolution as f64;
        [self.proportions[0] / n, self.proportions[1] / n, self.proportions[2] / n]
    }

    pub fn node_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn node_position(&self, idx: [usize; 3]) -> Vector3<f64> {
        let s = self.step();
        Vector3::new(
            self.origin[0] + idx[0] as f64 * s[0],
            self.origin[1] + idx[1] as f64 * s[1],
            self.origin[2] + idx[2] as f64 * s[2],
        )
    }

    /// Node closest to `p`, clamped into the grid.
    pub fn nearest_node(&self, p: &Vector3<f64>) -> [usize; 3] {
        let s = self.step();
        let mut idx = [0; 3];
        for i in 0..3 {
            let f = ((p[i] - self.origin[i]) / s[i]).round();
            idx[i] = f.clamp(0.0, (self.dims[i] - 1) as f64) as usize;
        }
        idx
    }

    pub fn linear_index(&self, idx: [usize; 3]) -> usize {
        linear(self.dims, idx)
    }

    /// Node indices in lexicographic `(i, j, k)` order.
    pub fn indices(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let [ni, nj, nk] = self.dims;
        (0..ni).flat_map(move |i| (0..nj).flat_map(move |j| (0..nk).map(move |k| [i, j, k])))
    }
}

fn linear(dims: [usize; 3], idx: [usize; 3]) -> usize {
    (idx[0] * dims[1] + idx[1]) * dims[2] + idx[2]
}

/// Dense bit-packed boolean grid, linear index `(i·nj + j)·nk + k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibilityMask {
    dims: [usize; 3],
    words: Vec<u64>,
}

const MASK_MAGIC: &[u8; 8] = b"PKMMASK1";

impl FeasibilityMask {
    pub fn new(dims: [usize; 3]) -> Self {
        let n: usize = dims.iter().product();
        Self { dims, words: vec![0; n.div_ceil(64)] }
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut([usize; 3]) -> bool) -> Self {
        let mut m = Self::new(dims);
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    if f([i, j, k]) {
                        m.set([i, j, k], true);
                    }
                }
            }
        }
        m
    }

    /// Mask from flags in linear index order.
    ///
    /// # Panics
    /// If `bits` does not hold exactly one flag per node.
    pub fn from_bools(dims: [usize; 3], bits: &[bool]) -> Self {
        let mut m = Self::new(dims);
        assert_eq!(bits.len(), m.len(), "one flag per node");
        for (n, _) in bits.iter().enumerate().filter(|(_, b)| **b) {
            m.words[n / 64] |= 1 << (n % 64);
        }
        m
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, idx: [usize; 3]) -> bool {
        self.get_linear(linear(self.dims, idx))
    }

    #[inline]
    pub fn get_linear(&self, n: usize) -> bool {
        self.words[n / 64] >> (n % 64) & 1 == 1
    }

    pub fn set(&mut self, idx: [usize; 3], value: bool) {
        let n = linear(self.dims, idx);
        if value {
            self.words[n / 64] |= 1 << (n % 64);
        } else {
            self.words[n / 64] &= !(1 << (n % 64));
        }
    }

    pub fn count_true(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Pointwise implication `self ⇒ other`.
    pub fn is_subset_of(&self, other: &FeasibilityMask) -> bool {
        self.dims == other.dims && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Binary export: magic `PKMMASK1`, the three dims as little-endian u64,
    /// then `ceil(n/8)` bytes with node `n` at bit `n % 8` of byte `n / 8`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<(), GridError> {
        w.write_all(MASK_MAGIC)?;
        for d in self.dims {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        let nbytes = self.len().div_ceil(8);
        let bytes: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).take(nbytes).collect();
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, GridError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MASK_MAGIC {
            return Err(GridError::Format("bad magic".into()));
        }
        let mut dims = [0usize; 3];
        for d in dims.iter_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *d = usize::try_from(u64::from_le_bytes(b)).map_err(|e| GridError::Format(e.to_string()))?;
        }
        let mut m = Self::new(dims);
        let mut bytes = vec![0u8; m.len().div_ceil(8)];
        r.read_exact(&mut bytes)?;
        for (wi, chunk) in bytes.chunks(8).enumerate() {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            m.words[wi] = u64::from_le_bytes(buf);
        }
        let n = m.len();
        if n % 64 != 0 && m.words.last().is_some_and(|w| w >> (n % 64) != 0) {
            return Err(GridError::Format("padding bits set".into()));
        }
        Ok(m)
    }

    /// CSV triple list `i,j,k,value` over every node, header included.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), GridError> {
        writeln!(w, "i,j,k,value")?;
        for i in 0..self.dims[0] {
            for j in 0..self.dims[1] {
                for k in 0..self.dims[2] {
                    writeln!(w, "{i},{j},{k},{}", u8::from(self.get([i, j, k])))?;
                }
            }
        }
        Ok(())
    }

    /// Reads a triple list; dims are inferred from the largest indices and
    /// nodes not listed are false.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, GridError> {
        let mut rows = Vec::new();
        let mut max = [0usize; 3];
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (n == 0 && line.starts_with('i')) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(GridError::Format(format!("line {}: expected 4 fields", n + 1)));
            }
            let parse = |s: &str| s.parse::<usize>().map_err(|e| GridError::Format(format!("line {}: {e}", n + 1)));
            let idx = [parse(fields[0])?, parse(fields[1])?, parse(fields[2])?];
            let value = match fields[3] {
                "0" | "false" => false,
                "1" | "true" => true,
                other => return Err(GridError::Format(format!("line {}: bad value {other}", n + 1))),
            };
            for a in 0..3 {
                max[a] = max[a].max(idx[a]);
            }
            rows.push((idx, value));
        }
        if rows.is_empty() {
            return Err(GridError::Format("empty mask".into()));
        }
        let mut m = Self::new([max[0] + 1, max[1] + 1, max[2] + 1]);
        for (idx, v) in rows {
            m.set(idx, v);
        }
        Ok(m)
    }
}

/// Per-node scalar measure; `NaN` marks unreachable or failed nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    dims: [usize; 3],
    values: Vec<f64>,
}

impl MetricField {
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, idx: [usize; 3]) -> f64 {
        self.values[linear(self.dims, idx)]
    }

    /// Mask of nodes whose value is defined and satisfies `accept`.
    pub fn threshold(&self, accept: impl Fn(f64) -> bool) -> FeasibilityMask {
        let bits: Vec<bool> = self.values.iter().map(|v| !v.is_nan() && accept(*v)).collect();
        FeasibilityMask::from_bools(self.dims, &bits)
    }
}

/// Evaluates `predicate` at every node. Predicates are total: anything
/// unreachable or numerically failed must map to `false`.
pub fn evaluate_mask<P>(spec: &GridSpec, predicate: P) -> FeasibilityMask
where
    P: Fn(&Vector3<f64>) -> bool + Sync,
{
    let [_, nj, nk] = spec.dims;
    let bits: Vec<bool> = (0..spec.node_count())
        .into_par_iter()
        .map(|n| predicate(&spec.node_position([n / (nj * nk), (n / nk) % nj, n % nk])))
        .collect();
    FeasibilityMask::from_bools(spec.dims, &bits)
}

pub fn evaluate_field<F>(spec: &GridSpec, measure: F) -> MetricField
where
    F: Fn(&Vector3<f64>) -> Option<f64> + Sync,
{
    let [_, nj, nk] = spec.dims;
    let values = (0..spec.node_count())
        .into_par_iter()
        .map(|n| measure(&spec.node_position([n / (nj * nk), (n / nk) % nj, n % nk])).unwrap_or(f64::NAN))
        .collect();
    MetricField { dims: spec.dims, values }
}

/// Scale factor and placement of the largest inscribed cuboid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuboidResult {
    pub found: bool,
    /// Nodes per cube edge.
    pub node_edge: usize,
    pub index_min: [usize; 3],
    pub index_max: [usize; 3],
    pub cart_min: [f64; 3],
    pub cart_max: [f64; 3],
    pub mu: f64,
}

impl CuboidResult {
    fn empty() -> Self {
        Self {
            found: false,
            node_edge: 0,
            index_min: [0; 3],
            index_max: [0; 3],
            cart_min: [0.0; 3],
            cart_max: [0.0; 3],
            mu: 0.0,
        }
    }

    /// Cartesian edge lengths `mu · (a, b, c)`.
    pub fn extent(&self, spec: &GridSpec) -> [f64; 3] {
        let p = spec.proportions();
        [self.mu * p[0], self.mu * p[1], self.mu * p[2]]
    }
}

/// Largest all-true index cube, found by the recurrence
/// `Φ(i,j,k) = 1 + min` over the seven lower neighbours of `(i,j,k)`.
///
/// `Φ` is the edge of the largest cube whose max corner is `(i,j,k)`; only two
/// `i`-planes are kept. Ties go to the lexicographically smallest max corner.
pub fn largest_cuboid(mask: &FeasibilityMask, spec: &GridSpec) -> Result<CuboidResult, GridError> {
    if mask.dims != spec.dims {
        return Err(GridError::DimensionMismatch { mask: mask.dims, spec: spec.dims });
    }
    let [ni, nj, nk] = mask.dims;
    // One row and column of zero padding replaces the boundary initialisation.
    let w = nk + 1;
    let mut prev = vec![0u32; (nj + 1) * w];
    let mut cur = vec![0u32; (nj + 1) * w];
    let mut best = 0u32;
    let mut corner = [0usize; 3];
    let mut n = 0usize;
    for i in 0..ni {
        for j in 0..nj {
            for k in 0..nk {
                let at = (j + 1) * w + k + 1;
                let v = if mask.get_linear(n) {
                    1 + prev[at]
                        .min(cur[at - w])
                        .min(cur[at - 1])
                        .min(prev[at - w])
                        .min(prev[at - 1])
                        .min(cur[at - w - 1])
                        .min(prev[at - w - 1])
                } else {
                    0
                };
                cur[at] = v;
                if v > best {
                    best = v;
                    corner = [i, j, k];
                }
                n += 1;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    if best == 0 {
        return Ok(CuboidResult::empty());
    }
    let m = best as usize;
    let d = m - 1;
    let index_min = [corner[0] - d, corner[1] - d, corner[2] - d];
    let lo = spec.node_position(index_min);
    let hi = spec.node_position(corner);
    Ok(CuboidResult {
        found: true,
        node_edge: m,
        index_min,
        index_max: corner,
        cart_min: [lo.x, lo.y, lo.z],
        cart_max: [hi.x, hi.y, hi.z],
        mu: d as f64 / spec.resolution() as f64,
    })
}

pub const BRUTE_FORCE_LIMIT: usize = 16;

/// Exhaustive reference for [`largest_cuboid`]: tries every axis-aligned
/// index cube, largest edge first.
pub fn brute_force_cuboid(mask: &FeasibilityMask) -> Result<usize, GridError> {
    let dims = mask.dims;
    if dims.iter().any(|d| *d > BRUTE_FORCE_LIMIT) {
        return Err(GridError::TooLarge { dims, limit: BRUTE_FORCE_LIMIT });
    }
    let all_true = |start: [usize; 3], m: usize| {
        (0..m).all(|a| (0..m).all(|b| (0..m).all(|c| mask.get([start[0] + a, start[1] + b, start[2] + c]))))
    };
    let max_edge = *dims.iter().min().unwrap();
    for m in (1..=max_edge).rev() {
        for i in 0..=dims[0] - m {
            for j in 0..=dims[1] - m {
                for k in 0..=dims[2] - m {
                    if all_true([i, j, k], m) {
                        return Ok(m);
                    }
                }
            }
        }
    }
    Ok(0)
}

/// One cuboid per threshold of a monotone predicate family. With thresholds
/// ordered from tight to loose the node edges are non-decreasing.
pub fn nested_cuboids<F, P>(spec: &GridSpec, family: F, thresholds: &[f64]) -> Result<Vec<CuboidResult>, GridError>
where
    F: Fn(f64) -> P,
    P: Fn(&Vector3<f64>) -> bool + Sync,
{
    thresholds.iter().map(|t| largest_cuboid(&evaluate_mask(spec, family(*t)), spec)).collect()
}
